//! Plans a shortest path across the house with A* and draws it.
//!
//! `cargo run --example pathfinding -- [from_room] [to_room]`

use reveca::executor::astar::{a_star, path_len};
use reveca::geometry::Cell;
use reveca::map::Layout;

fn main() {
    let mut args = std::env::args().skip(1);
    let from = args.next().unwrap_or_else(|| "kitchen".into());
    let to = args.next().unwrap_or_else(|| "bedroom".into());
    let layout = Layout::house();
    let room = |name: &str| layout.room_by_name(name).unwrap_or_else(|| panic!("no room `{name}`"));
    let start = room(&from).center;
    let goal = room(&to).center;
    let grid = layout.walkable();
    let path = a_star(grid, start, &[goal]).expect("rooms are connected");
    println!("{from} {start} -> {to} {goal}: {} moves", path_len(&path));
    for y in 0..layout.height() {
        let row: String = (0..layout.width())
            .map(|x| {
                let c = Cell::new(x, y);
                if c == start {
                    'S'
                } else if c == goal {
                    'G'
                } else if path.contains(&c) {
                    '*'
                } else if layout.is_door(c) {
                    '+'
                } else if grid.is_open(c) {
                    '.'
                } else {
                    '#'
                }
            })
            .collect();
        println!("{row}");
    }
}
