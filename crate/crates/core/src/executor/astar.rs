//! A* over a 4-connected unit-cost grid.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use crate::geometry::Cell;
use crate::map::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no path to the target region")]
pub struct NoPath;

/// Shortest path from `from` to any open cell of `region`, both ends
/// included. The heuristic is the Manhattan distance to the nearest region
/// cell, which never overestimates on a unit-cost 4-connected grid.
pub fn a_star(grid: &Grid, from: Cell, region: &[Cell]) -> Result<Vec<Cell>, NoPath> {
    let goals: Vec<Cell> = region.iter().copied().filter(|c| grid.is_open(*c)).collect();
    if goals.is_empty() || !grid.is_open(from) {
        return Err(NoPath);
    }
    let h = |c: Cell| goals.iter().map(|g| c.manhattan(*g)).min().unwrap_or(0);
    let mut open = BinaryHeap::new();
    let mut g_score: HashMap<Cell, u32> = HashMap::new();
    let mut parent: HashMap<Cell, Cell> = HashMap::new();
    g_score.insert(from, 0);
    // (f, h) ordering prefers deeper nodes on ties; the cell breaks remaining ties.
    open.push(Reverse((h(from), h(from), from.y, from.x)));
    while let Some(Reverse((_, _, y, x))) = open.pop() {
        let cell = Cell::new(x, y);
        let g = g_score[&cell];
        if goals.contains(&cell) {
            let mut path = vec![cell];
            let mut cur = cell;
            while let Some(&p) = parent.get(&cur) {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Ok(path);
        }
        for n in cell.neighbors() {
            if !grid.is_open(n) {
                continue;
            }
            let tentative = g + 1;
            if g_score.get(&n).is_none_or(|&old| tentative < old) {
                g_score.insert(n, tentative);
                parent.insert(n, cell);
                let hn = h(n);
                open.push(Reverse((tentative + hn, hn, n.y, n.x)));
            }
        }
    }
    Err(NoPath)
}

/// Number of moves in a path returned by [`a_star`].
pub fn path_len(path: &[Cell]) -> usize {
    path.len().saturating_sub(1)
}
