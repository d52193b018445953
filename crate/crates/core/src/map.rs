//! Static floor plans: rooms, doors and furniture placements.
//!
//! A map is described by a JSON [`MapSpec`] and compiled into a [`Layout`],
//! which owns the room partition and the occupancy grid used by the kernel
//! and by path planning.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Cell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoomId(pub u32);

impl std::fmt::Display for RoomId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapError {
    #[error("map dimensions must be positive")]
    EmptyMap,
    #[error("room `{0}` lies outside the map")]
    RoomOutOfBounds(String),
    #[error("rooms `{0}` and `{1}` overlap")]
    Overlap(String, String),
    #[error("duplicate room id or name `{0}`")]
    DuplicateRoom(String),
    #[error("unknown room `{0}`")]
    UnknownRoom(String),
    #[error("door at {0:?} is not a free wall cell")]
    BadDoor([i32; 2]),
    #[error("placement `{0}` is not inside any room or overlaps another placement")]
    BadPlacement(String),
    #[error("room `{0}` has no walkable cell")]
    NoWalkableCell(String),
    #[error("walkable cells are not all connected")]
    Disconnected,
    #[error("invalid map json: {0}")]
    Json(String),
}

/// JSON map description: `{rooms:[{name,rect}], doors:[...], placements:[...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub name: String,
    pub width: i32,
    pub height: i32,
    pub rooms: Vec<RoomSpec>,
    #[serde(default)]
    pub doors: Vec<DoorSpec>,
    #[serde(default)]
    pub placements: Vec<PlacementSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub id: u32,
    pub name: String,
    /// `[x, y, width, height]` of the floor area.
    pub rect: [i32; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoorSpec {
    pub cell: Cell,
    /// Room the door cell is counted in.
    pub room: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FurnitureKind {
    /// Openable receptacle (fridge, cabinet).
    Container,
    /// Always-accessible receptacle (table, counter).
    Surface,
    /// Non-interactive furniture.
    Decor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    Open,
    #[default]
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementSpec {
    pub name: String,
    pub kind: FurnitureKind,
    pub cell: Cell,
    #[serde(default)]
    pub state: InitialState,
    /// Item names this receptacle usually stores.
    #[serde(default)]
    pub affinity: Vec<String>,
}

impl MapSpec {
    pub fn from_json(text: &str) -> Result<Self, MapError> {
        serde_json::from_str(text).map_err(|e| MapError::Json(e.to_string()))
    }

    /// The built-in four-room house.
    pub fn house() -> Self {
        Self::from_json(include_str!("../data/house.json")).expect("bundled house map is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Room {
    pub room_id: RoomId,
    pub room_name: String,
    pub cells: BTreeSet<Cell>,
    pub center: Cell,
}

/// Occupancy grid: `true` means passable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    width: i32,
    height: i32,
    open: Vec<bool>,
}

impl Grid {
    pub fn new(width: i32, height: i32) -> Self {
        Self { width, height, open: vec![false; (width.max(0) * height.max(0)) as usize] }
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    fn index(&self, c: Cell) -> Option<usize> {
        (c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height)
            .then(|| (c.y * self.width + c.x) as usize)
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        self.index(c).is_some()
    }

    pub fn is_open(&self, c: Cell) -> bool {
        self.index(c).is_some_and(|i| self.open[i])
    }

    pub fn set_open(&mut self, c: Cell, open: bool) {
        if let Some(i) = self.index(c) {
            self.open[i] = open;
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Cell::new(x, y)))
    }

    pub fn open_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(|c| self.is_open(*c))
    }
}

/// A compiled map.
#[derive(Debug, Clone)]
pub struct Layout {
    pub spec: MapSpec,
    pub rooms: Vec<Room>,
    room_at: BTreeMap<Cell, RoomId>,
    /// Floor cells (rooms plus doors) with furniture removed.
    walkable: Grid,
    /// Floor cells irrespective of furniture.
    floor: Grid,
    doors: BTreeSet<Cell>,
}

impl Layout {
    pub fn compile(spec: MapSpec) -> Result<Self, MapError> {
        if spec.width <= 0 || spec.height <= 0 {
            return Err(MapError::EmptyMap);
        }
        let mut floor = Grid::new(spec.width, spec.height);
        let mut room_at = BTreeMap::new();
        let mut names = BTreeSet::new();
        let mut ids = BTreeSet::new();
        let mut cells_by_room: BTreeMap<RoomId, BTreeSet<Cell>> = BTreeMap::new();
        let mut owner_name: BTreeMap<RoomId, &str> = BTreeMap::new();
        for room in &spec.rooms {
            if !names.insert(room.name.as_str()) || !ids.insert(room.id) {
                return Err(MapError::DuplicateRoom(room.name.clone()));
            }
            let [x, y, w, h] = room.rect;
            if w <= 0 || h <= 0 || x < 0 || y < 0 || x + w > spec.width || y + h > spec.height {
                return Err(MapError::RoomOutOfBounds(room.name.clone()));
            }
            let id = RoomId(room.id);
            owner_name.insert(id, &room.name);
            for cy in y..y + h {
                for cx in x..x + w {
                    let c = Cell::new(cx, cy);
                    if let Some(prev) = room_at.insert(c, id) {
                        return Err(MapError::Overlap(owner_name[&prev].to_string(), room.name.clone()));
                    }
                    floor.set_open(c, true);
                    cells_by_room.entry(id).or_default().insert(c);
                }
            }
        }
        let by_name: BTreeMap<&str, RoomId> = spec.rooms.iter().map(|r| (r.name.as_str(), RoomId(r.id))).collect();
        let mut doors = BTreeSet::new();
        for door in &spec.doors {
            let id = *by_name.get(door.room.as_str()).ok_or_else(|| MapError::UnknownRoom(door.room.clone()))?;
            if !floor.in_bounds(door.cell) || room_at.contains_key(&door.cell) {
                return Err(MapError::BadDoor(door.cell.into()));
            }
            room_at.insert(door.cell, id);
            floor.set_open(door.cell, true);
            cells_by_room.entry(id).or_default().insert(door.cell);
            doors.insert(door.cell);
        }
        let mut walkable = floor.clone();
        let mut taken = BTreeSet::new();
        for p in &spec.placements {
            if !room_at.contains_key(&p.cell) || doors.contains(&p.cell) || !taken.insert(p.cell) {
                return Err(MapError::BadPlacement(p.name.clone()));
            }
            walkable.set_open(p.cell, false);
        }
        let mut rooms = Vec::with_capacity(spec.rooms.len());
        for rs in &spec.rooms {
            let id = RoomId(rs.id);
            let cells = cells_by_room.remove(&id).unwrap_or_default();
            let [x, y, w, h] = rs.rect;
            // geometric centre in doubled coordinates keeps the arithmetic integral
            let (cx2, cy2) = (2 * x + w - 1, 2 * y + h - 1);
            let center = cells
                .iter()
                .filter(|c| walkable.is_open(**c) && !doors.contains(*c))
                .min_by_key(|c| ((2 * c.x - cx2).pow(2) + (2 * c.y - cy2).pow(2), c.y, c.x))
                .copied()
                .ok_or_else(|| MapError::NoWalkableCell(rs.name.clone()))?;
            rooms.push(Room { room_id: id, room_name: rs.name.clone(), cells, center });
        }
        let layout = Self { spec, rooms, room_at, walkable, floor, doors };
        if !layout.is_connected() {
            return Err(MapError::Disconnected);
        }
        Ok(layout)
    }

    pub fn house() -> Self {
        Self::compile(MapSpec::house()).expect("bundled house map compiles")
    }

    fn is_connected(&self) -> bool {
        let mut open = self.walkable.open_cells();
        let Some(start) = open.next() else { return true };
        let total = 1 + open.count();
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            for n in c.neighbors() {
                if self.walkable.is_open(n) && seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        seen.len() == total
    }

    pub fn width(&self) -> i32 {
        self.spec.width
    }

    pub fn height(&self) -> i32 {
        self.spec.height
    }

    /// Ground-truth passability (walls and furniture block).
    pub fn walkable(&self) -> &Grid {
        &self.walkable
    }

    /// Floor without furniture: what an agent knows before seeing a room.
    pub fn floor(&self) -> &Grid {
        &self.floor
    }

    pub fn is_door(&self, c: Cell) -> bool {
        self.doors.contains(&c)
    }

    pub fn room_of(&self, c: Cell) -> Option<RoomId> {
        self.room_at.get(&c).copied()
    }

    pub fn room(&self, id: RoomId) -> Option<&Room> {
        self.rooms.iter().find(|r| r.room_id == id)
    }

    pub fn room_by_name(&self, name: &str) -> Option<&Room> {
        self.rooms.iter().find(|r| r.room_name == name)
    }

    pub fn room_name(&self, id: RoomId) -> &str {
        self.room(id).map_or("unknown", |r| r.room_name.as_str())
    }

    /// Rooms joined to `id` by at least one pair of 4-adjacent floor cells.
    pub fn adjacent_rooms(&self, id: RoomId) -> BTreeSet<RoomId> {
        let mut out = BTreeSet::new();
        if let Some(room) = self.room(id) {
            for c in &room.cells {
                for n in c.neighbors() {
                    if let Some(other) = self.room_of(n) {
                        if other != id && self.floor.is_open(n) {
                            out.insert(other);
                        }
                    }
                }
            }
        }
        out
    }
}
