//! Grid layouts parsed from plain-text assets.
//!
//! One character per cell: `#` wall, `.` plain floor (doorways/corridors),
//! a digit for a room cell (the digit is the room id), `S` the agent spawn
//! (spawn cells belong to room 0).

use std::collections::BTreeMap;

use super::EnvError;

/// A grid coordinate, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Row-major index into a `width`-wide grid.
    pub fn idx(&self, width: usize) -> usize {
        self.row * width + self.col
    }

    pub fn offset(&self, drow: isize, dcol: isize) -> Option<Cell> {
        let r = self.row as isize + drow;
        let c = self.col as isize + dcol;
        if r < 0 || c < 0 {
            None
        } else {
            Some(Cell::new(r as usize, c as usize))
        }
    }
}

/// One room: its id (the digit in the layout file), a human label, and the
/// set of cells it owns. Doorway cells belong to no room.
#[derive(Debug, Clone)]
pub struct RoomDef {
    pub id: usize,
    pub label: String,
    pub cells: Vec<Cell>,
}

/// A parsed, validated grid layout.
#[derive(Debug, Clone)]
pub struct Layout {
    pub name: String,
    pub width: usize,
    pub height: usize,
    walls: Vec<bool>,
    pub rooms: Vec<RoomDef>,
    pub doorways: Vec<Cell>,
    pub spawn: Cell,
    label_to_room: BTreeMap<String, usize>,
}

const FIVE_ROOMS_V1: &str = include_str!("../../assets/layouts/five_rooms_v1.txt");
const MAZE_V1: &str = include_str!("../../assets/layouts/maze_v1.txt");

impl Layout {
    /// Look up a shipped layout by name (`five_rooms`, `maze`).
    pub fn by_name(name: &str) -> Result<Layout, EnvError> {
        match name {
            "five_rooms" => Layout::parse(
                "five_rooms",
                FIVE_ROOMS_V1,
                &[
                    (0, "center"),
                    (1, "upper"),
                    (2, "right"),
                    (3, "lower"),
                    (4, "left"),
                ],
            ),
            "maze" => Layout::parse(
                "maze",
                MAZE_V1,
                &[
                    (0, "room0"),
                    (1, "room1"),
                    (2, "room2"),
                    (3, "room3"),
                    (4, "room4"),
                    (5, "room5"),
                ],
            ),
            other => Err(EnvError::UnknownLayout(other.to_string())),
        }
    }

    /// Parse a layout grid. `labels` maps room ids to human-readable names;
    /// ids without a label get `room<id>`.
    pub fn parse(name: &str, text: &str, labels: &[(usize, &str)]) -> Result<Layout, EnvError> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
        if lines.is_empty() {
            return Err(EnvError::LayoutParse("empty layout".into()));
        }
        let height = lines.len();
        let width = lines[0].chars().count();
        let mut walls = vec![false; width * height];
        let mut room_cells: BTreeMap<usize, Vec<Cell>> = BTreeMap::new();
        let mut doorways = Vec::new();
        let mut spawn = None;
        for (r, line) in lines.iter().enumerate() {
            if line.chars().count() != width {
                return Err(EnvError::LayoutParse(format!("ragged row {r}")));
            }
            for (c, ch) in line.chars().enumerate() {
                let cell = Cell::new(r, c);
                match ch {
                    '#' => walls[cell.idx(width)] = true,
                    '.' => doorways.push(cell),
                    'S' => {
                        if spawn.replace(cell).is_some() {
                            return Err(EnvError::LayoutParse("multiple spawns".into()));
                        }
                        room_cells.entry(0).or_default().push(cell);
                    }
                    d if d.is_ascii_digit() => {
                        room_cells
                            .entry(d.to_digit(10).unwrap() as usize)
                            .or_default()
                            .push(cell);
                    }
                    other => {
                        return Err(EnvError::LayoutParse(format!("bad char `{other}` at {r},{c}")))
                    }
                }
            }
        }
        let spawn = spawn.ok_or_else(|| EnvError::LayoutParse("no spawn".into()))?;
        let label_of = |id: usize| -> String {
            labels
                .iter()
                .find(|(i, _)| *i == id)
                .map(|(_, l)| l.to_string())
                .unwrap_or_else(|| format!("room{id}"))
        };
        let rooms: Vec<RoomDef> = room_cells
            .into_iter()
            .map(|(id, mut cells)| {
                cells.sort();
                RoomDef {
                    id,
                    label: label_of(id),
                    cells,
                }
            })
            .collect();
        let mut label_to_room = BTreeMap::new();
        for (i, room) in rooms.iter().enumerate() {
            label_to_room.insert(room.label.clone(), i);
        }
        let layout = Layout {
            name: name.to_string(),
            width,
            height,
            walls,
            rooms,
            doorways,
            spawn,
            label_to_room,
        };
        layout.validate()?;
        Ok(layout)
    }

    fn validate(&self) -> Result<(), EnvError> {
        // border must be wall
        for r in 0..self.height {
            for c in 0..self.width {
                let edge = r == 0 || c == 0 || r == self.height - 1 || c == self.width - 1;
                if edge && !self.is_wall(Cell::new(r, c)) {
                    return Err(EnvError::LayoutParse(format!("open border at {r},{c}")));
                }
            }
        }
        if self.is_wall(self.spawn) {
            return Err(EnvError::LayoutParse("spawn on a wall".into()));
        }
        // each room must be one connected component
        for room in &self.rooms {
            if room.cells.is_empty() {
                return Err(EnvError::LayoutParse(format!("empty room {}", room.id)));
            }
            let set: std::collections::BTreeSet<Cell> = room.cells.iter().copied().collect();
            let mut seen = std::collections::BTreeSet::new();
            let mut stack = vec![room.cells[0]];
            seen.insert(room.cells[0]);
            while let Some(cur) = stack.pop() {
                for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                    if let Some(n) = cur.offset(dr, dc) {
                        if set.contains(&n) && seen.insert(n) {
                            stack.push(n);
                        }
                    }
                }
            }
            if seen.len() != room.cells.len() {
                return Err(EnvError::LayoutParse(format!("room {} disconnected", room.id)));
            }
        }
        Ok(())
    }

    pub fn is_wall(&self, cell: Cell) -> bool {
        cell.row >= self.height || cell.col >= self.width || self.walls[cell.idx(self.width)]
    }

    /// Wall status of a possibly out-of-grid position; outside counts as wall.
    pub fn is_wall_signed(&self, row: isize, col: isize) -> bool {
        if row < 0 || col < 0 || row >= self.height as isize || col >= self.width as isize {
            true
        } else {
            self.walls[row as usize * self.width + col as usize]
        }
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    pub fn room_index(&self, label: &str) -> Result<usize, EnvError> {
        self.label_to_room
            .get(label)
            .copied()
            .ok_or_else(|| EnvError::UnknownRoom(label.to_string()))
    }

    pub fn room(&self, index: usize) -> &RoomDef {
        &self.rooms[index]
    }

    /// Connected components of non-wall cells, excluding doorways. Room
    /// bodies therefore come out as separate regions.
    pub fn floor_regions_excluding_doorways(&self) -> usize {
        let doors: std::collections::BTreeSet<Cell> = self.doorways.iter().copied().collect();
        let mut seen = vec![false; self.cell_count()];
        let mut regions = 0;
        for r in 0..self.height {
            for c in 0..self.width {
                let start = Cell::new(r, c);
                if self.is_wall(start) || doors.contains(&start) || seen[start.idx(self.width)] {
                    continue;
                }
                regions += 1;
                let mut stack = vec![start];
                seen[start.idx(self.width)] = true;
                while let Some(cur) = stack.pop() {
                    for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                        if let Some(n) = cur.offset(dr, dc) {
                            if n.row < self.height
                                && n.col < self.width
                                && !self.is_wall(n)
                                && !doors.contains(&n)
                                && !seen[n.idx(self.width)]
                            {
                                seen[n.idx(self.width)] = true;
                                stack.push(n);
                            }
                        }
                    }
                }
            }
        }
        regions
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_rooms_counts() {
        let l = Layout::by_name("five_rooms").unwrap();
        assert_eq!((l.width, l.height), (19, 19));
        assert_eq!(l.cell_count(), 361);
        assert_eq!(l.rooms.len(), 5);
        let center = &l.rooms[l.room_index("center").unwrap()];
        assert_eq!(center.cells.len(), 25);
        // the center is a 5x5 block
        let rmin = center.cells.iter().map(|c| c.row).min().unwrap();
        let rmax = center.cells.iter().map(|c| c.row).max().unwrap();
        let cmin = center.cells.iter().map(|c| c.col).min().unwrap();
        let cmax = center.cells.iter().map(|c| c.col).max().unwrap();
        assert_eq!((rmax - rmin + 1, cmax - cmin + 1), (5, 5));
        for label in ["upper", "lower", "left", "right"] {
            let room = &l.rooms[l.room_index(label).unwrap()];
            assert_eq!(room.cells.len(), 48, "room {label}");
        }
        assert_eq!(l.spawn, Cell::new(9, 9));
        assert_eq!(l.floor_regions_excluding_doorways(), 5);
    }

    #[test]
    fn maze_has_six_rooms_in_a_chain() {
        let l = Layout::by_name("maze").unwrap();
        assert_eq!(l.rooms.len(), 6);
        assert_eq!(l.floor_regions_excluding_doorways(), 6);
        // room k only becomes reachable after rooms 1..k-1: BFS from spawn and
        // record the first-touched order of rooms.
        let mut dist = vec![usize::MAX; l.cell_count()];
        let mut queue = std::collections::VecDeque::new();
        dist[l.spawn.idx(l.width)] = 0;
        queue.push_back(l.spawn);
        while let Some(cur) = queue.pop_front() {
            for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                if let Some(n) = cur.offset(dr, dc) {
                    if n.row < l.height && n.col < l.width && !l.is_wall(n) {
                        if dist[n.idx(l.width)] == usize::MAX {
                            dist[n.idx(l.width)] = dist[cur.idx(l.width)] + 1;
                            queue.push_back(n);
                        }
                    }
                }
            }
        }
        let first_touch: Vec<usize> = l
            .rooms
            .iter()
            .map(|r| r.cells.iter().map(|c| dist[c.idx(l.width)]).min().unwrap())
            .collect();
        for k in 1..first_touch.len() {
            assert!(
                first_touch[k] > first_touch[k - 1],
                "room {k} reached before room {}",
                k - 1
            );
        }
    }

    #[test]
    fn unknown_layout_is_an_error() {
        assert!(matches!(
            Layout::by_name("nowhere"),
            Err(EnvError::UnknownLayout(_))
        ));
    }
}
