//! Occupancy grid parsed from ASCII art.
//!
//! Legend: `.` free floor, `#` wall, `f` furniture. Every line is one row of
//! cells; row 0 is the first line and `y` grows down the file. Cell `(c, r)`
//! spans `[c*s, (c+1)*s) x [r*s, (r+1)*s)` for cell size `s`. Blank lines and
//! lines starting with `;` are ignored.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::Point;

pub const CELL_SIZE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Wall,
    Furniture,
}

impl Cell {
    fn from_char(c: char) -> Option<Cell> {
        match c {
            '.' => Some(Cell::Free),
            '#' => Some(Cell::Wall),
            'f' => Some(Cell::Furniture),
            _ => None,
        }
    }

    fn to_char(self) -> char {
        match self {
            Cell::Free => '.',
            Cell::Wall => '#',
            Cell::Furniture => 'f',
        }
    }
}

/// Which cells block a body. Drones flying above furniture only see walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObstacleLayer {
    Ground,
    Air,
}

impl ObstacleLayer {
    pub fn blocks(self, cell: Cell) -> bool {
        match (self, cell) {
            (_, Cell::Free) => false,
            (_, Cell::Wall) => true,
            (ObstacleLayer::Ground, Cell::Furniture) => true,
            (ObstacleLayer::Air, Cell::Furniture) => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellIndex {
    pub col: i32,
    pub row: i32,
}

impl CellIndex {
    pub const fn new(col: i32, row: i32) -> Self {
        CellIndex { col, row }
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.col, self.row)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("line {line}: unknown map character `{ch}`")]
    BadChar { line: usize, ch: char },
    #[error("line {line}: row width {got} differs from first row width {expected}")]
    Ragged {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("map is empty")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "GridRepr", try_from = "GridRepr")]
pub struct GridMap {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    rows: Vec<String>,
}

impl From<GridMap> for GridRepr {
    fn from(g: GridMap) -> Self {
        GridRepr {
            rows: g.to_ascii().lines().map(str::to_string).collect(),
        }
    }
}

impl TryFrom<GridRepr> for GridMap {
    type Error = MapError;
    fn try_from(r: GridRepr) -> Result<Self, MapError> {
        GridMap::parse(&r.rows.join("\n"))
    }
}

impl GridMap {
    pub fn parse(text: &str) -> Result<GridMap, MapError> {
        let mut cells = Vec::new();
        let mut width = None;
        let mut height = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.is_empty() || line.starts_with(';') {
                continue;
            }
            let row: Vec<Cell> = line
                .chars()
                .map(|ch| Cell::from_char(ch).ok_or(MapError::BadChar { line: i + 1, ch }))
                .collect::<Result<_, _>>()?;
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(MapError::Ragged {
                        line: i + 1,
                        expected: w,
                        got: row.len(),
                    })
                }
                _ => {}
            }
            cells.extend(row);
            height += 1;
        }
        let width = width.ok_or(MapError::Empty)?;
        Ok(GridMap {
            width,
            height,
            cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width_m(&self) -> f64 {
        self.width as f64 * CELL_SIZE
    }

    pub fn height_m(&self) -> f64 {
        self.height as f64 * CELL_SIZE
    }

    pub fn in_bounds(&self, c: CellIndex) -> bool {
        c.col >= 0 && c.row >= 0 && (c.col as usize) < self.width && (c.row as usize) < self.height
    }

    pub fn contains_point(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.width_m() && p.y < self.height_m()
    }

    /// Cells outside the map read as walls.
    pub fn get(&self, c: CellIndex) -> Cell {
        if self.in_bounds(c) {
            self.cells[c.row as usize * self.width + c.col as usize]
        } else {
            Cell::Wall
        }
    }

    pub fn set(&mut self, c: CellIndex, cell: Cell) {
        if self.in_bounds(c) {
            self.cells[c.row as usize * self.width + c.col as usize] = cell;
        }
    }

    pub fn cell_of(p: Point) -> CellIndex {
        CellIndex::new(
            (p.x / CELL_SIZE).floor() as i32,
            (p.y / CELL_SIZE).floor() as i32,
        )
    }

    pub fn center(c: CellIndex) -> Point {
        Point::new(
            (c.col as f64 + 0.5) * CELL_SIZE,
            (c.row as f64 + 0.5) * CELL_SIZE,
        )
    }

    pub fn is_free(&self, c: CellIndex) -> bool {
        self.get(c) == Cell::Free
    }

    pub fn cells(&self) -> impl Iterator<Item = (CellIndex, Cell)> + '_ {
        (0..self.height).flat_map(move |r| {
            (0..self.width).map(move |c| {
                let idx = CellIndex::new(c as i32, r as i32);
                (idx, self.get(idx))
            })
        })
    }

    /// Closest point of a cell's square to `p`.
    pub fn closest_point_in_cell(c: CellIndex, p: Point) -> Point {
        let x0 = c.col as f64 * CELL_SIZE;
        let y0 = c.row as f64 * CELL_SIZE;
        Point::new(p.x.clamp(x0, x0 + CELL_SIZE), p.y.clamp(y0, y0 + CELL_SIZE))
    }

    /// Blocking cells whose square lies within `radius` of `p`.
    pub fn blocking_cells_near(
        &self,
        p: Point,
        radius: f64,
        layer: ObstacleLayer,
    ) -> impl Iterator<Item = (CellIndex, f64, Point)> + '_ {
        let lo = GridMap::cell_of(Point::new(p.x - radius, p.y - radius));
        let hi = GridMap::cell_of(Point::new(p.x + radius, p.y + radius));
        (lo.row..=hi.row).flat_map(move |r| {
            (lo.col..=hi.col).filter_map(move |c| {
                let idx = CellIndex::new(c, r);
                if !layer.blocks(self.get(idx)) {
                    return None;
                }
                let q = GridMap::closest_point_in_cell(idx, p);
                let d = q.distance(&p);
                (d <= radius).then_some((idx, d, q))
            })
        })
    }

    /// True if a disc of `radius` centred at `p` overlaps any blocking cell.
    pub fn disc_collides(&self, p: Point, radius: f64, layer: ObstacleLayer) -> bool {
        self.blocking_cells_near(p, radius, layer)
            .any(|(_, d, _)| d < radius)
    }

    /// Every cell crossed by the segment `a`-`b` is free.
    pub fn line_of_sight(&self, a: Point, b: Point) -> bool {
        let len = a.distance(&b);
        let steps = ((len / (CELL_SIZE * 0.25)).ceil() as usize).max(1);
        let target = GridMap::cell_of(b);
        (0..=steps).all(|i| {
            let t = i as f64 / steps as f64;
            let q = Point::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t);
            let c = GridMap::cell_of(q);
            c == target || self.is_free(c)
        })
    }

    pub fn to_ascii(&self) -> String {
        let mut s = String::with_capacity((self.width + 1) * self.height);
        for r in 0..self.height {
            for c in 0..self.width {
                s.push(self.cells[r * self.width + c].to_char());
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "#####\n#...#\n#.f.#\n#...#\n#####\n";

    #[test]
    fn parse_and_lookup() {
        let g = GridMap::parse(SMALL).unwrap();
        assert_eq!((g.width(), g.height()), (5, 5));
        assert_eq!(g.get(CellIndex::new(0, 0)), Cell::Wall);
        assert_eq!(g.get(CellIndex::new(2, 2)), Cell::Furniture);
        assert_eq!(g.get(CellIndex::new(1, 1)), Cell::Free);
        assert_eq!(g.get(CellIndex::new(-1, 3)), Cell::Wall);
        assert_eq!(g.to_ascii(), SMALL);
    }

    #[test]
    fn parse_errors_name_line() {
        assert_eq!(
            GridMap::parse("..\n.x\n"),
            Err(MapError::BadChar { line: 2, ch: 'x' })
        );
        assert_eq!(
            GridMap::parse("...\n..\n"),
            Err(MapError::Ragged {
                line: 2,
                expected: 3,
                got: 2
            })
        );
        assert_eq!(GridMap::parse("\n\n"), Err(MapError::Empty));
    }

    #[test]
    fn disc_collision_against_cells() {
        let g = GridMap::parse(SMALL).unwrap();
        // centre of cell (1,1) is 0.125 from the wall boundary
        let c = GridMap::center(CellIndex::new(1, 1));
        assert!(g.disc_collides(c, 0.2, ObstacleLayer::Ground));
        assert!(!g.disc_collides(c, 0.1, ObstacleLayer::Ground));
        // furniture blocks ground but not air
        let beside = Point::new(0.62, 0.375 + 0.25);
        assert!(g.disc_collides(beside, 0.2, ObstacleLayer::Ground));
    }

    #[test]
    fn line_of_sight_blocked_by_furniture() {
        let g = GridMap::parse(SMALL).unwrap();
        let a = GridMap::center(CellIndex::new(1, 2));
        let b = GridMap::center(CellIndex::new(3, 2));
        assert!(!g.line_of_sight(a, b));
        let c = GridMap::center(CellIndex::new(3, 1));
        assert!(g.line_of_sight(GridMap::center(CellIndex::new(1, 1)), c));
    }
}
