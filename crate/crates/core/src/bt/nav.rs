//! Grid path planning and a pure-pursuit style controller for the
//! navigation leaves.
//!
//! The planner keeps one Dijkstra distance field per (goal cell, learned
//! obstacle set) and follows its gradient, so replanning after a new
//! obstacle appears costs one field computation.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex};

use crate::sim::{CellIndex, GridMap, ObstacleLayer};
use crate::types::{wrap_angle, Point, Pose};

const LOOKAHEAD_CELLS: usize = 4;
const CACHE_LIMIT: usize = 64;
const HEADING_GAIN: f64 = 2.5;
/// Above this heading error the robot turns in place.
const TURN_IN_PLACE: f64 = 0.4;

/// Parse the `col:row` form used in blackboard id lists.
pub fn parse_cell(text: &str) -> Option<CellIndex> {
    let (c, r) = text.split_once(':')?;
    Some(CellIndex::new(c.parse().ok()?, r.parse().ok()?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Route {
    pub waypoint: Point,
    /// The reachable point standing in for the requested goal.
    pub goal: Point,
    /// Path length from the robot's cell, metres.
    pub remaining: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
    }
}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

type FieldKey = (CellIndex, u64);

#[derive(Debug)]
pub struct Planner {
    width: i32,
    height: i32,
    clearance: f64,
    /// Static traversability after inflating blocking cells by `clearance`.
    open: Vec<bool>,
    cache: Mutex<HashMap<FieldKey, Arc<Vec<f64>>>>,
}

impl Planner {
    pub fn new(grid: &GridMap, layer: ObstacleLayer, clearance: f64) -> Planner {
        let (w, h) = (grid.width() as i32, grid.height() as i32);
        let mut open = vec![false; (w * h) as usize];
        for (c, cell) in grid.cells() {
            if layer.blocks(cell) {
                continue;
            }
            let centre = GridMap::center(c);
            open[(c.row * w + c.col) as usize] = grid
                .blocking_cells_near(centre, clearance, layer)
                .next()
                .is_none();
        }
        Planner {
            width: w,
            height: h,
            clearance,
            open,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn clearance(&self) -> f64 {
        self.clearance
    }

    fn index(&self, c: CellIndex) -> Option<usize> {
        (c.col >= 0 && c.row >= 0 && c.col < self.width && c.row < self.height)
            .then(|| (c.row * self.width + c.col) as usize)
    }

    fn cell(&self, i: usize) -> CellIndex {
        CellIndex::new(i as i32 % self.width, i as i32 / self.width)
    }

    pub fn traversable(&self, c: CellIndex, blocked: &BTreeSet<CellIndex>) -> bool {
        let Some(i) = self.index(c) else { return false };
        if !self.open[i] {
            return false;
        }
        let centre = GridMap::center(c);
        !blocked
            .iter()
            .any(|b| GridMap::closest_point_in_cell(*b, centre).distance(&centre) < self.clearance)
    }

    fn field(&self, goal: CellIndex, blocked: &BTreeSet<CellIndex>) -> Arc<Vec<f64>> {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        blocked.hash(&mut h);
        let key = (goal, h.finish());
        if let Some(f) = self.cache.lock().expect("planner cache").get(&key) {
            return f.clone();
        }
        let field = Arc::new(self.dijkstra(goal, blocked));
        let mut cache = self.cache.lock().expect("planner cache");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, field.clone());
        field
    }

    fn dijkstra(&self, goal: CellIndex, blocked: &BTreeSet<CellIndex>) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.open.len()];
        let mut ok = vec![false; self.open.len()];
        for (i, slot) in ok.iter_mut().enumerate() {
            *slot = self.traversable(self.cell(i), blocked);
        }
        let Some(g) = self.index(goal).filter(|&g| ok[g]) else {
            return dist;
        };
        dist[g] = 0.0;
        let mut heap = BinaryHeap::from([Entry(0.0, g)]);
        while let Some(Entry(d, i)) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            let c = self.cell(i);
            for (dc, dr) in NEIGHBOURS {
                let n = CellIndex::new(c.col + dc, c.row + dr);
                let Some(j) = self.index(n) else { continue };
                if !ok[j] {
                    continue;
                }
                let diagonal = dc != 0 && dr != 0;
                if diagonal {
                    let a = self.index(CellIndex::new(c.col + dc, c.row));
                    let b = self.index(CellIndex::new(c.col, c.row + dr));
                    if !(a.is_some_and(|a| ok[a]) && b.is_some_and(|b| ok[b])) {
                        continue;
                    }
                }
                let step = if diagonal {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                } * crate::sim::CELL_SIZE;
                if d + step < dist[j] {
                    dist[j] = d + step;
                    heap.push(Entry(d + step, j));
                }
            }
        }
        dist
    }

    /// Traversable cell closest to `p`, ties broken by row-major order.
    pub fn nearest_traversable(
        &self,
        p: Point,
        blocked: &BTreeSet<CellIndex>,
    ) -> Option<CellIndex> {
        (0..self.open.len())
            .filter(|&i| self.open[i])
            .map(|i| self.cell(i))
            .filter(|c| self.traversable(*c, blocked))
            .map(|c| (GridMap::center(c).distance(&p), c))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, c)| c)
    }

    /// Whether the straight segment stays over traversable cells.
    pub fn segment_clear(&self, a: Point, b: Point, blocked: &BTreeSet<CellIndex>) -> bool {
        let len = a.distance(&b);
        let n = (len / (crate::sim::CELL_SIZE * 0.25)).ceil().max(1.0) as usize;
        (0..=n).all(|i| {
            let t = i as f64 / n as f64;
            let p = Point::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t);
            self.traversable(GridMap::cell_of(p), blocked)
        })
    }

    /// Next waypoint from `from` toward `goal`, or `None` when unreachable.
    pub fn route(&self, from: Point, goal: Point, blocked: &BTreeSet<CellIndex>) -> Option<Route> {
        let goal_cell = if self.traversable(GridMap::cell_of(goal), blocked) {
            GridMap::cell_of(goal)
        } else {
            self.nearest_traversable(goal, blocked)?
        };
        let target = if goal_cell == GridMap::cell_of(goal) {
            goal
        } else {
            GridMap::center(goal_cell)
        };
        let field = self.field(goal_cell, blocked);
        let at = |c: CellIndex| self.index(c).map_or(f64::INFINITY, |i| field[i]);

        let here = GridMap::cell_of(from);
        let mut start = here;
        if !at(here).is_finite() || !self.traversable(here, blocked) {
            // Robot sits in an inflated margin; re-enter through the best neighbour.
            let mut best: Option<(f64, CellIndex)> = None;
            for (dc, dr) in NEIGHBOURS {
                let c = CellIndex::new(here.col + dc, here.row + dr);
                let f = at(c);
                if f.is_finite() && self.traversable(c, blocked) {
                    let score = f + GridMap::center(c).distance(&from);
                    if best.is_none_or(|(b, _)| score < b) {
                        best = Some((score, c));
                    }
                }
            }
            let (_, c) = best?;
            return Some(Route {
                waypoint: GridMap::center(c),
                goal: target,
                remaining: at(c) + CELL_STEP,
            });
        }
        if start == goal_cell {
            return Some(Route {
                waypoint: target,
                goal: target,
                remaining: from.distance(&target),
            });
        }
        let remaining = at(start);
        let mut waypoint = GridMap::center(start);
        for _ in 0..LOOKAHEAD_CELLS {
            let next = NEIGHBOURS
                .iter()
                .map(|(dc, dr)| CellIndex::new(start.col + dc, start.row + dr))
                .filter(|c| at(*c) < at(start))
                .min_by(|a, b| {
                    at(*a)
                        .total_cmp(&at(*b))
                        .then_with(|| (a.row, a.col).cmp(&(b.row, b.col)))
                });
            let Some(next) = next else { break };
            let p = if next == goal_cell {
                target
            } else {
                GridMap::center(next)
            };
            if !self.segment_clear(from, p, blocked) {
                break;
            }
            waypoint = p;
            start = next;
            if next == goal_cell {
                break;
            }
        }
        if waypoint == GridMap::center(here) && here != goal_cell {
            // Lookahead could not see past the first cell; head for it anyway.
            let first = NEIGHBOURS
                .iter()
                .map(|(dc, dr)| CellIndex::new(here.col + dc, here.row + dr))
                .filter(|c| at(*c) < at(here))
                .min_by(|a, b| {
                    at(*a)
                        .total_cmp(&at(*b))
                        .then_with(|| (a.row, a.col).cmp(&(b.row, b.col)))
                });
            if let Some(c) = first {
                waypoint = if c == goal_cell {
                    target
                } else {
                    GridMap::center(c)
                };
            }
        }
        Some(Route {
            waypoint,
            goal: target,
            remaining,
        })
    }

    /// Length of the planned path from `from` to `goal`, if reachable.
    pub fn path_length(
        &self,
        from: Point,
        goal: Point,
        blocked: &BTreeSet<CellIndex>,
    ) -> Option<f64> {
        self.route(from, goal, blocked).map(|r| r.remaining)
    }

    pub fn open_cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        self.open
            .iter()
            .enumerate()
            .filter(|(_, o)| **o)
            .map(|(i, _)| self.cell(i))
    }
}

const CELL_STEP: f64 = crate::sim::CELL_SIZE;

const NEIGHBOURS: [(i32, i32); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// Drive setpoint `[v, omega]` steering `pose` toward `target`.
pub fn steer(pose: Pose, target: Point, cruise: f64, slow_radius: f64) -> [f64; 2] {
    let dx = target.x - pose.x;
    let dy = target.y - pose.y;
    let dist = dx.hypot(dy);
    if dist < 1e-9 {
        return [0.0, 0.0];
    }
    let err = wrap_angle(dy.atan2(dx) - pose.theta);
    let omega = HEADING_GAIN * err;
    if err.abs() > TURN_IN_PLACE {
        return [0.0, omega];
    }
    let v = if slow_radius > 0.0 {
        cruise.min(cruise * dist / slow_radius)
    } else {
        cruise
    };
    [v.max(0.05_f64.min(cruise)), omega]
}

/// Turn-in-place setpoint toward a heading.
pub fn turn_to(pose: Pose, heading: f64) -> [f64; 2] {
    [0.0, HEADING_GAIN * wrap_angle(heading - pose.theta)]
}
