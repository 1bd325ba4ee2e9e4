//! Grid A* shortest paths over an inflated occupancy rasterization.
//!
//! The map is sampled at a fixed cell size; a cell is blocked when its
//! center lies within `inflation` of any static obstacle or wall. Motion is
//! 8-connected with exact step costs, the heuristic is octile distance, and
//! tie-breaking is deterministic (insertion order).

use crate::geom::Vec2;
use crate::world::WorldMap;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Rasterized free-space grid.
pub struct OccupancyGrid {
    pub cols: usize,
    pub rows: usize,
    pub cell: f64,
    pub origin: Vec2,
    /// Row-major; true = blocked.
    blocked: Vec<bool>,
}

impl OccupancyGrid {
    /// Rasterize `map` at `cell` meters per cell, blocking every cell whose
    /// center has less than `inflation` clearance.
    pub fn from_map(map: &WorldMap, cell: f64, inflation: f64) -> Self {
        let bounds = map.bounds();
        let cols = (bounds.width() / cell).ceil() as usize;
        let rows = (bounds.height() / cell).ceil() as usize;
        let mut blocked = vec![false; cols * rows];
        for row in 0..rows {
            for col in 0..cols {
                let p = Vec2::new(
                    bounds.min.x + (col as f64 + 0.5) * cell,
                    bounds.min.y + (row as f64 + 0.5) * cell,
                );
                blocked[row * cols + col] = map.clearance(p) < inflation;
            }
        }
        Self {
            cols,
            rows,
            cell,
            origin: bounds.min,
            blocked,
        }
    }

    pub fn is_blocked(&self, col: usize, row: usize) -> bool {
        self.blocked[row * self.cols + col]
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (col as f64 + 0.5) * self.cell,
            self.origin.y + (row as f64 + 0.5) * self.cell,
        )
    }

    /// Cell containing a point, clamped into the grid.
    pub fn cell_of(&self, p: Vec2) -> (usize, usize) {
        let col = ((p.x - self.origin.x) / self.cell).floor();
        let row = ((p.y - self.origin.y) / self.cell).floor();
        (
            (col.max(0.0) as usize).min(self.cols - 1),
            (row.max(0.0) as usize).min(self.rows - 1),
        )
    }

    /// Nearest free cell to a point (spiral search), if any.
    fn nearest_free(&self, p: Vec2) -> Option<(usize, usize)> {
        let (c0, r0) = self.cell_of(p);
        if !self.is_blocked(c0, r0) {
            return Some((c0, r0));
        }
        let max_radius = self.cols.max(self.rows);
        for radius in 1..max_radius {
            let mut best: Option<((usize, usize), f64)> = None;
            let lo_c = c0.saturating_sub(radius);
            let hi_c = (c0 + radius).min(self.cols - 1);
            let lo_r = r0.saturating_sub(radius);
            let hi_r = (r0 + radius).min(self.rows - 1);
            for row in lo_r..=hi_r {
                for col in lo_c..=hi_c {
                    if row != lo_r && row != hi_r && col != lo_c && col != hi_c {
                        continue; // ring only
                    }
                    if !self.is_blocked(col, row) {
                        let d = self.cell_center(col, row).dist(p);
                        if best.map_or(true, |(_, bd)| d < bd) {
                            best = Some(((col, row), d));
                        }
                    }
                }
            }
            if let Some((cell, _)) = best {
                return Some(cell);
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    f: f64,
    order: u64,
    idx: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on f, then FIFO on insertion order for determinism.
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.order.cmp(&self.order))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A shortest path as grid-cell centers plus its length in meters.
#[derive(Debug, Clone)]
pub struct GridPath {
    pub points: Vec<Vec2>,
    pub length: f64,
}

/// 8-connected A* from `start` to `goal` (snapped to the nearest free
/// cells). Returns `None` when no path exists.
pub fn shortest_path(grid: &OccupancyGrid, start: Vec2, goal: Vec2) -> Option<GridPath> {
    let (sc, sr) = grid.nearest_free(start)?;
    let (gc, gr) = grid.nearest_free(goal)?;
    let cols = grid.cols;
    let idx = |c: usize, r: usize| r * cols + c;

    let octile = |c: usize, r: usize| -> f64 {
        let dx = (c as f64 - gc as f64).abs();
        let dy = (r as f64 - gr as f64).abs();
        let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
        (hi - lo) + std::f64::consts::SQRT_2 * lo
    };

    let n = grid.cols * grid.rows;
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut order = 0u64;
    g[idx(sc, sr)] = 0.0;
    heap.push(HeapEntry {
        f: octile(sc, sr),
        order,
        idx: idx(sc, sr),
    });

    const STEPS: [(isize, isize, f64); 8] = [
        (1, 0, 1.0),
        (-1, 0, 1.0),
        (0, 1, 1.0),
        (0, -1, 1.0),
        (1, 1, std::f64::consts::SQRT_2),
        (1, -1, std::f64::consts::SQRT_2),
        (-1, 1, std::f64::consts::SQRT_2),
        (-1, -1, std::f64::consts::SQRT_2),
    ];

    while let Some(entry) = heap.pop() {
        let current = entry.idx;
        if closed[current] {
            continue;
        }
        closed[current] = true;
        let (cc, cr) = (current % cols, current / cols);
        if (cc, cr) == (gc, gr) {
            // Reconstruct.
            let mut cells = vec![current];
            let mut at = current;
            while parent[at] != usize::MAX {
                at = parent[at];
                cells.push(at);
            }
            cells.reverse();
            let points: Vec<Vec2> = cells
                .iter()
                .map(|i| grid.cell_center(i % cols, i / cols))
                .collect();
            let length = points.windows(2).map(|w| w[0].dist(w[1])).sum();
            return Some(GridPath { points, length });
        }
        for (dc, dr, cost) in STEPS {
            let nc = cc as isize + dc;
            let nr = cr as isize + dr;
            if nc < 0 || nr < 0 || nc as usize >= grid.cols || nr as usize >= grid.rows {
                continue;
            }
            let (nc, nr) = (nc as usize, nr as usize);
            if grid.is_blocked(nc, nr) {
                continue;
            }
            // No corner cutting on diagonal moves.
            if dc != 0 && dr != 0 && (grid.is_blocked(nc, cr) || grid.is_blocked(cc, nr)) {
                continue;
            }
            let next = idx(nc, nr);
            let cand = g[current] + cost * grid.cell;
            if cand < g[next] {
                g[next] = cand;
                parent[next] = current;
                order += 1;
                heap.push(HeapEntry {
                    f: cand + octile(nc, nr) * grid.cell,
                    order,
                    idx: next,
                });
            }
        }
    }
    None
}
