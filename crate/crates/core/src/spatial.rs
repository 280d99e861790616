//! Uniform-grid index for exact nearest/ball queries.
//!
//! Results are identical to a linear scan: candidate distances go through
//! the same `Region::dist`, so only the set of examined points changes.

use crate::geometry::{Point, Region};
use crate::{NodeId, Scalar};

/// How construction searches for parents and ball members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchStrategy {
    BruteForce,
    #[default]
    Grid,
}

pub(crate) struct GridIndex<'a, S> {
    region: Region<S>,
    positions: &'a [Point<S>],
    dim: usize,
    cell: f64,
    cells: Vec<Vec<NodeId>>,
    all: Vec<NodeId>,
    brute: bool,
}

impl<'a, S: Scalar> GridIndex<'a, S> {
    /// `positions` is indexed by node id; `members` selects the indexed ids.
    pub(crate) fn new(
        region: Region<S>,
        positions: &'a [Point<S>],
        members: Vec<NodeId>,
        strategy: SearchStrategy,
    ) -> Self {
        let brute = strategy == SearchStrategy::BruteForce;
        let dim = if brute { 1 } else { ((members.len() as f64).sqrt().ceil() as usize).max(1) };
        let cell = region.side().as_f64() / dim as f64;
        let mut cells = vec![Vec::new(); if brute { 0 } else { dim * dim }];
        if !brute {
            for &id in &members {
                let (cx, cy) = cell_of(positions[id.index()], cell, dim);
                cells[cy * dim + cx].push(id);
            }
        }
        Self { region, positions, dim, cell, cells, all: members, brute }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.all.is_empty()
    }

    /// All members at the minimal distance from `q`, sorted by id, together
    /// with that distance. `None` when the index is empty.
    pub(crate) fn nearest_all(&self, q: Point<S>) -> Option<(S, Vec<NodeId>)> {
        if self.all.is_empty() {
            return None;
        }
        if self.brute || self.dim <= 2 {
            return self.scan_nearest(self.all.iter().copied(), q);
        }
        let (cx, cy) = cell_of(q, self.cell, self.dim);
        let torus = self.region.is_torus();
        let mut best: Option<(S, Vec<NodeId>)> = None;
        let margin = self.cell * 1e-3;
        for ring in 0..=self.dim {
            if torus && 2 * ring + 1 >= self.dim {
                return self.scan_nearest(self.all.iter().copied(), q);
            }
            if !torus && ring > cx.max(self.dim - 1 - cx).max(cy).max(self.dim - 1 - cy) {
                break;
            }
            self.for_ring(cx, cy, ring, |ids| {
                for &id in ids {
                    consider(&mut best, self.region.dist(q, self.positions[id.index()]), id);
                }
            });
            if let Some((d, _)) = &best {
                if d.as_f64() < ring as f64 * self.cell - margin {
                    break;
                }
            }
        }
        best.map(|(d, mut ids)| {
            ids.sort_unstable();
            (d, ids)
        })
    }

    /// Members `v` with `dist(q, v) <= radius`, sorted by id. An infinite
    /// radius returns every member.
    pub(crate) fn within(&self, q: Point<S>, radius: S) -> Vec<NodeId> {
        let mut out = Vec::new();
        let span = if radius.is_finite() { (radius.as_f64() / self.cell).ceil() as usize + 1 } else { usize::MAX };
        let full = self.brute || span >= self.dim || (self.region.is_torus() && span.saturating_mul(2) + 1 >= self.dim);
        if full {
            for &id in &self.all {
                if self.region.dist(q, self.positions[id.index()]) <= radius {
                    out.push(id);
                }
            }
        } else {
            let (cx, cy) = cell_of(q, self.cell, self.dim);
            for ring in 0..=span {
                self.for_ring(cx, cy, ring, |ids| {
                    for &id in ids {
                        if self.region.dist(q, self.positions[id.index()]) <= radius {
                            out.push(id);
                        }
                    }
                });
            }
        }
        out.sort_unstable();
        out
    }

    fn scan_nearest(&self, ids: impl Iterator<Item = NodeId>, q: Point<S>) -> Option<(S, Vec<NodeId>)> {
        let mut best = None;
        for id in ids {
            consider(&mut best, self.region.dist(q, self.positions[id.index()]), id);
        }
        best.map(|(d, mut v): (S, Vec<NodeId>)| {
            v.sort_unstable();
            (d, v)
        })
    }

    /// Visits each cell at Chebyshev offset exactly `ring` from (cx, cy).
    /// For the torus the caller guarantees `2·ring + 1 < dim` so no cell is
    /// visited twice.
    fn for_ring(&self, cx: usize, cy: usize, ring: usize, mut f: impl FnMut(&[NodeId])) {
        let dim = self.dim as isize;
        let r = ring as isize;
        let torus = self.region.is_torus();
        let mut visit = |dx: isize, dy: isize| {
            let (mut x, mut y) = (cx as isize + dx, cy as isize + dy);
            if torus {
                x = x.rem_euclid(dim);
                y = y.rem_euclid(dim);
            } else if x < 0 || y < 0 || x >= dim || y >= dim {
                return;
            }
            f(&self.cells[(y * dim + x) as usize]);
        };
        if r == 0 {
            visit(0, 0);
            return;
        }
        for dx in -r..=r {
            visit(dx, -r);
            visit(dx, r);
        }
        for dy in (-r + 1)..r {
            visit(-r, dy);
            visit(r, dy);
        }
    }
}

fn consider<S: Scalar>(best: &mut Option<(S, Vec<NodeId>)>, d: S, id: NodeId) {
    match best {
        Some((bd, ids)) if d == *bd => ids.push(id),
        Some((bd, _)) if d > *bd => {}
        _ => *best = Some((d, vec![id])),
    }
}

fn cell_of<S: Scalar>(p: Point<S>, cell: f64, dim: usize) -> (usize, usize) {
    let idx = |c: S| ((c.as_f64() / cell).floor().max(0.0) as usize).min(dim - 1);
    (idx(p.x), idx(p.y))
}
