use std::collections::{BTreeSet, VecDeque};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Point, PointSet, Region};
use crate::hn::levels::{LevelAssignment, Params, WeightAssignment};
use crate::spatial::{GridIndex, SearchStrategy};
use crate::{Level, NodeId, Scalar};

/// Per-node attributes that determine the construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HnNode<S> {
    pub position: Point<S>,
    pub weight: S,
    pub det_level: Level,
    pub promotion: Level,
    /// Transmission radius; `None` means unlimited.
    pub radius: Option<S>,
}

impl<S: Scalar> HnNode<S> {
    pub fn level(&self) -> Level {
        self.det_level + self.promotion
    }
}

/// Undirected edge `u < v`, annotated with the level of the node that
/// created it (always the smaller endpoint level).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub level: Level,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Slot<S> {
    pub(crate) node: HnNode<S>,
    /// Nearest higher-level node (lowest id on ties), ignoring radii.
    pub(crate) nominal_parent: Option<NodeId>,
    /// Distance to the nearest higher-level node; `None` at the top level.
    pub(crate) ball: Option<S>,
    /// Connections the node initiates in the unbounded model.
    pub(crate) initiated: BTreeSet<NodeId>,
}

/// A hierarchical neighbor graph.
///
/// Node ids are stable slot indices. Graphs produced by the builders are
/// dense; removals in [`crate::dynamics`] leave vacant slots.
#[derive(Debug, Clone, PartialEq)]
pub struct HnGraph<S> {
    pub(crate) region: Region<S>,
    pub(crate) params: Params<S>,
    pub(crate) seed: u64,
    pub(crate) slots: Vec<Option<Slot<S>>>,
    pub(crate) adjacency: Vec<BTreeSet<NodeId>>,
}

impl<S: Scalar> HnGraph<S> {
    pub fn region(&self) -> &Region<S> {
        &self.region
    }

    pub fn params(&self) -> &Params<S> {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of live nodes.
    pub fn node_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    /// One past the largest id ever assigned.
    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.iter().all(Option::is_none)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        matches!(self.slots.get(id.index()), Some(Some(_)))
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.slots.iter().enumerate().filter(|(_, s)| s.is_some()).map(|(i, _)| NodeId(i))
    }

    pub(crate) fn slot(&self, id: NodeId) -> &Slot<S> {
        self.slots[id.index()].as_ref().expect("live node")
    }

    pub(crate) fn checked(&self, id: NodeId) -> Result<&Slot<S>> {
        self.slots.get(id.index()).and_then(Option::as_ref).ok_or(Error::NodeNotFound(id))
    }

    pub fn node(&self, id: NodeId) -> Option<&HnNode<S>> {
        self.slots.get(id.index()).and_then(Option::as_ref).map(|s| &s.node)
    }

    pub fn position(&self, id: NodeId) -> Point<S> {
        self.slot(id).node.position
    }

    pub fn level(&self, id: NodeId) -> Level {
        self.slot(id).node.level()
    }

    pub fn is_radius_bounded(&self) -> bool {
        self.slots.iter().flatten().any(|s| s.node.radius.is_some())
    }

    /// Parent used for routing and ancestry: the nearest higher-level node,
    /// lowest id on ties, unless the node's radius suppresses it.
    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        let slot = self.slot(id);
        slot.nominal_parent.filter(|&p| self.reaches(id, p))
    }

    /// All higher-level nodes at the minimal distance (the parent and any
    /// equidistant ties), before radius filtering.
    pub fn parent_candidates(&self, id: NodeId) -> Vec<NodeId> {
        let lev = self.level(id);
        self.slot(id).initiated.iter().copied().filter(|&v| self.level(v) > lev).collect()
    }

    /// Radius of the node's ball, `d(u, parent(u))`; `None` at the top level.
    pub fn ball_radius(&self, id: NodeId) -> Option<S> {
        self.slot(id).ball
    }

    /// Nodes `id` connects to in the unbounded model.
    pub fn initiated(&self, id: NodeId) -> &BTreeSet<NodeId> {
        &self.slot(id).initiated
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> S {
        self.region.dist(self.position(a), self.position(b))
    }

    /// Whether a connection initiated by `from` towards `to` survives
    /// `from`'s radius limit.
    pub(crate) fn reaches(&self, from: NodeId, to: NodeId) -> bool {
        match self.slot(from).node.radius {
            Some(r) => self.distance(from, to) <= r,
            None => true,
        }
    }

    pub(crate) fn edge_present(&self, a: NodeId, b: NodeId) -> bool {
        (self.slot(a).initiated.contains(&b) && self.reaches(a, b))
            || (self.slot(b).initiated.contains(&a) && self.reaches(b, a))
    }

    pub fn neighbors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency[id.index()].iter().copied()
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency.get(a.index()).is_some_and(|n| n.contains(&b))
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.adjacency[id.index()].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in self.ids() {
            for &v in &self.adjacency[u.index()] {
                if u < v {
                    out.push(Edge { u, v, level: self.level(u).min(self.level(v)) });
                }
            }
        }
        out
    }

    /// `ht = max_u lev(u)`.
    pub fn height(&self) -> Result<Level> {
        self.ids().map(|id| self.level(id)).max().ok_or(Error::EmptyGraph)
    }

    /// `S_0 ⊇ S_1 ⊇ … ⊇ S_ht` with `S_i = {u : lev(u) >= i}`. Empty graphs
    /// yield an empty sequence.
    pub fn level_sets(&self) -> Vec<Vec<NodeId>> {
        let Ok(top) = self.height() else {
            return Vec::new();
        };
        (0..=top).map(|i| self.ids().filter(|&u| self.level(u) >= i).collect()).collect()
    }

    pub fn level_assignment(&self) -> LevelAssignment {
        let (det, promo) =
            self.slots.iter().map(|s| s.as_ref().map_or((0, 0), |s| (s.node.det_level, s.node.promotion))).unzip();
        LevelAssignment::from_parts(det, promo).expect("equal lengths")
    }

    /// Children in the routing tree: nodes whose parent is `id`.
    pub fn children(&self, id: NodeId) -> Vec<NodeId> {
        let lev = self.level(id);
        self.neighbors(id).filter(|&c| self.level(c) < lev && self.parent(c) == Some(id)).collect()
    }

    /// Same graph with all radius limits removed.
    pub fn unbounded(&self) -> Self {
        let mut g = self.clone();
        for slot in g.slots.iter_mut().flatten() {
            slot.node.radius = None;
        }
        g.recompute_adjacency();
        g
    }

    /// Rebuilds from the current nodes and their stored levels with the
    /// grid-accelerated construction.
    pub fn rebuild(&self) -> Self {
        let nodes = self.slots.iter().map(|s| s.as_ref().map(|s| s.node)).collect();
        construct(self.region, self.params, self.seed, nodes, SearchStrategy::Grid)
    }

    pub(crate) fn recompute_adjacency(&mut self) {
        let mut adjacency = vec![BTreeSet::new(); self.slots.len()];
        for u in self.ids() {
            for &v in &self.slot(u).initiated {
                if self.reaches(u, v) {
                    adjacency[u.index()].insert(v);
                    adjacency[v.index()].insert(u);
                }
            }
        }
        self.adjacency = adjacency;
    }

    /// Breadth-first hop distances from `src`; `None` for unreachable nodes.
    pub fn bfs_hops(&self, src: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.slots.len()];
        let mut queue = VecDeque::from([src]);
        dist[src.index()] = Some(0);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.index()].unwrap_or(0);
            for v in self.neighbors(u) {
                if dist[v.index()].is_none() {
                    dist[v.index()] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Checks the structural invariants of the construction; returns a
    /// description of the first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let top = match self.height() {
            Ok(t) => t,
            Err(_) => return Ok(()),
        };
        for u in self.ids() {
            let lev = self.level(u);
            let slot = self.slot(u);
            let higher: Vec<NodeId> = self.ids().filter(|&v| self.level(v) > lev).collect();
            match slot.ball {
                None if !higher.is_empty() => return Err(format!("{u} has higher nodes but no ball")),
                Some(_) if higher.is_empty() => return Err(format!("{u} is top-level but has a ball")),
                _ => {}
            }
            if let Some(r) = slot.ball {
                if higher.iter().any(|&v| self.distance(u, v) < r) {
                    return Err(format!("{u}: a higher node is closer than its parent"));
                }
                let p = slot.nominal_parent.ok_or_else(|| format!("{u} has no nominal parent"))?;
                if self.level(p) <= lev {
                    return Err(format!("{u}: parent {p} is not higher"));
                }
            } else if lev != top {
                return Err(format!("{u} has no ball below the top level"));
            }
            for &v in &slot.initiated {
                let d = self.distance(u, v);
                if let Some(r) = slot.ball {
                    if d > r {
                        return Err(format!("{u}->{v} longer than the ball"));
                    }
                }
                if self.level(v) != lev && self.level(v) <= lev {
                    return Err(format!("{u}->{v} goes to a lower level"));
                }
                if self.edge_present(u, v) != self.has_edge(u, v) {
                    return Err(format!("adjacency out of sync on {u}-{v}"));
                }
            }
            for v in self.neighbors(u) {
                if !self.edge_present(u, v) {
                    return Err(format!("stray edge {u}-{v}"));
                }
            }
        }
        Ok(())
    }
}

/// Builds `HN_p^w(V)`, drawing levels from `seed`.
pub fn build_graph<S: Scalar>(
    points: &PointSet<S>,
    weights: &WeightAssignment<S>,
    params: Params<S>,
    seed: u64,
) -> Result<HnGraph<S>> {
    let levels = LevelAssignment::draw(weights, &params, seed)?;
    build_with_levels(points, weights, &levels, params, None, seed, SearchStrategy::Grid)
}

/// Builds the radius-bounded variant: same levels as [`build_graph`] with
/// the same seed, every connection longer than the initiator's radius
/// suppressed.
pub fn build_radius_bounded<S: Scalar>(
    points: &PointSet<S>,
    weights: &WeightAssignment<S>,
    params: Params<S>,
    radii: &[S],
    seed: u64,
) -> Result<HnGraph<S>> {
    let levels = LevelAssignment::draw(weights, &params, seed)?;
    build_with_levels(points, weights, &levels, params, Some(radii), seed, SearchStrategy::Grid)
}

/// Construction from an explicit level assignment.
pub fn build_with_levels<S: Scalar>(
    points: &PointSet<S>,
    weights: &WeightAssignment<S>,
    levels: &LevelAssignment,
    params: Params<S>,
    radii: Option<&[S]>,
    seed: u64,
    strategy: SearchStrategy,
) -> Result<HnGraph<S>> {
    params.validate()?;
    let n = points.len();
    if weights.len() != n || levels.len() != n {
        return Err(invalid("weights", format!("expected {n} weights and levels")));
    }
    if let Some(r) = radii {
        if r.len() != n {
            return Err(invalid("radius", format!("expected {n} radii, got {}", r.len())));
        }
        if let Some(bad) = r.iter().find(|r| !(**r > S::zero())) {
            return Err(invalid("radius", format!("radii must be positive, got {bad}")));
        }
    }
    let nodes = points
        .iter()
        .map(|(id, position)| {
            Some(HnNode {
                position,
                weight: weights.get(id),
                det_level: levels.det_level(id),
                promotion: levels.promotion(id),
                radius: radii.map(|r| r[id.index()]).filter(|r| r.is_finite()),
            })
        })
        .collect();
    Ok(construct(*points.region(), params, seed, nodes, strategy))
}

/// The construction rule at every node: the ball radius is the distance to
/// the nearest strictly higher node; the node connects to every such node at
/// exactly that distance and to every same-level node inside the closed
/// ball. Top-level nodes have an unbounded ball, making the top a clique.
pub(crate) fn construct<S: Scalar>(
    region: Region<S>,
    params: Params<S>,
    seed: u64,
    nodes: Vec<Option<HnNode<S>>>,
    strategy: SearchStrategy,
) -> HnGraph<S> {
    let positions: Vec<Point<S>> = nodes.iter().map(|n| n.map(|n| n.position).unwrap_or_default()).collect();
    let level_of = |id: NodeId| nodes[id.index()].map_or(0, |n| n.level());
    let live: Vec<NodeId> = (0..nodes.len()).map(NodeId).filter(|id| nodes[id.index()].is_some()).collect();
    let top = live.iter().map(|&id| level_of(id)).max();

    let mut slots: Vec<Option<Slot<S>>> = vec![None; nodes.len()];
    if let Some(top) = top {
        // grids[k] indexes S_k = {u : lev(u) >= k}.
        let grids: Vec<GridIndex<'_, S>> = (0..=top)
            .map(|k| {
                let members = live.iter().copied().filter(|&id| level_of(id) >= k).collect();
                GridIndex::new(region, &positions, members, strategy)
            })
            .collect();
        for &u in &live {
            let lev = level_of(u);
            let pos = positions[u.index()];
            let (ball, ties) = if lev < top {
                let (d, ties) = grids[lev as usize + 1].nearest_all(pos).expect("higher level is occupied");
                (Some(d), ties)
            } else {
                (None, Vec::new())
            };
            let radius = ball.unwrap_or_else(S::infinity);
            let mut initiated: BTreeSet<NodeId> = ties.iter().copied().collect();
            initiated
                .extend(grids[lev as usize].within(pos, radius).into_iter().filter(|&v| v != u && level_of(v) == lev));
            slots[u.index()] = Some(Slot {
                node: nodes[u.index()].expect("live"),
                nominal_parent: ties.first().copied(),
                ball,
                initiated,
            });
        }
        debug_assert!(grids.iter().all(|g| !g.is_empty()));
    }

    let mut graph = HnGraph { region, params, seed, slots, adjacency: Vec::new() };
    graph.recompute_adjacency();
    graph
}
