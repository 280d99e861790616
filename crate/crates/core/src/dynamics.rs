//! Incremental repair under node arrival, departure and battery change.
//!
//! Every repair follows one rule. Before the change, collect the nodes that
//! either connect to the changing node `x` or would have `x` inside their
//! ball at `x`'s new level. Only those nodes (and `x`) re-derive their
//! connections; everyone else keeps theirs. Re-derivation is a linear scan
//! over the surviving nodes, independent of the grid-accelerated
//! construction that serves as the oracle in tests.

use std::collections::BTreeSet;
use std::str::FromStr;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::geometry::Point;
use crate::hn::{det_level, draw_promotion, Edge, HnGraph, HnNode, Slot};
use crate::{Level, NodeId, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reparent {
    pub node: NodeId,
    pub old: Option<NodeId>,
    pub new: Option<NodeId>,
}

/// Edge and parent changes produced by one repair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GraphDelta {
    pub added_edges: Vec<Edge>,
    pub removed_edges: Vec<Edge>,
    pub reparented: Vec<Reparent>,
    /// Nodes whose connections were re-derived.
    pub recomputed: BTreeSet<NodeId>,
    /// `recomputed` plus every node named in the other fields.
    pub affected: BTreeSet<NodeId>,
}

impl GraphDelta {
    pub fn is_empty(&self) -> bool {
        self.added_edges.is_empty() && self.removed_edges.is_empty() && self.reparented.is_empty()
    }

    /// Applies the edge changes to an edge set of the pre-repair graph.
    pub fn apply(&self, edges: &mut BTreeSet<Edge>) {
        for e in &self.removed_edges {
            edges.remove(e);
        }
        edges.extend(self.added_edges.iter().copied());
    }
}

/// One line of an event trace: `ADD x y w`, `REMOVE id` or `WEIGHT id w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event<S> {
    Add { position: Point<S>, weight: S },
    Remove(NodeId),
    Weight(NodeId, S),
}

pub fn parse_trace<S: Scalar>(text: &str) -> Result<Vec<Event<S>>> {
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let perr = |reason: String| Error::Parse { line: i + 1, reason };
        let toks: Vec<&str> = line.split_whitespace().collect();
        let num = |k: usize| -> Result<S> {
            toks.get(k)
                .and_then(|t| S::from_str(t).ok())
                .ok_or_else(|| perr(format!("expected a number in field {}", k + 1)))
        };
        let id = |k: usize| -> Result<NodeId> {
            toks.get(k)
                .and_then(|t| usize::from_str(t).ok())
                .map(NodeId)
                .ok_or_else(|| perr(format!("expected a node id in field {}", k + 1)))
        };
        let (event, arity) = match toks[0] {
            "ADD" => (Event::Add { position: Point::new(num(1)?, num(2)?), weight: num(3)? }, 4),
            "REMOVE" => (Event::Remove(id(1)?), 2),
            "WEIGHT" => (Event::Weight(id(1)?, num(2)?), 3),
            other => return Err(perr(format!("unknown event `{other}`"))),
        };
        if toks.len() != arity {
            return Err(perr(format!("`{}` takes {} fields", toks[0], arity - 1)));
        }
        events.push(event);
    }
    Ok(events)
}

pub fn format_event<S: Scalar>(e: &Event<S>) -> String {
    match e {
        Event::Add { position, weight } => format!("ADD {} {} {}", position.x, position.y, weight),
        Event::Remove(id) => format!("REMOVE {id}"),
        Event::Weight(id, w) => format!("WEIGHT {id} {w}"),
    }
}

impl<S: Scalar> HnGraph<S> {
    /// Inserts a node, drawing its probabilistic promotions from `rng`.
    /// Returns the new id (the next free slot) and the repair delta.
    pub fn add_node<R: Rng + ?Sized>(
        &mut self,
        position: Point<S>,
        weight: S,
        rng: &mut R,
    ) -> Result<(NodeId, GraphDelta)> {
        let det = det_level(weight, self.params.p)?;
        let max_det = self.ids().map(|u| self.slot(u).node.det_level).chain([det]).max().unwrap_or(det);
        let cap = self.params.resolve_cap(max_det);
        if det > cap {
            return Err(Error::LevelOverflow { cap });
        }
        let promotion = draw_promotion(self.params.p, det, cap, rng)?;
        self.add_node_with_promotion(position, weight, promotion, None)
    }

    /// Inserts a node with a known probabilistic increment.
    pub fn add_node_with_promotion(
        &mut self,
        position: Point<S>,
        weight: S,
        promotion: Level,
        radius: Option<S>,
    ) -> Result<(NodeId, GraphDelta)> {
        if !self.region.contains(position) {
            return Err(invalid("position", format!("({}, {}) lies outside the region", position.x, position.y)));
        }
        if let Some(r) = radius {
            if !(r > S::zero()) {
                return Err(invalid("radius", format!("must be positive, got {r}")));
            }
        }
        let det_level = det_level(weight, self.params.p)?;
        let node = HnNode { position, weight, det_level, promotion, radius };
        let x = NodeId(self.slots.len());
        self.slots.push(None);
        self.adjacency.push(BTreeSet::new());
        let delta = self.repair(x, Some(node));
        Ok((x, delta))
    }

    pub fn remove_node(&mut self, id: NodeId) -> Result<GraphDelta> {
        self.checked(id)?;
        Ok(self.repair(id, None))
    }

    /// Changes a node's weight. Only the deterministic part of its level
    /// follows the weight; the stored probabilistic increment is kept.
    pub fn update_weight(&mut self, id: NodeId, weight: S) -> Result<GraphDelta> {
        let mut node = self.checked(id)?.node;
        node.det_level = det_level(weight, self.params.p)?;
        node.weight = weight;
        Ok(self.repair(id, Some(node)))
    }

    pub fn apply_event<R: Rng + ?Sized>(&mut self, event: &Event<S>, rng: &mut R) -> Result<GraphDelta> {
        match *event {
            Event::Add { position, weight } => self.add_node(position, weight, rng).map(|(_, d)| d),
            Event::Remove(id) => self.remove_node(id),
            Event::Weight(id, w) => self.update_weight(id, w),
        }
    }

    /// Replaces node `x` by `new` (insert when `x` was vacant, removal when
    /// `new` is `None`) and re-derives the connections that depend on it.
    fn repair(&mut self, x: NodeId, new: Option<HnNode<S>>) -> GraphDelta {
        let mut affected: BTreeSet<NodeId> =
            self.ids().filter(|&u| u != x && self.slot(u).initiated.contains(&x)).collect();
        if let Some(node) = new {
            let lev = node.level();
            affected.extend(self.ids().filter(|&u| {
                if u == x || self.level(u) > lev {
                    return false;
                }
                match self.slot(u).ball {
                    None => true,
                    Some(r) => self.region.dist(self.position(u), node.position) <= r,
                }
            }));
        }

        let was_present = self.contains(x);
        let mut touched = affected.clone();
        if was_present {
            touched.insert(x);
        }
        let before_edges = self.incident_edges(&touched);
        let before_parents: Vec<(NodeId, Option<NodeId>)> = touched.iter().map(|&u| (u, self.parent(u))).collect();

        // Install the new state of x.
        let old_x_initiated = self.slots[x.index()].as_ref().map(|s| s.initiated.clone()).unwrap_or_default();
        match new {
            Some(node) => {
                let prev = self.slots[x.index()].take();
                self.slots[x.index()] = Some(Slot {
                    node,
                    nominal_parent: None,
                    ball: None,
                    initiated: prev.map(|s| s.initiated).unwrap_or_default(),
                });
                touched.insert(x);
            }
            None => {
                self.slots[x.index()] = None;
                for v in std::mem::take(&mut self.adjacency[x.index()]) {
                    self.adjacency[v.index()].remove(&x);
                }
                touched.remove(&x);
            }
        }

        let mut recompute: Vec<NodeId> = affected.iter().copied().collect();
        if new.is_some() {
            recompute.push(x);
        }
        let mut pairs: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
        for &u in &recompute {
            let (nominal_parent, ball, initiated) = self.local_connections(u);
            let old = if u == x { old_x_initiated.clone() } else { self.slot(u).initiated.clone() };
            for &v in old.union(&initiated) {
                if self.contains(v) {
                    pairs.insert((u.min(v), u.max(v)));
                }
            }
            let slot = self.slots[u.index()].as_mut().expect("live");
            slot.nominal_parent = nominal_parent;
            slot.ball = ball;
            slot.initiated = initiated;
        }
        for (a, b) in pairs {
            let present = self.edge_present(a, b);
            for (p, q) in [(a, b), (b, a)] {
                if present {
                    self.adjacency[p.index()].insert(q);
                } else {
                    self.adjacency[p.index()].remove(&q);
                }
            }
        }

        let after_edges = self.incident_edges(&touched);
        let mut delta = GraphDelta {
            added_edges: after_edges.difference(&before_edges).copied().collect(),
            removed_edges: before_edges.difference(&after_edges).copied().collect(),
            reparented: Vec::new(),
            recomputed: recompute.iter().copied().collect(),
            affected: BTreeSet::new(),
        };
        for (u, old) in before_parents {
            let new_parent = if self.contains(u) { self.parent(u) } else { None };
            if old != new_parent {
                delta.reparented.push(Reparent { node: u, old, new: new_parent });
            }
        }
        if !was_present {
            if let Some(p) = self.parent(x) {
                delta.reparented.push(Reparent { node: x, old: None, new: Some(p) });
            }
        }
        delta.reparented.sort_by_key(|r| r.node);
        let mut all = delta.recomputed.clone();
        all.insert(x);
        for e in delta.added_edges.iter().chain(&delta.removed_edges) {
            all.insert(e.u);
            all.insert(e.v);
        }
        for r in &delta.reparented {
            all.extend([Some(r.node), r.old, r.new].into_iter().flatten());
        }
        delta.affected = all;
        delta
    }

    /// Edges with at least one endpoint in `nodes`, annotated with levels.
    fn incident_edges(&self, nodes: &BTreeSet<NodeId>) -> BTreeSet<Edge> {
        let mut out = BTreeSet::new();
        for &u in nodes {
            if !self.contains(u) {
                continue;
            }
            for v in self.neighbors(u) {
                let (a, b) = (u.min(v), u.max(v));
                out.insert(Edge { u: a, v: b, level: self.level(a).min(self.level(b)) });
            }
        }
        out
    }

    /// The construction rule for one node by linear scan.
    fn local_connections(&self, u: NodeId) -> (Option<NodeId>, Option<S>, BTreeSet<NodeId>) {
        let lev = self.level(u);
        let pos = self.position(u);
        let mut best: Option<S> = None;
        let mut ties: Vec<NodeId> = Vec::new();
        for v in self.ids().filter(|&v| v != u && self.level(v) > lev) {
            let d = self.region.dist(pos, self.position(v));
            match best {
                Some(b) if d > b => {}
                Some(b) if d == b => ties.push(v),
                _ => {
                    best = Some(d);
                    ties = vec![v];
                }
            }
        }
        let radius = best.unwrap_or_else(S::infinity);
        let mut initiated: BTreeSet<NodeId> = ties.iter().copied().collect();
        initiated.extend(
            self.ids().filter(|&v| v != u && self.level(v) == lev && self.region.dist(pos, self.position(v)) <= radius),
        );
        (ties.first().copied(), best, initiated)
    }
}
