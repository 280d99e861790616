//! Ancestor and component queries, proactive hierarchical distance-vector
//! routing and reactive hierarchical flooding.
//!
//! Both protocols work on *tiers*: the connected components of the
//! subgraph formed by nodes of one exact level and the edges among them.
//! Tier `k` of a node's ancestor chain is where its level-`k` directory is
//! built (proactive) or where the phase-`k` flood runs (reactive).

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{invalid, Error, Result};
use crate::hn::HnGraph;
use crate::{Level, NodeId, Scalar};

/// First node of level at least `i` on `u`'s parent chain.
pub fn ancestor<S: Scalar>(g: &HnGraph<S>, u: NodeId, i: Level) -> Result<NodeId> {
    g.checked(u)?;
    let mut cur = u;
    while g.level(cur) < i {
        cur = g.parent(cur).ok_or(Error::NoAncestor { node: u, level: i })?;
    }
    Ok(cur)
}

/// Component of `u` in the subgraph induced by `{v : lev(v) >= i}`.
pub fn component_at_level<S: Scalar>(g: &HnGraph<S>, u: NodeId, i: Level) -> Result<BTreeSet<NodeId>> {
    g.checked(u)?;
    if g.level(u) < i {
        return Err(invalid("level", format!("node {u} has level {} < {i}", g.level(u))));
    }
    Ok(flood(g, u, |v| g.level(v) >= i))
}

/// The tier of `u`: nodes of level exactly `lev(u)` reachable through
/// edges among such nodes.
pub fn tier<S: Scalar>(g: &HnGraph<S>, u: NodeId) -> Result<BTreeSet<NodeId>> {
    g.checked(u)?;
    let lev = g.level(u);
    Ok(flood(g, u, |v| g.level(v) == lev))
}

fn flood<S: Scalar>(g: &HnGraph<S>, u: NodeId, keep: impl Fn(NodeId) -> bool) -> BTreeSet<NodeId> {
    let mut seen = BTreeSet::from([u]);
    let mut queue = VecDeque::from([u]);
    while let Some(x) = queue.pop_front() {
        for y in g.neighbors(x) {
            if keep(y) && seen.insert(y) {
                queue.push_back(y);
            }
        }
    }
    seen
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Route {
    pub next_hop: NodeId,
    pub hops: usize,
}

impl Route {
    fn better_than(&self, other: &Route) -> bool {
        (self.hops, self.next_hop) < (other.hops, other.next_hop)
    }
}

pub type Directory = BTreeMap<NodeId, Route>;

fn offer(dir: &mut Directory, dst: NodeId, route: Route) -> bool {
    match dir.get(&dst) {
        Some(cur) if !route.better_than(cur) => false,
        _ => {
            dir.insert(dst, route);
            true
        }
    }
}

/// Directories of every node, plus the parent links needed for the ascent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingState {
    /// `directories[u][i]` for `0 <= i <= lev(u)`; empty for vacant slots.
    pub directories: Vec<Vec<Directory>>,
    pub parents: Vec<Option<NodeId>>,
    pub built_for: u64,
    /// Number of connected components; routing is partial when above 1.
    pub components: usize,
}

impl RoutingState {
    pub fn directory(&self, u: NodeId, i: Level) -> Option<&Directory> {
        self.directories.get(u.index())?.get(i as usize)
    }

    /// The directory built at the node's own level.
    pub fn consolidated(&self, u: NodeId) -> Option<&Directory> {
        self.directories.get(u.index())?.last()
    }

    pub fn is_partial(&self) -> bool {
        self.components > 1
    }
}

/// Order-sensitive hash of the node levels, parents and edges.
pub fn fingerprint<S: Scalar>(g: &HnGraph<S>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |x: u64| {
        for b in x.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(g.capacity() as u64);
    for u in g.ids() {
        eat(u.0 as u64);
        eat(u64::from(g.level(u)));
        eat(g.parent(u).map_or(u64::MAX, |p| p.0 as u64));
    }
    for e in g.edges() {
        eat(e.u.0 as u64);
        eat(e.v.0 as u64);
    }
    h
}

/// Runs the hierarchical distance-vector protocol bottom-up.
///
/// At each level `i`, every tier of level-`i` nodes runs synchronous
/// Bellman-Ford rounds to convergence. A node's table starts from the
/// entries its children pushed up, and it learns its tier neighbours and
/// their tables. The converged table is the node's level-`i` directory; it
/// is then pushed to the parent (as the child itself at one hop plus every
/// entry one hop further), landing in the parent's directory at level
/// `i + 1`. Next-hop ties go to the lowest id.
pub fn build_directories<S: Scalar>(g: &HnGraph<S>) -> RoutingState {
    let mut directories: Vec<Vec<Directory>> = vec![Vec::new(); g.capacity()];
    for u in g.ids() {
        directories[u.index()] = vec![Directory::new(); g.level(u) as usize + 1];
    }
    let parents: Vec<Option<NodeId>> =
        (0..g.capacity()).map(|i| if g.contains(NodeId(i)) { g.parent(NodeId(i)) } else { None }).collect();
    let top = g.height().unwrap_or(0);
    for lev in 0..=top {
        let members: Vec<NodeId> = g.ids().filter(|&u| g.level(u) == lev).collect();
        // Seed: everything pushed into lower directories, keeping the best.
        let mut table: BTreeMap<NodeId, Directory> = BTreeMap::new();
        for &u in &members {
            let mut seed = Directory::new();
            for dir in &directories[u.index()] {
                for (&d, &r) in dir {
                    offer(&mut seed, d, r);
                }
            }
            table.insert(u, seed);
        }
        loop {
            let mut changed = false;
            let mut next = table.clone();
            for &u in &members {
                let entry = next.get_mut(&u).expect("member");
                for v in g.neighbors(u).filter(|&v| g.level(v) == lev) {
                    changed |= offer(entry, v, Route { next_hop: v, hops: 1 });
                    for (&d, r) in &table[&v] {
                        if d != u {
                            changed |= offer(entry, d, Route { next_hop: v, hops: r.hops + 1 });
                        }
                    }
                }
            }
            table = next;
            if !changed {
                break;
            }
        }
        for (u, dir) in table {
            if let Some(p) = parents[u.index()] {
                let slot = &mut directories[p.index()][lev as usize + 1];
                offer(slot, u, Route { next_hop: u, hops: 1 });
                for (&d, r) in &dir {
                    if d != p {
                        offer(slot, d, Route { next_hop: u, hops: r.hops + 1 });
                    }
                }
            }
            *directories[u.index()].last_mut().expect("own level") = dir;
        }
    }
    RoutingState { directories, parents, built_for: fingerprint(g), components: crate::metrics::components(g).len() }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteResult {
    pub path: Vec<NodeId>,
    pub hops: usize,
    /// Distinct nodes that processed the query; 0 for proactive routes.
    pub flooded: usize,
}

fn check_node(state: &RoutingState, u: NodeId) -> Result<()> {
    match state.directories.get(u.index()) {
        Some(d) if !d.is_empty() => Ok(()),
        _ => Err(Error::NodeNotFound(u)),
    }
}

/// Climbs from `src` to the first ancestor that is `dst` or lists it in its
/// consolidated directory, then follows next hops down to `dst`.
pub fn proactive_route(state: &RoutingState, src: NodeId, dst: NodeId) -> Result<RouteResult> {
    check_node(state, src)?;
    check_node(state, dst)?;
    let mut path = vec![src];
    let mut cur = src;
    while cur != dst && !state.consolidated(cur).is_some_and(|d| d.contains_key(&dst)) {
        cur = state.parents[cur.index()].ok_or(Error::Unreachable { from: src, to: dst })?;
        path.push(cur);
    }
    while cur != dst {
        let route =
            state.consolidated(cur).and_then(|d| d.get(&dst)).ok_or(Error::Unreachable { from: src, to: dst })?;
        cur = route.next_hop;
        path.push(cur);
    }
    Ok(RouteResult { hops: path.len() - 1, path, flooded: 0 })
}

/// Hierarchical controlled flooding. Phase `k` starts at the `k`-th node on
/// the source's parent chain, floods its tier, and from every node reached
/// descends into child subtrees, flooding each child's tier in turn.
/// Nodes reached in earlier phases are not flooded again. The search stops
/// after the first phase that reaches `dst`.
pub fn reactive_route<S: Scalar>(g: &HnGraph<S>, src: NodeId, dst: NodeId) -> Result<RouteResult> {
    g.checked(src)?;
    g.checked(dst)?;
    if src == dst {
        return Ok(RouteResult { path: vec![src], hops: 0, flooded: 1 });
    }
    let mut pred: BTreeMap<NodeId, Option<NodeId>> = BTreeMap::from([(src, None)]);
    let mut children: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    let mut kids = |x: NodeId| children.entry(x).or_insert_with(|| g.children(x)).clone();
    let mut anchor = src;
    loop {
        let mut queue = VecDeque::from([anchor]);
        while let Some(x) = queue.pop_front() {
            let lx = g.level(x);
            let next: Vec<NodeId> = g.neighbors(x).filter(|&y| g.level(y) == lx).chain(kids(x)).collect();
            for y in next {
                if let Entry::Vacant(e) = pred.entry(y) {
                    e.insert(Some(x));
                    queue.push_back(y);
                }
            }
        }
        if pred.contains_key(&dst) {
            break;
        }
        let up = g.parent(anchor).ok_or(Error::Unreachable { from: src, to: dst })?;
        pred.insert(up, Some(anchor));
        anchor = up;
    }
    let mut path = vec![dst];
    while let Some(&Some(p)) = pred.get(path.last().expect("non-empty")) {
        path.push(p);
    }
    path.reverse();
    Ok(RouteResult { hops: path.len() - 1, path, flooded: pred.len() })
}
