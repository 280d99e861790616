//! Line-oriented text format for built graphs.
//!
//! ```text
//! hn-graph v1
//! nodes <live> slots <capacity> p <p> cap <cap|-> region <square|torus> <side> seed <seed>
//! node <id> <x> <y> <weight> <level> <parent|-1>
//! radius <id> <r>
//! edge <u> <v> <creation-level>
//! ```
//!
//! Floats use the shortest representation that parses back to the same
//! value, so `write(read(s)) == s`. `radius` lines appear only for nodes
//! with a transmission limit. Reading rebuilds the graph from the stored
//! levels and rejects files whose edges or parents disagree with it.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{Point, Region, RegionKind};
use crate::hn::graph::{construct, HnGraph, HnNode};
use crate::hn::levels::{det_level, Params};
use crate::spatial::SearchStrategy;
use crate::{Level, NodeId, Scalar};

const MAGIC: &str = "hn-graph v1";

pub fn write_graph<S: Scalar>(g: &HnGraph<S>) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    let cap = g.params.max_level_cap.map_or_else(|| "-".to_string(), |c| c.to_string());
    let _ = writeln!(
        out,
        "nodes {} slots {} p {} cap {} region {} {} seed {}",
        g.node_count(),
        g.capacity(),
        g.params.p,
        cap,
        g.region.kind().as_str(),
        g.region.side(),
        g.seed
    );
    for id in g.ids() {
        let n = g.node(id).expect("live");
        let parent = g.parent(id).map_or_else(|| "-1".to_string(), |p| p.to_string());
        let _ = writeln!(out, "node {} {} {} {} {} {}", id, n.position.x, n.position.y, n.weight, n.level(), parent);
    }
    for id in g.ids() {
        if let Some(r) = g.node(id).and_then(|n| n.radius) {
            let _ = writeln!(out, "radius {id} {r}");
        }
    }
    for e in g.edges() {
        let _ = writeln!(out, "edge {} {} {}", e.u, e.v, e.level);
    }
    out
}

struct Fields<'a> {
    line: usize,
    it: std::str::SplitWhitespace<'a>,
}

impl<'a> Fields<'a> {
    fn next<T: FromStr>(&mut self, what: &str) -> Result<T> {
        let tok = self.it.next().ok_or_else(|| perr(self.line, format!("missing {what}")))?;
        tok.parse().map_err(|_| perr(self.line, format!("bad {what} `{tok}`")))
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        match self.it.next() {
            Some(t) if t == word => Ok(()),
            other => Err(perr(self.line, format!("expected `{word}`, found {other:?}"))),
        }
    }

    fn end(&mut self) -> Result<()> {
        match self.it.next() {
            None => Ok(()),
            Some(t) => Err(perr(self.line, format!("trailing token `{t}`"))),
        }
    }
}

fn perr(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse { line, reason: reason.into() }
}

pub fn read_graph<S: Scalar>(text: &str) -> Result<HnGraph<S>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        _ => return Err(perr(1, format!("expected `{MAGIC}`"))),
    }
    let (hline, header) = lines.next().ok_or_else(|| perr(2, "missing header"))?;
    let mut f = Fields { line: hline, it: header.split_whitespace() };
    f.expect("nodes")?;
    let live: usize = f.next("node count")?;
    f.expect("slots")?;
    let capacity: usize = f.next("slot count")?;
    f.expect("p")?;
    let p: S = f.next("p")?;
    f.expect("cap")?;
    let cap_tok: String = f.next("cap")?;
    let cap = if cap_tok == "-" {
        None
    } else {
        Some(cap_tok.parse::<Level>().map_err(|_| perr(hline, format!("bad cap `{cap_tok}`")))?)
    };
    f.expect("region")?;
    let kind: RegionKind = f.next("region kind")?;
    let side: S = f.next("side")?;
    f.expect("seed")?;
    let seed: u64 = f.next("seed")?;
    f.end()?;
    let region = Region::new(kind, side).map_err(|e| perr(hline, e.to_string()))?;
    let mut params = Params::new(p).map_err(|e| perr(hline, e.to_string()))?;
    params.max_level_cap = cap;

    let mut nodes: Vec<Option<HnNode<S>>> = vec![None; capacity];
    let mut parents: Vec<(usize, NodeId, Option<NodeId>)> = Vec::new();
    let mut edges = Vec::new();
    for (ln, line) in lines {
        let mut f = Fields { line: ln, it: line.split_whitespace() };
        let kind: String = match f.it.next() {
            Some(k) => k.to_string(),
            None => continue,
        };
        match kind.as_str() {
            "node" => {
                let id: usize = f.next("id")?;
                let x: S = f.next("x")?;
                let y: S = f.next("y")?;
                let weight: S = f.next("weight")?;
                let level: Level = f.next("level")?;
                let parent: i64 = f.next("parent")?;
                f.end()?;
                let slot = nodes.get_mut(id).ok_or_else(|| perr(ln, format!("id {id} beyond slot count")))?;
                if slot.is_some() {
                    return Err(perr(ln, format!("duplicate node {id}")));
                }
                let position = Point::new(x, y);
                if !region.contains(position) {
                    return Err(perr(ln, "node outside region"));
                }
                let det = det_level(weight, p).map_err(|e| perr(ln, e.to_string()))?;
                if level < det {
                    return Err(perr(ln, format!("level {level} below deterministic level {det}")));
                }
                *slot = Some(HnNode { position, weight, det_level: det, promotion: level - det, radius: None });
                let parent = usize::try_from(parent).ok().map(NodeId);
                parents.push((ln, NodeId(id), parent));
            }
            "radius" => {
                let id: usize = f.next("id")?;
                let r: S = f.next("radius")?;
                f.end()?;
                let node = nodes
                    .get_mut(id)
                    .and_then(Option::as_mut)
                    .ok_or_else(|| perr(ln, format!("radius for unknown node {id}")))?;
                if !(r > S::zero()) {
                    return Err(perr(ln, "radius must be positive"));
                }
                node.radius = Some(r);
            }
            "edge" => {
                let u: usize = f.next("u")?;
                let v: usize = f.next("v")?;
                let level: Level = f.next("level")?;
                f.end()?;
                edges.push((ln, NodeId(u), NodeId(v), level));
            }
            other => return Err(perr(ln, format!("unknown record `{other}`"))),
        }
    }
    let found = nodes.iter().filter(|n| n.is_some()).count();
    if found != live {
        return Err(perr(hline, format!("header announces {live} nodes, found {found}")));
    }

    let graph = construct(region, params, seed, nodes, SearchStrategy::Grid);
    for (ln, id, parent) in parents {
        if graph.parent(id) != parent {
            return Err(perr(ln, format!("parent of {id} disagrees with the construction")));
        }
    }
    let built = graph.edges();
    if built.len() != edges.len() {
        return Err(perr(hline, format!("{} edges listed, construction yields {}", edges.len(), built.len())));
    }
    for ((ln, u, v, level), e) in edges.into_iter().zip(built) {
        if (u, v, level) != (e.u, e.v, e.level) {
            return Err(perr(ln, format!("edge {u} {v} {level} disagrees with the construction")));
        }
    }
    Ok(graph)
}
