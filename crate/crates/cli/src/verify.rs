//! Quick self-checks of the main properties at desk scale.

use std::fmt;

use anyhow::Result;
use clap::ValueEnum;
use rand::Rng;
use rayon::prelude::*;

use hngraph::geometry::{poisson_points, uniform_points};
use hngraph::hn::build_graph;
use hngraph::metrics::{find_lambda_min, height_tail, LambdaSweep};
use hngraph::rng::{derive_indexed, derive_seed, stream};
use hngraph::routing::{build_directories, proactive_route, reactive_route, RouteResult};
use hngraph::wsn::{run_hn_simulation, run_leach_baseline, AggregationModel, Scenario};
use hngraph::{HnGraph, NodeId, Params, Region, WeightAssignment};

use crate::config::{parse_flat, Config};
use crate::experiments::build_instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    DegreeBounds,
    HeightTail,
    LambdaMin,
    RepairOracle,
    RoutingOracle,
    EnergyConservation,
}

/// `value` compared against `threshold`; `at_most` selects the direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub threshold: f64,
    pub at_most: bool,
}

impl Check {
    fn below(label: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { label: label.into(), value, threshold, at_most: true }
    }

    fn above(label: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { label: label.into(), value, threshold, at_most: false }
    }

    /// Distance to the threshold, positive when passing.
    pub fn margin(&self) -> f64 {
        if self.at_most {
            self.threshold - self.value
        } else {
            self.value - self.threshold
        }
    }

    pub fn passed(&self) -> bool {
        self.margin() >= 0.0
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.at_most { "<=" } else { ">=" };
        write!(
            f,
            "{} {}: {:.6} {op} {:.6} (margin {:+.6})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.label,
            self.value,
            self.threshold,
            self.margin()
        )
    }
}

pub fn run(suite: Suite, seed: u64) -> Result<Vec<Check>> {
    match suite {
        Suite::DegreeBounds => degree_bounds(seed),
        Suite::HeightTail => height(seed),
        Suite::LambdaMin => lambda_min(seed),
        Suite::RepairOracle => repair(seed),
        Suite::RoutingOracle => routing(seed),
        Suite::EnergyConservation => energy(seed),
    }
}

fn degree_bounds(seed: u64) -> Result<Vec<Check>> {
    let text = "kind = degree\nregion = torus\nside = 10\nlambda = 200\n";
    let spec = Config::resolve(&parse_flat(text)?, &[], None)?.graph.expect("degree kind has a graph");
    let means = (0..40)
        .into_par_iter()
        .map(|t| {
            let g = build_instance(&spec, derive_indexed(seed, "trial", t))?;
            Ok(2.0 * g.edge_count() as f64 / g.node_count() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = means.len() as f64;
    let mean = means.iter().sum::<f64>() / n;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let upper = mean + 3.0 * (var / n).sqrt();
    Ok(vec![Check::below("mean degree + 3 SE, unit weights", upper, 14.0)])
}

fn height(seed: u64) -> Result<Vec<Check>> {
    let (n, p) = (100usize, 0.5);
    let tail = height_tail(2000, n, p, seed)?;
    let worst = (0..tail.tail.len() + 2)
        .map(|k| tail.at(k) - (n as f64 * p.powi(k as i32)).min(1.0) - 3.0 * tail.std_error(k))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![Check::below("max_k P(ht >= k) - n p^k - 3 SE", worst, 0.0)])
}

fn lambda_min(seed: u64) -> Result<Vec<Check>> {
    let region = Region::square(10.0)?;
    let r = 1.6;
    let sweep = LambdaSweep { step: 0.2, trials: 10, confirmations: 5, cap: None };
    let res = find_lambda_min(r, 0.5, region, sweep, seed)?;
    Ok(vec![
        Check::above("lambda_min r^2 lower edge", res.scaled(), 2.9),
        Check::below("lambda_min r^2 upper edge", res.scaled(), 4.4),
    ])
}

fn repair(seed: u64) -> Result<Vec<Check>> {
    let region = Region::square(5.0)?;
    let mismatches: usize = (0..50u64)
        .into_par_iter()
        .map(|t| {
            let s = derive_indexed(seed, "trial", t);
            let pts = poisson_points(region, 1.0, s).expect("positive density");
            let mut g = build_graph(&pts, &WeightAssignment::unit(pts.len()), Params::new(0.5).expect("valid p"), s)
                .expect("valid graph");
            let mut rng = stream(s, "events");
            let mut bad = 0;
            for _ in 0..30 {
                let ids: Vec<NodeId> = g.ids().collect();
                let roll: f64 = rng.random();
                let ok = if ids.is_empty() || roll < 0.4 {
                    let pos = region.sample(&mut rng);
                    let w = rng.random_range(1.0..8.0);
                    g.add_node(pos, w, &mut rng).is_ok()
                } else if roll < 0.7 {
                    g.remove_node(ids[rng.random_range(0..ids.len())]).is_ok()
                } else {
                    let w = rng.random_range(1.0..8.0);
                    g.update_weight(ids[rng.random_range(0..ids.len())], w).is_ok()
                };
                if !ok || g != g.rebuild() {
                    bad += 1;
                }
            }
            bad
        })
        .sum();
    Ok(vec![Check::below("repaired graphs differing from a rebuild", mismatches as f64, 0.0)])
}

/// Problems with a route: wrong endpoints, non-edges, wrong hop count, or
/// fewer hops than a shortest path.
pub fn route_defects(g: &HnGraph, src: NodeId, dst: NodeId, r: &RouteResult, bfs: &[Option<usize>]) -> usize {
    let mut bad = 0;
    if r.path.first() != Some(&src) || r.path.last() != Some(&dst) {
        bad += 1;
    }
    bad += r.path.windows(2).filter(|w| !g.has_edge(w[0], w[1])).count();
    if r.hops + 1 != r.path.len() {
        bad += 1;
    }
    if bfs[dst.index()].is_none_or(|h| r.hops < h) {
        bad += 1;
    }
    bad
}

fn routing(seed: u64) -> Result<Vec<Check>> {
    let region = Region::square(10.0)?;
    let results: Vec<(usize, usize)> = (0..20u64)
        .into_par_iter()
        .map(|t| {
            let s = derive_indexed(seed, "trial", t);
            let pts = uniform_points(region, 150, derive_seed(s, "points"));
            let g = build_graph(&pts, &WeightAssignment::unit(150), Params::new(0.5).expect("valid p"), s)
                .expect("valid graph");
            let state = build_directories(&g);
            let mut rng = stream(s, "pairs");
            let (mut defects, mut failures) = (0, 0);
            for _ in 0..50 {
                let src = NodeId(rng.random_range(0..150));
                let dst = NodeId(rng.random_range(0..150));
                let bfs = g.bfs_hops(src);
                for r in [proactive_route(&state, src, dst), reactive_route(&g, src, dst)] {
                    match r {
                        Ok(r) => defects += route_defects(&g, src, dst, &r, &bfs),
                        Err(_) => failures += 1,
                    }
                }
            }
            (defects, failures)
        })
        .collect();
    let defects: usize = results.iter().map(|r| r.0).sum();
    let failures: usize = results.iter().map(|r| r.1).sum();
    Ok(vec![
        Check::below("route defects", defects as f64, 0.0),
        Check::below("routes not found in connected graphs", failures as f64, 0.0),
    ])
}

fn energy(seed: u64) -> Result<Vec<Check>> {
    let scenario = Scenario::default();
    let pts = uniform_points(Region::square(100.0)?, 30, derive_seed(seed, "points"));
    let mut checks = Vec::new();
    for model in [AggregationModel::Unlimited, AggregationModel::Limited(10)] {
        let run = run_hn_simulation(&pts, &scenario, model, 0.5, seed)?;
        checks.push(Check::below(
            format!("conservation error, hn {model}"),
            run.conservation_error(&scenario.energy),
            1e-9,
        ));
    }
    let run = run_leach_baseline(&pts, &scenario, 5, seed)?;
    checks.push(Check::below("conservation error, leach", run.conservation_error(&scenario.energy), 1e-9));
    Ok(checks)
}
