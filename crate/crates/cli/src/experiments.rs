//! One runner per experiment kind. Each writes its tables plus a
//! `manifest.cfg` that reproduces the run.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rand::Rng;
use rayon::prelude::*;

use hngraph::dynamics::{format_event, parse_trace, Event};
use hngraph::geometry::{poisson_points, uniform_points};
use hngraph::hn::{build_graph, build_radius_bounded, read_graph, write_graph};
use hngraph::metrics::{
    degree_stats, edge_length_stats, find_lambda_min, fit_log_counts, height_tail, hop_stats, is_connected,
    stretch_samples, Histogram,
};
use hngraph::rng::{derive_indexed, derive_seed, stream};
use hngraph::routing::{build_directories, proactive_route, reactive_route, RouteResult};
use hngraph::wsn::{run_hn_simulation, run_leach_baseline, AggregationModel, SimulationRun};
use hngraph::{Error, HnGraph, NodeId, Params, PointSet, WeightAssignment};

use crate::config::{Config, Experiment, GraphSpec, PointModel, WsnSpec};
use crate::table::{bucket, energy, scalar, Table, METRIC_HEADER};

pub const MANIFEST: &str = "manifest.cfg";

/// Builds the graph a [`GraphSpec`] describes for one seed.
pub fn build_instance(spec: &GraphSpec, seed: u64) -> Result<HnGraph> {
    let region = spec.region.region();
    let points: PointSet = match spec.points {
        PointModel::Poisson => poisson_points(region, spec.lambda, derive_seed(seed, "points"))?,
        PointModel::Uniform => uniform_points(region, spec.n, derive_seed(seed, "points")),
    };
    let n = points.len();
    let mut w = vec![1.0; n];
    if let Some(first) = w.first_mut() {
        *first = spec.heavy_weight;
    }
    let weights = WeightAssignment::new(w)?;
    let params = Params::new(spec.p)?;
    let g = match spec.radius {
        None => build_graph(&points, &weights, params, seed)?,
        Some(r) => build_radius_bounded(&points, &weights, params, &vec![r; n], seed)?,
    };
    Ok(g)
}

fn trial_seed(seed: u64, t: usize) -> u64 {
    derive_indexed(seed, "trial", t as u64)
}

/// Runs the configured experiment into `dir` and returns the written files.
pub fn run(config: &Config, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let mut written = match &config.experiment {
        Experiment::Build => build(config, dir)?,
        Experiment::Dynamics { trace, events } => {
            let g = build_instance(graph_spec(config), config.seed)?;
            let trace = match trace {
                Some(path) => Some(std::fs::read_to_string(path).with_context(|| format!("cannot read trace {path}"))?),
                None => None,
            };
            dynamics(g, trace.as_deref(), *events, config.seed, dir)?
        }
        Experiment::Route { pairs } => route(config, *pairs, dir)?,
        Experiment::Degree { trials } => vec![degree(config, *trials)?.write(dir, "degree.csv")?],
        Experiment::Hops { trials, pairs, bucket } => {
            vec![hops(config, *trials, *pairs, *bucket)?.write(dir, "hops.csv")?]
        }
        Experiment::Stretch { distances, tolerance, bucket, trials } => {
            vec![stretch(config, distances, *tolerance, *bucket, *trials)?.write(dir, "stretch.csv")?]
        }
        Experiment::LambdaMin { region, p, radii, sweep } => {
            let mut t = Table::new(METRIC_HEADER);
            for &r in radii {
                let res = find_lambda_min(r, *p, region.region(), *sweep, config.seed)?;
                let label = format!("r={r}");
                scalar(&mut t, &label, "lambda_min", res.lambda_min);
                scalar(&mut t, &label, "lambda_min_r2", res.scaled());
                scalar(&mut t, &label, "increments_checked", res.increments_checked);
            }
            vec![t.write(dir, "lambda_min.csv")?]
        }
        Experiment::Height { n, p, trials } => {
            let tail = height_tail(*trials, *n, *p, config.seed)?;
            let mut t = Table::new(METRIC_HEADER);
            let label = format!("n={n}");
            for k in 0..tail.tail.len() {
                let kf = k as f64;
                bucket(&mut t, &label, "tail", kf, kf, tail.at(k));
                bucket(&mut t, &label, "std_error", kf, kf, tail.std_error(k));
                bucket(&mut t, &label, "bound", kf, kf, (*n as f64 * p.powi(k as i32)).min(1.0));
            }
            vec![t.write(dir, "height.csv")?]
        }
        Experiment::Wsn(spec) => wsn(spec, config.seed, dir)?,
    };
    let manifest = dir.join(MANIFEST);
    std::fs::write(&manifest, config.manifest()).with_context(|| format!("cannot write {}", manifest.display()))?;
    written.push(manifest);
    Ok(written)
}

fn graph_spec(config: &Config) -> &GraphSpec {
    config.graph.as_ref().expect("graph kinds always carry a graph spec")
}

fn build(config: &Config, dir: &Path) -> Result<Vec<PathBuf>> {
    let g = build_instance(graph_spec(config), config.seed)?;
    let mut t = Table::new(METRIC_HEADER);
    graph_summary(&mut t, "build", &g);
    let graph = dir.join("graph.hn");
    std::fs::write(&graph, write_graph(&g)).with_context(|| format!("cannot write {}", graph.display()))?;
    Ok(vec![graph, t.write(dir, "build.csv")?])
}

fn graph_summary(t: &mut Table, label: &str, g: &HnGraph) {
    scalar(t, label, "nodes", g.node_count());
    scalar(t, label, "edges", g.edge_count());
    scalar(t, label, "height", g.height().map_or_else(|_| "none".to_string(), |h| h.to_string()));
    scalar(t, label, "connected", is_connected(g));
    let deg = degree_stats(g);
    scalar(t, label, "degree_mean", deg.mean);
    for (lo, hi, c) in deg.buckets() {
        bucket(t, label, "degree_count", lo, hi, c);
    }
    let len = edge_length_stats(g);
    scalar(t, label, "edge_length_mean", len.mean);
    for (lo, hi, c) in len.buckets() {
        bucket(t, label, "edge_length_count", lo, hi, c);
    }
}

/// Random arrivals, departures and weight changes.
fn random_events(g: &HnGraph, count: usize, seed: u64) -> Vec<Event<f64>> {
    let mut rng = stream(seed, "events");
    let mut alive: Vec<NodeId> = g.ids().collect();
    let mut next = g.capacity();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let roll: f64 = rng.random();
        if alive.is_empty() || roll < 0.4 {
            let position = g.region().sample(&mut rng);
            let weight = if rng.random::<f64>() < 0.2 { rng.random_range(1.0..16.0) } else { 1.0 };
            out.push(Event::Add { position, weight });
            alive.push(NodeId(next));
            next += 1;
        } else if roll < 0.7 {
            let id = alive.swap_remove(rng.random_range(0..alive.len()));
            out.push(Event::Remove(id));
        } else {
            let id = alive[rng.random_range(0..alive.len())];
            out.push(Event::Weight(id, rng.random_range(1.0..16.0)));
        }
    }
    out
}

/// Applies a trace (or `events` random events) one at a time, checking
/// each repaired graph against a fresh construction.
pub fn dynamics(mut g: HnGraph, trace: Option<&str>, events: usize, seed: u64, dir: &Path) -> Result<Vec<PathBuf>> {
    let events = match trace {
        Some(text) => parse_trace(text)?,
        None => random_events(&g, events, seed),
    };
    let mut promotions = stream(seed, "promotions");
    let mut t = Table::new(&[
        "step",
        "event",
        "added_edges",
        "removed_edges",
        "reparented",
        "recomputed",
        "nodes",
        "edges",
        "matches_rebuild",
    ]);
    for (i, e) in events.iter().enumerate() {
        let delta =
            g.apply_event(e, &mut promotions).with_context(|| format!("event {}: {}", i + 1, format_event(e)))?;
        let matches = g == g.rebuild();
        t.row(&[
            &(i + 1),
            &format_event(e),
            &delta.added_edges.len(),
            &delta.removed_edges.len(),
            &delta.reparented.len(),
            &delta.recomputed.len(),
            &g.node_count(),
            &g.edge_count(),
            &matches,
        ]);
    }
    let graph = dir.join("final.hn");
    std::fs::write(&graph, write_graph(&g)).with_context(|| format!("cannot write {}", graph.display()))?;
    Ok(vec![t.write(dir, "dynamics.csv")?, graph])
}

/// Replays a trace file against a stored graph.
pub fn replay(graph: &Path, trace: &Path, seed: u64, dir: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(graph).with_context(|| format!("cannot read graph {}", graph.display()))?;
    let g: HnGraph = read_graph(&text).with_context(|| format!("in {}", graph.display()))?;
    let trace_text =
        std::fs::read_to_string(trace).with_context(|| format!("cannot read trace {}", trace.display()))?;
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    dynamics(g, Some(&trace_text), 0, seed, dir).with_context(|| format!("replaying {}", trace.display()))
}

pub const ROUTE_HEADER: &[&str] = &["src", "dst", "protocol", "hops", "flooded", "path"];

fn route_row(t: &mut Table, src: NodeId, dst: NodeId, protocol: &str, r: &std::result::Result<RouteResult, Error>) {
    match r {
        Ok(r) => {
            let path: Vec<String> = r.path.iter().map(|n| n.0.to_string()).collect();
            t.row(&[&src, &dst, &protocol, &r.hops, &r.flooded, &path.join("-")]);
        }
        Err(_) => t.row(&[&src, &dst, &protocol, &"", &"", &"unreachable"]),
    }
}

fn route(config: &Config, pairs: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    let g = build_instance(graph_spec(config), config.seed)?;
    let ids: Vec<NodeId> = g.ids().collect();
    let mut t = Table::new(ROUTE_HEADER);
    if !ids.is_empty() {
        let mut rng = stream(config.seed, "pairs");
        let sample: Vec<(NodeId, NodeId)> =
            (0..pairs).map(|_| (ids[rng.random_range(0..ids.len())], ids[rng.random_range(0..ids.len())])).collect();
        let state = build_directories(&g);
        let results: Vec<_> =
            sample.par_iter().map(|&(s, d)| (proactive_route(&state, s, d), reactive_route(&g, s, d))).collect();
        for (&(s, d), (pro, re)) in sample.iter().zip(&results) {
            route_row(&mut t, s, d, "proactive", pro);
            route_row(&mut t, s, d, "reactive", re);
        }
    }
    Ok(vec![t.write(dir, "routes.csv")?])
}

fn degree(config: &Config, trials: usize) -> Result<Table> {
    let spec = graph_spec(config);
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|i| {
            let g = build_instance(spec, trial_seed(config.seed, i))?;
            let degrees: Vec<usize> = g.ids().map(|u| g.degree(u)).collect();
            let heavy = g.contains(NodeId(0)).then(|| g.degree(NodeId(0)) as f64);
            Ok((degrees, heavy))
        })
        .collect::<Result<Vec<_>>>()?;
    let means: Vec<f64> = per_trial
        .iter()
        .filter(|(d, _)| !d.is_empty())
        .map(|(d, _)| d.iter().sum::<usize>() as f64 / d.len() as f64)
        .collect();
    let mean_hist = Histogram::spanning(&means, 1);
    let pooled: Vec<usize> = per_trial.iter().flat_map(|(d, _)| d.iter().copied()).collect();
    let mut t = Table::new(METRIC_HEADER);
    let label = format!("lambda={}", spec.lambda);
    scalar(&mut t, &label, "trials", trials);
    scalar(&mut t, &label, "mean_degree", mean_hist.mean);
    scalar(&mut t, &label, "mean_degree_std_error", mean_hist.std_error());
    for (lo, hi, c) in Histogram::integer(&pooled).buckets() {
        bucket(&mut t, &label, "degree_count", lo, hi, c);
    }
    if spec.heavy_weight > 1.0 {
        let heavy: Vec<f64> = per_trial.iter().filter_map(|(_, h)| *h).collect();
        let h = Histogram::spanning(&heavy, 1);
        scalar(&mut t, &label, "heavy_degree_mean", h.mean);
        scalar(&mut t, &label, "heavy_degree_std_dev", h.variance.sqrt());
    }
    Ok(t)
}

fn hops(config: &Config, trials: usize, pairs: usize, width: f64) -> Result<Table> {
    let spec = graph_spec(config);
    let stats = (0..trials)
        .into_par_iter()
        .map(|i| {
            let s = trial_seed(config.seed, i);
            Ok(hop_stats(&build_instance(spec, s)?, pairs, width, derive_seed(s, "pairs"))?)
        })
        .collect::<Result<Vec<_>>>()?;
    // Pool per-bucket means weighted by their pair counts.
    let mut pooled: std::collections::BTreeMap<i64, (f64, f64, u64, f64)> = Default::default();
    let mut unreachable = 0;
    let mut total = 0;
    for st in &stats {
        unreachable += st.unreachable;
        total += st.pairs;
        for b in &st.buckets {
            let e = pooled.entry((b.lo / width).round() as i64).or_insert((b.lo, b.hi, 0, 0.0));
            e.2 += b.hops.n;
            e.3 += b.hops.mean * b.hops.n as f64;
        }
    }
    let mut t = Table::new(METRIC_HEADER);
    let label = format!("lambda={}", spec.lambda);
    scalar(&mut t, &label, "pairs", total);
    scalar(&mut t, &label, "unreachable", unreachable);
    for (lo, hi, n, sum) in pooled.into_values() {
        bucket(&mut t, &label, "pairs", lo, hi, n);
        bucket(&mut t, &label, "mean_hops", lo, hi, if n == 0 { 0.0 } else { sum / n as f64 });
    }
    Ok(t)
}

/// Stretch samples at distance `d`, pooled over `trials` graphs.
pub fn pooled_stretch(spec: &GraphSpec, d: f64, tolerance: f64, trials: usize, seed: u64) -> Result<Vec<f64>> {
    let per = (0..trials)
        .into_par_iter()
        .map(|i| {
            let s = trial_seed(seed, i);
            let g = build_instance(spec, s)?;
            match stretch_samples(&g, d, tolerance, derive_seed(s, "stretch")) {
                Ok(v) => Ok(v),
                Err(Error::EmptyResult(_)) => Ok(Vec::new()),
                Err(e) => Err(e.into()),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per.into_iter().flatten().collect())
}

fn stretch(config: &Config, distances: &[f64], tolerance: f64, width: f64, trials: usize) -> Result<Table> {
    let spec = graph_spec(config);
    let mut t = Table::new(METRIC_HEADER);
    for &d in distances {
        let samples = pooled_stretch(spec, d, tolerance, trials, derive_indexed(config.seed, "distance", d.to_bits()))?;
        let label = format!("d={d}");
        let h = Histogram::fixed_width(&samples, width);
        scalar(&mut t, &label, "samples", h.n);
        scalar(&mut t, &label, "mean_stretch", h.mean);
        for (lo, hi, c) in h.buckets() {
            bucket(&mut t, &label, "stretch_count", lo, hi, c);
        }
        scalar(&mut t, &label, "tail_above_2", h.tail_fraction(2.0));
        if let Some(fit) = fit_log_counts(&h) {
            scalar(&mut t, &label, "log_count_slope", fit.slope);
            scalar(&mut t, &label, "log_count_r2", fit.r_squared);
        }
        for beta in 2..=5 {
            let n = samples.len().max(1) as f64;
            let mean = samples.iter().map(|s| s.powi(beta)).sum::<f64>() / n;
            scalar(&mut t, &label, &format!("mean_power_stretch_beta{beta}"), mean);
        }
    }
    Ok(t)
}

pub const ROUND_HEADER: &[&str] = &[
    "round",
    "t_seconds",
    "nodes_alive",
    "raw_signals",
    "effective_signals",
    "cum_effective",
    "energy_j",
    "cum_energy_j",
    "protocol",
    "aggregation",
];

/// Protocol and aggregation labels of one simulated configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Hn(AggregationModel),
    Leach,
}

impl Protocol {
    pub fn labels(self) -> (&'static str, String) {
        match self {
            Protocol::Hn(m) => ("hn", m.to_string()),
            Protocol::Leach => ("leach", "cluster".to_string()),
        }
    }
}

/// Simulates every configured protocol on one shared deployment.
pub fn simulate(spec: &WsnSpec, seed: u64) -> Result<Vec<(Protocol, SimulationRun)>> {
    let points = uniform_points(spec.region.region(), spec.n, derive_seed(seed, "points"));
    let mut protocols: Vec<Protocol> = spec.aggregation.iter().map(|&m| Protocol::Hn(m)).collect();
    if spec.leach {
        protocols.push(Protocol::Leach);
    }
    protocols
        .par_iter()
        .map(|&proto| {
            let run = match proto {
                Protocol::Hn(m) => run_hn_simulation(&points, &spec.scenario, m, spec.p, seed)?,
                Protocol::Leach => run_leach_baseline(&points, &spec.scenario, spec.k, seed)?,
            };
            Ok((proto, run))
        })
        .collect()
}

fn wsn(spec: &WsnSpec, seed: u64, dir: &Path) -> Result<Vec<PathBuf>> {
    let runs = simulate(spec, seed)?;
    let mut rounds = Table::new(ROUND_HEADER);
    let mut fig_a = Table::new(&["protocol", "aggregation", "t_seconds", "cum_effective"]);
    let mut fig_b = Table::new(&["protocol", "aggregation", "cum_energy_j", "cum_effective"]);
    let mut fig_c = Table::new(&["protocol", "aggregation", "t_seconds", "nodes_alive"]);
    let mut summary = Table::new(&[
        "protocol",
        "aggregation",
        "lifetime_rounds",
        "lifetime_seconds",
        "cum_effective",
        "cum_energy_j",
        "effective_per_joule",
        "max_round_deaths",
        "conservation_error",
    ]);
    for (proto, run) in &runs {
        let (name, agg) = proto.labels();
        for r in &run.rounds {
            rounds.row(&[
                &r.round,
                &r.t_seconds,
                &r.nodes_alive,
                &r.raw_signals,
                &r.effective_signals,
                &r.cum_effective,
                &energy(r.energy_consumed),
                &energy(r.cum_energy),
                &name,
                &agg,
            ]);
            fig_a.row(&[&name, &agg, &r.t_seconds, &r.cum_effective]);
            fig_b.row(&[&name, &agg, &energy(r.cum_energy), &r.cum_effective]);
            fig_c.row(&[&name, &agg, &r.t_seconds, &r.nodes_alive]);
        }
        let life = run.lifetime_rounds();
        let cum = run.rounds.last().map_or(0, |r| r.cum_effective);
        let total = run.total_energy();
        summary.row(&[
            &name,
            &agg,
            &life,
            &(life as f64 * spec.scenario.energy.round_seconds),
            &cum,
            &energy(total),
            &if total > 0.0 { cum as f64 / total } else { 0.0 },
            &run.max_round_deaths(),
            &run.conservation_error(&spec.scenario.energy),
        ]);
    }
    Ok(vec![
        rounds.write(dir, "wsn_rounds.csv")?,
        fig_a.write(dir, "fig4a.csv")?,
        fig_b.write(dir, "fig4b.csv")?,
        fig_c.write(dir, "fig4c.csv")?,
        summary.write(dir, "wsn_summary.csv")?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_flat;

    fn config(text: &str) -> Config {
        Config::resolve(&parse_flat(text).unwrap(), &[], None).unwrap()
    }

    #[test]
    fn heavy_node_is_node_zero() {
        let c = config("kind = build\nheavy_weight = 64\nlambda = 2\n");
        let g = build_instance(c.graph.as_ref().unwrap(), 3).unwrap();
        let top = g.ids().map(|u| g.level(u)).max().unwrap();
        assert!(g.level(NodeId(0)) >= 6);
        assert_eq!(g.level(NodeId(0)), top.max(g.level(NodeId(0))));
    }

    #[test]
    fn random_events_reference_live_nodes() {
        let c = config("kind = dynamics\nlambda = 1\n");
        let g = build_instance(c.graph.as_ref().unwrap(), 9).unwrap();
        let evs = random_events(&g, 200, 9);
        let mut h = g.clone();
        let mut rng = stream(9, "promotions");
        for e in &evs {
            h.apply_event(e, &mut rng).unwrap();
        }
        assert!(h.check_invariants().is_ok());
    }

    #[test]
    fn route_rows_cover_both_protocols() {
        let dir = tempfile::tempdir().unwrap();
        let c = config("kind = route\nlambda = 1\npairs = 20\n");
        run(&c, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("routes.csv")).unwrap();
        assert_eq!(text.lines().count(), 41);
        assert!(text.lines().skip(1).all(|l| l.split(',').count() == 6));
    }
}
