//! Degree, edge length, height, hop and stretch statistics, connectivity,
//! the direct-edge probability bound and the connectivity threshold sweep.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{poisson_points, Region};
use crate::hn::{build_radius_bounded, HnGraph, LevelAssignment, Params, WeightAssignment};
use crate::rng::{derive_indexed, indexed_stream};
use crate::{NodeId, Scalar};

/// Pair counts up to this node count use every pair; beyond it, pairs are
/// sampled.
pub const ALL_PAIRS_LIMIT: usize = 2000;
pub const DEFAULT_PAIR_SAMPLE: usize = 10_000;

/// Bucketed counts with running moments.
///
/// Bucket `i` covers `[edges[i], edges[i + 1])`; the last bucket is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n: u64,
    pub mean: f64,
    /// Unbiased sample variance; 0 for fewer than two samples.
    pub variance: f64,
}

impl Histogram {
    pub fn with_edges(samples: &[f64], edges: Vec<f64>) -> Self {
        assert!(edges.len() >= 2, "a histogram needs at least one bucket");
        let mut counts = vec![0u64; edges.len() - 1];
        let last = counts.len() - 1;
        for &x in samples {
            let i = edges.partition_point(|&e| e <= x).saturating_sub(1).min(last);
            counts[i] += 1;
        }
        let (n, mean, variance) = moments(samples);
        Self { edges, counts, n, mean, variance }
    }

    /// One bucket per integer value `0..=max`.
    pub fn integer(samples: &[usize]) -> Self {
        let max = samples.iter().copied().max().unwrap_or(0);
        let edges = (0..=max + 1).map(|k| k as f64).collect();
        let xs: Vec<f64> = samples.iter().map(|&k| k as f64).collect();
        Self::with_edges(&xs, edges)
    }

    /// `bins` equal buckets spanning the sample range. A degenerate range
    /// yields the single bucket `[x, x]`.
    pub fn spanning(samples: &[f64], bins: usize) -> Self {
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if samples.is_empty() {
            return Self::with_edges(samples, vec![0.0, 0.0]);
        }
        if lo == hi || bins <= 1 {
            return Self::with_edges(samples, vec![lo, hi]);
        }
        let w = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|i| lo + w * i as f64).collect();
        edges.push(hi);
        Self::with_edges(samples, edges)
    }

    /// Buckets of fixed `width` aligned to multiples of `width`.
    pub fn fixed_width(samples: &[f64], width: f64) -> Self {
        assert!(width > 0.0);
        if samples.is_empty() {
            return Self::with_edges(samples, vec![0.0, width]);
        }
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let first = (lo / width).floor() as i64;
        let last = (hi / width).floor() as i64 + 1;
        let edges = (first..=last).map(|k| k as f64 * width).collect();
        Self::with_edges(samples, edges)
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance / self.n as f64).sqrt()
        }
    }

    pub fn buckets(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        self.counts.iter().enumerate().map(|(i, &c)| (self.edges[i], self.edges[i + 1], c))
    }

    /// Fraction of samples in buckets whose lower edge is at least `x`.
    pub fn tail_fraction(&self, x: f64) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let c: u64 = self.buckets().filter(|&(lo, _, _)| lo >= x).map(|(_, _, c)| c).sum();
        c as f64 / self.n as f64
    }
}

fn moments(xs: &[f64]) -> (u64, f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let d = x - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (x - mean);
    }
    let n = xs.len() as u64;
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    (n, if n == 0 { 0.0 } else { mean }, var)
}

pub fn degree_stats<S: Scalar>(g: &HnGraph<S>) -> Histogram {
    let degrees: Vec<usize> = g.ids().map(|u| g.degree(u)).collect();
    Histogram::integer(&degrees)
}

pub fn edge_lengths<S: Scalar>(g: &HnGraph<S>) -> Vec<f64> {
    g.edges().iter().map(|e| g.distance(e.u, e.v).as_f64()).collect()
}

pub fn edge_length_stats<S: Scalar>(g: &HnGraph<S>) -> Histogram {
    Histogram::spanning(&edge_lengths(g), 32)
}

/// Upper bound on the probability that two points at distance `l` share an
/// edge, for Poisson density `lambda` and promotion probability `p`.
pub fn direct_edge_prob_bound(l: f64, lambda: f64, p: f64) -> Result<f64> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(invalid("l", format!("must be positive, got {l}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("must be positive, got {lambda}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("p", format!("must lie strictly between 0 and 1, got {p}")));
    }
    let x = lambda * std::f64::consts::PI * l * l * p;
    let e2 = std::f64::consts::E * std::f64::consts::E;
    Ok(2.0 * (1.0 - p) / (x * x) * ((1.0 - (-x).exp() * (x + 1.0)) / (1.0 / p).ln() + 4.0 / e2))
}

/// Counts node pairs with `|d(u, v) - l| <= tol` and how many of them are
/// joined by an edge.
pub fn direct_edge_counts<S: Scalar>(g: &HnGraph<S>, l: f64, tol: f64) -> (u64, u64) {
    let ids: Vec<NodeId> = g.ids().collect();
    let (mut pairs, mut linked) = (0, 0);
    for (i, &u) in ids.iter().enumerate() {
        for &v in &ids[i + 1..] {
            if (g.distance(u, v).as_f64() - l).abs() <= tol {
                pairs += 1;
                linked += u64::from(g.has_edge(u, v));
            }
        }
    }
    (pairs, linked)
}

/// Connected components in ascending order of their smallest id.
pub fn components<S: Scalar>(g: &HnGraph<S>) -> Vec<Vec<NodeId>> {
    let mut seen = vec![false; g.capacity()];
    let mut out = Vec::new();
    for s in g.ids() {
        if seen[s.index()] {
            continue;
        }
        seen[s.index()] = true;
        let mut comp = vec![s];
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for v in g.neighbors(u) {
                if !seen[v.index()] {
                    seen[v.index()] = true;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        comp.sort();
        out.push(comp);
    }
    out
}

/// Empty graphs count as connected.
pub fn is_connected<S: Scalar>(g: &HnGraph<S>) -> bool {
    let Some(s) = g.ids().next() else {
        return true;
    };
    g.bfs_hops(s).iter().filter(|h| h.is_some()).count() == g.node_count()
}

/// Sweep settings for [`find_lambda_min`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSweep {
    pub step: f64,
    pub trials: usize,
    /// Increments past the candidate that must also connect.
    pub confirmations: usize,
    /// Largest density tried; `None` means `1000 / r²`.
    pub cap: Option<f64>,
}

impl Default for LambdaSweep {
    fn default() -> Self {
        Self { step: 0.1, trials: 20, confirmations: 10, cap: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    pub r: f64,
    pub lambda_min: f64,
    pub increments_checked: usize,
    pub step: f64,
}

impl ThresholdResult {
    pub fn scaled(&self) -> f64 {
        self.lambda_min * self.r * self.r
    }
}

/// Whether every trial at density `lambda` yields a non-empty connected
/// radius-bounded graph. Trial `t` draws its points from
/// `derive_indexed(seed, "trial", t)`.
pub fn all_trials_connect(region: Region<f64>, lambda: f64, r: f64, p: f64, trials: usize, seed: u64) -> Result<bool> {
    let params = Params::new(p)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("must be positive, got {lambda}")));
    }
    if !(r > 0.0) {
        return Err(invalid("r", format!("must be positive, got {r}")));
    }
    Ok((0..trials).into_par_iter().all(|t| {
        let s = derive_indexed(seed, "trial", t as u64);
        let pts = poisson_points(region, lambda, s).expect("validated density");
        let n = pts.len();
        n > 0
            && is_connected(
                &build_radius_bounded(&pts, &WeightAssignment::unit(n), params, &vec![r; n], s)
                    .expect("validated radius"),
            )
    }))
}

/// Smallest density on the grid `step, 2·step, ...` at which all trials
/// connect and keep connecting for the next `confirmations` increments.
pub fn find_lambda_min(r: f64, p: f64, region: Region<f64>, sweep: LambdaSweep, seed: u64) -> Result<ThresholdResult> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("r", format!("must be positive, got {r}")));
    }
    if !(sweep.step > 0.0 && sweep.step.is_finite()) {
        return Err(invalid("step", format!("must be positive, got {}", sweep.step)));
    }
    if sweep.trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    Params::new(p)?;
    let cap = sweep.cap.unwrap_or(1000.0 / (r * r));
    let lambda_at = |k: usize| sweep.step * k as f64;
    let connects = |k: usize| {
        all_trials_connect(region, lambda_at(k), r, p, sweep.trials, derive_indexed(seed, "lambda", k as u64))
    };
    let mut k = 1;
    'search: while lambda_at(k + sweep.confirmations) <= cap {
        if !connects(k)? {
            k += 1;
            continue;
        }
        for j in 1..=sweep.confirmations {
            if !connects(k + j)? {
                k += j + 1;
                continue 'search;
            }
        }
        return Ok(ThresholdResult {
            r,
            lambda_min: lambda_at(k),
            increments_checked: sweep.confirmations,
            step: sweep.step,
        });
    }
    Err(Error::ThresholdNotFound { cap })
}

fn sample_pairs<S: Scalar>(g: &HnGraph<S>, count: usize, seed: u64) -> Vec<(NodeId, NodeId)> {
    let ids: Vec<NodeId> = g.ids().collect();
    if ids.len() < 2 {
        return Vec::new();
    }
    if ids.len() <= ALL_PAIRS_LIMIT {
        let mut out = Vec::new();
        for (i, &u) in ids.iter().enumerate() {
            out.extend(ids[i + 1..].iter().map(|&v| (u, v)));
        }
        return out;
    }
    let mut rng = indexed_stream(seed, "pairs", 0);
    let mut out: Vec<(NodeId, NodeId)> = (0..count)
        .map(|_| {
            let a = rng.random_range(0..ids.len());
            let mut b = rng.random_range(0..ids.len() - 1);
            if b >= a {
                b += 1;
            }
            (ids[a], ids[b])
        })
        .collect();
    out.sort();
    out
}

/// Hop counts for one Euclidean distance bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct HopBucket {
    pub lo: f64,
    pub hi: f64,
    pub hops: Histogram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopStats {
    pub buckets: Vec<HopBucket>,
    pub pairs: u64,
    pub unreachable: u64,
}

/// BFS hop counts over node pairs (all pairs up to [`ALL_PAIRS_LIMIT`]
/// nodes, otherwise `pair_sample` random pairs), grouped into distance
/// buckets of width `bucket_width`. Empty buckets are omitted.
pub fn hop_stats<S: Scalar>(g: &HnGraph<S>, pair_sample: usize, bucket_width: f64, seed: u64) -> Result<HopStats> {
    if !(bucket_width > 0.0) {
        return Err(invalid("bucket_width", format!("must be positive, got {bucket_width}")));
    }
    let pairs = sample_pairs(g, pair_sample, seed);
    let mut grouped: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    let mut unreachable = 0;
    let mut current: Option<(NodeId, Vec<Option<usize>>)> = None;
    for &(u, v) in &pairs {
        if current.as_ref().is_none_or(|(s, _)| *s != u) {
            current = Some((u, g.bfs_hops(u)));
        }
        let hops = &current.as_ref().expect("set").1;
        match hops[v.index()] {
            Some(h) => {
                let k = (g.distance(u, v).as_f64() / bucket_width).floor() as i64;
                grouped.entry(k).or_default().push(h as f64);
            }
            None => unreachable += 1,
        }
    }
    let buckets = grouped
        .into_iter()
        .map(|(k, hs)| HopBucket {
            lo: k as f64 * bucket_width,
            hi: (k + 1) as f64 * bucket_width,
            hops: Histogram::integer(&hs.iter().map(|&h| h as usize).collect::<Vec<_>>()),
        })
        .collect();
    Ok(HopStats { buckets, pairs: pairs.len() as u64, unreachable })
}

#[derive(PartialEq)]
struct Dist(f64, NodeId);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Euclidean-weighted shortest-path lengths from `src`.
pub fn graph_distances<S: Scalar>(g: &HnGraph<S>, src: NodeId) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.capacity()];
    let mut heap = BinaryHeap::from([Dist(0.0, src)]);
    dist[src.index()] = 0.0;
    while let Some(Dist(d, u)) = heap.pop() {
        if d > dist[u.index()] {
            continue;
        }
        for v in g.neighbors(u) {
            let nd = d + g.distance(u, v).as_f64();
            if nd < dist[v.index()] {
                dist[v.index()] = nd;
                heap.push(Dist(nd, v));
            }
        }
    }
    dist
}

/// Distance stretch `d_G(u, v) / d(u, v)` for pairs with
/// `|d(u, v) - distance| <= tolerance`. Beyond [`ALL_PAIRS_LIMIT`] nodes,
/// sources are drawn at random until about [`DEFAULT_PAIR_SAMPLE`] pairs
/// are collected.
pub fn stretch_samples<S: Scalar>(g: &HnGraph<S>, distance: f64, tolerance: f64, seed: u64) -> Result<Vec<f64>> {
    if !(distance > 0.0) || !(tolerance >= 0.0) || tolerance >= distance {
        return Err(invalid("distance", format!("need 0 <= tolerance < distance, got {distance} ± {tolerance}")));
    }
    let ids: Vec<NodeId> = g.ids().collect();
    let in_band = |u: NodeId, v: NodeId| (g.distance(u, v).as_f64() - distance).abs() <= tolerance;
    let sources: Vec<NodeId> = if ids.len() <= ALL_PAIRS_LIMIT {
        ids.clone()
    } else {
        let mut rng = indexed_stream(seed, "stretch", 0);
        let mut picked = Vec::new();
        let mut found = 0;
        while found < DEFAULT_PAIR_SAMPLE && picked.len() < ids.len() {
            let u = ids[rng.random_range(0..ids.len())];
            found += ids.iter().filter(|&&v| v > u && in_band(u, v)).count();
            picked.push(u);
        }
        picked
    };
    let per_source: Vec<Vec<f64>> = sources
        .par_iter()
        .map(|&u| {
            let partners: Vec<NodeId> = ids.iter().copied().filter(|&v| v > u && in_band(u, v)).collect();
            if partners.is_empty() {
                return Vec::new();
            }
            let dg = graph_distances(g, u);
            partners.iter().map(|&v| dg[v.index()] / g.distance(u, v).as_f64()).collect()
        })
        .collect();
    let out: Vec<f64> = per_source.into_iter().flatten().collect();
    if out.is_empty() {
        return Err(Error::EmptyResult(format!("no node pairs at distance {distance} ± {tolerance}")));
    }
    Ok(out)
}

pub fn stretch_distribution<S: Scalar>(
    g: &HnGraph<S>,
    distance: f64,
    tolerance: f64,
    bucket_width: f64,
    seed: u64,
) -> Result<Histogram> {
    Ok(Histogram::fixed_width(&stretch_samples(g, distance, tolerance, seed)?, bucket_width))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope·x + intercept`. `None` with fewer than
/// two distinct x values.
pub fn least_squares(points: &[(f64, f64)]) -> Option<LinearFit> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit { slope, intercept: my - slope * mx, r_squared })
}

/// Fit of `ln(count)` against bucket midpoints over the non-empty buckets.
pub fn fit_log_counts(h: &Histogram) -> Option<LinearFit> {
    let pts: Vec<(f64, f64)> =
        h.buckets().filter(|b| b.2 > 0).map(|(lo, hi, c)| ((lo + hi) / 2.0, (c as f64).ln())).collect();
    least_squares(&pts)
}

/// Empirical `P(ht >= k)` for `k = 0, 1, ...` up to the largest observed
/// height (plus one trailing zero).
#[derive(Debug, Clone, PartialEq)]
pub struct HeightTail {
    pub trials: usize,
    pub tail: Vec<f64>,
}

impl HeightTail {
    fn from_heights(heights: &[Option<u32>]) -> Self {
        let trials = heights.len();
        let top = heights.iter().flatten().copied().max().map_or(0, |h| h as usize + 1);
        let tail = (0..=top)
            .map(|k| {
                heights.iter().filter(|h| h.is_some_and(|h| h as usize >= k)).count() as f64 / trials.max(1) as f64
            })
            .collect();
        Self { trials, tail }
    }

    pub fn at(&self, k: usize) -> f64 {
        self.tail.get(k).copied().unwrap_or(0.0)
    }

    /// Binomial standard error of `P̂(ht >= k)`.
    pub fn std_error(&self, k: usize) -> f64 {
        let q = self.at(k);
        (q * (1.0 - q) / self.trials.max(1) as f64).sqrt()
    }
}

/// Height tail of unit-weight graphs on `n` nodes. Height depends only on
/// the level draws, so each trial draws the levels `build_graph` would
/// draw for its seed without placing points.
pub fn height_tail(trials: usize, n: usize, p: f64, seed: u64) -> Result<HeightTail> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let params = Params::new(p)?;
    let w = WeightAssignment::unit(n);
    let heights = (0..trials)
        .into_par_iter()
        .map(|t| {
            let lv = LevelAssignment::draw(&w, &params, derive_indexed(seed, "trial", t as u64))?;
            Ok(lv.levels().into_iter().max())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HeightTail::from_heights(&heights))
}

/// Height tail when the node count is Poisson with mean `lambda·area`; an
/// empty trial has no height and counts against every `k`.
pub fn height_tail_poisson(trials: usize, region: Region<f64>, lambda: f64, p: f64, seed: u64) -> Result<HeightTail> {
    let params = Params::new(p)?;
    let heights = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = derive_indexed(seed, "trial", t as u64);
            let n = poisson_points(region, lambda, s)?.len();
            let lv = LevelAssignment::draw(&WeightAssignment::unit(n), &params, s)?;
            Ok(lv.levels().into_iter().max())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HeightTail::from_heights(&heights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{uniform_points, Point, PointSet};
    use crate::hn::build_graph;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pair(d: f64) -> HnGraph<f64> {
        let ps = PointSet::from_points(
            Region::square(10.0).unwrap(),
            vec![Point::new(1.0, 1.0), Point::new(1.0 + d, 1.0)],
            0,
        )
        .unwrap();
        build_graph(&ps, &WeightAssignment::unit(2), Params::new(0.5).unwrap(), 0).unwrap()
    }

    fn random(n: usize, seed: u64) -> HnGraph<f64> {
        let ps = uniform_points(Region::square(10.0).unwrap(), n, seed);
        build_graph(&ps, &WeightAssignment::unit(n), Params::new(0.5).unwrap(), seed).unwrap()
    }

    /// Union-find with path halving.
    fn uf_component_count(g: &HnGraph<f64>) -> usize {
        let mut parent: Vec<usize> = (0..g.capacity()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in g.edges() {
            let (a, b) = (find(&mut parent, e.u.0), find(&mut parent, e.v.0));
            parent[a] = b;
        }
        let roots: std::collections::BTreeSet<usize> = g.ids().map(|u| find(&mut parent, u.0)).collect();
        roots.len()
    }

    #[test]
    fn histogram_examples() {
        let h = Histogram::integer(&[0]);
        assert_eq!(h.counts, vec![1]);
        let h = Histogram::integer(&[1, 1]);
        assert_eq!(h.counts, vec![0, 2]);
        assert_eq!(h.mean, 1.0);
        assert_eq!(h.variance, 0.0);
        let h = Histogram::with_edges(&[0.0, 0.5, 1.0, 2.0], vec![0.0, 1.0, 2.0]);
        assert_eq!(h.counts, vec![2, 2]);
        let h = Histogram::spanning(&[5.0], 32);
        assert_eq!((h.edges.clone(), h.counts.clone()), (vec![5.0, 5.0], vec![1]));
        let h = Histogram::fixed_width(&[1.0, 1.04, 1.26], 0.1);
        assert_eq!(h.counts.iter().sum::<u64>(), 3);
        assert_relative_eq!(h.edges[0], 1.0);
    }

    #[test]
    fn degree_examples() {
        let ps = PointSet::from_points(Region::square(1.0).unwrap(), vec![Point::new(0.5, 0.5)], 0).unwrap();
        let one = build_graph(&ps, &WeightAssignment::unit(1), Params::new(0.5).unwrap(), 0).unwrap();
        assert_eq!(degree_stats(&one).counts, vec![1]);
        assert_eq!(degree_stats(&pair(3.0)).counts, vec![0, 2]);
        let h = edge_length_stats(&pair(5.0));
        assert_eq!(h.n, 1);
        assert_eq!(h.edges, vec![5.0, 5.0]);
    }

    #[test]
    fn bound_values() {
        // Hand-evaluated closed form (independent of this implementation).
        let x = std::f64::consts::FRAC_PI_2;
        let want = 1.0 / (x * x) * ((1.0 - (-x).exp() * (x + 1.0)) / 2f64.ln() + 4.0 * (-2f64).exp());
        assert_relative_eq!(direct_edge_prob_bound(1.0, 1.0, 0.5).unwrap(), want, max_relative = 1e-12);
        assert_relative_eq!(want, 0.491_625_292_183_797_86, max_relative = 1e-12);
        assert_relative_eq!(
            direct_edge_prob_bound(2.0, 1.0, 0.5).unwrap(),
            0.049_759_192_405_972_63,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            direct_edge_prob_bound(1.0, 5.0, 0.5).unwrap(),
            0.032_083_594_725_783_22,
            max_relative = 1e-12
        );
        assert!(direct_edge_prob_bound(2.0, 1.0, 0.5).unwrap() < direct_edge_prob_bound(1.0, 1.0, 0.5).unwrap());
        assert!(direct_edge_prob_bound(1e4, 1.0, 0.5).unwrap() < 1e-12);
        assert!(direct_edge_prob_bound(0.0, 1.0, 0.5).is_err());
        assert!(direct_edge_prob_bound(1.0, -1.0, 0.5).is_err());
        assert!(direct_edge_prob_bound(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn connectivity_examples() {
        let empty = build_graph(
            &PointSet::<f64>::empty(Region::square(1.0).unwrap()),
            &WeightAssignment::unit(0),
            Params::new(0.5).unwrap(),
            0,
        )
        .unwrap();
        assert!(is_connected(&empty));
        let ps =
            PointSet::from_points(Region::square(10.0).unwrap(), vec![Point::new(1.0, 1.0), Point::new(4.0, 1.0)], 0)
                .unwrap();
        let cut =
            build_radius_bounded(&ps, &WeightAssignment::unit(2), Params::new(0.5).unwrap(), &[1.0, 1.0], 0).unwrap();
        assert!(!is_connected(&cut));
        assert_eq!(components(&cut).len(), 2);
    }

    #[test]
    fn lambda_min_with_unbinding_radius() {
        // With r beyond the diameter, only emptiness can fail a trial.
        let region = Region::square(1.0).unwrap();
        let sweep = LambdaSweep { step: 0.5, trials: 5, confirmations: 3, cap: Some(200.0) };
        let res = find_lambda_min(10.0, 0.5, region, sweep, 4).unwrap();
        let nonempty = |k: u64| {
            (0..5).all(|t| {
                let s = derive_indexed(derive_indexed(4, "lambda", k), "trial", t);
                !poisson_points::<f64>(region, k as f64 * 0.5, s).unwrap().is_empty()
            })
        };
        let first = (1u64..).find(|&k| (k..=k + 3).all(nonempty)).unwrap();
        assert_eq!(res.lambda_min, first as f64 * 0.5);
        assert_eq!(res.increments_checked, 3);
        assert!(find_lambda_min(0.0, 0.5, region, sweep, 4).is_err());
        let tiny = LambdaSweep { cap: Some(0.4), ..sweep };
        assert!(matches!(find_lambda_min(0.1, 0.5, region, tiny, 4), Err(Error::ThresholdNotFound { .. })));
    }

    #[test]
    fn hop_examples() {
        let g = pair(2.0);
        let st = hop_stats(&g, 10, 1.0, 0).unwrap();
        assert_eq!(st.pairs, 1);
        assert_eq!(st.buckets.len(), 1);
        assert_eq!(st.buckets[0].hops.mean, 1.0);
        assert_eq!(g.bfs_hops(NodeId(0))[0], Some(0));
    }

    #[test]
    fn hops_grow_sublinearly() {
        let region = Region::torus(1.0).unwrap();
        let ps = poisson_points::<f64>(region, 1500.0, 21).unwrap();
        let g = build_graph(&ps, &WeightAssignment::unit(ps.len()), Params::new(0.5).unwrap(), 21).unwrap();
        let st = hop_stats(&g, DEFAULT_PAIR_SAMPLE, 0.1, 21).unwrap();
        let mean = |lo: f64| st.buckets.iter().find(|b| (b.lo - lo).abs() < 1e-9).unwrap().hops.mean;
        assert!(mean(0.4) / mean(0.2) < 2.0);
        assert!(mean(0.2) > mean(0.0));
    }

    #[test]
    fn stretch_is_at_least_one() {
        let region = Region::torus(1.0).unwrap();
        let ps = poisson_points::<f64>(region, 300.0, 3).unwrap();
        let g = build_graph(&ps, &WeightAssignment::unit(ps.len()), Params::new(0.5).unwrap(), 3).unwrap();
        let s = stretch_samples(&g, 0.2, 0.01, 3).unwrap();
        assert!(s.iter().all(|&x| x >= 1.0 - 1e-12));
        assert!(matches!(stretch_samples(&pair(1.0), 5.0, 0.1, 0), Err(Error::EmptyResult(_))));
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn dijkstra_matches_floyd_warshall() {
        let g = random(40, 5);
        let n = g.capacity();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for i in 0..n {
            d[i][i] = 0.0;
        }
        for e in g.edges() {
            let w = g.distance(e.u, e.v);
            d[e.u.0][e.v.0] = w;
            d[e.v.0][e.u.0] = w;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        for s in 0..n {
            let got = graph_distances(&g, NodeId(s));
            for t in 0..n {
                assert_relative_eq!(got[t], d[s][t], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn fit_recovers_a_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        let f = least_squares(&pts).unwrap();
        assert_relative_eq!(f.slope, -0.5, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 3.0, epsilon = 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
        assert!(least_squares(&[(1.0, 1.0), (1.0, 2.0)]).is_none());
    }

    #[test]
    fn height_tail_examples() {
        let t = height_tail(20_000, 1, 0.5, 1).unwrap();
        assert_eq!(t.at(0), 1.0);
        for k in 1..6 {
            let exact = 0.5f64.powi(k as i32);
            assert!((t.at(k) - exact).abs() < 4.0 * (exact * (1.0 - exact) / 20_000.0).sqrt(), "k={k}");
        }
        let t = height_tail(2000, 100, 0.5, 2).unwrap();
        assert_eq!(t.at(0), 1.0);
        for k in 1..t.tail.len() {
            assert!(t.at(k) <= 100.0 * 0.5f64.powi(k as i32) + 3.0 * t.std_error(k));
        }
        assert_eq!(*t.tail.last().unwrap(), 0.0);
        assert!(height_tail(10, 0, 0.5, 0).is_err());
        let tp = height_tail_poisson(500, Region::square(10.0).unwrap(), 1.0, 0.5, 3).unwrap();
        for k in 1..tp.tail.len() {
            assert!(tp.at(k) <= 100.0 * 0.5f64.powi(k as i32) + 3.0 * tp.std_error(k));
        }
    }

    #[test]
    fn heights_match_built_graphs() {
        let params = Params::new(0.5).unwrap();
        let t = height_tail(30, 50, 0.5, 9).unwrap();
        let hist: Vec<u32> = (0..30)
            .map(|i| {
                let s = derive_indexed(9, "trial", i);
                let ps = uniform_points(Region::square(1.0).unwrap(), 50, s);
                build_graph(&ps, &WeightAssignment::unit(50), params, s).unwrap().height().unwrap()
            })
            .collect();
        for k in 0..t.tail.len() {
            let q = hist.iter().filter(|&&h| h as usize >= k).count() as f64 / 30.0;
            assert_eq!(t.at(k), q);
        }
    }

    #[test]
    fn edge_lengths_shrink_with_density() {
        let region = Region::square(1.0).unwrap();
        let median = |lambda: f64| {
            let mut all = Vec::new();
            for s in 0..5 {
                let ps = poisson_points::<f64>(region, lambda, s).unwrap();
                let g = build_graph(&ps, &WeightAssignment::unit(ps.len()), Params::new(0.5).unwrap(), s).unwrap();
                all.extend(edge_lengths(&g));
            }
            all.sort_by(f64::total_cmp);
            all[all.len() / 2]
        };
        assert!(median(500.0) < median(100.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn connectivity_matches_union_find(seed in any::<u64>(), n in 1usize..80, r in 0.3..5.0f64) {
            let ps = uniform_points(Region::square(10.0).unwrap(), n, seed);
            let g = build_radius_bounded(&ps, &WeightAssignment::unit(n), Params::new(0.5).unwrap(), &vec![r; n], seed).unwrap();
            let k = uf_component_count(&g);
            prop_assert_eq!(is_connected(&g), k == 1);
            prop_assert_eq!(components(&g).len(), k);
        }

        #[test]
        fn histogram_moments(xs in proptest::collection::vec(-1e3..1e3f64, 1..200)) {
            let h = Histogram::spanning(&xs, 7);
            prop_assert_eq!(h.counts.iter().sum::<u64>(), xs.len() as u64);
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            prop_assert!((h.mean - mean).abs() <= 1e-9 * (1.0 + mean.abs()));
            if xs.len() > 1 {
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                prop_assert!((h.variance - var).abs() <= 1e-7 * (1.0 + var));
            }
        }

        #[test]
        fn bound_decreases_in_length(l in 0.05..10.0f64, lambda in 0.1..50.0f64, p in 0.05..0.95f64) {
            let a = direct_edge_prob_bound(l, lambda, p).unwrap();
            let b = direct_edge_prob_bound(l * 1.5, lambda, p).unwrap();
            prop_assert!(b < a);
        }
    }
}
