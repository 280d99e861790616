//! Round-based data collation over residual-energy-weighted hierarchical
//! neighbor graphs, with a LEACH-style clustering baseline.
//!
//! Radio model: sending `l` bits over distance `d` costs
//! `l·e_elec + l·eps_fs·d²`, receiving costs `l·e_elec`, fusing costs
//! `e_da` per bit per fused signal. Every hop carries one fixed-size packet
//! (signal plus header). The base station has unlimited energy.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{invalid, Error, Result};
use crate::geometry::{Point, PointSet};
use crate::hn::{build_graph, Params, WeightAssignment};
use crate::rng::{derive_indexed, indexed_stream};
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyConfig {
    /// J/bit spent by transmitter or receiver electronics.
    pub e_elec: f64,
    /// J/bit/m² spent by the free-space amplifier.
    pub eps_fs: f64,
    /// J/bit/signal spent on data fusion.
    pub e_da: f64,
    pub signal_bytes: u32,
    pub header_bytes: u32,
    /// Bits per second; informational, rounds are fixed-length.
    pub bandwidth_bps: f64,
    pub init_energy: f64,
    pub death_threshold: f64,
    pub round_seconds: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            e_elec: 50e-9,
            eps_fs: 10e-12,
            e_da: 5e-9,
            signal_bytes: 500,
            header_bytes: 25,
            bandwidth_bps: 1e6,
            init_energy: 2.0,
            death_threshold: 0.1,
            round_seconds: 20.0,
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("e_elec", self.e_elec),
            ("eps_fs", self.eps_fs),
            ("e_da", self.e_da),
            ("signal_bytes", f64::from(self.signal_bytes)),
            ("header_bytes", f64::from(self.header_bytes)),
            ("bandwidth_bps", self.bandwidth_bps),
            ("init_energy", self.init_energy),
            ("death_threshold", self.death_threshold),
            ("round_seconds", self.round_seconds),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if self.death_threshold >= self.init_energy {
            return Err(invalid("death_threshold", "must be below init_energy"));
        }
        Ok(())
    }

    pub fn signal_bits(&self) -> u64 {
        u64::from(self.signal_bytes) * 8
    }

    pub fn packet_bits(&self) -> u64 {
        u64::from(self.signal_bytes + self.header_bytes) * 8
    }
}

pub fn energy_tx(bits: u64, d: f64, cfg: &EnergyConfig) -> f64 {
    let l = bits as f64;
    l * cfg.e_elec + l * cfg.eps_fs * d * d
}

pub fn energy_rx(bits: u64, cfg: &EnergyConfig) -> f64 {
    bits as f64 * cfg.e_elec
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationModel {
    /// Everything a node holds leaves as one packet.
    Unlimited,
    /// At most `ratio` signals per outgoing packet.
    Limited(u32),
}

impl AggregationModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            AggregationModel::Limited(0) => Err(invalid("aggregation", "limited ratio must be at least 1")),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for AggregationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AggregationModel::Unlimited => f.write_str("unlimited"),
            AggregationModel::Limited(r) => write!(f, "limited:{r}"),
        }
    }
}

impl FromStr for AggregationModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let model = match s.split_once(':') {
            None if s == "unlimited" => AggregationModel::Unlimited,
            Some(("limited", r)) => {
                AggregationModel::Limited(r.parse().map_err(|_| invalid("aggregation", format!("bad ratio `{r}`")))?)
            }
            _ => return Err(invalid("aggregation", format!("expected `unlimited` or `limited:<ratio>`, got `{s}`"))),
        };
        model.validate()?;
        Ok(model)
    }
}

/// Result of fusing a node's incoming packets with its own signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    /// Effective signal count of each outgoing packet.
    pub packets: Vec<u64>,
    /// Number of signals fused: incoming packets plus own.
    pub fused: u64,
    pub cost: f64,
}

pub fn aggregate(incoming: &[u64], own: u64, model: AggregationModel, cfg: &EnergyConfig) -> Aggregate {
    let total: u64 = incoming.iter().sum::<u64>() + own;
    let packets = match model {
        AggregationModel::Unlimited => vec![total],
        AggregationModel::Limited(ratio) => {
            let r = u64::from(ratio.max(1));
            let full = total / r;
            let mut v = vec![r; full as usize];
            if !total.is_multiple_of(r) {
                v.push(total % r);
            }
            v
        }
    };
    let fused = incoming.len() as u64 + own;
    Aggregate { packets, fused, cost: cfg.e_da * cfg.signal_bits() as f64 * fused as f64 }
}

/// Residual energy per node. A node is alive while its residual is at
/// least the death threshold; deaths are settled at round end.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeBattery {
    pub residual: Vec<f64>,
    pub alive: Vec<bool>,
}

impl NodeBattery {
    pub fn full(n: usize, cfg: &EnergyConfig) -> Self {
        Self { residual: vec![cfg.init_energy; n], alive: vec![true; n] }
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    fn alive_ids(&self) -> Vec<usize> {
        (0..self.alive.len()).filter(|&i| self.alive[i]).collect()
    }

    /// Marks nodes below the threshold dead; returns how many died.
    fn settle(&mut self, cfg: &EnergyConfig) -> usize {
        let mut died = 0;
        for (r, a) in self.residual.iter().zip(self.alive.iter_mut()) {
            if *a && *r < cfg.death_threshold {
                *a = false;
                died += 1;
            }
        }
        died
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RoundStats {
    /// 1-based round index.
    pub round: u64,
    pub t_seconds: f64,
    /// Nodes alive at the end of the round.
    pub nodes_alive: usize,
    pub deaths: usize,
    pub raw_signals: u64,
    pub effective_signals: u64,
    pub energy_consumed: f64,
    pub transmissions: u64,
    pub receptions: u64,
    pub cum_raw: u64,
    pub cum_effective: u64,
    pub cum_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub rounds: Vec<RoundStats>,
    pub battery: NodeBattery,
}

impl SimulationRun {
    /// Last round after which at least one node was alive.
    pub fn lifetime_rounds(&self) -> u64 {
        self.rounds.iter().rev().find(|r| r.nodes_alive > 0).map_or(0, |r| r.round)
    }

    pub fn total_energy(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.cum_energy)
    }

    /// `|Σ consumed − Σ (init − residual)| / Σ (init − residual)`.
    pub fn conservation_error(&self, cfg: &EnergyConfig) -> f64 {
        let drawn: f64 = self.battery.residual.iter().map(|r| cfg.init_energy - r).sum();
        let consumed: f64 = self.rounds.iter().map(|r| r.energy_consumed).sum();
        if drawn == 0.0 {
            consumed.abs()
        } else {
            (consumed - drawn).abs() / drawn.abs()
        }
    }

    pub fn max_round_deaths(&self) -> usize {
        self.rounds.iter().map(|r| r.deaths).max().unwrap_or(0)
    }
}

/// Settings shared by both protocols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub energy: EnergyConfig,
    pub base_station: Point<f64>,
    /// Safety stop; a run normally ends when every node is dead.
    pub max_rounds: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self { energy: EnergyConfig::default(), base_station: Point::new(50.0, 175.0), max_rounds: 1_000_000 }
    }
}

struct Ledger<'a> {
    cfg: &'a EnergyConfig,
    battery: &'a mut NodeBattery,
    spent: f64,
    tx: u64,
    rx: u64,
}

impl Ledger<'_> {
    fn debit(&mut self, node: usize, joules: f64) {
        self.battery.residual[node] -= joules;
        self.spent += joules;
    }

    fn send(&mut self, from: usize, to: Option<usize>, d: f64) {
        let bits = self.cfg.packet_bits();
        self.debit(from, energy_tx(bits, d, self.cfg));
        self.tx += 1;
        if let Some(to) = to {
            self.debit(to, energy_rx(bits, self.cfg));
            self.rx += 1;
        }
    }
}

fn run_rounds(
    points: &PointSet<f64>,
    scenario: &Scenario,
    mut round: impl FnMut(u64, &[usize], &mut Ledger<'_>) -> Result<u64>,
) -> Result<SimulationRun> {
    scenario.energy.validate()?;
    if points.is_empty() {
        return Err(invalid("points", "the simulation needs at least one node"));
    }
    let cfg = &scenario.energy;
    let mut battery = NodeBattery::full(points.len(), cfg);
    let mut rounds: Vec<RoundStats> = Vec::new();
    let mut prev = RoundStats::default();
    let mut r = 0;
    while battery.alive_count() > 0 && r < scenario.max_rounds {
        r += 1;
        let alive = battery.alive_ids();
        let mut ledger = Ledger { cfg, battery: &mut battery, spent: 0.0, tx: 0, rx: 0 };
        let effective = round(r, &alive, &mut ledger)?;
        let (spent, tx, rx) = (ledger.spent, ledger.tx, ledger.rx);
        let deaths = battery.settle(cfg);
        let stats = RoundStats {
            round: r,
            t_seconds: r as f64 * cfg.round_seconds,
            nodes_alive: battery.alive_count(),
            deaths,
            raw_signals: alive.len() as u64,
            effective_signals: effective,
            energy_consumed: spent,
            transmissions: tx,
            receptions: rx,
            cum_raw: prev.cum_raw + alive.len() as u64,
            cum_effective: prev.cum_effective + effective,
            cum_energy: prev.cum_energy + spent,
        };
        rounds.push(stats);
        prev = stats;
    }
    Ok(SimulationRun { rounds, battery })
}

/// Collation over `HN_p^w` rebuilt every round on the surviving nodes with
/// `w(u) = max(1, residual/threshold)`. Nodes report in increasing level
/// order: each fuses its children's packets with its own signal and sends
/// the result to its parent, or to the base station when it has none.
/// Fusion energy is spent only by nodes that received packets.
pub fn run_hn_simulation(
    points: &PointSet<f64>,
    scenario: &Scenario,
    model: AggregationModel,
    p: f64,
    seed: u64,
) -> Result<SimulationRun> {
    model.validate()?;
    let params = Params::new(p)?;
    let cfg = scenario.energy;
    let bs = scenario.base_station;
    let region = *points.region();
    run_rounds(points, scenario, |r, alive, ledger| {
        let pos: Vec<Point<f64>> = alive.iter().map(|&i| points.points()[i]).collect();
        let weights: Vec<f64> =
            alive.iter().map(|&i| (ledger.battery.residual[i] / cfg.death_threshold).max(1.0)).collect();
        let local = PointSet::from_points(region, pos, 0)?;
        let g = build_graph(&local, &WeightAssignment::new(weights)?, params, derive_indexed(seed, "round", r))?;
        let mut order: Vec<NodeId> = g.ids().collect();
        order.sort_by_key(|&u| (g.level(u), u));
        let mut inbox: Vec<Vec<u64>> = vec![Vec::new(); alive.len()];
        let mut delivered = 0;
        for u in order {
            let me = alive[u.index()];
            let incoming = std::mem::take(&mut inbox[u.index()]);
            let agg = aggregate(&incoming, 1, model, &cfg);
            if !incoming.is_empty() {
                ledger.debit(me, agg.cost);
            }
            match g.parent(u) {
                Some(parent) => {
                    let d = g.distance(u, parent);
                    for &eff in &agg.packets {
                        ledger.send(me, Some(alive[parent.index()]), d);
                        inbox[parent.index()].push(eff);
                    }
                }
                None => {
                    let d = euclid(g.position(u), bs);
                    for &eff in &agg.packets {
                        ledger.send(me, None, d);
                        delivered += eff;
                    }
                }
            }
        }
        Ok(delivered)
    })
}

fn euclid(a: Point<f64>, b: Point<f64>) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// LEACH-style clustering. Each round picks `k` heads uniformly among the
/// alive nodes that have not been head in the current epoch of `⌈N/k⌉`
/// rounds (topping up from the other alive nodes if too few remain).
/// Members send one packet to the nearest head; each head fuses its
/// members' signals with its own into one packet for the base station.
pub fn run_leach_baseline(points: &PointSet<f64>, scenario: &Scenario, k: usize, seed: u64) -> Result<SimulationRun> {
    if k == 0 {
        return Err(invalid("k", "need at least one cluster head"));
    }
    let cfg = scenario.energy;
    let bs = scenario.base_station;
    let n = points.len();
    let epoch = n.div_ceil(k) as u64;
    let mut been_head = vec![false; n];
    let pts = points.points();
    run_rounds(points, scenario, |r, alive, ledger| {
        if (r - 1) % epoch == 0 {
            been_head.iter_mut().for_each(|h| *h = false);
        }
        let mut rng = indexed_stream(seed, "leach", r);
        let mut fresh: Vec<usize> = alive.iter().copied().filter(|&i| !been_head[i]).collect();
        let mut used: Vec<usize> = alive.iter().copied().filter(|&i| been_head[i]).collect();
        fresh.shuffle(&mut rng);
        used.shuffle(&mut rng);
        let mut heads: Vec<usize> = fresh.into_iter().chain(used).take(k.min(alive.len())).collect();
        heads.sort_unstable();
        for &h in &heads {
            been_head[h] = true;
        }
        let mut members = vec![0u64; heads.len()];
        for &u in alive {
            if heads.binary_search(&u).is_ok() {
                continue;
            }
            let (slot, d) = heads
                .iter()
                .enumerate()
                .map(|(j, &h)| (j, euclid(pts[u], pts[h])))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .expect("at least one head");
            ledger.send(u, Some(heads[slot]), d);
            members[slot] += 1;
        }
        let mut delivered = 0;
        for (j, &h) in heads.iter().enumerate() {
            let incoming = vec![1; members[j] as usize];
            let agg = aggregate(&incoming, 1, AggregationModel::Unlimited, &cfg);
            if members[j] > 0 {
                ledger.debit(h, agg.cost);
            }
            ledger.send(h, None, euclid(pts[h], bs));
            delivered += agg.packets[0];
        }
        Ok(delivered)
    })
}
