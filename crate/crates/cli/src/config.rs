//! Flat `key = value` experiment configs.
//!
//! Each experiment kind has a fixed key schema with defaults. A config is
//! resolved in layers (defaults, file, `--set` overrides, `--seed`) and
//! every value is parsed before anything runs, so a typo fails fast.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

use hngraph::geometry::RegionKind;
use hngraph::wsn::{AggregationModel, EnergyConfig, Scenario};
use hngraph::Point;

pub const DEFAULT_OUT_DIR: &str = "hnsim-out";
pub const OUT_DIR_ENV: &str = "HNSIM_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Build,
    Dynamics,
    Route,
    Degree,
    Hops,
    Stretch,
    LambdaMin,
    Height,
    Wsn,
}

impl Kind {
    pub const ALL: [Kind; 9] = [
        Kind::Build,
        Kind::Dynamics,
        Kind::Route,
        Kind::Degree,
        Kind::Hops,
        Kind::Stretch,
        Kind::LambdaMin,
        Kind::Height,
        Kind::Wsn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Build => "build",
            Kind::Dynamics => "dynamics",
            Kind::Route => "route",
            Kind::Degree => "degree",
            Kind::Hops => "hops",
            Kind::Stretch => "stretch",
            Kind::LambdaMin => "lambda-min",
            Kind::Height => "height",
            Kind::Wsn => "wsn",
        }
    }

    /// Whether the kind describes a single graph instance via the shared
    /// graph keys.
    pub fn has_graph(self) -> bool {
        matches!(self, Kind::Build | Kind::Dynamics | Kind::Route | Kind::Degree | Kind::Hops | Kind::Stretch)
    }

    fn schema(self) -> Vec<(&'static str, &'static str)> {
        let mut keys = vec![("seed", "1"), ("out", DEFAULT_OUT_DIR)];
        let graph = [
            ("region", "square"),
            ("side", "10"),
            ("points", "poisson"),
            ("lambda", "5"),
            ("n", "100"),
            ("p", "0.5"),
            ("radius", "inf"),
            ("heavy_weight", "1"),
        ];
        if self.has_graph() {
            keys.extend(graph);
        }
        let set = |keys: &mut Vec<(&'static str, &'static str)>, k: &'static str, v: &'static str| match keys
            .iter_mut()
            .find(|e| e.0 == k)
        {
            Some(e) => e.1 = v,
            None => keys.push((k, v)),
        };
        match self {
            Kind::Build => {}
            Kind::Dynamics => {
                set(&mut keys, "trace", "none");
                set(&mut keys, "events", "50");
            }
            Kind::Route => set(&mut keys, "pairs", "100"),
            Kind::Degree => {
                set(&mut keys, "region", "torus");
                set(&mut keys, "lambda", "200");
                set(&mut keys, "trials", "200");
            }
            Kind::Hops => {
                set(&mut keys, "trials", "10");
                set(&mut keys, "pairs", "10000");
                set(&mut keys, "bucket", "1");
            }
            Kind::Stretch => {
                set(&mut keys, "region", "torus");
                set(&mut keys, "side", "1");
                set(&mut keys, "lambda", "500");
                set(&mut keys, "distances", "0.1,0.3");
                set(&mut keys, "tolerance", "0.005");
                set(&mut keys, "bucket", "0.1");
                set(&mut keys, "trials", "20");
            }
            Kind::LambdaMin => {
                keys.extend([
                    ("region", "square"),
                    ("side", "10"),
                    ("p", "0.5"),
                    ("radii", "0.6,1.0,1.6"),
                    ("step", "0.1"),
                    ("trials", "20"),
                    ("confirmations", "10"),
                    ("cap", "auto"),
                ]);
            }
            Kind::Height => keys.extend([("n", "100"), ("p", "0.5"), ("trials", "10000")]),
            Kind::Wsn => {
                keys.extend([
                    ("region", "square"),
                    ("side", "100"),
                    ("n", "100"),
                    ("p", "0.5"),
                    ("k", "5"),
                    ("aggregation", "unlimited,limited:10,limited:20"),
                    ("leach", "true"),
                    ("bs_x", "50"),
                    ("bs_y", "175"),
                    ("max_rounds", "1000000"),
                    ("e_elec", "5e-8"),
                    ("eps_fs", "1e-11"),
                    ("e_da", "5e-9"),
                    ("signal_bytes", "500"),
                    ("header_bytes", "25"),
                    ("bandwidth", "1000000"),
                    ("init_energy", "2"),
                    ("death_threshold", "0.1"),
                    ("round_seconds", "20"),
                ]);
            }
        }
        keys
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = Kind::ALL.iter().map(|k| k.as_str()).collect();
            anyhow!("unknown experiment kind `{s}` (expected one of {})", names.join(", "))
        })
    }
}

/// One `key = value` line with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Splits a config into entries. Blank lines and `#` comments are skipped.
pub fn parse_flat(text: &str) -> Result<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split_once('#').map_or(raw, |(b, _)| b).trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) =
            body.split_once('=').ok_or_else(|| anyhow!("line {line}: expected `key = value`, got `{}`", raw.trim()))?;
        let (key, value) = (k.trim(), v.trim());
        if key.is_empty() || key.contains(char::is_whitespace) {
            bail!("line {line}: malformed key `{key}`");
        }
        if value.is_empty() {
            bail!("line {line}: missing value for `{key}`");
        }
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            bail!("line {line}: duplicate key `{key}` (first set on line {})", prev.line);
        }
        out.push(Entry { key: key.to_string(), value: value.to_string(), line });
    }
    Ok(out)
}

/// Parses a `--set key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| anyhow!("override `{s}` is not of the form key=value"))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || v.is_empty() {
        bail!("override `{s}` is not of the form key=value");
    }
    Ok((k.to_string(), v.to_string()))
}

/// Region shape and side length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionSpec {
    pub kind: RegionKind,
    pub side: f64,
}

impl RegionSpec {
    pub fn region(&self) -> hngraph::Region {
        hngraph::Region::new(self.kind, self.side).expect("validated at resolve time")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointModel {
    Poisson,
    Uniform,
}

/// Shared description of one graph instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphSpec {
    pub region: RegionSpec,
    pub points: PointModel,
    pub lambda: f64,
    pub n: usize,
    pub p: f64,
    /// `None` for the unbounded construction.
    pub radius: Option<f64>,
    /// Weight of node 0; every other node has weight 1.
    pub heavy_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    Build,
    Dynamics { trace: Option<String>, events: usize },
    Route { pairs: usize },
    Degree { trials: usize },
    Hops { trials: usize, pairs: usize, bucket: f64 },
    Stretch { distances: Vec<f64>, tolerance: f64, bucket: f64, trials: usize },
    LambdaMin { region: RegionSpec, p: f64, radii: Vec<f64>, sweep: hngraph::metrics::LambdaSweep },
    Height { n: usize, p: f64, trials: usize },
    Wsn(WsnSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WsnSpec {
    pub region: RegionSpec,
    pub n: usize,
    pub p: f64,
    pub k: usize,
    pub aggregation: Vec<AggregationModel>,
    pub leach: bool,
    pub scenario: Scenario,
}

/// A fully resolved and validated config.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub kind: Kind,
    pub seed: u64,
    pub out: String,
    pub graph: Option<GraphSpec>,
    pub experiment: Experiment,
    /// Every schema key with its resolved textual value.
    values: BTreeMap<String, String>,
}

impl Config {
    /// Resolves file entries and overrides against the kind's schema.
    /// `kind` may come from either layer.
    pub fn resolve(file: &[Entry], overrides: &[(String, String)], seed: Option<u64>) -> Result<Config> {
        let kind_text = overrides
            .iter()
            .rev()
            .find(|o| o.0 == "kind")
            .map(|o| o.1.clone())
            .or_else(|| file.iter().find(|e| e.key == "kind").map(|e| e.value.clone()))
            .ok_or_else(|| anyhow!("config does not set `kind`"))?;
        let kind: Kind = kind_text.parse()?;
        let schema = kind.schema();
        let mut values: BTreeMap<String, String> = schema.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        for e in file.iter().filter(|e| e.key != "kind") {
            if !values.contains_key(&e.key) {
                bail!("line {}: unknown key `{}` for kind {kind}", e.line, e.key);
            }
            values.insert(e.key.clone(), e.value.clone());
        }
        for (k, v) in overrides.iter().filter(|o| o.0 != "kind") {
            if !values.contains_key(k) {
                bail!("--set: unknown key `{k}` for kind {kind}");
            }
            values.insert(k.clone(), v.clone());
        }
        if let Some(s) = seed {
            values.insert("seed".into(), s.to_string());
        }
        Config::validate(kind, values)
    }

    /// Reads and resolves a config file.
    pub fn load(path: &Path, overrides: &[(String, String)], seed: Option<u64>) -> Result<Config> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let entries = parse_flat(&text).with_context(|| format!("in {}", path.display()))?;
        Config::resolve(&entries, overrides, seed).with_context(|| format!("in {}", path.display()))
    }

    fn validate(kind: Kind, values: BTreeMap<String, String>) -> Result<Config> {
        let v = Values(&values);
        let seed = v.get("seed")?;
        let out = values["out"].clone();
        let graph = if kind.has_graph() { Some(v.graph()?) } else { None };
        let experiment = match kind {
            Kind::Build => Experiment::Build,
            Kind::Dynamics => {
                let trace = values["trace"].clone();
                Experiment::Dynamics { trace: (trace != "none").then_some(trace), events: v.get("events")? }
            }
            Kind::Route => Experiment::Route { pairs: v.get("pairs")? },
            Kind::Degree => Experiment::Degree { trials: v.positive("trials")? },
            Kind::Hops => Experiment::Hops {
                trials: v.positive("trials")?,
                pairs: v.positive("pairs")?,
                bucket: v.positive_f64("bucket")?,
            },
            Kind::Stretch => {
                let distances = v.list::<f64>("distances")?;
                if distances.iter().any(|d| !(*d > 0.0)) {
                    bail!("`distances` must be positive");
                }
                Experiment::Stretch {
                    distances,
                    tolerance: v.positive_f64("tolerance")?,
                    bucket: v.positive_f64("bucket")?,
                    trials: v.positive("trials")?,
                }
            }
            Kind::LambdaMin => {
                let radii = v.list::<f64>("radii")?;
                if radii.iter().any(|r| !(*r > 0.0)) {
                    bail!("`radii` must be positive");
                }
                let cap = match values["cap"].as_str() {
                    "auto" => None,
                    _ => Some(v.positive_f64("cap")?),
                };
                let sweep = hngraph::metrics::LambdaSweep {
                    step: v.positive_f64("step")?,
                    trials: v.positive("trials")?,
                    confirmations: v.get("confirmations")?,
                    cap,
                };
                Experiment::LambdaMin { region: v.region()?, p: v.probability("p")?, radii, sweep }
            }
            Kind::Height => {
                Experiment::Height { n: v.positive("n")?, p: v.probability("p")?, trials: v.positive("trials")? }
            }
            Kind::Wsn => {
                let energy = EnergyConfig {
                    e_elec: v.get("e_elec")?,
                    eps_fs: v.get("eps_fs")?,
                    e_da: v.get("e_da")?,
                    signal_bytes: v.get("signal_bytes")?,
                    header_bytes: v.get("header_bytes")?,
                    bandwidth_bps: v.get("bandwidth")?,
                    init_energy: v.get("init_energy")?,
                    death_threshold: v.get("death_threshold")?,
                    round_seconds: v.get("round_seconds")?,
                };
                energy.validate()?;
                let aggregation = v.list::<AggregationModel>("aggregation")?;
                let leach = v.get::<bool>("leach")?;
                if aggregation.is_empty() && !leach {
                    bail!("nothing to simulate: `aggregation` is empty and `leach` is false");
                }
                let scenario = Scenario {
                    energy,
                    base_station: Point::new(v.get("bs_x")?, v.get("bs_y")?),
                    max_rounds: v.positive("max_rounds")? as u64,
                };
                Experiment::Wsn(WsnSpec {
                    region: v.region()?,
                    n: v.positive("n")?,
                    p: v.probability("p")?,
                    k: v.positive("k")?,
                    aggregation,
                    leach,
                    scenario,
                })
            }
        };
        Ok(Config { kind, seed, out, graph, experiment, values })
    }

    pub fn value(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// The resolved config as a file that reproduces this run.
    pub fn manifest(&self) -> String {
        let mut s = format!("# hnsim {} resolved config\nkind = {}\n", env!("CARGO_PKG_VERSION"), self.kind);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

struct Values<'a>(&'a BTreeMap<String, String>);

impl Values<'_> {
    fn raw(&self, key: &str) -> &str {
        self.0.get(key).map(String::as_str).unwrap_or("")
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse().map_err(|e| anyhow!("invalid value `{raw}` for `{key}`: {e}"))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key);
        if raw == "none" {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| s.trim().parse().map_err(|e| anyhow!("invalid item `{}` in `{key}`: {e}", s.trim())))
            .collect()
    }

    fn positive(&self, key: &str) -> Result<usize> {
        let n: usize = self.get(key)?;
        if n == 0 {
            bail!("`{key}` must be at least 1");
        }
        Ok(n)
    }

    fn positive_f64(&self, key: &str) -> Result<f64> {
        let x: f64 = self.get(key)?;
        if !(x > 0.0 && x.is_finite()) {
            bail!("`{key}` must be positive and finite, got {x}");
        }
        Ok(x)
    }

    fn probability(&self, key: &str) -> Result<f64> {
        let x: f64 = self.get(key)?;
        if !(x > 0.0 && x < 1.0) {
            bail!("`{key}` must lie in (0, 1), got {x}");
        }
        Ok(x)
    }

    fn region(&self) -> Result<RegionSpec> {
        let kind: RegionKind = self.get("region")?;
        let side = self.positive_f64("side")?;
        Ok(RegionSpec { kind, side })
    }

    fn graph(&self) -> Result<GraphSpec> {
        let points = match self.raw("points") {
            "poisson" => PointModel::Poisson,
            "uniform" => PointModel::Uniform,
            other => bail!("invalid value `{other}` for `points`: expected poisson or uniform"),
        };
        let lambda: f64 = self.get("lambda")?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            bail!("`lambda` must be positive and finite, got {lambda}");
        }
        let radius = match self.raw("radius") {
            "inf" => None,
            _ => Some(self.positive_f64("radius")?),
        };
        let heavy_weight: f64 = self.get("heavy_weight")?;
        if !(heavy_weight >= 1.0 && heavy_weight.is_finite()) {
            bail!("`heavy_weight` must be at least 1, got {heavy_weight}");
        }
        Ok(GraphSpec {
            region: self.region()?,
            points,
            lambda,
            n: self.get("n")?,
            p: self.probability("p")?,
            radius,
            heavy_weight,
        })
    }
}

/// `--out`, then the environment, then the config's `out` key.
pub fn output_dir(flag: Option<&Path>, config: &Config) -> std::path::PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => v.into(),
        _ => config.out.clone().into(),
    }
}
