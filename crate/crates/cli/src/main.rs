use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use hnsim::config::{output_dir, parse_override, Config};
use hnsim::experiments::{self, build_instance};
use hnsim::verify::{self, Suite};

#[derive(Parser)]
#[command(name = "hnsim", version, about = "Hierarchical neighbor graph experiments")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment a config file describes.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. `--set lambda=20`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; beats HNSIM_OUT_DIR and the config's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a self-check suite and report margins against thresholds.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Build the graph a config describes and print it.
    GraphDump {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply an event trace to a stored graph.
    Replay {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Seeds the promotion draws of added nodes.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "hnsim-replay")]
        out: PathBuf,
    },
}

fn load(config: &Path, overrides: &[String], seed: Option<u64>) -> Result<Config> {
    let overrides = overrides.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
    Config::load(config, &overrides, seed)
}

fn execute(cli: Cli) -> Result<bool> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().context("cannot start thread pool")?;
    }
    match cli.command {
        Command::Run { config, overrides, seed, out } => {
            let cfg = load(&config, &overrides, seed)?;
            let dir = output_dir(out.as_deref(), &cfg);
            for path in experiments::run(&cfg, &dir)? {
                println!("{}", path.display());
            }
        }
        Command::Verify { suite, seed } => {
            let checks = verify::run(suite, seed)?;
            for c in &checks {
                println!("{c}");
            }
            return Ok(checks.iter().all(|c| c.passed()));
        }
        Command::GraphDump { config, overrides, seed, out } => {
            let cfg = load(&config, &overrides, seed)?;
            let Some(spec) = cfg.graph.as_ref() else {
                bail!("kind {} does not describe a single graph", cfg.kind);
            };
            let text = hngraph::hn::write_graph(&build_instance(spec, cfg.seed)?);
            match out {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("cannot write {}", p.display()))?,
                None => print!("{text}"),
            }
        }
        Command::Replay { graph, trace, seed, out } => {
            for path in experiments::replay(&graph, &trace, seed, &out)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
