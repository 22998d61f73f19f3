use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use coapsim::scenario::{parse_config, parse_range, write_csv, ScenarioConfig, Sweep};
use coapsim::types::Scheme;

/// Simulates a CoAP sensor domain behind a caching proxy and writes CSV metrics.
#[derive(Parser, Debug)]
#[command(name = "coapsim", version)]
struct Args {
    /// Scenario file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Scheme to run; repeat for several, or `all`.
    #[arg(long, value_name = "SCHEME")]
    scheme: Vec<String>,

    /// Number of sensor nodes.
    #[arg(long, conflicts_with = "sweep")]
    nodes: Option<u32>,

    /// Node counts as `from:to:step`.
    #[arg(long, value_name = "RANGE")]
    sweep: Option<String>,

    /// Seeds per grid point.
    #[arg(long, default_value_t = 3)]
    seeds: u32,

    /// First seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Simulated seconds per run.
    #[arg(long)]
    duration: Option<f64>,

    /// Override any config key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn schemes(args: &[String], base: Scheme) -> Result<Vec<Scheme>, String> {
    if args.is_empty() {
        return Ok(vec![base]);
    }
    let mut out = Vec::new();
    for a in args {
        if a == "all" {
            out.extend(Scheme::ALL);
        } else {
            out.push(a.parse::<Scheme>().map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

fn run(args: Args) -> Result<(), String> {
    let mut base = match &args.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => ScenarioConfig::default(),
    };
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
        base.set(k.trim(), v.trim()).map_err(|e| e.to_string())?;
    }
    if let Some(n) = args.nodes {
        base.n_nodes = n;
    }
    if let Some(s) = args.seed {
        base.seed = s;
    }
    if let Some(d) = args.duration {
        base.sim_duration_s = d;
    }
    let n_values = match &args.sweep {
        Some(r) => parse_range(r).map_err(|e| e.to_string())?,
        None => vec![base.n_nodes],
    };
    if args.seeds == 0 {
        return Err("--seeds must be at least 1".into());
    }
    let schemes = schemes(&args.scheme, base.scheme)?;
    base.scheme = schemes[0];
    let sweep = Sweep {
        schemes,
        n_values,
        seeds: args.seeds,
        base,
    };
    for c in sweep.configs() {
        c.validate().map_err(|e| e.to_string())?;
    }
    let rows = sweep.run().map_err(|e| e.to_string())?;
    let mut manifest = vec![format!("coapsim {}", env!("CARGO_PKG_VERSION"))];
    manifest.extend(sweep.base.to_kv().lines().map(str::to_string));
    let list = |v: Vec<String>| v.join(",");
    manifest.push(format!(
        "grid schemes = {}",
        list(sweep.schemes.iter().map(Scheme::to_string).collect())
    ));
    manifest.push(format!(
        "grid n_nodes = {}",
        list(sweep.n_values.iter().map(u32::to_string).collect())
    ));
    manifest.push(format!("grid seeds = {}", sweep.seeds));
    let csv = write_csv(&rows, &manifest);
    match &args.out {
        Some(path) => std::fs::write(path, csv).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("coapsim: {e}");
            ExitCode::FAILURE
        }
    }
}
