//! Scenario configuration, single runs, seed sweeps and CSV output.

mod config;
mod csv;
mod world;

use rayon::prelude::*;

pub use config::{parse_config, ScenarioConfig};
pub use csv::{mean_row, write_csv, CSV_HEADER};
pub use world::run_scenario;

use crate::error::Result;
use crate::metrics::MetricsSnapshot;
use crate::types::Scheme;

/// A grid of runs: every scheme at every node count for `seeds` seeds
/// starting at the base config's seed.
#[derive(Clone, Debug)]
pub struct Sweep {
    pub base: ScenarioConfig,
    pub schemes: Vec<Scheme>,
    pub n_values: Vec<u32>,
    pub seeds: u32,
}

impl Sweep {
    pub fn configs(&self) -> Vec<ScenarioConfig> {
        let mut out = Vec::new();
        for &scheme in &self.schemes {
            for &n in &self.n_values {
                for s in 0..self.seeds as u64 {
                    out.push(ScenarioConfig {
                        scheme,
                        n_nodes: n,
                        seed: self.base.seed + s,
                        ..self.base.clone()
                    });
                }
            }
        }
        out
    }

    /// Runs the grid in parallel. Results come back in grid order.
    pub fn run(&self) -> Result<Vec<MetricsSnapshot>> {
        self.configs().par_iter().map(run_scenario).collect()
    }
}

/// Parses `a:b:step` into the inclusive range of node counts.
pub fn parse_range(s: &str) -> Result<Vec<u32>> {
    let bad = |reason: &str| crate::error::Error::ConfigValue {
        key: "sweep".into(),
        reason: format!("`{s}`: {reason}"),
    };
    let parts: Vec<&str> = s.split(':').collect();
    let nums = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<u32>()
                .map_err(|_| bad("expected integers"))
        })
        .collect::<Result<Vec<_>>>()?;
    let (a, b, step) = match nums[..] {
        [a] => (a, a, 1),
        [a, b] => (a, b, 1),
        [a, b, c] => (a, b, c),
        _ => return Err(bad("expected a:b:step")),
    };
    if a == 0 || step == 0 || b < a {
        return Err(bad("need 0 < a <= b and step > 0"));
    }
    Ok((a..=b).step_by(step as usize).collect())
}
