use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mac::CsmaParams;
use crate::node::LeisureDistribution;
use crate::time::SimTime;
use crate::types::{FrameSizes, Scheme};

/// Everything needed to run one scenario. Parsed from flat `key = value`
/// text; every key is optional.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scheme: Scheme,
    pub n_nodes: u32,
    pub seed: u64,
    pub sim_duration_s: f64,
    pub warmup_s: f64,
    pub mean_lifetime_s: f64,
    pub freshness_threshold_s: f64,
    pub t: f64,
    pub k: u32,
    pub check_interval_s: f64,
    pub refresh: bool,
    pub validation_gets: bool,
    pub refresh_timeout_s: f64,
    /// Defaults to the freshness threshold.
    pub mget_min_gap_s: Option<f64>,
    pub epsilon_token: f64,
    pub duty_cycle_coefficient: f64,
    pub leisure_distribution: LeisureDistribution,
    pub node_gate: bool,
    pub proxy_gate: bool,
    pub con_fraction: f64,
    pub frames: FrameSizes,
    pub mac: CsmaParams,
    pub proxy_stages: u8,
    pub stage_service_ms: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scheme: Scheme::PostGet,
            n_nodes: 50,
            seed: 1,
            sim_duration_s: 36_000.0,
            warmup_s: 300.0,
            mean_lifetime_s: 60.0,
            freshness_threshold_s: 60.0,
            t: 0.0,
            k: 1,
            check_interval_s: 1.0,
            refresh: true,
            validation_gets: true,
            refresh_timeout_s: 5.0,
            mget_min_gap_s: None,
            epsilon_token: 1e-3,
            duty_cycle_coefficient: 1e-3,
            leisure_distribution: LeisureDistribution::Uniform,
            node_gate: false,
            proxy_gate: false,
            con_fraction: 0.0,
            frames: FrameSizes::default(),
            mac: CsmaParams::default(),
            proxy_stages: 3,
            stage_service_ms: 5.0,
        }
    }
}

fn err(line: usize, reason: impl Into<String>) -> Error {
    Error::Config {
        line,
        reason: reason.into(),
    }
}

fn value_err(key: &str, reason: String) -> Error {
    Error::ConfigValue {
        key: key.to_string(),
        reason,
    }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| err(line, format!("`{key}`: cannot parse `{v}`")))
}

fn flag(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(err(line, format!("`{key}`: expected on/off, got `{v}`"))),
    }
}

fn range<T: PartialOrd + std::fmt::Display>(key: &str, v: T, lo: T, hi: T) -> Result<()> {
    if v < lo || v > hi {
        return Err(value_err(key, format!("{v} is outside [{lo}, {hi}]")));
    }
    Ok(())
}

fn positive(key: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(value_err(key, format!("{v} must be > 0")));
    }
    Ok(())
}

impl ScenarioConfig {
    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_at(0, key, value)
    }

    fn set_at(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        match key {
            "scheme" => self.scheme = v.parse().map_err(|e: Error| err(line, e.to_string()))?,
            "n_nodes" => self.n_nodes = num(line, key, v)?,
            "seed" => self.seed = num(line, key, v)?,
            "sim_duration_s" => self.sim_duration_s = num(line, key, v)?,
            "warmup_s" => self.warmup_s = num(line, key, v)?,
            "mean_lifetime_s" => self.mean_lifetime_s = num(line, key, v)?,
            "freshness_threshold_s" => self.freshness_threshold_s = num(line, key, v)?,
            "t" => self.t = num(line, key, v)?,
            "k" => self.k = num(line, key, v)?,
            "check_interval_s" => self.check_interval_s = num(line, key, v)?,
            "refresh" => self.refresh = flag(line, key, v)?,
            "validation_gets" => self.validation_gets = flag(line, key, v)?,
            "refresh_timeout_s" => self.refresh_timeout_s = num(line, key, v)?,
            "mget_min_gap_s" => self.mget_min_gap_s = Some(num(line, key, v)?),
            "epsilon_token" => self.epsilon_token = num(line, key, v)?,
            "duty_cycle_coefficient" => self.duty_cycle_coefficient = num(line, key, v)?,
            "leisure_distribution" => {
                let p = match self.leisure_distribution {
                    LeisureDistribution::TruncatedGeometric { p } => Some(p),
                    LeisureDistribution::Uniform => None,
                };
                self.leisure_distribution =
                    match (v.parse().map_err(|e: Error| err(line, e.to_string()))?, p) {
                        (LeisureDistribution::TruncatedGeometric { .. }, Some(p)) => {
                            LeisureDistribution::TruncatedGeometric { p }
                        }
                        (d, _) => d,
                    };
            }
            "leisure_geometric_p" => {
                self.leisure_distribution = LeisureDistribution::TruncatedGeometric {
                    p: num(line, key, v)?,
                }
            }
            "node_gate" => self.node_gate = flag(line, key, v)?,
            "proxy_gate" => self.proxy_gate = flag(line, key, v)?,
            "con_fraction" => self.con_fraction = num(line, key, v)?,
            "data_frame_bytes" => self.frames.data = num(line, key, v)?,
            "request_frame_bytes" => self.frames.request = num(line, key, v)?,
            "backoff_unit_us" => self.mac.backoff_unit = SimTime::from_micros(num(line, key, v)?),
            "min_be" => self.mac.min_be = num(line, key, v)?,
            "max_be" => self.mac.max_be = num(line, key, v)?,
            "max_csma_backoffs" => self.mac.max_csma_backoffs = num(line, key, v)?,
            "max_frame_retries" => self.mac.max_frame_retries = num(line, key, v)?,
            "data_rate_bps" => self.mac.data_rate_bps = num(line, key, v)?,
            "proxy_stages" => self.proxy_stages = num(line, key, v)?,
            "stage_service_ms" => self.stage_service_ms = num(line, key, v)?,
            _ => return Err(err(line, format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        range("n_nodes", self.n_nodes, 1, 1_000_000)?;
        positive("sim_duration_s", self.sim_duration_s)?;
        if !(self.warmup_s >= 0.0 && self.warmup_s < self.sim_duration_s) {
            return Err(value_err(
                "warmup_s",
                format!(
                    "{} is outside [0, sim_duration_s = {})",
                    self.warmup_s, self.sim_duration_s
                ),
            ));
        }
        positive("mean_lifetime_s", self.mean_lifetime_s)?;
        positive("freshness_threshold_s", self.freshness_threshold_s)?;
        range("t", self.t, 0.0, 100.0)?;
        range("k", self.k, 1, self.n_nodes)?;
        positive("check_interval_s", self.check_interval_s)?;
        positive("refresh_timeout_s", self.refresh_timeout_s)?;
        if let Some(g) = self.mget_min_gap_s {
            range("mget_min_gap_s", g, 1.000001, 1e9)?;
        }
        range("epsilon_token", self.epsilon_token, 1e-12, 0.5)?;
        positive("duty_cycle_coefficient", self.duty_cycle_coefficient)?;
        if let LeisureDistribution::TruncatedGeometric { p } = self.leisure_distribution {
            range("leisure_geometric_p", p, 1e-12, 1.0 - 1e-12)?;
        }
        range("con_fraction", self.con_fraction, 0.0, 1.0)?;
        range("data_frame_bytes", self.frames.data, 1, 127)?;
        range("request_frame_bytes", self.frames.request, 1, 127)?;
        range("max_be", self.mac.max_be, self.mac.min_be, 20)?;
        range(
            "backoff_unit_us",
            self.mac.backoff_unit.ticks(),
            1,
            1_000_000,
        )?;
        range("data_rate_bps", self.mac.data_rate_bps, 1, 1_000_000_000)?;
        range("proxy_stages", self.proxy_stages, 0, 16)?;
        positive("stage_service_ms", self.stage_service_ms)?;
        self.mac.validate()
    }

    pub fn duration(&self) -> SimTime {
        SimTime::from_secs_f64(self.sim_duration_s)
    }

    pub fn warmup(&self) -> SimTime {
        SimTime::from_secs_f64(self.warmup_s)
    }

    pub fn mget_min_gap(&self) -> SimTime {
        SimTime::from_secs_f64(self.mget_min_gap_s.unwrap_or(self.freshness_threshold_s))
    }

    /// Canonical `key = value` listing that parses back to `self`.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let onoff = |b: bool| if b { "on" } else { "off" }.to_string();
        kv("scheme", self.scheme.to_string());
        kv("n_nodes", self.n_nodes.to_string());
        kv("seed", self.seed.to_string());
        kv("sim_duration_s", self.sim_duration_s.to_string());
        kv("warmup_s", self.warmup_s.to_string());
        kv("mean_lifetime_s", self.mean_lifetime_s.to_string());
        kv(
            "freshness_threshold_s",
            self.freshness_threshold_s.to_string(),
        );
        kv("t", self.t.to_string());
        kv("k", self.k.to_string());
        kv("check_interval_s", self.check_interval_s.to_string());
        kv("refresh", onoff(self.refresh));
        kv("validation_gets", onoff(self.validation_gets));
        kv("refresh_timeout_s", self.refresh_timeout_s.to_string());
        if let Some(g) = self.mget_min_gap_s {
            kv("mget_min_gap_s", g.to_string());
        }
        kv("epsilon_token", self.epsilon_token.to_string());
        kv(
            "duty_cycle_coefficient",
            self.duty_cycle_coefficient.to_string(),
        );
        kv(
            "leisure_distribution",
            self.leisure_distribution.to_string(),
        );
        if let LeisureDistribution::TruncatedGeometric { p } = self.leisure_distribution {
            kv("leisure_geometric_p", p.to_string());
        }
        kv("node_gate", onoff(self.node_gate));
        kv("proxy_gate", onoff(self.proxy_gate));
        kv("con_fraction", self.con_fraction.to_string());
        kv("data_frame_bytes", self.frames.data.to_string());
        kv("request_frame_bytes", self.frames.request.to_string());
        kv("backoff_unit_us", self.mac.backoff_unit.ticks().to_string());
        kv("min_be", self.mac.min_be.to_string());
        kv("max_be", self.mac.max_be.to_string());
        kv("max_csma_backoffs", self.mac.max_csma_backoffs.to_string());
        kv("max_frame_retries", self.mac.max_frame_retries.to_string());
        kv("data_rate_bps", self.mac.data_rate_bps.to_string());
        kv("proxy_stages", self.proxy_stages.to_string());
        kv("stage_service_ms", self.stage_service_ms.to_string());
        s
    }
}

/// Parses flat `key = value` text with `#` comments and validates the result.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(i + 1, format!("expected `key = value`, got `{line}`")))?;
        cfg.set_at(i + 1, k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}
