use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::closed_loop::LoopMode;
use crate::error::{Error, Result};
use crate::spectral_m::CriticalPair;

/// Steps per quarter of the slowest plane period when `dt` is not given.
pub const DEFAULT_STEPS_PER_QUARTER: f64 = 286.0;

/// Parameters of an experiment run.
///
/// Configuration files are either JSON objects or UTF-8 key-value files:
///
/// ```text
/// # comment
/// length = pair:2,1        # or a number
/// grid = 256
/// dt = 0.0264              # omitted: shortest quarter period / 286
/// eps = 0.02, 0.05, 0.1
/// seeds = 1, 2
/// amplitude = 1e-6
/// m_fraction = 0.8
/// periods = 12
/// mode = delayed           # or per_step
/// sampling_n = 0           # 0: delay of one solver step
/// out = out
/// threads = 4
/// delta_samples = 64
/// rho_samples = 20
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub length: f64,
    pub grid: usize,
    pub dt: Option<f64>,
    pub epsilons: Vec<f64>,
    pub seeds: Vec<u64>,
    /// `|y0|` for the decay experiment.
    pub amplitude: f64,
    /// `|P_M y0| / |y0|`.
    pub m_fraction: f64,
    pub periods: usize,
    pub mode: LoopMode,
    /// Delay `1/n` of the sampled scheme; 0 means one solver step.
    pub sampling_n: usize,
    pub out: PathBuf,
    pub threads: usize,
    pub delta_samples: usize,
    pub rho_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            length: CriticalPair::new(2, 1).length(),
            grid: 256,
            dt: None,
            epsilons: vec![0.02, 0.05, 0.1],
            seeds: vec![1],
            amplitude: 1e-6,
            m_fraction: 0.8,
            periods: 12,
            mode: LoopMode::Delayed,
            sampling_n: 0,
            out: PathBuf::from("out"),
            threads: 1,
            delta_samples: 64,
            rho_samples: 20,
        }
    }
}

/// Parses `pair:l,k` or a plain number.
pub fn parse_length(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Some(rest) = s.strip_prefix("pair:") {
        let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(Error::Config(format!("expected pair:l,k, got {s:?}")));
        }
        let l = parse_num::<u32>("length", parts[0])?;
        let k = parse_num::<u32>("length", parts[1])?;
        if l == 0 || k == 0 {
            return Err(Error::Config("pair entries must be positive".into()));
        }
        return Ok(CriticalPair::new(l.max(k), l.min(k)).length());
    }
    let v = parse_num::<f64>("length", s)?;
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Config(format!("length must be positive, got {v}")));
    }
    Ok(v)
}

fn parse_num<T: std::str::FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {s:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, s: &str) -> Result<Vec<T>> {
    let out = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| parse_num(key, p))
        .collect::<Result<Vec<T>>>()?;
    if out.is_empty() {
        return Err(Error::Config(format!("{key}: empty list")));
    }
    Ok(out)
}

pub fn parse_mode(s: &str) -> Result<LoopMode> {
    match s.trim() {
        "delayed" => Ok(LoopMode::Delayed),
        "per_step" | "per-step" => Ok(LoopMode::PerStep),
        other => Err(Error::Config(format!("unknown mode {other:?}"))),
    }
}

impl ExperimentConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim() {
            "length" | "L" => self.length = parse_length(value)?,
            "grid" | "nodes" => self.grid = parse_num(key, value)?,
            "dt" => {
                self.dt = match value.trim() {
                    "" | "auto" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "eps" | "epsilon" | "epsilons" => self.epsilons = parse_list(key, value)?,
            "seed" | "seeds" => self.seeds = parse_list(key, value)?,
            "amplitude" => self.amplitude = parse_num(key, value)?,
            "m_fraction" => self.m_fraction = parse_num(key, value)?,
            "periods" => self.periods = parse_num(key, value)?,
            "mode" => self.mode = parse_mode(value)?,
            "sampling_n" | "n" => self.sampling_n = parse_num(key, value)?,
            "out" => self.out = PathBuf::from(value.trim()),
            "threads" => self.threads = parse_num(key, value)?,
            "delta_samples" => self.delta_samples = parse_num(key, value)?,
            "rho_samples" => self.rho_samples = parse_num(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a key-value or JSON document on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        if text.trim_start().starts_with('{') {
            let doc: serde_json::Map<String, serde_json::Value> = serde_json::from_str(text)
                .map_err(|e| Error::Config(format!("JSON config: {e}")))?;
            for (k, v) in &doc {
                let s = match v {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Array(items) => items
                        .iter()
                        .map(|i| match i {
                            serde_json::Value::String(s) => s.clone(),
                            other => other.to_string(),
                        })
                        .collect::<Vec<_>>()
                        .join(","),
                    serde_json::Value::Null => String::new(),
                    other => other.to_string(),
                };
                self.set(k, &s)?;
            }
            return Ok(());
        }
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid < crate::grid_kdv::SpatialGrid::MIN_NODES {
            return Err(Error::Config(format!("grid {} is too coarse", self.grid)));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::Config(format!("dt must be positive, got {dt}")));
            }
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e >= 0.0 && **e < 1.0)) {
            return Err(Error::Config(format!("epsilon {e} outside [0, 1)")));
        }
        if self.seeds.is_empty() || self.epsilons.is_empty() {
            return Err(Error::Config(
                "need at least one epsilon and one seed".into(),
            ));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::Config(format!(
                "amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        if !(0.0..=1.0).contains(&self.m_fraction) {
            return Err(Error::Config(format!(
                "m_fraction {} outside [0, 1]",
                self.m_fraction
            )));
        }
        if self.periods == 0 || self.threads == 0 {
            return Err(Error::Config("periods and threads must be positive".into()));
        }
        Ok(())
    }

    /// Echo of the configuration as pretty JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
