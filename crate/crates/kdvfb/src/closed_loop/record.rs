use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid_kdv::StateVector;

/// One row of a trajectory; `u` is the control applied on the step that
/// starts at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub energy: f64,
    pub norm_h: f64,
    pub norm_m: f64,
    pub u: f64,
}

impl TrajectorySample {
    pub(crate) fn of(t: f64, y: &StateVector, u: f64) -> Self {
        let (eh, em) = (y.energy_h(), y.energy_m());
        Self {
            t,
            energy: eh + em,
            norm_h: eh.sqrt(),
            norm_m: em.sqrt(),
            u,
        }
    }

    /// `|P_H y| + |P_M y|^{1/2}`.
    pub fn lyapunov(&self) -> f64 {
        self.norm_h + self.norm_m.sqrt()
    }
}

/// Closed-loop trajectory sampled on every solver step.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub dt: f64,
    pub samples: Vec<TrajectorySample>,
    /// Every state when requested by the loop configuration.
    pub states: Vec<StateVector>,
    pub final_state: StateVector,
    pub max_picard_iterations: usize,
    /// Largest `E(t + dt) - E(t) - dt u^2` over the run.
    pub max_energy_excess: f64,
}

impl TrajectoryRecord {
    pub fn start(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.t)
    }

    pub fn end(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// Samples at every `stride`-th step, starting with the first.
    pub fn every(&self, stride: usize) -> Vec<TrajectorySample> {
        self.samples
            .iter()
            .step_by(stride.max(1))
            .copied()
            .collect()
    }

    /// `sup_t |y(t) - other(t)|` over common kept states.
    pub fn sup_distance(&self, other: &TrajectoryRecord) -> Result<f64> {
        if self.states.is_empty() || self.states.len() != other.states.len() {
            return Err(Error::Dimension(
                "both records must keep the same states".into(),
            ));
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.sub(b).norm())
            .fold(0.0, f64::max))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        let to_err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(["t", "energy", "norm_h", "norm_m", "u"])
            .map_err(to_err)?;
        for s in &self.samples {
            w.write_record([s.t, s.energy, s.norm_h, s.norm_m, s.u].map(|v| format!("{v:.17e}")))
                .map_err(to_err)?;
        }
        let mut inner = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        inner.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_ndjson(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for s in &self.samples {
            serde_json::to_writer(&mut w, s).map_err(|e| Error::Format(e.to_string()))?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
