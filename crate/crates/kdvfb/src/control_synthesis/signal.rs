use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-constant boundary control: `samples[k]` holds on
/// `[t0 + k dt, t0 + (k+1) dt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
    /// Step range `[start, end)` outside of which the samples vanish.
    pub support: Option<(usize, usize)>,
}

impl ControlSignal {
    pub fn new(dt: f64, samples: Vec<f64>) -> Self {
        let mut s = Self {
            t0: 0.0,
            dt,
            samples,
            support: None,
        };
        s.support = s.detect_support();
        s
    }

    pub fn zeros(dt: f64, steps: usize) -> Self {
        Self::new(dt, vec![0.0; steps])
    }

    fn detect_support(&self) -> Option<(usize, usize)> {
        let first = self.samples.iter().position(|v| *v != 0.0)?;
        let last = self.samples.iter().rposition(|v| *v != 0.0)?;
        Some((first, last + 1))
    }

    pub fn steps(&self) -> usize {
        self.samples.len()
    }

    pub fn horizon(&self) -> (f64, f64) {
        (self.t0, self.t0 + self.dt * self.samples.len() as f64)
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.samples.len() as f64
    }

    /// Value at absolute time `t`; zero outside the horizon.
    pub fn value_at(&self, t: f64) -> f64 {
        let k = ((t - self.t0) / self.dt).floor();
        if k < 0.0 || k as usize >= self.samples.len() {
            0.0
        } else {
            self.samples[k as usize]
        }
    }

    /// Discrete `L^2(t0, t1)` norm.
    pub fn l2_norm(&self) -> f64 {
        (self.dt * self.samples.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            t0: self.t0,
            dt: self.dt,
            samples: self.samples.iter().map(|v| s * v).collect(),
            support: if s == 0.0 { None } else { self.support },
        }
    }

    /// Delay by `steps` steps, keeping the total length at `len` samples.
    pub fn shifted(&self, steps: usize, len: usize) -> Result<Self> {
        if steps + self.samples.len() > len {
            return Err(Error::Domain(format!(
                "shift by {steps} steps does not fit in {len} samples"
            )));
        }
        let mut samples = vec![0.0; len];
        samples[steps..steps + self.samples.len()].copy_from_slice(&self.samples);
        Ok(Self::new(self.dt, samples).with_t0(self.t0))
    }

    /// Append `steps` zero samples.
    pub fn padded(&self, steps: usize) -> Self {
        let mut samples = self.samples.clone();
        samples.extend(std::iter::repeat_n(0.0, steps));
        Self::new(self.dt, samples).with_t0(self.t0)
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }
}
