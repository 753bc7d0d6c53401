use std::sync::Arc;

use serde::Serialize;

use super::library::SteeringLibrary;
use crate::error::{Error, Result};
use crate::grid_kdv::StateVector;

/// Gain, trust radius and library of the time-varying feedback.
#[derive(Debug, Clone, Serialize)]
pub struct FeedbackParams {
    pub epsilon: f64,
    pub r_eps: f64,
    #[serde(skip)]
    pub library: Arc<SteeringLibrary>,
}

impl FeedbackParams {
    /// `r_eps` defaults to half of `epsilon^12`.
    pub fn new(epsilon: f64, library: Arc<SteeringLibrary>) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon {epsilon} outside (0, 1)")));
        }
        Ok(Self {
            epsilon,
            r_eps: default_trust_radius(epsilon),
            library,
        })
    }

    pub fn with_trust_radius(mut self, r: f64) -> Self {
        self.r_eps = r;
        self
    }

    /// Feedback at time `t`.
    pub fn u_eps(&self, t: f64, y: &StateVector) -> f64 {
        self.u_eps_modal(t, y.modal())
    }

    /// Feedback on solver step `step`, so that period wrapping is exact.
    pub fn u_eps_at_step(&self, step: usize, y: &StateVector) -> f64 {
        let lib = &self.library;
        let k = step % lib.period_steps;
        self.eval(k, k as f64 * lib.dt, y.modal())
    }

    pub fn u_eps_modal(&self, t: f64, a: &[f64]) -> f64 {
        let lib = &self.library;
        let period = lib.period();
        let tau = t.rem_euclid(period);
        let mut k = (tau / lib.dt + 1e-7).floor() as usize;
        if k >= lib.period_steps {
            k = 0;
        }
        self.eval(k, tau, a)
    }

    fn eval(&self, step: usize, tau: f64, a: &[f64]) -> f64 {
        let lib = &self.library;
        let n = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            return 0.0;
        }
        let z: Vec<f64> = lib.rotate(a, -tau).into_iter().map(|x| x / n).collect();
        let v = lib.v_step(step, &lib.decompose_raw(&z));
        let scale = if n <= 1.0 { n.sqrt() } else { 1.0 };
        self.epsilon * scale * v
    }

    /// `sup |u_eps(., y)| <= epsilon |v|_inf min(1, sqrt |y^M|)`.
    pub fn bound(&self, y: &StateVector) -> f64 {
        self.epsilon * self.library.v_sup() * y.norm_m().sqrt().min(1.0)
    }
}

/// Trust radius below `epsilon^12`.
pub fn default_trust_radius(epsilon: f64) -> f64 {
    0.5 * epsilon.powi(12)
}
