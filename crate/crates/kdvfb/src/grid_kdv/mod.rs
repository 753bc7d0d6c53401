//! Spatial discretization of [0, L] and time steppers for the linear and
//! nonlinear KdV initial-boundary value problems.

mod banded;
mod grid;
mod quadrature;
mod space;
mod state;
mod stepper;

use serde::{Deserialize, Serialize};

pub use banded::{Banded, BandedCholesky, BandedLu};
pub use grid::SpatialGrid;
pub use quadrature::gauss_legendre;
pub use space::{KdvSpace, Plane, BAND, QUAD_POINTS};
pub use state::StateVector;
pub use stepper::{NonlinearStep, Stepper};

use crate::error::{Error, Result};

/// Time-stepping parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    /// Implicit weight on the W block, in [1/2, 1].
    pub theta: f64,
    /// Relative increment at which the Picard loop stops.
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Bound on `|y| + |h| sqrt(dt) + dt |f|` accepted by the nonlinear step.
    pub smallness_eta: f64,
}

impl SolverConfig {
    pub const DEFAULT_THETA: f64 = 0.55;

    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!(
                "theta must lie in [1/2, 1], got {}",
                self.theta
            )));
        }
        if !(self.picard_tol > 0.0) || self.picard_max_iter == 0 {
            return Err(Error::Config(
                "Picard tolerance and iteration cap must be positive".into(),
            ));
        }
        if !(self.smallness_eta > 0.0) {
            return Err(Error::Config("smallness threshold must be positive".into()));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            theta: Self::DEFAULT_THETA,
            picard_tol: 1e-10,
            picard_max_iter: 50,
            smallness_eta: 0.5,
        }
    }
}

/// `int_0^L y^2 dx`.
pub fn energy(state: &StateVector) -> f64 {
    state.energy()
}
