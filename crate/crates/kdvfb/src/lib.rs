//! Time-varying boundary feedback stabilizing the Korteweg-de Vries equation
//! `y_t + y_x + y_xxx + y y_x = 0` on `(0, L)` with `y(t,0) = y(t,L) = 0` and
//! control `y_x(t,L) = u`, for critical lengths `L` where the linearized
//! system has a nontrivial uncontrollable subspace.

pub mod cli_experiments;
pub mod closed_loop;
pub mod control_synthesis;
pub mod error;
pub mod feedback_law;
pub mod grid_kdv;
pub mod spectral_m;

pub use error::{Error, Result};
