#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use kdvfb::cli_experiments::smooth_h_direction;
use kdvfb::feedback_law::{build_steering_library, LibraryConfig, SteeringLibrary};
use kdvfb::grid_kdv::{KdvSpace, SolverConfig, StateVector, Stepper};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DESK_NODES: usize = 256;

/// `2 pi sqrt(7/3)`, the single-plane critical length.
pub fn n2_length() -> f64 {
    2.0 * std::f64::consts::PI * (7.0f64 / 3.0).sqrt()
}

/// `441 pi / (10 sqrt 21)`.
pub fn n2_period() -> f64 {
    441.0 * std::f64::consts::PI / (10.0 * 21f64.sqrt())
}

pub fn n2_space(nodes: usize) -> Arc<KdvSpace> {
    KdvSpace::new(n2_length(), nodes).unwrap()
}

/// Quarter period over 286 steps.
pub fn desk_dt() -> f64 {
    n2_period() / 4.0 / 286.0
}

pub fn stepper(space: &Arc<KdvSpace>, dt: f64) -> Stepper {
    Stepper::new(space, SolverConfig::with_dt(dt)).unwrap()
}

pub fn desk_stepper() -> &'static Stepper {
    static S: OnceLock<Stepper> = OnceLock::new();
    S.get_or_init(|| stepper(&n2_space(DESK_NODES), desk_dt()))
}

pub fn desk_library() -> Arc<SteeringLibrary> {
    static L: OnceLock<Arc<SteeringLibrary>> = OnceLock::new();
    L.get_or_init(|| {
        Arc::new(build_steering_library(desk_stepper(), &LibraryConfig::default()).unwrap())
    })
    .clone()
}

pub fn smooth_h(space: &Arc<KdvSpace>, seed: u64) -> StateVector {
    smooth_h_direction(space, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

pub fn rel_err(a: &StateVector, b: &StateVector) -> f64 {
    a.sub(b).norm() / b.norm()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
