use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::signal::ControlSignal;
use crate::error::{Error, Result};
use crate::grid_kdv::{StateVector, Stepper};

/// Largest M component of an endpoint, relative to `max(1, |y|)`.
const H_MEMBERSHIP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringOptions {
    /// Tikhonov weight relative to the largest Gramian eigenvalue.
    pub tikhonov: f64,
    /// Number of consecutive time steps sharing one control value.
    pub block: usize,
    /// Largest acceptable relative terminal residual predicted by the solve.
    pub residual_tol: f64,
}

impl Default for SteeringOptions {
    fn default() -> Self {
        Self {
            tikhonov: 1e-10,
            block: 1,
            residual_tol: 1e-6,
        }
    }
}

/// Steering control together with its predicted terminal error.
#[derive(Debug, Clone)]
pub struct SteeringReport {
    pub control: ControlSignal,
    /// `|F u - r| / max(|r|, 1e-300)` in the energy norm.
    pub predicted_residual: f64,
    /// Gramian eigenvalues above the Tikhonov floor.
    pub effective_rank: usize,
}

/// Responses at the final time to a unit control on each step, as columns
/// of the W block, computed with one backward sweep of free steps.
pub(crate) fn step_responses(stepper: &Stepper, steps: usize) -> Vec<Vec<f64>> {
    let space = stepper.space();
    let m = space.modal_dim();
    let zero_m = vec![0.0; m];
    let (_, mut g) = stepper.advance(&zero_m, &vec![0.0; space.hermite_dim()], 1.0, None);
    let mut cols = vec![Vec::new(); steps];
    for k in (0..steps).rev() {
        if k + 1 < steps {
            g = stepper.advance(&zero_m, &g, 0.0, None).1;
        }
        cols[k] = g.clone();
    }
    cols
}

/// Minimum-norm control steering the linear system from `y0` to `y1` in
/// time `t`, where both endpoints lie in the orthogonal complement of M.
pub fn steer_linear(
    stepper: &Stepper,
    y0: &StateVector,
    y1: &StateVector,
    t: f64,
) -> Result<ControlSignal> {
    let opts = SteeringOptions::default();
    let report = steer_linear_report(stepper, y0, y1, t, &opts)?;
    if report.predicted_residual > opts.residual_tol {
        return Err(Error::IllPosedTarget(format!(
            "relative terminal residual {:.3e} exceeds {:.1e}",
            report.predicted_residual, opts.residual_tol
        )));
    }
    Ok(report.control)
}

/// [`steer_linear`] without the residual check, for resolution studies.
pub fn steer_linear_report(
    stepper: &Stepper,
    y0: &StateVector,
    y1: &StateVector,
    t: f64,
    opts: &SteeringOptions,
) -> Result<SteeringReport> {
    y0.check_compatible(y1)?;
    if !std::sync::Arc::ptr_eq(y0.space(), stepper.space()) {
        return Err(Error::Dimension(
            "endpoints live on a different grid".into(),
        ));
    }
    for y in [y0, y1] {
        if y.norm_m() > H_MEMBERSHIP_TOL * y.norm().max(1.0) {
            return Err(Error::Domain(format!(
                "steering endpoints must be orthogonal to M (M component {:.3e})",
                y.norm_m()
            )));
        }
    }
    let dt = stepper.dt();
    let steps = (t / dt).round() as usize;
    if steps == 0 || ((steps as f64) * dt - t).abs() > 1e-9 * t.max(1.0) {
        return Err(Error::Domain(format!(
            "horizon {t} is not a positive multiple of the step {dt}"
        )));
    }
    let block = opts.block.max(1);
    let nblocks = steps.div_ceil(block);
    let space = stepper.space();
    let chol = space.mass_cholesky();
    let nh = space.hermite_dim();

    let free = y0.project_h();
    let mut free_end = free.hermite().to_vec();
    let zero_m = vec![0.0; space.modal_dim()];
    for _ in 0..steps {
        free_end = stepper.advance(&zero_m, &free_end, 0.0, None).1;
    }
    let target: Vec<f64> = y1
        .hermite()
        .iter()
        .zip(&free_end)
        .map(|(a, b)| a - b)
        .collect();
    let rt = DVector::from_vec(chol.apply_lt(&target));

    let cols = step_responses(stepper, steps);
    let mut e = DMatrix::<f64>::zeros(nh, nblocks);
    for (k, col) in cols.iter().enumerate() {
        let w = chol.apply_lt(col);
        let b = k / block;
        for (i, v) in w.iter().enumerate() {
            e[(i, b)] += v;
        }
    }
    // Unknowns v_b = sqrt(dt * len_b) u_b make the cost Euclidean.
    let lens: Vec<f64> = (0..nblocks)
        .map(|b| ((b + 1) * block).min(steps) as f64 - (b * block) as f64)
        .collect();
    for (b, len) in lens.iter().enumerate() {
        let s = 1.0 / (dt * len).sqrt();
        e.column_mut(b).scale_mut(s);
    }
    let gram = &e * e.transpose();
    let eig = SymmetricEigen::new(gram);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if lmax <= 0.0 {
        return Err(Error::IllPosedTarget("vanishing Gramian".into()));
    }
    let lambda = opts.tikhonov * lmax;
    let mut coeffs = eig.eigenvectors.transpose() * &rt;
    for (c, l) in coeffs.iter_mut().zip(eig.eigenvalues.iter()) {
        *c /= l.max(0.0) + lambda;
    }
    let z = &eig.eigenvectors * coeffs;
    let v = e.transpose() * z;
    let reached = &e * &v;
    let rnorm = rt.norm();
    let predicted_residual = if rnorm > 0.0 {
        (reached - &rt).norm() / rnorm
    } else {
        0.0
    };
    let mut samples = vec![0.0; steps];
    for (k, s) in samples.iter_mut().enumerate() {
        let b = k / block;
        *s = v[b] / (dt * lens[b]).sqrt();
    }
    Ok(SteeringReport {
        control: ControlSignal::new(dt, samples),
        predicted_residual,
        effective_rank: eig.eigenvalues.iter().filter(|l| **l > lambda).count(),
    })
}
