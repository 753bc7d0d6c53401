use serde::Serialize;

use super::signal::ControlSignal;
use crate::error::{Error, Result};
use crate::grid_kdv::{StateVector, Stepper};

/// Terminal states of the first- and second-order expansion terms.
#[derive(Debug, Clone)]
pub struct SecondOrderResult {
    pub alpha_t: StateVector,
    pub beta_t: StateVector,
    /// Modal coefficients of the M component of `beta_t`.
    pub m_component: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CascadeSummary {
    pub alpha_norm: f64,
    pub beta_norm: f64,
    pub beta_m_norm: f64,
}

impl SecondOrderResult {
    pub fn summary(&self) -> CascadeSummary {
        CascadeSummary {
            alpha_norm: self.alpha_t.norm(),
            beta_norm: self.beta_t.norm(),
            beta_m_norm: self.beta_t.norm_m(),
        }
    }
}

/// Integrates `alpha` (linear, control `u`, zero data) and `beta` (linear,
/// forcing `-alpha alpha_x`, zero control, zero data) over the horizon of `u`.
pub fn second_order_drift(stepper: &Stepper, u: &ControlSignal) -> Result<SecondOrderResult> {
    if (u.dt - stepper.dt()).abs() > 1e-12 * stepper.dt() {
        return Err(Error::Dimension(format!(
            "control step {} differs from solver step {}",
            u.dt,
            stepper.dt()
        )));
    }
    let space = stepper.space();
    let m = space.modal_dim();
    let nh = space.hermite_dim();
    let (mut aa, mut ac) = (vec![0.0; m], vec![0.0; nh]);
    let (mut ba, mut bc) = (vec![0.0; m], vec![0.0; nh]);
    let (mut n0m, mut n0h) = (vec![0.0; m], vec![0.0; nh]);
    for &h in &u.samples {
        let (a1, c1) = stepper.advance(&aa, &ac, h, None);
        let (n1m, n1h) = stepper.nonlinear_load(&a1, &c1);
        let lm: Vec<f64> = n0m.iter().zip(&n1m).map(|(x, y)| -0.5 * (x + y)).collect();
        let lh: Vec<f64> = n0h.iter().zip(&n1h).map(|(x, y)| -0.5 * (x + y)).collect();
        let (b1, d1) = stepper.advance(&ba, &bc, 0.0, Some((&lm, &lh)));
        aa = a1;
        ac = c1;
        ba = b1;
        bc = d1;
        n0m = n1m;
        n0h = n1h;
    }
    let beta_t = StateVector::from_raw(space, ba, bc);
    Ok(SecondOrderResult {
        alpha_t: StateVector::from_raw(space, aa, ac),
        m_component: beta_t.modal().to_vec(),
        beta_t,
    })
}

/// Linear response to `u` from `y0` (no forcing).
pub fn linear_response(
    stepper: &Stepper,
    y0: &StateVector,
    u: &ControlSignal,
) -> Result<StateVector> {
    let mut y = y0.clone();
    for &h in &u.samples {
        y = stepper.step_linear(&y, h, None)?;
    }
    Ok(y)
}

/// Full nonlinear response to `u` from `y0`.
pub fn nonlinear_response(
    stepper: &Stepper,
    y0: &StateVector,
    u: &ControlSignal,
) -> Result<StateVector> {
    let mut y = y0.clone();
    for &h in &u.samples {
        y = stepper.step_nonlinear(&y, h, None)?;
    }
    Ok(y)
}
