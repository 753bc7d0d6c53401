use super::integrate::{start_step, LoopConfig, LoopMode};
use super::record::{TrajectoryRecord, TrajectorySample};
use crate::error::{Error, Result};
use crate::grid_kdv::{StateVector, Stepper};

/// Integrates the pair `(P_H y, P_M y)` as two coupled systems: the H
/// channel carries the control and the H part of the quadratic term, the M
/// channel has zero boundary slope and the M part of the quadratic term.
pub fn coupled_integrate(
    stepper: &Stepper,
    y0: &StateVector,
    s: f64,
    cfg: &LoopConfig,
) -> Result<TrajectoryRecord> {
    let dt = stepper.dt();
    let steps = cfg.steps(dt)?;
    let s0 = start_step(s, dt)?;
    let space = stepper.space();
    let m = space.modal_dim();
    let nh = space.hermite_dim();
    let mut y1 = y0.hermite().to_vec();
    let mut y2 = y0.modal().to_vec();
    let zero_m = vec![0.0; m];
    let zero_h = vec![0.0; nh];
    let picard_tol = stepper.config().picard_tol;
    let max_iter = stepper.config().picard_max_iter;
    let mut history: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    let mut samples = Vec::with_capacity(steps + 1);
    let mut states = Vec::new();
    let mut max_it = 0;
    let mut excess = f64::NEG_INFINITY;
    for k in 0..=steps {
        history.push(y2.clone());
        let a = match cfg.mode {
            LoopMode::PerStep => &history[k],
            LoopMode::Delayed if k >= cfg.delay_steps => &history[k - cfg.delay_steps],
            LoopMode::Delayed => &history[0],
        };
        let u = cfg.feedback.value(s0 + k, a);
        let t = s + k as f64 * dt;
        let y = StateVector::from_raw(space, y2.clone(), y1.clone());
        samples.push(TrajectorySample::of(t, &y, u));
        if cfg.keep_states {
            states.push(y.clone());
        }
        if k == steps {
            break;
        }
        let h_lin = stepper.advance(&zero_m, &y1, u, None).1;
        let m_lin = stepper.advance(&y2, &zero_h, 0.0, None).0;
        let (mut n1, mut n2) = (y1.clone(), y2.clone());
        if !cfg.linear {
            let (q0m, q0h) = stepper.nonlinear_load(&y2, &y1);
            let mut converged = false;
            for it in 1..=max_iter {
                let (q1m, q1h) = stepper.nonlinear_load(&n2, &n1);
                let lh: Vec<f64> = q0h.iter().zip(&q1h).map(|(a, b)| -0.5 * (a + b)).collect();
                let lm: Vec<f64> = q0m.iter().zip(&q1m).map(|(a, b)| -0.5 * (a + b)).collect();
                let f1 = stepper
                    .advance(&zero_m, &zero_h, 0.0, Some((&zero_m, &lh)))
                    .1;
                let f2 = stepper
                    .advance(&zero_m, &zero_h, 0.0, Some((&lm, &zero_h)))
                    .0;
                let c1: Vec<f64> = h_lin.iter().zip(&f1).map(|(a, b)| a + b).collect();
                let c2: Vec<f64> = m_lin.iter().zip(&f2).map(|(a, b)| a + b).collect();
                let trial = StateVector::from_raw(space, c2.clone(), c1.clone());
                let prev = StateVector::from_raw(space, n2.clone(), n1.clone());
                let diff = trial.sub(&prev).norm();
                n1 = c1;
                n2 = c2;
                max_it = max_it.max(it);
                if it > 1 && (diff <= picard_tol * trial.norm() || diff == 0.0) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::BlowUp {
                    t,
                    reason: "fixed-point iteration of the coupled step did not converge".into(),
                });
            }
        } else {
            n1 = h_lin;
            n2 = m_lin;
        }
        let next = StateVector::from_raw(space, n2.clone(), n1.clone());
        excess = excess.max(next.energy() - y.energy() - dt * u * u);
        y1 = n1;
        y2 = n2;
    }
    Ok(TrajectoryRecord {
        dt,
        samples,
        states,
        final_state: StateVector::from_raw(space, y2, y1),
        max_picard_iterations: max_it,
        max_energy_excess: excess.max(0.0),
    })
}
