use serde::{Deserialize, Serialize};

use super::record::{TrajectoryRecord, TrajectorySample};
use crate::error::{Error, Result};
use crate::feedback_law::FeedbackParams;
use crate::grid_kdv::{StateVector, Stepper};

/// State used by the feedback on each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopMode {
    /// The state one delay window earlier (the initial state on the first window).
    Delayed,
    /// The state at the start of the step.
    PerStep,
}

/// Feedback law driving the loop.
#[derive(Debug, Clone)]
pub enum Feedback {
    Zero,
    Eps(FeedbackParams),
}

impl Feedback {
    /// Value on absolute solver step `step` for modal coefficients `a`.
    pub fn value(&self, step: usize, a: &[f64]) -> f64 {
        match self {
            Feedback::Zero => 0.0,
            Feedback::Eps(p) => {
                let lib = &p.library;
                p.u_eps_modal(step as f64 * lib.dt, a)
            }
        }
    }

    /// Bound `C_B` of `|u|` over all states.
    pub fn bound(&self) -> f64 {
        match self {
            Feedback::Zero => 0.0,
            Feedback::Eps(p) => p.epsilon * p.library.v_sup(),
        }
    }

    /// Bound `C_B(R)` of `|u|` over states of norm at most `r`.
    pub fn bound_within(&self, r: f64) -> f64 {
        self.bound() * r.sqrt().min(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct LoopConfig {
    /// Delay in solver steps for [`LoopMode::Delayed`].
    pub delay_steps: usize,
    pub mode: LoopMode,
    /// Integration length `t_end - s`.
    pub duration: f64,
    pub feedback: Feedback,
    /// Drop the quadratic term (linear closed loop).
    pub linear: bool,
    pub keep_states: bool,
    /// Blow-up when `E(t) > f E(s) + C_B(R)^2 (t - s)` with this factor
    /// `f` and `R = sqrt(f E(s))`.
    pub blowup_factor: f64,
}

impl LoopConfig {
    pub fn new(feedback: Feedback, duration: f64) -> Self {
        Self {
            delay_steps: 1,
            mode: LoopMode::Delayed,
            duration,
            feedback,
            linear: false,
            keep_states: false,
            blowup_factor: 1e6,
        }
    }

    /// Delay `1/n` rounded to whole steps of size `dt` (at least one).
    pub fn with_sampling_n(mut self, n: usize, dt: f64) -> Self {
        self.delay_steps = ((1.0 / (n.max(1) as f64 * dt)).round() as usize).max(1);
        self
    }

    pub fn with_mode(mut self, mode: LoopMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn keeping_states(mut self) -> Self {
        self.keep_states = true;
        self
    }

    pub fn linear(mut self) -> Self {
        self.linear = true;
        self
    }

    pub(crate) fn steps(&self, dt: f64) -> Result<usize> {
        if !(self.duration > 0.0) {
            return Err(Error::Config(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if self.delay_steps == 0 {
            return Err(Error::Config("delay must be at least one step".into()));
        }
        Ok((self.duration / dt).round() as usize)
    }
}

/// Step index of the start time `s` on the solver grid.
pub(crate) fn start_step(s: f64, dt: f64) -> Result<usize> {
    let k = (s / dt).round();
    if s < 0.0 || (k * dt - s).abs() > 1e-9 * dt.max(s.abs()) {
        return Err(Error::Config(format!(
            "start time {s} is not a nonnegative multiple of dt"
        )));
    }
    Ok(k as usize)
}

/// Integrates the closed loop from `y0` at time `s`.
pub fn integrate_closed_loop(
    stepper: &Stepper,
    y0: &StateVector,
    s: f64,
    cfg: &LoopConfig,
) -> Result<TrajectoryRecord> {
    if let Feedback::Eps(p) = &cfg.feedback {
        p.library.check_compatible(stepper)?;
    }
    let dt = stepper.dt();
    let steps = cfg.steps(dt)?;
    let s0 = start_step(s, dt)?;
    let e0 = y0.energy();
    let growth = cfg
        .feedback
        .bound_within((cfg.blowup_factor * e0).sqrt())
        .powi(2);
    let mut history: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    let mut samples = Vec::with_capacity(steps + 1);
    let mut states = Vec::new();
    let mut y = y0.clone();
    let mut max_it = 0;
    let mut excess = f64::NEG_INFINITY;
    let control_at = |m: usize, history: &Vec<Vec<f64>>| -> f64 {
        let a = match cfg.mode {
            LoopMode::PerStep => &history[m],
            LoopMode::Delayed if m >= cfg.delay_steps => &history[m - cfg.delay_steps],
            LoopMode::Delayed => &history[0],
        };
        cfg.feedback.value(s0 + m, a)
    };
    for m in 0..=steps {
        history.push(y.modal().to_vec());
        let u = control_at(m, &history);
        let t = s + m as f64 * dt;
        samples.push(TrajectorySample::of(t, &y, u));
        if cfg.keep_states {
            states.push(y.clone());
        }
        if m == steps {
            break;
        }
        let next = if cfg.linear {
            stepper.step_linear(&y, u, None)?
        } else {
            match stepper.step_nonlinear_stats(&y, u, None) {
                Ok(r) => {
                    max_it = max_it.max(r.iterations);
                    r.state
                }
                Err(e @ (Error::FixedPointDivergence { .. } | Error::Smallness { .. })) => {
                    return Err(Error::BlowUp {
                        t,
                        reason: e.to_string(),
                    })
                }
                Err(e) => return Err(e),
            }
        };
        let e_next = next.energy();
        excess = excess.max(e_next - y.energy() - dt * u * u);
        let limit = cfg.blowup_factor * e0 + growth * (m + 1) as f64 * dt;
        if e0 > 0.0 && e_next > limit || !e_next.is_finite() {
            return Err(Error::BlowUp {
                t: t + dt,
                reason: format!("energy {e_next:.3e} exceeds the envelope limit {limit:.3e}"),
            });
        }
        y = next;
    }
    Ok(TrajectoryRecord {
        dt,
        samples,
        states,
        final_state: y,
        max_picard_iterations: max_it,
        max_energy_excess: excess.max(0.0),
    })
}
