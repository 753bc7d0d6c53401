use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{ExperimentConfig, DEFAULT_STEPS_PER_QUARTER};
use crate::closed_loop::{Feedback, LoopConfig};
use crate::error::{Error, Result};
use crate::feedback_law::{
    build_steering_library, sample_unit_sphere, FeedbackParams, LibraryConfig, SteeringLibrary,
};
use crate::grid_kdv::{KdvSpace, SolverConfig, StateVector, Stepper};

/// Sine modes in the smooth random data.
const SMOOTH_MODES: usize = 8;

/// Shortest quarter period over the planes of `space` divided by
/// [`DEFAULT_STEPS_PER_QUARTER`].
pub fn default_dt(space: &KdvSpace) -> Result<f64> {
    space
        .planes()
        .iter()
        .filter_map(|p| p.pair.period())
        .map(|p| p / 4.0 / DEFAULT_STEPS_PER_QUARTER)
        .reduce(f64::min)
        .ok_or_else(|| Error::UnsupportedClass("no rotating modes to derive dt from".into()))
}

/// Space and stepper described by `cfg`.
pub fn build_stepper(cfg: &ExperimentConfig) -> Result<Stepper> {
    let space = KdvSpace::new(cfg.length, cfg.grid)?;
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => default_dt(&space)?,
    };
    Stepper::new(&space, SolverConfig::with_dt(dt))
}

/// Stepper plus steering library shared by every run of an experiment.
pub struct Problem {
    pub stepper: Stepper,
    pub library: Arc<SteeringLibrary>,
}

impl Problem {
    pub fn setup(cfg: &ExperimentConfig) -> Result<Self> {
        let stepper = build_stepper(cfg)?;
        let library = build_steering_library(&stepper, &LibraryConfig::default())?;
        Ok(Self {
            stepper,
            library: Arc::new(library),
        })
    }

    pub fn space(&self) -> &Arc<KdvSpace> {
        self.stepper.space()
    }

    pub fn period(&self) -> f64 {
        self.library.period()
    }

    /// Zero feedback for `eps == 0`, `u_eps` otherwise.
    pub fn feedback(&self, eps: f64) -> Result<Feedback> {
        if eps == 0.0 {
            Ok(Feedback::Zero)
        } else {
            Ok(Feedback::Eps(FeedbackParams::new(
                eps,
                self.library.clone(),
            )?))
        }
    }

    pub fn loop_config(
        &self,
        cfg: &ExperimentConfig,
        eps: f64,
        duration: f64,
    ) -> Result<LoopConfig> {
        let mut lc = LoopConfig::new(self.feedback(eps)?, duration).with_mode(cfg.mode);
        if cfg.sampling_n > 0 {
            lc = lc.with_sampling_n(cfg.sampling_n, self.stepper.dt());
        }
        Ok(lc)
    }
}

/// Unit vector of H from a random sine series with decaying coefficients.
pub fn smooth_h_direction<R: Rng>(space: &Arc<KdvSpace>, rng: &mut R) -> Result<StateVector> {
    let len = space.length();
    let coefs: Vec<f64> = (1..=SMOOTH_MODES)
        .map(|k| rng.sample::<f64, _>(StandardNormal) / (k * k) as f64)
        .collect();
    let y = StateVector::project(space, |x| {
        coefs
            .iter()
            .enumerate()
            .map(|(i, c)| c * ((i + 1) as f64 * std::f64::consts::PI * x / len).sin())
            .sum()
    })
    .project_h();
    let n = y.norm();
    if n == 0.0 {
        return Err(Error::Domain("random data has no component in H".into()));
    }
    Ok(y.scaled(1.0 / n))
}

/// Random unit vector of M.
pub fn m_direction<R: Rng>(space: &Arc<KdvSpace>, rng: &mut R) -> Result<StateVector> {
    let m = space.modal_dim();
    if m == 0 {
        return Err(Error::EmptySubspace(space.length()));
    }
    StateVector::from_modal(space, &sample_unit_sphere(rng, m))
}

/// `|P_H y0| = h_norm`, `|P_M y0| = m_norm`, random directions from `seed`.
pub fn mixed_state(
    space: &Arc<KdvSpace>,
    seed: u64,
    h_norm: f64,
    m_norm: f64,
) -> Result<StateVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = smooth_h_direction(space, &mut rng)?;
    let m = m_direction(space, &mut rng)?;
    Ok(h.scaled(h_norm).add(&m.scaled(m_norm)))
}

/// Initial state of norm `amplitude` with a fraction `m_fraction` of it in M.
pub fn initial_state(
    space: &Arc<KdvSpace>,
    seed: u64,
    amplitude: f64,
    m_fraction: f64,
) -> Result<StateVector> {
    let f = m_fraction.clamp(0.0, 1.0);
    mixed_state(space, seed, amplitude * (1.0 - f * f).sqrt(), amplitude * f)
}

/// `max |S(T) y0|^2 / |y0|^2` over `samples` smooth unit `y0` in H.
pub fn measure_rho1(stepper: &Stepper, period: f64, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples.max(1) {
        let y0 = smooth_h_direction(stepper.space(), &mut rng)?;
        let y = stepper.semigroup_apply(&y0, period)?;
        worst = worst.max(y.energy() / y0.energy());
    }
    Ok(worst)
}
