use serde::Serialize;

use super::config::ExperimentConfig;
use super::problem::{measure_rho1, mixed_state, Problem};
use crate::closed_loop::integrate_closed_loop;
use crate::error::Result;
use crate::feedback_law::{default_trust_radius, estimate_delta};
use crate::grid_kdv::StateVector;

/// Relative slack of the one-period inequality.
pub const CONTRACTION_TOLERANCE: f64 = 0.05;

/// Fraction of the trust radius used for the initial data.
const RADIUS_FRACTION: f64 = 0.9;

/// Initial-data regime of the one-period estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `|P_H y0| >= eps^{2/3} |P_M y0|^{1/2}`.
    HDominated,
    MDominated,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::HDominated => "h_dominated",
            Regime::MDominated => "m_dominated",
        })
    }
}

pub fn regime_of(y0: &StateVector, eps: f64) -> Regime {
    if y0.norm_h() >= eps.powf(2.0 / 3.0) * y0.norm_m().sqrt() {
        Regime::HDominated
    } else {
        Regime::MDominated
    }
}

/// `rho_hat_1` of the free evolution on H and `delta_hat` of the library.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasuredConstants {
    pub rho1_hat: f64,
    pub delta_hat: f64,
}

impl MeasuredConstants {
    /// `rho_2 = (rho_hat_1 + 1) / 2`.
    pub fn rho2(&self) -> f64 {
        0.5 * (self.rho1_hat + 1.0)
    }
}

pub fn measure_constants(problem: &Problem, cfg: &ExperimentConfig) -> Result<MeasuredConstants> {
    let seed = cfg.seeds.first().copied().unwrap_or(0);
    let rho1_hat = measure_rho1(&problem.stepper, problem.period(), cfg.rho_samples, seed)?;
    let delta_hat =
        estimate_delta(&problem.library, &problem.stepper, cfg.delta_samples, seed)?.delta;
    Ok(MeasuredConstants {
        rho1_hat,
        delta_hat,
    })
}

/// One initial state checked against
/// `|P_H y(T)|^2 + eps |P_M y(T)| <= rho2 |P_H y0|^2 + eps (1 - delta eps^2) |P_M y0|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionCase {
    pub regime: Regime,
    pub seed: u64,
    pub norm_h0: f64,
    pub norm_m0: f64,
    pub norm_h1: f64,
    pub norm_m1: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    /// `|P_M y(T)| / |P_M y0|`.
    pub m_ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub epsilon: f64,
    pub r_eps: f64,
    pub period: f64,
    pub rho1_hat: f64,
    pub rho2: f64,
    pub delta_hat: f64,
    pub cases: Vec<ContractionCase>,
    pub passed: bool,
}

impl ContractionReport {
    /// Regimes with at least one violated case.
    pub fn failing_regimes(&self) -> Vec<Regime> {
        let mut out: Vec<Regime> = Vec::new();
        for c in self.cases.iter().filter(|c| !c.passed) {
            if !out.contains(&c.regime) {
                out.push(c.regime);
            }
        }
        out
    }
}

/// One period of the closed loop from `y0`, compared with the bound.
pub fn contraction_case(
    problem: &Problem,
    cfg: &ExperimentConfig,
    eps: f64,
    consts: &MeasuredConstants,
    y0: &StateVector,
    seed: u64,
) -> Result<ContractionCase> {
    let lc = problem.loop_config(cfg, eps, problem.period())?;
    let rec = integrate_closed_loop(&problem.stepper, y0, 0.0, &lc)?;
    let y1 = &rec.final_state;
    let (h0, m0, h1, m1) = (y0.norm_h(), y0.norm_m(), y1.norm_h(), y1.norm_m());
    let lhs = h1 * h1 + eps * m1;
    let rhs = consts.rho2() * h0 * h0 + eps * (1.0 - consts.delta_hat * eps * eps) * m0;
    let tolerance = CONTRACTION_TOLERANCE * rhs;
    Ok(ContractionCase {
        regime: regime_of(y0, eps),
        seed,
        norm_h0: h0,
        norm_m0: m0,
        norm_h1: h1,
        norm_m1: m1,
        lhs,
        rhs,
        tolerance,
        m_ratio: if m0 > 0.0 { m1 / m0 } else { f64::NAN },
        passed: lhs <= rhs + tolerance,
    })
}

/// Initial states of size `min(amplitude, 0.9 r_eps)`, one per regime.
pub fn regime_states(
    problem: &Problem,
    eps: f64,
    amplitude: f64,
    seed: u64,
) -> Result<Vec<(Regime, StateVector)>> {
    let r = amplitude.min(RADIUS_FRACTION * default_trust_radius(eps));
    let c = eps.powf(2.0 / 3.0);
    let h_dom = {
        let h = r;
        let m = (0.5 * h / c).powi(2).min(0.1 * r);
        mixed_state(problem.space(), seed, (h * h - m * m).max(0.0).sqrt(), m)?
    };
    let m_dom = {
        let m = r;
        let h = (0.1 * r).min(0.5 * c * m.sqrt());
        mixed_state(problem.space(), seed, h, (m * m - h * h).max(0.0).sqrt())?
    };
    Ok(vec![
        (Regime::HDominated, h_dom),
        (Regime::MDominated, m_dom),
    ])
}

/// One-period contraction for every seed and both regimes at trust-radius
/// amplitudes.
pub fn run_contraction_check(
    problem: &Problem,
    cfg: &ExperimentConfig,
    eps: f64,
    consts: &MeasuredConstants,
) -> Result<ContractionReport> {
    let mut cases = Vec::new();
    for &seed in &cfg.seeds {
        for (_, y0) in regime_states(problem, eps, cfg.amplitude, seed)? {
            cases.push(contraction_case(problem, cfg, eps, consts, &y0, seed)?);
        }
    }
    let passed = cases.iter().all(|c| c.passed);
    Ok(ContractionReport {
        epsilon: eps,
        r_eps: default_trust_radius(eps),
        period: problem.period(),
        rho1_hat: consts.rho1_hat,
        rho2: consts.rho2(),
        delta_hat: consts.delta_hat,
        cases,
        passed,
    })
}
