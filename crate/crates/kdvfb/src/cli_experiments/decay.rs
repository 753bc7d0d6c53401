use serde::Serialize;

use super::config::ExperimentConfig;
use super::problem::{initial_state, Problem};
use crate::closed_loop::{integrate_closed_loop, TrajectoryRecord, TrajectorySample};
use crate::error::{Error, Result};

/// Least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Root-mean-square residual.
    pub rms: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Domain(format!(
            "line fit needs two or more paired points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("line fit with constant abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
        rms: (sse / n).sqrt(),
    })
}

/// Fitted decay `V(t) <= C e^{-lambda (t - s)}` of `V = |P_H y| + |P_M y|^{1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFitReport {
    pub epsilon: f64,
    pub seed: u64,
    pub period: f64,
    /// Periods in the fit window.
    pub periods: usize,
    pub lambda_hat: f64,
    /// Smallest `C` with `V(kT) <= C e^{-lambda_hat kT}` at every sampled period.
    pub c_hat: f64,
    pub r_squared: f64,
    pub residual: f64,
    /// Rate fitted on the window shifted by one period.
    pub lambda_shifted: f64,
    /// `V` at `t = kT`, `k = 0..=periods + 1`.
    pub lyapunov: Vec<f64>,
    /// `|P_H y((k+1)T)|^2 / |P_H y(kT)|^2`.
    pub factors_h: Vec<f64>,
    /// `|P_M y((k+1)T)| / |P_M y(kT)|`.
    pub factors_m: Vec<f64>,
    pub max_picard_iterations: usize,
}

impl DecayFitReport {
    /// Geometric mean of the M factors after the first period.
    pub fn mean_factor_m(&self) -> f64 {
        geometric_mean(self.factors_m.get(1..).unwrap_or(&[]))
    }

    /// Largest M factor after the first period.
    pub fn max_factor_m(&self) -> f64 {
        self.factors_m
            .iter()
            .skip(1)
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest M factor after the first period.
    pub fn min_factor_m(&self) -> f64 {
        self.factors_m
            .iter()
            .skip(1)
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Relative change of the rate under a one-period window shift.
    pub fn shift_sensitivity(&self) -> f64 {
        (self.lambda_shifted - self.lambda_hat).abs() / self.lambda_hat.abs().max(f64::MIN_POSITIVE)
    }
}

fn geometric_mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    (v.iter().map(|x| x.ln()).sum::<f64>() / v.len() as f64).exp()
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        f64::NAN
    }
}

/// Rate `min{-ln rho2, -ln(1 - delta eps^2)} / (2T)` predicted from the
/// one-period contraction constants.
pub fn predicted_rate(rho2: f64, delta: f64, eps: f64, period: f64) -> f64 {
    let a = -rho2.ln();
    let b = -(1.0 - delta * eps * eps).ln();
    a.min(b) / (2.0 * period)
}

/// Fit of the period samples of one trajectory. The first period is a
/// transient and is excluded; the fit uses `k = 1..=periods` and the
/// shifted fit `k = 2..=periods + 1`.
pub fn fit_decay(
    samples: &[TrajectorySample],
    epsilon: f64,
    seed: u64,
    period: f64,
) -> Result<DecayFitReport> {
    if samples.len() < 4 {
        return Err(Error::Domain(format!(
            "decay fit needs at least four period samples, got {}",
            samples.len()
        )));
    }
    let periods = samples.len() - 2;
    let v: Vec<f64> = samples.iter().map(TrajectorySample::lyapunov).collect();
    if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::Domain(
            "Lyapunov samples must be positive and finite".into(),
        ));
    }
    let t: Vec<f64> = samples.iter().map(|s| s.t - samples[0].t).collect();
    let lv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let fit = fit_line(&t[1..=periods], &lv[1..=periods])?;
    let shifted = fit_line(&t[2..], &lv[2..])?;
    let lambda_hat = -fit.slope;
    let c_hat = t
        .iter()
        .zip(&v)
        .map(|(ti, vi)| vi * (lambda_hat * ti).exp())
        .fold(0.0, f64::max);
    let factors_h = samples
        .windows(2)
        .map(|w| ratio(w[1].norm_h.powi(2), w[0].norm_h.powi(2)))
        .collect();
    let factors_m = samples
        .windows(2)
        .map(|w| ratio(w[1].norm_m, w[0].norm_m))
        .collect();
    Ok(DecayFitReport {
        epsilon,
        seed,
        period,
        periods,
        lambda_hat,
        c_hat,
        r_squared: fit.r_squared,
        residual: fit.rms,
        lambda_shifted: -shifted.slope,
        lyapunov: v,
        factors_h,
        factors_m,
        max_picard_iterations: 0,
    })
}

/// Closed loop over `periods + 1` periods from the configured initial data,
/// and the fit of `V` at the period multiples. `eps = 0` runs without feedback.
pub fn run_decay_experiment(
    problem: &Problem,
    cfg: &ExperimentConfig,
    eps: f64,
    seed: u64,
) -> Result<(DecayFitReport, TrajectoryRecord)> {
    let periods = cfg.periods.max(2);
    let period = problem.period();
    let y0 = initial_state(problem.space(), seed, cfg.amplitude, cfg.m_fraction)?;
    let lc = problem.loop_config(cfg, eps, (periods + 1) as f64 * period)?;
    let record = integrate_closed_loop(&problem.stepper, &y0, 0.0, &lc)?;
    let at_periods = record.every(problem.library.period_steps);
    let mut report = fit_decay(&at_periods, eps, seed, period)?;
    report.max_picard_iterations = record.max_picard_iterations;
    Ok((report, record))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 2.0).abs() < 1e-13);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exponential_samples_give_their_rate() {
        let period = 2.0;
        let samples: Vec<TrajectorySample> = (0..12)
            .map(|k| {
                let t = k as f64 * period;
                TrajectorySample {
                    t,
                    energy: 0.0,
                    norm_h: 0.0,
                    norm_m: (0.3 * (-0.1 * t).exp()).powi(2),
                    u: 0.0,
                }
            })
            .collect();
        let r = fit_decay(&samples, 0.1, 0, period).unwrap();
        assert!((r.lambda_hat - 0.1).abs() < 1e-12);
        assert!((r.c_hat - 0.3).abs() < 1e-12);
        assert!(r.shift_sensitivity() < 1e-10);
        assert!((r.mean_factor_m() - (-0.4f64).exp()).abs() < 1e-12);
    }
}
