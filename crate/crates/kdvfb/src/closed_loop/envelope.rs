use serde::Serialize;

use super::record::TrajectoryRecord;

/// A-priori growth bound `E(t) <= H^{-1}(H(E(s)) + t - s)` with
/// `H(a) = int_0^a dE / C_B(sqrt E)^2`.
pub enum EnergyEnvelope {
    /// `C_B = 0`: energy may not grow.
    Dissipative,
    /// `C_B = c`: `E(s) + c^2 (t - s)`.
    Constant(f64),
    /// General bound `R -> C_B(R)`, positive for `R > 0`.
    General(Box<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl EnergyEnvelope {
    /// `H(a)` by composite Simpson quadrature in the variable `sqrt E`.
    pub fn h(&self, a: f64) -> f64 {
        match self {
            EnergyEnvelope::Dissipative => {
                if a > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            EnergyEnvelope::Constant(c) => a / (c * c),
            EnergyEnvelope::General(cb) => {
                // dE = 2 r dr with r = sqrt E, which removes the endpoint
                // singularity of bounds growing like sqrt R near zero.
                let r = a.max(0.0).sqrt();
                let n = 2000;
                let f = |x: f64| {
                    let c = cb(x);
                    if x == 0.0 {
                        0.0
                    } else {
                        2.0 * x / (c * c)
                    }
                };
                let hstep = r / n as f64;
                let mut sum = f(0.0) + f(r);
                for i in 1..n {
                    let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                    sum += w * f(i as f64 * hstep);
                }
                sum * hstep / 3.0
            }
        }
    }

    /// `H^{-1}(H(e_s) + elapsed)`.
    pub fn bound(&self, e_s: f64, elapsed: f64) -> f64 {
        match self {
            EnergyEnvelope::Dissipative => e_s,
            EnergyEnvelope::Constant(c) => e_s + c * c * elapsed,
            EnergyEnvelope::General(_) => {
                let target = self.h(e_s) + elapsed;
                let mut lo = e_s;
                let mut hi = e_s.max(1e-300) * 2.0 + 1.0;
                while self.h(hi) < target {
                    hi *= 2.0;
                    if !hi.is_finite() {
                        return f64::INFINITY;
                    }
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.h(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-15 * hi {
                        break;
                    }
                }
                hi
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    /// Per sample: `E(t) <= bound + tolerance`.
    pub ok: Vec<bool>,
    pub max_violation: f64,
    pub tolerance: f64,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.ok.iter().all(|b| *b)
    }
}

/// Compares every sample of `record` against the envelope from its start.
pub fn energy_envelope_check(
    record: &TrajectoryRecord,
    envelope: &EnergyEnvelope,
    tolerance: f64,
) -> EnvelopeReport {
    let Some(first) = record.samples.first() else {
        return EnvelopeReport {
            ok: Vec::new(),
            max_violation: 0.0,
            tolerance,
        };
    };
    let mut ok = Vec::with_capacity(record.samples.len());
    let mut worst = f64::NEG_INFINITY;
    for s in &record.samples {
        let excess = s.energy - envelope.bound(first.energy, s.t - first.t);
        worst = worst.max(excess);
        ok.push(excess <= tolerance);
    }
    EnvelopeReport {
        ok,
        max_violation: worst.max(0.0),
        tolerance,
    }
}
