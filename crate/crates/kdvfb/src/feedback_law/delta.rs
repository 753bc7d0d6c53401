use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::library::SteeringLibrary;
use crate::control_synthesis::second_order_drift;
use crate::error::{Error, Result};
use crate::grid_kdv::Stepper;

/// Uniform sample of the unit sphere of M in modal coordinates.
pub fn sample_unit_sphere<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Second-order effect `sum (alpha_i^j)^2 psi_i^j` predicted by the construction.
pub fn predicted_effect(lib: &SteeringLibrary, z: &[f64]) -> Vec<f64> {
    let alphas = lib.decompose_raw(z);
    let mut out = vec![0.0; lib.modal_dim];
    for (p, a) in lib.planes.iter().zip(&alphas) {
        for (t, ai) in p.targets.iter().zip(a) {
            for (o, v) in out.iter_mut().zip(t) {
                *o += ai * ai * v;
            }
        }
    }
    out
}

/// Margin from the predicted effects on `samples` random directions.
pub fn predicted_delta(lib: &SteeringLibrary, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let z = sample_unit_sphere(&mut rng, lib.modal_dim);
        let inner = dot(&predicted_effect(lib, &z), &lib.rotate(&z, lib.period()));
        worst = worst.min(-inner);
    }
    if worst <= 0.0 {
        return Err(Error::LibraryInvalid(format!(
            "predicted descent {worst:.3e} is not negative"
        )));
    }
    Ok(0.5 * worst)
}

/// Outcome of [`estimate_delta`].
#[derive(Debug, Clone, Serialize)]
pub struct DeltaReport {
    pub delta: f64,
    pub samples: usize,
    /// Largest `|y_1(T)|`.
    pub max_first_order: f64,
    /// Largest `|P_M y_2(T) - sum alpha^2 psi|`.
    pub max_target_error: f64,
    /// `<y_2(T), S(T) z>` per sample.
    pub inner: Vec<f64>,
}

/// Forward cascade with `v(., z)` for `samples` random unit directions.
pub fn estimate_delta(
    lib: &SteeringLibrary,
    stepper: &Stepper,
    samples: usize,
    seed: u64,
) -> Result<DeltaReport> {
    lib.check_compatible(stepper)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = DeltaReport {
        delta: f64::INFINITY,
        samples,
        max_first_order: 0.0,
        max_target_error: 0.0,
        inner: Vec::with_capacity(samples),
    };
    let dirs: Vec<Vec<f64>> = (0..samples)
        .map(|_| sample_unit_sphere(&mut rng, lib.modal_dim))
        .collect();
    for z in &dirs {
        let v = lib.v_signal(z)?;
        let res = second_order_drift(stepper, &v)?;
        let expected = predicted_effect(lib, z);
        let err = res
            .m_component
            .iter()
            .zip(&expected)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let inner = dot(&res.m_component, &lib.rotate(z, lib.period()));
        report.max_first_order = report.max_first_order.max(res.alpha_t.norm());
        report.max_target_error = report.max_target_error.max(err);
        report.delta = report.delta.min(-0.5 * inner);
        report.inner.push(inner);
    }
    if let Some(bad) = report.inner.iter().find(|v| **v >= 0.0) {
        return Err(Error::LibraryInvalid(format!(
            "sampled direction with non-negative descent product {bad:.3e}"
        )));
    }
    Ok(report)
}

/// Sampled Lipschitz ratio `max_t |v(t,y) - v(t,z)| / |y - z|` over
/// `pairs` random pairs on the unit sphere, at all separations.
pub fn estimate_lipschitz(lib: &SteeringLibrary, pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let y = sample_unit_sphere(&mut rng, lib.modal_dim);
        let g = sample_unit_sphere(&mut rng, lib.modal_dim);
        let s = 10f64.powf(rng.random_range(-3.0..0.3));
        let mut z: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a + s * b).collect();
        let n = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        z.iter_mut().for_each(|x| *x /= n);
        let dist = y
            .iter()
            .zip(&z)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if dist == 0.0 {
            continue;
        }
        let (ay, az) = (lib.decompose_raw(&y), lib.decompose_raw(&z));
        for k in 0..lib.period_steps {
            let diff = (lib.v_step(k, &ay) - lib.v_step(k, &az)).abs();
            worst = worst.max(diff / dist);
        }
    }
    worst
}
