use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use super::cascade::second_order_drift;
use super::signal::ControlSignal;
use super::steer::step_responses;
use crate::error::{Error, Result};
use crate::grid_kdv::{Stepper, QUAD_POINTS};

/// Tuning of the second-order control search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    /// Number of sine modes in the control parametrization (0: half the steps).
    pub basis_size: usize,
    /// Singular values below `null_tol * sigma_max` span the terminal null space.
    pub null_tol: f64,
    /// Smallest accepted `|P_M beta(T0)|` for a unit control.
    pub kappa_min: f64,
    /// Angular samples for the plane-direction sweep.
    pub sweep: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            basis_size: 0,
            null_tol: 1e-10,
            kappa_min: 1e-3,
            sweep: 360,
        }
    }
}

/// Unit-norm control with vanishing first-order terminal state and its
/// second-order effect on M.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecondOrderControl {
    pub control: ControlSignal,
    /// `|P_M beta(T0)|` for the unit-norm control.
    pub gain: f64,
    /// Modal coefficients of `P_M beta(T0)`.
    pub m_component: Vec<f64>,
    /// Predicted `|alpha(T0)|`.
    pub alpha_residual: f64,
}

/// Control realizing a prescribed M-target after a waiting segment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizedControl {
    pub control: ControlSignal,
    /// `|P_M beta(T0)|` of the unit-norm control before rescaling.
    pub gain: f64,
    pub wait_steps: usize,
    /// Total horizon `T_L`.
    pub horizon: f64,
}

/// Quadratic forms `u -> P_M beta(T0)[u]` restricted to controls with
/// `alpha(T0) = 0`.
#[derive(Debug, Clone)]
pub struct SecondOrderSynthesizer<'a> {
    stepper: &'a Stepper,
    opts: SynthesisOptions,
    steps: usize,
    /// Null-space controls, orthonormal in `L^2(0, T0)`; one row per control.
    controls: Vec<Vec<f64>>,
    /// One symmetric form per modal coordinate.
    forms: Vec<DMatrix<f64>>,
    alpha_bound: f64,
}

fn sine_basis(steps: usize, size: usize, dt: f64) -> Vec<Vec<f64>> {
    let scale = (2.0 / (steps as f64 * dt)).sqrt();
    (1..=size)
        .map(|k| {
            (0..steps)
                .map(|s| {
                    scale
                        * (k as f64 * std::f64::consts::PI * (s as f64 + 0.5) / steps as f64).sin()
                })
                .collect()
        })
        .collect()
}

fn mat_rows(a: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), a[0].len(), |i, j| a[i][j])
}

impl<'a> SecondOrderSynthesizer<'a> {
    pub fn new(stepper: &'a Stepper, steps: usize, opts: SynthesisOptions) -> Result<Self> {
        let space = stepper.space();
        let m = space.modal_dim();
        if m == 0 {
            return Err(Error::EmptySubspace(space.length()));
        }
        if steps < 4 {
            return Err(Error::Domain(format!(
                "window of {steps} steps is too short"
            )));
        }
        let dt = stepper.dt();
        let size = if opts.basis_size == 0 {
            steps / 2
        } else {
            opts.basis_size.min(steps - 1)
        };
        let basis = sine_basis(steps, size, dt);

        // Weighted terminal map of the basis controls.
        let chol = space.mass_cholesky();
        let resp: Vec<Vec<f64>> = step_responses(stepper, steps)
            .iter()
            .map(|c| chol.apply_lt(c))
            .collect();
        let nh = space.hermite_dim();
        let r = DMatrix::from_fn(nh, steps, |i, s| resp[s][i]);
        let b = DMatrix::from_fn(steps, size, |s, k| basis[k][s]);
        let f = r * b;
        let svd = SVD::new(f, false, true);
        let vt = svd
            .v_t
            .ok_or_else(|| Error::Synthesis("SVD failed".into()))?;
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let null: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] <= opts.null_tol * smax)
            .collect();
        let alpha_bound = null
            .iter()
            .map(|&i| svd.singular_values[i])
            .fold(0.0, f64::max);
        // Columns of a tall map with more controls than rows also drop out.
        let mut controls: Vec<Vec<f64>> = null
            .iter()
            .map(|&i| {
                (0..steps)
                    .map(|s| (0..size).map(|k| vt[(i, k)] * basis[k][s]).sum())
                    .collect()
            })
            .collect();
        if size > svd.singular_values.len() {
            return Err(Error::Synthesis(
                "control basis larger than the state space".into(),
            ));
        }
        if controls.len() < 2 {
            return Err(Error::Synthesis(format!(
                "terminal null space has dimension {}; lengthen the window or refine the grid",
                controls.len()
            )));
        }
        controls.shrink_to_fit();
        let forms = Self::assemble_forms(stepper, steps, &controls);
        Ok(Self {
            stepper,
            opts,
            steps,
            controls,
            forms,
            alpha_bound,
        })
    }

    /// Accumulates `P_M beta(T0)` as quadratic forms in the null coordinates,
    /// following the discrete cascade step by step.
    fn assemble_forms(stepper: &Stepper, steps: usize, controls: &[Vec<f64>]) -> Vec<DMatrix<f64>> {
        let space = stepper.space();
        let m = space.modal_dim();
        let nh = space.hermite_dim();
        let d = controls.len();
        let nq = space.grid().cells() * QUAD_POINTS;
        let w = space.quad_weights();

        let zero_c = vec![0.0; nh];
        let mut phi_q = vec![vec![0.0; nq]; m];
        let mut scratch = vec![0.0; nq];
        for (r, row) in phi_q.iter_mut().enumerate() {
            let mut e = vec![0.0; m];
            e[r] = 1.0;
            space.eval_quad(&e, &zero_c, row, &mut scratch);
            for (i, v) in row.iter_mut().enumerate() {
                *v *= w[i % QUAD_POINTS];
            }
        }

        // E_s = R^{steps-1-s} P dt, stored as powers applied to the load matrix.
        let rmat = mat_rows(stepper.modal_propagator());
        let pmat = mat_rows(stepper.modal_load());
        let mut e = vec![DMatrix::<f64>::zeros(m, m); steps];
        let mut acc = pmat;
        for s in (0..steps).rev() {
            e[s] = acc.clone();
            acc = &rmat * acc;
        }

        let zero_m = vec![0.0; m];
        let mut states = vec![zero_c.clone(); d];
        let mut forms = vec![DMatrix::<f64>::zeros(d, d); m];
        let mut vals = DMatrix::<f64>::zeros(nq, d);
        let mut ders = DMatrix::<f64>::zeros(nq, d);
        let mut v = vec![0.0; nq];
        let mut dv = vec![0.0; nq];
        for t in 1..=steps {
            for (i, c) in states.iter_mut().enumerate() {
                *c = stepper.advance(&zero_m, c, controls[i][t - 1], None).1;
                space.eval_quad(&zero_m, c, &mut v, &mut dv);
                vals.column_mut(i).copy_from_slice(&v);
                ders.column_mut(i).copy_from_slice(&dv);
            }
            let mut omega = DMatrix::<f64>::zeros(m, m);
            omega -= &e[t - 1] * 0.5;
            if t < steps {
                omega -= &e[t] * 0.5;
            }
            for (r, form) in forms.iter_mut().enumerate() {
                let g: Vec<f64> = (0..nq)
                    .map(|i| (0..m).map(|s| omega[(r, s)] * phi_q[s][i]).sum())
                    .collect();
                let mut scaled = ders.clone();
                for (i, gi) in g.iter().enumerate() {
                    scaled.row_mut(i).scale_mut(*gi);
                }
                *form += vals.tr_mul(&scaled);
            }
        }
        for form in forms.iter_mut() {
            let sym = (&*form + form.transpose()) * 0.5;
            *form = sym;
        }
        forms
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn null_dim(&self) -> usize {
        self.controls.len()
    }

    pub fn forms(&self) -> &[DMatrix<f64>] {
        &self.forms
    }

    /// `P_M beta(T0)` for null coordinates `x`.
    pub fn effect(&self, x: &DVector<f64>) -> Vec<f64> {
        self.forms.iter().map(|q| x.dot(&(q * x))).collect()
    }

    fn combine_forms(&self, coeffs: &[f64]) -> DMatrix<f64> {
        let d = self.null_dim();
        let mut out = DMatrix::<f64>::zeros(d, d);
        for (c, q) in coeffs.iter().zip(&self.forms) {
            if *c != 0.0 {
                out += q * *c;
            }
        }
        out
    }

    fn signal(&self, x: &DVector<f64>) -> ControlSignal {
        let samples = (0..self.steps)
            .map(|s| x.iter().zip(&self.controls).map(|(a, c)| a * c[s]).sum())
            .collect();
        ControlSignal::new(self.stepper.dt(), samples)
    }

    fn result(&self, x: &DVector<f64>) -> SecondOrderControl {
        let m_component = self.effect(x);
        SecondOrderControl {
            control: self.signal(x),
            gain: m_component.iter().map(|v| v * v).sum::<f64>().sqrt(),
            m_component,
            alpha_residual: self.alpha_bound * x.norm(),
        }
    }

    /// Unit control maximizing `|P_{M^j} beta(T0)|` for plane `plane`.
    pub fn find_u0(&self, plane: usize) -> Result<SecondOrderControl> {
        let planes = self.stepper.space().planes();
        let p = planes
            .get(plane)
            .ok_or_else(|| Error::Domain(format!("plane index {plane} out of range")))?;
        let m = self.forms.len();
        let top = |theta: f64| -> (f64, DVector<f64>) {
            let mut c = vec![0.0; m];
            c[p.first] = theta.cos();
            if p.dim == 2 {
                c[p.first + 1] = theta.sin();
            }
            top_eigen(&self.combine_forms(&c))
        };
        let angles: Vec<f64> = if p.dim == 2 {
            (0..self.opts.sweep.max(8))
                .map(|i| 2.0 * std::f64::consts::PI * i as f64 / self.opts.sweep.max(8) as f64)
                .collect()
        } else {
            vec![0.0, std::f64::consts::PI]
        };
        let mut best = (f64::NEG_INFINITY, 0.0);
        for &a in &angles {
            let v = top(a).0;
            if v > best.0 {
                best = (v, a);
            }
        }
        let mut theta = best.1;
        if p.dim == 2 {
            let h = 2.0 * std::f64::consts::PI / angles.len() as f64;
            theta = golden_max(|a| top(a).0, theta - h, theta + h, 1e-10);
        }
        let (_, x) = top(theta);
        // The other planes may pick up a share; only plane `plane` is scored.
        let res = self.result(&x);
        let plane_gain = (0..p.dim)
            .map(|i| res.m_component[p.first + i].powi(2))
            .sum::<f64>()
            .sqrt();
        if plane_gain < self.opts.kappa_min {
            return Err(Error::Synthesis(format!(
                "second-order gain {plane_gain:.3e} below {:.1e}; lengthen the window or refine the grid",
                self.opts.kappa_min
            )));
        }
        Ok(res)
    }

    /// Unit control whose `P_M beta(T0)` is a positive multiple of `target`
    /// (exactly, in every modal coordinate).
    pub fn directed(&self, target: &[f64]) -> Result<SecondOrderControl> {
        let m = self.forms.len();
        if target.len() != m {
            return Err(Error::Dimension(format!(
                "target has {} coordinates, M has {m}",
                target.len()
            )));
        }
        let tn = target.iter().map(|v| v * v).sum::<f64>().sqrt();
        if tn == 0.0 {
            return Err(Error::Domain("zero target".into()));
        }
        let e: Vec<f64> = target.iter().map(|v| v / tn).collect();
        let comp = complement_basis(&e);
        let qe = self.combine_forms(&e);
        let cs: Vec<DMatrix<f64>> = comp.iter().map(|b| self.combine_forms(b)).collect();
        let x = minimize_top_eigen(&qe, &cs)?;
        let x = self.polish(&x, &e)?;
        let res = self.result(&x);
        let gain = res
            .m_component
            .iter()
            .zip(&e)
            .map(|(a, b)| a * b)
            .sum::<f64>();
        if gain < self.opts.kappa_min {
            return Err(Error::DegenerateTarget {
                gain,
                min: self.opts.kappa_min,
            });
        }
        Ok(res)
    }

    /// Gauss-Newton correction making `effect(x)` exactly parallel to `e`.
    fn polish(&self, x0: &DVector<f64>, e: &[f64]) -> Result<DVector<f64>> {
        let m = self.forms.len();
        let mut x = x0.clone();
        let target_gain = self
            .effect(&x)
            .iter()
            .zip(e)
            .map(|(a, b)| a * b)
            .sum::<f64>();
        if target_gain <= 0.0 {
            return Err(Error::DegenerateTarget {
                gain: target_gain,
                min: self.opts.kappa_min,
            });
        }
        for _ in 0..20 {
            let eff = self.effect(&x);
            let f = DVector::from_fn(m, |r, _| eff[r] - target_gain * e[r]);
            if f.norm() <= 1e-14 * target_gain {
                break;
            }
            let mut jac = DMatrix::<f64>::zeros(m, x.len());
            for (r, q) in self.forms.iter().enumerate() {
                let g = q * &x * 2.0;
                jac.row_mut(r).copy_from(&g.transpose());
            }
            let jjt = &jac * jac.transpose();
            let Some(sol) = jjt.cholesky().map(|c| c.solve(&f)) else {
                break;
            };
            x -= jac.transpose() * sol;
        }
        let n = x.norm();
        Ok(x / n)
    }

    /// Rescales the maximizing control of `plane` and appends the free
    /// waiting segment after which its M-effect lies on `+phi_1`; the control
    /// is re-solved so that `P_M beta(T_L) = phi_1` holds exactly.
    pub fn normalize_u0_to_target(&self, plane: usize) -> Result<NormalizedControl> {
        let planes = self.stepper.space().planes();
        let p = *planes
            .get(plane)
            .ok_or_else(|| Error::Domain(format!("plane index {plane} out of range")))?;
        let m = self.forms.len();
        let u0 = self.find_u0(plane)?;
        let mut e = vec![0.0; m];
        e[p.first] = 1.0;
        if p.dim == 1 {
            let res = self.directed(&e)?;
            let control = res.control.scaled(1.0 / res.gain.sqrt());
            return Ok(NormalizedControl {
                horizon: control.duration(),
                control,
                gain: res.gain,
                wait_steps: 0,
            });
        }
        let tau = 2.0 * std::f64::consts::PI;
        let theta = u0.m_component[p.first + 1].atan2(u0.m_component[p.first]);
        let step = self.stepper.discrete_angle(p.omega);
        let base = ((-theta).rem_euclid(tau) / step).round() as i64;
        let mut last_err = None;
        for off in [0i64, 1, -1, 2, -2, 3, -3] {
            let Ok(wait) = usize::try_from(base + off) else {
                continue;
            };
            let target = self.rotated_target(&e, wait);
            match self.directed(&target) {
                Ok(res) => {
                    let control = res.control.scaled(1.0 / res.gain.sqrt()).padded(wait);
                    return Ok(NormalizedControl {
                        horizon: control.duration(),
                        control,
                        gain: res.gain,
                        wait_steps: wait,
                    });
                }
                Err(err) => last_err = Some(err),
            }
        }
        Err(last_err.unwrap_or(Error::DegenerateTarget {
            gain: 0.0,
            min: self.opts.kappa_min,
        }))
    }

    /// Modal vector that the discrete free evolution maps onto `e` after
    /// `steps` steps.
    pub fn rotated_target(&self, e: &[f64], steps: usize) -> Vec<f64> {
        self.free_rotation(e, -(steps as f64))
    }

    /// Discrete free evolution of modal coefficients over `steps` steps
    /// (negative values run backwards).
    pub fn free_rotation(&self, e: &[f64], steps: f64) -> Vec<f64> {
        let planes = self.stepper.space().planes();
        let mut out = e.to_vec();
        for p in planes.iter().filter(|p| p.dim == 2) {
            let a = steps * self.stepper.discrete_angle(p.omega);
            let (s, c) = a.sin_cos();
            let (x, y) = (e[p.first], e[p.first + 1]);
            out[p.first] = c * x - s * y;
            out[p.first + 1] = s * x + c * y;
        }
        out
    }

    /// Unit control maximizing `<c, P_M beta(T0)>`; `None` when the maximum
    /// is not positive.
    pub fn support_point(&self, c: &[f64]) -> Option<SecondOrderControl> {
        let (l, x) = top_eigen(&self.combine_forms(c));
        (l > 0.0).then(|| self.result(&x))
    }

    /// Cascade check of a control: `(|alpha(T)|, P_M beta(T))`.
    pub fn verify(&self, u: &ControlSignal) -> Result<(f64, Vec<f64>)> {
        let r = second_order_drift(self.stepper, u)?;
        Ok((r.alpha_t.norm(), r.m_component))
    }
}

/// Unit control of [`SecondOrderSynthesizer::find_u0`] on a window of
/// duration `t0`.
pub fn find_u0(stepper: &Stepper, plane: usize, t0: f64) -> Result<SecondOrderControl> {
    let steps = (t0 / stepper.dt()).round() as usize;
    SecondOrderSynthesizer::new(stepper, steps, SynthesisOptions::default())?.find_u0(plane)
}

fn top_eigen(a: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(a.clone());
    let (i, l) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |b, (i, &l)| if l > b.1 { (i, l) } else { b },
        );
    (l, eig.eigenvectors.column(i).into_owned())
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Orthonormal basis of the complement of unit vector `e`.
fn complement_basis(e: &[f64]) -> Vec<Vec<f64>> {
    let m = e.len();
    let mut basis: Vec<Vec<f64>> = vec![e.to_vec()];
    for k in 0..m {
        let mut v = vec![0.0; m];
        v[k] = 1.0;
        for b in &basis {
            let c: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            basis.push(v.iter().map(|x| x / n).collect());
        }
        if basis.len() == m {
            break;
        }
    }
    basis.remove(0);
    basis
}

/// Minimizes `lambda_max(qe - sum mu_i c_i)` by damped Newton and returns the
/// top eigenvector at the minimizer.
fn minimize_top_eigen(qe: &DMatrix<f64>, cs: &[DMatrix<f64>]) -> Result<DVector<f64>> {
    let k = cs.len();
    let eval = |mu: &DVector<f64>| -> SymmetricEigen<f64, nalgebra::Dyn> {
        let mut a = qe.clone();
        for (m, c) in mu.iter().zip(cs) {
            a -= c * *m;
        }
        SymmetricEigen::new(a)
    };
    let sorted = |eig: &SymmetricEigen<f64, nalgebra::Dyn>| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        idx
    };
    let scale = qe
        .norm()
        .max(cs.iter().map(|c| c.norm()).fold(0.0, f64::max));
    let mut mu = DVector::<f64>::zeros(k);
    let mut eig = eval(&mu);
    for _ in 0..200 {
        let idx = sorted(&eig);
        let l1 = eig.eigenvalues[idx[0]];
        let u1 = eig.eigenvectors.column(idx[0]).into_owned();
        let cu: Vec<DVector<f64>> = cs.iter().map(|c| c * &u1).collect();
        let g = DVector::from_fn(k, |i, _| -u1.dot(&cu[i]));
        if l1 <= 0.0 {
            // A negative definite combination certifies that the target is
            // outside the reachable cone.
            return Err(Error::DegenerateTarget { gain: l1, min: 0.0 });
        }
        if g.norm() <= 1e-13 * scale {
            break;
        }
        let mut h = DMatrix::<f64>::zeros(k, k);
        for &j in &idx[1..] {
            let gap = l1 - eig.eigenvalues[j];
            let uj = eig.eigenvectors.column(j);
            let proj: Vec<f64> = cu.iter().map(|v| uj.dot(v)).collect();
            let wgt = 2.0 / gap.max(1e-14 * scale);
            for a in 0..k {
                for b in 0..k {
                    h[(a, b)] += wgt * proj[a] * proj[b];
                }
            }
        }
        for a in 0..k {
            h[(a, a)] += 1e-12 * scale;
        }
        let step = match h.clone().cholesky() {
            Some(ch) => -ch.solve(&g),
            None => -&g,
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &mu + &step * t;
            let te = eval(&trial);
            let tl = te
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            if tl <= l1 + 1e-4 * t * g.dot(&step) {
                mu = trial;
                eig = te;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let idx = sorted(&eig);
    if eig.eigenvalues[idx[0]] <= 0.0 {
        return Err(Error::DegenerateTarget {
            gain: eig.eigenvalues[idx[0]],
            min: 0.0,
        });
    }
    Ok(eig.eigenvectors.column(idx[0]).into_owned())
}
