use std::sync::Arc;

use nalgebra::DMatrix;

use super::banded::Banded;
use super::space::{ConstrainedSolver, KdvSpace, QUAD_POINTS};
use super::state::StateVector;
use super::SolverConfig;
use crate::error::{Error, Result};

/// Outcome of one nonlinear step.
#[derive(Debug, Clone)]
pub struct NonlinearStep {
    pub state: StateVector,
    pub iterations: usize,
}

/// Time stepper for the boundary-controlled KdV system on a fixed space and step.
///
/// The W block uses the theta-method; the M block, which is decoupled from
/// W and from the control, always uses the midpoint rule so the rotation on M
/// stays isometric.
#[derive(Debug, Clone)]
pub struct Stepper {
    space: Arc<KdvSpace>,
    cfg: SolverConfig,
    solver: ConstrainedSolver,
    rhs: Banded,
    m_prop: Vec<Vec<f64>>,
    m_load: Vec<Vec<f64>>,
}

impl Stepper {
    pub fn new(space: &Arc<KdvSpace>, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let dt = cfg.dt;
        let th = cfg.theta;
        let lhs = space.mass().combine(1.0, space.stiffness(), th * dt);
        let rhs = space
            .mass()
            .combine(1.0, space.stiffness(), -(1.0 - th) * dt);
        let solver = ConstrainedSolver::new(&lhs, space.gram())?;

        let m = space.modal_dim();
        let j = DMatrix::from_fn(m, m, |r, s| space.generator()[r][s]);
        let id = DMatrix::<f64>::identity(m, m);
        let p = (&id - &j * (0.5 * dt))
            .try_inverse()
            .ok_or_else(|| Error::SolverFailure("singular modal block".into()))?;
        let r = &p * (&id + &j * (0.5 * dt));
        let to_rows = |mat: &DMatrix<f64>, s: f64| -> Vec<Vec<f64>> {
            (0..m)
                .map(|i| (0..m).map(|k| s * mat[(i, k)]).collect())
                .collect()
        };
        Ok(Self {
            space: space.clone(),
            cfg,
            solver,
            rhs,
            m_prop: to_rows(&r, 1.0),
            m_load: to_rows(&p, dt),
        })
    }

    pub fn space(&self) -> &Arc<KdvSpace> {
        &self.space
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn dt(&self) -> f64 {
        self.cfg.dt
    }

    /// Per-step rotation angle of the discrete modal propagator for `omega`.
    pub fn discrete_angle(&self, omega: f64) -> f64 {
        2.0 * (0.5 * omega * self.cfg.dt).atan()
    }

    pub(crate) fn modal_propagator(&self) -> &[Vec<f64>] {
        &self.m_prop
    }

    pub(crate) fn modal_load(&self) -> &[Vec<f64>] {
        &self.m_load
    }

    /// W-block right-hand side without loads: `K_R c + dt b h`.
    fn rhs_h(&self, c: &[f64], h: f64) -> Vec<f64> {
        let mut out = vec![0.0; c.len()];
        self.rhs.matvec(c, &mut out);
        out[self.space.right_slope_dof()] += self.cfg.dt * h;
        out
    }

    fn rhs_m(&self, a: &[f64]) -> Vec<f64> {
        self.m_prop
            .iter()
            .map(|row| row.iter().zip(a).map(|(x, y)| x * y).sum())
            .collect()
    }

    /// One linear step on raw coefficients. `load` is `(<f, phi_r>, <f, b_a>)`
    /// averaged over the step.
    pub(crate) fn advance(
        &self,
        a: &[f64],
        c: &[f64],
        h: f64,
        load: Option<(&[f64], &[f64])>,
    ) -> (Vec<f64>, Vec<f64>) {
        let dt = self.cfg.dt;
        let mut rc = self.rhs_h(c, h);
        let mut ra = self.rhs_m(a);
        if let Some((lm, lh)) = load {
            for (x, y) in rc.iter_mut().zip(lh) {
                *x += dt * y;
            }
            for (i, x) in ra.iter_mut().enumerate() {
                *x += self.m_load[i]
                    .iter()
                    .zip(lm)
                    .map(|(p, l)| p * l)
                    .sum::<f64>();
            }
        }
        self.solver.solve(&mut rc);
        (ra, rc)
    }

    /// Galerkin load of `y y_x`.
    pub(crate) fn nonlinear_load(&self, a: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nq = self.space.grid().cells() * QUAD_POINTS;
        let mut v = vec![0.0; nq];
        let mut d = vec![0.0; nq];
        self.space.eval_quad(a, c, &mut v, &mut d);
        for (x, y) in v.iter_mut().zip(&d) {
            *x *= y;
        }
        let mut lm = vec![0.0; a.len()];
        let mut lh = vec![0.0; c.len()];
        self.space.load_from_quad(&v, &mut lm, &mut lh);
        (lm, lh)
    }

    fn forcing_load(&self, f: &StateVector) -> (Vec<f64>, Vec<f64>) {
        let mut lh = vec![0.0; f.hermite().len()];
        self.space.mass().matvec(f.hermite(), &mut lh);
        (f.modal().to_vec(), lh)
    }

    fn check(&self, y: &StateVector) -> Result<()> {
        if Arc::ptr_eq(y.space(), &self.space) {
            Ok(())
        } else {
            Err(Error::Dimension(
                "state grid differs from the stepper grid".into(),
            ))
        }
    }

    /// One step of `y_t + y_x + y_xxx = f`, `y(0) = y(L) = 0`, `y_x(L) = h`.
    pub fn step_linear(
        &self,
        y: &StateVector,
        h: f64,
        forcing: Option<&StateVector>,
    ) -> Result<StateVector> {
        self.check(y)?;
        let load = match forcing {
            Some(f) => {
                self.check(f)?;
                Some(self.forcing_load(f))
            }
            None => None,
        };
        let (a, c) = self.advance(
            y.modal(),
            y.hermite(),
            h,
            load.as_ref().map(|(m, h)| (m.as_slice(), h.as_slice())),
        );
        Ok(StateVector::from_raw(&self.space, a, c))
    }

    /// One step of the nonlinear system `y_t + y_x + y_xxx + y y_x = f`.
    pub fn step_nonlinear(
        &self,
        y: &StateVector,
        h: f64,
        forcing: Option<&StateVector>,
    ) -> Result<StateVector> {
        Ok(self.step_nonlinear_stats(y, h, forcing)?.state)
    }

    pub fn step_nonlinear_stats(
        &self,
        y: &StateVector,
        h: f64,
        forcing: Option<&StateVector>,
    ) -> Result<NonlinearStep> {
        self.check(y)?;
        let dt = self.cfg.dt;
        let fnorm = match forcing {
            Some(f) => {
                self.check(f)?;
                f.norm()
            }
            None => 0.0,
        };
        let size = y.norm() + h.abs() * dt.sqrt() + dt * fnorm;
        if !(size <= self.cfg.smallness_eta) {
            return Err(Error::Smallness {
                size,
                eta: self.cfg.smallness_eta,
            });
        }
        let load = forcing.map(|f| self.forcing_load(f));
        let (a, c) = self.nonlinear_raw(
            y.modal(),
            y.hermite(),
            h,
            load.as_ref().map(|(m, h)| (m.as_slice(), h.as_slice())),
        )?;
        Ok(NonlinearStep {
            state: StateVector::from_raw(&self.space, a.0, c),
            iterations: a.1,
        })
    }

    /// Picard iteration for the trapezoidal nonlinear step on raw coefficients.
    #[allow(clippy::type_complexity)]
    pub(crate) fn nonlinear_raw(
        &self,
        a0: &[f64],
        c0: &[f64],
        h: f64,
        load: Option<(&[f64], &[f64])>,
    ) -> Result<((Vec<f64>, usize), Vec<f64>)> {
        let dt = self.cfg.dt;
        let (n0m, n0h) = self.nonlinear_load(a0, c0);
        let mut base_h = self.rhs_h(c0, h);
        let mut lm: Vec<f64> = n0m.iter().map(|x| -0.5 * x).collect();
        for (x, y) in base_h.iter_mut().zip(&n0h) {
            *x -= 0.5 * dt * y;
        }
        if let Some((fm, fh)) = load {
            for (x, y) in base_h.iter_mut().zip(fh) {
                *x += dt * y;
            }
            for (x, y) in lm.iter_mut().zip(fm) {
                *x += y;
            }
        }
        let mut base_m = self.rhs_m(a0);
        for (i, x) in base_m.iter_mut().enumerate() {
            *x += self.m_load[i]
                .iter()
                .zip(&lm)
                .map(|(p, l)| p * l)
                .sum::<f64>();
        }

        let (mut nm, mut nh) = (n0m, n0h);
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut increment = f64::INFINITY;
        for it in 1..=self.cfg.picard_max_iter {
            let mut c1 = base_h.clone();
            for (x, y) in c1.iter_mut().zip(&nh) {
                *x -= 0.5 * dt * y;
            }
            self.solver.solve(&mut c1);
            let a1: Vec<f64> = base_m
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    b - 0.5
                        * self.m_load[i]
                            .iter()
                            .zip(&nm)
                            .map(|(p, l)| p * l)
                            .sum::<f64>()
                })
                .collect();
            if !c1.iter().chain(&a1).all(|v| v.is_finite()) {
                return Err(Error::FixedPointDivergence {
                    iterations: it,
                    increment: f64::INFINITY,
                });
            }
            if let Some((pa, pc)) = &prev {
                let dc: Vec<f64> = c1.iter().zip(pc).map(|(x, y)| x - y).collect();
                let da: f64 = a1.iter().zip(pa).map(|(x, y)| (x - y).powi(2)).sum();
                let diff = (da + self.space.mass().bilinear(&dc, &dc).max(0.0)).sqrt();
                let scale = (a1.iter().map(|x| x * x).sum::<f64>()
                    + self.space.mass().bilinear(&c1, &c1).max(0.0))
                .sqrt();
                increment = if scale > 0.0 { diff / scale } else { diff };
                if diff <= self.cfg.picard_tol * scale || diff == 0.0 {
                    return Ok(((a1, it), c1));
                }
            }
            let (m1, h1) = self.nonlinear_load(&a1, &c1);
            nm = m1;
            nh = h1;
            prev = Some((a1, c1));
        }
        Err(Error::FixedPointDivergence {
            iterations: self.cfg.picard_max_iter,
            increment,
        })
    }

    /// Discrete `S(t) y0`: uncontrolled, unforced linear evolution.
    pub fn semigroup_apply(&self, y0: &StateVector, t: f64) -> Result<StateVector> {
        self.check(y0)?;
        if !(t >= 0.0) {
            return Err(Error::Domain(format!(
                "semigroup time must be >= 0, got {t}"
            )));
        }
        let dt = self.cfg.dt;
        let steps_f = t / dt;
        let mut n = steps_f.round() as usize;
        let mut rem = 0.0;
        if (n as f64 * dt - t).abs() > 1e-9 * t.max(1.0) {
            n = steps_f.floor() as usize;
            rem = t - n as f64 * dt;
        }
        let (mut a, mut c) = (y0.modal().to_vec(), y0.hermite().to_vec());
        for _ in 0..n {
            let (a1, c1) = self.advance(&a, &c, 0.0, None);
            a = a1;
            c = c1;
        }
        if rem > 0.0 {
            let tail = Stepper::new(
                &self.space,
                SolverConfig {
                    dt: rem,
                    ..self.cfg
                },
            )?;
            let (a1, c1) = tail.advance(&a, &c, 0.0, None);
            a = a1;
            c = c1;
        }
        Ok(StateVector::from_raw(&self.space, a, c))
    }

    /// Projection of `y y_x` onto the discrete space.
    pub fn nonlinear_term(&self, y: &StateVector) -> StateVector {
        let nq = self.space.grid().cells() * QUAD_POINTS;
        let mut v = vec![0.0; nq];
        let mut d = vec![0.0; nq];
        self.space.eval_quad(y.modal(), y.hermite(), &mut v, &mut d);
        for (x, y) in v.iter_mut().zip(&d) {
            *x *= y;
        }
        StateVector::project_quad(&self.space, &v)
    }
}
