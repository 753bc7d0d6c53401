use std::fmt;
use std::sync::Arc;

use super::space::{dot, KdvSpace, QUAD_POINTS};
use crate::error::{Error, Result};

/// Discrete approximation of `y(t, .)`; vanishes at both ends by construction.
#[derive(Clone)]
pub struct StateVector {
    space: Arc<KdvSpace>,
    modal: Vec<f64>,
    coef: Vec<f64>,
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateVector")
            .field("nodes", &self.space.grid().nodes())
            .field("modal", &self.modal)
            .field("norm", &self.norm())
            .finish()
    }
}

impl StateVector {
    pub fn zeros(space: &Arc<KdvSpace>) -> Self {
        Self {
            space: space.clone(),
            modal: vec![0.0; space.modal_dim()],
            coef: vec![0.0; space.hermite_dim()],
        }
    }

    /// Raw constructor; `coef` is assumed to satisfy the orthogonality constraint.
    pub(crate) fn from_raw(space: &Arc<KdvSpace>, modal: Vec<f64>, coef: Vec<f64>) -> Self {
        debug_assert_eq!(modal.len(), space.modal_dim());
        debug_assert_eq!(coef.len(), space.hermite_dim());
        Self {
            space: space.clone(),
            modal,
            coef,
        }
    }

    /// Element of `M` with the given modal coefficients.
    pub fn from_modal(space: &Arc<KdvSpace>, modal: &[f64]) -> Result<Self> {
        if modal.len() != space.modal_dim() {
            return Err(Error::Dimension(format!(
                "expected {} modal coefficients, got {}",
                space.modal_dim(),
                modal.len()
            )));
        }
        Ok(Self::from_raw(
            space,
            modal.to_vec(),
            vec![0.0; space.hermite_dim()],
        ))
    }

    /// L^2 projection of a function onto the discrete space.
    pub fn project<F: Fn(f64) -> f64>(space: &Arc<KdvSpace>, f: F) -> Self {
        let xq = space.quad_points();
        let g: Vec<f64> = xq.iter().map(|&x| f(x)).collect();
        Self::project_quad(space, &g)
    }

    /// Projection from samples at the quadrature points.
    pub(crate) fn project_quad(space: &Arc<KdvSpace>, g: &[f64]) -> Self {
        let mut modal = vec![0.0; space.modal_dim()];
        let mut coef = vec![0.0; space.hermite_dim()];
        space.load_from_quad(g, &mut modal, &mut coef);
        space.mass_solver().solve(&mut coef);
        Self::from_raw(space, modal, coef)
    }

    /// Projection of the piecewise-linear interpolant of nodal samples.
    /// Ends are forced to zero.
    pub fn from_nodal_values(space: &Arc<KdvSpace>, values: &[f64]) -> Result<Self> {
        let grid = space.grid();
        if values.len() != grid.nodes() {
            return Err(Error::Dimension(format!(
                "expected {} nodal values, got {}",
                grid.nodes(),
                values.len()
            )));
        }
        let h = grid.spacing();
        let last = grid.nodes() - 1;
        let v = |i: usize| if i == 0 || i == last { 0.0 } else { values[i] };
        Ok(Self::project(space, |x| {
            let e = ((x / h).floor() as usize).min(last - 1);
            let t = x / h - e as f64;
            (1.0 - t) * v(e) + t * v(e + 1)
        }))
    }

    pub fn space(&self) -> &Arc<KdvSpace> {
        &self.space
    }

    pub fn modal(&self) -> &[f64] {
        &self.modal
    }

    pub fn hermite(&self) -> &[f64] {
        &self.coef
    }

    pub fn check_compatible(&self, other: &StateVector) -> Result<()> {
        if self.space.same_as(&other.space) {
            Ok(())
        } else {
            Err(Error::Dimension("states live on different grids".into()))
        }
    }

    /// Nodal values; entries 0 and N-1 are exactly zero.
    pub fn values(&self) -> Vec<f64> {
        let n = self.space.grid().nodes();
        (0..n)
            .map(|i| {
                if i == 0 || i == n - 1 {
                    return 0.0;
                }
                let mut v = self
                    .space
                    .hermite_value_dof(i)
                    .map_or(0.0, |d| self.coef[d]);
                for (r, a) in self.modal.iter().enumerate() {
                    v += a * self.space.mode_at_nodes(r).0[i];
                }
                v
            })
            .collect()
    }

    /// Nodal slopes `y_x(x_i)`.
    pub fn slopes(&self) -> Vec<f64> {
        let n = self.space.grid().nodes();
        (0..n)
            .map(|i| {
                let mut v = self.coef[self.space.hermite_slope_dof(i)];
                for (r, a) in self.modal.iter().enumerate() {
                    v += a * self.space.mode_at_nodes(r).1[i];
                }
                v
            })
            .collect()
    }

    /// Value and slope at arbitrary `x` in [0, L].
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let (mut v, mut d) = self.space.eval_hermite(&self.coef, x);
        for (r, a) in self.modal.iter().enumerate() {
            v += a * self.space.mode(r, x, 0);
            d += a * self.space.mode(r, x, 1);
        }
        (v, d)
    }

    pub fn slope_right(&self) -> f64 {
        let n = self.space.grid().nodes();
        self.coef[self.space.right_slope_dof()]
            + self
                .modal
                .iter()
                .enumerate()
                .map(|(r, a)| a * self.space.mode_at_nodes(r).1[n - 1])
                .sum::<f64>()
    }

    pub fn slope_left(&self) -> f64 {
        self.coef[self.space.left_slope_dof()]
            + self
                .modal
                .iter()
                .enumerate()
                .map(|(r, a)| a * self.space.mode_at_nodes(r).1[0])
                .sum::<f64>()
    }

    /// Squared norm of the component orthogonal to M.
    pub fn energy_h(&self) -> f64 {
        self.space.mass().bilinear(&self.coef, &self.coef).max(0.0)
    }

    pub fn energy_m(&self) -> f64 {
        dot(&self.modal, &self.modal)
    }

    /// `int_0^L y^2 dx`.
    pub fn energy(&self) -> f64 {
        self.energy_h() + self.energy_m()
    }

    pub fn norm(&self) -> f64 {
        self.energy().sqrt()
    }

    pub fn norm_h(&self) -> f64 {
        self.energy_h().sqrt()
    }

    pub fn norm_m(&self) -> f64 {
        self.energy_m().sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> f64 {
        dot(&self.modal, &other.modal) + self.space.mass().bilinear(&self.coef, &other.coef)
    }

    /// `int y_x^2 dx`, via quadrature.
    pub fn h1_seminorm_sq(&self) -> f64 {
        let nq = self.space.grid().cells() * QUAD_POINTS;
        let mut v = vec![0.0; nq];
        let mut d = vec![0.0; nq];
        self.space
            .eval_quad(&self.modal, &self.coef, &mut v, &mut d);
        let w = self.space.quad_weights();
        d.iter()
            .enumerate()
            .map(|(i, x)| w[i % QUAD_POINTS] * x * x)
            .sum()
    }

    /// Orthogonal projection on M.
    pub fn project_m(&self) -> StateVector {
        Self::from_raw(&self.space, self.modal.clone(), vec![0.0; self.coef.len()])
    }

    /// Orthogonal projection on H = M^perp.
    pub fn project_h(&self) -> StateVector {
        Self::from_raw(&self.space, vec![0.0; self.modal.len()], self.coef.clone())
    }

    pub fn scaled(&self, s: f64) -> StateVector {
        Self::from_raw(
            &self.space,
            self.modal.iter().map(|x| s * x).collect(),
            self.coef.iter().map(|x| s * x).collect(),
        )
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &StateVector) -> StateVector {
        Self::from_raw(
            &self.space,
            self.modal
                .iter()
                .zip(&other.modal)
                .map(|(a, b)| a + s * b)
                .collect(),
            self.coef
                .iter()
                .zip(&other.coef)
                .map(|(a, b)| a + s * b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &StateVector) -> StateVector {
        self.axpy(-1.0, other)
    }

    pub fn add(&self, other: &StateVector) -> StateVector {
        self.axpy(1.0, other)
    }

    pub fn is_zero(&self) -> bool {
        self.modal.iter().chain(&self.coef).all(|x| *x == 0.0)
    }
}
