use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid_kdv::{KdvSpace, Plane, SpatialGrid, StateVector, QUAD_POINTS};
use crate::spectral_m::pairs::{enumerate_pairs, DEFAULT_PAIR_TOL};

/// Relative size of an H component tolerated by [`ModalSubspace::rotate`].
const M_MEMBERSHIP_TOL: f64 = 1e-8;

/// Orthonormal basis of M, plane frequencies and the exact rotation model.
#[derive(Debug, Clone)]
pub struct ModalSubspace {
    space: Arc<KdvSpace>,
    basis: Vec<StateVector>,
    gram: Vec<Vec<f64>>,
}

/// Space and modal basis for a critical `length` on `grid`.
pub fn build_m_basis(length: f64, grid: SpatialGrid) -> Result<ModalSubspace> {
    let pairs = enumerate_pairs(length, DEFAULT_PAIR_TOL);
    if pairs.is_empty() {
        return Err(Error::EmptySubspace(length));
    }
    let space = KdvSpace::with_pairs(grid, &pairs)?;
    ModalSubspace::new(&space)
}

impl ModalSubspace {
    pub fn new(space: &Arc<KdvSpace>) -> Result<Self> {
        let m = space.modal_dim();
        if m == 0 {
            return Err(Error::EmptySubspace(space.length()));
        }
        let basis = (0..m)
            .map(|r| {
                let mut e = vec![0.0; m];
                e[r] = 1.0;
                StateVector::from_modal(space, &e)
            })
            .collect::<Result<Vec<_>>>()?;
        let xq = space.quad_points();
        let w = |i: usize| space.quad_weights()[i % QUAD_POINTS];
        let vals: Vec<Vec<f64>> = (0..m)
            .map(|r| xq.iter().map(|&x| space.mode(r, x, 0)).collect())
            .collect();
        let gram = (0..m)
            .map(|r| {
                (0..m)
                    .map(|s| (0..xq.len()).map(|i| w(i) * vals[r][i] * vals[s][i]).sum())
                    .collect()
            })
            .collect();
        Ok(Self {
            space: space.clone(),
            basis,
            gram,
        })
    }

    pub fn space(&self) -> &Arc<KdvSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[StateVector] {
        &self.basis
    }

    pub fn planes(&self) -> &[Plane] {
        self.space.planes()
    }

    /// Quadrature Gram matrix of the basis functions.
    pub fn gram(&self) -> &[Vec<f64>] {
        &self.gram
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.planes().iter().map(|p| p.omega).collect()
    }

    /// Periods per plane; `None` for a stationary (l = k) mode.
    pub fn periods(&self) -> Vec<Option<f64>> {
        self.planes().iter().map(|p| p.pair.period()).collect()
    }

    /// Basis vector `phi_{part+1}` of plane `plane`.
    pub fn phi(&self, plane: usize, part: usize) -> &StateVector {
        let p = &self.planes()[plane];
        assert!(part < p.dim);
        &self.basis[p.first + part]
    }

    pub fn project_m(&self, y: &StateVector) -> Result<StateVector> {
        self.check(y)?;
        Ok(y.project_m())
    }

    pub fn project_h(&self, y: &StateVector) -> Result<StateVector> {
        self.check(y)?;
        Ok(y.project_h())
    }

    fn check(&self, y: &StateVector) -> Result<()> {
        if self.space.same_as(y.space()) {
            Ok(())
        } else {
            Err(Error::Dimension(
                "state grid differs from the subspace grid".into(),
            ))
        }
    }

    /// Exact free evolution on M: rotation by `omega_j t` in every plane.
    pub fn rotate(&self, v: &StateVector, t: f64) -> Result<StateVector> {
        self.check(v)?;
        let nh = v.norm_h();
        if nh > M_MEMBERSHIP_TOL * v.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::Domain(format!(
                "rotation applies to elements of M only (H component {nh:.3e})"
            )));
        }
        StateVector::from_modal(&self.space, &self.rotate_modal(v.modal(), t))
    }

    /// Rotation on modal coefficients.
    pub fn rotate_modal(&self, a: &[f64], t: f64) -> Vec<f64> {
        rotate_coefficients(self.planes(), a, t)
    }

    /// Largest pointwise residual of `phi' + phi''' = J phi` over the
    /// quadrature points, relative to the sup of `phi`.
    pub fn ode_residual(&self) -> f64 {
        let xq = self.space.quad_points();
        let mut worst = 0.0f64;
        let gen = self.space.generator();
        for r in 0..self.dim() {
            let mut sup = 0.0f64;
            let mut res = 0.0f64;
            for &x in &xq {
                let lhs = self.space.mode(r, x, 1) + self.space.mode(r, x, 3);
                // phi_r' + phi_r''' = -sum_s J[s][r] phi_s
                let rhs: f64 = (0..self.dim())
                    .map(|s| -gen[s][r] * self.space.mode(s, x, 0))
                    .sum();
                res = res.max((lhs - rhs).abs());
                sup = sup.max(self.space.mode(r, x, 0).abs());
            }
            worst = worst.max(res / sup);
        }
        worst
    }

    /// Largest of |phi(0)|, |phi(L)|, |phi'(0)|, |phi'(L)| over the basis.
    pub fn boundary_residual(&self) -> f64 {
        let len = self.space.length();
        let mut worst = 0.0f64;
        for r in 0..self.dim() {
            for x in [0.0, len] {
                for order in 0..2 {
                    worst = worst.max(self.space.mode(r, x, order).abs());
                }
            }
        }
        worst
    }

    /// CSV with columns `x, phi1_1, phi2_1, ...` at the grid nodes.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut header = vec!["x".to_string()];
        for (j, p) in self.planes().iter().enumerate() {
            for part in 0..p.dim {
                header.push(format!("phi{}_{}", part + 1, j + 1));
            }
        }
        let mut out = header.join(",");
        out.push('\n');
        let grid = self.space.grid();
        let cols: Vec<Vec<f64>> = self.basis.iter().map(|b| b.values()).collect();
        for i in 0..grid.nodes() {
            out.push_str(&format!("{:.17e}", grid.x(i)));
            for c in &cols {
                out.push_str(&format!(",{:.17e}", c[i]));
            }
            out.push('\n');
        }
        file.write_all(out.as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

fn rotate_coefficients(planes: &[Plane], a: &[f64], t: f64) -> Vec<f64> {
    let mut out = a.to_vec();
    for p in planes {
        if p.dim == 2 {
            let (s, c) = (p.omega * t).sin_cos();
            let (x, y) = (a[p.first], a[p.first + 1]);
            out[p.first] = c * x - s * y;
            out[p.first + 1] = s * x + c * y;
        }
    }
    out
}
