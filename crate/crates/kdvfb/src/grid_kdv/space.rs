use std::sync::Arc;

use nalgebra::DMatrix;

use super::banded::{Banded, BandedCholesky};
use super::grid::SpatialGrid;
use super::quadrature::gauss_legendre;
use crate::error::{Error, Result};
use crate::spectral_m::modes::AnalyticMode;
use crate::spectral_m::pairs::{enumerate_pairs, CriticalPair, DEFAULT_PAIR_TOL};

/// Gauss points per cell.
pub const QUAD_POINTS: usize = 6;
/// Half bandwidth of the Hermite system matrices.
pub const BAND: usize = 3;

/// One rotation plane of the uncontrollable subspace (a single mode when l = k).
#[derive(Debug, Clone, Copy)]
pub struct Plane {
    pub pair: CriticalPair,
    pub omega: f64,
    /// Index of the first modal coefficient of this plane.
    pub first: usize,
    pub dim: usize,
}

/// Galerkin space `V = M (+) W` on a uniform grid.
///
/// `M` is spanned by the closed-form eigenfunctions of the critical pairs,
/// `W` by the C^1 cubic Hermite functions vanishing at both ends that are
/// L^2-orthogonal to `M`. A state is stored as modal coefficients plus
/// Hermite coefficients (value and slope per node, the two boundary values
/// removed) subject to `G^T c = 0`.
#[derive(Debug)]
pub struct KdvSpace {
    grid: SpatialGrid,
    planes: Vec<Plane>,
    analytic: Vec<(AnalyticMode, usize)>,
    mgs: Vec<Vec<f64>>,
    n_h: usize,
    qxi: [f64; QUAD_POINTS],
    qw: [f64; QUAD_POINTS],
    shape: [[[f64; QUAD_POINTS]; 4]; 2],
    mode_q: Vec<Vec<f64>>,
    mode_qd: Vec<Vec<f64>>,
    mode_nodes: Vec<Vec<f64>>,
    mode_nodes_d: Vec<Vec<f64>>,
    gram: Vec<Vec<f64>>,
    mass: Banded,
    stiff: Banded,
    mass_chol: BandedCholesky,
    mass_solver: ConstrainedSolver,
    generator: Vec<Vec<f64>>,
}

impl KdvSpace {
    /// Space on `[0, length]` enriched with every critical pair of `length`.
    pub fn new(length: f64, nodes: usize) -> Result<Arc<Self>> {
        let grid = SpatialGrid::new(length, nodes)?;
        Self::with_pairs(grid, &enumerate_pairs(length, DEFAULT_PAIR_TOL))
    }

    pub fn with_pairs(grid: SpatialGrid, pairs: &[CriticalPair]) -> Result<Arc<Self>> {
        let n = grid.nodes();
        let ne = grid.cells();
        let h = grid.spacing();
        let n_h = 2 * n - 2;

        let (gx, gw) = gauss_legendre(QUAD_POINTS);
        let mut qxi = [0.0; QUAD_POINTS];
        let mut qw = [0.0; QUAD_POINTS];
        for q in 0..QUAD_POINTS {
            qxi[q] = 0.5 * (gx[q] + 1.0);
            qw[q] = 0.5 * gw[q] * h;
        }
        let mut shape = [[[0.0; QUAD_POINTS]; 4]; 2];
        let mut shape_dd = [[0.0; QUAD_POINTS]; 4];
        for q in 0..QUAD_POINTS {
            let (v, d, dd) = hermite(qxi[q], h);
            for a in 0..4 {
                shape[0][a][q] = v[a];
                shape[1][a][q] = d[a];
                shape_dd[a][q] = dd[a];
            }
        }

        // Element matrices are identical on a uniform mesh.
        let mut loc_mass = [[0.0; 4]; 4];
        let mut loc_stiff = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                for q in 0..QUAD_POINTS {
                    loc_mass[a][b] += qw[q] * shape[0][a][q] * shape[0][b][q];
                    // row = test a, column = trial b: int y_x (v + v_xx)
                    loc_stiff[a][b] += qw[q] * shape[1][b][q] * (shape[0][a][q] + shape_dd[a][q]);
                }
            }
        }
        let mut mass = Banded::zeros(n_h, BAND);
        let mut stiff = Banded::zeros(n_h, BAND);
        for e in 0..ne {
            let dofs = element_dofs(n, e);
            for a in 0..4 {
                let Some(i) = dofs[a] else { continue };
                for b in 0..4 {
                    let Some(j) = dofs[b] else { continue };
                    mass.add(i, j, loc_mass[a][b]);
                    stiff.add(i, j, loc_stiff[a][b]);
                }
            }
        }
        // Natural term y_x(0) v_x(0); the slope at x = 0 is dof 0.
        stiff.add(0, 0, 1.0);

        // Modal part.
        let mut planes = Vec::new();
        let mut analytic = Vec::new();
        for pair in pairs {
            let mode = AnalyticMode::new(*pair);
            planes.push(Plane {
                pair: *pair,
                omega: if pair.is_diagonal() {
                    0.0
                } else {
                    mode.omega()
                },
                first: analytic.len(),
                dim: pair.dim(),
            });
            for part in 0..pair.dim() {
                analytic.push((mode, part));
            }
        }
        let m = analytic.len();
        let nq_total = ne * QUAD_POINTS;
        let xq = |e: usize, q: usize| (e as f64 + qxi[q]) * h;
        let raw = |r: usize, x: f64, order: u32| analytic[r].0.component(x, order, analytic[r].1);

        let mut raw_q = vec![vec![0.0; nq_total]; m];
        for (r, row) in raw_q.iter_mut().enumerate() {
            for e in 0..ne {
                for q in 0..QUAD_POINTS {
                    row[e * QUAD_POINTS + q] = raw(r, xq(e, q), 0);
                }
            }
        }
        let wq = |i: usize| qw[i % QUAD_POINTS];
        let inner = |a: &[f64], b: &[f64]| -> f64 {
            a.iter()
                .zip(b)
                .enumerate()
                .map(|(i, (x, y))| wq(i) * x * y)
                .sum()
        };
        // Modified Gram-Schmidt recorded as a lower-triangular combination.
        let mut mgs = vec![vec![0.0; m]; m];
        let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(m);
        for r in 0..m {
            let mut v = raw_q[r].clone();
            let mut comb = vec![0.0; m];
            comb[r] = 1.0;
            for s in 0..r {
                let c = inner(&v, &ortho[s]);
                for (vi, oi) in v.iter_mut().zip(&ortho[s]) {
                    *vi -= c * oi;
                }
                for t in 0..m {
                    comb[t] -= c * mgs[s][t];
                }
            }
            let nrm = inner(&v, &v).sqrt();
            if !(nrm > 0.0) {
                return Err(Error::SolverFailure("degenerate modal basis".into()));
            }
            v.iter_mut().for_each(|x| *x /= nrm);
            comb.iter_mut().for_each(|x| *x /= nrm);
            mgs[r] = comb;
            ortho.push(v);
        }

        let mut space = KdvSpace {
            grid,
            planes,
            analytic,
            mgs,
            n_h,
            qxi,
            qw,
            shape,
            mode_q: Vec::new(),
            mode_qd: Vec::new(),
            mode_nodes: Vec::new(),
            mode_nodes_d: Vec::new(),
            gram: Vec::new(),
            mass_chol: mass.cholesky()?,
            mass_solver: ConstrainedSolver::new(&mass, &[])?,
            mass,
            stiff,
            generator: vec![vec![0.0; m]; m],
        };

        // Orientation: (phi_1, phi_2) must be a direct basis, i.e. the
        // generator maps phi_1 to +omega phi_2.
        for pl in space.planes.clone() {
            if pl.dim == 2 {
                let (r1, r2) = (pl.first, pl.first + 1);
                let j21 = -space.weak_form_quadrature(r1, r2);
                if j21 < 0.0 {
                    for v in space.mgs[r2].iter_mut() {
                        *v = -*v;
                    }
                }
                space.generator[r2][r1] = pl.omega;
                space.generator[r1][r2] = -pl.omega;
            }
        }

        space.mode_q = (0..m)
            .map(|r| {
                (0..nq_total)
                    .map(|i| space.mode(r, xq(i / QUAD_POINTS, i % QUAD_POINTS), 0))
                    .collect()
            })
            .collect();
        space.mode_qd = (0..m)
            .map(|r| {
                (0..nq_total)
                    .map(|i| space.mode(r, xq(i / QUAD_POINTS, i % QUAD_POINTS), 1))
                    .collect()
            })
            .collect();
        space.mode_nodes = (0..m)
            .map(|r| (0..n).map(|i| space.mode(r, space.grid.x(i), 0)).collect())
            .collect();
        space.mode_nodes_d = (0..m)
            .map(|r| (0..n).map(|i| space.mode(r, space.grid.x(i), 1)).collect())
            .collect();

        let mut gram = vec![vec![0.0; n_h]; m];
        for (r, col) in gram.iter_mut().enumerate() {
            for e in 0..ne {
                let dofs = element_dofs(n, e);
                for a in 0..4 {
                    let Some(i) = dofs[a] else { continue };
                    let mut s = 0.0;
                    for q in 0..QUAD_POINTS {
                        s += qw[q] * shape[0][a][q] * space.mode_q[r][e * QUAD_POINTS + q];
                    }
                    col[i] += s;
                }
            }
        }
        space.mass_solver = ConstrainedSolver::new(&space.mass, &gram)?;
        space.gram = gram;
        Ok(Arc::new(space))
    }

    /// `a(phi_s, phi_r) = int phi_s' (phi_r + phi_r'')`; boundary terms vanish.
    fn weak_form_quadrature(&self, s: usize, r: usize) -> f64 {
        let h = self.grid.spacing();
        let mut acc = 0.0;
        for e in 0..self.grid.cells() {
            for q in 0..QUAD_POINTS {
                let x = (e as f64 + self.qxi[q]) * h;
                acc += self.qw[q] * self.mode(s, x, 1) * (self.mode(r, x, 0) + self.mode(r, x, 2));
            }
        }
        acc
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn length(&self) -> f64 {
        self.grid.length()
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    /// Dimension of the uncontrollable subspace.
    pub fn modal_dim(&self) -> usize {
        self.analytic.len()
    }

    /// Number of Hermite coefficients.
    pub fn hermite_dim(&self) -> usize {
        self.n_h
    }

    /// Value of the `order`-th derivative of the normalized mode `r` at `x`.
    pub fn mode(&self, r: usize, x: f64, order: u32) -> f64 {
        self.mgs[r]
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(s, c)| c * self.analytic[s].0.component(x, order, self.analytic[s].1))
            .sum()
    }

    /// Rotation generator restricted to M in the modal coordinates.
    pub fn generator(&self) -> &[Vec<f64>] {
        &self.generator
    }

    pub fn mass(&self) -> &Banded {
        &self.mass
    }

    pub fn stiffness(&self) -> &Banded {
        &self.stiff
    }

    pub(crate) fn mass_cholesky(&self) -> &BandedCholesky {
        &self.mass_chol
    }

    pub(crate) fn gram(&self) -> &[Vec<f64>] {
        &self.gram
    }

    pub(crate) fn mass_solver(&self) -> &ConstrainedSolver {
        &self.mass_solver
    }

    /// Hermite index of the slope at the right end.
    pub fn right_slope_dof(&self) -> usize {
        self.n_h - 1
    }

    /// Hermite index of the slope at the left end.
    pub fn left_slope_dof(&self) -> usize {
        0
    }

    pub(crate) fn mode_at_nodes(&self, r: usize) -> (&[f64], &[f64]) {
        (&self.mode_nodes[r], &self.mode_nodes_d[r])
    }

    pub(crate) fn quad_weights(&self) -> &[f64; QUAD_POINTS] {
        &self.qw
    }

    /// Physical coordinates of all quadrature points, cell by cell.
    pub fn quad_points(&self) -> Vec<f64> {
        let h = self.grid.spacing();
        (0..self.grid.cells())
            .flat_map(|e| self.qxi.iter().map(move |xi| (e as f64 + xi) * h))
            .collect()
    }

    /// Values and derivatives at every quadrature point.
    pub(crate) fn eval_quad(&self, modal: &[f64], coef: &[f64], val: &mut [f64], der: &mut [f64]) {
        let n = self.grid.nodes();
        for e in 0..self.grid.cells() {
            let dofs = element_dofs(n, e);
            let base = e * QUAD_POINTS;
            for q in 0..QUAD_POINTS {
                let mut v = 0.0;
                let mut d = 0.0;
                for a in 0..4 {
                    if let Some(i) = dofs[a] {
                        v += coef[i] * self.shape[0][a][q];
                        d += coef[i] * self.shape[1][a][q];
                    }
                }
                val[base + q] = v;
                der[base + q] = d;
            }
        }
        for (r, &c) in modal.iter().enumerate() {
            if c != 0.0 {
                for (v, p) in val.iter_mut().zip(&self.mode_q[r]) {
                    *v += c * p;
                }
                for (v, p) in der.iter_mut().zip(&self.mode_qd[r]) {
                    *v += c * p;
                }
            }
        }
    }

    /// Galerkin load `<g, v>` of quadrature-point data `g` (weights not yet applied).
    pub(crate) fn load_from_quad(&self, g: &[f64], modal: &mut [f64], coef: &mut [f64]) {
        let n = self.grid.nodes();
        coef.iter_mut().for_each(|x| *x = 0.0);
        for e in 0..self.grid.cells() {
            let dofs = element_dofs(n, e);
            let base = e * QUAD_POINTS;
            for a in 0..4 {
                if let Some(i) = dofs[a] {
                    let mut s = 0.0;
                    for q in 0..QUAD_POINTS {
                        s += self.qw[q] * self.shape[0][a][q] * g[base + q];
                    }
                    coef[i] += s;
                }
            }
        }
        for (r, out) in modal.iter_mut().enumerate() {
            *out = self.mode_q[r]
                .iter()
                .zip(g)
                .enumerate()
                .map(|(i, (p, gv))| self.qw[i % QUAD_POINTS] * p * gv)
                .sum();
        }
    }

    /// Value and slope of the Hermite part at arbitrary `x`.
    pub(crate) fn eval_hermite(&self, coef: &[f64], x: f64) -> (f64, f64) {
        let n = self.grid.nodes();
        let h = self.grid.spacing();
        let e = ((x / h).floor() as isize).clamp(0, self.grid.cells() as isize - 1) as usize;
        let xi = (x - e as f64 * h) / h;
        let (v, d, _) = hermite(xi, h);
        let dofs = element_dofs(n, e);
        let mut val = 0.0;
        let mut der = 0.0;
        for a in 0..4 {
            if let Some(i) = dofs[a] {
                val += coef[i] * v[a];
                der += coef[i] * d[a];
            }
        }
        (val, der)
    }

    pub(crate) fn hermite_value_dof(&self, node: usize) -> Option<usize> {
        reduce(self.grid.nodes(), 2 * node)
    }

    pub(crate) fn hermite_slope_dof(&self, node: usize) -> usize {
        reduce(self.grid.nodes(), 2 * node + 1).expect("slope dofs are never removed")
    }

    pub fn same_as(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other)
    }
}

/// Global Hermite dof `g` (value = 2i, slope = 2i+1) to reduced index.
fn reduce(nodes: usize, g: usize) -> Option<usize> {
    let last_value = 2 * nodes - 2;
    if g == 0 || g == last_value {
        None
    } else if g < last_value {
        Some(g - 1)
    } else {
        Some(g - 2)
    }
}

fn element_dofs(nodes: usize, e: usize) -> [Option<usize>; 4] {
    [
        reduce(nodes, 2 * e),
        reduce(nodes, 2 * e + 1),
        reduce(nodes, 2 * e + 2),
        reduce(nodes, 2 * e + 3),
    ]
}

/// Cubic Hermite shape functions on a cell of width `h`, local coordinate `xi`.
fn hermite(xi: f64, h: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let x2 = xi * xi;
    let x3 = x2 * xi;
    (
        [
            1.0 - 3.0 * x2 + 2.0 * x3,
            h * (xi - 2.0 * x2 + x3),
            3.0 * x2 - 2.0 * x3,
            h * (x3 - x2),
        ],
        [
            (6.0 * x2 - 6.0 * xi) / h,
            1.0 - 4.0 * xi + 3.0 * x2,
            (6.0 * xi - 6.0 * x2) / h,
            3.0 * x2 - 2.0 * xi,
        ],
        [
            (12.0 * xi - 6.0) / (h * h),
            (6.0 * xi - 4.0) / h,
            (6.0 - 12.0 * xi) / (h * h),
            (6.0 * xi - 2.0) / h,
        ],
    )
}

/// Solves `K c = r - G mu` subject to `G^T c = 0` by bordering.
#[derive(Debug, Clone)]
pub(crate) struct ConstrainedSolver {
    lu: super::banded::BandedLu,
    gram: Vec<Vec<f64>>,
    kinv_g: Vec<Vec<f64>>,
    schur_inv: DMatrix<f64>,
}

impl ConstrainedSolver {
    pub(crate) fn new(k: &Banded, gram: &[Vec<f64>]) -> Result<Self> {
        let lu = k.lu()?;
        let m = gram.len();
        let kinv_g: Vec<Vec<f64>> = gram
            .iter()
            .map(|g| {
                let mut v = g.clone();
                lu.solve(&mut v);
                v
            })
            .collect();
        let schur = DMatrix::from_fn(m, m, |r, s| dot(&gram[r], &kinv_g[s]));
        let schur_inv = if m == 0 {
            schur
        } else {
            schur
                .try_inverse()
                .ok_or_else(|| Error::SolverFailure("singular constraint block".into()))?
        };
        Ok(Self {
            lu,
            gram: gram.to_vec(),
            kinv_g,
            schur_inv,
        })
    }

    pub(crate) fn solve(&self, rhs: &mut [f64]) {
        self.lu.solve(rhs);
        let m = self.gram.len();
        if m == 0 {
            return;
        }
        let t: Vec<f64> = self.gram.iter().map(|g| dot(g, rhs)).collect();
        for s in 0..m {
            let mu: f64 = (0..m).map(|r| self.schur_inv[(s, r)] * t[r]).sum();
            if mu != 0.0 {
                for (x, y) in rhs.iter_mut().zip(&self.kinv_g[s]) {
                    *x -= mu * y;
                }
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
