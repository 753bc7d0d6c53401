mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::*;
use kdvfb::grid_kdv::{energy, KdvSpace, SolverConfig, SpatialGrid, StateVector, Stepper};
use kdvfb::spectral_m::build_m_basis;
use kdvfb::Error;

#[test]
fn grid_endpoints_and_spacing() {
    let g = SpatialGrid::new(2.0, 21).unwrap();
    assert_eq!(g.x(0), 0.0);
    assert_eq!(g.x(20), 2.0);
    assert!((g.spacing() - 0.1).abs() < 1e-15);
    assert!(SpatialGrid::new(1.0, 15).is_err());
    assert!(SpatialGrid::new(-1.0, 32).is_err());
}

#[test]
fn solver_config_is_validated() {
    for cfg in [
        SolverConfig {
            dt: 0.0,
            ..SolverConfig::default()
        },
        SolverConfig {
            theta: 0.4,
            ..SolverConfig::default()
        },
        SolverConfig {
            picard_tol: 0.0,
            ..SolverConfig::default()
        },
    ] {
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}

#[test]
fn zero_is_a_fixed_point() {
    let st = desk_stepper();
    let z = StateVector::zeros(st.space());
    assert!(st.step_linear(&z, 0.0, None).unwrap().is_zero());
    assert!(st.step_nonlinear(&z, 0.0, None).unwrap().is_zero());
    assert!(st.semigroup_apply(&z, 3.0).unwrap().is_zero());
}

#[test]
fn dirichlet_ends_hold() {
    let st = desk_stepper();
    let y = smooth_h(st.space(), 3)
        .scaled(0.2)
        .add(&StateVector::from_modal(st.space(), &[0.1, -0.05]).unwrap());
    let y1 = st.step_nonlinear(&y, 0.7, None).unwrap();
    let v = y1.values();
    assert_eq!(v[0], 0.0);
    assert_eq!(v[v.len() - 1], 0.0);
}

#[test]
fn mismatched_grids_are_rejected() {
    let st = desk_stepper();
    let other = n2_space(64);
    let y = smooth_h(&other, 1);
    assert!(matches!(
        st.step_linear(&y, 0.0, None),
        Err(Error::Dimension(_))
    ));
    let f = smooth_h(&other, 2);
    let y = smooth_h(st.space(), 1);
    assert!(matches!(
        st.step_linear(&y, 0.0, Some(&f)),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn full_period_returns_phi1() {
    let st = desk_stepper();
    let m = build_m_basis(
        n2_length(),
        SpatialGrid::new(n2_length(), DESK_NODES).unwrap(),
    )
    .unwrap();
    let sub = kdvfb::spectral_m::ModalSubspace::new(st.space()).unwrap();
    let phi = sub.phi(0, 0);
    let y = st.semigroup_apply(phi, n2_period()).unwrap();
    assert!(rel_err(&y, phi) < 1e-3, "{}", rel_err(&y, phi));
    assert_eq!(m.dim(), 2);
}

#[test]
fn quarter_period_maps_phi1_to_phi2() {
    let st = desk_stepper();
    let sub = kdvfb::spectral_m::ModalSubspace::new(st.space()).unwrap();
    let y = st
        .semigroup_apply(sub.phi(0, 0), n2_period() / 4.0)
        .unwrap();
    assert!(rel_err(&y, sub.phi(0, 1)) < 1e-3);
}

#[test]
fn semigroup_identity_and_negative_time() {
    let st = desk_stepper();
    let y = smooth_h(st.space(), 5);
    let same = st.semigroup_apply(&y, 0.0).unwrap();
    assert_eq!(same.sub(&y).norm(), 0.0);
    assert!(matches!(
        st.semigroup_apply(&y, -1.0),
        Err(Error::Domain(_))
    ));
}

#[test]
fn semigroup_handles_fractional_steps() {
    let st = desk_stepper();
    let y = smooth_h(st.space(), 6);
    let a = st.semigroup_apply(&y, 10.5 * st.dt()).unwrap();
    let b = st.semigroup_apply(&y, 10.0 * st.dt()).unwrap();
    let c = st.semigroup_apply(&y, 11.0 * st.dt()).unwrap();
    assert!(a.energy() <= b.energy() && a.energy() >= c.energy());
}

/// Per-step energy loss against `dt` times the trapezoid of `y_x(0)^2`.
#[test]
fn energy_loss_matches_left_slope() {
    let space = n2_space(256);
    let st = stepper(&space, 1e-3);
    let mut y = smooth_h(&space, 11);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let y1 = st.step_linear(&y, 0.0, None).unwrap();
        let loss = y.energy() - y1.energy();
        let flux = 0.5 * st.dt() * (y.slope_left().powi(2) + y1.slope_left().powi(2));
        assert!(loss >= -1e-14);
        worst = worst.max((loss - flux).abs() / flux);
        y = y1;
    }
    assert!(worst < 0.05, "relative mismatch {worst}");
}

#[test]
fn energy_of_reference_states() {
    let space = n2_space(128);
    assert_eq!(energy(&StateVector::zeros(&space)), 0.0);
    let phi = StateVector::from_modal(&space, &[1.0, 0.0]).unwrap();
    assert!((energy(&phi) - 1.0).abs() < 1e-10);

    let l = 2.0 * PI;
    let nodes = 201;
    let space = KdvSpace::new(l, nodes).unwrap();
    let ones = vec![1.0; nodes];
    let y = StateVector::from_nodal_values(&space, &ones).unwrap();
    let dx = l / (nodes - 1) as f64;
    // Projection of the interpolant: one inside, linear ramps in the two end
    // cells. The kinks are not representable, so the energy sits just below.
    let target = l - 4.0 * dx / 3.0;
    let e = energy(&y);
    assert!(
        e <= target + 1e-12 && e > target - 0.05 * dx,
        "{e} vs {target}"
    );
}

#[test]
fn picard_reproduces_the_linear_step_when_the_nonlinearity_is_fed_back() {
    let st = desk_stepper();
    let y = smooth_h(st.space(), 4).scaled(0.3);
    let h = 0.2;
    let lin = st.step_linear(&y, h, None).unwrap();
    let f = st
        .nonlinear_term(&y)
        .add(&st.nonlinear_term(&lin))
        .scaled(0.5);
    let nl = st.step_nonlinear(&y, h, Some(&f)).unwrap();
    assert!(rel_err(&nl, &lin) < 1e-8, "{}", rel_err(&nl, &lin));
}

#[test]
fn large_data_violates_smallness() {
    let st = desk_stepper();
    let y = smooth_h(st.space(), 1).scaled(10.0);
    assert!(matches!(
        st.step_nonlinear(&y, 0.0, None),
        Err(Error::Smallness { .. })
    ));
}

#[test]
fn picard_cap_reports_divergence() {
    let space = n2_space(64);
    let cfg = SolverConfig {
        dt: 0.5,
        picard_max_iter: 2,
        picard_tol: 1e-15,
        smallness_eta: 10.0,
        ..SolverConfig::default()
    };
    let st = Stepper::new(&space, cfg).unwrap();
    let y = smooth_h(&space, 2).scaled(3.0);
    assert!(matches!(
        st.step_nonlinear(&y, 0.0, None),
        Err(Error::FixedPointDivergence { .. })
    ));
}

/// `y(t, x) = a(t) sin(m pi x / L)` with `a(t) = 0.1 + 0.05 sin(2t)`.
struct Manufactured {
    len: f64,
    mode: f64,
}

impl Manufactured {
    fn a(&self, t: f64) -> f64 {
        0.1 + 0.05 * (2.0 * t).sin()
    }
    fn da(&self, t: f64) -> f64 {
        0.1 * (2.0 * t).cos()
    }
    fn exact(&self, space: &Arc<KdvSpace>, t: f64) -> StateVector {
        let k = self.mode * PI / self.len;
        StateVector::project(space, |x| self.a(t) * (k * x).sin())
    }
    fn forcing(&self, space: &Arc<KdvSpace>, t: f64) -> StateVector {
        let k = self.mode * PI / self.len;
        let (a, da) = (self.a(t), self.da(t));
        StateVector::project(space, |x| {
            let (s, c) = (k * x).sin_cos();
            da * s + a * k * c - a * k.powi(3) * c + a * a * k * s * c
        })
    }
    fn slope_right(&self, t: f64) -> f64 {
        let k = self.mode * PI / self.len;
        self.a(t) * k * (k * self.len).cos()
    }

    fn error(&self, nodes: usize, dt: f64, theta: f64, t_end: f64) -> f64 {
        let space = KdvSpace::new(self.len, nodes).unwrap();
        let st = Stepper::new(
            &space,
            SolverConfig {
                dt,
                theta,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        let steps = (t_end / dt).round() as usize;
        let mut y = self.exact(&space, 0.0);
        for n in 0..steps {
            let tm = (n as f64 + 0.5) * dt;
            let f = self.forcing(&space, tm);
            y = st
                .step_nonlinear(&y, self.slope_right(tm), Some(&f))
                .unwrap();
        }
        let ex = self.exact(&space, steps as f64 * dt);
        y.sub(&ex).norm() / ex.norm()
    }
}

#[test]
fn manufactured_solution_converges_in_time() {
    let m = Manufactured {
        len: 5.0,
        mode: 1.0,
    };
    let dts = [0.04, 0.02, 0.01];
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| m.error(64, dt, SolverConfig::DEFAULT_THETA, 1.0))
        .collect();
    let order = log_slope(&dts, &errs);
    println!("time errors {errs:?} order {order}");
    assert!(order >= 0.9, "order {order}, errors {errs:?}");
}

#[test]
fn manufactured_solution_converges_in_space() {
    let m = Manufactured {
        len: 5.0,
        mode: 3.0,
    };
    let nodes = [16usize, 24, 32];
    let hs: Vec<f64> = nodes.iter().map(|n| 5.0 / (*n - 1) as f64).collect();
    let errs: Vec<f64> = nodes.iter().map(|&n| m.error(n, 1e-3, 0.5, 0.5)).collect();
    let order = log_slope(&hs, &errs);
    println!("space errors {errs:?} order {order}");
    assert!(order >= 2.0, "order {order}, errors {errs:?}");
}
