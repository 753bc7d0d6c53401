mod common;

use std::sync::Arc;

use common::*;
use kdvfb::cli_experiments::default_dt;
use kdvfb::control_synthesis::second_order_drift;
use kdvfb::feedback_law::{
    build_steering_library, default_trust_radius, estimate_delta, estimate_lipschitz,
    sample_unit_sphere, FeedbackParams, LibraryConfig, SteeringLibrary,
};
use kdvfb::grid_kdv::{KdvSpace, StateVector};
use kdvfb::spectral_m::CriticalPair;
use kdvfb::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn directions(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_unit_sphere(&mut rng, 2)).collect()
}

#[test]
fn quarter_period_and_schedule() {
    let lib = desk_library();
    let q = n2_period() / 4.0;
    assert!((q - 7.558).abs() < 1e-3, "{q}");
    let p = &lib.planes[0];
    assert!((p.quarter - q).abs() < 1e-12);
    assert_eq!(lib.period_steps, 1000);
    let t0 = lib.window_steps as f64 * lib.dt;
    assert!(lib.period() >= 3.0 * q + t0 - 1e-9);

    let mut spans: Vec<(usize, usize)> =
        lib.windows().map(|(_, _, w)| (w.start, w.end())).collect();
    spans.sort();
    assert!(spans.windows(2).all(|s| s[0].1 <= s[1].0), "{spans:?}");
    assert!(spans.iter().all(|s| s.1 <= lib.period_steps));
}

#[test]
fn targets_are_quarter_turns() {
    let lib = desk_library();
    let t = &lib.planes[0].targets;
    assert!((norm(&t[0]) - 1.0).abs() < 1e-12);
    assert!(dot(&t[0], &t[1]).abs() < 1e-12);
    for i in 0..2 {
        assert!(t[i]
            .iter()
            .zip(&t[i + 2])
            .all(|(a, b)| (a + b).abs() < 1e-12));
    }
}

#[test]
fn decomposition_reconstructs_the_rotated_direction() {
    let lib = desk_library();
    for z in directions(50, 3) {
        let a = lib.decompose_on_targets(&z).unwrap()[0];
        assert!(a.iter().all(|v| *v >= 0.0));
        assert!(a[0] * a[2] == 0.0 && a[1] * a[3] == 0.0);
        let mut sum = [0.0; 2];
        for (ai, t) in a.iter().zip(&lib.planes[0].targets) {
            sum[0] += ai * t[0];
            sum[1] += ai * t[1];
        }
        let w = lib.rotate(&z, lib.period());
        assert!((sum[0] + w[0]).abs() < 1e-12 && (sum[1] + w[1]).abs() < 1e-12);
        // Orthonormal targets: the weights carry the unit norm.
        assert!((a.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(matches!(
        lib.decompose_on_targets(&[0.5, 0.0]),
        Err(Error::Domain(_))
    ));
    assert!(matches!(
        lib.decompose_on_targets(&[1.0]),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn v_vanishes_between_windows_and_is_bounded() {
    let lib = desk_library();
    let active = |k: usize| lib.windows().any(|(_, _, w)| w.contains(k));
    for z in directions(20, 5) {
        let v = lib.v_signal(&z).unwrap();
        assert_eq!(v.steps(), lib.period_steps);
        for (k, s) in v.samples.iter().enumerate() {
            if !active(k) {
                assert_eq!(*s, 0.0, "step {k}");
            }
            assert!(s.abs() <= lib.v_sup() * (1.0 + 1e-12));
        }
        let t = 123.0 * lib.dt;
        assert_eq!(lib.v(t, &z).unwrap(), v.samples[123]);
    }
    let z = [1.0, 0.0];
    assert!(matches!(lib.v(-1.0, &z), Err(Error::Domain(_))));
    assert!(matches!(
        lib.v(2.0 * lib.period(), &z),
        Err(Error::Domain(_))
    ));
}

#[test]
fn v_is_lipschitz_on_the_sphere() {
    let lib = desk_library();
    let l100 = estimate_lipschitz(&lib, 100, 1);
    let l200 = estimate_lipschitz(&lib, 200, 1);
    assert!(l100.is_finite() && l100 > 0.0);
    assert!(l200 >= l100 && l200 <= 1.1 * l100, "{l100} vs {l200}");
    assert!(l200 <= lib.lipschitz_bound() * 2.0 + 1e-12);
}

#[test]
fn library_descends_on_sampled_directions() {
    let lib = desk_library();
    let rep = estimate_delta(&lib, desk_stepper(), 64, 11).unwrap();
    assert_eq!(rep.inner.len(), 64);
    assert!(rep.max_first_order <= 1e-5, "{}", rep.max_first_order);
    assert!(rep.max_target_error <= 1e-4, "{}", rep.max_target_error);
    assert!(rep.delta > 0.0);
    assert!(rep
        .inner
        .iter()
        .all(|v| *v <= -2.0 * rep.delta * (1.0 - 1e-12)));
    assert!(
        (rep.delta - lib.delta).abs() < 0.05 * lib.delta,
        "{} vs {}",
        rep.delta,
        lib.delta
    );
}

/// One window control driven through the cascade lands on its target.
#[test]
fn window_controls_reach_their_targets() {
    let lib = desk_library();
    let st = desk_stepper();
    for i in 0..4 {
        let r = second_order_drift(st, &lib.control(0, i)).unwrap();
        assert!(r.alpha_t.norm() <= 1e-5);
        let want = &lib.planes[0].targets[i];
        let err = norm(&[r.m_component[0] - want[0], r.m_component[1] - want[1]]);
        assert!(err <= 1e-4, "window {i}: {:?} vs {want:?}", r.m_component);
        let psi = lib.target_state(st, 0, i).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn feedback_vanishes_on_h_and_is_periodic() {
    let lib = desk_library();
    let st = desk_stepper();
    let fb = FeedbackParams::new(0.1, lib.clone()).unwrap();
    let h = smooth_h(st.space(), 2).scaled(1e-3);
    assert_eq!(fb.u_eps(3.0, &h), 0.0);
    let y = h.add(&StateVector::from_modal(st.space(), &[2e-4, -1e-4]).unwrap());
    let period = lib.period();
    for k in [0usize, 17, 300, 999] {
        let t = k as f64 * lib.dt;
        let a = fb.u_eps(t, &y);
        assert_eq!(a, fb.u_eps_at_step(k, &y));
        assert_eq!(a, fb.u_eps_at_step(k + 3 * lib.period_steps, &y));
        assert!((a - fb.u_eps(t + 2.0 * period, &y)).abs() <= 1e-12 * a.abs().max(1e-300));
        assert!(a.abs() <= fb.bound(&y) * (1.0 + 1e-12));
    }
}

#[test]
fn feedback_scales_with_gain_and_amplitude() {
    let lib = desk_library();
    let st = desk_stepper();
    let y = StateVector::from_modal(st.space(), &[0.3e-2, 0.4e-2]).unwrap();
    let f1 = FeedbackParams::new(0.05, lib.clone()).unwrap();
    let f2 = FeedbackParams::new(0.1, lib.clone()).unwrap();
    let k = (0..lib.period_steps)
        .max_by(|&a, &b| {
            f1.u_eps_at_step(a, &y)
                .abs()
                .total_cmp(&f1.u_eps_at_step(b, &y).abs())
        })
        .unwrap();
    let t = k as f64 * lib.dt;
    let u1 = f1.u_eps(t, &y);
    assert!(u1 != 0.0);
    assert!((f2.u_eps(t, &y) - 2.0 * u1).abs() < 1e-12 * u1.abs());
    // sqrt scaling inside the unit ball, saturation outside.
    assert!((f1.u_eps(t, &y.scaled(4.0)) - 2.0 * u1).abs() < 1e-12 * u1.abs());
    let big = y.scaled(1.0 / y.norm_m());
    assert!((f1.u_eps(t, &big.scaled(5.0)) - f1.u_eps(t, &big)).abs() < 1e-12);
}

#[test]
fn feedback_gain_is_checked() {
    let lib = desk_library();
    for eps in [0.0, -0.1, 1.0, f64::NAN] {
        assert!(matches!(
            FeedbackParams::new(eps, lib.clone()),
            Err(Error::Config(_))
        ));
    }
    let fb = FeedbackParams::new(0.1, lib).unwrap();
    assert_eq!(fb.r_eps, default_trust_radius(0.1));
    assert!((fb.r_eps - 0.5e-12).abs() < 1e-24);
    assert_eq!(fb.with_trust_radius(0.25).r_eps, 0.25);
}

#[test]
fn library_round_trips_through_files() {
    let lib = desk_library();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lib.bin");
    lib.save(&path).unwrap();
    let back = SteeringLibrary::load(&path).unwrap();
    assert_eq!(&back, lib.as_ref());
    assert_eq!(back.to_bytes(), lib.to_bytes());

    let bytes = lib.to_bytes();
    for cut in [0, 7, 40, bytes.len() - 1] {
        assert!(matches!(
            SteeringLibrary::from_bytes(&bytes[..cut]),
            Err(Error::Format(_))
        ));
    }
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(matches!(
        SteeringLibrary::from_bytes(&extra),
        Err(Error::Format(_))
    ));
    let mut bad = bytes;
    bad[0] = b'X';
    assert!(matches!(
        SteeringLibrary::from_bytes(&bad),
        Err(Error::Format(_))
    ));
    assert!(matches!(
        SteeringLibrary::load(&dir.path().join("missing.bin")),
        Err(Error::Io { .. })
    ));

    let csv = dir.path().join("lib.csv");
    lib.write_csv(&csv).unwrap();
    let rows = std::fs::read_to_string(&csv).unwrap().lines().count();
    assert_eq!(rows, lib.period_steps + 1);
}

#[test]
fn library_must_match_the_solver() {
    let lib = desk_library();
    let other = stepper(&n2_space(128), desk_dt());
    assert!(matches!(
        lib.check_compatible(&other),
        Err(Error::Config(_))
    ));
    assert!(estimate_delta(&lib, &other, 4, 1).is_err());
}

#[test]
fn non_critical_lengths_are_unsupported() {
    for len in [5.0, 2.0 * std::f64::consts::PI] {
        let space = KdvSpace::new(len, 32).unwrap();
        let st = stepper(&space, 0.01);
        assert!(matches!(
            build_steering_library(&st, &LibraryConfig::default()),
            Err(Error::UnsupportedClass(_))
        ));
    }
}

#[test]
fn two_plane_library_descends() {
    let len = CriticalPair::new(9, 1).length();
    let space = KdvSpace::new(len, 96).unwrap();
    let st = stepper(&space, default_dt(&space).unwrap());
    let lib = Arc::new(build_steering_library(&st, &LibraryConfig::default()).unwrap());
    assert_eq!(lib.modal_dim, 4);
    assert_eq!(lib.planes.len(), 2);
    let rep = estimate_delta(&lib, &st, 16, 2).unwrap();
    assert!(rep.delta > 0.0);
    assert!(
        rep.max_first_order <= 1e-5 && rep.max_target_error <= 1e-4,
        "{rep:?}"
    );
}
