mod common;

use common::*;
use kdvfb::control_synthesis::{
    find_u0, linear_response, nonlinear_response, second_order_drift, steer_linear,
    steer_linear_report, ControlSignal, SecondOrderSynthesizer, SteeringOptions, SynthesisOptions,
};
use kdvfb::grid_kdv::StateVector;
use kdvfb::Error;

const WINDOW: usize = 142;
const QUARTER: usize = 286;

fn synthesizer() -> SecondOrderSynthesizer<'static> {
    SecondOrderSynthesizer::new(desk_stepper(), WINDOW, SynthesisOptions::default()).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn steering_zero_to_zero_needs_no_control() {
    let st = desk_stepper();
    let z = StateVector::zeros(st.space());
    let u = steer_linear(st, &z, &z, QUARTER as f64 * st.dt()).unwrap();
    assert_eq!(u.steps(), QUARTER);
    assert_eq!(u.sup_norm(), 0.0);
}

#[test]
fn steering_drives_h_data_to_rest() {
    let st = desk_stepper();
    let z = StateVector::zeros(st.space());
    for seed in [1, 2, 3] {
        let y0 = smooth_h(st.space(), seed);
        let u = steer_linear(st, &y0, &z, QUARTER as f64 * st.dt()).unwrap();
        let y1 = linear_response(st, &y0, &u).unwrap();
        assert!(y1.norm() <= 1e-6 * y0.norm(), "seed {seed}: {}", y1.norm());
    }
}

#[test]
fn steering_rejects_m_endpoints_and_bad_horizons() {
    let st = desk_stepper();
    let z = StateVector::zeros(st.space());
    let phi = StateVector::from_modal(st.space(), &[1.0, 0.0]).unwrap();
    let t = QUARTER as f64 * st.dt();
    assert!(matches!(
        steer_linear(st, &phi, &z, t),
        Err(Error::Domain(_))
    ));
    assert!(matches!(
        steer_linear(st, &z, &phi, t),
        Err(Error::Domain(_))
    ));
    assert!(matches!(
        steer_linear(st, &z, &z, 10.5 * st.dt()),
        Err(Error::Domain(_))
    ));
}

/// Coarser control blocks cannot steer better than finer ones (nested
/// block sizes).
#[test]
fn steering_improves_with_resolution() {
    let st = desk_stepper();
    let y0 = smooth_h(st.space(), 4);
    let z = StateVector::zeros(st.space());
    let t = QUARTER as f64 * st.dt();
    let res: Vec<f64> = [286, 143, 13]
        .iter()
        .map(|&block| {
            let opts = SteeringOptions {
                block,
                tikhonov: 1e-14,
                ..SteeringOptions::default()
            };
            steer_linear_report(st, &y0, &z, t, &opts)
                .unwrap()
                .predicted_residual
        })
        .collect();
    assert!(
        res.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6)),
        "{res:?}"
    );
    assert!(res[2] < 1e-4, "{res:?}");
}

/// The minimum-norm control cannot exceed any admissible competitor, so it
/// is bounded by the data through the observability constant.
#[test]
fn steering_control_scales_with_data() {
    let st = desk_stepper();
    let z = StateVector::zeros(st.space());
    let t = QUARTER as f64 * st.dt();
    let y0 = smooth_h(st.space(), 5);
    let u1 = steer_linear(st, &y0, &z, t).unwrap();
    let u2 = steer_linear(st, &y0.scaled(3.0), &z, t).unwrap();
    assert!((u2.l2_norm() - 3.0 * u1.l2_norm()).abs() < 1e-8 * u2.l2_norm());
    let u_long = steer_linear(st, &y0, &z, 2.0 * t).unwrap();
    assert!(u_long.l2_norm() <= u1.l2_norm() * (1.0 + 1e-6));
}

#[test]
fn cascade_of_zero_control_vanishes() {
    let st = desk_stepper();
    let r = second_order_drift(st, &ControlSignal::zeros(st.dt(), 50)).unwrap();
    assert!(r.alpha_t.is_zero() && r.beta_t.is_zero());
    let wrong = ControlSignal::zeros(2.0 * st.dt(), 50);
    assert!(matches!(
        second_order_drift(st, &wrong),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn cascade_is_homogeneous() {
    let st = desk_stepper();
    let u = find_u0(st, 0, WINDOW as f64 * st.dt()).unwrap().control;
    let a = second_order_drift(st, &u).unwrap();
    for lam in [0.3, -2.0] {
        let b = second_order_drift(st, &u.scaled(lam)).unwrap();
        assert!(b.alpha_t.sub(&a.alpha_t.scaled(lam)).norm() <= 1e-12 * lam.abs());
        assert!(
            b.beta_t.sub(&a.beta_t.scaled(lam * lam)).norm() <= 1e-10 * lam * lam * a.beta_t.norm()
        );
    }
}

#[test]
fn cascade_is_shift_invariant() {
    let st = desk_stepper();
    let syn = synthesizer();
    let u = syn.find_u0(0).unwrap().control;
    let base = second_order_drift(st, &u).unwrap().m_component;
    let delayed = second_order_drift(st, &u.shifted(37, WINDOW + 37).unwrap())
        .unwrap()
        .m_component;
    assert!(dist(&base, &delayed) <= 1e-8 * norm(&base));
    let waited = second_order_drift(st, &u.padded(91)).unwrap().m_component;
    let rotated = syn.free_rotation(&base, 91.0);
    assert!(dist(&waited, &rotated) <= 1e-8 * norm(&base));
}

/// `y(T) - lambda alpha(T) - lambda^2 beta(T) = O(lambda^3)`.
#[test]
fn expansion_remainder_is_cubic() {
    let st = desk_stepper();
    let u = find_u0(st, 0, WINDOW as f64 * st.dt()).unwrap().control;
    let r = second_order_drift(st, &u).unwrap();
    let z = StateVector::zeros(st.space());
    let lams = [1e-1, 10f64.powf(-1.5), 1e-2];
    let rems: Vec<f64> = lams
        .iter()
        .map(|&l| {
            let y = nonlinear_response(st, &z, &u.scaled(l)).unwrap();
            y.sub(&r.alpha_t.scaled(l))
                .sub(&r.beta_t.scaled(l * l))
                .norm()
        })
        .collect();
    let slope = log_slope(&lams, &rems);
    assert!(slope >= 2.7, "slope {slope}, remainders {rems:?}");
}

#[test]
fn second_order_control_reaches_m() {
    let st = desk_stepper();
    let res = find_u0(st, 0, WINDOW as f64 * st.dt()).unwrap();
    assert!((res.control.l2_norm() - 1.0).abs() < 1e-10);
    assert!(res.gain >= 1e-3, "gain {}", res.gain);
    let r = second_order_drift(st, &res.control).unwrap();
    assert!(r.alpha_t.norm() <= 1e-6, "alpha {}", r.alpha_t.norm());
    assert!(r.beta_t.norm_m() >= 1e-3);
    assert!(dist(&r.m_component, &res.m_component) <= 1e-8 * res.gain);
    assert!(res.alpha_residual <= 1e-6);
}

#[test]
fn second_order_gain_floor_is_enforced() {
    let st = desk_stepper();
    let opts = SynthesisOptions {
        kappa_min: 1e3,
        ..SynthesisOptions::default()
    };
    let syn = SecondOrderSynthesizer::new(st, WINDOW, opts).unwrap();
    assert!(matches!(syn.find_u0(0), Err(Error::Synthesis(_))));
    assert!(matches!(syn.find_u0(5), Err(Error::Domain(_))));
    assert!(SecondOrderSynthesizer::new(st, 3, SynthesisOptions::default()).is_err());
}

#[test]
fn directed_controls_hit_their_direction() {
    let syn = synthesizer();
    let u0 = syn.find_u0(0).unwrap();
    let base = u0.m_component[1].atan2(u0.m_component[0]);
    for offset in [0.0f64, -0.3, -0.8] {
        let angle = base + offset;
        let e = [angle.cos(), angle.sin()];
        let res = syn.directed(&e).unwrap();
        let (alpha, m) = syn.verify(&res.control).unwrap();
        assert!(alpha <= 1e-6);
        let g = norm(&m);
        assert!(
            dist(&m, &[g * e[0], g * e[1]]) <= 1e-8 * g,
            "angle {angle}: {m:?}"
        );
    }
    let back = base + std::f64::consts::PI;
    assert!(matches!(
        syn.directed(&[back.cos(), back.sin()]),
        Err(Error::DegenerateTarget { .. })
    ));
    assert!(syn.directed(&[0.0, 0.0]).is_err());
    assert!(matches!(syn.directed(&[1.0]), Err(Error::Dimension(_))));
}

#[test]
fn normalized_control_lands_on_phi1() {
    let st = desk_stepper();
    let syn = synthesizer();
    let n = syn.normalize_u0_to_target(0).unwrap();
    assert!((n.control.l2_norm() - n.gain.sqrt().recip()).abs() < 1e-10 * n.control.l2_norm());
    assert_eq!(n.control.steps(), WINDOW + n.wait_steps);
    assert!((n.horizon - n.control.duration()).abs() < 1e-12);
    let r = second_order_drift(st, &n.control).unwrap();
    assert!(
        dist(&r.m_component, &[1.0, 0.0]) <= 1e-4,
        "{:?}",
        r.m_component
    );
    assert!(r.alpha_t.norm() <= 1e-6 * n.control.l2_norm());
}
