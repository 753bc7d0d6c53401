mod common;

use common::*;
use kdvfb::cli_experiments::mixed_state;
use kdvfb::closed_loop::{
    coupled_integrate, energy_envelope_check, integrate_closed_loop, EnergyEnvelope, Feedback,
    LoopConfig, LoopMode, TrajectoryRecord, TrajectorySample,
};
use kdvfb::feedback_law::FeedbackParams;
use kdvfb::grid_kdv::StateVector;
use kdvfb::spectral_m::ModalSubspace;
use kdvfb::Error;

fn feedback(eps: f64) -> Feedback {
    Feedback::Eps(FeedbackParams::new(eps, desk_library()).unwrap())
}

fn period() -> f64 {
    desk_library().period()
}

fn small_state(seed: u64) -> StateVector {
    mixed_state(desk_stepper().space(), seed, 2e-7, 8e-7).unwrap()
}

#[test]
fn rest_is_an_equilibrium() {
    let st = desk_stepper();
    let z = StateVector::zeros(st.space());
    let rec = integrate_closed_loop(st, &z, 0.0, &LoopConfig::new(feedback(0.1), 2.0)).unwrap();
    assert!(rec.final_state.is_zero());
    assert!(rec.samples.iter().all(|s| s.energy == 0.0 && s.u == 0.0));
}

#[test]
fn free_energy_never_grows() {
    let st = desk_stepper();
    let y0 = smooth_h(st.space(), 4)
        .scaled(0.05)
        .add(&StateVector::from_modal(st.space(), &[0.02, 0.01]).unwrap());
    let rec = integrate_closed_loop(st, &y0, 0.0, &LoopConfig::new(Feedback::Zero, 10.0)).unwrap();
    assert!(rec
        .samples
        .windows(2)
        .all(|w| w[1].energy <= w[0].energy + 1e-15));
    assert!(rec.samples.iter().all(|s| s.u == 0.0));
    let env = energy_envelope_check(&rec, &EnergyEnvelope::Dissipative, 1e-12);
    assert!(env.passed());
}

#[test]
fn record_layout() {
    let st = desk_stepper();
    let cfg = LoopConfig::new(feedback(0.05), 100.0 * st.dt()).keeping_states();
    let s = 40.0 * st.dt();
    let rec = integrate_closed_loop(st, &small_state(1), s, &cfg).unwrap();
    assert_eq!(rec.samples.len(), 101);
    assert_eq!(rec.states.len(), 101);
    assert!((rec.start() - s).abs() < 1e-12);
    assert!((rec.end() - s - 100.0 * st.dt()).abs() < 1e-9);
    assert_eq!(rec.every(25).len(), 5);
    assert!(rec.final_state.sub(&rec.states[100]).is_zero());
}

#[test]
fn loop_configuration_is_checked() {
    let st = desk_stepper();
    let y = small_state(1);
    let bad = LoopConfig::new(Feedback::Zero, 0.0);
    assert!(matches!(
        integrate_closed_loop(st, &y, 0.0, &bad),
        Err(Error::Config(_))
    ));
    let cfg = LoopConfig::new(Feedback::Zero, 1.0);
    assert!(matches!(
        integrate_closed_loop(st, &y, 0.37 * st.dt(), &cfg),
        Err(Error::Config(_))
    ));
    let other = stepper(&n2_space(128), desk_dt());
    let y = mixed_state(other.space(), 1, 1e-7, 1e-7).unwrap();
    let cfg = LoopConfig::new(feedback(0.1), 1.0);
    assert!(matches!(
        integrate_closed_loop(&other, &y, 0.0, &cfg),
        Err(Error::Config(_))
    ));
}

#[test]
fn large_data_is_reported_as_blow_up() {
    let st = desk_stepper();
    let y = smooth_h(st.space(), 1).scaled(10.0);
    let cfg = LoopConfig::new(Feedback::Zero, 1.0);
    assert!(matches!(
        integrate_closed_loop(st, &y, 0.0, &cfg),
        Err(Error::BlowUp { .. })
    ));
}

#[test]
fn feedback_respects_its_bound() {
    let st = desk_stepper();
    let y0 = small_state(2);
    let fb = feedback(0.1);
    let rec = integrate_closed_loop(st, &y0, 0.0, &LoopConfig::new(fb.clone(), period())).unwrap();
    let r = rec
        .samples
        .iter()
        .map(|s| s.energy.sqrt())
        .fold(0.0, f64::max);
    let cb = fb.bound_within(r);
    assert!(rec.samples.iter().all(|s| s.u.abs() <= cb * (1.0 + 1e-12)));
    assert!(rec.samples.iter().any(|s| s.u != 0.0));
    assert!(
        rec.max_energy_excess <= 1e-8 * y0.energy(),
        "{}",
        rec.max_energy_excess
    );
}

#[test]
fn coupled_formulation_agrees_with_the_full_loop() {
    let st = desk_stepper();
    let y0 = small_state(3);
    for mode in [LoopMode::Delayed, LoopMode::PerStep] {
        let cfg = LoopConfig::new(feedback(0.1), period())
            .with_mode(mode)
            .keeping_states();
        let full = integrate_closed_loop(st, &y0, 0.0, &cfg).unwrap();
        let split = coupled_integrate(st, &y0, 0.0, &cfg).unwrap();
        let d = full.sup_distance(&split).unwrap();
        assert!(d <= 1e-6 * y0.norm(), "{mode:?}: {d}");
    }
}

#[test]
fn linear_loop_rotates_m() {
    let st = desk_stepper();
    let sub = ModalSubspace::new(st.space()).unwrap();
    let y0 = small_state(4);
    let cfg = LoopConfig::new(feedback(0.1), period()).linear();
    let rec = coupled_integrate(st, &y0, 0.0, &cfg).unwrap();
    let want = sub.rotate(&y0.project_m(), period()).unwrap();
    assert!(rel_err(&rec.final_state.project_m(), &want) <= 1e-3);
    let full = integrate_closed_loop(st, &y0, 0.0, &cfg).unwrap();
    assert!(rel_err(&full.final_state.project_m(), &want) <= 1e-3);
}

/// Successive halvings of the sampling delay shrink the gap between runs,
/// measured against the size of the trajectory.
#[test]
fn delayed_runs_are_cauchy_in_n() {
    let st = desk_stepper();
    let y0 = small_state(5);
    let run = |n: usize| {
        let cfg = LoopConfig::new(feedback(0.1), period())
            .with_sampling_n(n, st.dt())
            .keeping_states();
        integrate_closed_loop(st, &y0, 0.0, &cfg).unwrap()
    };
    let recs: Vec<TrajectoryRecord> = [4, 8, 16, 32].iter().map(|&n| run(n)).collect();
    let scale = recs[3]
        .states
        .iter()
        .map(StateVector::norm)
        .fold(0.0, f64::max);
    let gaps: Vec<f64> = recs
        .windows(2)
        .map(|w| w[0].sup_distance(&w[1]).unwrap() / scale)
        .collect();
    assert!(gaps.windows(2).all(|g| g[1] < g[0]), "{gaps:?}");
    assert!(gaps[2] < 1e-2, "{gaps:?}");
}

#[test]
fn envelopes_hold_along_feedback_runs() {
    let st = desk_stepper();
    let y0 = small_state(6);
    let fb = feedback(0.05);
    let rec = integrate_closed_loop(st, &y0, 0.0, &LoopConfig::new(fb.clone(), period())).unwrap();
    let quad = 1e-8 * y0.energy();
    let c = fb.bound();
    assert!(energy_envelope_check(&rec, &EnergyEnvelope::Constant(c), 1e-8 + quad).passed());
    let general = EnergyEnvelope::General(Box::new(move |r: f64| c * r.sqrt().min(1.0)));
    let rep = energy_envelope_check(&rec, &general, 1e-8 + quad);
    assert!(rep.passed(), "{}", rep.max_violation);
}

#[test]
fn envelope_flags_growth() {
    let st = desk_stepper();
    let z = StateVector::zeros(st.space());
    let sample = |t: f64, energy: f64| TrajectorySample {
        t,
        energy,
        norm_h: energy.sqrt(),
        norm_m: 0.0,
        u: 0.0,
    };
    let rec = TrajectoryRecord {
        dt: 1.0,
        samples: vec![sample(0.0, 1.0), sample(1.0, 1.5), sample(2.0, 3.5)],
        states: Vec::new(),
        final_state: z,
        max_picard_iterations: 0,
        max_energy_excess: 0.0,
    };
    let rep = energy_envelope_check(&rec, &EnergyEnvelope::Constant(1.0), 1e-12);
    assert_eq!(rep.ok, vec![true, true, false]);
    assert!((rep.max_violation - 0.5).abs() < 1e-12);
    assert!(!energy_envelope_check(&rec, &EnergyEnvelope::Dissipative, 1e-12).passed());

    // Constant bound as a general one: H(a) = a / c^2.
    let g = EnergyEnvelope::General(Box::new(|_| 2.0));
    assert!((g.bound(1.0, 3.0) - 13.0).abs() < 1e-6);
    assert!((g.h(8.0) - 2.0).abs() < 1e-9);
}

#[test]
fn records_serialize_row_by_row() {
    let st = desk_stepper();
    let cfg = LoopConfig::new(feedback(0.1), 20.0 * st.dt());
    let rec = integrate_closed_loop(st, &small_state(7), 0.0, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let nd = dir.path().join("t.ndjson");
    rec.write_csv(&csv).unwrap();
    rec.write_ndjson(&nd).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,energy,norm_h,norm_m,u"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), rec.samples.len());
    assert_eq!(rows[5][1], rec.samples[5].energy);
    let nd_text = std::fs::read_to_string(&nd).unwrap();
    let parsed: Vec<serde_json::Value> = nd_text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(parsed.len(), rec.samples.len());
    assert_eq!(parsed[3]["u"].as_f64().unwrap(), rec.samples[3].u);
}
