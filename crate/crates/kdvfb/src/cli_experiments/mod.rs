//! Experiment configuration, decay and contraction experiments, report
//! files and the command-line interface.

pub mod cli;
mod config;
mod contraction;
mod decay;
mod problem;
mod report;
mod runner;

pub use config::{parse_length, parse_mode, ExperimentConfig, DEFAULT_STEPS_PER_QUARTER};
pub use contraction::{
    contraction_case, measure_constants, regime_of, regime_states, run_contraction_check,
    ContractionCase, ContractionReport, MeasuredConstants, Regime, CONTRACTION_TOLERANCE,
};
pub use decay::{
    fit_decay, fit_line, predicted_rate, run_decay_experiment, DecayFitReport, LineFit,
};
pub use problem::{
    build_stepper, default_dt, initial_state, m_direction, measure_rho1, mixed_state,
    smooth_h_direction, Problem,
};
pub use report::{emit_report, run_label, ExperimentReport, LabeledRecord};
pub use runner::{contraction_suite, decay_suite, fan_out};
