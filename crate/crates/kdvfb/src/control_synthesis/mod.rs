//! Linear steering in the controllable part and synthesis of controls
//! acting on M through the second-order term of the expansion.

mod cascade;
mod second_order;
mod signal;
mod steer;

pub use cascade::{
    linear_response, nonlinear_response, second_order_drift, CascadeSummary, SecondOrderResult,
};
pub use second_order::{
    find_u0, NormalizedControl, SecondOrderControl, SecondOrderSynthesizer, SynthesisOptions,
};
pub use signal::ControlSignal;
pub use steer::{steer_linear, steer_linear_report, SteeringOptions, SteeringReport};
