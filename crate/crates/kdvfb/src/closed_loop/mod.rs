//! Closed-loop integration under a feedback law, the coupled `(P_H y, P_M y)`
//! formulation used as an oracle, and the a-priori energy envelope.

mod coupled;
mod envelope;
mod integrate;
mod record;

pub use coupled::coupled_integrate;
pub use envelope::{energy_envelope_check, EnergyEnvelope, EnvelopeReport};
pub use integrate::{integrate_closed_loop, Feedback, LoopConfig, LoopMode};
pub use record::{TrajectoryRecord, TrajectorySample};
