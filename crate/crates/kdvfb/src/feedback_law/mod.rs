//! Steering library, the map `v(t, z)` on the unit sphere of M, the descent
//! margin and the time-varying feedback `u_eps`.

mod delta;
mod io;
mod law;
mod library;
mod nnls;

pub use delta::{
    estimate_delta, estimate_lipschitz, predicted_delta, predicted_effect, sample_unit_sphere,
    DeltaReport,
};
pub use law::{default_trust_radius, FeedbackParams};
pub use library::{
    build_steering_library, Layout, LibraryConfig, PlaneLibrary, SteeringLibrary, Window,
};
