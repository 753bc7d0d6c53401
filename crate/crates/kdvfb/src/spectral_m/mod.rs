//! Critical lengths, the uncontrollable subspace M and the rotation model
//! of the free evolution on M.

pub mod modes;
pub mod pairs;
mod subspace;

pub use modes::AnalyticMode;
pub use pairs::{
    classify_length, enumerate_pairs, ClassTag, CriticalPair, LengthClass, DEFAULT_PAIR_TOL,
};
pub use subspace::{build_m_basis, ModalSubspace};
