//! Simulation of two orthogonal-state QKD protocols: a two-stage scheme
//! protected by decoy particles, and a single-stage scheme protected by
//! secret block order rearrangement.
//!
//! The crate is layered bottom-up: [`qstate`] is a small dense state-vector
//! simulator, [`codebook`] names the states and gates, [`noise`] models the
//! channels and Bob's corrections, [`adversary`] implements eavesdropping
//! strategies, [`engine`] runs the protocols and [`analysis`] turns reports
//! into statistics, ledgers and comparison tables.

pub mod adversary;
pub mod analysis;
pub mod codebook;
pub mod engine;
pub mod noise;
pub mod qstate;

pub use adversary::{AttackKind, AttackStrategy};
pub use analysis::ResourceLedger;
pub use codebook::{Codebook, CodingSymbol, NoiseMode, Protocol};
pub use engine::{run, run_trials, ProtocolConfig, RunReport, Transcript};
pub use qstate::{Label, OrthonormalBasis, StateVector, Unitary};
