//! Truncated Fock-space toolkit for loss error correction of continuous
//! variable states.
//!
//! The crate simulates the distribution of EPR (two-mode squeezed vacuum)
//! entanglement through a lossy bosonic channel, its distillation by heralded
//! noiseless linear amplification (both the ideal diagonal amplifier and the
//! linear-optics quantum-scissors construction), and the use of the distilled
//! entanglement for gain-tuned continuous variable teleportation. The end
//! product is an effective channel of higher transmission than the raw line,
//! extracted numerically by Choi-state loss fitting and compared against the
//! closed-form trade-off bounds.
//!
//! Module layout:
//!
//! - [`fock`] — dense linear algebra over truncated multimode number bases:
//!   kets, density operators, mode operators, tensor composition, partial
//!   trace and Uhlmann fidelity.
//! - [`states`] — state factories (vacuum, coherent, single photon, EPR) and
//!   the squeezing parameters attached to them.
//! - [`channel`] — Kraus-form quantum channels, the pure-loss channel, Choi
//!   states and effective-loss fitting.
//! - [`nla`] — noiseless linear amplification: ideal heralded amplifier,
//!   success-probability bounds, distilled EPR parameters, and the
//!   quantum-scissors linear-optics implementation.
//! - [`teleport`] — gain-tuned CV teleportation: closed-form gains and a
//!   numerical teleporter built from a discretized dual-homodyne measurement.
//! - [`protocol`] — end-to-end composition and curve generation for the
//!   probability/transmission trade-offs.

pub mod channel;
pub mod error;
pub mod fock;
pub mod nla;
pub mod protocol;
pub mod states;
pub mod teleport;

pub use error::{Error, Result};
pub use fock::{C64, DensityOperator, FockKet, FockOperator};
