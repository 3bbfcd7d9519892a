//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A mode cutoff dimension is too small for the requested operation.
    #[error("invalid dimension {dim}: {reason}")]
    InvalidDimension { dim: usize, reason: &'static str },

    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter {name} = {value}: must satisfy {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// Mode dimensions of two objects do not match.
    #[error("mode dimensions mismatch: {left:?} vs {right:?}")]
    ModeMismatch { left: Vec<usize>, right: Vec<usize> },

    /// A mode index is out of range for the object it addresses.
    #[error("mode index {index} out of range for {n_modes} modes")]
    ModeIndexOutOfRange { index: usize, n_modes: usize },

    /// Estimated weight pushed beyond the cutoff exceeds the fail-loud budget.
    #[error("truncation leakage {leakage:.3e} exceeds tolerance {tolerance:.3e}")]
    TruncationLeakage { leakage: f64, tolerance: f64 },

    /// A state or operator failed one of its structural invariants.
    #[error("validation failed: {0}")]
    Validation(String),

    /// The Bell grid does not resolve the identity well enough on the
    /// occupied subspace.
    #[error("bell grid too coarse: completeness defect {defect:.3e} exceeds {tolerance:.3e}")]
    GridTooCoarse { defect: f64, tolerance: f64 },

    /// Amplification would push the distilled squeezing parameter to or past
    /// the maximal-entanglement limit.
    #[error("unphysical amplifier output: chi_eff = {chi_eff} >= 1")]
    UnphysicalGain { chi_eff: f64 },

    /// A teleporter gain for which no loss-channel equivalence is claimed.
    #[error("gain lambda = {lambda} is outside the loss-equivalent regime (expected {expected})")]
    OutOfModel { lambda: f64, expected: f64 },

    /// A herald pattern that can never fire for the requested configuration.
    #[error("degenerate heralding configuration: {0}")]
    DegenerateHerald(String),

    /// A gain sweep left the valid window.
    #[error("gain sweep outside valid window [{lo}, {hi}]")]
    SweepOutOfWindow { lo: f64, hi: f64 },

    /// A multimode simulation would exceed the configured memory budget.
    #[error("simulation dimension {needed} exceeds budget {budget}")]
    ResourceBudget { needed: usize, budget: usize },

    /// Backing linear-algebra routine failed.
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}
