//! Factories for the working states: vacuum, coherent, single photon, and
//! the two-mode squeezed vacuum (EPR) resource, plus the squeezing
//! parametrization that links χ to the anti-squeezing variance V.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::fock::{coherent_tail_weight, C64, FockKet};

/// Squeezing parametrization of the EPR source: χ ∈ [0, 1) and the
/// anti-squeezing variance V = (1 + χ)/(1 − χ) in shot-noise units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EprParams {
    chi: f64,
    v: f64,
}

impl EprParams {
    pub fn from_chi(chi: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&chi) {
            return Err(Error::InvalidParameter {
                name: "chi",
                value: chi,
                constraint: "0 <= chi < 1",
            });
        }
        Ok(Self {
            chi,
            v: (1.0 + chi) / (1.0 - chi),
        })
    }

    pub fn from_v(v: f64) -> Result<Self> {
        if v < 1.0 {
            return Err(Error::InvalidParameter {
                name: "V",
                value: v,
                constraint: "V >= 1 (shot-noise units)",
            });
        }
        Ok(Self {
            chi: (v - 1.0) / (v + 1.0),
            v,
        })
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    /// Mean photon number χ²/(1 − χ²) of either reduced arm.
    pub fn arm_mean_photon(&self) -> f64 {
        let c2 = self.chi * self.chi;
        c2 / (1.0 - c2)
    }
}

/// |0⟩ at the given cutoff.
pub fn vacuum_ket(dim: usize) -> Result<FockKet> {
    if dim == 0 {
        return Err(Error::InvalidDimension {
            dim,
            reason: "need at least one level",
        });
    }
    let mut amps = Array1::<C64>::zeros(dim);
    amps[0] = C64::new(1.0, 0.0);
    FockKet::new(vec![dim], amps)
}

/// |1⟩ at the given cutoff.
pub fn single_photon_ket(dim: usize) -> Result<FockKet> {
    if dim < 2 {
        return Err(Error::InvalidDimension {
            dim,
            reason: "single photon needs at least two levels",
        });
    }
    let mut amps = Array1::<C64>::zeros(dim);
    amps[1] = C64::new(1.0, 0.0);
    FockKet::new(vec![dim], amps)
}

/// Raw truncated coherent amplitudes e^{-|α|²/2} αⁿ/√n!, not renormalized.
pub(crate) fn coherent_amps(alpha: C64, dim: usize) -> Array1<C64> {
    let mut amps = Array1::<C64>::zeros(dim);
    let mut a = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..dim {
        amps[n] = a;
        a *= alpha / C64::new((n as f64 + 1.0).sqrt(), 0.0);
    }
    amps
}

/// Truncated, renormalized coherent state |α⟩. Guarded like
/// [`crate::fock::displacement_op`]: fails when |α|² > dim/4 with the
/// estimated tail weight.
pub fn coherent_ket(alpha: C64, dim: usize) -> Result<FockKet> {
    if dim == 0 {
        return Err(Error::InvalidDimension {
            dim,
            reason: "need at least one level",
        });
    }
    if alpha.norm_sqr() > dim as f64 / 4.0 {
        return Err(Error::TruncationLeakage {
            leakage: coherent_tail_weight(alpha, dim),
            tolerance: coherent_tail_weight(C64::new((dim as f64 / 4.0).sqrt(), 0.0), dim),
        });
    }
    let amps = coherent_amps(alpha, dim);
    let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    FockKet::new(vec![dim], amps.mapv(|z| z / norm))
}

/// Truncated, renormalized EPR ket √(1−χ²) Σ χⁿ |n⟩|n⟩ on cutoffs
/// (dim_a, dim_b); the diagonal runs to min(dim_a, dim_b) − 1.
pub fn epr_ket(chi: f64, dim_a: usize, dim_b: usize) -> Result<FockKet> {
    if !(0.0..1.0).contains(&chi) {
        return Err(Error::InvalidParameter {
            name: "chi",
            value: chi,
            constraint: "0 <= chi < 1",
        });
    }
    if dim_a == 0 || dim_b == 0 {
        return Err(Error::InvalidDimension {
            dim: dim_a.min(dim_b),
            reason: "need at least one level per arm",
        });
    }
    let mut amps = Array1::<C64>::zeros(dim_a * dim_b);
    let mut coeff = (1.0 - chi * chi).sqrt();
    for n in 0..dim_a.min(dim_b) {
        amps[n * dim_b + n] = C64::new(coeff, 0.0);
        coeff *= chi;
    }
    let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    FockKet::new(vec![dim_a, dim_b], amps.mapv(|z| z / norm))
}

/// Weight removed by truncating the EPR diagonal at min(dim_a, dim_b):
/// χ^{2 min} before renormalization.
pub fn epr_renorm_correction(chi: f64, dim_a: usize, dim_b: usize) -> f64 {
    chi.powi(2 * dim_a.min(dim_b) as i32)
}
