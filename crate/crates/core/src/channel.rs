//! Kraus-form quantum channels: the pure-loss channel, Choi states, channel
//! fidelity and effective-loss fitting.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::fock::linalg;
use crate::fock::{C64, DensityOperator, FockKet};
use crate::states::coherent_amps;

/// Tolerance on the Kraus completeness sum Σ K†K relative to the identity.
pub const KRAUS_SUM_TOL: f64 = 1e-9;

/// Completely positive map on a register of modes, represented by a finite
/// Kraus set. Trace-preserving channels satisfy Σ K†K = I; heralded
/// (trace-decreasing) channels satisfy Σ K†K ≤ I and carry their success
/// probability as the trace of the subnormalized output. Renormalization
/// happens only on explicit request ([`QuantumChannel::apply_normalized`]).
#[derive(Debug, Clone)]
pub struct QuantumChannel {
    mode_dims: Vec<usize>,
    kraus: Vec<Array2<C64>>,
    trace_preserving: bool,
    heralded: bool,
}

impl QuantumChannel {
    pub fn new(
        mode_dims: Vec<usize>,
        kraus: Vec<Array2<C64>>,
        trace_preserving: bool,
        heralded: bool,
    ) -> Result<Self> {
        let d: usize = mode_dims.iter().product();
        if kraus.is_empty() {
            return Err(Error::Validation("channel needs at least one Kraus operator".into()));
        }
        for k in &kraus {
            if k.nrows() != d || k.ncols() != d {
                return Err(Error::Validation(format!(
                    "Kraus shape {:?} does not match total dimension {}",
                    k.shape(),
                    d
                )));
            }
        }
        let ch = Self {
            mode_dims,
            kraus,
            trace_preserving,
            heralded,
        };
        let sum = ch.kraus_sum();
        let eye = Array2::<C64>::eye(d);
        if trace_preserving {
            let defect = linalg::max_abs(&(&sum - &eye));
            if defect > KRAUS_SUM_TOL {
                return Err(Error::Validation(format!(
                    "trace-preserving flag set but max |ΣK†K - I| = {defect:.3e}"
                )));
            }
        } else {
            // Σ K†K ≤ I: largest eigenvalue of the Hermitian sum at most 1
            let w = linalg::eigvalsh(&sum)?;
            let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if max > 1.0 + KRAUS_SUM_TOL {
                return Err(Error::Validation(format!(
                    "Kraus sum exceeds identity: max eigenvalue {max}"
                )));
            }
        }
        Ok(ch)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mode_dims: vec![dim],
            kraus: vec![Array2::<C64>::eye(dim)],
            trace_preserving: true,
            heralded: false,
        }
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn dim(&self) -> usize {
        self.mode_dims.iter().product()
    }

    pub fn kraus(&self) -> &[Array2<C64>] {
        &self.kraus
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    pub fn is_heralded(&self) -> bool {
        self.heralded
    }

    /// Σ K†K.
    pub fn kraus_sum(&self) -> Array2<C64> {
        let d = self.dim();
        let mut sum = Array2::<C64>::zeros((d, d));
        for k in &self.kraus {
            sum += &linalg::dagger(k).dot(k);
        }
        sum
    }

    /// Largest entrywise deviation of Σ K†K from the identity; for heralded
    /// channels this measures the success-probability deficit.
    pub fn kraus_deficit(&self) -> f64 {
        let eye = Array2::<C64>::eye(self.dim());
        linalg::max_abs(&(&self.kraus_sum() - &eye))
    }

    /// Σ K ρ K†, subnormalized when the channel is heralded.
    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.mode_dims() != self.mode_dims {
            return Err(Error::ModeMismatch {
                left: self.mode_dims.clone(),
                right: rho.mode_dims().to_vec(),
            });
        }
        let d = self.dim();
        let mut out = Array2::<C64>::zeros((d, d));
        for k in &self.kraus {
            out += &k.dot(&rho.matrix().to_owned()).dot(&linalg::dagger(k));
        }
        Ok(DensityOperator::from_parts_unchecked(
            self.mode_dims.clone(),
            out,
        ))
    }

    /// Apply and renormalize; returns the conditional state and the success
    /// probability (the trace lost to heralding).
    pub fn apply_normalized(&self, rho: &DensityOperator) -> Result<(DensityOperator, f64)> {
        let raw = self.apply(rho)?;
        let p = raw.trace() / rho.trace();
        Ok((raw.normalized()?, p))
    }

    pub fn apply_ket(&self, ket: &FockKet) -> Result<DensityOperator> {
        self.apply(&ket.to_density())
    }

    /// Composition self ∘ inner (inner acts first).
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        if self.mode_dims != inner.mode_dims {
            return Err(Error::ModeMismatch {
                left: self.mode_dims.clone(),
                right: inner.mode_dims.clone(),
            });
        }
        let mut kraus = Vec::with_capacity(self.kraus.len() * inner.kraus.len());
        for outer_k in &self.kraus {
            for inner_k in &inner.kraus {
                kraus.push(outer_k.dot(inner_k));
            }
        }
        QuantumChannel::new(
            self.mode_dims.clone(),
            kraus,
            self.trace_preserving && inner.trace_preserving,
            self.heralded || inner.heralded,
        )
    }
}

/// Pure-loss channel of transmission η on one mode:
/// K_k = √((1−η)^k / k!) η^{n̂/2} a^k, i.e.
/// ⟨n−k|K_k|n⟩ = √(C(n,k) η^{n−k} (1−η)^k).
pub fn loss_channel(eta: f64, dim: usize) -> Result<QuantumChannel> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            constraint: "0 <= eta <= 1",
        });
    }
    if dim == 0 {
        return Err(Error::InvalidDimension {
            dim,
            reason: "need at least one level",
        });
    }
    let mut kraus = Vec::new();
    for k in 0..dim {
        let mut m = Array2::<C64>::zeros((dim, dim));
        let mut nonzero = false;
        for n in k..dim {
            // C(n, k) via running product to stay in f64 comfortably
            let mut binom = 1.0_f64;
            for i in 0..k {
                binom *= (n - i) as f64 / (k - i) as f64;
            }
            let amp = (binom * eta.powi((n - k) as i32) * (1.0 - eta).powi(k as i32)).sqrt();
            if amp != 0.0 {
                m[(n - k, n)] = C64::new(amp, 0.0);
                nonzero = true;
            }
        }
        if nonzero {
            kraus.push(m);
        }
    }
    QuantumChannel::new(vec![dim], kraus, true, false)
}

/// Choi state (Λ ⊗ I)|Ω⟩⟨Ω| with |Ω⟩ = Σ|n,n⟩/√d. Subnormalized for
/// heralded channels. Mode order: (output, reference).
pub fn choi_state(channel: &QuantumChannel) -> Result<DensityOperator> {
    if channel.mode_dims().len() != 1 {
        return Err(Error::Validation(
            "choi_state expects a single-mode channel".into(),
        ));
    }
    let d = channel.dim();
    let sqrt_d = (d as f64).sqrt();
    let mut m = Array2::<C64>::zeros((d * d, d * d));
    for k in channel.kraus() {
        // (K ⊗ I)|Ω⟩ has component K[(i,j)]/√d at index i*d + j
        let mut v = Array1::<C64>::zeros(d * d);
        for i in 0..d {
            for j in 0..d {
                v[i * d + j] = k[(i, j)] / C64::new(sqrt_d, 0.0);
            }
        }
        for (r, a) in v.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            for (cidx, b) in v.iter().enumerate() {
                m[(r, cidx)] += a * b.conj();
            }
        }
    }
    Ok(DensityOperator::from_parts_unchecked(vec![d, d], m))
}

/// Uhlmann fidelity between the (normalized) Choi states of two channels.
pub fn choi_fidelity(a: &QuantumChannel, b: &QuantumChannel) -> Result<f64> {
    let ca = choi_state(a)?;
    let cb = choi_state(b)?;
    crate::fock::fidelity(&ca, &cb)
}

/// Result of fitting a one-mode channel against the pure-loss family.
#[derive(Debug, Clone, Copy)]
pub struct LossFit {
    /// Transmission of the nearest pure-loss channel.
    pub eta_est: f64,
    /// Choi-state infidelity 1 − F at the optimum.
    pub residual: f64,
}

/// Fit the nearest pure-loss channel by maximizing Choi fidelity over η with
/// a coarse scan plus golden-section refinement to 1e−6.
pub fn fit_loss(channel: &QuantumChannel) -> Result<LossFit> {
    if channel.mode_dims().len() != 1 {
        return Err(Error::Validation("fit_loss expects a one-mode channel".into()));
    }
    if !channel.is_trace_preserving() && !channel.is_heralded() {
        return Err(Error::Validation(
            "fit_loss input is trace-decreasing but not flagged heralded".into(),
        ));
    }
    let dim = channel.dim();
    let target = choi_state(channel)?.normalized()?;
    let sqrt_target = linalg::sqrt_psd(&target.matrix().to_owned())?;
    let objective = |eta: f64| -> Result<f64> {
        let reference = choi_state(&loss_channel(eta, dim)?)?;
        crate::fock::fidelity_with_sqrt(&sqrt_target, &reference.matrix().to_owned())
    };

    // coarse scan
    let coarse_n = 33;
    let mut best_i = 0;
    let mut best_f = f64::NEG_INFINITY;
    for i in 0..=coarse_n {
        let eta = i as f64 / coarse_n as f64;
        let f = objective(eta)?;
        if f > best_f {
            best_f = f;
            best_i = i;
        }
    }
    let step = 1.0 / coarse_n as f64;
    let mut lo = (best_i as f64 * step - step).max(0.0);
    let mut hi = (best_i as f64 * step + step).min(1.0);

    // golden-section refinement
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    while hi - lo > 1e-6 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = objective(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = objective(x1)?;
        }
    }
    // pick the best of the refined midpoint and the domain edges; boundary
    // optima (identity, total loss) are exact there and 1 - F is linear, not
    // quadratic, approaching them
    let mut eta_est = 0.5 * (lo + hi);
    let mut f_best = objective(eta_est)?;
    for cand in [0.0, 1.0, lo, hi] {
        let f = objective(cand)?;
        if f > f_best {
            f_best = f;
            eta_est = cand;
        }
    }
    Ok(LossFit {
        eta_est,
        residual: (1.0 - f_best).max(0.0),
    })
}

/// Cheap first-moment diagnostic: the ratio ⟨a⟩_out/⟨a⟩_in for a coherent
/// probe of amplitude `alpha`; equals √η for a pure-loss channel.
pub fn mean_field_gain(channel: &QuantumChannel, alpha: C64) -> Result<C64> {
    let dim = channel.dim();
    let amps = coherent_amps(alpha, dim);
    let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let probe = FockKet::new(vec![dim], amps.mapv(|z| z / norm))?;
    let out = channel.apply_ket(&probe)?;
    let a_op = crate::fock::annihilation_op(dim)?;
    let prod = a_op.matrix().dot(&out.matrix().to_owned());
    let mean_out: C64 = prod.diag().iter().sum::<C64>() / C64::new(out.trace(), 0.0);
    Ok(mean_out / alpha)
}
