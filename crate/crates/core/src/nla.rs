//! Heralded noiseless linear amplification.
//!
//! The ideal amplifier acts as |n⟩ → √G|n⟩ and is realized here, at a finite
//! cutoff, as the diagonal operator G^{n/2}/G^{n_max/2}: the largest-success
//! physical device on the retained space. Its action on one arm of lossy EPR
//! entanglement is equivalent to a better EPR source through a better line
//! (chi_eff, eta_eff), and the ensemble success probability is bounded by
//! signal-to-noise accounting. The linear-optics route builds the amplifier
//! from quantum scissors: single-photon ancillas, beamsplitters and photon
//! counting, fanned out over N paths.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::channel::{loss_channel, QuantumChannel};
use crate::error::{Error, Result};
use crate::fock::{
    beamsplitter_op, embed_two_mode, C64, DensityOperator, FockKet, FockOperator,
};
use crate::states::coherent_amps;

/// Hard cap on the total Hilbert dimension of multi-path scissors circuits.
pub const SCISSORS_DIM_BUDGET: usize = 4096;

/// Configuration of a noiseless linear amplifier device.
#[derive(Debug, Clone, Copy)]
pub struct NlaConfig {
    /// Intensity gain G ≥ 1 (the number-state map |n⟩ → G^{n/2}|n⟩).
    pub gain: f64,
    /// Fan-out width N ≥ 1 for the linear-optics construction.
    pub paths: usize,
    /// Per-mode cutoff dimension.
    pub dim: usize,
    /// Count both single-photon herald patterns of every scissor, assuming
    /// the standard feedforward phase correction on the mirrored pattern.
    /// The conditional state is identical; the success probability gains
    /// a factor 2 per path.
    pub both_patterns: bool,
}

impl NlaConfig {
    pub fn new(gain: f64, paths: usize, dim: usize) -> Result<Self> {
        if gain < 1.0 {
            return Err(Error::InvalidParameter {
                name: "gain",
                value: gain,
                constraint: "G >= 1 (deamplification out of scope)",
            });
        }
        if paths < 1 {
            return Err(Error::InvalidParameter {
                name: "paths",
                value: paths as f64,
                constraint: "N >= 1",
            });
        }
        if dim < 2 {
            return Err(Error::InvalidDimension {
                dim,
                reason: "amplifier needs at least two levels",
            });
        }
        Ok(Self {
            gain,
            paths,
            dim,
            both_patterns: true,
        })
    }

    /// Restrict heralding to the single designated detector pattern per
    /// scissor (no feedforward correction).
    pub fn designated_pattern_only(mut self) -> Self {
        self.both_patterns = false;
        self
    }
}

/// Conditional output of a heralded operation.
#[derive(Debug, Clone)]
pub struct HeraldedOutcome<S> {
    /// Normalized conditional state.
    pub state: S,
    /// Probability of the herald firing.
    pub p_success: f64,
}

/// Gaussian ensemble of coherent states before and after amplification,
/// described by quadrature variances in shot-noise units.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleSpec {
    pub v_t: f64,
    pub v_t_prime: f64,
}

impl EnsembleSpec {
    pub fn new(v_t: f64, v_t_prime: f64) -> Result<Self> {
        if v_t < 1.0 {
            return Err(Error::InvalidParameter {
                name: "V_t",
                value: v_t,
                constraint: "V_t >= 1",
            });
        }
        if v_t_prime < v_t {
            return Err(Error::InvalidParameter {
                name: "V_t_prime",
                value: v_t_prime,
                constraint: "V_t' >= V_t",
            });
        }
        Ok(Self { v_t, v_t_prime })
    }
}

/// Generic success bound (V_t − 1)/(V_t′ − 1) for amplifying a Gaussian
/// ensemble of variance V_t up to V_t′, capped to [0, 1]. V_t′ = 1 leaves
/// the bound unconstrained (capped at 1).
pub fn gaussian_ensemble_bound(spec: &EnsembleSpec) -> f64 {
    let denom = spec.v_t_prime - 1.0;
    if denom <= 0.0 {
        return 1.0;
    }
    ((spec.v_t - 1.0) / denom).clamp(0.0, 1.0)
}

/// The truncated ideal amplifier diag(G^{n/2}) / G^{n_max/2}, normalized by
/// its largest element so the device is physical with maximal success at the
/// given cutoff.
pub fn ideal_nla_op(gain: f64, dim: usize) -> Result<FockOperator> {
    if gain < 1.0 {
        return Err(Error::InvalidParameter {
            name: "gain",
            value: gain,
            constraint: "G >= 1 (deamplification out of scope)",
        });
    }
    if dim < 2 {
        return Err(Error::InvalidDimension {
            dim,
            reason: "amplifier needs at least two levels",
        });
    }
    let n_max = (dim - 1) as f64;
    let mut m = Array2::<C64>::zeros((dim, dim));
    for n in 0..dim {
        m[(n, n)] = C64::new(gain.powf((n as f64 - n_max) / 2.0), 0.0);
    }
    FockOperator::new(vec![dim], m, false)
}

/// Ideal heralded amplification of a one-mode pure state.
pub fn ideal_nla(gain: f64, input: &FockKet) -> Result<HeraldedOutcome<FockKet>> {
    if input.n_modes() != 1 {
        return Err(Error::Validation("ideal_nla expects a one-mode state".into()));
    }
    let op = ideal_nla_op(gain, input.dim())?;
    let raw = op.apply_ket(&input.normalized()?)?;
    let p = raw.norm().powi(2);
    Ok(HeraldedOutcome {
        state: raw.normalized()?,
        p_success: p,
    })
}

/// Ideal heralded amplification of a one-mode mixed state.
pub fn ideal_nla_density(
    gain: f64,
    input: &DensityOperator,
) -> Result<HeraldedOutcome<DensityOperator>> {
    if input.n_modes() != 1 {
        return Err(Error::Validation("ideal_nla expects a one-mode state".into()));
    }
    let op = ideal_nla_op(gain, input.dim())?;
    let raw = op.conjugate(&input.normalized()?)?;
    let p = raw.trace();
    Ok(HeraldedOutcome {
        state: raw.normalized()?,
        p_success: p,
    })
}

/// Distilled EPR parameters after amplifying the lossy arm.
#[derive(Debug, Clone, Copy)]
pub struct DistilledEpr {
    pub chi_eff: f64,
    pub eta_eff: f64,
}

/// Effective parameters of lossy EPR entanglement after a successful NLA on
/// the transmitted arm: eta_eff = Gη/(1+(G−1)η), chi_eff = χ√(1+(G−1)η).
pub fn effective_epr_params(chi: f64, eta: f64, gain: f64) -> Result<DistilledEpr> {
    if !(0.0..1.0).contains(&chi) {
        return Err(Error::InvalidParameter {
            name: "chi",
            value: chi,
            constraint: "0 <= chi < 1",
        });
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            constraint: "0 <= eta <= 1",
        });
    }
    if gain < 1.0 {
        return Err(Error::InvalidParameter {
            name: "gain",
            value: gain,
            constraint: "G >= 1",
        });
    }
    let boost = 1.0 + (gain - 1.0) * eta;
    let chi_eff = chi * boost.sqrt();
    if chi_eff >= 1.0 {
        return Err(Error::UnphysicalGain { chi_eff });
    }
    Ok(DistilledEpr {
        chi_eff,
        eta_eff: gain * eta / boost,
    })
}

/// Success-probability bound for distilling lossy EPR entanglement:
/// (1 − χ²(1+(G−1)η)) / ((1+(G−1)η)(1−χ²)), clamped to [0, 1]; zero once
/// χ²(1+(G−1)η) reaches 1.
pub fn success_bound(chi: f64, eta: f64, gain: f64) -> f64 {
    let boost = 1.0 + (gain - 1.0) * eta;
    let numerator = 1.0 - chi * chi * boost;
    if numerator <= 0.0 {
        return 0.0;
    }
    (numerator / (boost * (1.0 - chi * chi))).clamp(0.0, 1.0)
}

/// EPR(χ) with loss(η) on the transmitted arm B, as a (normalized) two-mode
/// density operator.
pub fn lossy_epr_state(
    chi: f64,
    eta: f64,
    dim_a: usize,
    dim_b: usize,
) -> Result<DensityOperator> {
    let branches = lossy_epr_branches(chi, eta, dim_a, dim_b)?;
    density_from_branch_matrices(dim_a, dim_b, &branches).normalized()
}

/// Pure-branch matrices of EPR(χ) with loss(η) on arm B: one (dim_a × dim_b)
/// amplitude matrix per loss Kraus operator. Row index is arm A occupation,
/// column index arm B.
pub(crate) fn lossy_epr_branches(
    chi: f64,
    eta: f64,
    dim_a: usize,
    dim_b: usize,
) -> Result<Vec<Array2<C64>>> {
    let epr = crate::states::epr_ket(chi, dim_a, dim_b)?;
    let mut base = Array2::<C64>::zeros((dim_a, dim_b));
    for n in 0..dim_a.min(dim_b) {
        base[(n, n)] = epr.amps()[n * dim_b + n];
    }
    let loss = loss_channel(eta, dim_b)?;
    Ok(loss
        .kraus()
        .iter()
        .map(|k| base.dot(&k.t().to_owned()))
        .collect())
}

/// Two-mode density operator Σ_k |B_k⟩⟨B_k| from pure-branch amplitude
/// matrices (not normalized).
pub(crate) fn density_from_branch_matrices(
    dim_a: usize,
    dim_b: usize,
    branches: &[Array2<C64>],
) -> DensityOperator {
    let d = dim_a * dim_b;
    let mut m = Array2::<C64>::zeros((d, d));
    for b in branches {
        let flat: Vec<C64> = b.iter().cloned().collect();
        for (i, x) in flat.iter().enumerate() {
            if x.norm_sqr() == 0.0 {
                continue;
            }
            for (j, y) in flat.iter().enumerate() {
                m[(i, j)] += x * y.conj();
            }
        }
    }
    DensityOperator::from_parts_unchecked(vec![dim_a, dim_b], m)
}

/// Report of the Fock-space check behind the distilled-EPR parameter
/// formulas.
#[derive(Debug, Clone, Copy)]
pub struct EprIdentityReport {
    /// Fidelity between EPR(χ)→loss(η)→NLA(G) and EPR(χ_eff)→loss(η_eff).
    pub fidelity: f64,
    /// Simulated success probability of the truncated ideal amplifier.
    pub p_simulated: f64,
    /// Closed-form success bound for the same parameters.
    pub p_bound: f64,
    pub params: DistilledEpr,
}

/// Build both sides of the distillation identity at cutoff `dim` per mode
/// and compare: amplifying the lossy arm of EPR(χ) against distributing
/// EPR(χ_eff) through loss(η_eff).
pub fn verify_epr_identity(chi: f64, eta: f64, gain: f64, dim: usize) -> Result<EprIdentityReport> {
    let params = effective_epr_params(chi, eta, gain)?;
    let amp = ideal_nla_op(gain, dim)?;
    let amp_t = amp.matrix().t().to_owned();

    let direct: Vec<Array2<C64>> = lossy_epr_branches(chi, eta, dim, dim)?
        .into_iter()
        .map(|b| b.dot(&amp_t))
        .collect();
    let p_simulated: f64 = direct
        .iter()
        .map(|b| b.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum();
    let lhs = density_from_branch_matrices(dim, dim, &direct).normalized()?;

    let reference = lossy_epr_branches(params.chi_eff, params.eta_eff, dim, dim)?;
    let rhs = density_from_branch_matrices(dim, dim, &reference).normalized()?;

    Ok(EprIdentityReport {
        fidelity: crate::fock::fidelity(&lhs, &rhs)?,
        p_simulated,
        p_bound: success_bound(chi, eta, gain),
        params,
    })
}

// ---------------------------------------------------------------------------
// Quantum scissors
// ---------------------------------------------------------------------------

/// Which single-photon pattern at the unit's two detectors heralds success.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeraldPattern {
    /// One photon at the designated detector, zero at the other.
    Designated,
    /// The mirrored pattern (zero, one).
    Mirrored,
}

/// Single quantum-scissors amplifying unit as a heralded one-mode channel.
///
/// Circuit: an ancilla photon is split on a beamsplitter of transmissivity
/// τ = G/(1+G), with the transmitted arm kept as the output; the signal and
/// the reflected arm meet on a 50:50 beamsplitter whose two outputs are
/// photon counted. The herald is exactly one photon at the designated
/// detector and none at the other. On success the output mode carries
/// c₀√((1−τ)/2)|0⟩ + c₁√(τ/2)|1⟩ for input c₀|0⟩ + c₁|1⟩ — amplitude gain
/// √G — and every n ≥ 2 component is cut. The constants come out of direct
/// circuit evaluation and are pinned against the closed form in tests.
///
/// The returned Kraus operator is phase-normalized so its diagonal is real
/// and nonnegative (the output phase reference every scissors
/// implementation fixes downstream).
pub fn scissors_unit(g_unit: f64, dim: usize) -> Result<QuantumChannel> {
    let kraus = scissors_unit_kraus(g_unit, dim, HeraldPattern::Designated)?;
    QuantumChannel::new(vec![dim], vec![kraus], false, true)
}

/// Direct 3-mode circuit evaluation of the unit's heralded Kraus operator.
pub fn scissors_unit_kraus(
    g_unit: f64,
    dim: usize,
    pattern: HeraldPattern,
) -> Result<Array2<C64>> {
    if g_unit < 1.0 {
        return Err(Error::InvalidParameter {
            name: "gain",
            value: g_unit,
            constraint: "G >= 1",
        });
    }
    if dim < 2 {
        return Err(Error::InvalidDimension {
            dim,
            reason: "scissors needs at least two levels",
        });
    }
    let tau = g_unit / (1.0 + g_unit);

    // modes: (signal s, mixed ancilla arm c, output ancilla arm b)
    let dims = [dim, dim + 1, 2];
    let split = beamsplitter_op(tau, dim + 1, 2)?; // ancilla splitter on (c, b)
    let mix = beamsplitter_op(0.5, dim, dim + 1)?; // 50:50 on (s, c)
    let u1 = embed_two_mode(&split, &dims, 1, 2)?;
    let u2 = embed_two_mode(&mix, &dims, 0, 1)?;
    let circuit = u2.compose(&u1)?;

    let stride_s = (dim + 1) * 2;
    let flat = |s: usize, cc: usize, b: usize| s * stride_s + cc * 2 + b;
    let (det_s, det_c) = match pattern {
        HeraldPattern::Designated => (1, 0),
        HeraldPattern::Mirrored => (0, 1),
    };

    // column n of the Kraus operator: ⟨det_s, det_c, m| U |n, 0, 1⟩
    let mut kraus = Array2::<C64>::zeros((dim, dim));
    let circuit_m = circuit.matrix();
    for n in 0..dim {
        let col_in = flat(n, 0, 1);
        for m in 0..2 {
            kraus[(m, n)] = circuit_m[(flat(det_s, det_c, m), col_in)];
        }
    }
    if crate::fock::linalg::max_abs(&kraus) < 1e-14 {
        return Err(Error::DegenerateHerald(format!(
            "pattern ({det_s},{det_c}) never fires at gain {g_unit}"
        )));
    }
    // fix the output phase reference: diagonal real and nonnegative
    for m in 0..2 {
        let lead = kraus[(m, m)];
        if lead.norm() > 1e-14 {
            let phase = lead / C64::new(lead.norm(), 0.0);
            for n in 0..dim {
                kraus[(m, n)] /= phase;
            }
        }
    }
    Ok(kraus)
}

/// Heralded Kraus operator of the full N-path scissors amplifier on one
/// mode: balanced fan-out cascade, one scissors unit per path, coherent
/// recombination through the inverse cascade, vacuum heralds on the N−1
/// auxiliary recombination ports and unit success at every scissor.
///
/// With `both_patterns` the amplitude carries the 2^{N/2} feedforward factor
/// so that ‖Kψ‖² is the total success probability over all corrected herald
/// patterns.
pub fn scissors_kraus(config: &NlaConfig) -> Result<Array2<C64>> {
    let NlaConfig {
        gain,
        paths,
        dim,
        both_patterns,
    } = *config;
    let unit = scissors_unit_kraus(gain, dim, HeraldPattern::Designated)?;
    let mut device = if paths == 1 {
        unit
    } else {
        let total_dim = dim
            .checked_pow(paths as u32)
            .filter(|&d| d <= SCISSORS_DIM_BUDGET)
            .ok_or(Error::ResourceBudget {
                needed: dim.saturating_pow(paths as u32),
                budget: SCISSORS_DIM_BUDGET,
            })?;
        let dims = vec![dim; paths];

        // balanced cascade: mode 0 sheds 1/N of its intensity to each path
        let mut fan = FockOperator::identity(dims.clone());
        for k in 1..paths {
            let tau_k = (paths - k) as f64 / (paths - k + 1) as f64;
            let bs = beamsplitter_op(tau_k, dim, dim)?;
            fan = embed_two_mode(&bs, &dims, 0, k)?.compose(&fan)?;
        }

        let mut units = unit.clone();
        for _ in 1..paths {
            units = ndarray::linalg::kron(&units, &unit);
        }

        let assembled = fan
            .dagger()
            .matrix()
            .dot(&units)
            .dot(&fan.matrix().to_owned());
        debug_assert_eq!(assembled.nrows(), total_dim);

        // project the auxiliary recombination ports onto vacuum
        let stride: usize = dim.pow(paths as u32 - 1);
        let mut k_dev = Array2::<C64>::zeros((dim, dim));
        for m in 0..dim {
            for n in 0..dim {
                k_dev[(m, n)] = assembled[(m * stride, n * stride)];
            }
        }
        k_dev
    };

    if both_patterns {
        let boost = C64::new(2f64.powf(paths as f64 / 2.0), 0.0);
        device.mapv_inplace(|z| z * boost);
    }
    // same phase convention as the unit: leading diagonal real nonnegative
    let lead = device[(0, 0)];
    if lead.norm() > 1e-14 {
        let phase = lead / C64::new(lead.norm(), 0.0);
        device.mapv_inplace(|z| z / phase);
    }
    Ok(device)
}

/// Run the linear-optics amplifier on a one-mode pure state.
pub fn scissors_nla(config: &NlaConfig, input: &FockKet) -> Result<HeraldedOutcome<FockKet>> {
    if input.n_modes() != 1 || input.dim() != config.dim {
        return Err(Error::ModeMismatch {
            left: vec![config.dim],
            right: input.mode_dims().to_vec(),
        });
    }
    let k = scissors_kraus(config)?;
    let amps = k.dot(&input.normalized()?.amps().to_owned());
    let p: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    if p <= 0.0 {
        return Err(Error::DegenerateHerald(
            "herald probability vanishes for this input".into(),
        ));
    }
    let norm = p.sqrt();
    let state = FockKet::new(vec![config.dim], amps.mapv(|z| z / norm))?;
    Ok(HeraldedOutcome {
        state,
        p_success: p,
    })
}

/// Success-probability scaling of the linear-optics amplifier across a gain
/// sweep, reported as ξ(G) = p_success (1+G)^N.
#[derive(Debug, Clone)]
pub struct ScalingReport {
    /// (gain, success probability, xi) per sweep point.
    pub points: Vec<(f64, f64, f64)>,
    pub xi_mean: f64,
    /// (max − min)/mean of ξ across the sweep.
    pub xi_rel_variation: f64,
}

pub fn lo_success_scaling(
    gains: &[f64],
    paths: usize,
    dim: usize,
    input: &FockKet,
) -> Result<ScalingReport> {
    if gains.is_empty() {
        return Err(Error::Validation("empty gain sweep".into()));
    }
    let mut points = Vec::with_capacity(gains.len());
    for &g in gains {
        let config = NlaConfig::new(g, paths, dim)?;
        let outcome = scissors_nla(&config, input)?;
        let xi = outcome.p_success * (1.0 + g).powi(paths as i32);
        points.push((g, outcome.p_success, xi));
    }
    let xis: Vec<f64> = points.iter().map(|&(_, _, xi)| xi).collect();
    let mean = xis.iter().sum::<f64>() / xis.len() as f64;
    let max = xis.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = xis.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(ScalingReport {
        points,
        xi_mean: mean,
        xi_rel_variation: (max - min) / mean,
    })
}

/// Sampled check of the Gaussian-ensemble success bound.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleCheckReport {
    pub v_t: f64,
    pub v_t_prime: f64,
    pub gain: f64,
    pub samples: usize,
    pub mean_success: f64,
    pub std_error: f64,
    pub bound: f64,
}

impl EnsembleCheckReport {
    /// Whether the measured mean respects the bound within `n_sigma`
    /// statistical tolerance.
    pub fn within_bound(&self, n_sigma: f64) -> bool {
        self.mean_success <= self.bound + n_sigma * self.std_error
    }
}

/// Draw coherent states α with Gaussian-distributed amplitudes matching
/// ensemble variance V_t (Var(Re α) = Var(Im α) = (V_t−1)/4), amplify each
/// with the truncated ideal NLA, and compare the average success against
/// the closed-form bound at V_t' = 1 + G(V_t − 1).
pub fn ensemble_success_check(
    v_t: f64,
    gain: f64,
    dim: usize,
    samples: usize,
    seed: u64,
) -> Result<EnsembleCheckReport> {
    if v_t < 1.0 {
        return Err(Error::InvalidParameter {
            name: "V_t",
            value: v_t,
            constraint: "V_t >= 1",
        });
    }
    if samples < 2 {
        return Err(Error::Validation("need at least two samples".into()));
    }
    let v_t_prime = 1.0 + gain * (v_t - 1.0);
    let bound = gaussian_ensemble_bound(&EnsembleSpec::new(v_t, v_t_prime)?);

    let amp = ideal_nla_op(gain, dim)?;
    let diag: Vec<f64> = (0..dim).map(|n| amp.matrix()[(n, n)].re).collect();

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let sigma = ((v_t - 1.0) / 4.0).sqrt();
    let normal = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Validation(format!("normal sampler: {e}")))?;

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let alpha = C64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        let amps = coherent_amps(alpha, dim);
        let norm_sq: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        let amplified: f64 = amps
            .iter()
            .zip(diag.iter())
            .map(|(a, t)| a.norm_sqr() * t * t)
            .sum();
        let p = amplified / norm_sq;
        sum += p;
        sum_sq += p * p;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok(EnsembleCheckReport {
        v_t,
        v_t_prime,
        gain,
        samples,
        mean_success: mean,
        std_error: (var / n).sqrt(),
        bound,
    })
}
