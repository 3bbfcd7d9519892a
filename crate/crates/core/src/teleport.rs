//! Gain-tuned continuous variable teleportation.
//!
//! The closed-form side: with the classical channel gain λ = ((V−1)/(V+1))²
//! matched to the EPR resource, the teleporter acts as a pure-loss channel
//! of transmission λ (or ηλ when the resource arm was distributed through a
//! line of transmission η).
//!
//! The numerical side is an independent teleporter: the dual-homodyne Bell
//! measurement is discretized on a square grid of complex outcomes γ, each
//! projecting onto the displaced maximally entangled ket (D(γ) ⊗ I)Σ|n,n⟩,
//! followed by the outcome-scaled output displacement D(√λ γ). The grid sum
//! yields a Kraus-form channel whose nearest-loss fit is compared against
//! the closed forms.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::channel::QuantumChannel;
use crate::error::{Error, Result};
use crate::fock::{displaced_block, linalg, C64, DensityOperator, FockOperator};
use crate::states::EprParams;

/// Completeness-defect budget on the occupied subspace before a grid is
/// rejected as too coarse.
pub const COMPLETENESS_TOL: f64 = 1e-3;
/// Total-photon bound of the subspace on which grid completeness is
/// certified (states with mean occupation up to ~2).
pub const COMPLETENESS_SUBSPACE_PHOTONS: usize = 2;

/// Classical-channel gain of the teleporter. The displacement applied to
/// the output arm scales with the amplitude gain √λ.
#[derive(Debug, Clone, Copy)]
pub struct TeleportGain {
    lambda: f64,
    amp_gain: f64,
}

impl TeleportGain {
    /// Gain from the intensity quantity λ ≥ 0.
    pub fn from_lambda(lambda: f64) -> Result<Self> {
        if lambda.is_nan() || lambda < 0.0 {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: lambda,
                constraint: "lambda >= 0",
            });
        }
        Ok(Self {
            lambda,
            amp_gain: lambda.sqrt(),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn amp_gain(&self) -> f64 {
        self.amp_gain
    }
}

/// The loss-matched gain λ = ((V−1)/(V+1))² for an EPR resource of strength
/// χ, algebraically equal to χ².
pub fn classical_gain(chi: f64) -> Result<TeleportGain> {
    let params = EprParams::from_chi(chi)?;
    let v = params.v();
    let lambda = ((v - 1.0) / (v + 1.0)).powi(2);
    TeleportGain::from_lambda(lambda)
}

/// Transmission of the loss channel the teleporter is equivalent to, for a
/// resource EPR(χ) distributed through a line of transmission η and the
/// distance-compensating gain λ′ = ηλ(χ). Gains away from that value carry
/// no loss-equivalence claim and are rejected as out of model.
pub fn effective_teleport_channel(chi: f64, eta: f64, gain: &TeleportGain) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            constraint: "0 <= eta <= 1",
        });
    }
    let matched = eta * classical_gain(chi)?.lambda();
    let tol = 1e-9 * matched.max(1.0);
    if (gain.lambda() - matched).abs() > tol {
        return Err(Error::OutOfModel {
            lambda: gain.lambda(),
            expected: matched,
        });
    }
    Ok(matched)
}

/// Square midpoint grid of complex dual-homodyne outcomes covering
/// [−extent, extent]² with spacing `step`; (2R/δ)² points with measure
/// weight δ²/π each.
#[derive(Debug, Clone, Copy)]
pub struct BellGrid {
    extent: f64,
    step: f64,
}

impl BellGrid {
    pub fn new(extent: f64, step: f64) -> Result<Self> {
        if extent <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "extent",
                value: extent,
                constraint: "R > 0",
            });
        }
        if step <= 0.0 || step > 2.0 * extent {
            return Err(Error::InvalidParameter {
                name: "step",
                value: step,
                constraint: "0 < step <= 2R",
            });
        }
        Ok(Self { extent, step })
    }

    /// The documented working default: R = 6 quadrature units, δ = 0.25.
    pub fn default_grid() -> Self {
        Self {
            extent: 6.0,
            step: 0.25,
        }
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn side(&self) -> usize {
        (2.0 * self.extent / self.step).round().max(1.0) as usize
    }

    pub fn n_points(&self) -> usize {
        self.side() * self.side()
    }

    /// POVM measure weight δ²/π carried by each sample point.
    pub fn weight(&self) -> f64 {
        self.step * self.step / std::f64::consts::PI
    }

    /// Midpoint sample points, row-major over (Re γ, Im γ).
    pub fn points(&self) -> Vec<C64> {
        let side = self.side();
        let start = -self.extent + self.step / 2.0;
        let mut pts = Vec::with_capacity(side * side);
        for i in 0..side {
            let re = start + i as f64 * self.step;
            for j in 0..side {
                let im = start + j as f64 * self.step;
                pts.push(C64::new(re, im));
            }
        }
        pts
    }
}

/// Unnormalized Bell ket (D(γ) ⊗ I) Σ_n |n, n⟩ on (input ⊗ resource-arm-A),
/// as a flat amplitude vector with index m·dim_a + j.
fn bell_vector(gamma: C64, dim_in: usize, dim_a: usize) -> Array1<C64> {
    let block = displaced_block(gamma, dim_in, dim_a);
    let mut v = Array1::<C64>::zeros(dim_in * dim_a);
    for m in 0..dim_in {
        for j in 0..dim_a {
            v[m * dim_a + j] = block[(m, j)];
        }
    }
    v
}

/// Rank-1 unnormalized projector |Φ_γ⟩⟨Φ_γ| onto the displaced maximally
/// entangled ket, on (input ⊗ resource-arm-A). The POVM element carries an
/// additional measure weight 1/π supplied by the grid.
pub fn bell_projector(gamma: C64, dim_in: usize, dim_a: usize) -> Result<FockOperator> {
    if dim_in == 0 || dim_a == 0 {
        return Err(Error::InvalidDimension {
            dim: 0,
            reason: "bell projector needs nonempty modes",
        });
    }
    let v = bell_vector(gamma, dim_in, dim_a);
    let d = v.len();
    let mut m = Array2::<C64>::zeros((d, d));
    for (i, a) in v.iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        for (j, b) in v.iter().enumerate() {
            m[(i, j)] = a * b.conj();
        }
    }
    FockOperator::new(vec![dim_in, dim_a], m, false)
}

/// Largest deviation of the discretized resolution of identity
/// (δ²/π) Σ_γ |Φ_γ⟩⟨Φ_γ| from the identity, over matrix elements between
/// basis states of total photon number ≤ `max_total_photons`.
pub fn grid_completeness_defect(grid: &BellGrid, max_total_photons: usize) -> f64 {
    let b = max_total_photons;
    // basis pairs (m, j) with m + j <= b
    let mut basis = Vec::new();
    for m in 0..=b {
        for j in 0..=(b - m) {
            basis.push((m, j));
        }
    }
    let n = basis.len();
    let weight = grid.weight();
    let points = grid.points();

    let sum = points
        .par_chunks(256)
        .map(|chunk| {
            let mut local = Array2::<C64>::zeros((n, n));
            for &gamma in chunk {
                let block = displaced_block(gamma, b + 1, b + 1);
                for (u, &(m, j)) in basis.iter().enumerate() {
                    let a = block[(m, j)];
                    if a.norm_sqr() == 0.0 {
                        continue;
                    }
                    for (v, &(mp, jp)) in basis.iter().enumerate() {
                        local[(u, v)] += a * block[(mp, jp)].conj();
                    }
                }
            }
            local
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Array2::<C64>::zeros((n, n)), |acc, m| acc + m);

    let mut defect = 0.0_f64;
    for u in 0..n {
        for v in 0..n {
            let expect = if u == v { 1.0 } else { 0.0 };
            defect = defect.max((sum[(u, v)] * C64::new(weight, 0.0) - C64::new(expect, 0.0)).norm());
        }
    }
    defect
}

/// Discretized teleporter as an explicit Kraus channel on the probe space.
#[derive(Debug, Clone)]
pub struct TeleportChannel {
    /// The channel itself, dim `probe_dim`, flagged heralded because the
    /// grid truncation makes it trace preserving only up to the reported
    /// deficit.
    pub channel: QuantumChannel,
    /// max |I − Σ K†K| over the probe space.
    pub kraus_deficit: f64,
    /// Completeness defect of the grid on the certified low-photon subspace.
    pub completeness_defect: f64,
}

/// Build the teleportation channel for a two-mode resource state (arm A is
/// matched with the input in the Bell measurement, arm B is displaced into
/// the output). Kraus operators: for every grid outcome γ and resource
/// eigenbranch R, K = √(δ²/π) D(√λ γ) Rᵀ D†(γ), with the output projected
/// onto the probe space.
pub fn teleport_channel(
    resource: &DensityOperator,
    gain: &TeleportGain,
    grid: &BellGrid,
    probe_dim: usize,
) -> Result<TeleportChannel> {
    if resource.n_modes() != 2 {
        return Err(Error::Validation(
            "teleport resource must be a two-mode state".into(),
        ));
    }
    if probe_dim < 2 {
        return Err(Error::InvalidDimension {
            dim: probe_dim,
            reason: "probe space needs at least two levels",
        });
    }
    let completeness_defect = grid_completeness_defect(grid, COMPLETENESS_SUBSPACE_PHOTONS);
    if completeness_defect > COMPLETENESS_TOL {
        return Err(Error::GridTooCoarse {
            defect: completeness_defect,
            tolerance: COMPLETENESS_TOL,
        });
    }

    let dim_a = resource.mode_dims()[0];
    let dim_b = resource.mode_dims()[1];

    // eigenbranches of the (normalized) resource: ρ = Σ λ_l |r_l⟩⟨r_l|
    let resource_n = resource.normalized()?;
    let (w, u) = linalg::eigh(&resource_n.matrix().to_owned())?;
    let w_max = w.iter().cloned().fold(0.0_f64, f64::max);
    let mut branches: Vec<Array2<C64>> = Vec::new();
    for (idx, &lam) in w.iter().enumerate() {
        if lam <= w_max * 1e-12 || lam <= 0.0 {
            continue;
        }
        let scale = C64::new(lam.sqrt(), 0.0);
        let mut r = Array2::<C64>::zeros((dim_a, dim_b));
        for ia in 0..dim_a {
            for ib in 0..dim_b {
                r[(ia, ib)] = u[(ia * dim_b + ib, idx)] * scale;
            }
        }
        branches.push(r);
    }
    if branches.is_empty() {
        return Err(Error::Validation("resource state has no weight".into()));
    }
    let branch_t: Vec<Array2<C64>> = branches.iter().map(|r| r.t().to_owned()).collect();

    let sqrt_w = C64::new(grid.weight().sqrt(), 0.0);
    let amp = gain.amp_gain();
    let points = grid.points();

    // per grid point: D†(γ) block on (A × probe) and the projected output
    // displacement D(√λ γ) block on (probe × B)
    let mut kraus: Vec<Array2<C64>> = points
        .par_chunks(64)
        .map(|chunk| {
            let mut local = Vec::with_capacity(chunk.len() * branch_t.len());
            for &gamma in chunk {
                let d_in = displaced_block(gamma, probe_dim, dim_a);
                let d_in_dag = d_in.t().mapv(|z| z.conj());
                let d_out = displaced_block(gamma * C64::new(amp, 0.0), probe_dim, dim_b);
                for rt in &branch_t {
                    let k = d_out.dot(&rt.dot(&d_in_dag)).mapv(|z| z * sqrt_w);
                    local.push(k);
                }
            }
            local
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    // drop numerically empty contributions (far grid corners)
    let total: f64 = kraus
        .iter()
        .map(|k| k.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum();
    kraus.retain(|k| k.iter().map(|z| z.norm_sqr()).sum::<f64>() > total * 1e-16);

    // the Riemann sum can overshoot the identity by the discretization
    // error; rescale to keep the Kraus family physical
    let mut sum = Array2::<C64>::zeros((probe_dim, probe_dim));
    for k in &kraus {
        sum += &linalg::dagger(k).dot(k);
    }
    let eigs = linalg::eigvalsh(&sum)?;
    let max_eig = eigs.iter().cloned().fold(0.0_f64, f64::max);
    if max_eig > 1.0 {
        let scale = C64::new(1.0 / max_eig.sqrt(), 0.0);
        for k in &mut kraus {
            k.mapv_inplace(|z| z * scale);
        }
        sum.mapv_inplace(|z| z / C64::new(max_eig, 0.0));
    }
    let eye = Array2::<C64>::eye(probe_dim);
    let kraus_deficit = linalg::max_abs(&(&sum - &eye));

    let channel = QuantumChannel::new(vec![probe_dim], kraus, false, true)?;
    Ok(TeleportChannel {
        channel,
        kraus_deficit,
        completeness_defect,
    })
}

/// Output of the discretized teleporter for one input state.
#[derive(Debug, Clone)]
pub struct TeleportOutput {
    /// Normalized teleported state.
    pub state: DensityOperator,
    /// |1 − trace| of the raw grid-summed output for the normalized input;
    /// bounded by the grid completeness defect on the occupied subspace.
    pub trace_defect: f64,
}

/// Teleport a state through a two-mode resource with the given gain,
/// discretizing the Bell measurement on `grid`.
pub fn teleport_oracle(
    rho_in: &DensityOperator,
    resource: &DensityOperator,
    gain: &TeleportGain,
    grid: &BellGrid,
) -> Result<TeleportOutput> {
    if rho_in.n_modes() != 1 {
        return Err(Error::Validation("teleport input must be one mode".into()));
    }
    let tele = teleport_channel(resource, gain, grid, rho_in.dim())?;
    let raw = tele.channel.apply(&rho_in.normalized()?)?;
    let trace_defect = (1.0 - raw.trace()).abs();
    Ok(TeleportOutput {
        state: raw.normalized()?,
        trace_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    use crate::channel::fit_loss;
    use crate::states::{epr_ket, vacuum_ket};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn classical_gain_worked_values() {
        assert_abs_diff_eq!(classical_gain(0.0).unwrap().lambda(), 0.0, epsilon = 1e-15);
        // V = 3 at χ = 0.5: λ = (2/4)² = 1/4
        assert_abs_diff_eq!(classical_gain(0.5).unwrap().lambda(), 0.25, epsilon = 1e-12);
        // χ → 1: the channel approaches the identity
        assert!(classical_gain(0.9999).unwrap().lambda() > 0.999);
    }

    #[test]
    fn classical_gain_equals_chi_squared() {
        // algebraic identity λ(V(χ)) = χ², randomized
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..100 {
            let chi: f64 = rng.gen_range(0.0..1.0);
            let gain = classical_gain(chi).unwrap();
            assert_abs_diff_eq!(gain.lambda(), chi * chi, epsilon = 1e-12);
            assert_abs_diff_eq!(
                gain.amp_gain() * gain.amp_gain(),
                gain.lambda(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn classical_gain_rejects_chi_out_of_range() {
        assert!(classical_gain(1.0).is_err());
        assert!(classical_gain(-0.1).is_err());
    }

    #[test]
    fn effective_channel_worked_values() {
        let chi = 0.5;
        let gain = classical_gain(chi).unwrap();
        assert_abs_diff_eq!(
            effective_teleport_channel(chi, 1.0, &gain).unwrap(),
            0.25,
            epsilon = 1e-12
        );
        let distance_gain = TeleportGain::from_lambda(0.8 * 0.25).unwrap();
        assert_abs_diff_eq!(
            effective_teleport_channel(chi, 0.8, &distance_gain).unwrap(),
            0.2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn effective_channel_rejects_unmatched_gain() {
        let unity = TeleportGain::from_lambda(1.0).unwrap();
        assert!(matches!(
            effective_teleport_channel(0.5, 0.8, &unity),
            Err(Error::OutOfModel { .. })
        ));
    }

    #[test]
    fn effective_channel_saturates_at_line_transmission() {
        // χ → 1 at fixed η < 1: transmission climbs toward η and no further
        let eta = 0.8;
        let mut prev = 0.0;
        for chi in [0.5, 0.7, 0.9, 0.99, 0.999] {
            let gain = TeleportGain::from_lambda(eta * chi * chi).unwrap();
            let t = effective_teleport_channel(chi, eta, &gain).unwrap();
            assert!(t > prev && t < eta);
            prev = t;
        }
        assert!(prev > 0.99 * eta);
    }

    #[test]
    fn bell_projector_vacuum_overlap() {
        let p = bell_projector(c(0.0, 0.0), 4, 4).unwrap();
        // ⟨0,0|Φ_0⟩ = ⟨0|D(0)|0⟩ = 1
        assert_abs_diff_eq!(p.matrix()[(0, 0)].re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn bell_vector_far_outcome_has_negligible_low_energy_weight() {
        let gamma = c(5.5, -2.0);
        let v = bell_vector(gamma, 4, 4);
        // weight on |0,0⟩ is e^{-|γ|²/2}
        assert!(v[0].norm() < 1e-7);
    }

    #[test]
    fn grid_resolves_identity_on_low_photon_subspace() {
        let grid = BellGrid::default_grid();
        assert_eq!(grid.n_points(), 48 * 48);
        let defect = grid_completeness_defect(&grid, 2);
        assert!(defect < 1e-3, "defect {defect}");
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let grid = BellGrid::new(6.0, 1.5).unwrap();
        let resource = epr_ket(0.5, 8, 8).unwrap().to_density();
        let gain = classical_gain(0.5).unwrap();
        assert!(matches!(
            teleport_channel(&resource, &gain, &grid, 8),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn teleporter_with_matched_gain_is_loss_channel() {
        // resource EPR(0.5) with the loss-matched gain: the fitted channel
        // is loss(0.25)
        let chi = 0.5;
        let dim = 10;
        let resource = epr_ket(chi, dim, dim).unwrap().to_density();
        let gain = classical_gain(chi).unwrap();
        let grid = BellGrid::default_grid();
        let tele = teleport_channel(&resource, &gain, &grid, dim).unwrap();
        let fit = fit_loss(&tele.channel).unwrap();
        assert!(
            (fit.eta_est - 0.25).abs() < 0.005,
            "eta_est {} residual {}",
            fit.eta_est,
            fit.residual
        );
        assert!(fit.residual < 1e-2, "residual {}", fit.residual);
    }

    #[test]
    fn grid_refinement_never_worsens_loss_equivalence() {
        // halving the step and widening the extent must not increase the
        // analytics-vs-oracle discrepancy
        let (chi, eta) = (0.5, 0.8);
        let dim = 10;
        let resource = crate::nla::lossy_epr_state(chi, eta, dim, dim).unwrap();
        let expected = eta * classical_gain(chi).unwrap().lambda();
        let gain = TeleportGain::from_lambda(expected).unwrap();

        let mut prev = f64::INFINITY;
        for grid in [
            BellGrid::new(6.0, 0.5).unwrap(),
            BellGrid::new(6.0, 0.25).unwrap(),
            BellGrid::new(7.0, 0.125).unwrap(),
        ] {
            let tele = teleport_channel(&resource, &gain, &grid, dim).unwrap();
            let fit = fit_loss(&tele.channel).unwrap();
            let discrepancy = (fit.eta_est - expected).abs();
            assert!(
                discrepancy <= prev + 1e-6,
                "refinement worsened discrepancy: {prev:.3e} -> {discrepancy:.3e}"
            );
            prev = discrepancy;
        }
    }

    #[test]
    fn teleporter_preserves_trace_within_defect() {
        let resource = epr_ket(0.5, 8, 8).unwrap().to_density();
        let gain = classical_gain(0.5).unwrap();
        let grid = BellGrid::default_grid();
        let vac = vacuum_ket(8).unwrap().to_density();
        let out = teleport_oracle(&vac, &resource, &gain, &grid).unwrap();
        assert!(out.trace_defect < 2e-3, "trace defect {}", out.trace_defect);
        // vacuum teleported through the matched-gain channel stays near
        // vacuum (loss of a vacuum is a vacuum)
        assert!(out.state.occupation(&[0]).unwrap() > 0.99);
    }
}
