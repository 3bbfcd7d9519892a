//! End-to-end error-correction composition and the headline trade-off
//! quantities: corrected transmission G η χ², the maximal usable gain, the
//! best reachable effective channel 1 − (1−η)χ², and curve generation for
//! the probability-versus-transmission plots (analytic bounds for the ideal
//! amplifier, full circuit simulation for the quantum-scissors device).

use rayon::prelude::*;

use crate::channel::fit_loss;
use crate::error::{Error, Result};
use crate::fock::fidelity;
use crate::nla::{
    density_from_branch_matrices, effective_epr_params, ideal_nla_op, lossy_epr_branches,
    scissors_kraus, success_bound, NlaConfig,
};
use crate::teleport::{teleport_channel, BellGrid, TeleportGain};

/// Gain sweep specification; log spacing is the working default for the
/// trade-off curves. Endpoints are reproduced exactly.
#[derive(Debug, Clone, Copy)]
pub struct GainSweep {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub log: bool,
}

impl GainSweep {
    pub fn log_spaced(start: f64, stop: f64, count: usize) -> Result<Self> {
        Self::new(start, stop, count, true)
    }

    pub fn linear(start: f64, stop: f64, count: usize) -> Result<Self> {
        Self::new(start, stop, count, false)
    }

    fn new(start: f64, stop: f64, count: usize, log: bool) -> Result<Self> {
        if count < 1 {
            return Err(Error::InvalidParameter {
                name: "count",
                value: count as f64,
                constraint: "count >= 1",
            });
        }
        if start.is_nan() || stop.is_nan() || stop < start || (log && start <= 0.0) {
            return Err(Error::InvalidParameter {
                name: "start",
                value: start,
                constraint: "0 < start <= stop (log spacing)",
            });
        }
        Ok(Self {
            start,
            stop,
            count,
            log,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let n = self.count;
        (0..n)
            .map(|i| {
                if i == 0 {
                    self.start
                } else if i == n - 1 {
                    self.stop
                } else {
                    let t = i as f64 / (n - 1) as f64;
                    if self.log {
                        (self.start.ln() + t * (self.stop.ln() - self.start.ln())).exp()
                    } else {
                        self.start + t * (self.stop - self.start)
                    }
                }
            })
            .collect()
    }
}

/// Effective transmission of the corrected channel, G η χ², with an explicit
/// clamp flag when the raw value exceeds one (gains beyond the zero-success
/// threshold).
#[derive(Debug, Clone, Copy)]
pub struct CorrectedTransmission {
    pub raw: f64,
    /// Raw value clamped to [0, 1].
    pub value: f64,
    pub clamped: bool,
}

pub fn corrected_transmission(gain: f64, eta: f64, chi: f64) -> CorrectedTransmission {
    let raw = gain * eta * (chi * chi);
    CorrectedTransmission {
        raw,
        value: raw.clamp(0.0, 1.0),
        clamped: raw > 1.0,
    }
}

fn check_eta_chi(eta: f64, chi: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            constraint: "0 < eta <= 1",
        });
    }
    if !(0.0..1.0).contains(&chi) {
        return Err(Error::InvalidParameter {
            name: "chi",
            value: chi,
            constraint: "0 <= chi < 1",
        });
    }
    Ok(())
}

/// Largest gain with nonzero success probability,
/// G_max = (1 − (1−η)χ²)/(ηχ²); unbounded (infinity) at χ = 0.
pub fn max_gain(eta: f64, chi: f64) -> Result<f64> {
    check_eta_chi(eta, chi)?;
    if chi == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((1.0 - (1.0 - eta) * (chi * chi)) / (eta * (chi * chi)))
}

/// Best reachable corrected transmission, η_ecl = 1 − (1−η)χ² (the G → G_max
/// limit, where the success probability reaches zero).
pub fn best_transmission(eta: f64, chi: f64) -> Result<f64> {
    check_eta_chi(eta, chi)?;
    Ok(1.0 - (1.0 - eta) * (chi * chi))
}

/// One operating point of the protocol trade-off.
#[derive(Debug, Clone, Copy)]
pub struct ProtocolPoint {
    pub gain: f64,
    /// Effective corrected transmission (analytic for the bound curves,
    /// fitted from the simulated channel for the scissors curves).
    pub eta_ec: f64,
    /// Success probability: the analytic bound for the ideal model, the
    /// simulated herald probability for the scissors model.
    pub p_success: f64,
    /// Fidelity of the scissors-distilled resource against the ideal-NLA
    /// prediction; exactly 1 for the ideal model.
    pub fidelity: f64,
    /// Set when the raw η_ec exceeded one and was clamped.
    pub clamped: bool,
}

/// Analytic trade-off curve for the ideal amplifier: η_ec from the
/// corrected-transmission formula, success from the closed-form bound. The
/// sweep must stay inside the useful window [1/χ², G_max]: below it the
/// channel is not yet corrected, above it success is impossible.
pub fn fig2_curve(eta: f64, chi: f64, sweep: &GainSweep) -> Result<Vec<ProtocolPoint>> {
    check_eta_chi(eta, chi)?;
    if chi == 0.0 {
        return Err(Error::InvalidParameter {
            name: "chi",
            value: chi,
            constraint: "chi > 0 for a finite gain window",
        });
    }
    let lo = 1.0 / (chi * chi);
    let hi = max_gain(eta, chi)?;
    let tol = 1e-9 * hi.max(1.0);
    if sweep.start < lo - tol || sweep.stop > hi + tol {
        return Err(Error::SweepOutOfWindow { lo, hi });
    }
    Ok(sweep
        .values()
        .into_iter()
        .map(|g| {
            let t = corrected_transmission(g, eta, chi);
            ProtocolPoint {
                gain: g,
                eta_ec: t.value,
                p_success: success_bound(chi, eta, g),
                fidelity: 1.0,
                clamped: t.clamped,
            }
        })
        .collect())
}

/// Cutoffs and Bell-measurement discretization for the simulated pipeline.
#[derive(Debug, Clone, Copy)]
pub struct SimSettings {
    /// Cutoff of the retained (Alice) EPR arm.
    pub dim_a: usize,
    /// Cutoff of the transmitted (Bob) arm, where loss and the NLA act.
    pub dim_b: usize,
    /// Cutoff of the teleported probe space used for channel fitting.
    pub probe_dim: usize,
    pub grid: BellGrid,
    /// Herald accounting of the scissors device (see [`NlaConfig`]).
    pub both_patterns: bool,
}

impl SimSettings {
    pub fn new(dim_a: usize, dim_b: usize, probe_dim: usize, grid: BellGrid) -> Self {
        Self {
            dim_a,
            dim_b,
            probe_dim,
            grid,
            both_patterns: true,
        }
    }

    /// Working defaults for the strong-loss (η = 0.01) regime.
    pub fn fig3_defaults() -> Self {
        Self {
            dim_a: 20,
            dim_b: 12,
            probe_dim: 10,
            grid: BellGrid::default_grid(),
            both_patterns: true,
        }
    }
}

/// Distill EPR(χ) through loss(η) with an amplifier Kraus operator on the
/// transmitted arm; returns the branch matrices and the herald probability.
fn distilled_branches(
    chi: f64,
    eta: f64,
    amp: &ndarray::Array2<crate::fock::C64>,
    dim_a: usize,
    dim_b: usize,
) -> Result<(Vec<ndarray::Array2<crate::fock::C64>>, f64)> {
    let amp_t = amp.t().to_owned();
    let branches: Vec<_> = lossy_epr_branches(chi, eta, dim_a, dim_b)?
        .into_iter()
        .map(|b| b.dot(&amp_t))
        .collect();
    let p: f64 = branches
        .iter()
        .map(|b| b.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum();
    Ok((branches, p))
}

/// Simulated trade-off curve for the linear-optics (quantum scissors)
/// amplifier. Per gain: distill EPR(χ) → loss(η) → scissors(G, N), record
/// the simulated herald probability, the fidelity of the distilled resource
/// against the ideal-NLA prediction, and the effective transmission fitted
/// from teleporting through the distilled resource with the matched gain
/// λ′ = η_eff λ_eff.
pub fn fig3_curve(
    eta: f64,
    chi: f64,
    paths: usize,
    sweep: &GainSweep,
    sim: &SimSettings,
) -> Result<Vec<ProtocolPoint>> {
    check_eta_chi(eta, chi)?;
    let gains = sweep.values();
    gains
        .par_iter()
        .map(|&g| fig3_point(eta, chi, paths, g, sim))
        .collect()
}

fn fig3_point(
    eta: f64,
    chi: f64,
    paths: usize,
    gain: f64,
    sim: &SimSettings,
) -> Result<ProtocolPoint> {
    let mut config = NlaConfig::new(gain, paths, sim.dim_b)?;
    config.both_patterns = sim.both_patterns;
    let k_sc = scissors_kraus(&config)?;
    let (sc_branches, p_success) = distilled_branches(chi, eta, &k_sc, sim.dim_a, sim.dim_b)?;
    let resource_sc =
        density_from_branch_matrices(sim.dim_a, sim.dim_b, &sc_branches).normalized()?;

    let ideal = ideal_nla_op(gain, sim.dim_b)?;
    let (id_branches, _) =
        distilled_branches(chi, eta, &ideal.matrix().to_owned(), sim.dim_a, sim.dim_b)?;
    let resource_id =
        density_from_branch_matrices(sim.dim_a, sim.dim_b, &id_branches).normalized()?;

    let fid = fidelity(&resource_sc, &resource_id)?;

    let params = effective_epr_params(chi, eta, gain)?;
    let lambda_eff = params.chi_eff * params.chi_eff;
    let tele_gain = TeleportGain::from_lambda(params.eta_eff * lambda_eff)?;
    let tele = teleport_channel(&resource_sc, &tele_gain, &sim.grid, sim.probe_dim)?;
    let fit = fit_loss(&tele.channel)?;

    Ok(ProtocolPoint {
        gain,
        eta_ec: fit.eta_est,
        p_success,
        fidelity: fid,
        clamped: false,
    })
}

/// Which amplifier backs the protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlaModel {
    /// Ideal diagonal amplifier; success probabilities are analytic bounds.
    IdealBound,
    /// Linear-optics quantum scissors with the given fan-out width.
    Scissors { paths: usize },
}

/// Full protocol configuration for a single operating point.
#[derive(Debug, Clone, Copy)]
pub struct ProtocolConfig {
    pub eta: f64,
    pub chi: f64,
    pub gain: f64,
    pub nla_model: NlaModel,
    pub sim: SimSettings,
}

/// Result of composing the full pipeline and fitting the effective channel.
#[derive(Debug, Clone, Copy)]
pub struct EndToEndReport {
    /// Transmission fitted from the simulated teleportation channel.
    pub eta_est: f64,
    /// Closed-form prediction G η χ².
    pub expected: f64,
    /// |eta_est − expected| / expected.
    pub rel_error: f64,
    /// Choi infidelity of the fitted loss channel (non-loss deviation).
    pub residual: f64,
    /// Herald probability of the amplifier stage (simulated).
    pub p_success: f64,
    /// Fidelity of the distilled resource against the ideal-NLA prediction
    /// (1 for the ideal model by construction).
    pub resource_fidelity: f64,
    /// Trace-preservation deficit of the discretized teleporter.
    pub kraus_deficit: f64,
}

/// Compose EPR distribution, loss, amplification, and matched-gain
/// teleportation; fit the resulting channel against the pure-loss family
/// and compare with the corrected-transmission formula.
pub fn end_to_end_verify(config: &ProtocolConfig) -> Result<EndToEndReport> {
    let ProtocolConfig {
        eta,
        chi,
        gain,
        nla_model,
        sim,
    } = *config;
    check_eta_chi(eta, chi)?;

    let (branches, p_success, resource_fidelity) = match nla_model {
        NlaModel::IdealBound => {
            let ideal = ideal_nla_op(gain, sim.dim_b)?;
            let (b, p) =
                distilled_branches(chi, eta, &ideal.matrix().to_owned(), sim.dim_a, sim.dim_b)?;
            (b, p, 1.0)
        }
        NlaModel::Scissors { paths } => {
            let mut nla_config = NlaConfig::new(gain, paths, sim.dim_b)?;
            nla_config.both_patterns = sim.both_patterns;
            let k_sc = scissors_kraus(&nla_config)?;
            let (b, p) = distilled_branches(chi, eta, &k_sc, sim.dim_a, sim.dim_b)?;

            let ideal = ideal_nla_op(gain, sim.dim_b)?;
            let (ib, _) =
                distilled_branches(chi, eta, &ideal.matrix().to_owned(), sim.dim_a, sim.dim_b)?;
            let f = fidelity(
                &density_from_branch_matrices(sim.dim_a, sim.dim_b, &b).normalized()?,
                &density_from_branch_matrices(sim.dim_a, sim.dim_b, &ib).normalized()?,
            )?;
            (b, p, f)
        }
    };
    let resource = density_from_branch_matrices(sim.dim_a, sim.dim_b, &branches).normalized()?;

    let params = effective_epr_params(chi, eta, gain)?;
    let lambda_eff = params.chi_eff * params.chi_eff;
    let tele_gain = TeleportGain::from_lambda(params.eta_eff * lambda_eff)?;
    let tele = teleport_channel(&resource, &tele_gain, &sim.grid, sim.probe_dim)?;
    let fit = fit_loss(&tele.channel)?;

    let expected = corrected_transmission(gain, eta, chi);
    Ok(EndToEndReport {
        eta_est: fit.eta_est,
        expected: expected.value,
        rel_error: (fit.eta_est - expected.value).abs() / expected.value.max(f64::MIN_POSITIVE),
        residual: fit.residual,
        p_success,
        resource_fidelity,
        kraus_deficit: tele.kraus_deficit,
    })
}
