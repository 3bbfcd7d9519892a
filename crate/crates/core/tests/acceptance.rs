//! Acceptance suite: one test per headline criterion, each printing a
//! PASS/FAIL line with the measured quantities and the tolerance it was
//! held to. Run with `--nocapture` to see the lines for passing criteria.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use cvqec::channel::fit_loss;
use cvqec::nla::{ensemble_success_check, success_bound, verify_epr_identity};
use cvqec::protocol::{
    best_transmission, corrected_transmission, end_to_end_verify, fig2_curve, fig3_curve,
    max_gain, GainSweep, NlaModel, ProtocolConfig, SimSettings,
};
use cvqec::states::epr_renorm_correction;
use cvqec::teleport::{classical_gain, teleport_channel, BellGrid, TeleportGain};

/// 1. Closed-form identities: λ(χ) = χ², η_ec(G_max) = η_ecl, and
///    success_bound(G_max) = 0, to 1e−12 over 1000 random draws in < 1 s.
#[test]
fn criterion_1_algebraic_suite() {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(2024);
    let mut worst_lambda = 0.0_f64;
    let mut worst_ec = 0.0_f64;
    let mut worst_bound = 0.0_f64;
    for _ in 0..1000 {
        let eta: f64 = rng.gen_range(0.05..=1.0);
        let chi: f64 = rng.gen_range(0.05..0.95);

        let lambda = classical_gain(chi).unwrap().lambda();
        worst_lambda = worst_lambda.max((lambda - chi * chi).abs());

        let g_max = max_gain(eta, chi).unwrap();
        let ec = corrected_transmission(g_max, eta, chi).raw;
        let ecl = best_transmission(eta, chi).unwrap();
        worst_ec = worst_ec.max((ec - ecl).abs());

        worst_bound = worst_bound.max(success_bound(chi, eta, g_max).abs());
    }
    let elapsed = start.elapsed();
    assert!(worst_lambda <= 1e-12, "lambda identity defect {worst_lambda:.3e}");
    assert!(worst_ec <= 1e-12, "eta_ec(G_max) defect {worst_ec:.3e}");
    assert!(worst_bound <= 1e-12, "success_bound(G_max) defect {worst_bound:.3e}");
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "[PASS] criterion 1: algebraic suite, 1000 draws, worst defects \
         {worst_lambda:.2e}/{worst_ec:.2e}/{worst_bound:.2e} <= 1e-12, {elapsed:?}"
    );
}

/// 2. Distillation identity in Fock space: fidelity ≥ 0.999 for all
///    (χ, η, G) in {0.3, 0.5} × {0.5, 0.8} × {1.2, 1.5, 2.0} at cutoff 14,
///    in under a minute.
#[test]
fn criterion_2_epr_distillation_identity() {
    let start = Instant::now();
    let mut worst = 1.0_f64;
    for &chi in &[0.3, 0.5] {
        for &eta in &[0.5, 0.8] {
            for &gain in &[1.2, 1.5, 2.0] {
                let report = verify_epr_identity(chi, eta, gain, 14).unwrap();
                assert!(
                    report.fidelity >= 0.999,
                    "fidelity {} at chi={chi} eta={eta} G={gain}",
                    report.fidelity
                );
                worst = worst.min(report.fidelity);
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    println!(
        "[PASS] criterion 2: distillation identity, 12 combos at dim 14, \
         worst fidelity {worst:.6} >= 0.999, {elapsed:?}"
    );
}

/// 3. Teleportation equals loss: on the 9-point (χ, η) lattice the fitted
///    transmission matches ηλ within 2 % relative with residual < 1e−2, at
///    R = 6, δ = 0.25, dim 10.
#[test]
fn criterion_3_teleportation_equals_loss() {
    let start = Instant::now();
    let dim = 10;
    let grid = BellGrid::default_grid();
    let mut worst_rel = 0.0_f64;
    let mut worst_res = 0.0_f64;
    for &chi in &[0.3, 0.5, 0.7] {
        for &eta in &[0.5, 0.8, 1.0] {
            let resource = cvqec::nla::lossy_epr_state(chi, eta, dim, dim).unwrap();
            let lambda = classical_gain(chi).unwrap().lambda();
            let expected = eta * lambda;
            let gain = TeleportGain::from_lambda(expected).unwrap();
            let tele = teleport_channel(&resource, &gain, &grid, dim).unwrap();
            let fit = fit_loss(&tele.channel).unwrap();
            let rel = (fit.eta_est - expected).abs() / expected;
            assert!(
                rel <= 0.02,
                "chi={chi} eta={eta}: eta_est {} vs {expected} (rel {rel:.3e})",
                fit.eta_est
            );
            assert!(
                fit.residual < 1e-2,
                "chi={chi} eta={eta}: residual {:.3e}",
                fit.residual
            );
            worst_rel = worst_rel.max(rel);
            worst_res = worst_res.max(fit.residual);
        }
    }
    println!(
        "[PASS] criterion 3: teleport-equals-loss on 9-point lattice, worst \
         rel {worst_rel:.2e} <= 2e-2, worst residual {worst_res:.2e} < 1e-2, {:?}",
        start.elapsed()
    );
}

/// 4. End-to-end corrected transmission: the full pipeline with the ideal
///    amplifier at (η, χ, G) = (0.5, 0.5, 5) fits η_est = 0.625 within 2 %,
///    with the loss-fit residual below the combined grid + truncation
///    tolerance.
#[test]
fn criterion_4_end_to_end_corrected_transmission() {
    let start = Instant::now();
    let sim = SimSettings::new(20, 16, 10, BellGrid::new(9.0, 0.25).unwrap());
    let config = ProtocolConfig {
        eta: 0.5,
        chi: 0.5,
        gain: 5.0,
        nla_model: NlaModel::IdealBound,
        sim,
    };
    let report = end_to_end_verify(&config).unwrap();
    assert!((report.expected - 0.625).abs() < 1e-12);
    assert!(
        report.rel_error <= 0.02,
        "eta_est {} vs 0.625 (rel {:.3e})",
        report.eta_est,
        report.rel_error
    );
    // combined tolerance: teleporter trace deficit plus the weight the
    // distilled EPR ladder (chi_eff = 0.5 √3) loses at the arm-B cutoff
    let chi_eff = 0.5 * 3f64.sqrt();
    let combined = report.kraus_deficit + epr_renorm_correction(chi_eff, sim.dim_b, sim.dim_b);
    assert!(
        report.residual <= combined,
        "residual {:.3e} above combined tolerance {combined:.3e}",
        report.residual
    );
    println!(
        "[PASS] criterion 4: end-to-end eta_est {:.6} vs 0.625 (rel {:.2e} <= 2e-2), \
         residual {:.2e} <= combined {:.2e}, {:?}",
        report.eta_est,
        report.rel_error,
        report.residual,
        combined,
        start.elapsed()
    );
}

/// 5 (fidelity and scaling). Strong-loss linear-optics regime (η = 0.01,
///    N = 2), χ = 0.33 over its plotted window (η_ec up to ~0.09):
///    scissors-vs-ideal fidelity > 0.995 at every swept gain and success
///    scaling p (1+G)² varying by < 20 % across the sweep; plus the χ = 0.82
///    curve separately reaching p ≥ 1e−2 and η_ec ≥ 0.1.
#[test]
fn criterion_5_fig3_fidelity_and_scaling() {
    let start = Instant::now();
    let eta = 0.01;
    let sim = SimSettings::new(20, 14, 10, BellGrid::default_grid());

    // weak entanglement: every point faithful, scaling flat
    let chi_a = 0.33;
    let g_hi_a = 0.09 / (eta * chi_a * chi_a);
    let sweep_a = GainSweep::log_spaced(1.0, g_hi_a, 9).unwrap();
    let points_a = fig3_curve(eta, chi_a, 2, &sweep_a, &sim).unwrap();
    let mut worst_f = 1.0_f64;
    for p in &points_a {
        assert!(
            p.fidelity > 0.995,
            "fidelity {} at G {}",
            p.fidelity,
            p.gain
        );
        worst_f = worst_f.min(p.fidelity);
    }
    let xis: Vec<f64> = points_a
        .iter()
        .map(|p| p.p_success * (1.0 + p.gain).powi(2))
        .collect();
    let xi_mean = xis.iter().sum::<f64>() / xis.len() as f64;
    let xi_min = xis.iter().cloned().fold(f64::INFINITY, f64::min);
    let xi_max = xis.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let xi_var = (xi_max - xi_min) / xi_mean;
    assert!(xi_var < 0.20, "xi varies by {:.1}%", 100.0 * xi_var);

    // strong entanglement: the curve (not a single point) spans both
    // headline numbers
    let chi_b = 0.82;
    let g_hi_b = 0.12 / (eta * chi_b * chi_b);
    let sweep_b = GainSweep::log_spaced(1.0, g_hi_b, 9).unwrap();
    let points_b = fig3_curve(eta, chi_b, 2, &sweep_b, &sim).unwrap();
    let best_p = points_b.iter().map(|p| p.p_success).fold(0.0, f64::max);
    let best_ec = points_b.iter().map(|p| p.eta_ec).fold(0.0, f64::max);
    assert!(best_p >= 0.01, "chi=0.82 curve never reaches p >= 1e-2 (best {best_p:.3e})");
    assert!(best_ec >= 0.1, "chi=0.82 curve never reaches eta_ec >= 0.1 (best {best_ec:.3e})");

    println!(
        "[PASS] criterion 5 (fidelity/scaling): chi=0.33 worst fidelity {worst_f:.6} > 0.995, \
         xi variation {:.1}% < 20%; chi=0.82 curve spans p {best_p:.2e} >= 1e-2 and \
         eta_ec {best_ec:.3} >= 0.1, {:?}",
        100.0 * xi_var,
        start.elapsed()
    );
}

/// 5 (order-of-magnitude point). The literal clause: at χ = 0.82 one swept
///    operating point must attain p ≥ 1e−2 together with η_ec ≥ 0.1.
///
///    The device's own success scaling forbids this: η_ec ≥ 0.1 needs
///    G ≥ 0.1/(ηχ²) ≈ 14.9, where p = ξ/(1+G)² with the measured
///    state-dependent ξ ≈ 1.3, i.e. p ≈ 5e−3 — a factor ~2 short. The
///    assertion is kept as stated rather than loosened; the sweep below
///    samples the most favorable gains (η_ec just past 0.1) so the reported
///    best is the true optimum of the conjunction.
#[test]
fn criterion_5_fig3_order_of_magnitude_point() {
    let eta = 0.01;
    let chi = 0.82;
    let sim = SimSettings::new(20, 14, 10, BellGrid::default_grid());
    let g_threshold = 0.1 / (eta * chi * chi);
    let sweep = GainSweep::linear(g_threshold, 1.2 * g_threshold, 4).unwrap();
    let points = fig3_curve(eta, chi, 2, &sweep, &sim).unwrap();
    let joint = points
        .iter()
        .filter(|p| p.eta_ec >= 0.1)
        .map(|p| p.p_success)
        .fold(0.0, f64::max);
    if joint >= 0.01 {
        println!("[PASS] criterion 5 (joint point): p {joint:.3e} >= 1e-2 at eta_ec >= 0.1");
    } else {
        println!(
            "[FAIL] criterion 5 (joint point): best p with eta_ec >= 0.1 is {joint:.3e} < 1e-2; \
             the linear-optics success law p = xi/(1+G)^2 (xi ≈ 1.3 here) caps it near 5e-3"
        );
    }
    assert!(
        joint >= 0.01,
        "no operating point attains p >= 1e-2 together with eta_ec >= 0.1 (best: {joint:.3e}); \
         see the decisions ledger: the claim exceeds the device's success scaling by ~2x"
    );
}

/// 6. Sampled Gaussian ensembles never beat the closed-form success bound
///    by more than 3σ statistical tolerance (V_t in {1.5, 2, 4}, 10⁴
///    samples each).
#[test]
fn criterion_6_ensemble_bound() {
    let start = Instant::now();
    for (i, &v_t) in [1.5, 2.0, 4.0].iter().enumerate() {
        let report = ensemble_success_check(v_t, 2.0, 28, 10_000, 1000 + i as u64).unwrap();
        assert!(
            report.within_bound(3.0),
            "V_t = {v_t}: mean {} vs bound {} (3σ = {})",
            report.mean_success,
            report.bound,
            3.0 * report.std_error
        );
    }
    println!(
        "[PASS] criterion 6: ensemble bound respected at V_t = 1.5/2/4, \
         10^4 samples each, {:?}",
        start.elapsed()
    );
}

/// 7. Trade-off curve shape at η = 0.9 for two entanglement strengths:
///    success strictly decreasing, transmission strictly increasing, and
///    the endpoints hit η and η_ecl to 1e−9.
#[test]
fn criterion_7_fig2_shape() {
    let eta = 0.9;
    for &chi in &[0.5, 0.7] {
        let lo = 1.0 / (chi * chi);
        let hi = max_gain(eta, chi).unwrap();
        let sweep = GainSweep::log_spaced(lo, hi, 60).unwrap();
        let points = fig2_curve(eta, chi, &sweep).unwrap();
        assert!((points[0].eta_ec - eta).abs() <= 1e-9, "break-even endpoint");
        let ecl = best_transmission(eta, chi).unwrap();
        assert!(
            (points.last().unwrap().eta_ec - ecl).abs() <= 1e-9,
            "ecl endpoint"
        );
        assert!(points.last().unwrap().p_success.abs() <= 1e-12);
        for w in points.windows(2) {
            assert!(w[1].eta_ec > w[0].eta_ec);
            assert!(w[1].p_success < w[0].p_success);
        }
        for p in &points[..points.len() - 1] {
            assert!(p.p_success > 0.0);
        }
    }
    println!(
        "[PASS] criterion 7: trade-off curves at eta = 0.9, chi = 0.5/0.7 \
         monotone with exact endpoints (1e-9)"
    );
}

