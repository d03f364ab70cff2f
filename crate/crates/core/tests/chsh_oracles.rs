//! Brute-force oracles for the CHSH layer: random-setup sweeps of the
//! certification bound, tightness of the saturating family, and a grid
//! search over Bob's observables confirming the closed-form optimizers.

use wse_di_core::chsh::{
    self, absolute_effective_anticommutator, bloch_observable, chsh_value, phi_plus,
    saturating_setup, verify_beta_eps_bound, DeviceSetup,
};
use wse_di_core::matrix::HermitianOperator;

/// EPR-pair correlation of two Bloch observables:
/// `tr[(a.sigma (x) b.sigma) phi_plus] = a_x b_x - a_y b_y + a_z b_z`.
fn epr_correlation(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] - a[1] * b[1] + a[2] * b[2]
}

#[test]
fn epr_correlation_identity_matches_matrix_layer() {
    let cases = [
        ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]),
        ([0.6, 0.0, 0.8], [0.0, 1.0, 0.0]),
        ([0.48, 0.6, 0.64], [0.8, 0.36, 0.48]),
    ];
    let rho = phi_plus();
    for (a, b) in cases {
        let oa = bloch_observable(a[0], a[1], a[2]).unwrap();
        let ob = bloch_observable(b[0], b[1], b[2]).unwrap();
        let joint = HermitianOperator::new(oa.matrix().tensor(ob.matrix())).unwrap();
        let from_matrix = joint.expectation(rho.matrix()).unwrap();
        assert!(
            (from_matrix - epr_correlation(&a, &b)).abs() < 1e-12,
            "correlation identity broken for {a:?} {b:?}"
        );
    }
}

/// Maximize the CHSH value over Bob's planar observables by brute force.
/// The two terms separate, each maximized over one angle.
fn brute_force_bob_optimum(theta: f64) -> f64 {
    let a0 = [0.0, 0.0, 1.0];
    let a1 = [theta.sin(), 0.0, theta.cos()];
    let sum = [a0[0] + a1[0], 0.0, a0[2] + a1[2]];
    let diff = [a0[0] - a1[0], 0.0, a0[2] - a1[2]];
    let steps = 20_000;
    let mut best0 = f64::NEG_INFINITY;
    let mut best1 = f64::NEG_INFINITY;
    for i in 0..steps {
        let phi = 2.0 * std::f64::consts::PI * i as f64 / steps as f64;
        let b = [phi.sin(), 0.0, phi.cos()];
        best0 = best0.max(epr_correlation(&sum, &b));
        best1 = best1.max(epr_correlation(&diff, &b));
    }
    best0 + best1
}

#[test]
fn closed_form_bob_observables_are_optimal() {
    for i in 1..=9 {
        let theta = std::f64::consts::FRAC_PI_2 * i as f64 / 9.0;
        let setup = saturating_setup(theta).unwrap();
        let beta = chsh_value(&setup);
        let oracle = brute_force_bob_optimum(theta);
        assert!(
            (beta - oracle).abs() < 1e-6,
            "theta={theta}: closed form {beta} vs grid oracle {oracle}"
        );
        assert!((beta - 2.0 * (1.0 + theta.sin()).sqrt()).abs() < 1e-8);
    }
}

#[test]
fn thousand_random_setups_respect_bound() {
    let slack = chsh::min_slack_over_random_setups(1000, 20_240_001);
    assert!(slack >= -1e-9, "worst slack {slack}");
}

#[test]
fn saturating_family_is_tight_on_fifty_angles() {
    for i in 1..=50 {
        let theta = std::f64::consts::FRAC_PI_2 * i as f64 / 50.0;
        let report = verify_beta_eps_bound(&saturating_setup(theta).unwrap()).unwrap();
        assert!(
            report.slack.abs() <= 1e-6,
            "slack {} at theta {theta}",
            report.slack
        );
        assert!(report.saturated);
    }
}

#[test]
fn eps_plus_tracks_beta_ceiling_on_random_setups() {
    // On every random setup the measured eps_plus must stay consistent with
    // the invertible bound: |beta| <= rhs(eps_plus).
    for seed in 0..200u64 {
        let mut rng = wse_di_core::rng::stream(77, seed);
        let setup = chsh::random_qubit_setup(&mut rng);
        let beta = chsh_value(&setup);
        let eps = absolute_effective_anticommutator(
            setup.a(0),
            setup.a(1),
            &setup.rho_a(),
        )
        .unwrap();
        let rhs = 2.0 * (1.0 + (1.0 - eps * eps).max(0.0).sqrt()).sqrt();
        assert!(beta.abs() <= rhs + 1e-9);
    }
}

#[test]
fn setup_round_trips_through_json_file_format() {
    let setup = saturating_setup(0.7).unwrap();
    let json = serde_json::to_string_pretty(&setup).unwrap();
    let back: DeviceSetup = serde_json::from_str(&json).unwrap();
    let r1 = verify_beta_eps_bound(&setup).unwrap();
    let r2 = verify_beta_eps_bound(&back).unwrap();
    assert_eq!(r1.beta, r2.beta);
    assert_eq!(r1.eps_plus, r2.eps_plus);

    // Norm violations must be rejected on load.
    let mut doc: serde_json::Value = serde_json::from_str(&json).unwrap();
    doc["a0"]["entries"][0][0] = serde_json::json!(1.8);
    doc["a0"]["entries"][3][0] = serde_json::json!(-1.8);
    assert!(serde_json::from_value::<DeviceSetup>(doc).is_err());
}
