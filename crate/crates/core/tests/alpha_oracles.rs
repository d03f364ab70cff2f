//! Grid oracles for the decay-rate machinery: the Cauchy-Schwarz closed form
//! against dense trade-off grids, and golden-section minima against dense
//! k-grids.

use rand::Rng;
use wse_di_core::alpha::{alpha, alpha_min, coefficients, g, taylor_slope};
use wse_di_core::bounds::{p_l_max, p_t_max};
use wse_di_core::rng;

#[test]
fn closed_form_matches_dense_t_grid_on_random_parameters() {
    let mut rng = rng::stream(1_001, 0);
    for _ in 0..100 {
        let q = rng.gen_range(0.0..=1.0);
        let gamma = rng.gen_range(0.75..=1.0);
        let k = rng.gen_range(0.0..6.0);
        let gv = g(q, gamma, k).unwrap();
        let c = coefficients(q, gamma, k).unwrap();
        // 10^4-point grid over t, spaced uniformly in u = sqrt(1 - t) so the
        // sqrt's curvature blow-up near t = 1 cannot hide the maximum.
        let mut best = f64::NEG_INFINITY;
        for i in 0..=10_000 {
            let u = i as f64 / 10_000.0;
            let t = 1.0 - u * u;
            best = best.max(c.a * (1.0 + t).sqrt() + c.b * (1.0 - t).sqrt() + c.c);
        }
        assert!(
            gv.value >= best - 1e-12 && gv.value - best <= 1e-7,
            "q={q} gamma={gamma} k={k}: closed {0} vs grid {best}",
            gv.value
        );
    }
}

#[test]
fn closed_form_maximizer_feeds_raw_objective() {
    // The raw three-term objective evaluated at t* reproduces g(k).
    let mut rng = rng::stream(1_002, 0);
    for _ in 0..100 {
        let q = rng.gen_range(0.0..1.0);
        let gamma = rng.gen_range(0.75..1.0);
        let k = rng.gen_range(0.0..4.0);
        let gv = g(q, gamma, k).unwrap();
        let t = gv.t_star;
        let raw = (1.0 - q) * p_l_max(t).unwrap()
            + q * (k * (1.0 - gamma)).exp() * p_t_max(t).unwrap()
            + q * (-k * gamma).exp() * (1.0 - p_t_max(t).unwrap());
        assert!((raw - gv.value).abs() < 1e-10);
    }
}

#[test]
fn golden_section_matches_dense_k_grid() {
    let cases = [
        (0.5, 0.85),
        (0.1, 0.76),
        (0.3, 0.9),
        (0.9, 0.99),
        (0.7, 0.8),
    ];
    for (q, gamma) in cases {
        let r = alpha_min(q, gamma).unwrap();
        let mut grid_min = f64::INFINITY;
        for i in 0..=100_000 {
            let k = 50.0 * i as f64 / 100_000.0;
            grid_min = grid_min.min(alpha(q, gamma, k).unwrap());
        }
        assert!(
            (r.alpha_min - grid_min).abs() <= 1e-7,
            "q={q} gamma={gamma}: golden {} vs grid {grid_min}",
            r.alpha_min
        );
        assert!(r.converged);
    }
}

#[test]
fn g_at_zero_is_one_on_dense_grid() {
    for qi in 0..20 {
        for gi in 0..20 {
            let q = qi as f64 / 19.0;
            let gamma = 0.75 + 0.25 * gi as f64 / 19.0;
            let v = alpha(q, gamma, 0.0).unwrap();
            assert!(
                (v - 1.0).abs() <= 1e-12,
                "g(0) = {v} at q={q} gamma={gamma}"
            );
        }
    }
}

#[test]
fn taylor_slope_grid() {
    for qi in 0..10 {
        for gi in 0..10 {
            let q = qi as f64 / 10.0; // stays below 1
            let gamma = 0.75 + 0.25 * gi as f64 / 10.0;
            let numeric = taylor_slope(q, gamma).unwrap();
            let analytic = (0.75 - gamma) * q;
            assert!(
                (numeric - analytic).abs() <= 1e-4,
                "slope {numeric} vs {analytic} at q={q} gamma={gamma}"
            );
        }
    }
}

#[test]
fn security_boundary_values() {
    // q = 0 and gamma = 3/4 boundaries sit at exactly 1.
    for gi in 0..=10 {
        let gamma = 0.75 + 0.25 * gi as f64 / 10.0;
        let r = alpha_min(0.0, gamma).unwrap();
        assert!((r.alpha_min - 1.0).abs() <= 1e-9);
        assert!(r.degenerate);
    }
    for qi in 0..=10 {
        let q = qi as f64 / 10.0;
        let r = alpha_min(q, 0.75).unwrap();
        assert!((r.alpha_min - 1.0).abs() <= 1e-9, "q={q}: {}", r.alpha_min);
        assert!(r.degenerate || q > 0.0);
    }
}

#[test]
fn interior_grid_is_strictly_secure() {
    for qi in 1..=9 {
        let q = qi as f64 / 10.0;
        for gi in 0..=23 {
            let gamma = 0.76 + 0.01 * gi as f64;
            let r = alpha_min(q, gamma).unwrap();
            assert!(
                r.alpha_min < 1.0 - 1e-6,
                "alpha_min {} at q={q} gamma={gamma}",
                r.alpha_min
            );
        }
    }
}
