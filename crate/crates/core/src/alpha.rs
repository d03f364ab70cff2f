//! Decay rate of the sequential-attack failure bound.
//!
//! For test probability `q` and CHSH threshold `gamma`, the per-round rate is
//!
//! ```text
//! alpha(q, gamma, k) = max_t [ A sqrt(1+t) + B sqrt(1-t) + C ]
//!                    = sqrt(2 (A^2 + B^2)) + C
//! ```
//!
//! with the maximum over the trade-off parameter `t` attained at
//! `t* = (A^2 - B^2)/(A^2 + B^2)` (Cauchy-Schwarz), and the failure
//! probability of an `n`-round run is bounded by
//! `alpha_min(q, gamma)^n = (min_{k >= 0} alpha(q, gamma, k))^n`.
//!
//! `g(0) = 1` always; `g` is convex in `k` with a unique minimum, found here
//! by bracket doubling plus golden-section search. We never assume convexity
//! blindly: the result is audited against a coarse grid before returning.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
/// Bracket-expansion ceiling for the minimization over `k`.
const K_CEILING: f64 = 1e6;
/// Golden-section interval target.
const K_TOL: f64 = 1e-10;

/// Protocol test parameters: test probability `q`, CHSH threshold `gamma`
/// and round count `n`.
///
/// `gamma` may carry an exact rational form (numerator, denominator); the
/// pass/abort comparison then uses integer cross-multiplication so threshold
/// ties are decided exactly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestParams {
    pub q: f64,
    pub gamma: f64,
    pub n: u64,
    pub gamma_ratio: Option<(u64, u64)>,
}

impl TestParams {
    pub fn new(q: f64, gamma: f64, n: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain(format!("q = {q} outside [0, 1]")));
        }
        if !(0.75..=1.0).contains(&gamma) {
            return Err(Error::Domain(format!("gamma = {gamma} outside [3/4, 1]")));
        }
        Ok(TestParams {
            q,
            gamma,
            n,
            gamma_ratio: None,
        })
    }

    /// Same as [`TestParams::new`] with `gamma = num/den` kept exact for the
    /// threshold comparison.
    pub fn with_gamma_ratio(q: f64, num: u64, den: u64, n: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Domain("gamma denominator must be nonzero".into()));
        }
        let gamma = num as f64 / den as f64;
        let mut params = TestParams::new(q, gamma, n)?;
        params.gamma_ratio = Some((num, den));
        Ok(params)
    }

    /// Threshold test `s_n >= gamma * r_n`. With a rational `gamma` the
    /// comparison is exact; with a float `gamma` ties are decided by the
    /// rounded product, biased toward abort only through upward rounding of
    /// `gamma * r_n`. `r_n = 0` passes vacuously.
    pub fn passes(&self, s_n: u64, r_n: u64) -> bool {
        match self.gamma_ratio {
            Some((num, den)) => (s_n as u128) * (den as u128) >= (num as u128) * (r_n as u128),
            None => s_n as f64 >= self.gamma * r_n as f64,
        }
    }

    /// True on the boundary cases where the failure bound is 1 or vacuous:
    /// `q = 0` (never tests), `q = 1` (no live rounds), `gamma = 3/4`
    /// (classically reachable threshold).
    pub fn degenerate(&self) -> bool {
        self.q == 0.0 || self.q == 1.0 || self.gamma == 0.75
    }
}

/// The three closed-form coefficients of the per-round objective.
#[derive(Clone, Copy, Debug)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// `A = [2(1-q) + q e^{-k gamma}(e^k - 1)] / (4 sqrt(2))`,
/// `B = q e^{-k gamma}(e^k - 1) / (4 sqrt(2))`,
/// `C = (1-q)/2 + q e^{-k gamma}(e^k + 1) / 2`.
///
/// Computed as `e^{k(1-gamma)} -/+ e^{-k gamma}` so large `k` cannot
/// overflow before the difference is formed.
pub fn coefficients(q: f64, gamma: f64, k: f64) -> Result<Coefficients> {
    check_qgk(q, gamma, k)?;
    let grow = (k * (1.0 - gamma)).exp();
    let decay = (-k * gamma).exp();
    let diff = grow - decay; // e^{-k gamma}(e^k - 1) >= 0
    let a = (2.0 * (1.0 - q) + q * diff) / (4.0 * SQRT_2);
    let b = q * diff / (4.0 * SQRT_2);
    let c = (1.0 - q) / 2.0 + q * (grow + decay) / 2.0;
    Ok(Coefficients { a, b, c })
}

/// Value of the inner maximization together with the maximizing trade-off
/// parameter.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GValue {
    pub value: f64,
    pub t_star: f64,
}

/// `g(k) = sqrt(2 (A^2 + B^2)) + C`, attained at
/// `t* = (A^2 - B^2)/(A^2 + B^2)`.
pub fn g(q: f64, gamma: f64, k: f64) -> Result<GValue> {
    let Coefficients { a, b, c } = coefficients(q, gamma, k)?;
    let sum_sq = a * a + b * b;
    let t_star = if sum_sq > 0.0 {
        ((a * a - b * b) / sum_sq).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(GValue {
        value: (2.0 * sum_sq).sqrt() + c,
        t_star,
    })
}

/// Per-round decay rate at fixed `k` (the value of [`g`]).
pub fn alpha(q: f64, gamma: f64, k: f64) -> Result<f64> {
    Ok(g(q, gamma, k)?.value)
}

/// Result of minimizing `g` over `k >= 0`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AlphaResult {
    pub alpha_min: f64,
    pub k_star: f64,
    pub t_star: f64,
    /// false when bracket expansion hit the ceiling or the grid audit found
    /// a lower value than the reported minimum
    pub converged: bool,
    /// the parameters are a no-security boundary case
    pub degenerate: bool,
}

/// Tightest per-round decay rate `alpha_min(q, gamma) = min_{k>=0} g(k)`.
///
/// Bracket expansion from `k = 0` (doubling until `g` stops decreasing,
/// ceiling 1e6) followed by golden-section search, then a 100-point grid
/// audit of the bracket; an audit hit below the reported minimum clears
/// `converged` instead of silently returning a wrong bound.
pub fn alpha_min(q: f64, gamma: f64) -> Result<AlphaResult> {
    check_qgk(q, gamma, 0.0)?;
    let eval = |k: f64| g(q, gamma, k).expect("k >= 0 within validated domain").value;

    // g(0) = 1 exactly; expand until the function is no longer decreasing.
    let mut hi = 1.0;
    let mut hit_ceiling = false;
    loop {
        if eval(hi) >= eval(hi / 2.0) {
            break;
        }
        hi *= 2.0;
        if hi > K_CEILING {
            hi = K_CEILING;
            hit_ceiling = true;
            break;
        }
    }

    let (k_star, value) = golden_section_min(&eval, 0.0, hi);
    // g(0) = 1 is also a candidate; prefer it when the interior search
    // cannot beat it (flat or increasing g).
    let (k_star, value) = if 1.0 <= value { (0.0, 1.0) } else { (k_star, value) };

    let mut converged = !hit_ceiling;
    let audit_hi = (2.0 * k_star).max(1.0).min(hi.max(1.0));
    for i in 0..100 {
        let k = audit_hi * i as f64 / 99.0;
        if eval(k) < value - 1e-9 {
            converged = false;
        }
    }

    let params = TestParams::new(q, gamma, 1)?;
    Ok(AlphaResult {
        alpha_min: value.min(1.0),
        k_star,
        t_star: g(q, gamma, k_star)?.t_star,
        converged,
        degenerate: params.degenerate(),
    })
}

/// `Pr[failure] <= alpha_min(q, gamma)^n`.
pub fn failure_bound(params: &TestParams) -> Result<f64> {
    let result = alpha_min(params.q, params.gamma)?;
    Ok(result.alpha_min.powf(params.n as f64))
}

/// One-sided second-order difference estimate of `g'(0+)`; the analytic
/// slope is `(3/4 - gamma) q`.
pub fn taylor_slope(q: f64, gamma: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Domain(format!(
            "taylor_slope needs q in [0, 1), got {q}"
        )));
    }
    check_qgk(q, gamma, 0.0)?;
    let h = 1e-5;
    let g0 = alpha(q, gamma, 0.0)?;
    let g1 = alpha(q, gamma, h)?;
    let g2 = alpha(q, gamma, 2.0 * h)?;
    Ok((-3.0 * g0 + 4.0 * g1 - g2) / (2.0 * h))
}

/// One row of the `alpha_min` sweep.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AlphaGridRow {
    pub q: f64,
    pub gamma: f64,
    pub alpha_min: f64,
    pub k_star: f64,
}

/// `alpha_min` over the cross product of `qs` and `gammas`, gamma-major
/// ordering. Parallel when the `parallel` feature is on; the output order is
/// deterministic either way.
pub fn alpha_min_grid(qs: &[f64], gammas: &[f64]) -> Result<Vec<AlphaGridRow>> {
    let cells: Vec<(f64, f64)> = gammas
        .iter()
        .flat_map(|&gamma| qs.iter().map(move |&q| (q, gamma)))
        .collect();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|&(q, gamma)| grid_row(q, gamma))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        cells
            .iter()
            .map(|&(q, gamma)| grid_row(q, gamma))
            .collect()
    }
}

/// Sequential twin of [`alpha_min_grid`].
pub fn alpha_min_grid_sequential(qs: &[f64], gammas: &[f64]) -> Result<Vec<AlphaGridRow>> {
    gammas
        .iter()
        .flat_map(|&gamma| qs.iter().map(move |&q| grid_row(q, gamma)))
        .collect()
}

fn grid_row(q: f64, gamma: f64) -> Result<AlphaGridRow> {
    let r = alpha_min(q, gamma)?;
    Ok(AlphaGridRow {
        q,
        gamma,
        alpha_min: r.alpha_min,
        k_star: r.k_star,
    })
}

fn check_qgk(q: f64, gamma: f64, k: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("q = {q} outside [0, 1]")));
    }
    if !(0.75..=1.0).contains(&gamma) {
        return Err(Error::Domain(format!("gamma = {gamma} outside [3/4, 1]")));
    }
    if k < 0.0 {
        return Err(Error::Domain(format!("k = {k} must be nonnegative")));
    }
    Ok(())
}

/// Golden-section minimum of a unimodal function on `[lo, hi]`.
fn golden_section_min(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > K_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    (mid, f(mid))
}
