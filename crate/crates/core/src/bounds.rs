//! Closed-form security bounds: the uncertainty rate `h(x)`, the violation
//! chain `beta -> eps_plus -> f(beta)`, min-entropy rates for bounded and
//! noisy storage, and the live/test winning-probability trade-off curve.
//!
//! All logarithms are base 2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
/// `2 sqrt(2)`, the maximal CHSH value.
const BETA_MAX: f64 = 2.0 * SQRT_2;
const DOMAIN_TOL: f64 = 1e-12;

/// Min-entropy rate against classical side information,
/// `h(x) = 1 - log2(1 + sqrt((1 + x)/2))`, decreasing on `[0, 1]` with
/// `h(1) = 0`.
pub fn h(x: f64) -> Result<f64> {
    if !(-DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&x) {
        return Err(Error::Domain(format!("h(x) needs x in [0,1], got {x}")));
    }
    let x = x.clamp(0.0, 1.0);
    Ok(1.0 - (1.0 + ((1.0 + x) / 2.0).sqrt()).log2())
}

/// Largest absolute effective anticommutator compatible with CHSH value
/// `beta`: `(beta/4) sqrt(8 - beta^2)` on `[2, 2 sqrt(2)]`.
pub fn eps_plus_max_from_beta(beta: f64) -> Result<f64> {
    if !(2.0 - DOMAIN_TOL..=BETA_MAX + DOMAIN_TOL).contains(&beta) {
        return Err(Error::Domain(format!(
            "beta = {beta} outside [2, 2*sqrt(2)]"
        )));
    }
    let beta = beta.clamp(2.0, BETA_MAX);
    // beta^2 can land a hair above 8 at the right endpoint.
    let radicand = (8.0 - beta * beta).max(0.0);
    Ok((beta / 4.0 * radicand.sqrt()).clamp(0.0, 1.0))
}

/// Min-entropy rate certified by a CHSH value:
/// `f(beta) = h(eps_plus_max_from_beta(beta))`, zero at `beta = 2` and
/// increasing up to `h(0) ~ 0.2284` at `beta = 2 sqrt(2)`.
pub fn f_of_beta(beta: f64) -> Result<f64> {
    h(eps_plus_max_from_beta(beta)?)
}

/// Min-entropy rate of an `n`-round run against quantum storage of dimension
/// `d`: `f(beta) - log2(d)/n`. Negative values mean no security.
pub fn min_entropy_rate_bounded(beta: f64, d: u64, n: u64) -> Result<f64> {
    if d < 1 {
        return Err(Error::Domain("storage dimension d must be >= 1".into()));
    }
    if n < 1 {
        return Err(Error::Domain("round count n must be >= 1".into()));
    }
    Ok(f_of_beta(beta)? - (d as f64).log2() / n as f64)
}

/// Success probability model for transmitting `k` classical bits through the
/// adversary's storage channel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum PsuccModel {
    /// `P_succ(k) = min(1, d / 2^k)`, the bounded-dimension surrogate.
    BoundedSurrogate { dim: u64 },
    /// Tabulated values `P_succ(0), P_succ(1), ...`; must start at 1 and be
    /// non-increasing. Queries past the end reuse the last entry (an upper
    /// bound on the true success probability, so the rate stays conservative).
    Table(Vec<f64>),
}

impl PsuccModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            PsuccModel::BoundedSurrogate { dim } => {
                if *dim < 1 {
                    return Err(Error::Domain("surrogate dimension must be >= 1".into()));
                }
            }
            PsuccModel::Table(values) => {
                if values.is_empty() {
                    return Err(Error::Domain("P_succ table must be nonempty".into()));
                }
                if (values[0] - 1.0).abs() > DOMAIN_TOL {
                    return Err(Error::Domain("P_succ(0) must equal 1".into()));
                }
                for w in values.windows(2) {
                    if w[1] > w[0] + DOMAIN_TOL {
                        return Err(Error::Domain("P_succ must be non-increasing".into()));
                    }
                }
                if values.iter().any(|&p| p <= 0.0 || p > 1.0 + DOMAIN_TOL) {
                    return Err(Error::Domain("P_succ values must lie in (0, 1]".into()));
                }
            }
        }
        Ok(())
    }

    /// `log2 P_succ(k)`, computed in the log domain so large `k` does not
    /// underflow.
    pub fn log2_psucc(&self, k: u64) -> f64 {
        match self {
            PsuccModel::BoundedSurrogate { dim } => ((*dim as f64).log2() - k as f64).min(0.0),
            PsuccModel::Table(values) => {
                let idx = (k as usize).min(values.len() - 1);
                values[idx].log2().min(0.0)
            }
        }
    }
}

/// Adversarial storage assumption.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum StorageModel {
    Bounded { dim: u64 },
    Noisy(PsuccModel),
}

/// Min-entropy rate against noisy storage with smoothing `epsilon`:
/// `-(1/n) log2 P_succ(floor(n h(eps_plus) - log2(1/epsilon)))`, clamped to 0
/// when the floor argument is not positive (the bound is vacuous there).
pub fn min_entropy_rate_noisy(
    eps_plus: f64,
    n: u64,
    epsilon: f64,
    model: &PsuccModel,
) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain("round count n must be >= 1".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!(
            "smoothing epsilon = {epsilon} outside (0, 1)"
        )));
    }
    model.validate()?;
    let arg = (n as f64 * h(eps_plus)? - (1.0 / epsilon).log2()).floor();
    if arg <= 0.0 {
        return Ok(0.0);
    }
    Ok((-model.log2_psucc(arg as u64) / n as f64).max(0.0))
}

/// Point on the live/test trade-off curve, parametrized by the absolute
/// effective anticommutator `t`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub t: f64,
    pub p_l: f64,
    pub p_t: f64,
}

/// Optimal live-round guessing probability
/// `p_L(t) = 1/2 + sqrt(1 + t) / (2 sqrt(2))`.
pub fn p_l_max(t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(0.5 + (1.0 + t).sqrt() / (2.0 * SQRT_2))
}

/// Optimal test-round winning probability
/// `p_T(t) = 1/2 + (sqrt(1 + t) + sqrt(1 - t)) / (4 sqrt(2))`.
pub fn p_t_max(t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(0.5 + ((1.0 + t).sqrt() + (1.0 - t).sqrt()) / (4.0 * SQRT_2))
}

fn check_t(t: f64) -> Result<()> {
    if !(-DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, 1]")));
    }
    Ok(())
}

pub fn tradeoff_point(t: f64) -> Result<TradeoffPoint> {
    let t = t.clamp(0.0, 1.0);
    Ok(TradeoffPoint {
        t,
        p_l: p_l_max(t)?,
        p_t: p_t_max(t)?,
    })
}

/// Uniform sampling of the trade-off curve over `t in [0, 1]`, endpoints
/// included. As `t` grows, `p_L` increases while `p_T` falls.
pub fn tradeoff_curve(samples: usize) -> Result<Vec<TradeoffPoint>> {
    if samples < 2 {
        return Err(Error::Domain("need at least 2 samples".into()));
    }
    (0..samples)
        .map(|i| tradeoff_point(i as f64 / (samples - 1) as f64))
        .collect()
}
