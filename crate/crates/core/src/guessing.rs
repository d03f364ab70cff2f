//! Exact classical guessing-probability oracles.
//!
//! A [`JointDistribution`] is a finite probability table over any number of
//! variables. On top of it sit the standard guessing probability
//! `p_guess(X|Y) = sum_y max_x P(x, y)`, the postmeasurement variant where
//! the adversary's committed outcome K is conditioned on alongside the late
//! basis announcement, and the sequential guessing probability where round
//! `j`'s guess may depend only on advice revealed up to round `j`. All three
//! are computed exactly (the sequential one by backward induction over
//! advice/guess prefixes), which is the point: they serve as oracles for the
//! closed-form bounds elsewhere in the crate.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chsh::effective_anticommutator;
use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, DensityMatrix, HermitianOperator};
use crate::rng;

const SUM_TOL: f64 = 1e-12;
/// Cap on the number of (advice, guess) prefix histories the sequential DP
/// may visit.
const SEQUENTIAL_NODE_GUARD: u128 = 10_000_000;

/// Finite joint probability distribution, flat row-major table (last
/// variable fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRepr", into = "DistributionRepr")]
pub struct JointDistribution {
    arities: Vec<usize>,
    probs: Vec<f64>,
}

/// Wire format. Probabilities may be JSON numbers or decimal strings; the
/// string form keeps dyadic constants like "0.125" exact in hand-written
/// fixtures.
#[derive(Serialize, Deserialize)]
struct DistributionRepr {
    alphabets: Vec<usize>,
    probs: Vec<ProbEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ProbEntry {
    Number(f64),
    Text(String),
}

impl From<JointDistribution> for DistributionRepr {
    fn from(d: JointDistribution) -> Self {
        DistributionRepr {
            alphabets: d.arities,
            probs: d.probs.into_iter().map(ProbEntry::Number).collect(),
        }
    }
}

impl TryFrom<DistributionRepr> for JointDistribution {
    type Error = Error;

    fn try_from(r: DistributionRepr) -> Result<Self> {
        let probs = r
            .probs
            .into_iter()
            .map(|e| match e {
                ProbEntry::Number(x) => Ok(x),
                ProbEntry::Text(s) => s
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Distribution(format!("bad probability '{s}'"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        JointDistribution::new(r.alphabets, probs)
    }
}

impl JointDistribution {
    pub fn new(arities: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if arities.is_empty() || arities.iter().any(|&a| a == 0) {
            return Err(Error::Distribution("alphabets must be nonempty".into()));
        }
        let expected: usize = arities.iter().product();
        if probs.len() != expected {
            return Err(Error::Distribution(format!(
                "expected {expected} entries, got {}",
                probs.len()
            )));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Distribution("probabilities must be >= 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::Distribution(format!("entries sum to {total}, not 1")));
        }
        Ok(JointDistribution { arities, probs })
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, assignment: &[usize]) -> f64 {
        self.probs[self.index_of(assignment)]
    }

    fn index_of(&self, assignment: &[usize]) -> usize {
        debug_assert_eq!(assignment.len(), self.arities.len());
        let mut idx = 0;
        for (v, &value) in assignment.iter().enumerate() {
            debug_assert!(value < self.arities[v]);
            idx = idx * self.arities[v] + value;
        }
        idx
    }

    /// Iterate `(assignment, probability)` over the whole table.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let n = self.arities.len();
        let mut assignment = vec![0usize; n];
        let mut first = true;
        self.probs.iter().map(move |&p| {
            if first {
                first = false;
            } else {
                for v in (0..n).rev() {
                    assignment[v] += 1;
                    if assignment[v] < self.arities[v] {
                        break;
                    }
                    assignment[v] = 0;
                }
            }
            (assignment.clone(), p)
        })
    }

    /// Marginal over `vars`, in the order given.
    pub fn marginal(&self, vars: &[usize]) -> Result<JointDistribution> {
        self.check_vars(vars)?;
        let out_arities: Vec<usize> = vars.iter().map(|&v| self.arities[v]).collect();
        let out_len: usize = out_arities.iter().product();
        let mut out = vec![0.0; out_len];
        for (assignment, p) in self.iter() {
            let mut oi = 0;
            for &v in vars {
                oi = oi * self.arities[v] + assignment[v];
            }
            out[oi] += p;
        }
        JointDistribution::new(out_arities, out)
    }

    /// Independent product with another table; variables of `other` are
    /// appended after the variables of `self`.
    pub fn product(&self, other: &JointDistribution) -> JointDistribution {
        let mut arities = self.arities.clone();
        arities.extend_from_slice(&other.arities);
        let mut probs = Vec::with_capacity(self.probs.len() * other.probs.len());
        for &p in &self.probs {
            for &q in &other.probs {
                probs.push(p * q);
            }
        }
        JointDistribution { arities, probs }
    }

    /// Optimal guessing probability of the `targets` tuple given the `given`
    /// tuple: `sum_y max_x P(x, y)`. Ties break toward the lowest target
    /// index, so the reported strategy is deterministic.
    pub fn pguess(&self, targets: &[usize], given: &[usize]) -> Result<GuessReport> {
        if targets.is_empty() {
            return Err(Error::Distribution("need at least one target".into()));
        }
        let mut all = given.to_vec();
        all.extend_from_slice(targets);
        self.check_vars(&all)?;
        let m = self.marginal(&all)?;
        let target_count: usize = targets.iter().map(|&v| self.arities[v]).product();
        let given_count = m.probs.len() / target_count;

        let given_arities: Vec<usize> = given.iter().map(|&v| self.arities[v]).collect();
        let target_arities: Vec<usize> = targets.iter().map(|&v| self.arities[v]).collect();

        let mut p_guess = 0.0;
        let mut strategy = BTreeMap::new();
        for gi in 0..given_count {
            let block = &m.probs[gi * target_count..(gi + 1) * target_count];
            let mut best = block[0];
            let mut best_x = 0usize;
            for (x, &p) in block.iter().enumerate().skip(1) {
                if p > best {
                    best = p;
                    best_x = x;
                }
            }
            p_guess += best;
            strategy.insert(decode(gi, &given_arities), decode(best_x, &target_arities));
        }
        Ok(GuessReport {
            p_guess,
            h_min: -p_guess.log2(),
            strategy,
        })
    }

    /// Success probability of a fixed guessing strategy (`given`-tuple ->
    /// `targets`-tuple), for replaying reported strategies.
    pub fn replay_strategy(
        &self,
        targets: &[usize],
        given: &[usize],
        strategy: &BTreeMap<Vec<usize>, Vec<usize>>,
    ) -> Result<f64> {
        let mut all = given.to_vec();
        all.extend_from_slice(targets);
        self.check_vars(&all)?;
        let mut total = 0.0;
        for (assignment, p) in self.iter() {
            if p == 0.0 {
                continue;
            }
            let y: Vec<usize> = given.iter().map(|&v| assignment[v]).collect();
            let guess = strategy
                .get(&y)
                .ok_or_else(|| Error::Strategy(format!("no guess for advice {y:?}")))?;
            if targets
                .iter()
                .zip(guess)
                .all(|(&v, &g)| assignment[v] == g)
            {
                total += p;
            }
        }
        Ok(total)
    }

    /// Sequential guessing probability: round `j` guesses the tuple variable
    /// `xs[j]` after seeing the advice groups `ys[0..=j]` (each group may be
    /// empty). Exact backward induction over (advice, guess) prefixes.
    pub fn pguess_sequential_grouped(
        &self,
        xs: &[usize],
        ys: &[Vec<usize>],
    ) -> Result<SequentialReport> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::Distribution(
                "need one advice group per guessed variable".into(),
            ));
        }
        let mut all: Vec<usize> = Vec::new();
        for (j, &x) in xs.iter().enumerate() {
            all.extend_from_slice(&ys[j]);
            all.push(x);
        }
        self.check_vars(&all)?;

        let n = xs.len();
        let x_counts: Vec<usize> = xs.iter().map(|&v| self.arities[v]).collect();
        let y_counts: Vec<usize> = ys
            .iter()
            .map(|group| group.iter().map(|&v| self.arities[v]).product())
            .collect();

        let mut nodes: u128 = 0;
        let mut level: u128 = 1;
        for j in 0..n {
            level = level
                .saturating_mul(x_counts[j] as u128)
                .saturating_mul(y_counts[j] as u128);
            nodes = nodes.saturating_add(level);
        }
        if nodes > SEQUENTIAL_NODE_GUARD {
            return Err(Error::SizeGuard(format!(
                "sequential DP would visit {nodes} prefix histories"
            )));
        }

        // Marginal ordered (y_1.., x_1, y_2.., x_2, ...); a prefix of rounds
        // then owns a contiguous block.
        let m = self.marginal(&all)?;
        let mut level_size = vec![1usize; n + 1];
        for j in (0..n).rev() {
            level_size[j] = level_size[j + 1] * x_counts[j] * y_counts[j];
        }

        let dp = SequentialDp {
            probs: &m.probs,
            x_counts: &x_counts,
            y_counts: &y_counts,
            level_size: &level_size,
            n,
        };
        let p_guess = dp.value(0, 0);

        let mut strategy = BTreeMap::new();
        let y_arities: Vec<Vec<usize>> = ys
            .iter()
            .map(|group| group.iter().map(|&v| self.arities[v]).collect())
            .collect();
        dp.extract(0, 0, &mut Vec::new(), &y_arities, &mut strategy);

        Ok(SequentialReport {
            p_guess,
            h_min: -p_guess.log2(),
            strategy,
        })
    }

    /// Success probability of a fixed sequential strategy (advice prefix ->
    /// guess for that round).
    pub fn replay_sequential_strategy(
        &self,
        xs: &[usize],
        ys: &[Vec<usize>],
        strategy: &BTreeMap<Vec<usize>, usize>,
        rounds: usize,
    ) -> Result<f64> {
        let mut total = 0.0;
        for (assignment, p) in self.iter() {
            if p == 0.0 {
                continue;
            }
            if self.prefix_correct(&assignment, xs, ys, strategy, rounds)? {
                total += p;
            }
        }
        Ok(total)
    }

    fn prefix_correct(
        &self,
        assignment: &[usize],
        xs: &[usize],
        ys: &[Vec<usize>],
        strategy: &BTreeMap<Vec<usize>, usize>,
        rounds: usize,
    ) -> Result<bool> {
        let mut advice = Vec::new();
        for j in 0..rounds {
            advice.extend(ys[j].iter().map(|&v| assignment[v]));
            let guess = *strategy
                .get(&advice)
                .ok_or_else(|| Error::Strategy(format!("no guess for advice {advice:?}")))?;
            if assignment[xs[j]] != guess {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Check the conditioning decomposition
    /// `p_seq(n rounds) = Pr[S] * p_guess(X_n | advice, S)`, where `S` is the
    /// success event of the optimal strategy on the first `n-1` rounds. Both
    /// sides are computed by independent table scans.
    pub fn conditioning_check_grouped(
        &self,
        xs: &[usize],
        ys: &[Vec<usize>],
    ) -> Result<ConditioningReport> {
        let n = xs.len();
        if n < 2 {
            return Err(Error::Distribution(
                "conditioning check needs at least 2 rounds".into(),
            ));
        }
        let full = self.pguess_sequential_grouped(xs, ys)?;
        let prefix_prob =
            self.replay_sequential_strategy(xs, ys, &full.strategy, n - 1)?;

        // Mass of (last guess = x_n, all advice = y) restricted to S, keyed
        // by the full advice tuple.
        let xn = xs[n - 1];
        let mut buckets: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
        for (assignment, p) in self.iter() {
            if p == 0.0 {
                continue;
            }
            if !self.prefix_correct(&assignment, xs, ys, &full.strategy, n - 1)? {
                continue;
            }
            let advice: Vec<usize> = ys
                .iter()
                .flat_map(|group| group.iter().map(|&v| assignment[v]))
                .collect();
            let bucket = buckets
                .entry(advice)
                .or_insert_with(|| vec![0.0; self.arities[xn]]);
            bucket[assignment[xn]] += p;
        }
        let rhs: f64 = buckets
            .values()
            .map(|b| b.iter().copied().fold(0.0, f64::max))
            .sum();

        let conditional = if prefix_prob > 0.0 {
            rhs / prefix_prob
        } else {
            0.0
        };
        Ok(ConditioningReport {
            p_seq: full.p_guess,
            prefix_prob,
            conditional,
            product: rhs,
            holds: (full.p_guess - rhs).abs() <= 1e-10,
        })
    }

    /// Uniformly random table (normalized uniforms) for property sweeps.
    pub fn random(arities: Vec<usize>, rng: &mut rng::Stream) -> JointDistribution {
        use rand::Rng;
        let len = arities.iter().product();
        let mut probs: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        // Renormalize the largest entry to absorb rounding.
        let sum: f64 = probs.iter().sum();
        probs[0] += 1.0 - sum;
        JointDistribution { arities, probs }
    }

    fn check_vars(&self, vars: &[usize]) -> Result<()> {
        for (i, &v) in vars.iter().enumerate() {
            if v >= self.arities.len() {
                return Err(Error::Distribution(format!("variable {v} out of range")));
            }
            if vars[..i].contains(&v) {
                return Err(Error::Distribution(format!("variable {v} repeated")));
            }
        }
        Ok(())
    }
}

struct SequentialDp<'a> {
    probs: &'a [f64],
    x_counts: &'a [usize],
    y_counts: &'a [usize],
    level_size: &'a [usize],
    n: usize,
}

impl SequentialDp<'_> {
    /// Optimal remaining success mass from round `j` on, given the table
    /// block at `offset` (which encodes all earlier advice and guesses).
    fn value(&self, j: usize, offset: usize) -> f64 {
        if j == self.n {
            return self.probs[offset];
        }
        let child = self.level_size[j + 1];
        let mut total = 0.0;
        for yv in 0..self.y_counts[j] {
            let mut best = f64::NEG_INFINITY;
            for xv in 0..self.x_counts[j] {
                let v = self.value(j + 1, offset + (yv * self.x_counts[j] + xv) * child);
                if v > best {
                    best = v;
                }
            }
            total += best;
        }
        total
    }

    /// Walk the optimal choices and record advice-prefix -> guess.
    fn extract(
        &self,
        j: usize,
        offset: usize,
        advice: &mut Vec<usize>,
        y_arities: &[Vec<usize>],
        out: &mut BTreeMap<Vec<usize>, usize>,
    ) {
        if j == self.n {
            return;
        }
        let child = self.level_size[j + 1];
        for yv in 0..self.y_counts[j] {
            let mut best = f64::NEG_INFINITY;
            let mut best_x = 0usize;
            for xv in 0..self.x_counts[j] {
                let v = self.value(j + 1, offset + (yv * self.x_counts[j] + xv) * child);
                if v > best {
                    best = v;
                    best_x = xv;
                }
            }
            let decoded = decode(yv, &y_arities[j]);
            let before = advice.len();
            advice.extend_from_slice(&decoded);
            out.insert(advice.clone(), best_x);
            self.extract(
                j + 1,
                offset + (yv * self.x_counts[j] + best_x) * child,
                advice,
                y_arities,
                out,
            );
            advice.truncate(before);
        }
    }
}

fn decode(mut index: usize, arities: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize; arities.len()];
    for (v, &a) in arities.iter().enumerate().rev() {
        out[v] = index % a;
        index /= a;
    }
    out
}

/// Guessing probability with the achieving deterministic strategy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GuessReport {
    pub p_guess: f64,
    pub h_min: f64,
    /// advice tuple -> guessed target tuple
    pub strategy: BTreeMap<Vec<usize>, Vec<usize>>,
}

/// Sequential guessing probability with the achieving strategy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SequentialReport {
    pub p_guess: f64,
    pub h_min: f64,
    /// advice prefix (all groups seen so far, flattened) -> guess
    pub strategy: BTreeMap<Vec<usize>, usize>,
}

/// Both sides of the conditioning decomposition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditioningReport {
    pub p_seq: f64,
    pub prefix_prob: f64,
    pub conditional: f64,
    pub product: f64,
    pub holds: bool,
}

/// `p_guess(X|Y)` for a two-variable table `(X, Y)`.
pub fn pguess_classical(dist: &JointDistribution) -> Result<GuessReport> {
    if dist.arities().len() != 2 {
        return Err(Error::Distribution("expected a table over (X, Y)".into()));
    }
    dist.pguess(&[0], &[1])
}

/// `p_guess(X|KY)` for a three-variable table `(X, Y, K)`: the classical
/// side of the postmeasurement-information game once the measurement
/// producing `K` is fixed.
pub fn pguess_postmeas_classical(dist: &JointDistribution) -> Result<GuessReport> {
    if dist.arities().len() != 3 {
        return Err(Error::Distribution("expected a table over (X, Y, K)".into()));
    }
    dist.pguess(&[0], &[2, 1])
}

/// Sequential guessing probability for a `2n`-variable table ordered
/// `(X_1..X_n, Y_1..Y_n)`.
pub fn pguess_sequential(dist: &JointDistribution) -> Result<SequentialReport> {
    let vars = dist.arities().len();
    if vars < 2 || vars % 2 != 0 {
        return Err(Error::Distribution(
            "expected a table over (X_1..X_n, Y_1..Y_n)".into(),
        ));
    }
    let n = vars / 2;
    let xs: Vec<usize> = (0..n).collect();
    let ys: Vec<Vec<usize>> = (0..n).map(|j| vec![n + j]).collect();
    dist.pguess_sequential_grouped(&xs, &ys)
}

/// Conditioning decomposition for a `2n`-variable table ordered
/// `(X_1..X_n, Y_1..Y_n)`.
pub fn conditioning_identity_check(dist: &JointDistribution) -> Result<ConditioningReport> {
    let vars = dist.arities().len();
    if vars < 4 || vars % 2 != 0 {
        return Err(Error::Distribution(
            "expected a table over (X_1..X_n, Y_1..Y_n) with n >= 2".into(),
        ));
    }
    let n = vars / 2;
    let xs: Vec<usize> = (0..n).collect();
    let ys: Vec<Vec<usize>> = (0..n).map(|j| vec![n + j]).collect();
    dist.conditioning_check_grouped(&xs, &ys)
}

/// Measurement table of an adversary holding classical `K`: the ensemble
/// member `rho_k` occurs with probability `p_k`, a uniform basis bit selects
/// the observable, and `X` records the binary outcome (0 for +1):
/// `Pr[x, theta, k] = p_k/2 * (1 +/- tr(A_theta rho_k))/2`, a table over
/// `(X, Theta, K)`.
pub fn postmeasurement_table(
    ensemble: &[(f64, DensityMatrix)],
    a0: &HermitianOperator,
    a1: &HermitianOperator,
) -> Result<JointDistribution> {
    if ensemble.is_empty() {
        return Err(Error::Distribution("ensemble must be nonempty".into()));
    }
    let k_count = ensemble.len();
    let mut probs = vec![0.0; 2 * 2 * k_count];
    for (k, (p_k, rho_k)) in ensemble.iter().enumerate() {
        for (theta, obs) in [a0, a1].into_iter().enumerate() {
            let e = obs.expectation(rho_k.matrix())?;
            let plus = ((1.0 + e) / 2.0).max(0.0);
            let minus = ((1.0 - e) / 2.0).max(0.0);
            probs[(0 * 2 + theta) * k_count + k] = p_k / 2.0 * plus;
            probs[(1 * 2 + theta) * k_count + k] = p_k / 2.0 * minus;
        }
    }
    JointDistribution::new(vec![2, 2, k_count], probs)
}

/// The two-round device distribution on which sequential guessing (3/8) is
/// strictly worse than guessing with all advice up front (1/2): exact dyadic
/// table over `(Theta_2, X_1, X_2)`.
pub fn appendix_c_distribution() -> JointDistribution {
    JointDistribution::new(
        vec![2, 2, 2],
        vec![0.25, 0.0, 0.125, 0.125, 0.125, 0.125, 0.0, 0.25],
    )
    .expect("static dyadic table")
}

/// Sequential view of [`appendix_c_distribution`]: round 1 has no advice,
/// round 2 reveals `Theta_2`. Returns the grouped arguments
/// `(xs, ys)` for use with [`JointDistribution::pguess_sequential_grouped`].
pub fn appendix_c_sequential_args() -> (Vec<usize>, Vec<Vec<usize>>) {
    (vec![1, 2], vec![vec![], vec![0]])
}

/// The 4-dimensional counterexample showing that a vanishing (signed)
/// effective anticommutator does not imply uncertainty against classical
/// side information, while the absolute version flags it: `eps_eff = 0`,
/// `eps_plus = 1`, and one extra classical bit makes the outcome perfectly
/// predictable.
#[derive(Clone, Debug)]
pub struct AppendixAExample {
    /// cq-state on A (x) K, dimensions 4 x 2
    pub rho_ak: DensityMatrix,
    pub a0: HermitianOperator,
    pub a1: HermitianOperator,
    pub eps_eff: f64,
    pub eps_plus: f64,
    /// derived table over (X, Theta, K)
    pub table: JointDistribution,
}

pub fn appendix_a_example() -> Result<AppendixAExample> {
    let a0 = HermitianOperator::diag(&[1.0, -1.0, 1.0, -1.0]);
    let a1 = HermitianOperator::diag(&[1.0, -1.0, -1.0, 1.0]);

    let mut rho_ak_m = ComplexMatrix::zeros(8);
    rho_ak_m.set(0, 0, Complex64::new(0.5, 0.0)); // |0>_A |0>_K
    rho_ak_m.set(5, 5, Complex64::new(0.5, 0.0)); // |2>_A |1>_K
    let rho_ak = DensityMatrix::new(HermitianOperator::new(rho_ak_m)?)?;

    let basis = |i: usize| {
        let mut v = [Complex64::new(0.0, 0.0); 4];
        v[i] = Complex64::new(1.0, 0.0);
        DensityMatrix::from_pure(&v).expect("basis state")
    };
    let ensemble = vec![(0.5, basis(0)), (0.5, basis(2))];

    let rho_a = crate::matrix::partial_trace(&rho_ak, 4, 2, crate::matrix::Keep::A)?;
    let eps_eff = effective_anticommutator(&a0, &a1, &rho_a)?;
    let eps_plus = crate::chsh::absolute_effective_anticommutator(&a0, &a1, &rho_a)?;
    let table = postmeasurement_table(&ensemble, &a0, &a1)?;

    Ok(AppendixAExample {
        rho_ak,
        a0,
        a1,
        eps_eff,
        eps_plus,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pguess_trivial_cases() {
        // X uniform, Y independent: 1/|X|.
        let d = JointDistribution::new(vec![4, 2], vec![0.125; 8]).unwrap();
        let r = pguess_classical(&d).unwrap();
        assert_eq!(r.p_guess, 0.25);
        assert!((r.h_min - 2.0).abs() < 1e-12);

        // X = Y: certainty.
        let d = JointDistribution::new(vec![2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let r = pguess_classical(&d).unwrap();
        assert_eq!(r.p_guess, 1.0);
        assert_eq!(r.h_min, 0.0);
        assert_eq!(r.strategy[&vec![0]], vec![0]);
        assert_eq!(r.strategy[&vec![1]], vec![1]);
    }

    #[test]
    fn pguess_unconditioned_floor() {
        let mut rng = rng::stream(3, 0);
        for _ in 0..100 {
            let d = JointDistribution::random(vec![3, 4], &mut rng);
            let cond = pguess_classical(&d).unwrap().p_guess;
            let uncond = d.pguess(&[0], &[]).unwrap().p_guess;
            assert!(cond >= uncond - 1e-15);
            assert!(uncond >= 1.0 / 3.0 - 1e-15);
        }
    }

    #[test]
    fn pguess_equality_when_independent() {
        let mut rng = rng::stream(4, 0);
        let x = JointDistribution::random(vec![3], &mut rng);
        let y = JointDistribution::random(vec![4], &mut rng);
        let d = x.product(&y);
        let cond = d.pguess(&[0], &[1]).unwrap().p_guess;
        let uncond = d.pguess(&[0], &[]).unwrap().p_guess;
        assert!((cond - uncond).abs() < 1e-12);
    }

    #[test]
    fn strategy_replays_to_reported_value() {
        let mut rng = rng::stream(5, 0);
        for _ in 0..50 {
            let d = JointDistribution::random(vec![3, 2, 2], &mut rng);
            let r = d.pguess(&[0], &[1, 2]).unwrap();
            let replay = d.replay_strategy(&[0], &[1, 2], &r.strategy).unwrap();
            assert!((replay - r.p_guess).abs() < 1e-14);
        }
    }

    #[test]
    fn postmeas_reduces_to_classical_when_k_independent() {
        let mut rng = rng::stream(6, 0);
        let xy = JointDistribution::random(vec![2, 2], &mut rng);
        let k = JointDistribution::random(vec![3], &mut rng);
        let d = xy.product(&k); // (X, Y, K) with K independent
        let with_k = pguess_postmeas_classical(&d).unwrap().p_guess;
        let without = pguess_classical(&xy).unwrap().p_guess;
        assert!((with_k - without).abs() < 1e-12);
    }

    #[test]
    fn sequential_single_round_equals_classical() {
        let mut rng = rng::stream(7, 0);
        for _ in 0..20 {
            let d = JointDistribution::random(vec![3, 4], &mut rng);
            let seq = pguess_sequential(&d).unwrap();
            let classical = pguess_classical(&d).unwrap();
            assert!((seq.p_guess - classical.p_guess).abs() < 1e-14);
        }
    }

    #[test]
    fn sequential_product_rounds_multiply() {
        let mut rng = rng::stream(8, 0);
        for _ in 0..20 {
            let r1 = JointDistribution::random(vec![2, 3], &mut rng);
            let r2 = JointDistribution::random(vec![2, 2], &mut rng);
            let d = r1.product(&r2); // (X1, Y1, X2, Y2)
            let seq = d
                .pguess_sequential_grouped(&[0, 2], &[vec![1], vec![3]])
                .unwrap();
            let expect = pguess_classical(&r1).unwrap().p_guess
                * pguess_classical(&r2).unwrap().p_guess;
            assert!((seq.p_guess - expect).abs() < 1e-12);
            // Additivity of min-entropy on products.
            let h1 = pguess_classical(&r1).unwrap().h_min;
            let h2 = pguess_classical(&r2).unwrap().h_min;
            assert!((seq.h_min - (h1 + h2)).abs() < 1e-10);
        }
    }

    #[test]
    fn appendix_c_exact_values() {
        let d = appendix_c_distribution();
        // Marginal of X1 is uniform.
        let m = d.marginal(&[1]).unwrap();
        assert_eq!(m.probs(), &[0.5, 0.5]);

        // All advice up front: guess the pair (X1, X2) from Theta_2.
        let general = d.pguess(&[1, 2], &[0]).unwrap();
        assert_eq!(general.p_guess, 0.5);
        // The optimal functions read both guesses off Theta_2.
        assert_eq!(general.strategy[&vec![0]], vec![0, 0]);
        assert_eq!(general.strategy[&vec![1]], vec![1, 1]);

        // Sequential: X1 must be guessed before Theta_2 arrives.
        let (xs, ys) = appendix_c_sequential_args();
        let seq = d.pguess_sequential_grouped(&xs, &ys).unwrap();
        assert_eq!(seq.p_guess, 0.375);

        // Strictly worse than the general value.
        assert!(seq.p_guess < general.p_guess);
    }

    #[test]
    fn appendix_c_conditioning_decomposition() {
        let d = appendix_c_distribution();
        let (xs, ys) = appendix_c_sequential_args();
        let report = d.conditioning_check_grouped(&xs, &ys).unwrap();
        assert!(report.holds);
        assert_eq!(report.p_seq, 0.375);
        assert_eq!(report.prefix_prob, 0.5);
        assert_eq!(report.conditional, 0.75);
    }

    #[test]
    fn conditioning_on_product_tables() {
        let mut rng = rng::stream(9, 0);
        for _ in 0..20 {
            let r1 = JointDistribution::random(vec![2, 2], &mut rng);
            let r2 = JointDistribution::random(vec![2, 3], &mut rng);
            let d = r1.product(&r2);
            let report = d
                .conditioning_check_grouped(&[0, 2], &[vec![1], vec![3]])
                .unwrap();
            assert!(report.holds);
        }
    }

    #[test]
    fn sequential_at_most_general() {
        let mut rng = rng::stream(10, 0);
        for _ in 0..500 {
            let d = JointDistribution::random(vec![2, 2, 2, 2], &mut rng);
            let seq = pguess_sequential(&d).unwrap().p_guess;
            let general = d.pguess(&[0, 1], &[2, 3]).unwrap().p_guess;
            assert!(seq <= general + 1e-12);
        }
    }

    #[test]
    fn appendix_a_exact_values() {
        let ex = appendix_a_example().unwrap();
        assert_eq!(ex.eps_eff, 0.0);
        assert_eq!(ex.eps_plus, 1.0);
        let with_k = pguess_postmeas_classical(&ex.table).unwrap();
        assert_eq!(with_k.p_guess, 1.0);
        let without_k = ex.table.pguess(&[0], &[1]).unwrap();
        assert_eq!(without_k.p_guess, 0.75);
    }

    #[test]
    fn size_guard_rejects_huge_tables() {
        let d = JointDistribution::new(vec![4; 12], vec![1.0 / 16_777_216.0; 16_777_216])
            .unwrap();
        let xs: Vec<usize> = (0..6).collect();
        let ys: Vec<Vec<usize>> = (6..12).map(|v| vec![v]).collect();
        assert!(matches!(
            d.pguess_sequential_grouped(&xs, &ys),
            Err(Error::SizeGuard(_))
        ));
    }

    #[test]
    fn distribution_validation() {
        assert!(JointDistribution::new(vec![], vec![]).is_err());
        assert!(JointDistribution::new(vec![2], vec![0.5, 0.6]).is_err());
        assert!(JointDistribution::new(vec![2], vec![1.5, -0.5]).is_err());
        assert!(JointDistribution::new(vec![2, 2], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn json_with_decimal_strings() {
        let json = r#"{"alphabets":[2,2,2],
                       "probs":["0.25","0","0.125","0.125","0.125","0.125",0,"0.25"]}"#;
        let d: JointDistribution = serde_json::from_str(json).unwrap();
        assert_eq!(d, appendix_c_distribution());
        let back = serde_json::to_string(&d).unwrap();
        let d2: JointDistribution = serde_json::from_str(&back).unwrap();
        assert_eq!(d, d2);
    }

    #[test]
    fn exhaustive_oracle_matches_dp() {
        // All deterministic strategy tuples for 2 binary rounds, advice =
        // one binary variable per round.
        let mut rng = rng::stream(11, 0);
        for _ in 0..50 {
            let d = JointDistribution::random(vec![2, 2, 2, 2], &mut rng);
            let dp = pguess_sequential(&d).unwrap().p_guess;
            let mut best = 0.0f64;
            // f1: Y1 -> X1 (4 functions), f2: (Y1, Y2) -> X2 (16 functions).
            for f1 in 0..4u32 {
                for f2 in 0..16u32 {
                    let mut total = 0.0;
                    for (a, p) in d.iter() {
                        let (x1, x2, y1, y2) = (a[0], a[1], a[2], a[3]);
                        let g1 = (f1 >> y1) & 1;
                        let g2 = (f2 >> (y1 * 2 + y2)) & 1;
                        if g1 as usize == x1 && g2 as usize == x2 {
                            total += p;
                        }
                    }
                    best = best.max(total);
                }
            }
            assert!((dp - best).abs() < 1e-12, "dp {dp} vs enumeration {best}");
        }
    }
}
