//! Round-level execution of the weak-string-erasure protocol: honest runs,
//! sequential attacks against the live/test round structure, and Monte-Carlo
//! estimation of the failure probability against its closed-form bound.
//!
//! Every trial owns an RNG stream derived from `(master seed, trial index)`,
//! so runs are reproducible and trials parallelize without shared state.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alpha::{self, TestParams};
use crate::bounds;
use crate::chsh::{
    ideal_setup, joint_outcome_probs, observable_povm, saturating_setup, DeviceSetup,
};
use crate::error::{Error, Result};
use crate::matrix::HermitianOperator;
use crate::rng;

/// One protocol round. Test fields are present iff `q = 1`; live fields are
/// present iff `q = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// round type: 0 live, 1 test
    pub q: u8,
    /// Alice's basis bit
    pub theta: u8,
    /// Alice's outcome
    pub x: u8,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub y: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub guess: Option<u8>,
}

impl RoundRecord {
    /// CHSH success indicator `x + y + theta*t + 1 (mod 2)` for test rounds.
    pub fn test_win(&self) -> Option<bool> {
        match (self.t, self.y) {
            (Some(t), Some(y)) => Some(self.x ^ y == self.theta & t),
            _ => None,
        }
    }

    pub fn guess_correct(&self) -> Option<bool> {
        self.guess.map(|g| g == self.x)
    }
}

/// Full run record with derived counters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transcript {
    pub rounds: Vec<RoundRecord>,
    /// number of test rounds
    pub r_n: u64,
    /// number of successful test rounds
    pub s_n: u64,
    /// `s_n / r_n` as an exact pair, absent when no test round occurred
    pub f_chsh: Option<(u64, u64)>,
    pub passed: bool,
    /// `passed` granted with `r_n = 0`
    pub vacuous_pass: bool,
    /// all live-round guesses correct
    pub h_n: bool,
    /// failure event: `passed && h_n`
    pub failed: bool,
}

impl Transcript {
    pub fn from_rounds(params: &TestParams, rounds: Vec<RoundRecord>) -> Result<Self> {
        let mut r_n = 0u64;
        let mut s_n = 0u64;
        let mut h_n = true;
        for round in &rounds {
            match round.q {
                1 => {
                    if round.k.is_some() || round.guess.is_some() {
                        return Err(Error::Strategy("live fields on a test round".into()));
                    }
                    r_n += 1;
                    match round.test_win() {
                        Some(true) => s_n += 1,
                        Some(false) => {}
                        None => {
                            return Err(Error::Strategy("test round missing t or y".into()));
                        }
                    }
                }
                0 => {
                    if round.t.is_some() || round.y.is_some() {
                        return Err(Error::Strategy("test fields on a live round".into()));
                    }
                    match round.guess_correct() {
                        Some(correct) => h_n &= correct,
                        None => {
                            return Err(Error::Strategy("live round missing guess".into()));
                        }
                    }
                }
                other => {
                    return Err(Error::Strategy(format!("round type {other} invalid")));
                }
            }
        }
        let passed = params.passes(s_n, r_n);
        Ok(Transcript {
            rounds,
            r_n,
            s_n,
            f_chsh: if r_n > 0 { Some((s_n, r_n)) } else { None },
            passed,
            vacuous_pass: passed && r_n == 0,
            h_n,
            failed: passed && h_n,
        })
    }

    pub fn f_chsh_value(&self) -> Option<f64> {
        self.f_chsh.map(|(s, r)| s as f64 / r as f64)
    }

    /// Recompute every counter from the raw rounds and compare.
    pub fn validate(&self, params: &TestParams) -> Result<()> {
        let rebuilt = Transcript::from_rounds(params, self.rounds.clone())?;
        let ok = rebuilt.r_n == self.r_n
            && rebuilt.s_n == self.s_n
            && rebuilt.f_chsh == self.f_chsh
            && rebuilt.passed == self.passed
            && rebuilt.vacuous_pass == self.vacuous_pass
            && rebuilt.h_n == self.h_n
            && rebuilt.failed == self.failed;
        if !ok {
            return Err(Error::Strategy("transcript counters inconsistent".into()));
        }
        Ok(())
    }

    /// JSON-lines serialization: one round per line, then a footer with the
    /// counters. Byte-stable for fixed inputs.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for round in &self.rounds {
            out.push_str(&serde_json::to_string(round).expect("round serializes"));
            out.push('\n');
        }
        let footer = TranscriptFooter {
            r_n: self.r_n,
            s_n: self.s_n,
            f_chsh: self.f_chsh,
            passed: self.passed,
            vacuous_pass: self.vacuous_pass,
            h_n: self.h_n,
            failed: self.failed,
        };
        out.push_str(&serde_json::to_string(&footer).expect("footer serializes"));
        out.push('\n');
        out
    }
}

#[derive(Serialize)]
struct TranscriptFooter {
    r_n: u64,
    s_n: u64,
    f_chsh: Option<(u64, u64)>,
    passed: bool,
    vacuous_pass: bool,
    h_n: bool,
    failed: bool,
}

/// What the adversary's devices do in one round.
#[derive(Clone)]
pub enum RoundModel {
    /// Fixed round law: probability of a correct live guess and of a test
    /// win. The committed outcome `k` is the guess itself.
    Probabilistic { p_live_correct: f64, p_test_win: f64 },
    /// Quantum device model with precomputed Born laws.
    Quantum(Arc<QuantumRoundModel>),
}

/// Precomputed Born-rule laws of a quantum round.
#[derive(Clone, Debug)]
pub struct QuantumRoundModel {
    /// joint law of (x, y) indexed `[theta][t][x][y]`
    pub test_law: [[[[f64; 2]; 2]; 2]; 2],
    /// joint law of (x, k) indexed `[theta][x][k]`
    pub live_law: [[Vec<f64>; 2]; 2],
    /// committed outcome and basis to guess: `guess[k][theta]`
    pub guess: Vec<[u8; 2]>,
}

/// A sequential attack: per round the adversary presents either a
/// probabilistic round law or a quantum round model, possibly driven by an
/// opaque memory word updated from the public round record.
pub trait AttackStrategy: Sync + Send {
    fn name(&self) -> String;
    /// Whether the strategy claims its round laws lie on or below the
    /// live/test trade-off curve.
    fn claims_admissible(&self) -> bool;
    fn initial_memory(&self) -> u64 {
        0
    }
    fn round_model(&self, round: usize, memory: u64) -> RoundModel;
    fn update_memory(&self, _round: usize, memory: u64, _record: &RoundRecord) -> u64 {
        memory
    }
}

/// Constant probabilistic round law.
#[derive(Clone, Debug)]
pub struct FixedLawStrategy {
    name: String,
    p_live_correct: f64,
    p_test_win: f64,
    admissible: bool,
}

impl FixedLawStrategy {
    /// Any `(p_L, p_T)` in `[0,1]^2`; admissibility (on or below the
    /// trade-off curve) is checked and recorded, not required.
    pub fn new(p_live_correct: f64, p_test_win: f64) -> Result<Self> {
        for (label, p) in [("p_live_correct", p_live_correct), ("p_test_win", p_test_win)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Strategy(format!("{label} = {p} outside [0, 1]")));
            }
        }
        Ok(FixedLawStrategy {
            name: format!("fixed({p_live_correct},{p_test_win})"),
            p_live_correct,
            p_test_win,
            admissible: pair_is_admissible(p_live_correct, p_test_win),
        })
    }

    /// The point of the trade-off curve at parameter `t`.
    pub fn curve_at(t: f64) -> Result<Self> {
        let point = bounds::tradeoff_point(t)?;
        Ok(FixedLawStrategy {
            name: format!("curve(t={t})"),
            p_live_correct: point.p_l,
            p_test_win: point.p_t,
            admissible: true,
        })
    }

    /// The classical endpoint `t = 1`: perfect live guessing, 3/4 test wins.
    pub fn classical_endpoint() -> Self {
        Self::curve_at(1.0).expect("t = 1 valid")
    }

    /// Curve strategy at the maximizer `t*(k*)` of the decay-rate analysis
    /// for the given parameters: the strongest fixed law the bound prices.
    pub fn curve_at_optimal_k(q: f64, gamma: f64) -> Result<Self> {
        let r = alpha::alpha_min(q, gamma)?;
        let mut s = Self::curve_at(r.t_star)?;
        s.name = format!("curve-at-kstar(q={q},gamma={gamma})");
        Ok(s)
    }

    pub fn law(&self) -> (f64, f64) {
        (self.p_live_correct, self.p_test_win)
    }
}

/// True when `(p_L, p_T)` lies on or below the trade-off curve.
pub fn pair_is_admissible(p_l: f64, p_t: f64) -> bool {
    if p_l > 1.0 || p_t > 1.0 {
        return false;
    }
    // Smallest curve parameter able to deliver p_L; p_T_max falls with t.
    let t_min = (8.0 * (p_l - 0.5).max(0.0).powi(2) - 1.0).clamp(0.0, 1.0);
    p_t <= bounds::p_t_max(t_min).expect("t in range") + 1e-12
}

impl AttackStrategy for FixedLawStrategy {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn claims_admissible(&self) -> bool {
        self.admissible
    }

    fn round_model(&self, _round: usize, _memory: u64) -> RoundModel {
        RoundModel::Probabilistic {
            p_live_correct: self.p_live_correct,
            p_test_win: self.p_test_win,
        }
    }
}

/// Memoryless quantum strategy: one device setup, one committed live
/// measurement, and a per-(k, theta) guess table.
pub struct QuantumStrategy {
    name: String,
    model: Arc<QuantumRoundModel>,
}

impl QuantumStrategy {
    /// Build from a setup and Bob's live POVM; the guess table is the
    /// likelihood-optimal map `(k, theta) -> argmax_x P(x | k, theta)`,
    /// fixed before the protocol starts.
    pub fn new(name: &str, setup: &DeviceSetup, live_povm: &[HermitianOperator]) -> Result<Self> {
        if live_povm.is_empty() {
            return Err(Error::Strategy("live POVM must be nonempty".into()));
        }
        let mut completeness = live_povm[0].matrix().clone();
        for e in &live_povm[1..] {
            completeness = completeness.add(e.matrix())?;
        }
        let id = crate::matrix::ComplexMatrix::identity(setup.dim_b());
        if completeness.max_abs_diff(&id) > 1e-9 {
            return Err(Error::Strategy("live POVM does not sum to identity".into()));
        }

        let mut test_law = [[[[0.0; 2]; 2]; 2]; 2];
        for theta in 0..2u8 {
            for t in 0..2u8 {
                let pa = observable_povm(setup.a(theta));
                let pb = observable_povm(setup.b(t));
                let p = joint_outcome_probs(setup.rho(), setup.dim_a(), setup.dim_b(), &pa, &pb)?;
                for x in 0..2 {
                    for y in 0..2 {
                        test_law[theta as usize][t as usize][x][y] = p[x][y];
                    }
                }
            }
        }

        let k_count = live_povm.len();
        let mut live_law: [[Vec<f64>; 2]; 2] = [
            [vec![0.0; k_count], vec![0.0; k_count]],
            [vec![0.0; k_count], vec![0.0; k_count]],
        ];
        for theta in 0..2u8 {
            let pa = observable_povm(setup.a(theta));
            let p = joint_outcome_probs(setup.rho(), setup.dim_a(), setup.dim_b(), &pa, live_povm)?;
            for x in 0..2 {
                for k in 0..k_count {
                    live_law[theta as usize][x][k] = p[x][k];
                }
            }
        }

        let mut guess = vec![[0u8; 2]; k_count];
        for k in 0..k_count {
            for theta in 0..2 {
                let p0 = live_law[theta][0][k];
                let p1 = live_law[theta][1][k];
                guess[k][theta] = if p1 > p0 { 1 } else { 0 };
            }
        }

        Ok(QuantumStrategy {
            name: name.to_string(),
            model: Arc::new(QuantumRoundModel {
                test_law,
                live_law,
                guess,
            }),
        })
    }

    /// The tight qubit attack for the saturating family: Bob measures along
    /// the bisector of Alice's two Bloch directions (the `B0` optimizer) and
    /// guesses optimally from `(k, theta)`.
    pub fn bisector(theta: f64) -> Result<Self> {
        let setup = saturating_setup(theta)?;
        let povm = observable_povm(setup.b(0));
        Self::new(&format!("quantum-bisector({theta})"), &setup, &povm)
    }

    /// Bisector attack on the ideal CHSH setup.
    pub fn bisector_ideal() -> Self {
        let setup = ideal_setup();
        let povm = observable_povm(setup.b(0));
        Self::new("quantum-bisector(ideal)", &setup, &povm).expect("static")
    }

    pub fn model(&self) -> &QuantumRoundModel {
        &self.model
    }
}

impl AttackStrategy for QuantumStrategy {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn claims_admissible(&self) -> bool {
        true
    }

    fn round_model(&self, _round: usize, _memory: u64) -> RoundModel {
        RoundModel::Quantum(Arc::clone(&self.model))
    }
}

/// Execute one sequential-attack run. Draw order per round is fixed: round
/// type, Alice's basis, then the branch-specific draws.
pub fn run_sequential_attack(
    params: &TestParams,
    strategy: &dyn AttackStrategy,
    seed: u64,
) -> Result<Transcript> {
    let mut stream = rng::stream(seed, 0);
    run_with_stream(params, strategy, &mut stream)
}

fn run_with_stream(
    params: &TestParams,
    strategy: &dyn AttackStrategy,
    rng: &mut rng::Stream,
) -> Result<Transcript> {
    let mut rounds = Vec::with_capacity(params.n as usize);
    let mut memory = strategy.initial_memory();
    for j in 0..params.n as usize {
        let model = strategy.round_model(j, memory);
        let is_test = rng.gen_bool(params.q);
        let theta = rng.gen_range(0..2u8);
        let record = match model {
            RoundModel::Probabilistic {
                p_live_correct,
                p_test_win,
            } => {
                for (label, p) in [("p_live_correct", p_live_correct), ("p_test_win", p_test_win)]
                {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::Strategy(format!("{label} = {p} outside [0, 1]")));
                    }
                }
                if is_test {
                    let t = rng.gen_range(0..2u8);
                    let x = rng.gen_range(0..2u8);
                    let win = rng.gen_bool(p_test_win);
                    let y = x ^ (theta & t) ^ u8::from(!win);
                    RoundRecord {
                        q: 1,
                        theta,
                        x,
                        t: Some(t),
                        y: Some(y),
                        k: None,
                        guess: None,
                    }
                } else {
                    let x = rng.gen_range(0..2u8);
                    let correct = rng.gen_bool(p_live_correct);
                    let guess = if correct { x } else { x ^ 1 };
                    RoundRecord {
                        q: 0,
                        theta,
                        x,
                        t: None,
                        y: None,
                        k: Some(u32::from(guess)),
                        guess: Some(guess),
                    }
                }
            }
            RoundModel::Quantum(model) => {
                if is_test {
                    let t = rng.gen_range(0..2u8);
                    let law = &model.test_law[theta as usize][t as usize];
                    let cell = sample_index(rng, law.iter().flatten().copied());
                    let (x, y) = ((cell / 2) as u8, (cell % 2) as u8);
                    RoundRecord {
                        q: 1,
                        theta,
                        x,
                        t: Some(t),
                        y: Some(y),
                        k: None,
                        guess: None,
                    }
                } else {
                    let law = &model.live_law[theta as usize];
                    let k_count = law[0].len();
                    let cell = sample_index(rng, law[0].iter().chain(law[1].iter()).copied());
                    let (x, k) = ((cell / k_count) as u8, cell % k_count);
                    let guess = model.guess[k][theta as usize];
                    RoundRecord {
                        q: 0,
                        theta,
                        x,
                        t: None,
                        y: None,
                        k: Some(k as u32),
                        guess: Some(guess),
                    }
                }
            }
        };
        memory = strategy.update_memory(j, memory, &record);
        rounds.push(record);
    }
    Transcript::from_rounds(params, rounds)
}

/// Draw an index proportionally to `weights` (already summing to ~1).
fn sample_index(rng: &mut rng::Stream, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let u: f64 = rng.gen_range(0.0..1.0) * total;
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    let mut count = 0;
    for (i, w) in weights.enumerate() {
        count = i + 1;
        if w > 0.0 {
            last_nonzero = i;
        }
        acc += w;
        if u < acc {
            return i;
        }
    }
    let _ = count;
    last_nonzero
}

/// Aggregated Monte-Carlo estimate of the failure probability.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonteCarloReport {
    /// empirical failure probability `failures / trials`
    pub p_hat: f64,
    /// 99% Wilson score interval for `p_hat`
    pub ci_low: f64,
    pub ci_high: f64,
    /// closed-form bound `alpha_min(q, gamma)^n`
    pub bound: f64,
    /// true when even the lower confidence limit exceeds the bound
    pub bound_violated: bool,
    pub p_pass_hat: f64,
    /// `failures / passes`, absent when nothing passed
    pub conditional_rate: Option<f64>,
    pub trials: u64,
    pub passes: u64,
    pub failures: u64,
    pub vacuous_passes: u64,
    pub test_rounds: u64,
    pub test_wins: u64,
    pub live_rounds: u64,
    pub live_correct: u64,
    pub seed: u64,
    pub params: TestParams,
    pub strategy: String,
    pub claims_admissible: bool,
    pub degenerate: bool,
}

#[derive(Clone, Copy, Default)]
struct Counts {
    passes: u64,
    failures: u64,
    vacuous: u64,
    test_rounds: u64,
    test_wins: u64,
    live_rounds: u64,
    live_correct: u64,
}

impl Counts {
    fn merge(mut self, other: Counts) -> Counts {
        self.passes += other.passes;
        self.failures += other.failures;
        self.vacuous += other.vacuous;
        self.test_rounds += other.test_rounds;
        self.test_wins += other.test_wins;
        self.live_rounds += other.live_rounds;
        self.live_correct += other.live_correct;
        self
    }

    fn from_transcript(t: &Transcript) -> Counts {
        let mut c = Counts {
            passes: u64::from(t.passed),
            failures: u64::from(t.failed),
            vacuous: u64::from(t.vacuous_pass),
            ..Counts::default()
        };
        for r in &t.rounds {
            if r.q == 1 {
                c.test_rounds += 1;
                c.test_wins += u64::from(r.test_win() == Some(true));
            } else {
                c.live_rounds += 1;
                c.live_correct += u64::from(r.guess_correct() == Some(true));
            }
        }
        c
    }
}

/// Monte-Carlo failure estimate over independent trials, parallel when the
/// `parallel` feature is on. Counts are summed, so the result is identical
/// to the sequential run regardless of thread count.
pub fn monte_carlo_failure(
    params: &TestParams,
    strategy: &dyn AttackStrategy,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloReport> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        check_trials(trials)?;
        let counts = (0..trials)
            .into_par_iter()
            .map(|i| {
                let mut stream = rng::stream(seed, i);
                run_with_stream(params, strategy, &mut stream)
                    .map(|t| Counts::from_transcript(&t))
            })
            .try_reduce(Counts::default, |a, b| Ok(a.merge(b)))?;
        Ok(build_report(params, strategy, trials, seed, counts))
    }
    #[cfg(not(feature = "parallel"))]
    {
        monte_carlo_failure_sequential(params, strategy, trials, seed)
    }
}

/// Sequential twin of [`monte_carlo_failure`].
pub fn monte_carlo_failure_sequential(
    params: &TestParams,
    strategy: &dyn AttackStrategy,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloReport> {
    check_trials(trials)?;
    let mut counts = Counts::default();
    for i in 0..trials {
        let mut stream = rng::stream(seed, i);
        let t = run_with_stream(params, strategy, &mut stream)?;
        counts = counts.merge(Counts::from_transcript(&t));
    }
    Ok(build_report(params, strategy, trials, seed, counts))
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::Domain("trials must be >= 1".into()));
    }
    Ok(())
}

fn build_report(
    params: &TestParams,
    strategy: &dyn AttackStrategy,
    trials: u64,
    seed: u64,
    counts: Counts,
) -> MonteCarloReport {
    let p_hat = counts.failures as f64 / trials as f64;
    let (ci_low, ci_high) = wilson_interval(counts.failures, trials, 2.575_829_303_548_900_4);
    let bound = alpha::failure_bound(params).expect("params validated");
    MonteCarloReport {
        p_hat,
        ci_low,
        ci_high,
        bound,
        bound_violated: ci_low > bound,
        p_pass_hat: counts.passes as f64 / trials as f64,
        conditional_rate: (counts.passes > 0)
            .then(|| counts.failures as f64 / counts.passes as f64),
        trials,
        passes: counts.passes,
        failures: counts.failures,
        vacuous_passes: counts.vacuous,
        test_rounds: counts.test_rounds,
        test_wins: counts.test_wins,
        live_rounds: counts.live_rounds,
        live_correct: counts.live_correct,
        seed,
        params: params.clone(),
        strategy: strategy.name(),
        claims_admissible: strategy.claims_admissible(),
        degenerate: params.degenerate(),
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Honest execution of the protocol with ideal devices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HonestRun {
    pub x: Vec<u8>,
    pub theta: Vec<u8>,
    pub theta_prime: Vec<u8>,
    pub bob_z: Vec<u8>,
    /// `{ j : theta_j = theta'_j }`
    pub index_set: Vec<usize>,
    /// Alice's bits restricted to the index set
    pub substring: Vec<u8>,
}

/// Run the honest protocol on ideal devices: EPR pairs, both parties
/// measuring computational/Hadamard by independent uniform basis strings.
/// On the index set Bob's outcomes reproduce Alice's bits exactly.
pub fn run_honest(n: u64, seed: u64) -> Result<HonestRun> {
    if n < 1 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    let rho = crate::chsh::phi_plus();
    let obs = [crate::chsh::pauli_z(), crate::chsh::pauli_x()];
    // law[theta][theta'][x][z]
    let mut law = [[[[0.0f64; 2]; 2]; 2]; 2];
    for theta in 0..2usize {
        for tp in 0..2usize {
            let pa = observable_povm(&obs[theta]);
            let pb = observable_povm(&obs[tp]);
            let p = joint_outcome_probs(&rho, 2, 2, &pa, &pb)?;
            for x in 0..2 {
                for z in 0..2 {
                    law[theta][tp][x][z] = p[x][z];
                }
            }
        }
    }

    let mut rng = rng::stream(seed, 0);
    let mut run = HonestRun {
        x: Vec::with_capacity(n as usize),
        theta: Vec::with_capacity(n as usize),
        theta_prime: Vec::with_capacity(n as usize),
        bob_z: Vec::with_capacity(n as usize),
        index_set: Vec::new(),
        substring: Vec::new(),
    };
    for j in 0..n as usize {
        let theta = rng.gen_range(0..2u8);
        let tp = rng.gen_range(0..2u8);
        let cell = sample_index(
            &mut rng,
            law[theta as usize][tp as usize].iter().flatten().copied(),
        );
        let (x, z) = ((cell / 2) as u8, (cell % 2) as u8);
        run.theta.push(theta);
        run.theta_prime.push(tp);
        run.x.push(x);
        run.bob_z.push(z);
        if theta == tp {
            run.index_set.push(j);
            run.substring.push(x);
        }
    }
    Ok(run)
}

/// Exact distribution of the index set for a fixed basis string `theta`
/// (as a bitmask) when Bob's `theta'` is enumerated uniformly: every subset
/// mask appears with probability exactly `2^-n`.
pub fn honest_bob_uniformity(n: u32, theta: u64) -> Result<BTreeMap<u64, f64>> {
    if n == 0 || n > 16 {
        return Err(Error::Domain("n must be in 1..=16 for enumeration".into()));
    }
    let size = 1u64 << n;
    let mask = size - 1;
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for tp in 0..size {
        let index_set = !(theta ^ tp) & mask;
        *counts.entry(index_set).or_insert(0) += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(set, c)| (set, c as f64 / size as f64))
        .collect())
}

/// One survival-function comparison of the recursion audit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransitionRow {
    pub l: u64,
    pub x: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
    pub ok: bool,
}

/// One ansatz comparison `Pr[X_l >= x && H_l] <= alpha^l e^{-k x}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnsatzRow {
    pub l: u64,
    pub x: f64,
    pub empirical: f64,
    pub bound: f64,
    pub tol: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecursionAuditReport {
    pub transitions: Vec<TransitionRow>,
    pub ansatz: Vec<AnsatzRow>,
    pub k_star: f64,
    pub alpha_at_k_star: f64,
    pub trials: u64,
    pub seed: u64,
    pub all_ok: bool,
}

/// Empirically audit the one-step recursion of the martingale variable
/// `X_l = S_l - gamma R_l` restricted to the all-guesses-correct event, and
/// the exponential ansatz at the optimizing `k*`. Requires a constant
/// probabilistic round law (the recursion coefficients are its
/// `(p_L, p_T)`).
pub fn recursion_audit(
    params: &TestParams,
    strategy: &dyn AttackStrategy,
    trials: u64,
    seed: u64,
) -> Result<RecursionAuditReport> {
    check_trials(trials)?;
    if params.n == 0 {
        return Err(Error::Domain("audit needs n >= 1".into()));
    }
    let (p_l, p_t) = match strategy.round_model(0, strategy.initial_memory()) {
        RoundModel::Probabilistic {
            p_live_correct,
            p_test_win,
        } => (p_live_correct, p_test_win),
        RoundModel::Quantum(_) => {
            return Err(Error::Strategy(
                "recursion audit requires a fixed probabilistic round law".into(),
            ));
        }
    };

    let n = params.n as usize;
    // counts[l] maps (s_l, r_l) -> number of trials with H_l still true.
    let mut counts: Vec<BTreeMap<(u64, u64), u64>> = vec![BTreeMap::new(); n + 1];
    for trial in 0..trials {
        let mut stream = rng::stream(seed, trial);
        let t = run_with_stream(params, strategy, &mut stream)?;
        let mut s = 0u64;
        let mut r = 0u64;
        let mut h = true;
        *counts[0].entry((0, 0)).or_insert(0) += 1;
        for (l, round) in t.rounds.iter().enumerate() {
            if round.q == 1 {
                r += 1;
                if round.test_win() == Some(true) {
                    s += 1;
                }
            } else if round.guess_correct() != Some(true) {
                h = false;
            }
            if h {
                *counts[l + 1].entry((s, r)).or_insert(0) += 1;
            }
        }
    }

    let survival = |l: usize, x: f64| -> f64 {
        let mut acc = 0u64;
        for (&(s, r), &c) in &counts[l] {
            if s as f64 - params.gamma * r as f64 >= x - 1e-9 {
                acc += c;
            }
        }
        acc as f64 / trials as f64
    };

    // Lattice-valued thresholds a(1 - gamma) - b*gamma, deduplicated.
    let mut grid = Vec::new();
    for a in 0..=4u32 {
        for b in 0..=2u32 {
            let x = a as f64 * (1.0 - params.gamma) - b as f64 * params.gamma;
            if grid.iter().all(|&g: &f64| (g - x).abs() > 1e-12) {
                grid.push(x);
            }
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite"));

    let tol = 3.0 / (trials as f64).sqrt();
    let mut transitions = Vec::new();
    for l in 0..n {
        for &x in &grid {
            let lhs = survival(l + 1, x);
            let rhs = survival(l, x) * (1.0 - params.q) * p_l
                + survival(l, x - (1.0 - params.gamma)) * params.q * p_t
                + survival(l, x + params.gamma) * params.q * (1.0 - p_t);
            transitions.push(TransitionRow {
                l: l as u64,
                x,
                lhs,
                rhs,
                tol,
                ok: (lhs - rhs).abs() <= tol,
            });
        }
    }

    let alpha_result = alpha::alpha_min(params.q, params.gamma)?;
    let mut ansatz = Vec::new();
    for l in 0..=n {
        for &x in &grid {
            let empirical = survival(l, x);
            let bound = alpha_result
                .alpha_min
                .powi(l as i32)
                * (-alpha_result.k_star * x).exp();
            let se = (empirical * (1.0 - empirical) / trials as f64).sqrt();
            let tol = 3.0 * se + 1.0 / trials as f64;
            ansatz.push(AnsatzRow {
                l: l as u64,
                x,
                empirical,
                bound: bound.min(1.0),
                tol,
                ok: empirical <= bound.min(1.0) + tol,
            });
        }
    }

    let all_ok = transitions.iter().all(|r| r.ok) && ansatz.iter().all(|r| r.ok);
    Ok(RecursionAuditReport {
        transitions,
        ansatz,
        k_star: alpha_result.k_star,
        alpha_at_k_star: alpha_result.alpha_min,
        trials,
        seed,
        all_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(q: f64, gamma: f64, n: u64) -> TestParams {
        TestParams::new(q, gamma, n).unwrap()
    }

    #[test]
    fn transcripts_are_deterministic() {
        let p = params(0.5, 0.85, 50);
        let s = FixedLawStrategy::classical_endpoint();
        let t1 = run_sequential_attack(&p, &s, 99).unwrap();
        let t2 = run_sequential_attack(&p, &s, 99).unwrap();
        assert_eq!(t1.to_json_lines(), t2.to_json_lines());
        let t3 = run_sequential_attack(&p, &s, 100).unwrap();
        assert_ne!(t1.to_json_lines(), t3.to_json_lines());
        t1.validate(&p).unwrap();
    }

    #[test]
    fn transcript_counter_identities() {
        let p = params(0.4, 0.8, 200);
        let s = FixedLawStrategy::new(0.9, 0.8).unwrap();
        let t = run_sequential_attack(&p, &s, 7).unwrap();
        let r: u64 = t.rounds.iter().map(|r| r.q as u64).sum();
        assert_eq!(r, t.r_n);
        let s_n: u64 = t
            .rounds
            .iter()
            .filter(|r| r.q == 1)
            .map(|r| u64::from(r.test_win() == Some(true)))
            .sum();
        assert_eq!(s_n, t.s_n);
        assert_eq!(
            t.h_n,
            t.rounds
                .iter()
                .filter(|r| r.q == 0)
                .all(|r| r.guess_correct() == Some(true))
        );
        assert_eq!(t.failed, t.passed && t.h_n);
        t.validate(&p).unwrap();
    }

    #[test]
    fn degenerate_perfect_strategy_always_fails_protocol() {
        let p = params(0.5, 1.0, 30);
        let s = FixedLawStrategy::new(1.0, 1.0).unwrap();
        assert!(!s.claims_admissible());
        for seed in 0..20 {
            let t = run_sequential_attack(&p, &s, seed).unwrap();
            assert!(t.passed && t.h_n && t.failed);
        }
    }

    #[test]
    fn vacuous_pass_when_never_testing() {
        let p = params(0.0, 0.9, 10);
        let s = FixedLawStrategy::classical_endpoint();
        let t = run_sequential_attack(&p, &s, 5).unwrap();
        assert_eq!(t.r_n, 0);
        assert!(t.passed && t.vacuous_pass);
        assert!(t.f_chsh.is_none());
    }

    #[test]
    fn empirical_rates_match_declared_law() {
        let p = params(0.5, 0.85, 40);
        let s = FixedLawStrategy::new(0.9, 0.8).unwrap();
        let report = monte_carlo_failure(&p, &s, 20_000, 42).unwrap();
        let total_rounds = report.test_rounds + report.live_rounds;
        assert_eq!(total_rounds, 40 * 20_000);
        let test_rate = report.test_wins as f64 / report.test_rounds as f64;
        let live_rate = report.live_correct as f64 / report.live_rounds as f64;
        let sigma_t = (0.8f64 * 0.2 / report.test_rounds as f64).sqrt();
        let sigma_l = (0.9f64 * 0.1 / report.live_rounds as f64).sqrt();
        assert!((test_rate - 0.8).abs() < 3.0 * sigma_t, "test rate {test_rate}");
        assert!((live_rate - 0.9).abs() < 3.0 * sigma_l, "live rate {live_rate}");
    }

    #[test]
    fn factorization_exact_on_counts() {
        let p = params(0.5, 0.85, 20);
        let s = FixedLawStrategy::classical_endpoint();
        let report = monte_carlo_failure(&p, &s, 5_000, 11).unwrap();
        assert!(report.failures <= report.passes);
        if report.passes > 0 {
            let product = report.p_pass_hat * report.conditional_rate.unwrap();
            assert!((product - report.p_hat).abs() < 1e-12);
        }
        assert!(monte_carlo_failure(&p, &s, 0, 1).is_err());
    }

    #[test]
    fn classical_endpoint_respects_bound() {
        let p = params(0.5, 0.85, 20);
        let s = FixedLawStrategy::classical_endpoint();
        let report = monte_carlo_failure(&p, &s, 20_000, 123).unwrap();
        assert!(
            report.ci_high <= report.bound,
            "ci_high {} vs bound {}",
            report.ci_high,
            report.bound
        );
        assert!(!report.bound_violated);
    }

    #[test]
    fn quantum_bisector_rates() {
        let p = params(0.5, 0.85, 40);
        let s = QuantumStrategy::bisector_ideal();
        assert!(s.claims_admissible());
        let report = monte_carlo_failure(&p, &s, 20_000, 77).unwrap();
        let opt = 0.5 + 0.5 * std::f64::consts::FRAC_1_SQRT_2;
        let test_rate = report.test_wins as f64 / report.test_rounds as f64;
        let live_rate = report.live_correct as f64 / report.live_rounds as f64;
        let sigma = (opt * (1.0 - opt) / report.test_rounds as f64).sqrt();
        assert!((test_rate - opt).abs() < 3.0 * sigma, "test rate {test_rate}");
        let sigma = (opt * (1.0 - opt) / report.live_rounds as f64).sqrt();
        assert!((live_rate - opt).abs() < 3.0 * sigma, "live rate {live_rate}");
    }

    #[test]
    fn admissibility_classification() {
        assert!(pair_is_admissible(1.0, 0.75));
        assert!(pair_is_admissible(0.85, 0.85));
        // (0.9, 0.85) lies exactly on the curve (t = 0.28).
        assert!(pair_is_admissible(0.9, 0.85));
        assert!(!pair_is_admissible(1.0, 0.76));
        assert!(!pair_is_admissible(0.9, 0.86));
        let opt = 0.5 + 0.5 * std::f64::consts::FRAC_1_SQRT_2;
        assert!(pair_is_admissible(opt, opt));
        assert!(FixedLawStrategy::new(1.2, 0.5).is_err());
    }

    #[test]
    fn honest_run_agreement_on_index_set() {
        for seed in 0..50 {
            let run = run_honest(16, seed).unwrap();
            for (&j, &bit) in run.index_set.iter().zip(&run.substring) {
                assert_eq!(run.x[j], bit);
                assert_eq!(run.bob_z[j], bit);
            }
        }
    }

    #[test]
    fn honest_run_complement_is_noisy() {
        let mut disagree = 0u64;
        let mut total = 0u64;
        for seed in 0..200 {
            let run = run_honest(16, seed).unwrap();
            for j in 0..16 {
                if run.theta[j] != run.theta_prime[j] {
                    total += 1;
                    disagree += u64::from(run.x[j] != run.bob_z[j]);
                }
            }
        }
        let rate = disagree as f64 / total as f64;
        assert!((rate - 0.5).abs() < 3.0 * (0.25 / total as f64).sqrt());
    }

    #[test]
    fn index_set_size_is_binomial() {
        let mut sizes = Vec::new();
        for seed in 0..2_000 {
            sizes.push(run_honest(8, seed).unwrap().index_set.len() as f64);
        }
        let mean = sizes.iter().sum::<f64>() / sizes.len() as f64;
        let sigma = (8.0f64 * 0.25 / sizes.len() as f64).sqrt();
        assert!((mean - 4.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn uniformity_enumeration_exact() {
        for n in 1..=4u32 {
            for &theta in &[0u64, (1 << n) - 1, 0b1010 & ((1 << n) - 1)] {
                let dist = honest_bob_uniformity(n, theta).unwrap();
                assert_eq!(dist.len(), 1 << n);
                for (_, p) in dist {
                    assert_eq!(p, 1.0 / (1u64 << n) as f64);
                }
            }
        }
        assert!(honest_bob_uniformity(0, 0).is_err());
        assert!(honest_bob_uniformity(17, 0).is_err());
    }

    #[test]
    fn recursion_audit_fixed_law() {
        let p = params(0.5, 0.85, 10);
        let s = FixedLawStrategy::curve_at_optimal_k(0.5, 0.85).unwrap();
        let report = recursion_audit(&p, &s, 20_000, 31).unwrap();
        assert!(report.all_ok, "audit rows failed");
        // l = 0 at x = 0 is exactly 1.
        let zero = report
            .ansatz
            .iter()
            .find(|r| r.l == 0 && r.x.abs() < 1e-12)
            .unwrap();
        assert_eq!(zero.empirical, 1.0);
        // Quantum strategies are rejected.
        let q = QuantumStrategy::bisector_ideal();
        assert!(recursion_audit(&p, &q, 100, 1).is_err());
    }

    #[test]
    fn one_round_closed_form_convolution() {
        let (q, gamma) = (0.5, 0.85);
        let p = params(q, gamma, 1);
        let s = FixedLawStrategy::new(0.9, 0.8).unwrap();
        let trials = 40_000u64;
        let mut at_zero = 0u64;
        for trial in 0..trials {
            let mut stream = rng::stream(17, trial);
            let t = run_with_stream(&p, &s, &mut stream).unwrap();
            let x1 = t.s_n as f64 - gamma * t.r_n as f64;
            if t.h_n && x1 >= -1e-9 {
                at_zero += 1;
            }
        }
        // Pr[X_1 >= 0 && H_1] = (1-q) p_L + q p_T  (live success keeps X at
        // 0; a won test moves it to 1 - gamma > 0; a lost test to -gamma).
        let expect = (1.0 - q) * 0.9 + q * 0.8;
        let rate = at_zero as f64 / trials as f64;
        let sigma = (expect * (1.0 - expect) / trials as f64).sqrt();
        assert!((rate - expect).abs() < 3.0 * sigma, "rate {rate} vs {expect}");
    }

    #[test]
    fn probability_zero_above_lattice_ceiling() {
        let p = params(0.6, 0.85, 12);
        let s = FixedLawStrategy::new(0.95, 0.9).unwrap();
        for trial in 0..200 {
            let mut stream = rng::stream(23, trial);
            let t = run_with_stream(&p, &s, &mut stream).unwrap();
            let mut s_l = 0u64;
            let mut r_l = 0u64;
            for (l, round) in t.rounds.iter().enumerate() {
                if round.q == 1 {
                    r_l += 1;
                    if round.test_win() == Some(true) {
                        s_l += 1;
                    }
                }
                let x = s_l as f64 - p.gamma * r_l as f64;
                assert!(x <= (1.0 - p.gamma) * (l as f64 + 1.0) + 1e-9);
            }
        }
    }

    #[test]
    fn parallel_and_sequential_reports_agree() {
        let p = params(0.5, 0.85, 10);
        let s = FixedLawStrategy::classical_endpoint();
        let a = monte_carlo_failure(&p, &s, 2_000, 5).unwrap();
        let b = monte_carlo_failure_sequential(&p, &s, 2_000, 5).unwrap();
        assert_eq!(a.failures, b.failures);
        assert_eq!(a.passes, b.passes);
        assert_eq!(a.p_hat, b.p_hat);
    }

    #[test]
    fn wilson_interval_sanity() {
        let (lo, hi) = wilson_interval(0, 100, 2.5758);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.1);
        let (lo, hi) = wilson_interval(100, 100, 2.5758);
        assert!(lo > 0.9);
        assert_eq!(hi, 1.0);
        let (lo, hi) = wilson_interval(50, 100, 2.5758);
        assert!(lo < 0.5 && hi > 0.5);
    }
}
