//! Named runtime verification checks: the invariant suites of every layer
//! plus the exact counterexample oracles, reported machine-readably.

use num_complex::Complex64;
use rand::Rng;
use serde_json::json;

use wse_di_core::alpha::{self, TestParams};
use wse_di_core::bounds;
use wse_di_core::chsh;
use wse_di_core::guessing;
use wse_di_core::matrix::{
    anticommutator, commutator, hermitian_eig, operator_abs, ComplexMatrix, DensityMatrix,
    HermitianOperator,
};
use wse_di_core::rng;
use wse_di_core::sim::{
    self, monte_carlo_failure, run_honest, run_sequential_attack, AttackStrategy,
    FixedLawStrategy,
};

pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub observed: String,
    pub expected: String,
}

impl CheckResult {
    fn new(name: &str, pass: bool, observed: impl ToString, expected: impl ToString) -> Self {
        CheckResult {
            name: name.to_string(),
            pass,
            observed: observed.to_string(),
            expected: expected.to_string(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "name": self.name,
            "pass": self.pass,
            "observed": self.observed,
            "expected": self.expected,
        })
    }
}

fn random_hermitian(dim: usize, rng: &mut rng::Stream) -> HermitianOperator {
    let mut m = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            m.set(
                i,
                j,
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            );
        }
    }
    let sym = m.add(&m.adjoint()).unwrap().scale(Complex64::new(0.5, 0.0));
    HermitianOperator::new(sym).unwrap()
}

fn random_observable(dim: usize, rng: &mut rng::Stream) -> HermitianOperator {
    let h = random_hermitian(dim, rng);
    let norm = h.operator_norm().max(1e-12);
    h.scale(rng.gen_range(0.2..1.0) / norm)
}

/// Run every named check with the given master seed.
pub fn run_checks(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();

    // -- matrix layer -----------------------------------------------------
    {
        let mut rng = rng::stream(seed, 1);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let dim = rng.gen_range(2..=4);
            let a = random_hermitian(dim, &mut rng);
            let b = random_hermitian(dim, &mut rng);
            let abs_sum = operator_abs(&a.add(&b).unwrap());
            let abs_diff = operator_abs(&a.sub(&b).unwrap());
            let lhs = abs_sum
                .matrix()
                .mul(abs_sum.matrix())
                .unwrap()
                .add(&abs_diff.matrix().mul(abs_diff.matrix()).unwrap())
                .unwrap();
            let rhs = a
                .matrix()
                .mul(a.matrix())
                .unwrap()
                .add(&b.matrix().mul(b.matrix()).unwrap())
                .unwrap()
                .scale(Complex64::new(2.0, 0.0));
            worst = worst.max(lhs.max_abs_diff(&rhs));
        }
        out.push(CheckResult::new(
            "matrix.anticom_com_equality",
            worst <= 1e-9,
            format!("max defect {worst:.3e}"),
            "<= 1e-9",
        ));
    }
    {
        let mut rng = rng::stream(seed, 2);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..100 {
            let dim = rng.gen_range(2..=4);
            let a = random_observable(dim, &mut rng);
            let b = random_observable(dim, &mut rng);
            let acom = operator_abs(&anticommutator(&a, &b).unwrap());
            let comm = commutator(&a, &b).unwrap();
            let total = acom
                .matrix()
                .mul(acom.matrix())
                .unwrap()
                .add(&comm.adjoint().mul(&comm).unwrap())
                .unwrap();
            worst = worst.max(hermitian_eig(&HermitianOperator::new(total).unwrap()).values[0]);
        }
        out.push(CheckResult::new(
            "matrix.operator_inequality",
            worst <= 4.0 + 1e-9,
            format!("max eigenvalue {worst}"),
            "<= 4 + 1e-9",
        ));
    }

    // -- certification chain ----------------------------------------------
    {
        let beta = chsh::chsh_value(&chsh::ideal_setup());
        out.push(CheckResult::new(
            "chsh.ideal_beta",
            (beta - chsh::CHSH_MAX).abs() <= 1e-10,
            beta,
            "2*sqrt(2) +- 1e-10",
        ));
    }
    {
        let slack = chsh::min_slack_over_random_setups(1000, seed ^ 0x5eed);
        out.push(CheckResult::new(
            "chsh.prop2_random_slack",
            slack >= -1e-9,
            format!("min slack {slack:.3e}"),
            ">= -1e-9 over 1000 setups",
        ));
    }
    {
        let mut worst: f64 = 0.0;
        for i in 1..=50 {
            let theta = std::f64::consts::FRAC_PI_2 * i as f64 / 50.0;
            let report =
                chsh::verify_beta_eps_bound(&chsh::saturating_setup(theta).unwrap()).unwrap();
            worst = worst.max(report.slack.abs());
        }
        out.push(CheckResult::new(
            "chsh.prop2_tightness",
            worst <= 1e-6,
            format!("max |slack| {worst:.3e}"),
            "<= 1e-6 over 50 angles",
        ));
    }

    // -- closed-form bounds -------------------------------------------------
    {
        let h0 = bounds::h(0.0).unwrap();
        out.push(CheckResult::new(
            "bounds.trusted_rate",
            (h0 - 0.2284).abs() <= 1e-4,
            h0,
            "0.2284 +- 1e-4",
        ));
        let f2 = bounds::f_of_beta(2.0).unwrap();
        let ftop = bounds::f_of_beta(chsh::CHSH_MAX).unwrap();
        out.push(CheckResult::new(
            "bounds.f_endpoints",
            f2 == 0.0 && (ftop - h0).abs() <= 1e-12,
            format!("f(2) = {f2}, f(2*sqrt(2)) = {ftop}"),
            "exactly 0 and h(0)",
        ));
        let mut monotone = true;
        let mut last = 0.0;
        for i in 1..=200 {
            let beta = 2.0 + (chsh::CHSH_MAX - 2.0) * i as f64 / 200.0;
            let v = bounds::f_of_beta(beta).unwrap();
            monotone &= v > last;
            last = v;
        }
        out.push(CheckResult::new(
            "bounds.f_monotone",
            monotone,
            format!("strictly increasing: {monotone}"),
            "200-point grid increasing",
        ));
        let mut worst: f64 = 0.0;
        for i in 1..=200 {
            let beta = 2.0 + (chsh::CHSH_MAX - 2.0) * i as f64 / 200.0;
            let eps = bounds::eps_plus_max_from_beta(beta).unwrap();
            let back = 2.0 * (1.0 + (1.0 - eps * eps).max(0.0).sqrt()).sqrt();
            worst = worst.max((back - beta).abs());
        }
        out.push(CheckResult::new(
            "bounds.beta_roundtrip",
            worst <= 1e-9,
            format!("max |back - beta| {worst:.3e}"),
            "<= 1e-9",
        ));
        let mut worst: f64 = 0.0;
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            let p = bounds::tradeoff_point(t).unwrap();
            let alt_l = 0.5 + 0.5 * ((1.0 + t) / 2.0).sqrt();
            let alt_t = 0.5 + 0.25 * (1.0 + (1.0 - t * t).sqrt()).sqrt();
            worst = worst.max((p.p_l - alt_l).abs()).max((p.p_t - alt_t).abs());
        }
        out.push(CheckResult::new(
            "bounds.tradeoff_consistency",
            worst <= 1e-12,
            format!("max route difference {worst:.3e}"),
            "<= 1e-12",
        ));
    }

    // -- decay rate ---------------------------------------------------------
    {
        let mut worst: f64 = 0.0;
        for qi in 0..20 {
            for gi in 0..20 {
                let q = qi as f64 / 19.0;
                let gamma = 0.75 + 0.25 * gi as f64 / 19.0;
                worst = worst.max((alpha::alpha(q, gamma, 0.0).unwrap() - 1.0).abs());
            }
        }
        out.push(CheckResult::new(
            "alpha.g_at_zero",
            worst <= 1e-12,
            format!("max |g(0) - 1| {worst:.3e}"),
            "<= 1e-12 on 20x20 grid",
        ));
    }
    {
        let mut rng = rng::stream(seed, 3);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let q = rng.gen_range(0.0..=1.0);
            let gamma = rng.gen_range(0.75..=1.0);
            let k = rng.gen_range(0.0..6.0);
            let gv = alpha::g(q, gamma, k).unwrap();
            let c = alpha::coefficients(q, gamma, k).unwrap();
            let mut best = f64::NEG_INFINITY;
            for i in 0..=10_000 {
                let u = i as f64 / 10_000.0;
                let t = 1.0 - u * u;
                best = best.max(c.a * (1.0 + t).sqrt() + c.b * (1.0 - t).sqrt() + c.c);
            }
            worst = worst.max((gv.value - best).abs());
        }
        out.push(CheckResult::new(
            "alpha.cauchy_schwarz_tightness",
            worst <= 1e-7,
            format!("max |closed - grid| {worst:.3e}"),
            "<= 1e-7 on 10^4-point t-grid",
        ));
    }
    {
        let mut worst: f64 = 0.0;
        for qi in 0..10 {
            for gi in 0..10 {
                let q = qi as f64 / 10.0;
                let gamma = 0.75 + 0.25 * gi as f64 / 10.0;
                let numeric = alpha::taylor_slope(q, gamma).unwrap();
                worst = worst.max((numeric - (0.75 - gamma) * q).abs());
            }
        }
        out.push(CheckResult::new(
            "alpha.taylor_slope",
            worst <= 1e-4,
            format!("max slope error {worst:.3e}"),
            "<= 1e-4",
        ));
    }
    {
        let mut worst: f64 = 0.0;
        for (q, gamma) in [(0.5, 0.85), (0.2, 0.9), (0.8, 0.78)] {
            let r = alpha::alpha_min(q, gamma).unwrap();
            let mut grid_min = f64::INFINITY;
            for i in 0..=100_000 {
                let k = 50.0 * i as f64 / 100_000.0;
                grid_min = grid_min.min(alpha::alpha(q, gamma, k).unwrap());
            }
            worst = worst.max((r.alpha_min - grid_min).abs());
        }
        out.push(CheckResult::new(
            "alpha.golden_vs_grid",
            worst <= 1e-7,
            format!("max |golden - grid| {worst:.3e}"),
            "<= 1e-7 on 10^5-point k-grid",
        ));
    }
    {
        let mut ok = true;
        let mut detail = String::new();
        for gi in 0..=5 {
            let gamma = 0.75 + 0.05 * gi as f64;
            let r = alpha::alpha_min(0.0, gamma).unwrap();
            if (r.alpha_min - 1.0).abs() > 1e-9 {
                ok = false;
                detail = format!("alpha_min(0, {gamma}) = {}", r.alpha_min);
            }
        }
        for qi in 0..=5 {
            let q = qi as f64 / 5.0;
            let r = alpha::alpha_min(q, 0.75).unwrap();
            if (r.alpha_min - 1.0).abs() > 1e-9 {
                ok = false;
                detail = format!("alpha_min({q}, 0.75) = {}", r.alpha_min);
            }
        }
        out.push(CheckResult::new(
            "alpha.security_boundaries",
            ok,
            if ok { "all boundaries at 1".to_string() } else { detail },
            "alpha_min = 1 +- 1e-9 at q=0 and gamma=3/4",
        ));
    }
    {
        let mut worst: f64 = 0.0;
        for qi in 1..=9 {
            for gi in 0..=23 {
                let q = qi as f64 / 10.0;
                let gamma = 0.76 + 0.01 * gi as f64;
                worst = worst.max(alpha::alpha_min(q, gamma).unwrap().alpha_min);
            }
        }
        out.push(CheckResult::new(
            "alpha.security_region",
            worst < 1.0 - 1e-6,
            format!("max interior alpha_min {worst}"),
            "< 1 - 1e-6 on q in [0.1,0.9], gamma in [0.76,0.99]",
        ));
    }

    // -- exact counterexamples ----------------------------------------------
    {
        let ex = guessing::appendix_a_example().unwrap();
        out.push(CheckResult::new(
            "appendixA.eps_eff",
            ex.eps_eff == 0.0,
            ex.eps_eff,
            "exactly 0",
        ));
        out.push(CheckResult::new(
            "appendixA.eps_plus",
            ex.eps_plus == 1.0,
            ex.eps_plus,
            "exactly 1",
        ));
        let with_k = guessing::pguess_postmeas_classical(&ex.table).unwrap().p_guess;
        out.push(CheckResult::new(
            "appendixA.pguess_with_k",
            with_k == 1.0,
            with_k,
            "exactly 1",
        ));
        let without_k = ex.table.pguess(&[0], &[1]).unwrap().p_guess;
        out.push(CheckResult::new(
            "appendixA.pguess_without_k",
            without_k == 0.75,
            without_k,
            "exactly 3/4",
        ));
    }
    {
        let d = guessing::appendix_c_distribution();
        let general = d.pguess(&[1, 2], &[0]).unwrap().p_guess;
        out.push(CheckResult::new(
            "appendixC.general",
            general == 0.5,
            general,
            "exactly 1/2",
        ));
        let (xs, ys) = guessing::appendix_c_sequential_args();
        let seq = d.pguess_sequential_grouped(&xs, &ys).unwrap().p_guess;
        out.push(CheckResult::new(
            "appendixC.sequential",
            seq == 0.375,
            seq,
            "exactly 3/8",
        ));
        let report = d.conditioning_check_grouped(&xs, &ys).unwrap();
        out.push(CheckResult::new(
            "appendixC.conditioning",
            report.holds && report.prefix_prob == 0.5 && report.conditional == 0.75,
            format!(
                "{} = {} * {}",
                report.p_seq, report.conditional, report.prefix_prob
            ),
            "3/8 = (3/4) * (1/2)",
        ));
    }

    // -- guessing layer -------------------------------------------------------
    {
        let mut rng = rng::stream(seed, 4);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let p1 = guessing::JointDistribution::random(vec![2, 3], &mut rng);
            let p2 = guessing::JointDistribution::random(vec![3, 2], &mut rng);
            let prod = p1.product(&p2);
            let joint = prod.pguess(&[0, 2], &[1, 3]).unwrap().h_min;
            let split = p1.pguess(&[0], &[1]).unwrap().h_min
                + p2.pguess(&[0], &[1]).unwrap().h_min;
            worst = worst.max((joint - split).abs());
        }
        out.push(CheckResult::new(
            "guessing.additivity",
            worst <= 1e-10,
            format!("max additivity defect {worst:.3e}"),
            "<= 1e-10 on 100 product tables",
        ));
    }
    {
        let mut rng = rng::stream(seed, 5);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..200 {
            let k_count = rng.gen_range(2..=4);
            let mut weights: Vec<f64> =
                (0..k_count).map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let ensemble: Vec<(f64, DensityMatrix)> = weights
                .into_iter()
                .map(|w| {
                    let amps = [
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    ];
                    (w, DensityMatrix::from_pure(&amps).unwrap())
                })
                .collect();
            let a0 = chsh::random_bloch_observable(&mut rng);
            let a1 = chsh::random_bloch_observable(&mut rng);
            let mut mix = ComplexMatrix::zeros(2);
            for (p, rho) in &ensemble {
                mix = mix.add(&rho.matrix().scale(Complex64::new(*p, 0.0))).unwrap();
            }
            let rho_a = DensityMatrix::new(HermitianOperator::new(mix).unwrap()).unwrap();
            let eps = chsh::absolute_effective_anticommutator(&a0, &a1, &rho_a).unwrap();
            let bound = bounds::p_l_max(eps).unwrap();
            let table = guessing::postmeasurement_table(&ensemble, &a0, &a1).unwrap();
            let p_guess = table.pguess(&[0], &[2, 1]).unwrap().p_guess;
            worst = worst.max(p_guess - bound);
        }
        out.push(CheckResult::new(
            "guessing.prop3_bound",
            worst <= 1e-9,
            format!("max excess over bound {worst:.3e}"),
            "<= 1e-9 on 200 constructions",
        ));
    }
    {
        let mut worst: f64 = 0.0;
        for i in 1..=10 {
            let theta = std::f64::consts::FRAC_PI_2 * i as f64 / 10.0;
            let setup = chsh::saturating_setup(theta).unwrap();
            let povm = chsh::observable_povm(setup.b(0));
            let ensemble = chsh::steered_ensemble(setup.rho(), 2, 2, &povm).unwrap();
            let table =
                guessing::postmeasurement_table(&ensemble, setup.a(0), setup.a(1)).unwrap();
            let p_guess = table.pguess(&[0], &[2, 1]).unwrap().p_guess;
            let bound = bounds::p_l_max(theta.cos()).unwrap();
            worst = worst.max((p_guess - bound).abs());
        }
        out.push(CheckResult::new(
            "guessing.prop3_saturation",
            worst <= 1e-6,
            format!("max |p_guess - bound| {worst:.3e}"),
            "<= 1e-6 for the bisector attack",
        ));
    }

    // -- simulator -------------------------------------------------------------
    {
        let params = TestParams::with_gamma_ratio(0.5, 17, 20, 30).unwrap();
        let strategy = FixedLawStrategy::classical_endpoint();
        let a = run_sequential_attack(&params, &strategy, seed).unwrap();
        let b = run_sequential_attack(&params, &strategy, seed).unwrap();
        out.push(CheckResult::new(
            "sim.determinism",
            a.to_json_lines() == b.to_json_lines(),
            "replay comparison",
            "byte-identical transcripts",
        ));
    }
    {
        let params = TestParams::with_gamma_ratio(0.5, 17, 20, 20).unwrap();
        let strategy = FixedLawStrategy::curve_at(0.8).unwrap();
        let report = monte_carlo_failure(&params, &strategy, 20_000, seed ^ 0xfade).unwrap();
        let factorization = report.failures <= report.passes
            && (report.p_pass_hat * report.conditional_rate.unwrap_or(0.0) - report.p_hat).abs()
                < 1e-12;
        out.push(CheckResult::new(
            "sim.eq3_factorization",
            factorization,
            format!(
                "{} passes, {} failures over {} trials",
                report.passes, report.failures, report.trials
            ),
            "failures counted within passes, rates factor exactly",
        ));
        let (p_l, p_t) = strategy.law();
        let test_rate = report.test_wins as f64 / report.test_rounds as f64;
        let live_rate = report.live_correct as f64 / report.live_rounds as f64;
        let sig_t = (p_t * (1.0 - p_t) / report.test_rounds as f64).sqrt();
        let sig_l = (p_l * (1.0 - p_l) / report.live_rounds as f64).sqrt();
        out.push(CheckResult::new(
            "sim.empirical_rates",
            (test_rate - p_t).abs() <= 3.0 * sig_t && (live_rate - p_l).abs() <= 3.0 * sig_l,
            format!("test {test_rate:.4} vs {p_t:.4}, live {live_rate:.4} vs {p_l:.4}"),
            "within 3 sigma of declared law",
        ));
        let _ = strategy.claims_admissible();
    }
    {
        let mut all_agree = true;
        for s in 0..2_000u64 {
            let run = run_honest(8, seed ^ s).unwrap();
            for (&j, &bit) in run.index_set.iter().zip(&run.substring) {
                all_agree &= run.x[j] == bit && run.bob_z[j] == bit;
            }
        }
        out.push(CheckResult::new(
            "sim.honest_agreement",
            all_agree,
            format!("agreement on index set: {all_agree}"),
            "100% over 2000 runs",
        ));
    }
    {
        let mut exact = true;
        for n in 1..=4u32 {
            let dist = sim::honest_bob_uniformity(n, 0b0110 & ((1 << n) - 1)).unwrap();
            exact &= dist.len() == 1usize << n;
            for (_, p) in dist {
                exact &= p == 1.0 / (1u64 << n) as f64;
            }
        }
        out.push(CheckResult::new(
            "sim.honest_uniformity",
            exact,
            format!("uniform: {exact}"),
            "each index set at exactly 2^-n, n <= 4",
        ));
    }
    {
        // Tie fixture: gamma = 17/20 with s/r exactly on the threshold. The
        // correct comparator passes the tie; a misrounded strict comparison
        // would abort it, so this check detects that mutation.
        let params = TestParams::with_gamma_ratio(0.5, 17, 20, 20).unwrap();
        let tie_passes = params.passes(17, 20);
        let below_fails = !params.passes(16, 20);
        let mutated_strict = |s: u64, r: u64| (s as u128) * 20 > 17 * (r as u128);
        let mutation_detected = tie_passes != mutated_strict(17, 20);
        out.push(CheckResult::new(
            "gamma_tie.exact_ge",
            tie_passes && below_fails && mutation_detected,
            format!(
                "tie passes: {tie_passes}, below fails: {below_fails}, strict mutant differs: {mutation_detected}"
            ),
            "threshold tie decided as pass, strict mutant detected",
        ));
    }

    out
}
