//! The five subcommands: curve emission, the decay-rate sweep, Monte-Carlo
//! simulation and the verification suite.

use std::path::Path;

use serde_json::json;

use wse_di_core::alpha::{self, TestParams};
use wse_di_core::bounds;
use wse_di_core::sim::{
    monte_carlo_failure, run_sequential_attack, AttackStrategy, FixedLawStrategy, QuantumStrategy,
};

use crate::config::{ConfigError, RunConfig};
use crate::output::{csv_document, emit, json_document};
use crate::verify::run_checks;

/// Process exit status of a command.
pub enum Outcome {
    Ok,
    /// a bound violation or failed verification check (exit 3)
    Failed(String),
}

pub type CmdResult = Result<Outcome, ConfigError>;

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        match text {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(ConfigError(format!("format '{other}' is not csv|json"))),
        }
    }
}

fn write_curve(
    command: &str,
    config: &RunConfig,
    header: &str,
    rows: Vec<Vec<f64>>,
    out: Option<&Path>,
) -> CmdResult {
    let format = Format::parse(config.get("format"))?;
    let content = match format {
        Format::Csv => csv_document(command, config, header, &rows),
        Format::Json => {
            let cols: Vec<&str> = header.split(',').collect();
            let json_rows: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    serde_json::Value::Object(
                        cols.iter()
                            .zip(row)
                            .map(|(c, v)| (c.to_string(), json!(v)))
                            .collect(),
                    )
                })
                .collect();
            let doc = json_document(command, config, json!(json_rows));
            let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
            text.push('\n');
            text
        }
    };
    emit(out, &content).map_err(|e| ConfigError(format!("write failed: {e}")))?;
    Ok(Outcome::Ok)
}

pub fn bounds_defaults() -> RunConfig {
    RunConfig::new(&[
        ("beta_min", "2"),
        ("beta_max", "2.8284271247461903"),
        ("samples", "200"),
        ("format", "csv"),
        ("seed", "1"),
    ])
}

/// `bounds`: the min-entropy rate `f(beta)` over a CHSH-value grid.
pub fn cmd_bounds(config: &RunConfig, out: Option<&Path>) -> CmdResult {
    let beta_min = config.f64("beta_min")?;
    let beta_max = config.f64("beta_max")?;
    let samples = config.usize("samples")?;
    if samples < 2 {
        return Err(ConfigError("samples must be >= 2".into()));
    }
    if beta_min >= beta_max {
        return Err(ConfigError("beta_min must be below beta_max".into()));
    }
    let mut rows = Vec::with_capacity(samples);
    for i in 0..samples {
        let beta = beta_min + (beta_max - beta_min) * i as f64 / (samples - 1) as f64;
        let f = bounds::f_of_beta(beta).map_err(|e| ConfigError(e.to_string()))?;
        rows.push(vec![beta, f]);
    }
    write_curve("bounds", config, "beta,f_beta", rows, out)
}

pub fn tradeoff_defaults() -> RunConfig {
    RunConfig::new(&[("samples", "1000"), ("format", "csv"), ("seed", "1")])
}

/// `tradeoff`: the live/test winning-probability trade-off curve.
pub fn cmd_tradeoff(config: &RunConfig, out: Option<&Path>) -> CmdResult {
    let samples = config.usize("samples")?;
    let curve = bounds::tradeoff_curve(samples).map_err(|e| ConfigError(e.to_string()))?;
    let rows = curve.iter().map(|p| vec![p.t, p.p_l, p.p_t]).collect();
    write_curve("tradeoff", config, "t,p_L,p_T", rows, out)
}

pub fn alpha_min_defaults() -> RunConfig {
    RunConfig::new(&[
        ("q_min", "0"),
        ("q_max", "1"),
        ("q_steps", "21"),
        ("gammas", "0.75,0.8,0.85,0.9,0.95,0.99"),
        ("format", "csv"),
        ("seed", "1"),
    ])
}

/// `alpha-min`: the sequential-attack decay rate over a `(q, gamma)` grid.
pub fn cmd_alpha_min(config: &RunConfig, out: Option<&Path>) -> CmdResult {
    let q_min = config.f64("q_min")?;
    let q_max = config.f64("q_max")?;
    let q_steps = config.usize("q_steps")?;
    if q_steps < 1 {
        return Err(ConfigError("q_steps must be >= 1".into()));
    }
    let gammas = config.f64_list("gammas")?;
    let qs: Vec<f64> = (0..q_steps)
        .map(|i| {
            if q_steps == 1 {
                q_min
            } else {
                q_min + (q_max - q_min) * i as f64 / (q_steps - 1) as f64
            }
        })
        .collect();
    let grid = alpha::alpha_min_grid(&qs, &gammas).map_err(|e| ConfigError(e.to_string()))?;
    let rows = grid
        .iter()
        .map(|r| vec![r.q, r.gamma, r.alpha_min, r.k_star])
        .collect();
    write_curve("alpha-min", config, "q,gamma,alpha_min,k_star", rows, out)
}

pub fn simulate_defaults() -> RunConfig {
    RunConfig::new(&[
        ("q", "0.5"),
        ("gamma", "0.85"),
        ("n", "20"),
        ("trials", "100000"),
        ("strategy", "classical"),
        ("transcript_out", ""),
        ("format", "json"),
        ("seed", "1"),
    ])
}

fn parse_strategy(
    spec: &str,
    q: f64,
    gamma: f64,
) -> Result<Box<dyn AttackStrategy>, ConfigError> {
    let err = |msg: String| ConfigError(msg);
    if spec == "classical" {
        return Ok(Box::new(FixedLawStrategy::classical_endpoint()));
    }
    if spec == "curve-at-kstar" {
        return Ok(Box::new(
            FixedLawStrategy::curve_at_optimal_k(q, gamma).map_err(|e| err(e.to_string()))?,
        ));
    }
    if let Some(rest) = spec.strip_prefix("curve:") {
        let t: f64 = rest
            .parse()
            .map_err(|_| err(format!("bad curve parameter '{rest}'")))?;
        return Ok(Box::new(
            FixedLawStrategy::curve_at(t).map_err(|e| err(e.to_string()))?,
        ));
    }
    if let Some(rest) = spec.strip_prefix("fixed:") {
        let (pl, pt) = rest
            .split_once(',')
            .ok_or_else(|| err("fixed strategy needs 'fixed:P_L,P_T'".into()))?;
        let p_l: f64 = pl.trim().parse().map_err(|_| err(format!("bad p_L '{pl}'")))?;
        let p_t: f64 = pt.trim().parse().map_err(|_| err(format!("bad p_T '{pt}'")))?;
        return Ok(Box::new(
            FixedLawStrategy::new(p_l, p_t).map_err(|e| err(e.to_string()))?,
        ));
    }
    if spec == "quantum-bisector" {
        return Ok(Box::new(QuantumStrategy::bisector_ideal()));
    }
    if let Some(rest) = spec.strip_prefix("quantum-bisector:") {
        let theta: f64 = rest
            .parse()
            .map_err(|_| err(format!("bad angle '{rest}'")))?;
        return Ok(Box::new(
            QuantumStrategy::bisector(theta).map_err(|e| err(e.to_string()))?,
        ));
    }
    Err(err(format!(
        "unknown strategy '{spec}' (classical | curve:<t> | curve-at-kstar | \
         fixed:<pL>,<pT> | quantum-bisector[:<theta>])"
    )))
}

/// `simulate`: seeded Monte-Carlo failure estimate against the closed-form
/// bound. Exit status is nonzero iff the lower confidence limit exceeds the
/// bound.
pub fn cmd_simulate(config: &RunConfig, out: Option<&Path>) -> CmdResult {
    let q = config.f64("q")?;
    let (num, den) = config.decimal_ratio("gamma")?;
    let n = config.u64("n")?;
    let trials = config.u64("trials")?;
    let seed = config.u64("seed")?;
    let params =
        TestParams::with_gamma_ratio(q, num, den, n).map_err(|e| ConfigError(e.to_string()))?;
    let strategy = parse_strategy(config.get("strategy"), q, params.gamma)?;

    let report = monte_carlo_failure(&params, strategy.as_ref(), trials, seed)
        .map_err(|e| ConfigError(e.to_string()))?;

    let transcript_out = config.get("transcript_out");
    if !transcript_out.is_empty() {
        let transcript = run_sequential_attack(&params, strategy.as_ref(), seed)
            .map_err(|e| ConfigError(e.to_string()))?;
        std::fs::write(transcript_out, transcript.to_json_lines())
            .map_err(|e| ConfigError(format!("write failed: {e}")))?;
    }

    let doc = json_document(
        "simulate",
        config,
        serde_json::to_value(&report).expect("serializable"),
    );
    let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
    text.push('\n');
    emit(out, &text).map_err(|e| ConfigError(format!("write failed: {e}")))?;

    if report.bound_violated {
        Ok(Outcome::Failed(format!(
            "bound violated: lower CI {} exceeds bound {}",
            report.ci_low, report.bound
        )))
    } else {
        Ok(Outcome::Ok)
    }
}

pub fn verify_defaults() -> RunConfig {
    RunConfig::new(&[("format", "json"), ("seed", "1")])
}

/// `verify`: run every named invariant check and report machine-readably.
pub fn cmd_verify(config: &RunConfig, out: Option<&Path>) -> CmdResult {
    let seed = config.u64("seed")?;
    let checks = run_checks(seed);
    let all_pass = checks.iter().all(|c| c.pass);
    for check in &checks {
        eprintln!(
            "{} {} = {} (expected {})",
            if check.pass { "ok  " } else { "FAIL" },
            check.name,
            check.observed,
            check.expected
        );
    }
    let doc = json_document(
        "verify",
        config,
        json!({
            "checks": checks.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
            "all_pass": all_pass,
        }),
    );
    let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
    text.push('\n');
    emit(out, &text).map_err(|e| ConfigError(format!("write failed: {e}")))?;
    if all_pass {
        Ok(Outcome::Ok)
    } else {
        let failed: Vec<&str> = checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        Ok(Outcome::Failed(format!(
            "verification failed: {}",
            failed.join(", ")
        )))
    }
}
