//! End-to-end CLI behavior: artifact formats, config handling, exit codes.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wse-di"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn bounds_csv_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bounds.csv");
    let status = bin()
        .args(["bounds", "--set", "samples=100", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = read(&out);
    assert!(text.contains("# command = bounds"));
    assert!(text.contains("# samples = 100"));
    assert!(text.contains("# seed = 1"));
    let mut lines = text.lines().skip_while(|l| l.starts_with('#'));
    assert_eq!(lines.next().unwrap(), "beta,f_beta");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 100);
    assert_eq!(rows[0], "2.00000,0.00000");
    // Second column strictly increasing.
    let mut last = -1.0;
    for row in &rows {
        let f: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!(f > last || (f == 0.0 && last == -1.0));
        last = f;
    }
    assert!(!text.contains('\r'), "LF endings only");
}

#[test]
fn tradeoff_endpoints_present() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tradeoff.csv");
    let status = bin()
        .args(["tradeoff", "--set", "samples=1000", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = read(&out);
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('t'))
        .collect();
    assert_eq!(rows.len(), 1000);
    assert_eq!(rows[0], "0.00000,0.853553,0.853553");
    assert_eq!(rows[999], "1.00000,1.00000,0.750000");
}

#[test]
fn alpha_min_boundary_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("alpha.csv");
    let status = bin()
        .args([
            "alpha-min",
            "--set",
            "q_steps=6",
            "--set",
            "gammas=0.75,0.9",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = read(&out);
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        if line.starts_with('q') {
            assert_eq!(line, "q,gamma,alpha_min,k_star");
            continue;
        }
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let (q, gamma, alpha_min) = (cells[0], cells[1], cells[2]);
        if q == 0.0 || gamma == 0.75 {
            assert_eq!(alpha_min, 1.0, "boundary row {line}");
        } else if q < 1.0 {
            assert!(alpha_min < 1.0, "interior row {line}");
        }
    }
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    std::fs::write(&config, "# comment\nsamples = 7\nformat = csv\n").unwrap();
    let out = dir.path().join("out.csv");
    let status = bin()
        .args(["tradeoff", "--config"])
        .arg(&config)
        .args(["--set", "samples=9", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = read(&out);
    assert!(text.contains("# samples = 9"), "--set wins over file");
    let rows = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('t'))
        .count();
    assert_eq!(rows, 9);
}

#[test]
fn json_format_embeds_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bounds.json");
    let status = bin()
        .args(["bounds", "--set", "samples=10", "--format", "json", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let doc: serde_json::Value = serde_json::from_str(&read(&out)).unwrap();
    assert_eq!(doc["command"], "bounds");
    assert_eq!(doc["config"]["samples"], "10");
    assert_eq!(doc["result"].as_array().unwrap().len(), 10);
    assert_eq!(doc["result"][0]["beta"], 2.0);
}

#[test]
fn validation_errors_exit_2() {
    // Unknown config key.
    let status = bin()
        .args(["bounds", "--set", "sample=10"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    // Out-of-domain grid.
    let status = bin()
        .args(["bounds", "--set", "beta_max=3"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    // Bad strategy spec.
    let status = bin()
        .args(["simulate", "--set", "strategy=nope", "--set", "trials=10"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    // Bad gamma.
    let status = bin()
        .args(["simulate", "--set", "gamma=0.5", "--set", "trials=10"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn bound_violation_exits_3_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.json");
    let output = bin()
        .args([
            "simulate",
            "--set",
            "strategy=fixed:1,1",
            "--set",
            "gamma=0.9",
            "--set",
            "trials=500",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let doc: serde_json::Value = serde_json::from_str(&read(&out)).unwrap();
    assert_eq!(doc["result"]["bound_violated"], true);
    assert_eq!(doc["result"]["claims_admissible"], false);
    assert_eq!(doc["result"]["p_hat"], 1.0);
}

#[test]
fn simulate_emits_transcript_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.json");
    let transcript = dir.path().join("run.jsonl");
    let status = bin()
        .args(["simulate", "--set", "trials=50", "--set", "n=6"])
        .arg("--set")
        .arg(format!("transcript_out={}", transcript.display()))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let lines: Vec<String> = read(&transcript).lines().map(String::from).collect();
    assert_eq!(lines.len(), 7, "6 rounds + footer");
    for line in &lines[..6] {
        let round: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(round.get("q").is_some());
        assert!(round.get("theta").is_some());
    }
    let footer: serde_json::Value = serde_json::from_str(&lines[6]).unwrap();
    assert!(footer.get("passed").is_some());
    assert!(footer.get("r_n").is_some());
}

#[test]
fn thread_cap_env_var() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let status = bin()
        .env("WSE_DI_THREADS", "1")
        .args(["simulate", "--set", "trials=2000", "--seed", "5", "--out"])
        .arg(&a)
        .status()
        .unwrap();
    assert!(status.success());
    let status = bin()
        .env("WSE_DI_THREADS", "2")
        .args(["simulate", "--set", "trials=2000", "--seed", "5", "--out"])
        .arg(&b)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(read(&a), read(&b), "results independent of worker count");
    // Garbage value is a validation error.
    let status = bin()
        .env("WSE_DI_THREADS", "zero")
        .args(["bounds"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
}
