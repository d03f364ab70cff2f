//! Artifact writing: CSV with 6 significant digits and the resolved config
//! echoed as leading comment lines, or JSON with the config embedded.

use std::io::Write;
use std::path::Path;

use crate::config::RunConfig;

/// Format with 6 significant digits, plain decimal notation.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (5 - exp).max(0) as usize;
    format!("{:.*}", decimals, x)
}

/// CSV artifact: `# key = value` echo lines, a header, then rows of
/// 6-significant-digit numbers. LF line endings.
pub fn csv_document(command: &str, config: &RunConfig, header: &str, rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# command = {command}\n"));
    for (k, v) in config.entries() {
        out.push_str(&format!("# {k} = {v}\n"));
    }
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| fmt_sig6(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// JSON artifact with the command name and resolved config embedded.
pub fn json_document(
    command: &str,
    config: &RunConfig,
    payload: serde_json::Value,
) -> serde_json::Value {
    serde_json::json!({
        "command": command,
        "config": config.to_json(),
        "result": payload,
    })
}

/// Write to the path, or stdout when none is given.
pub fn emit(out: Option<&Path>, content: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, content),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_formatting() {
        assert_eq!(fmt_sig6(0.0), "0.00000");
        assert_eq!(fmt_sig6(2.0), "2.00000");
        assert_eq!(fmt_sig6(2.8284271247461903), "2.82843");
        assert_eq!(fmt_sig6(0.22844669683638807), "0.228447");
        assert_eq!(fmt_sig6(123.4567), "123.457");
        assert_eq!(fmt_sig6(0.000123456), "0.000123456");
        assert_eq!(fmt_sig6(-0.75), "-0.750000");
    }
}
