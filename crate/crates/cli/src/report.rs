//! Output files: the deterministic report, CSV tables, timings and text summaries.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use fa_frontier::inference::{ConfidenceInterval, TestResult};

use crate::config::RunConfig;
use crate::error::CliError;

pub const REPORT_FORMAT: &str = "fafrontier-report/1";

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<OutDir, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        fs::write(&p, body).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, v: &T) -> Result<PathBuf, CliError> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.write(name, &s)
    }

    /// Writes a headered CSV; cells are formatted by the caller.
    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let d = Sha256::digest(&bytes);
    Ok(d.iter().map(|b| format!("{b:02x}")).collect())
}

/// Wall-clock timings kept out of the report so reruns stay byte-identical.
pub struct Timings {
    start: Instant,
    last: Instant,
    steps: Vec<(String, f64)>,
}

impl Timings {
    pub fn start() -> Timings {
        let now = Instant::now();
        Timings {
            start: now,
            last: now,
            steps: Vec::new(),
        }
    }

    pub fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.steps.push((name.to_string(), (now - self.last).as_secs_f64()));
        self.last = now;
    }

    pub fn to_json(&self) -> Value {
        let steps: serde_json::Map<String, Value> =
            self.steps.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        json!({ "steps_seconds": steps, "total_seconds": self.start.elapsed().as_secs_f64() })
    }
}

pub fn report(command: &str, input: Value, cfg: &RunConfig, derived: Value, results: Value) -> Value {
    json!({
        "format": REPORT_FORMAT,
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "input": input,
        "config": cfg.values(),
        "derived": derived,
        "results": results,
    })
}

fn fmt_stat(v: f64) -> String {
    if v >= f64::MAX / 2.0 {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

/// Table-style text summary of test results and intervals.
pub fn summary(title: &str, alpha: f64, tests: &[&TestResult], ci: Option<&ConfidenceInterval>) -> String {
    let mut s = format!("{title}\n");
    if !tests.is_empty() {
        s.push_str(&format!(
            "{:<18}{:>12}{:>14}{:>18}\n",
            "test", "statistic", "critical", "decision"
        ));
    }
    for t in tests {
        let dec = if t.decision.is_reject() { "reject" } else { "fail to reject" };
        s.push_str(&format!(
            "{:<18}{:>12}{:>14}{:>18}\n",
            t.test,
            fmt_stat(t.statistic),
            format!("{:.4}", t.critical_value),
            dec
        ));
    }
    if let Some(ci) = ci {
        let est = ci.estimate.map(|e| format!("{e:.4}")).unwrap_or_else(|| "n/a".into());
        s.push_str(&format!(
            "estimated distance {est}, {:.0}% confidence interval ({:.4}, {:.4})\n",
            100.0 * (1.0 - alpha),
            ci.lo,
            ci.hi
        ));
        for b in &ci.branches {
            match b.interval {
                Some([l, h]) => s.push_str(&format!("  branch {:<6} [{l:.4}, {h:.4}]\n", b.name)),
                None => s.push_str(&format!("  branch {:<6} empty ({})\n", b.name, b.note)),
            }
        }
    }
    for t in tests {
        for f in &t.flags {
            s.push_str(&format!("note: {} {}\n", t.test, f));
        }
    }
    s
}
