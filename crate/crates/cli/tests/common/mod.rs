//! Shared helpers: simulated input files and a runner for the binary.

#![allow(dead_code)]

use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fa_frontier::simulate::{generate, status_quo_logit, DgpSpec};
use fa_frontier::Group;

pub fn scratch(name: &str) -> PathBuf {
    let p = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&p);
    std::fs::create_dir_all(&p).unwrap();
    p
}

/// Writes a simulated sample with columns y, g, x1..x20 and the status-quo score `sq`.
pub fn simulated_csv(dir: &Path, dgp: &DgpSpec, n: usize, seed: u64) -> PathBuf {
    let ds = generate(dgp, n, seed).unwrap();
    let pol = status_quo_logit(2).unwrap();
    let sq = pol.scores(&ds);
    let mut s = String::from("y,g");
    for j in 1..=ds.d() {
        let _ = write!(s, ",x{j}");
    }
    s.push_str(",sq\n");
    for i in 0..ds.n() {
        let g = if ds.groups()[i] == Group::R { "r" } else { "b" };
        let _ = write!(s, "{},{g}", ds.y()[i]);
        for v in ds.row(i) {
            let _ = write!(s, ",{v}");
        }
        let _ = writeln!(s, ",{}", sq[i]);
    }
    let p = dir.join("data.csv");
    std::fs::write(&p, s).unwrap();
    p
}

pub fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fafrontier"))
        .args(args)
        .env("FAFRONTIER_THREADS", "1")
        .output()
        .unwrap()
}

pub fn ok(args: &[&str]) -> Output {
    let o = run(args);
    assert!(
        o.status.success(),
        "fafrontier {args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
