mod common;

use std::fs;
use std::path::Path;

use common::{json, ok, run, s, scratch, simulated_csv};
use fa_frontier::simulate::DgpSpec;

const TOY: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/toy.csv");

fn decision(out: &Path) -> String {
    json(&out.join("report.json"))["results"]["result"]["decision"]
        .as_str()
        .unwrap()
        .to_string()
}

#[test]
fn four_directions_give_a_quadrilateral() {
    let out = scratch("quad");
    ok(&["estimate", "--data", TOY, "--out", s(&out), "--set", "data.drop=sq", "--set", "grid.directions=4", "--no-band"]);
    let poly = fs::read_to_string(out.join("polygon.csv")).unwrap();
    assert_eq!(poly.lines().count(), 5, "{poly}");
    let svg = fs::read_to_string(out.join("frontier.svg")).unwrap();
    let pts = svg.split("class=\"feasible-set\" points=\"").nth(1).unwrap();
    assert_eq!(pts.split('"').next().unwrap().split(' ').count(), 4);
}

#[test]
fn hyperplane_count_flag() {
    let out = scratch("planes");
    ok(&["estimate", "--data", TOY, "--out", s(&out), "--set", "data.drop=sq", "--hyperplanes", "100", "--no-band"]);
    let svg = fs::read_to_string(out.join("frontier.svg")).unwrap();
    assert_eq!(svg.matches("<line class=\"hyperplane\"").count(), 100);
    for f in ["h_grid.csv", "polygon.csv", "frontier.csv", "pareto.csv", "report.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let rep = json(&out.join("report.json"));
    assert_eq!(rep["format"], "fafrontier-report/1");
    assert_eq!(rep["config"]["grid.directions"], "360");
}

#[test]
fn exit_codes() {
    let out = scratch("codes");
    let o = s(&out);
    // missing column
    let r = run(&["estimate", "--data", TOY, "--out", o, "--set", "data.y_col=outcome"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).starts_with("error:"));
    // unknown config key
    let r = run(&["estimate", "--data", TOY, "--out", o, "--set", "grid.sise=10"]);
    assert_eq!(r.status.code(), Some(2));
    // lda and dist-f need a status-quo policy
    for which in ["lda", "dist-f"] {
        let r = run(&["test", which, "--data", TOY, "--out", o, "--set", "data.drop=sq"]);
        assert_eq!(r.status.code(), Some(2), "{which}");
    }
    // malformed row reports its line
    let bad = out.join("bad.csv");
    fs::write(&bad, "y,g,x1\n1,r,0.5\n0,b,abc\n").unwrap();
    let r = run(&["estimate", "--data", s(&bad), "--out", o]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains('3'), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn egalitarian_without_a_fairest_point_is_empty() {
    // a loss that ignores the decision collapses the set to one point off the diagonal
    let out = scratch("empty");
    let data = out.join("d.csv");
    let mut body = String::from("y,g,x1\n");
    for i in 0..200 {
        let g = if i % 2 == 0 { "r" } else { "b" };
        let y = if g == "r" { (i % 10 == 0) as u8 } else { (i % 4 != 1) as u8 };
        body.push_str(&format!("{y},{g},{}\n", (i as f64 * 0.37).sin()));
    }
    fs::write(&data, body).unwrap();
    let r = run(&[
        "policy", "egalitarian", "--data", s(&data), "--out", s(&out), "--set", "loss=table:0,1,0,1",
    ]);
    assert_eq!(r.status.code(), Some(4), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn tests_on_a_balanced_sample() {
    let dir = scratch("balanced");
    let data = simulated_csv(&dir, &DgpSpec::balanced(), 5000, 101);
    let d = s(&data);

    let skew = dir.join("skew");
    ok(&["test", "skew", "--data", d, "--out", s(&skew), "--set", "data.drop=sq"]);
    assert_eq!(decision(&skew), "reject");
    let txt = fs::read_to_string(skew.join("summary.txt")).unwrap();
    assert!(txt.contains("reject"));

    let lda = dir.join("lda");
    ok(&["test", "lda", "--data", d, "--out", s(&lda), "--set", "data.drop=sq", "--policy", "never"]);
    assert_eq!(decision(&lda), "reject");

    let dist = dir.join("dist");
    ok(&["test", "dist-f", "--data", d, "--out", s(&dist), "--policy-column", "sq"]);
    let ci = &json(&dist.join("report.json"))["results"]["interval"];
    let (lo, hi, est) = (ci["lo"].as_f64().unwrap(), ci["hi"].as_f64().unwrap(), ci["estimate"].as_f64().unwrap());
    assert!(lo <= est && est <= hi, "{ci}");
}

#[test]
fn policy_directions_and_capacity() {
    let dir = scratch("policy");
    let data = simulated_csv(&dir, &DgpSpec::balanced(), 2000, 7);
    let d = s(&data);
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    for (spec, q) in [("rawlsian", [-1.0, 0.0]), ("majority", [0.0, -1.0]), ("utilitarian", [-s2, -s2])] {
        let out = dir.join(spec);
        ok(&["policy", spec, "--data", d, "--out", s(&out), "--set", "data.drop=sq"]);
        let p = json(&out.join("policy.json"));
        let got = [p["rule"]["q"][0].as_f64().unwrap(), p["rule"]["q"][1].as_f64().unwrap()];
        assert!((got[0] - q[0]).abs() < 1e-12 && (got[1] - q[1]).abs() < 1e-12, "{spec}: {got:?}");
    }
    let out = dir.join("cap");
    ok(&["policy", "rawlsian", "--data", d, "--out", s(&out), "--set", "data.drop=sq", "--capacity", "0.03"]);
    let p = json(&out.join("policy.json"));
    assert!(p["treated_fraction"]["train"].as_f64().unwrap() <= 0.03);
    let rows = fs::read_to_string(out.join("decisions.csv")).unwrap();
    assert_eq!(rows.lines().count(), 2001);

    let out = dir.join("egal");
    ok(&["policy", "egalitarian", "--data", d, "--out", s(&out), "--set", "data.drop=sq"]);
    let p = json(&out.join("policy.json"));
    let q = [p["rule"]["q"][0].as_f64().unwrap(), p["rule"]["q"][1].as_f64().unwrap()];
    assert!((q[0] * q[0] + q[1] * q[1] - 1.0).abs() < 1e-9);
}

#[test]
fn mc_smoke_run() {
    let out = scratch("mc");
    ok(&[
        "mc", "--out", s(&out), "--set", "mc.reps=2", "--set", "mc.n=1000", "--set", "mc.truth_m=200000",
        "--set", "mc.learner=oracle", "--set", "bootstrap.draws=100",
    ]);
    assert!(out.join("mc.csv").exists());
    let side = json(&out.join("mc.json"));
    for key in ["kappa_n", "B", "s_n", "varsigma"] {
        assert!(side["resolved"][key].is_number(), "sidecar lacks {key}");
    }
    let table = fs::read_to_string(out.join("mc.csv")).unwrap();
    for panel in ["skew", "lda", "distance"] {
        assert!(table.contains(panel), "{panel}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = scratch("det_a");
    let b = scratch("det_b");
    for out in [&a, &b] {
        ok(&["estimate", "--data", TOY, "--out", s(out), "--set", "data.drop=sq", "--hyperplanes", "10"]);
        ok(&["test", "lda", "--data", TOY, "--out", s(&out.join("lda")), "--policy-column", "sq"]);
    }
    for f in ["h_grid.csv", "polygon.csv", "frontier.csv", "pareto.csv", "band.csv", "frontier.svg", "report.json", "lda/report.json", "lda/summary.txt"] {
        let (x, y) = (fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn config_template_lists_every_key() {
    let o = ok(&["config"]);
    let t = String::from_utf8(o.stdout).unwrap();
    for key in ["seed", "bootstrap.s_n", "set.kappa_n", "distance.derivative", "mc.reps"] {
        assert!(t.lines().any(|l| l.starts_with(key)), "{key}");
    }
}
