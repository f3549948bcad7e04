//! Subcommand implementations.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use fa_frontier::geometry::{
    c_bound, estimate_feasible_set, estimate_frontier, estimate_pareto, kappa_default, EGrid, FrontierGrid,
};
use fa_frontier::inference::{
    distance_to_f_ci, estimate_status_quo, frontier_confidence_set, multiplier_bootstrap, test_distance, test_lda,
    test_weak_skew, StatusQuoRisk,
};
use fa_frontier::io::{read_dataset_path, read_numeric_columns, CsvOptions, LoadedData};
use fa_frontier::nuisance::{assign_folds, fit_cross_fit, NuisanceLearner};
use fa_frontier::policy::{build_policy, evaluate_policy, lda_policy, q_star_hat, LdaPolicyConfig, PolicyKind, SplitPlan};
use fa_frontier::rng::streams;
use fa_frontier::simulate::{mc_truth, run_mc, write_mc_csv, DgpSpec, McConfig, McLearner, McTests};
use fa_frontier::supportfn::{ScoreMaterial, SupportFunctionEstimate};
use fa_frontier::{Dataset, Direction, DirectionGrid, Group, LossSpec, RiskPoint, U1, U2};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{num, report, sha256_file, summary, OutDir, Timings};
use crate::svg::{render, Plot};

/// Where the status-quo algorithm comes from.
#[derive(Clone, Debug)]
pub enum StatusQuo {
    Column(String),
    File(PathBuf),
    Never,
    Always,
    Constant(f64),
}

impl StatusQuo {
    pub fn parse_spec(s: &str) -> Result<StatusQuo, CliError> {
        match s {
            "never" => Ok(StatusQuo::Never),
            "always" => Ok(StatusQuo::Always),
            _ => match s.strip_prefix("constant:").map(str::parse::<f64>) {
                Some(Ok(p)) if (0.0..=1.0).contains(&p) => Ok(StatusQuo::Constant(p)),
                _ => Err(CliError::Usage(format!(
                    "policy spec must be never, always or constant:<p in [0,1]>, got `{s}`"
                ))),
            },
        }
    }

    fn describe(&self) -> String {
        match self {
            StatusQuo::Column(c) => format!("column:{c}"),
            StatusQuo::File(p) => format!("file:{}", p.display()),
            StatusQuo::Never => "never".into(),
            StatusQuo::Always => "always".into(),
            StatusQuo::Constant(p) => format!("constant:{p}"),
        }
    }
}

/// Shared inputs of the data-driven subcommands.
pub struct Inputs<'a> {
    pub data: &'a Path,
    pub out: &'a Path,
    pub cfg: &'a RunConfig,
}

struct Loaded {
    ds: Dataset,
    side: std::collections::BTreeMap<String, Vec<f64>>,
    input: Value,
}

fn load(inp: &Inputs<'_>, extra_side: &[String]) -> Result<Loaded, CliError> {
    let cfg = inp.cfg;
    let mut side: Vec<String> = extra_side.to_vec();
    for c in cfg.get("data.drop").split(',').map(str::trim).filter(|c| !c.is_empty()) {
        if !side.iter().any(|s| s == c) {
            side.push(c.to_string());
        }
    }
    if let Some((a, b)) = cfg.external_columns()? {
        side.push(a);
        side.push(b);
    }
    let labels = match (cfg.get("data.group_r"), cfg.get("data.group_b")) {
        ("", "") => None,
        (r, b) if !r.is_empty() && !b.is_empty() => Some((r.to_string(), b.to_string())),
        _ => return Err(CliError::Config("set both data.group_r and data.group_b, or neither".into())),
    };
    let opts = CsvOptions {
        y_col: cfg.get("data.y_col").to_string(),
        g_col: cfg.get("data.g_col").to_string(),
        group_labels: labels,
        side_columns: side,
    };
    let LoadedData { dataset, side } = read_dataset_path(inp.data, &opts)?;
    let n_r = dataset.groups().iter().filter(|g| **g == Group::R).count();
    let input = json!({
        "path": inp.data.display().to_string(),
        "sha256": sha256_file(inp.data)?,
        "n": dataset.n(),
        "n_r": n_r,
        "n_b": dataset.n() - n_r,
        "labels": dataset.labels(),
        "covariates": dataset.covariate_names(),
    });
    Ok(Loaded { ds: dataset, side, input })
}

fn learner(cfg: &RunConfig, side: &std::collections::BTreeMap<String, Vec<f64>>) -> Result<NuisanceLearner, CliError> {
    match cfg.external_columns()? {
        None => Ok(NuisanceLearner::MultinomialLasso(cfg.lasso()?)),
        Some((a, b)) => {
            let (ca, cb) = (&side[&a], &side[&b]);
            Ok(NuisanceLearner::External(ca.iter().zip(cb).map(|(x, y)| [*x, *y]).collect()))
        }
    }
}

fn fit(ds: &Dataset, loss: &LossSpec, cfg: &RunConfig, learner: &NuisanceLearner) -> Result<SupportFunctionEstimate, CliError> {
    let folds = assign_folds(ds.n(), cfg.folds()?, cfg.child_seed(streams::FOLDS)?)?;
    let cf = fit_cross_fit(ds, loss, &folds, learner)?;
    Ok(SupportFunctionEstimate::new(ScoreMaterial::from_dataset(ds, loss, cf.into_predictions())?))
}

fn derived(cfg: &RunConfig, n: usize) -> Result<Value, CliError> {
    let b = cfg.bootstrap()?;
    Ok(json!({
        "kappa_n": cfg.kappa_n()?.unwrap_or_else(|| kappa_default(n)),
        "s_n": b.step(n),
        "seeds": {
            "folds": cfg.child_seed(streams::FOLDS)?,
            "bootstrap": cfg.child_seed(streams::BOOTSTRAP)?,
            "lasso": cfg.child_seed(streams::LASSO)?,
            "split": cfg.child_seed(streams::SPLIT)?,
        },
    }))
}

fn point(p: RiskPoint) -> Value {
    json!([p.r, p.b])
}

fn finish(out: &OutDir, rep: &Value, mut t: Timings, produced: &mut Vec<PathBuf>) -> Result<(), CliError> {
    produced.push(out.write_json("report.json", rep)?);
    t.lap("write");
    produced.push(out.write_json("timings.json", &t.to_json())?);
    Ok(())
}

/// `estimate`: support function on a grid, Ê, F̂, the Pareto arc, a confidence band and a plot.
pub fn estimate(inp: &Inputs<'_>, hyperplanes: usize, band: bool) -> Result<Vec<PathBuf>, CliError> {
    let cfg = inp.cfg;
    let mut t = Timings::start();
    let out = OutDir::create(inp.out)?;
    let Loaded { ds, side, input } = load(inp, &[])?;
    let loss = cfg.loss()?;
    let sfe = fit(&ds, &loss, cfg, &learner(cfg, &side)?)?;
    t.lap("cross_fit");
    let n = ds.n();
    let grid = DirectionGrid::full(cfg.directions()?)?;
    let gv = sfe.grid_values(&grid);
    let c = c_bound(&ds, &loss);
    let poly = estimate_feasible_set(&gv.h, &grid, 2.0 * c)?.polygon;
    if poly.is_empty() {
        return Err(fa_frontier::Error::Empty("estimated feasible set is empty".into()).into());
    }
    let kappa = cfg.kappa_n()?.unwrap_or_else(|| kappa_default(n));
    let pad = 2.0 * kappa / (n as f64).sqrt();
    let eg = EGrid::around(&poly, pad, cfg.usize_key("grid.e_size")?)
        .ok_or_else(|| fa_frontier::Error::Empty("no search grid around the feasible set".into()))?;
    let fg = FrontierGrid::new(&grid, &gv.h)?;
    let fr = estimate_frontier(&fg, kappa, n, &eg, c);
    let pareto = estimate_pareto(&sfe, &DirectionGrid::pareto_arc(cfg.usize_key("grid.pareto")?)?);
    let r_hat = sfe.eval_support_set(Direction { q: U1 });
    let b_hat = sfe.eval_support_set(Direction { q: U2 });
    let et = sfe.eval_h_etilde(cfg.distance()?.etilde_bound, 1e-9);
    t.lap("set_estimates");

    let alpha = cfg.alpha()?;
    let cs = if band {
        let draws = multiplier_bootstrap(&sfe, None, &cfg.bootstrap()?)?;
        Some(frontier_confidence_set(&draws, alpha, cfg.usize_key("grid.band_size")?, c)?)
    } else {
        None
    };
    t.lap("confidence_band");

    let mut produced = Vec::new();
    let rows: Vec<Vec<String>> = (0..grid.len())
        .map(|j| {
            let q = grid.dirs()[j].q;
            vec![
                num(grid.angles()[j]),
                num(q[0]),
                num(q[1]),
                num(gv.h[j]),
                num(gv.s[j][0]),
                num(gv.s[j][1]),
            ]
        })
        .collect();
    produced.push(out.write_csv("h_grid.csv", &["angle", "q_r", "q_b", "h", "s_r", "s_b"], &rows)?);
    let rows: Vec<Vec<String>> = poly
        .vertices
        .iter()
        .enumerate()
        .map(|(k, p)| vec![k.to_string(), num(p[0]), num(p[1])])
        .collect();
    produced.push(out.write_csv("polygon.csv", &["vertex", "e_r", "e_b"], &rows)?);
    let rows: Vec<Vec<String>> = fr
        .points
        .iter()
        .zip(&fr.criterion)
        .map(|(p, v)| vec![num(p[0]), num(p[1]), num(*v)])
        .collect();
    produced.push(out.write_csv("frontier.csv", &["e_r", "e_b", "criterion"], &rows)?);
    let rows: Vec<Vec<String>> = pareto
        .angles
        .iter()
        .zip(&pareto.points)
        .map(|(a, p)| vec![num(*a), num(p[0]), num(p[1])])
        .collect();
    produced.push(out.write_csv("pareto.csv", &["angle", "e_r", "e_b"], &rows)?);
    if let Some(cs) = &cs {
        let rows: Vec<Vec<String>> = cs
            .points
            .iter()
            .map(|(p, s, c)| vec![num(p[0]), num(p[1]), num(*s), num(*c)])
            .collect();
        produced.push(out.write_csv("band.csv", &["e_r", "e_b", "statistic", "critical_value"], &rows)?);
    }

    let planes: Vec<([f64; 2], f64)> = if hyperplanes > 0 {
        let hg = DirectionGrid::full(hyperplanes)?;
        hg.dirs().iter().map(|d| (d.q, sfe.eval_h(*d))).collect()
    } else {
        Vec::new()
    };
    let band_pts: Vec<[f64; 2]> = cs.as_ref().map(|c| c.points.iter().map(|p| p.0).collect()).unwrap_or_default();
    let mut markers = vec![("R", r_hat.as_array()), ("B", b_hat.as_array())];
    if !et.unbounded {
        markers.push(("F", et.fairest_point().as_array()));
    }
    let svg = render(&Plot {
        polygon: &poly.vertices,
        hyperplanes: &planes,
        frontier: &fr.points,
        band: &band_pts,
        markers: &markers,
    });
    produced.push(out.write("frontier.svg", &svg)?);

    let results = json!({
        "R_hat": point(r_hat),
        "B_hat": point(b_hat),
        "F_hat": if et.unbounded { Value::Null } else { point(et.fairest_point()) },
        "F_hat_note": if et.unbounded { "inf over c is unbounded: R and B lie on the same side of the 45-degree line" } else { "" },
        "c_star": et.c_star,
        "c_bound": c,
        "polygon_vertices": poly.vertices.len(),
        "polygon_area": poly.area(),
        "frontier_points": fr.points.len(),
        "frontier_threshold": fr.threshold,
        "e_grid": fr.e_grid,
        "band": cs.as_ref().map(|c| json!({"alpha": c.alpha, "points": c.points.len(), "grid": c.grid})),
        "hyperplanes": hyperplanes,
    });
    let rep = report("estimate", input, cfg, derived(cfg, n)?, results);
    finish(&out, &rep, t, &mut produced)?;
    Ok(produced)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestKind {
    Skew,
    Lda,
    DistF,
}

impl TestKind {
    fn name(self) -> &'static str {
        match self {
            TestKind::Skew => "skew",
            TestKind::Lda => "lda",
            TestKind::DistF => "dist-f",
        }
    }
}

fn status_quo(
    ds: &Dataset,
    loss: &LossSpec,
    sq: &StatusQuo,
    side: &std::collections::BTreeMap<String, Vec<f64>>,
) -> Result<StatusQuoRisk, CliError> {
    let n = ds.n();
    let scores: Vec<f64> = match sq {
        StatusQuo::Never => vec![0.0; n],
        StatusQuo::Always => vec![1.0; n],
        StatusQuo::Constant(p) => vec![*p; n],
        StatusQuo::Column(c) => side[c].clone(),
        StatusQuo::File(p) => {
            let f = std::fs::File::open(p).map_err(|e| CliError::io(p, e))?;
            read_numeric_columns(f, 1)?.remove(0)
        }
    };
    Ok(estimate_status_quo(ds, loss, &scores)?)
}

/// `test`: one of the three procedures with a JSON report and a text summary.
pub fn test(inp: &Inputs<'_>, kind: TestKind, sq: Option<&StatusQuo>) -> Result<(Vec<PathBuf>, String), CliError> {
    let cfg = inp.cfg;
    let mut t = Timings::start();
    if kind != TestKind::Skew && sq.is_none() {
        return Err(CliError::Usage(format!(
            "the {} test needs a status-quo policy: pass --policy-scores, --policy-column or --policy",
            kind.name()
        )));
    }
    let out = OutDir::create(inp.out)?;
    let extra: Vec<String> = match sq {
        Some(StatusQuo::Column(c)) => vec![c.clone()],
        _ => Vec::new(),
    };
    let Loaded { ds, side, input } = load(inp, &extra)?;
    let loss = cfg.loss()?;
    let sfe = fit(&ds, &loss, cfg, &learner(cfg, &side)?)?;
    t.lap("cross_fit");
    let sqr = match sq {
        Some(s) => Some(status_quo(&ds, &loss, s, &side)?),
        None => None,
    };
    let alpha = cfg.alpha()?;
    let draws = multiplier_bootstrap(&sfe, sqr.as_ref(), &cfg.bootstrap()?)?;
    t.lap("bootstrap");
    let mut results = serde_json::Map::new();
    results.insert("test".into(), json!(kind.name()));
    if let Some(s) = sq {
        results.insert("status_quo".into(), json!(s.describe()));
    }
    if let Some(s) = &sqr {
        results.insert("e_star_hat".into(), point(s.e_star));
    }
    let text = match kind {
        TestKind::Skew => {
            let r = test_weak_skew(&draws, alpha, &cfg.candidates()?, None)?;
            let text = summary("Weak group-skew test", alpha, &[&r.result], None);
            results.insert("result".into(), serde_json::to_value(&r.result)?);
            results.insert("sup_product".into(), json!(r.sup_product));
            results.insert("confidence_set_empty".into(), json!(r.cs_empty));
            results.insert("candidates".into(), json!({"r": r.candidates_r, "b": r.candidates_b, "grids": r.grids}));
            text
        }
        TestKind::Lda => {
            let r = test_lda(&draws, alpha)?;
            let text = summary("LDA test", alpha, &[&r], None);
            results.insert("result".into(), serde_json::to_value(&r)?);
            text
        }
        TestKind::DistF => {
            let rho = cfg.rho()?;
            let dcfg = cfg.distance()?;
            let (res, ci) = match cfg.delta()? {
                Some(d) => {
                    let (r, ci) = test_distance(&sfe, &draws, rho, d, alpha, &dcfg)?;
                    (Some(r), ci)
                }
                None => (None, distance_to_f_ci(&sfe, &draws, rho, alpha, &dcfg)?),
            };
            let tests: Vec<&_> = res.iter().collect();
            let text = summary("Distance to the fairest point", alpha, &tests, Some(&ci));
            results.insert("rho".into(), json!(rho));
            results.insert("interval".into(), serde_json::to_value(&ci)?);
            if let Some(r) = &res {
                results.insert("result".into(), serde_json::to_value(r)?);
            }
            text
        }
    };
    t.lap("test");
    let mut produced = Vec::new();
    produced.push(out.write("summary.txt", &text)?);
    let rep = report(&format!("test {}", kind.name()), input, cfg, derived(cfg, ds.n())?, Value::Object(results));
    finish(&out, &rep, t, &mut produced)?;
    Ok((produced, text))
}

/// `policy`: build on the training share, evaluate on the rest.
pub fn policy(
    inp: &Inputs<'_>,
    spec: &str,
    capacity: Option<f64>,
    sq: Option<&StatusQuo>,
) -> Result<(Vec<PathBuf>, RiskPoint), CliError> {
    let cfg = inp.cfg;
    let mut t = Timings::start();
    if let Some(a) = capacity {
        if !(0.0..=1.0).contains(&a) {
            return Err(CliError::Usage(format!("capacity must lie in [0, 1], got {a}")));
        }
    }
    if cfg.external_columns()?.is_some() {
        return Err(CliError::Config("policies need a fitted model; set learner = lasso".into()));
    }
    let out = OutDir::create(inp.out)?;
    let extra: Vec<String> = match sq {
        Some(StatusQuo::Column(c)) => vec![c.clone()],
        _ => Vec::new(),
    };
    let Loaded { ds, side, input } = load(inp, &extra)?;
    let loss = cfg.loss()?;
    let lrn = learner(cfg, &side)?;
    let plan = SplitPlan::new(ds.n(), cfg.split_ratio()?, cfg.child_seed(streams::SPLIT)?)?;
    let (train, eval) = plan.apply(&ds)?;
    let grid = DirectionGrid::full(cfg.directions()?)?;
    let mut extra_meta = serde_json::Map::new();

    let pol = if spec == "lda" {
        let s = sq.ok_or_else(|| CliError::Usage("the lda policy needs a status-quo policy".into()))?;
        let e_star = status_quo(&ds, &loss, s, &side)?.e_star;
        let lcfg = LdaPolicyConfig {
            folds: cfg.folds()?,
            seed: cfg.child_seed(streams::FOLDS)?,
            grid_size: cfg.directions()?,
            e_grid_size: cfg.usize_key("policy.lda_e_size")?,
            kappa_n: cfg.kappa_n()?,
        };
        let r = lda_policy(&train, &eval, &loss, &lrn, e_star, &lcfg)?;
        extra_meta.insert("status_quo".into(), json!(s.describe()));
        extra_meta.insert("e_star_hat".into(), point(e_star));
        extra_meta.insert("target".into(), point(r.target));
        extra_meta.insert("retained".into(), json!(r.retained));
        extra_meta.insert("kappa_n".into(), json!(r.kappa_n));
        if capacity.is_some() {
            return Err(CliError::Usage("--capacity does not apply to the lda policy".into()));
        }
        r.policy
    } else {
        let kind = PolicyKind::parse(spec)?;
        let q = match kind.direction() {
            Some(q) => q,
            None => {
                // egalitarian: the direction supporting Ê at F̂, estimated on the full sample
                let sfe = fit(&ds, &loss, cfg, &lrn)?;
                let et = sfe.eval_h_etilde(cfg.distance()?.etilde_bound, 1e-9);
                if et.unbounded {
                    return Err(fa_frontier::Error::Empty(
                        "fairest point undefined: the inf over c is unbounded".into(),
                    )
                    .into());
                }
                extra_meta.insert("F_hat".into(), point(et.fairest_point()));
                q_star_hat(&sfe, et.fairest_point(), &grid)?
            }
        };
        build_policy(&train, &loss, &lrn, q, capacity)?
    };
    t.lap("build");
    let risk = evaluate_policy(&pol, &eval, &loss)?;
    let risk_train = evaluate_policy(&pol, &train, &loss)?;
    let decisions = pol.apply(&ds);
    let mut in_train = vec![false; ds.n()];
    for &i in &plan.train {
        in_train[i] = true;
    }
    t.lap("evaluate");

    let mut produced = Vec::new();
    let rows: Vec<Vec<String>> = decisions
        .iter()
        .enumerate()
        .map(|(i, (k, d))| {
            vec![
                i.to_string(),
                if in_train[i] { "train" } else { "eval" }.to_string(),
                num(*k),
                u8::from(*d).to_string(),
            ]
        })
        .collect();
    produced.push(out.write_csv("decisions.csv", &["row", "split", "k", "treat"], &rows)?);
    let frac = |want: bool| {
        let (cnt, tot) = decisions
            .iter()
            .zip(&in_train)
            .filter(|(_, t)| **t == want)
            .fold((0usize, 0usize), |(c, t), ((_, d), _)| (c + usize::from(*d), t + 1));
        cnt as f64 / tot.max(1) as f64
    };
    let meta = json!({
        "policy": spec,
        "rule": pol.meta(),
        "split": {"ratio": plan.ratio, "seed": plan.seed, "train": plan.train.len(), "eval": plan.eval.len()},
        "treated_fraction": {"train": frac(true), "eval": frac(false)},
        "risk_eval": point(risk),
        "risk_train": point(risk_train),
        "extra": extra_meta,
    });
    produced.push(out.write_json("policy.json", &meta)?);
    let rep = report(&format!("policy {spec}"), input, cfg, derived(cfg, ds.n())?, meta);
    finish(&out, &rep, t, &mut produced)?;
    Ok((produced, risk))
}

/// `mc`: the simulation tables for one design and sample size.
pub fn mc(out: &Path, cfg: &RunConfig) -> Result<(Vec<PathBuf>, String), CliError> {
    let mut t = Timings::start();
    let out = OutDir::create(out)?;
    let dgp = DgpSpec::by_name(cfg.get("mc.dgp"))?;
    let mut mcfg = McConfig::new(dgp.clone(), cfg.usize_key("mc.n")?, cfg.usize_key("mc.reps")?);
    mcfg.alpha = cfg.alpha()?;
    mcfg.seed = cfg.seed()?;
    mcfg.folds = cfg.folds()?;
    mcfg.learner = match cfg.get("mc.learner") {
        "lasso" => McLearner::Lasso(cfg.lasso()?),
        "oracle" => McLearner::Oracle,
        other => return Err(CliError::Config(format!("`mc.learner`: unknown value `{other}`"))),
    };
    mcfg.bootstrap = cfg.bootstrap()?;
    mcfg.candidates = cfg.candidates()?;
    mcfg.distance = cfg.distance()?;
    let mut tests = McTests {
        skew: false,
        lda: false,
        distance: false,
    };
    for name in cfg.get("mc.tests").split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match name {
            "skew" => tests.skew = true,
            "lda" => tests.lda = true,
            "distance" => tests.distance = true,
            other => return Err(CliError::Config(format!("`mc.tests`: unknown panel `{other}`"))),
        }
    }
    mcfg.tests = tests;
    mcfg.validate()?;
    let truth = mc_truth(
        &dgp,
        cfg.usize_key("mc.truth_m")?,
        cfg.parse_u64("mc.truth_seed")?,
        cfg.parse_u64("mc.logit_seed")?,
    )?;
    t.lap("truth");
    let rep = run_mc(&mcfg, &truth)?;
    t.lap("replications");
    let mut produced = Vec::new();
    let p = out.path("mc.csv");
    let f = std::fs::File::create(&p).map_err(|e| CliError::io(&p, e))?;
    write_mc_csv(&rep.rows, f)?;
    produced.push(p);
    let text = mc_table(&rep.rows);
    produced.push(out.write("mc_table.txt", &text)?);
    let sidecar = json!({
        "format": crate::report::REPORT_FORMAT,
        "version": env!("CARGO_PKG_VERSION"),
        "command": "mc",
        "config": cfg.values(),
        "resolved": {
            "mc": rep.config,
            "s_n": mcfg.bootstrap.step(mcfg.n),
            "B": mcfg.bootstrap.draws,
            "varsigma": mcfg.bootstrap.varsigma,
            "kappa_n": kappa_default(mcfg.n),
        },
        "truth": {
            "R": point(truth.geometry.r),
            "B": point(truth.geometry.b),
            "F": point(truth.geometry.f),
            "e_star": truth.geometry.e_star.map(point),
            "distance_squared_euclidean": truth.distance().ok(),
            "m": truth.geometry.m,
        },
        "rows": rep.rows,
        "failures": rep.outcomes.iter().filter(|o| !o.errors.is_empty()).map(|o| json!({"rep": o.rep, "errors": o.errors})).collect::<Vec<_>>(),
    });
    produced.push(out.write_json("mc.json", &sidecar)?);
    produced.push(out.write_json("timings.json", &t.to_json())?);
    Ok((produced, text))
}

fn mc_table(rows: &[fa_frontier::simulate::McRow]) -> String {
    let mut s = format!(
        "{:<14}{:<16}{:<10}{:>7}{:>7}{:>10}{:>9}\n",
        "panel", "column", "dgp", "n", "valid", "rate", "mc_se"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<14}{:<16}{:<10}{:>7}{:>7}{:>10.3}{:>9.3}\n",
            r.panel, r.column, r.dgp, r.n, r.valid, r.rate, r.mc_se
        ));
    }
    s
}
