//! Monte Carlo driver for the rejection-rate table: weak group skew with coverage of
//! (R, B), frontier membership at R, B, (R+B)/2 and the status-quo risks, and the
//! distance-to-F test at the true squared distance.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::dgp::{generate, DgpSpec};
use super::logit::{status_quo_logit, LogitPolicy};
use super::oracle::{oracle_geometry, OracleGeometry};
use crate::data::{DirectionGrid, LossSpec, RiskPoint};
use crate::error::{Error, Result};
use crate::inference::{
    estimate_status_quo, multiplier_bootstrap, test_distance, test_frontier_point, test_lda, test_weak_skew,
    BootstrapConfig, CandidateConfig, Distance, DistanceConfig,
};
use crate::nuisance::{assign_folds, fit_cross_fit, LassoConfig, NuisanceLearner};
use crate::rng::{derive_seed, streams};
use crate::supportfn::{ScoreMaterial, SupportFunctionEstimate};

/// Nuisance learner used inside replications.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum McLearner {
    Lasso(LassoConfig),
    Oracle,
}

/// Which panels to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct McTests {
    pub skew: bool,
    pub lda: bool,
    pub distance: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McConfig {
    pub dgp: DgpSpec,
    pub n: usize,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub folds: usize,
    pub learner: McLearner,
    pub bootstrap: BootstrapConfig,
    pub candidates: CandidateConfig,
    pub distance: DistanceConfig,
    pub tests: McTests,
}

impl McConfig {
    pub fn new(dgp: DgpSpec, n: usize, reps: usize) -> McConfig {
        McConfig {
            dgp,
            n,
            reps,
            alpha: 0.05,
            seed: 20_240_601,
            folds: 5,
            learner: McLearner::Lasso(LassoConfig::default()),
            bootstrap: BootstrapConfig::default(),
            candidates: CandidateConfig::default(),
            distance: DistanceConfig::default(),
            tests: McTests {
                skew: true,
                lda: true,
                distance: true,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidInput("replications must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput("alpha must lie in (0,1)".into()));
        }
        self.bootstrap.validate(self.n)
    }
}

/// Population quantities a replication is judged against.
#[derive(Clone, Debug, Serialize)]
pub struct McTruth {
    pub geometry: OracleGeometry,
    pub policy: LogitPolicy,
}

impl McTruth {
    pub fn e_star(&self) -> Result<RiskPoint> {
        self.geometry
            .e_star
            .ok_or_else(|| Error::InvalidInput("truth lacks status-quo risks".into()))
    }

    /// ρ(e*, F) under squared Euclidean distance.
    pub fn distance(&self) -> Result<f64> {
        Ok(Distance::SquaredEuclidean.eval(self.e_star()?.as_array(), self.geometry.f.as_array()))
    }
}

/// Trains the status-quo logit and computes the oracle geometry with its e*.
pub fn mc_truth(dgp: &DgpSpec, m: usize, seed: u64, logit_seed: u64) -> Result<McTruth> {
    let policy = status_quo_logit(logit_seed)?;
    let geometry = oracle_geometry(dgp, m, &DirectionGrid::full(500)?, seed, Some(&policy))?;
    Ok(McTruth { geometry, policy })
}

/// Outcome of one replication. `None` marks a test that was not run or failed.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RepOutcome {
    pub rep: usize,
    pub skew_reject: Option<bool>,
    pub skew_noncover: Option<bool>,
    pub lda_r: Option<bool>,
    pub lda_b: Option<bool>,
    pub lda_mid: Option<bool>,
    pub lda_e_star: Option<bool>,
    pub distance: Option<bool>,
    pub errors: Vec<String>,
}

fn record<T>(errors: &mut Vec<String>, label: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(format!("{label}: {e}"));
            None
        }
    }
}

/// One replication: draw, cross-fit, one shared bootstrap, every requested test.
pub fn run_rep(cfg: &McConfig, truth: &McTruth, rep: usize) -> RepOutcome {
    let mut out = RepOutcome {
        rep,
        ..Default::default()
    };
    let inner = || -> Result<_> {
        let ds = generate(&cfg.dgp, cfg.n, derive_seed(cfg.seed, streams::DATA, rep as u64))?;
        let loss = LossSpec::classification();
        let folds = assign_folds(cfg.n, cfg.folds, derive_seed(cfg.seed, streams::FOLDS, rep as u64))?;
        let learner = match &cfg.learner {
            McLearner::Lasso(c) => NuisanceLearner::MultinomialLasso(LassoConfig {
                seed: derive_seed(cfg.seed, streams::LASSO, rep as u64),
                ..c.clone()
            }),
            McLearner::Oracle => {
                let d = cfg.dgp.clone();
                NuisanceLearner::Oracle(Arc::new(move |x: &[f64]| d.delta_theta(x)))
            }
        };
        let cf = fit_cross_fit(&ds, &loss, &folds, &learner)?;
        let sfe = SupportFunctionEstimate::new(ScoreMaterial::from_dataset(&ds, &loss, cf.into_predictions())?);
        let sq = estimate_status_quo(&ds, &loss, &truth.policy.scores(&ds))?;
        let bcfg = BootstrapConfig {
            seed: derive_seed(cfg.seed, streams::BOOTSTRAP, rep as u64),
            ..cfg.bootstrap.clone()
        };
        let draws = multiplier_bootstrap(&sfe, Some(&sq), &bcfg)?;
        Ok((sfe, draws))
    };
    let (sfe, draws) = match inner() {
        Ok(v) => v,
        Err(e) => {
            out.errors.push(format!("setup: {e}"));
            return out;
        }
    };
    let g = &truth.geometry;
    let a = cfg.alpha;
    if cfg.tests.skew {
        if let Some(s) = record(&mut out.errors, "skew", test_weak_skew(&draws, a, &cfg.candidates, Some((g.r, g.b)))) {
            out.skew_reject = Some(s.result.decision.is_reject());
            out.skew_noncover = s.truth_covered.map(|c| !c);
        }
    }
    if cfg.tests.lda {
        let mid = RiskPoint::new(0.5 * (g.r.r + g.b.r), 0.5 * (g.r.b + g.b.b));
        out.lda_r = record(&mut out.errors, "lda R", test_frontier_point(&draws, g.r, a)).map(|r| r.decision.is_reject());
        out.lda_b = record(&mut out.errors, "lda B", test_frontier_point(&draws, g.b, a)).map(|r| r.decision.is_reject());
        out.lda_mid = record(&mut out.errors, "lda mid", test_frontier_point(&draws, mid, a)).map(|r| r.decision.is_reject());
        out.lda_e_star = record(&mut out.errors, "lda e*", test_lda(&draws, a)).map(|r| r.decision.is_reject());
    }
    if cfg.tests.distance {
        let r = truth
            .distance()
            .and_then(|delta| test_distance(&sfe, &draws, Distance::SquaredEuclidean, delta, a, &cfg.distance));
        out.distance = record(&mut out.errors, "distance", r).map(|(t, _)| t.decision.is_reject());
    }
    out
}

/// One cell of the rejection table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McRow {
    pub panel: String,
    pub column: String,
    pub dgp: String,
    pub n: usize,
    pub reps: usize,
    pub valid: usize,
    pub failures: usize,
    pub rejections: usize,
    pub rate: f64,
    pub mc_se: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct McReport {
    pub config: McConfig,
    pub truth: McTruth,
    pub rows: Vec<McRow>,
    pub outcomes: Vec<RepOutcome>,
}

impl McReport {
    pub fn row(&self, panel: &str, column: &str) -> Option<&McRow> {
        self.rows.iter().find(|r| r.panel == panel && r.column == column)
    }
}

fn summarize(cfg: &McConfig, panel: &str, column: &str, vals: &[Option<bool>]) -> McRow {
    let valid = vals.iter().filter(|v| v.is_some()).count();
    let rejections = vals.iter().filter(|v| **v == Some(true)).count();
    let rate = if valid == 0 { f64::NAN } else { rejections as f64 / valid as f64 };
    McRow {
        panel: panel.into(),
        column: column.into(),
        dgp: cfg.dgp.kind.name().into(),
        n: cfg.n,
        reps: vals.len(),
        valid,
        failures: vals.len() - valid,
        rejections,
        rate,
        mc_se: if valid == 0 { f64::NAN } else { (rate * (1.0 - rate) / valid as f64).sqrt() },
    }
}

/// Runs every replication and tabulates rejection frequencies.
pub fn run_mc(cfg: &McConfig, truth: &McTruth) -> Result<McReport> {
    cfg.validate()?;
    let outcomes: Vec<RepOutcome> = (0..cfg.reps).into_par_iter().map(|r| run_rep(cfg, truth, r)).collect();
    let col = |f: fn(&RepOutcome) -> Option<bool>| outcomes.iter().map(f).collect::<Vec<_>>();
    let mut rows = Vec::new();
    if cfg.tests.skew {
        rows.push(summarize(cfg, "weak_skew", "rb_not_covered", &col(|o| o.skew_noncover)));
        rows.push(summarize(cfg, "weak_skew", "rejected", &col(|o| o.skew_reject)));
    }
    if cfg.tests.lda {
        rows.push(summarize(cfg, "no_lda", "R", &col(|o| o.lda_r)));
        rows.push(summarize(cfg, "no_lda", "B", &col(|o| o.lda_b)));
        rows.push(summarize(cfg, "no_lda", "mid_RB", &col(|o| o.lda_mid)));
        rows.push(summarize(cfg, "no_lda", "e_star", &col(|o| o.lda_e_star)));
    }
    if cfg.tests.distance {
        rows.push(summarize(cfg, "distance_to_f", "e_star", &col(|o| o.distance)));
    }
    Ok(McReport {
        config: cfg.clone(),
        truth: truth.clone(),
        rows,
        outcomes,
    })
}

/// The rejection table as CSV.
pub fn write_mc_csv<W: Write>(rows: &[McRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    wr.flush()?;
    Ok(())
}
