//! Cross-fitted estimation of Δθ(X) = (E[ΔL^r|X], E[ΔL^b|X]).

pub mod lasso;

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{compute_loss_quad, Dataset, LossMode, LossSpec};
use crate::error::{Error, Result};
pub use lasso::{LassoConfig, LinearModel, MultinomialModel};

/// Fold label per observation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldAssignment {
    k: usize,
    fold: Vec<usize>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self, i: usize) -> usize {
        self.fold[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.fold
    }

    pub fn members(&self, f: usize) -> Vec<usize> {
        (0..self.fold.len()).filter(|&i| self.fold[i] == f).collect()
    }

    pub fn complement(&self, f: usize) -> Vec<usize> {
        (0..self.fold.len()).filter(|&i| self.fold[i] != f).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.fold {
            s[f] += 1;
        }
        s
    }
}

pub(crate) fn assign_folds_with(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if k < 2 || k > n {
        return Err(Error::InvalidInput(format!("need 2 <= K <= n, got K={k}, n={n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut fold = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold[i] = pos % k;
    }
    Ok(fold)
}

/// Random near-equal partition of 0..n into K folds, reproducible under `seed`.
pub fn assign_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(FoldAssignment {
        k,
        fold: assign_folds_with(n, k, &mut rng)?,
    })
}

/// A fitted predictor of Δθ(x).
pub trait DeltaThetaModel: Send + Sync {
    fn predict(&self, x: &[f64]) -> [f64; 2];
    fn describe(&self) -> String;
}

/// Closed-form Δθ for simulation designs.
pub type OracleFn = Arc<dyn Fn(&[f64]) -> [f64; 2] + Send + Sync>;

/// How Δθ is learned.
#[derive(Clone)]
pub enum NuisanceLearner {
    /// Four-class L1-penalized multinomial logit (classification) or per-group
    /// L1-penalized least squares (other losses).
    MultinomialLasso(LassoConfig),
    /// Known conditional expectations.
    Oracle(OracleFn),
    /// Precomputed out-of-fold predictions in dataset row order.
    External(Vec<[f64; 2]>),
}

impl fmt::Debug for NuisanceLearner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NuisanceLearner::MultinomialLasso(c) => write!(f, "MultinomialLasso({c:?})"),
            NuisanceLearner::Oracle(_) => write!(f, "Oracle"),
            NuisanceLearner::External(v) => write!(f, "External({} rows)", v.len()),
        }
    }
}

impl NuisanceLearner {
    pub fn name(&self) -> &'static str {
        match self {
            NuisanceLearner::MultinomialLasso(_) => "multinomial-lasso",
            NuisanceLearner::Oracle(_) => "oracle-dgp",
            NuisanceLearner::External(_) => "external",
        }
    }
}

struct OracleModel(OracleFn);

impl DeltaThetaModel for OracleModel {
    fn predict(&self, x: &[f64]) -> [f64; 2] {
        (self.0)(x)
    }

    fn describe(&self) -> String {
        "oracle-dgp".into()
    }
}

/// Class-probability model: Δθ^g = Σ_y p(g, y | x)(ℓ(1,y) − ℓ(0,y)).
struct MultinomialDelta {
    model: MultinomialModel,
    dl: [f64; 2],
}

impl DeltaThetaModel for MultinomialDelta {
    fn predict(&self, x: &[f64]) -> [f64; 2] {
        let p = self.model.predict_proba(x);
        [
            p[0] * self.dl[0] + p[1] * self.dl[1],
            p[2] * self.dl[0] + p[3] * self.dl[1],
        ]
    }

    fn describe(&self) -> String {
        format!(
            "multinomial-lasso(lambda={:e}, nnz={})",
            self.model.lambda,
            self.model.nnz()
        )
    }
}

struct LinearDelta {
    models: [LinearModel; 2],
}

impl DeltaThetaModel for LinearDelta {
    fn predict(&self, x: &[f64]) -> [f64; 2] {
        [self.models[0].predict(x), self.models[1].predict(x)]
    }

    fn describe(&self) -> String {
        format!(
            "linear-lasso(lambda_r={:e}, lambda_b={:e})",
            self.models[0].lambda, self.models[1].lambda
        )
    }
}

/// Fits one model on rows `idx` of `ds`. `fold` only labels errors and seeds inner CV.
pub fn fit_on_rows(
    ds: &Dataset,
    loss: &LossSpec,
    learner: &NuisanceLearner,
    idx: &[usize],
    fold: usize,
) -> Result<Arc<dyn DeltaThetaModel>> {
    match learner {
        NuisanceLearner::Oracle(f) => Ok(Arc::new(OracleModel(f.clone()))),
        NuisanceLearner::External(_) => Err(Error::InvalidInput(
            "the external learner supplies fixed predictions and cannot be refit".into(),
        )),
        NuisanceLearner::MultinomialLasso(cfg) => {
            let d = ds.d();
            let binary = ds.y().iter().all(|&y| y == 0.0 || y == 1.0);
            if loss.mode() == LossMode::Classification {
                if !binary {
                    return Err(Error::InvalidInput(
                        "classification mode requires binary 0/1 outcomes".into(),
                    ));
                }
                let y: Vec<u8> = (0..ds.n())
                    .map(|i| (2 * ds.groups()[i].index() + ds.y()[i] as usize) as u8)
                    .collect();
                let model = lasso::fit_multinomial_cv(ds.x(), d, &y, idx, cfg, fold)?;
                let dl = [
                    loss.eval(1, 0.0) - loss.eval(0, 0.0),
                    loss.eval(1, 1.0) - loss.eval(0, 1.0),
                ];
                Ok(Arc::new(MultinomialDelta { model, dl }))
            } else {
                let quads = compute_loss_quad(ds, loss)?;
                let tr: Vec<f64> = quads.iter().map(|q| q.delta()[0]).collect();
                let tb: Vec<f64> = quads.iter().map(|q| q.delta()[1]).collect();
                let mr = lasso::fit_linear_cv(ds.x(), d, &tr, idx, cfg, fold)?;
                let mb = lasso::fit_linear_cv(ds.x(), d, &tb, idx, cfg, fold)?;
                Ok(Arc::new(LinearDelta { models: [mr, mb] }))
            }
        }
    }
}

/// Single fit on all rows (policy construction).
pub fn fit_single(
    ds: &Dataset,
    loss: &LossSpec,
    learner: &NuisanceLearner,
) -> Result<Arc<dyn DeltaThetaModel>> {
    let idx: Vec<usize> = (0..ds.n()).collect();
    fit_on_rows(ds, loss, learner, &idx, 0)
}

/// Out-of-fold predictions and the per-fold models.
#[derive(Clone)]
pub struct CrossFitNuisance {
    folds: FoldAssignment,
    predictions: Vec<[f64; 2]>,
    models: Vec<Arc<dyn DeltaThetaModel>>,
    learner: &'static str,
}

impl fmt::Debug for CrossFitNuisance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CrossFitNuisance")
            .field("k", &self.folds.k())
            .field("n", &self.predictions.len())
            .field("learner", &self.learner)
            .finish()
    }
}

impl CrossFitNuisance {
    pub fn predictions(&self) -> &[[f64; 2]] {
        &self.predictions
    }

    pub fn into_predictions(self) -> Vec<[f64; 2]> {
        self.predictions
    }

    pub fn folds(&self) -> &FoldAssignment {
        &self.folds
    }

    pub fn models(&self) -> &[Arc<dyn DeltaThetaModel>] {
        &self.models
    }

    pub fn learner(&self) -> &'static str {
        self.learner
    }
}

/// Fits fold k on the complement of fold k and predicts fold k.
pub fn fit_cross_fit(
    ds: &Dataset,
    loss: &LossSpec,
    folds: &FoldAssignment,
    learner: &NuisanceLearner,
) -> Result<CrossFitNuisance> {
    if folds.labels().len() != ds.n() {
        return Err(Error::InvalidInput("fold assignment does not match the dataset".into()));
    }
    if let NuisanceLearner::External(p) = learner {
        if p.len() != ds.n() {
            return Err(Error::InvalidInput(format!(
                "external predictions have {} rows, dataset has {}",
                p.len(),
                ds.n()
            )));
        }
        if let Some(i) = p.iter().position(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::Numerical(format!("non-finite external prediction at row {i}")));
        }
        return Ok(CrossFitNuisance {
            folds: folds.clone(),
            predictions: p.clone(),
            models: Vec::new(),
            learner: learner.name(),
        });
    }
    let fits: Vec<Result<(Arc<dyn DeltaThetaModel>, Vec<(usize, [f64; 2])>)>> = (0..folds.k())
        .into_par_iter()
        .map(|f| {
            let model = fit_on_rows(ds, loss, learner, &folds.complement(f), f)?;
            let preds = folds
                .members(f)
                .into_iter()
                .map(|i| (i, model.predict(ds.row(i))))
                .collect();
            Ok((model, preds))
        })
        .collect();
    let mut predictions = vec![[0.0; 2]; ds.n()];
    let mut models = Vec::with_capacity(folds.k());
    for r in fits {
        let (m, preds) = r?;
        for (i, p) in preds {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::Numerical(format!("non-finite prediction at row {i}")));
            }
            predictions[i] = p;
        }
        models.push(m);
    }
    Ok(CrossFitNuisance {
        folds: folds.clone(),
        predictions,
        models,
        learner: learner.name(),
    })
}

pub fn predict_delta_theta(cfn: &CrossFitNuisance, i: usize) -> [f64; 2] {
    cfn.predictions[i]
}

/// Adds Uniform(−scale, scale) noise to one covariate column.
pub fn jitter_covariate(ds: &Dataset, col: usize, scale: f64, seed: u64) -> Result<Dataset> {
    if !(scale > 0.0) {
        return Err(Error::InvalidInput(format!("jitter scale must be positive, got {scale}")));
    }
    if col >= ds.d() {
        return Err(Error::InvalidInput(format!(
            "column {col} out of range for {} covariates",
            ds.d()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<f64> = (0..ds.n())
        .map(|i| ds.row(i)[col] + rng.random_range(-scale..scale))
        .collect();
    ds.with_column(col, &vals)
}
