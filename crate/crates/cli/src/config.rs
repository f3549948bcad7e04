//! Flat key-value run configuration.
//!
//! Files hold one `key = value` per line with dotted section names; `#` starts a
//! comment. Unknown keys are rejected. Every key has a default, and the resolved
//! map is echoed into each report.

use std::collections::BTreeMap;
use std::path::Path;

use fa_frontier::inference::{BootstrapConfig, CandidateConfig, Distance, DistanceConfig, EtildeDerivative};
use fa_frontier::nuisance::LassoConfig;
use fa_frontier::rng::{derive_seed, streams};
use fa_frontier::LossSpec;

use crate::error::CliError;

/// (key, default, description)
const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "master seed; every random stream is derived from it"),
    ("data.y_col", "y", "outcome column"),
    ("data.g_col", "g", "group column"),
    ("data.group_r", "", "label mapped to group r (empty: first appearance)"),
    ("data.group_b", "", "label mapped to group b"),
    ("data.drop", "", "comma-separated columns that are neither covariates nor used"),
    ("loss", "classification", "classification | table:l00,l01,l10,l11 (entry d,y)"),
    ("learner", "lasso", "lasso | external:<col_r>,<col_b> (out-of-fold predictions)"),
    ("lasso.n_lambda", "50", "penalty path length"),
    ("lasso.lambda_min_ratio", "0.001", "smallest penalty over the largest"),
    ("lasso.tol", "1e-7", "convergence tolerance at the selected penalty"),
    ("lasso.path_tol", "1e-4", "tolerance along the path and in inner CV"),
    ("lasso.cv_folds", "5", "inner cross-validation folds"),
    ("crossfit.folds", "5", "outer cross-fitting folds K"),
    ("grid.directions", "360", "full-circle direction grid (multiple of 4; of 8 when bootstrapping)"),
    ("grid.e_size", "200", "points per axis of the frontier search grid"),
    ("grid.pareto", "91", "directions on the Pareto arc"),
    ("grid.band_size", "60", "points per axis of the confidence band grid"),
    ("set.kappa_n", "auto", "slack for set estimates (auto: sqrt(log n))"),
    ("bootstrap.draws", "500", "multiplier bootstrap draws B"),
    ("bootstrap.s_n", "auto", "derivative step (auto: n^(-1/3))"),
    ("bootstrap.varsigma", "0.001", "uniformity constant"),
    ("test.alpha", "0.05", "significance level"),
    ("skew.candidates", "40", "candidate grid points per axis"),
    ("skew.refine", "true", "second candidate pass on the survivors"),
    ("distance.rho", "squared_euclidean", "squared_euclidean | euclidean | manhattan | chebyshev"),
    ("distance.delta", "none", "null value for the distance test (none: interval only)"),
    ("distance.derivative", "single_minimizer", "single_minimizer | numerical"),
    ("distance.etilde_bound", "50", "search bound for c in the fairest-point minimization"),
    ("policy.split_ratio", "0.5", "training share of the policy split"),
    ("policy.lda_e_size", "400", "grid points per axis for the LDA policy region"),
    ("mc.dgp", "balanced", "balanced | r-skew"),
    ("mc.n", "5000", "sample size per replication"),
    ("mc.reps", "200", "replications"),
    ("mc.learner", "lasso", "lasso | oracle"),
    ("mc.tests", "skew,lda,distance", "panels to run"),
    ("mc.truth_m", "2000000", "draws for the population quantities"),
    ("mc.truth_seed", "1", "seed for the population quantities"),
    ("mc.logit_seed", "2", "seed of the status-quo logit training sample"),
];

#[derive(Clone, Debug)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            cfg.apply_text(&text)?;
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{o}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", no + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| CliError::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(CliError::Config(format!("unknown key `{key}`"))),
        }
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("registered key")
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Commented listing of every key with its default.
    pub fn template() -> String {
        let mut s = String::new();
        for (k, v, doc) in KEYS {
            s.push_str(&format!("# {doc}\n{k} = {v}\n"));
        }
        s
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.get(key);
        v.parse()
            .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{v}`")))
    }

    fn auto_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(key) {
            "auto" | "none" => Ok(None),
            _ => self.parse::<f64>(key).map(Some),
        }
    }

    /// Parses every typed key once so bad values fail before any work starts.
    fn check(&self) -> Result<(), CliError> {
        self.seed()?;
        self.loss()?;
        self.lasso()?;
        self.folds()?;
        self.directions()?;
        self.usize_key("grid.e_size")?;
        self.usize_key("grid.pareto")?;
        self.usize_key("grid.band_size")?;
        self.kappa_n()?;
        self.bootstrap()?;
        self.alpha()?;
        self.candidates()?;
        self.rho()?;
        self.delta()?;
        self.distance()?;
        self.split_ratio()?;
        self.usize_key("policy.lda_e_size")?;
        self.usize_key("mc.n")?;
        self.usize_key("mc.reps")?;
        self.usize_key("mc.truth_m")?;
        self.parse::<u64>("mc.truth_seed")?;
        self.parse::<u64>("mc.logit_seed")?;
        Ok(())
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.parse("seed")
    }

    pub fn child_seed(&self, stream: u64) -> Result<u64, CliError> {
        Ok(derive_seed(self.seed()?, stream, 0))
    }

    pub fn parse_u64(&self, key: &str) -> Result<u64, CliError> {
        self.parse(key)
    }

    pub fn usize_key(&self, key: &str) -> Result<usize, CliError> {
        self.parse(key)
    }

    pub fn loss(&self) -> Result<LossSpec, CliError> {
        let v = self.get("loss");
        if v == "classification" {
            return Ok(LossSpec::classification());
        }
        let bad = || CliError::Config(format!("`loss`: expected classification or table:a,b,c,d, got `{v}`"));
        let t = v.strip_prefix("table:").ok_or_else(bad)?;
        let nums: Vec<f64> = t
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        if nums.len() != 4 || nums.iter().any(|x| !x.is_finite()) {
            return Err(bad());
        }
        Ok(LossSpec::table([[nums[0], nums[1]], [nums[2], nums[3]]]))
    }

    /// `None` for lasso, or the two external prediction columns.
    pub fn external_columns(&self) -> Result<Option<(String, String)>, CliError> {
        let v = self.get("learner");
        if v == "lasso" {
            return Ok(None);
        }
        match v.strip_prefix("external:").and_then(|s| s.split_once(',')) {
            Some((a, b)) => Ok(Some((a.trim().to_string(), b.trim().to_string()))),
            None => Err(CliError::Config(format!("`learner`: unknown value `{v}`"))),
        }
    }

    pub fn lasso(&self) -> Result<LassoConfig, CliError> {
        Ok(LassoConfig {
            n_lambda: self.parse("lasso.n_lambda")?,
            lambda_min_ratio: self.parse("lasso.lambda_min_ratio")?,
            tol: self.parse("lasso.tol")?,
            path_tol: self.parse("lasso.path_tol")?,
            cv_folds: self.parse("lasso.cv_folds")?,
            seed: self.child_seed(streams::LASSO)?,
            ..LassoConfig::default()
        })
    }

    pub fn folds(&self) -> Result<usize, CliError> {
        let k: usize = self.parse("crossfit.folds")?;
        if k < 2 {
            return Err(CliError::Config("`crossfit.folds` must be at least 2".into()));
        }
        Ok(k)
    }

    pub fn directions(&self) -> Result<usize, CliError> {
        let m: usize = self.parse("grid.directions")?;
        if m < 4 || m % 4 != 0 {
            return Err(CliError::Config("`grid.directions` must be a positive multiple of 4".into()));
        }
        Ok(m)
    }

    pub fn kappa_n(&self) -> Result<Option<f64>, CliError> {
        let k = self.auto_f64("set.kappa_n")?;
        if matches!(k, Some(v) if !(v > 0.0)) {
            return Err(CliError::Config("`set.kappa_n` must be positive".into()));
        }
        Ok(k)
    }

    pub fn bootstrap(&self) -> Result<BootstrapConfig, CliError> {
        Ok(BootstrapConfig {
            draws: self.parse("bootstrap.draws")?,
            seed: self.child_seed(streams::BOOTSTRAP)?,
            s_n: self.auto_f64("bootstrap.s_n")?,
            varsigma: self.parse("bootstrap.varsigma")?,
            grid_size: self.directions()?,
        })
    }

    pub fn alpha(&self) -> Result<f64, CliError> {
        let a: f64 = self.parse("test.alpha")?;
        if !(a > 0.0 && a < 1.0) {
            return Err(CliError::Config("`test.alpha` must lie in (0, 1)".into()));
        }
        Ok(a)
    }

    pub fn candidates(&self) -> Result<CandidateConfig, CliError> {
        Ok(CandidateConfig {
            size: self.parse("skew.candidates")?,
            refine: self.parse("skew.refine")?,
            ..CandidateConfig::default()
        })
    }

    pub fn rho(&self) -> Result<Distance, CliError> {
        Ok(Distance::parse(self.get("distance.rho"))?)
    }

    pub fn delta(&self) -> Result<Option<f64>, CliError> {
        self.auto_f64("distance.delta")
    }

    pub fn distance(&self) -> Result<DistanceConfig, CliError> {
        Ok(DistanceConfig {
            candidates: self.candidates()?,
            derivative: EtildeDerivative::parse(self.get("distance.derivative"))?,
            etilde_bound: self.parse("distance.etilde_bound")?,
            ..DistanceConfig::default()
        })
    }

    pub fn split_ratio(&self) -> Result<f64, CliError> {
        let r: f64 = self.parse("policy.split_ratio")?;
        if !(r > 0.0 && r < 1.0) {
            return Err(CliError::Config("`policy.split_ratio` must lie in (0, 1)".into()));
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_an_error() {
        let mut c = RunConfig::default();
        assert!(c.set("bootstrap.drawz", "10").is_err());
        assert!(c.apply_text("# note\nbootstrap.draws = 200 # trailing\n").is_ok());
        assert_eq!(c.get("bootstrap.draws"), "200");
        assert!(c.apply_text("nonsense").is_err());
    }

    #[test]
    fn template_round_trips() {
        let mut c = RunConfig::default();
        c.apply_text(&RunConfig::template()).unwrap();
        assert_eq!(c.values(), RunConfig::default().values());
        c.check().unwrap();
    }

    #[test]
    fn bad_values_rejected() {
        assert!(RunConfig::load(None, &["grid.directions=90".into()]).is_err());
        assert!(RunConfig::load(None, &["test.alpha=1.5".into()]).is_err());
        assert!(RunConfig::load(None, &["loss=table:1,2,3".into()]).is_err());
        assert!(RunConfig::load(None, &["loss=table:0,1,1,0".into()]).is_ok());
    }
}
