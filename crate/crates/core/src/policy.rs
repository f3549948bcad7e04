//! Decision rules that attain frontier points: the threshold rule 1{k(Δθ̂(x), M̂q) > τ},
//! its capacity-constrained cutoff, split-sample evaluation, direction recovery from a
//! target risk point and the LDA policy built from F̂ ∩ C(e*).

use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{compute_loss_quad, group_proportions, Dataset, Direction, DirectionGrid, GroupScale, LossSpec, RiskPoint};
use crate::error::{Error, Result};
use crate::geometry::{c_bound, estimate_feasible_set, estimate_frontier_with, kappa_default, select_frontier_point, EGrid, FrontierGrid};
use crate::nuisance::{assign_folds, fit_cross_fit, fit_single, DeltaThetaModel, NuisanceLearner};
use crate::rng::{stream_rng, streams};
use crate::supportfn::{eval_h_c_raw, k_value, ScoreMaterial, SupportFunctionEstimate};

/// a(x) = 1{k(Δθ̂(x), M̂q) > τ}.
#[derive(Clone)]
pub struct ThresholdPolicy {
    model: Arc<dyn DeltaThetaModel>,
    pub scale: GroupScale,
    pub q: Direction,
    pub capacity: Option<f64>,
    pub tau: f64,
    pub learner: String,
}

impl std::fmt::Debug for ThresholdPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ThresholdPolicy")
            .field("q", &self.q)
            .field("capacity", &self.capacity)
            .field("tau", &self.tau)
            .field("learner", &self.learner)
            .finish()
    }
}

/// Exported policy description.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolicyMeta {
    pub q: [f64; 2],
    pub angle: f64,
    pub tau: f64,
    pub capacity: Option<f64>,
    pub learner: String,
}

impl ThresholdPolicy {
    pub fn k(&self, x: &[f64]) -> f64 {
        k_value(self.model.predict(x), &self.scale, self.q)
    }

    pub fn decide(&self, x: &[f64]) -> bool {
        self.k(x) > self.tau
    }

    /// (k, decision) per row.
    pub fn apply(&self, ds: &Dataset) -> Vec<(f64, bool)> {
        (0..ds.n())
            .into_par_iter()
            .map(|i| {
                let k = self.k(ds.row(i));
                (k, k > self.tau)
            })
            .collect()
    }

    pub fn treated_fraction(&self, ds: &Dataset) -> f64 {
        let t = self.apply(ds).iter().filter(|r| r.1).count();
        t as f64 / ds.n() as f64
    }

    pub fn meta(&self) -> PolicyMeta {
        PolicyMeta {
            q: self.q.q,
            angle: self.q.angle(),
            tau: self.tau,
            capacity: self.capacity,
            learner: self.learner.clone(),
        }
    }
}

/// Cutoff max(0, k₍ₘ₎) with m = ⌈n(1−ā)⌉: at most ⌊nā⌋ training rows exceed it.
pub fn capacity_cutoff(k: &[f64], capacity: f64) -> Result<f64> {
    if !(capacity > 0.0 && capacity <= 1.0) {
        return Err(Error::InvalidInput(format!("capacity must lie in (0, 1], got {capacity}")));
    }
    let n = k.len();
    let m = (n as f64 * (1.0 - capacity) - 1e-9).ceil().max(0.0) as usize;
    if m == 0 {
        return Ok(0.0);
    }
    let mut v = k.to_vec();
    let (_, x, _) = v.select_nth_unstable_by(m - 1, |a, b| a.total_cmp(b));
    Ok(x.max(0.0))
}

/// Fits Δθ once on all training rows and fixes the cutoff.
pub fn build_policy(
    train: &Dataset,
    loss: &LossSpec,
    learner: &NuisanceLearner,
    q: Direction,
    capacity: Option<f64>,
) -> Result<ThresholdPolicy> {
    let scale = group_proportions(train)?;
    let model = fit_single(train, loss, learner)?;
    let mut p = ThresholdPolicy {
        learner: model.describe(),
        model,
        scale,
        q,
        capacity,
        tau: 0.0,
    };
    if let Some(a) = capacity {
        let k: Vec<f64> = p.apply(train).into_iter().map(|r| r.0).collect();
        p.tau = capacity_cutoff(&k, a)?;
    }
    Ok(p)
}

/// Per-group mean of ℓ(0,Y) + (ℓ(1,Y) − ℓ(0,Y))·a(X) on the evaluation sample.
pub fn evaluate_policy(policy: &ThresholdPolicy, eval: &Dataset, loss: &LossSpec) -> Result<RiskPoint> {
    let decisions = policy.apply(eval);
    evaluate_decisions(eval, loss, &decisions.iter().map(|r| r.1).collect::<Vec<_>>())
}

/// Group risks of fixed decisions.
pub fn evaluate_decisions(ds: &Dataset, loss: &LossSpec, treat: &[bool]) -> Result<RiskPoint> {
    if treat.len() != ds.n() {
        return Err(Error::InvalidInput("decision vector length differs from n".into()));
    }
    let quads = compute_loss_quad(ds, loss)?;
    let mut sum = [0.0; 2];
    let mut cnt = [0usize; 2];
    for ((q, g), t) in quads.iter().zip(ds.groups()).zip(treat) {
        let k = g.index();
        sum[k] += if *t { q.l1[k] } else { q.l0[k] };
        cnt[k] += 1;
    }
    for (k, name) in [(0, "r"), (1, "b")] {
        if cnt[k] == 0 {
            return Err(Error::GroupAbsent(format!("group {name} has no evaluation rows")));
        }
    }
    Ok(RiskPoint::new(sum[0] / cnt[0] as f64, sum[1] / cnt[1] as f64))
}

/// Disjoint train/evaluation index sets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitPlan {
    pub train: Vec<usize>,
    pub eval: Vec<usize>,
    pub ratio: f64,
    pub seed: u64,
}

impl SplitPlan {
    /// Random split with `ratio` of the rows in the training part.
    pub fn new(n: usize, ratio: f64, seed: u64) -> Result<SplitPlan> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidInput(format!("split ratio must lie in (0,1), got {ratio}")));
        }
        let n_train = (n as f64 * ratio).round() as usize;
        if n_train == 0 || n_train == n {
            return Err(Error::InvalidInput(format!("split of {n} rows at ratio {ratio} leaves a side empty")));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut stream_rng(seed, streams::SPLIT, 0));
        let mut train = perm[..n_train].to_vec();
        let mut eval = perm[n_train..].to_vec();
        train.sort_unstable();
        eval.sort_unstable();
        Ok(SplitPlan {
            train,
            eval,
            ratio,
            seed,
        })
    }

    pub fn apply(&self, ds: &Dataset) -> Result<(Dataset, Dataset)> {
        Ok((ds.subset(&self.train)?, ds.subset(&self.eval)?))
    }
}

/// argmax over S¹ of qᵀe − ĥ(q): first grid maximizer, then a golden-section search
/// on the angle within the neighbouring cells, kept only if it strictly improves.
pub fn q_star_hat(sfe: &SupportFunctionEstimate, e: RiskPoint, grid: &DirectionGrid) -> Result<Direction> {
    if !(e.r.is_finite() && e.b.is_finite()) {
        return Err(Error::InvalidInput("target risk point is not finite".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty direction grid".into()));
    }
    let ea = e.as_array();
    let obj = |th: f64| {
        let d = Direction::from_angle(th);
        d.dot(ea) - sfe.eval_h_raw(d.q)
    };
    let gv = sfe.grid_values(grid);
    let mut best = 0;
    let mut bv = f64::NEG_INFINITY;
    for (j, (d, h)) in grid.dirs().iter().zip(&gv.h).enumerate() {
        let v = d.dot(ea) - h;
        if v > bv {
            bv = v;
            best = j;
        }
    }
    let th0 = grid.angles()[best];
    let step = grid.step();
    let (mut a, mut b) = (th0 - step, th0 + step);
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - invphi * (b - a);
    let mut x2 = a + invphi * (b - a);
    let (mut f1, mut f2) = (obj(x1), obj(x2));
    while b - a > 1e-10 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = obj(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = obj(x2);
        }
    }
    let th = 0.5 * (a + b);
    if obj(th) > bv + 1e-12 {
        Ok(Direction::from_angle(th))
    } else {
        Ok(grid.dirs()[best])
    }
}

/// Settings for the LDA policy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LdaPolicyConfig {
    pub folds: usize,
    pub seed: u64,
    pub grid_size: usize,
    pub e_grid_size: usize,
    /// `None` means √(log n₁).
    pub kappa_n: Option<f64>,
}

impl Default for LdaPolicyConfig {
    fn default() -> Self {
        LdaPolicyConfig {
            folds: 5,
            seed: 0,
            grid_size: 360,
            e_grid_size: 400,
            kappa_n: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LdaPolicyResult {
    pub policy: ThresholdPolicy,
    /// Selected point of F̂ ∩ C(e*) on the training half.
    pub target: RiskPoint,
    /// Risks of the policy on the evaluation half.
    pub risk: RiskPoint,
    pub retained: usize,
    pub kappa_n: f64,
}

/// Builds a policy whose risks are weakly preferred to e*: estimates F̂ ∩ C(e*) on
/// the training half, picks a point, recovers its direction and evaluates the rule.
pub fn lda_policy(
    train: &Dataset,
    eval: &Dataset,
    loss: &LossSpec,
    learner: &NuisanceLearner,
    e_star: RiskPoint,
    cfg: &LdaPolicyConfig,
) -> Result<LdaPolicyResult> {
    if !(e_star.r.is_finite() && e_star.b.is_finite()) {
        return Err(Error::InvalidInput("status-quo risks are not finite".into()));
    }
    let n = train.n();
    let folds = assign_folds(n, cfg.folds, cfg.seed)?;
    let cf = fit_cross_fit(train, loss, &folds, learner)?;
    let sfe = SupportFunctionEstimate::new(ScoreMaterial::from_dataset(train, loss, cf.into_predictions())?);
    let grid = DirectionGrid::full(cfg.grid_size)?;
    let h = sfe.grid_values(&grid).h;
    let c = c_bound(train, loss);
    let kappa = cfg.kappa_n.unwrap_or_else(|| kappa_default(n));
    let pad = 2.0 * kappa / (n as f64).sqrt();
    // C(e*) as halfplanes; the admissible directions are exactly the ones h_C is defined on
    let cuts: Vec<[f64; 2]> = vec![[-1.0, 1.0], [1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    let hc: Vec<f64> = cuts.iter().map(|q| eval_h_c_raw(e_star, *q)).collect::<Result<_>>()?;
    let mut region = estimate_feasible_set(&h, &grid, 2.0 * c)?.polygon;
    for (q, v) in cuts.iter().zip(&hc) {
        region = region.clip(*q, v + pad);
    }
    let e_grid = EGrid::around(&region, pad, cfg.e_grid_size)
        .ok_or_else(|| Error::Empty("no estimated LDA region".into()))?;
    let fg = FrontierGrid::new(&grid, &h)?;
    let extra = |e: [f64; 2]| {
        cuts.iter()
            .zip(&hc)
            .map(|(q, v)| q[0] * e[0] + q[1] * e[1] - v)
            .fold(0.0f64, f64::max)
    };
    let fstar = estimate_frontier_with(&fg, kappa, n, &e_grid, c, extra);
    if fstar.is_empty() {
        return Err(Error::Empty("no estimated LDA region".into()));
    }
    let target = select_frontier_point(&fstar.points, c)?;
    let q = q_star_hat(&sfe, target, &grid)?;
    let policy = build_policy(train, loss, learner, q, None)?;
    let risk = evaluate_policy(&policy, eval, loss)?;
    Ok(LdaPolicyResult {
        policy,
        target,
        risk,
        retained: fstar.points.len(),
        kappa_n: kappa,
    })
}

/// Named directions of the standard rules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum PolicyKind {
    Rawlsian,
    Majority,
    Egalitarian,
    Utilitarian,
    Angle(f64),
}

impl PolicyKind {
    pub fn parse(s: &str) -> Result<PolicyKind> {
        match s {
            "rawlsian" => Ok(PolicyKind::Rawlsian),
            "majority" => Ok(PolicyKind::Majority),
            "egalitarian" => Ok(PolicyKind::Egalitarian),
            "utilitarian" => Ok(PolicyKind::Utilitarian),
            other => match other.strip_prefix("angle:") {
                Some(v) => v
                    .parse::<f64>()
                    .ok()
                    .filter(|t| t.is_finite())
                    .map(PolicyKind::Angle)
                    .ok_or_else(|| Error::InvalidInput(format!("bad angle in `{other}`"))),
                None => Err(Error::InvalidInput(format!("unknown policy `{other}`"))),
            },
        }
    }

    /// Fixed direction, or `None` for the egalitarian rule, whose direction is
    /// estimated from the fairest point.
    pub fn direction(&self) -> Option<Direction> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            PolicyKind::Rawlsian => Some(Direction { q: [-1.0, 0.0] }),
            PolicyKind::Majority => Some(Direction { q: [0.0, -1.0] }),
            PolicyKind::Utilitarian => Some(Direction { q: [-s, -s] }),
            PolicyKind::Angle(t) => Some(Direction::from_angle(*t)),
            PolicyKind::Egalitarian => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Group;
    use crate::simulate::{generate, DgpSpec};

    #[test]
    fn cutoff_respects_capacity() {
        let k: Vec<f64> = (0..100).map(|i| i as f64 / 10.0 - 2.0).collect();
        for a in [0.01, 0.03, 0.2, 0.5, 0.99] {
            let t = capacity_cutoff(&k, a).unwrap();
            let treated = k.iter().filter(|&&v| v > t).count();
            assert!(treated as f64 <= 100.0 * a + 1e-9, "{a}: {treated}");
        }
        assert_eq!(capacity_cutoff(&k, 1.0).unwrap(), 0.0);
        // all k negative: cutoff clamps at zero
        assert_eq!(capacity_cutoff(&[-3.0, -2.0, -1.0], 0.5).unwrap(), 0.0);
        assert!(capacity_cutoff(&k, 0.0).is_err());
    }

    #[test]
    fn split_is_a_partition() {
        let s = SplitPlan::new(101, 0.5, 3).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.eval).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
        assert_eq!(s, SplitPlan::new(101, 0.5, 3).unwrap());
        assert!(SplitPlan::new(10, 1.0, 0).is_err());
    }

    #[test]
    fn policy_names() {
        assert_eq!(PolicyKind::parse("rawlsian").unwrap().direction().unwrap().q, [-1.0, 0.0]);
        assert_eq!(PolicyKind::parse("majority").unwrap().direction().unwrap().q, [0.0, -1.0]);
        assert!(PolicyKind::parse("egalitarian").unwrap().direction().is_none());
        let a = PolicyKind::parse("angle:3.14159").unwrap().direction().unwrap();
        assert!((a.q[0] + 1.0).abs() < 1e-5);
        assert!(PolicyKind::parse("angle:x").is_err());
        assert!(PolicyKind::parse("fair").is_err());
    }

    #[test]
    fn in_sample_duality_and_never_treat() {
        let dgp = DgpSpec::balanced();
        let ds = generate(&dgp, 2000, 8).unwrap();
        let f = dgp.clone();
        let learner = NuisanceLearner::Oracle(Arc::new(move |x: &[f64]| f.delta_theta(x)));
        let loss = LossSpec::classification();
        let q = Direction::from_angle(4.0);
        let p = build_policy(&ds, &loss, &learner, q, None).unwrap();
        let dt = (0..ds.n()).map(|i| dgp.delta_theta(ds.row(i))).collect();
        let sfe = SupportFunctionEstimate::new(ScoreMaterial::from_dataset(&ds, &loss, dt).unwrap());
        let s = sfe.eval_s_raw(q.q);
        let r = evaluate_policy(&p, &ds, &loss).unwrap();
        assert!((r.r - s[0]).abs() < 1e-12 && (r.b - s[1]).abs() < 1e-12);

        // never treat: the mean of 1{Y=1} per group
        let none = evaluate_decisions(&ds, &loss, &vec![false; ds.n()]).unwrap();
        let mean = |g: Group| {
            let v: Vec<f64> = (0..ds.n()).filter(|&i| ds.groups()[i] == g).map(|i| ds.y()[i]).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!((none.r - mean(Group::R)).abs() < 1e-12);
        assert!((none.b - mean(Group::B)).abs() < 1e-12);
    }

    #[test]
    fn q_star_recovers_support_direction() {
        // conditional-expectation material makes ĥ sublinear, so ŝ(q₀) is exposed by q₀
        let (mat, _) = crate::simulate::oracle_material(&DgpSpec::r_skew(), 100_000, 2, None).unwrap();
        let sfe = SupportFunctionEstimate::new(mat);
        let grid = DirectionGrid::full(360).unwrap();
        for j in [190usize, 225, 260] {
            let q0 = grid.dirs()[j];
            let e = RiskPoint::from_array(sfe.eval_s_raw(q0.q));
            let q = q_star_hat(&sfe, e, &grid).unwrap();
            let diff = (q.angle() - q0.angle()).abs();
            assert!(diff <= grid.step() + 1e-9, "{j}: {} vs {}", q.angle(), q0.angle());
        }
    }
}
