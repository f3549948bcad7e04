//! Debiased support-function estimation.
//!
//! Each observation contributes the score ζᵢ(M̂q) = (M̂q)ᵀL₀ᵢ + (M̂q)ᵀΔLᵢ·1{k > 0}
//! with k = qᵀM̂Δθ̂(Xᵢ). The estimator ĥ(q) is the sample mean of the scores and the
//! support point ŝ(q) is the mean of the vector parts, so ĥ(q) = qᵀŝ(q).

use std::f64::consts::PI;

use crate::data::{
    compute_loss_quad, group_proportions, Dataset, Direction, DirectionGrid, Group, GroupScale,
    LossQuad, LossSpec, RiskPoint, U1,
};
use crate::error::{Error, Result};

/// Slack used when deciding whether a direction lies in the admissible half q₁+q₂ ≥ 0.
pub const ADMISSIBLE_TOL: f64 = 1e-12;

/// Anything that can report a support value in an arbitrary direction.
pub trait SupportFunction: Sync {
    fn support(&self, q: [f64; 2]) -> f64;

    fn support_on_grid(&self, grid: &DirectionGrid) -> Vec<f64> {
        grid.dirs().iter().map(|d| self.support(d.q)).collect()
    }
}

/// Support function of the convex hull of a finite point set.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSupport {
    pub points: Vec<[f64; 2]>,
}

impl SupportFunction for PointSupport {
    fn support(&self, q: [f64; 2]) -> f64 {
        self.points
            .iter()
            .map(|p| q[0] * p[0] + q[1] * p[1])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Per-observation inputs of the score.
#[derive(Clone, Debug)]
pub struct ScoreMaterial {
    l0: Vec<[f64; 2]>,
    dl: Vec<[f64; 2]>,
    dtheta: Vec<[f64; 2]>,
    groups: Vec<Group>,
    scale: GroupScale,
}

impl ScoreMaterial {
    pub fn new(
        quads: &[LossQuad],
        dtheta: Vec<[f64; 2]>,
        groups: Vec<Group>,
        scale: GroupScale,
    ) -> Result<ScoreMaterial> {
        let l0 = quads.iter().map(|q| q.l0).collect();
        let dl = quads.iter().map(|q| q.delta()).collect();
        ScoreMaterial::from_parts(l0, dl, dtheta, groups, scale)
    }

    /// Direct construction, e.g. with conditional expectations in place of losses.
    pub fn from_parts(
        l0: Vec<[f64; 2]>,
        dl: Vec<[f64; 2]>,
        dtheta: Vec<[f64; 2]>,
        groups: Vec<Group>,
        scale: GroupScale,
    ) -> Result<ScoreMaterial> {
        let n = l0.len();
        if dl.len() != n || dtheta.len() != n || groups.len() != n {
            return Err(Error::InvalidInput("score arrays have different lengths".into()));
        }
        if n == 0 {
            return Err(Error::InvalidInput("empty score material".into()));
        }
        let finite = |v: &[f64; 2]| v[0].is_finite() && v[1].is_finite();
        if let Some(i) = (0..n).find(|&i| !(finite(&l0[i]) && finite(&dl[i]) && finite(&dtheta[i])))
        {
            return Err(Error::Numerical(format!("non-finite score input at observation {i}")));
        }
        Ok(ScoreMaterial {
            l0,
            dl,
            dtheta,
            groups,
            scale,
        })
    }

    /// Score material for a dataset, loss and out-of-fold predictions.
    pub fn from_dataset(ds: &Dataset, loss: &LossSpec, dtheta: Vec<[f64; 2]>) -> Result<ScoreMaterial> {
        let quads = compute_loss_quad(ds, loss)?;
        let scale = group_proportions(ds)?;
        ScoreMaterial::new(&quads, dtheta, ds.groups().to_vec(), scale)
    }

    pub fn n(&self) -> usize {
        self.l0.len()
    }

    pub fn scale(&self) -> GroupScale {
        self.scale
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn l0(&self) -> &[[f64; 2]] {
        &self.l0
    }

    pub fn dl(&self) -> &[[f64; 2]] {
        &self.dl
    }

    pub fn dtheta(&self) -> &[[f64; 2]] {
        &self.dtheta
    }
}

/// k(Δθ̂, M̂q) = qᵀM̂Δθ̂.
pub fn k_value(dtheta: [f64; 2], scale: &GroupScale, q: Direction) -> f64 {
    let m = scale.m();
    dot(q.q, [m[0] * dtheta[0], m[1] * dtheta[1]])
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Support function of C(e), the set of points weakly preferred to e,
/// for directions in the admissible half q₁ + q₂ ≥ 0. Accepts non-unit q.
pub fn eval_h_c_raw(e: RiskPoint, q: [f64; 2]) -> Result<f64> {
    if q[0] + q[1] < -ADMISSIBLE_TOL * q[0].hypot(q[1]).max(1.0) {
        return Err(Error::InvalidInput(format!(
            "h_C unbounded direction ({}, {})",
            q[0], q[1]
        )));
    }
    let a = q[0] * e.r.min(2.0 * e.b - e.r) + q[1] * e.b;
    let b = q[0] * e.r + q[1] * e.b.min(2.0 * e.r - e.b);
    Ok(a.max(b))
}

pub fn eval_h_c(e: RiskPoint, q: Direction) -> Result<f64> {
    eval_h_c_raw(e, q.q)
}

/// Grid evaluation of ĥ and ŝ.
#[derive(Clone, Debug, PartialEq)]
pub struct GridValues {
    pub h: Vec<f64>,
    pub s: Vec<[f64; 2]>,
}

/// Indices of grid directions with qᵀv > 0, as a cyclic run (start, count).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Arc {
    pub start: usize,
    pub count: usize,
}

/// Cyclic run of full-circle grid directions strictly positive against `v`.
/// `guess` seeds the search; the result is always checked against the exact predicate.
pub(crate) fn positive_arc(v: [f64; 2], dirs: &[Direction], lo: f64, guess: Option<Arc>) -> Arc {
    let n = dirs.len();
    if v[0] == 0.0 && v[1] == 0.0 {
        return Arc { start: 0, count: 0 };
    }
    let active = |j: usize| dot(dirs[j].q, v) > 0.0;
    let from_angle = || {
        let step = 2.0 * PI / n as f64;
        let phi = v[1].atan2(v[0]);
        let t0 = ((phi - 0.5 * PI - lo) / step).floor() as i64 + 1;
        let t1 = ((phi + 0.5 * PI - lo) / step).ceil() as i64 - 1;
        let count = (t1 - t0 + 1).clamp(0, n as i64) as usize;
        Arc {
            start: t0.rem_euclid(n as i64) as usize,
            count,
        }
    };
    let mut a = guess.filter(|g| g.count > 0).unwrap_or_else(from_angle);
    for attempt in 0..2 {
        let (mut start, mut count) = (a.start, a.count);
        while count > 0 && !active(start) {
            start = (start + 1) % n;
            count -= 1;
        }
        if count > 0 {
            while count < n && active((start + n - 1) % n) {
                start = (start + n - 1) % n;
                count += 1;
            }
            while count > 0 && !active((start + count - 1) % n) {
                count -= 1;
            }
            while count < n && active((start + count) % n) {
                count += 1;
            }
            return Arc { start, count };
        }
        if attempt == 0 {
            a = from_angle();
        }
    }
    // no grid direction is strictly positive (possible only on very coarse grids)
    let hits: Vec<usize> = (0..n).filter(|&j| active(j)).collect();
    match hits.first() {
        Some(&j) => Arc {
            start: j,
            count: hits.len(),
        },
        None => Arc { start: 0, count: 0 },
    }
}

/// Adds `val` over the cyclic run `arc` into a difference array of length n + 1.
#[inline]
pub(crate) fn add_arc(diff: &mut [[f64; 2]], arc: Arc, val: [f64; 2]) {
    let n = diff.len() - 1;
    if arc.count == 0 {
        return;
    }
    let end = arc.start + arc.count;
    diff[arc.start][0] += val[0];
    diff[arc.start][1] += val[1];
    if end <= n {
        diff[end][0] -= val[0];
        diff[end][1] -= val[1];
    } else {
        diff[0][0] += val[0];
        diff[0][1] += val[1];
        diff[end - n][0] -= val[0];
        diff[end - n][1] -= val[1];
    }
}

/// The estimator: score material plus the scaled predictions M̂Δθ̂ᵢ.
#[derive(Clone, Debug)]
pub struct SupportFunctionEstimate {
    mat: ScoreMaterial,
    v: Vec<[f64; 2]>,
}

impl SupportFunctionEstimate {
    pub fn new(mat: ScoreMaterial) -> SupportFunctionEstimate {
        let m = mat.scale.m();
        let v = mat
            .dtheta
            .iter()
            .map(|d| [m[0] * d[0], m[1] * d[1]])
            .collect();
        SupportFunctionEstimate { mat, v }
    }

    pub fn n(&self) -> usize {
        self.mat.n()
    }

    pub fn scale(&self) -> GroupScale {
        self.mat.scale
    }

    pub fn material(&self) -> &ScoreMaterial {
        &self.mat
    }

    /// M̂Δθ̂ᵢ for every observation.
    pub fn scaled_predictions(&self) -> &[[f64; 2]] {
        &self.v
    }

    /// ĥ at an arbitrary (not necessarily unit) vector, as the mean of the scalar scores.
    pub fn eval_h_raw(&self, q: [f64; 2]) -> f64 {
        let m = self.mat.scale.m();
        let mq = [m[0] * q[0], m[1] * q[1]];
        let mut acc = 0.0;
        for i in 0..self.n() {
            let mut z = dot(mq, self.mat.l0[i]);
            if dot(q, self.v[i]) > 0.0 {
                z += dot(mq, self.mat.dl[i]);
            }
            acc += z;
        }
        acc / self.n() as f64
    }

    pub fn eval_h(&self, q: Direction) -> f64 {
        self.eval_h_raw(q.q)
    }

    /// ŝ at an arbitrary vector; depends on q only through the indicator.
    pub fn eval_s_raw(&self, q: [f64; 2]) -> [f64; 2] {
        let mut acc = [0.0; 2];
        for i in 0..self.n() {
            acc[0] += self.mat.l0[i][0];
            acc[1] += self.mat.l0[i][1];
            if dot(q, self.v[i]) > 0.0 {
                acc[0] += self.mat.dl[i][0];
                acc[1] += self.mat.dl[i][1];
            }
        }
        let m = self.mat.scale.m();
        let n = self.n() as f64;
        [m[0] * acc[0] / n, m[1] * acc[1] / n]
    }

    pub fn eval_support_set(&self, q: Direction) -> RiskPoint {
        RiskPoint::from_array(self.eval_s_raw(q.q))
    }

    /// Influence values ζ*ᵢ(q) = ζᵢ(M̂q) + (M̂*ᵢq)ᵀM̂⁻¹ŝ(q).
    pub fn eval_influence(&self, q: Direction) -> Vec<f64> {
        let q = q.q;
        let scale = self.mat.scale;
        let m = scale.m();
        let mq = [m[0] * q[0], m[1] * q[1]];
        let s = self.eval_s_raw(q);
        // (M*ᵢ q)ᵀ M̂⁻¹ ŝ = −1{r} q₁ ŝ_r / μ_r − 1{b} q₂ ŝ_b / μ_b
        let corr = [-q[0] * s[0] / scale.mu[0], -q[1] * s[1] / scale.mu[1]];
        (0..self.n())
            .map(|i| {
                let mut z = dot(mq, self.mat.l0[i]);
                if dot(q, self.v[i]) > 0.0 {
                    z += dot(mq, self.mat.dl[i]);
                }
                z + corr[self.mat.groups[i].index()]
            })
            .collect()
    }

    /// Base arcs of every observation on a full-circle grid.
    pub(crate) fn arcs(&self, grid: &DirectionGrid) -> Vec<Arc> {
        let lo = grid.arc().0;
        self.v
            .iter()
            .map(|v| positive_arc(*v, grid.dirs(), lo, None))
            .collect()
    }

    /// ĥ and ŝ on a grid. Full-circle grids use an O(n + N) sweep.
    pub fn grid_values(&self, grid: &DirectionGrid) -> GridValues {
        if grid.is_full_circle() && grid.len() >= 8 {
            let arcs = self.arcs(grid);
            let s = sweep(
                grid,
                &arcs,
                self.mat.l0.iter().copied().fold([0.0; 2], |a, b| [a[0] + b[0], a[1] + b[1]]),
                &self.mat.dl,
                None,
                self.mat.scale.m(),
                self.n() as f64,
            );
            finish_grid(grid, s)
        } else {
            let s: Vec<[f64; 2]> = grid.dirs().iter().map(|d| self.eval_s_raw(d.q)).collect();
            finish_grid(grid, s)
        }
    }

    /// Fairest-point value h_Ẽ(𝔲₁) = inf_c ĥ(𝔲₁ − c(1,−1)).
    pub fn eval_h_etilde(&self, c_bound: f64, tol: f64) -> EtildeResult {
        eval_h_etilde(&|q| self.eval_h_raw(q), c_bound, tol)
    }
}

fn finish_grid(grid: &DirectionGrid, s: Vec<[f64; 2]>) -> GridValues {
    let h = grid
        .dirs()
        .iter()
        .zip(&s)
        .map(|(d, s)| dot(d.q, *s))
        .collect();
    GridValues { h, s }
}

/// Support points on a full-circle grid from per-observation arcs.
/// `weights` multiplies each observation; `m` is the diagonal scaling applied at the end.
pub(crate) fn sweep(
    grid: &DirectionGrid,
    arcs: &[Arc],
    base_sum: [f64; 2],
    dl: &[[f64; 2]],
    weights: Option<&[f64]>,
    m: [f64; 2],
    n: f64,
) -> Vec<[f64; 2]> {
    let nn = grid.len();
    let mut diff = vec![[0.0; 2]; nn + 1];
    match weights {
        None => {
            for (a, d) in arcs.iter().zip(dl) {
                add_arc(&mut diff, *a, *d);
            }
        }
        Some(w) => {
            for ((a, d), wi) in arcs.iter().zip(dl).zip(w) {
                add_arc(&mut diff, *a, [wi * d[0], wi * d[1]]);
            }
        }
    }
    let mut run = [0.0; 2];
    (0..nn)
        .map(|j| {
            run[0] += diff[j][0];
            run[1] += diff[j][1];
            [
                m[0] * (base_sum[0] + run[0]) / n,
                m[1] * (base_sum[1] + run[1]) / n,
            ]
        })
        .collect()
}

impl SupportFunction for SupportFunctionEstimate {
    fn support(&self, q: [f64; 2]) -> f64 {
        self.eval_h_raw(q)
    }

    fn support_on_grid(&self, grid: &DirectionGrid) -> Vec<f64> {
        self.grid_values(grid).h
    }
}

/// Sample covariance kernel Ω̂ of the influence values over a set of directions.
#[derive(Clone, Debug)]
pub struct CovarianceKernel {
    dirs: Vec<Direction>,
    centered: Vec<Vec<f64>>,
}

impl CovarianceKernel {
    pub fn new(sfe: &SupportFunctionEstimate, dirs: &[Direction]) -> CovarianceKernel {
        let centered = dirs
            .iter()
            .map(|d| {
                let z = sfe.eval_influence(*d);
                let mean = z.iter().sum::<f64>() / z.len() as f64;
                z.into_iter().map(|v| v - mean).collect()
            })
            .collect();
        CovarianceKernel {
            dirs: dirs.to_vec(),
            centered,
        }
    }

    pub fn dirs(&self) -> &[Direction] {
        &self.dirs
    }

    /// Ω̂(q_a, q_b) for stored directions a, b.
    pub fn omega(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (&self.centered[a], &self.centered[b]);
        x.iter().zip(y).map(|(u, v)| u * v).sum::<f64>() / x.len() as f64
    }

    pub fn gram(&self) -> Vec<Vec<f64>> {
        let k = self.dirs.len();
        (0..k)
            .map(|a| (0..k).map(|b| self.omega(a, b)).collect())
            .collect()
    }
}

/// Ω̂(q, q̃) for a single pair of directions.
pub fn omega(sfe: &SupportFunctionEstimate, q: Direction, q2: Direction) -> f64 {
    CovarianceKernel::new(sfe, &[q, q2]).omega(0, 1)
}

/// Result of the 45°-restricted minimization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtildeResult {
    /// inf over c of h(𝔲₁ − c(1,−1)); the fairest point is (−value, −value).
    pub value: f64,
    pub c_star: f64,
    /// The minimum sits at the boundary of the search interval and is still decreasing.
    pub unbounded: bool,
}

impl EtildeResult {
    /// F = (𝔲₁ + 𝔲₂)·value.
    pub fn fairest_point(&self) -> RiskPoint {
        RiskPoint::new(-self.value, -self.value)
    }
}

const BRACKET_POINTS: usize = 201;

/// Minimizes c ↦ h(𝔲₁ − c(1,−1)) over [−c_bound, c_bound] with a bracketing grid
/// refined by golden-section search.
pub fn eval_h_etilde(h: &dyn Fn([f64; 2]) -> f64, c_bound: f64, tol: f64) -> EtildeResult {
    let f = |c: f64| h([U1[0] - c, U1[1] + c]);
    let step = 2.0 * c_bound / (BRACKET_POINTS - 1) as f64;
    let cs: Vec<f64> = (0..BRACKET_POINTS)
        .map(|k| -c_bound + k as f64 * step)
        .collect();
    let vals: Vec<f64> = cs.iter().map(|&c| f(c)).collect();
    let mut k = 0;
    for j in 1..BRACKET_POINTS {
        if vals[j] < vals[k] {
            k = j;
        }
    }
    let last = BRACKET_POINTS - 1;
    let unbounded = (k == 0 && vals[0] < vals[1]) || (k == last && vals[last] < vals[last - 1]);
    if unbounded {
        return EtildeResult {
            value: vals[k],
            c_star: cs[k],
            unbounded: true,
        };
    }
    let mut a = cs[k.saturating_sub(1)];
    let mut b = cs[(k + 1).min(last)];
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - invphi * (b - a);
    let mut x2 = a + invphi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(x2);
        }
    }
    let (mut c_star, mut value) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if vals[k] < value {
        c_star = cs[k];
        value = vals[k];
    }
    EtildeResult {
        value,
        c_star,
        unbounded: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DirectionGrid, U2};

    fn two_obs() -> SupportFunctionEstimate {
        let ds = Dataset::new(vec![1.0, 1.0], vec![Group::R, Group::B], vec![], 0).unwrap();
        let mat =
            ScoreMaterial::from_dataset(&ds, &LossSpec::classification(), vec![[1.0, 1.0]; 2])
                .unwrap();
        SupportFunctionEstimate::new(mat)
    }

    #[test]
    fn k_value_examples() {
        let s = GroupScale::new(0.5, 0.5).unwrap();
        let dt = [0.5, -0.3];
        assert_eq!(k_value(dt, &s, Direction::new(1.0, 0.0).unwrap()), 1.0);
        assert!((k_value(dt, &s, Direction::new(0.0, 1.0).unwrap()) + 0.6).abs() < 1e-15);
        assert_eq!(k_value(dt, &s, Direction::new(-1.0, 0.0).unwrap()), -1.0);
    }

    #[test]
    fn two_observation_hand_computation() {
        let sfe = two_obs();
        let u1 = Direction::new(-1.0, 0.0).unwrap();
        assert_eq!(sfe.eval_h(u1), -1.0);
        assert_eq!(sfe.eval_support_set(u1), RiskPoint::new(1.0, 1.0));
        assert_eq!(sfe.eval_h(Direction::new(1.0, 0.0).unwrap()), 0.0);
    }

    #[test]
    fn tie_takes_indicator_zero() {
        let ds = Dataset::new(vec![1.0, 1.0], vec![Group::R, Group::B], vec![], 0).unwrap();
        let mat =
            ScoreMaterial::from_dataset(&ds, &LossSpec::classification(), vec![[0.0, 1.0]; 2])
                .unwrap();
        let sfe = SupportFunctionEstimate::new(mat);
        // k = 0 along (1, 0): no switch to the treated losses
        assert_eq!(sfe.eval_support_set(Direction::new(1.0, 0.0).unwrap()), RiskPoint::new(1.0, 1.0));
    }

    #[test]
    fn h_c_examples() {
        let e = RiskPoint::new(0.3, 0.5);
        assert_eq!(eval_h_c(e, Direction::new(0.0, 1.0).unwrap()).unwrap(), 0.5);
        assert!((eval_h_c(e, Direction::new(1.0, 0.0).unwrap()).unwrap() - 0.3).abs() < 1e-15);
        assert!(eval_h_c(e, Direction::new(-1.0, 0.0).unwrap()).is_err());
        let on = RiskPoint::new(0.4, 0.4);
        let q = Direction::normalized(0.3, 0.9).unwrap();
        assert!((eval_h_c(on, q).unwrap() - q.dot([0.4, 0.4])).abs() < 1e-15);
    }

    #[test]
    fn influence_degenerate_zero() {
        let ds = Dataset::new(vec![0.0, 1.0, 0.0], vec![Group::R, Group::B, Group::B], vec![], 0)
            .unwrap();
        let zero = LossSpec::custom("zero", 0.0, |_, _| 0.0);
        let mat = ScoreMaterial::from_dataset(&ds, &zero, vec![[0.2, -0.1]; 3]).unwrap();
        let sfe = SupportFunctionEstimate::new(mat);
        let z = sfe.eval_influence(Direction::from_angle(0.7));
        assert!(z.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn etilde_symmetric_set() {
        // square symmetric about the 45-degree line
        let sq = PointSupport {
            points: vec![[0.2, 0.2], [0.6, 0.2], [0.2, 0.6], [0.6, 0.6]],
        };
        let r = eval_h_etilde(&|q| sq.support(q), 50.0, 1e-8);
        assert!(!r.unbounded);
        assert!((r.value - sq.support(U1)).abs() < 1e-9);
        let f = r.fairest_point();
        assert!((f.r - 0.2).abs() < 1e-9 && (f.b - 0.2).abs() < 1e-9);
        // strictly above the line
        let above = PointSupport {
            points: vec![[0.1, 0.5], [0.3, 0.7], [0.2, 0.9]],
        };
        assert!(eval_h_etilde(&|q| above.support(q), 50.0, 1e-8).unbounded);
        let _ = U2;
    }

    #[test]
    fn sweep_matches_direct() {
        let ds = Dataset::new(
            vec![1.0, 0.0, 1.0, 0.0, 1.0],
            vec![Group::R, Group::B, Group::B, Group::R, Group::R],
            vec![],
            0,
        )
        .unwrap();
        let dt = vec![[0.3, 0.0], [0.0, -0.2], [0.0, 0.5], [-0.4, 0.0], [0.1, 0.0]];
        let mat = ScoreMaterial::from_dataset(&ds, &LossSpec::classification(), dt).unwrap();
        let sfe = SupportFunctionEstimate::new(mat);
        let grid = DirectionGrid::full(16).unwrap();
        let gv = sfe.grid_values(&grid);
        for (j, d) in grid.dirs().iter().enumerate() {
            let s = sfe.eval_s_raw(d.q);
            assert!((s[0] - gv.s[j][0]).abs() < 1e-14 && (s[1] - gv.s[j][1]).abs() < 1e-14);
            assert!((sfe.eval_h(*d) - gv.h[j]).abs() < 1e-14);
        }
    }
}
