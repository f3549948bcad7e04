//! Multiplier bootstrap with numerical directional derivatives, and the procedures
//! built on it: frontier and LDA membership tests, the weak group-skew test and the
//! confidence interval for the distance to the fairest point.
//!
//! All functionals are evaluated on an even full-circle direction grid. One set of
//! bootstrap draws √n(h̃ − ĥ) on that grid (plus √n(ẽ* − ê*) when a status-quo risk is
//! attached) is shared by every functional computed from the same sample.

use std::collections::BTreeMap;

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{
    compute_loss_quad, group_proportions, Dataset, DirectionGrid, Group, GroupScale, LossSpec, RiskPoint, U1,
};
use crate::error::{Error, Result};
use crate::geometry::{estimate_feasible_set, opposite_indices, outside_gap, EGrid, Polygon};
use crate::rng::{stream_rng, streams};
use crate::supportfn::{eval_h_c_raw, positive_arc, sweep, SupportFunctionEstimate, ADMISSIBLE_TOL};

/// Plug-in risks of a status-quo algorithm.
#[derive(Clone, Debug, Serialize)]
pub struct StatusQuoRisk {
    pub e_star: RiskPoint,
    /// Zᵢ^g = 1{Gᵢ=g}(a*(Xᵢ)ℓ(1,Yᵢ) + (1−a*(Xᵢ))ℓ(0,Yᵢ)).
    pub z: Vec<[f64; 2]>,
    /// Zᵢ^g/μ̂_g − (mean Z^g)/μ̂_g²·1{Gᵢ=g}.
    pub influence: Vec<[f64; 2]>,
    pub scale: GroupScale,
}

pub fn estimate_status_quo(ds: &Dataset, loss: &LossSpec, a_star: &[f64]) -> Result<StatusQuoRisk> {
    if a_star.len() != ds.n() {
        return Err(Error::InvalidInput(format!(
            "status-quo scores have {} entries for {} observations",
            a_star.len(),
            ds.n()
        )));
    }
    if let Some(i) = a_star.iter().position(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::InvalidInput(format!(
            "status-quo score at row {i} is outside [0, 1]: {}",
            a_star[i]
        )));
    }
    let quads = compute_loss_quad(ds, loss)?;
    let scale = group_proportions(ds)?;
    let n = ds.n() as f64;
    let z: Vec<[f64; 2]> = quads
        .iter()
        .zip(a_star)
        .map(|(q, a)| {
            [
                a * q.l1[0] + (1.0 - a) * q.l0[0],
                a * q.l1[1] + (1.0 - a) * q.l0[1],
            ]
        })
        .collect();
    let sum = z.iter().fold([0.0; 2], |s, v| [s[0] + v[0], s[1] + v[1]]);
    let mean = [sum[0] / n, sum[1] / n];
    let e = [mean[0] / scale.mu[0], mean[1] / scale.mu[1]];
    let influence = z
        .iter()
        .zip(ds.groups())
        .map(|(zi, g)| {
            let mut out = [zi[0] / scale.mu[0], zi[1] / scale.mu[1]];
            let k = g.index();
            out[k] -= mean[k] / (scale.mu[k] * scale.mu[k]);
            out
        })
        .collect();
    Ok(StatusQuoRisk {
        e_star: RiskPoint::from_array(e),
        z,
        influence,
        scale,
    })
}

/// Settings of the multiplier bootstrap.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BootstrapConfig {
    pub draws: usize,
    pub seed: u64,
    /// Derivative step; `None` means n^(−1/3).
    pub s_n: Option<f64>,
    pub varsigma: f64,
    /// Size of the full-circle grid (a multiple of 8).
    pub grid_size: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            draws: 500,
            seed: 0xB007,
            s_n: None,
            varsigma: 1e-3,
            grid_size: 360,
        }
    }
}

impl BootstrapConfig {
    pub fn step(&self, n: usize) -> f64 {
        self.s_n.unwrap_or_else(|| (n as f64).powf(-1.0 / 3.0))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.draws < 100 {
            return Err(Error::InvalidInput(format!(
                "bootstrap needs at least 100 draws, got {}",
                self.draws
            )));
        }
        let s = self.step(n);
        if !(s > 0.0) || (n as f64).sqrt() * s < 1.0 {
            return Err(Error::InvalidInput(format!(
                "derivative step {s} violates s_n > 0 and sqrt(n)·s_n >= 1"
            )));
        }
        if !(self.varsigma >= 0.0) {
            return Err(Error::InvalidInput("varsigma must be non-negative".into()));
        }
        if self.grid_size < 8 || self.grid_size % 8 != 0 {
            return Err(Error::InvalidInput(format!(
                "bootstrap grid size must be a positive multiple of 8, got {}",
                self.grid_size
            )));
        }
        Ok(())
    }
}

/// Index sets on an even full-circle grid that the functionals need.
#[derive(Clone, Debug)]
pub struct GridIndex {
    pub opposite: Vec<usize>,
    pub admissible: Vec<usize>,
    pub pareto: Vec<usize>,
    pub u1: usize,
    pub u2: usize,
    /// (1, −1)/√2 and (−1, 1)/√2.
    pub d_below: usize,
    pub d_above: usize,
    /// (j, 1/|q₁+q₂|) for directions with q₁ + q₂ < 0.
    pub etilde: Vec<(usize, f64)>,
}

impl GridIndex {
    pub fn new(grid: &DirectionGrid) -> Result<GridIndex> {
        use std::f64::consts::PI;
        let n = grid.len();
        if !grid.is_full_circle() || n % 8 != 0 || grid.arc().0 != 0.0 {
            return Err(Error::InvalidInput(
                "a full-circle grid starting at angle 0 with a multiple of 8 directions is required".into(),
            ));
        }
        let find = |a: f64| {
            grid.index_of_angle(a)
                .ok_or_else(|| Error::Numerical(format!("angle {a} missing from grid")))
        };
        let dirs = grid.dirs();
        Ok(GridIndex {
            opposite: opposite_indices(grid)?,
            admissible: (0..n)
                .filter(|&j| dirs[j].q[0] + dirs[j].q[1] >= -ADMISSIBLE_TOL)
                .collect(),
            pareto: (0..n)
                .filter(|&j| dirs[j].q[0] <= 1e-12 && dirs[j].q[1] <= 1e-12)
                .collect(),
            u1: find(PI)?,
            u2: find(1.5 * PI)?,
            d_below: find(1.75 * PI)?,
            d_above: find(0.75 * PI)?,
            etilde: (0..n)
                .filter_map(|j| {
                    let s = dirs[j].q[0] + dirs[j].q[1];
                    (s < -1e-9).then(|| (j, 1.0 / -s))
                })
                .collect(),
        })
    }
}

fn pos(x: f64) -> f64 {
    x.max(0.0)
}

fn neg(x: f64) -> f64 {
    (-x).max(0.0)
}

/// max over admissible q of (−h_C(e)(q) − h(−q)).
pub fn separation_on_grid(grid: &DirectionGrid, idx: &GridIndex, h: &[f64], e: [f64; 2]) -> f64 {
    let er = RiskPoint::from_array(e);
    idx.admissible
        .iter()
        .map(|&j| {
            let hc = eval_h_c_raw(er, grid.dirs()[j].q).unwrap_or(f64::INFINITY);
            -hc - h[idx.opposite[j]]
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Frontier functional [max_q qᵀe − h]₊ + [max_adm(−h_C(e) − h(−q))]₋.
pub fn phi_frontier(grid: &DirectionGrid, idx: &GridIndex, h: &[f64], e: [f64; 2]) -> f64 {
    pos(outside_gap(grid, h, e)) + neg(separation_on_grid(grid, idx, h, e))
}

/// Pareto functional [max_{S¹} qᵀe − h]₊ + [max over the Pareto arc of qᵀe − h]₋.
pub fn phi_pareto(grid: &DirectionGrid, idx: &GridIndex, h: &[f64], e: [f64; 2]) -> f64 {
    let arc = idx
        .pareto
        .iter()
        .map(|&j| grid.dirs()[j].dot(e) - h[j])
        .fold(f64::NEG_INFINITY, f64::max);
    pos(outside_gap(grid, h, e)) + neg(arc)
}

/// Grid version of inf_c h(𝔲₁ − c(1,−1)) = min over q₁+q₂<0 of h(q)/|q₁+q₂|.
pub fn h_etilde_on_grid(idx: &GridIndex, h: &[f64]) -> f64 {
    idx.etilde
        .iter()
        .map(|&(j, w)| h[j] * w)
        .fold(f64::INFINITY, f64::min)
}

/// √n φ_F(ĥ, e) on a full-circle grid.
pub fn stat_frontier(sfe: &SupportFunctionEstimate, grid: &DirectionGrid, e: RiskPoint) -> Result<f64> {
    let idx = GridIndex::new(grid)?;
    let h = sfe.grid_values(grid).h;
    Ok((sfe.n() as f64).sqrt() * phi_frontier(grid, &idx, &h, e.as_array()))
}

pub fn stat_pareto(sfe: &SupportFunctionEstimate, grid: &DirectionGrid, e: RiskPoint) -> Result<f64> {
    let idx = GridIndex::new(grid)?;
    let h = sfe.grid_values(grid).h;
    Ok((sfe.n() as f64).sqrt() * phi_pareto(grid, &idx, &h, e.as_array()))
}

/// The LDA statistic: the frontier statistic at the estimated status-quo risks.
pub fn stat_lda(sfe: &SupportFunctionEstimate, grid: &DirectionGrid, sq: &StatusQuoRisk) -> Result<f64> {
    stat_frontier(sfe, grid, sq.e_star)
}

/// β-quantile inf{c : F̂(c) ≥ β} of an empirical sample.
pub fn quantile(values: &[f64], beta: f64) -> f64 {
    let mut v = values.to_vec();
    quantile_in_place(&mut v, beta)
}

fn quantile_rank(len: usize, beta: f64) -> usize {
    let k = (beta * len as f64 - 1e-9).ceil();
    (k.max(1.0) as usize).min(len) - 1
}

fn quantile_in_place(v: &mut [f64], beta: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let k = quantile_rank(v.len(), beta);
    let (_, x, _) = v.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    *x
}

/// Bootstrap draws of √n(h̃ − ĥ) on a grid and √n(ẽ* − ê*).
#[derive(Clone, Debug)]
pub struct BootstrapDraws {
    pub grid: DirectionGrid,
    pub index: GridIndex,
    /// ĥ and ŝ on the grid.
    pub h: Vec<f64>,
    pub s: Vec<[f64; 2]>,
    pub e_star: Option<[f64; 2]>,
    pub n: usize,
    pub s_n: f64,
    pub varsigma: f64,
    pub seed: u64,
    draws: usize,
    delta: Vec<f64>,
    de: Vec<[f64; 2]>,
    sup_abs: Vec<f64>,
}

impl BootstrapDraws {
    pub fn draws(&self) -> usize {
        self.draws
    }

    /// √n(h̃_b − ĥ) on the grid.
    pub fn delta(&self, b: usize) -> &[f64] {
        let m = self.grid.len();
        &self.delta[b * m..(b + 1) * m]
    }

    /// Δ_b at an arbitrary angle, linear in angle between neighbouring grid directions.
    pub fn delta_at(&self, b: usize, theta: f64) -> f64 {
        let m = self.grid.len();
        let step = 2.0 * std::f64::consts::PI / m as f64;
        let t = theta.rem_euclid(2.0 * std::f64::consts::PI) / step;
        let j = (t.floor() as usize).min(m - 1);
        let w = t - j as f64;
        let d = self.delta(b);
        (1.0 - w) * d[j] + w * d[(j + 1) % m]
    }

    pub fn delta_e(&self, b: usize) -> [f64; 2] {
        self.de[b]
    }

    /// sup_q |√n(h̃_b − ĥ)(q)|.
    pub fn sup_abs(&self, b: usize) -> f64 {
        self.sup_abs[b]
    }

    fn sqrt_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }

    /// φ̂′ at every draw: (φ(ĥ + s_nΔ_b, ê + s_nΔe_b) − φ(ĥ, ê))/s_n.
    pub fn derivative_draws<F>(&self, phi: F) -> Result<Vec<f64>>
    where
        F: Fn(&[f64], [f64; 2]) -> f64 + Sync,
    {
        let e0 = self.e_star.unwrap_or([0.0; 2]);
        let base = phi(&self.h, e0);
        let s = self.s_n;
        let vals: Vec<f64> = (0..self.draws)
            .into_par_iter()
            .map_init(
                || vec![0.0; self.grid.len()],
                |buf, b| {
                    for ((o, h), d) in buf.iter_mut().zip(&self.h).zip(self.delta(b)) {
                        *o = h + s * d;
                    }
                    let de = self.de[b];
                    let e = [e0[0] + s * de[0], e0[1] + s * de[1]];
                    (phi(buf, e) - base) / s
                },
            )
            .collect();
        if let Some(b) = vals.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite bootstrap value at draw {b}")));
        }
        Ok(vals)
    }
}

/// Per-observation weights for one draw: Wᵢ/W̄ with Wᵢ ~ Exp(1).
fn draw_weights(n: usize, seed: u64, b: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, streams::BOOTSTRAP, b as u64);
    let mut w: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
    let mean = w.iter().sum::<f64>() / n as f64;
    for v in &mut w {
        *v /= mean;
    }
    w
}

struct DrawInputs<'a> {
    sfe: &'a SupportFunctionEstimate,
    sq: Option<&'a StatusQuoRisk>,
    grid: &'a DirectionGrid,
    base_arcs: Vec<crate::supportfn::Arc>,
    h: &'a [f64],
    e_star: Option<[f64; 2]>,
}

/// One bootstrap replicate from normalized weights: (√n(h̃ − ĥ), √n(ẽ* − ê*)).
fn replicate(inp: &DrawInputs<'_>, w: &[f64]) -> Result<(Vec<f64>, [f64; 2])> {
    let mat = inp.sfe.material();
    let n = mat.n();
    let groups = mat.groups();
    let mut mu = [0.0; 2];
    for (wi, g) in w.iter().zip(groups) {
        mu[g.index()] += wi;
    }
    mu = [mu[0] / n as f64, mu[1] / n as f64];
    if !(mu[0] > 0.0 && mu[1] > 0.0) {
        return Err(Error::Numerical("bootstrap draw lost a group".into()));
    }
    let m = [1.0 / mu[0], 1.0 / mu[1]];
    let lo = inp.grid.arc().0;
    let dirs = inp.grid.dirs();
    let arcs: Vec<_> = mat
        .dtheta()
        .iter()
        .zip(&inp.base_arcs)
        .map(|(d, a)| positive_arc([m[0] * d[0], m[1] * d[1]], dirs, lo, Some(*a)))
        .collect();
    let mut base = [0.0; 2];
    for (wi, l) in w.iter().zip(mat.l0()) {
        base[0] += wi * l[0];
        base[1] += wi * l[1];
    }
    let s = sweep(inp.grid, &arcs, base, mat.dl(), Some(w), m, n as f64);
    let rn = (n as f64).sqrt();
    let delta = dirs
        .iter()
        .zip(&s)
        .zip(inp.h)
        .map(|((d, sv), h)| rn * (d.dot(*sv) - h))
        .collect();
    let de = match (inp.sq, inp.e_star) {
        (Some(sq), Some(e)) => {
            let mut acc = [0.0; 2];
            for (wi, z) in w.iter().zip(&sq.z) {
                acc[0] += wi * z[0];
                acc[1] += wi * z[1];
            }
            [
                rn * (acc[0] / n as f64 / mu[0] - e[0]),
                rn * (acc[1] / n as f64 / mu[1] - e[1]),
            ]
        }
        _ => [0.0; 2],
    };
    Ok((delta, de))
}

/// Exponential multiplier weights, bootstrap M̃ and ẽ*, draws on the grid.
pub fn multiplier_bootstrap(
    sfe: &SupportFunctionEstimate,
    sq: Option<&StatusQuoRisk>,
    cfg: &BootstrapConfig,
) -> Result<BootstrapDraws> {
    let n = sfe.n();
    cfg.validate(n)?;
    if let Some(sq) = sq {
        if sq.z.len() != n {
            return Err(Error::InvalidInput("status-quo risks come from a different sample".into()));
        }
    }
    let grid = DirectionGrid::full(cfg.grid_size)?;
    let index = GridIndex::new(&grid)?;
    let gv = sfe.grid_values(&grid);
    let inp = DrawInputs {
        sfe,
        sq,
        grid: &grid,
        base_arcs: sfe.arcs(&grid),
        h: &gv.h,
        e_star: sq.map(|s| s.e_star.as_array()),
    };
    let reps: Vec<Result<(Vec<f64>, [f64; 2])>> = (0..cfg.draws)
        .into_par_iter()
        .map(|b| replicate(&inp, &draw_weights(n, cfg.seed, b)))
        .collect();
    let m = grid.len();
    let mut delta = Vec::with_capacity(cfg.draws * m);
    let mut de = Vec::with_capacity(cfg.draws);
    let mut sup_abs = Vec::with_capacity(cfg.draws);
    for (b, r) in reps.into_iter().enumerate() {
        let (d, e) = r.map_err(|err| Error::Numerical(format!("bootstrap draw {b}: {err}")))?;
        if let Some(j) = d.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite bootstrap value at draw {b}, direction {j}")));
        }
        sup_abs.push(d.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        delta.extend(d);
        de.push(e);
    }
    let e_star = inp.e_star;
    Ok(BootstrapDraws {
        index,
        h: gv.h,
        s: gv.s,
        e_star,
        n,
        s_n: cfg.step(n),
        varsigma: cfg.varsigma,
        seed: cfg.seed,
        draws: cfg.draws,
        delta,
        de,
        sup_abs,
        grid,
    })
}

/// Bootstrap replicate under caller-supplied normalized weights (diagnostics and tests).
pub fn replicate_with_weights(
    sfe: &SupportFunctionEstimate,
    sq: Option<&StatusQuoRisk>,
    grid: &DirectionGrid,
    w: &[f64],
) -> Result<(Vec<f64>, [f64; 2])> {
    if w.len() != sfe.n() {
        return Err(Error::InvalidInput("weight vector length differs from n".into()));
    }
    let h = sfe.grid_values(grid).h;
    let inp = DrawInputs {
        sfe,
        sq,
        grid,
        base_arcs: sfe.arcs(grid),
        h: &h,
        e_star: sq.map(|s| s.e_star.as_array()),
    };
    replicate(&inp, w)
}

/// Test outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Reject,
    FailToReject,
}

impl Decision {
    pub fn from_reject(r: bool) -> Decision {
        if r {
            Decision::Reject
        } else {
            Decision::FailToReject
        }
    }

    pub fn is_reject(self) -> bool {
        self == Decision::Reject
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestResult {
    pub test: String,
    pub n: usize,
    pub alpha: f64,
    pub statistic: f64,
    pub critical_value: f64,
    pub decision: Decision,
    #[serde(rename = "B")]
    pub draws: usize,
    pub s_n: f64,
    pub varsigma: f64,
    pub kappa_n: Option<f64>,
    pub seed: u64,
    pub grid_sizes: BTreeMap<String, usize>,
    pub diagnostics: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

impl TestResult {
    fn new(test: &str, draws: &BootstrapDraws, alpha: f64, statistic: f64, critical_value: f64) -> TestResult {
        let mut grid_sizes = BTreeMap::new();
        grid_sizes.insert("directions".to_string(), draws.grid.len());
        TestResult {
            test: test.to_string(),
            n: draws.n,
            alpha,
            statistic,
            critical_value,
            decision: Decision::from_reject(statistic > critical_value),
            draws: draws.draws,
            s_n: draws.s_n,
            varsigma: draws.varsigma,
            kappa_n: None,
            seed: draws.seed,
            grid_sizes,
            diagnostics: BTreeMap::new(),
            flags: Vec::new(),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0,1), got {alpha}")));
    }
    Ok(())
}

/// Frontier-membership test at a known point e: reject if T > ĉ_{1−α+ς} + ς.
pub fn test_frontier_point(draws: &BootstrapDraws, e: RiskPoint, alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    let (grid, idx) = (&draws.grid, &draws.index);
    let ea = e.as_array();
    let stat = draws.sqrt_n() * phi_frontier(grid, idx, &draws.h, ea);
    let d = draws.derivative_draws(|h, _| phi_frontier(grid, idx, h, ea))?;
    let c = quantile(&d, (1.0 - alpha + draws.varsigma).min(1.0)) + draws.varsigma;
    let mut r = TestResult::new("frontier", draws, alpha, stat, c);
    r.diagnostics.insert("e_r".into(), e.r);
    r.diagnostics.insert("e_b".into(), e.b);
    Ok(r)
}

/// LDA test: as the frontier test at ê*, with ê* perturbed in the bootstrap as well.
pub fn test_lda(draws: &BootstrapDraws, alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    let e = draws
        .e_star
        .ok_or_else(|| Error::InvalidInput("the LDA test needs status-quo risks".into()))?;
    let (grid, idx) = (&draws.grid, &draws.index);
    let stat = draws.sqrt_n() * phi_frontier(grid, idx, &draws.h, e);
    let d = draws.derivative_draws(|h, ee| phi_frontier(grid, idx, h, ee))?;
    let c = quantile(&d, (1.0 - alpha + draws.varsigma).min(1.0)) + draws.varsigma;
    let mut r = TestResult::new("lda", draws, alpha, stat, c);
    r.diagnostics.insert("e_star_r".into(), e[0]);
    r.diagnostics.insert("e_star_b".into(), e[1]);
    Ok(r)
}

/// Confidence set for the frontier by inverting the pointwise frontier test on a grid.
#[derive(Clone, Debug, Serialize)]
pub struct FrontierConfidenceSet {
    pub alpha: f64,
    pub grid: Option<EGrid>,
    /// Retained points with their statistic and critical value.
    pub points: Vec<([f64; 2], f64, f64)>,
}

/// Keeps every grid point e with √n φ_F(ĥ, e) at or below its own bootstrap critical
/// value. Points above Q(2 sup|Δ|) + ς cannot pass and are skipped before the
/// per-point bootstrap.
pub fn frontier_confidence_set(
    draws: &BootstrapDraws,
    alpha: f64,
    size: usize,
    c_bound: f64,
) -> Result<FrontierConfidenceSet> {
    check_alpha(alpha)?;
    if size < 2 {
        return Err(Error::InvalidInput("confidence-set grid needs at least 2 points per axis".into()));
    }
    let (grid, idx) = (&draws.grid, &draws.index);
    let rn = draws.sqrt_n();
    let beta = (1.0 - alpha + draws.varsigma).min(1.0);
    let bound: Vec<f64> = draws.sup_abs.iter().map(|v| 2.0 * v).collect();
    let cap = quantile(&bound, beta) + draws.varsigma;
    let Some((lo, hi)) = region_box(draws, cap / rn, &[], c_bound)? else {
        return Ok(FrontierConfidenceSet { alpha, grid: None, points: Vec::new() });
    };
    let eg = EGrid::new(lo, hi, size, size);
    let cands: Vec<([f64; 2], f64)> = (0..size)
        .flat_map(|i| (0..size).map(move |j| (i, j)))
        .map(|(i, j)| {
            let e = eg.point(i, j);
            (e, rn * phi_frontier(grid, idx, &draws.h, e))
        })
        .filter(|(_, t)| *t <= cap)
        .collect();
    let kept: Vec<Result<Option<([f64; 2], f64, f64)>>> = cands
        .into_par_iter()
        .map(|(e, t)| {
            let d = draws.derivative_draws(|h, _| phi_frontier(grid, idx, h, e))?;
            let c = quantile(&d, beta) + draws.varsigma;
            Ok((t <= c).then_some((e, t, c)))
        })
        .collect();
    let mut points = Vec::new();
    for k in kept {
        if let Some(p) = k? {
            points.push(p);
        }
    }
    Ok(FrontierConfidenceSet { alpha, grid: Some(eg), points })
}

// ---------------------------------------------------------------------------
// Two-point confidence sets by test inversion on candidate grids.

/// Moment system of one point of a pair.
#[derive(Clone, Copy, Debug)]
enum Moment {
    /// z ∈ Ê and the equality qᵀz = ĥ(q) at the grid direction `eq`.
    Support { eq: usize },
    /// z = ê*.
    Equal,
}

/// Candidates of one point with statistics and derivative draws.
struct Candidates {
    pts: Vec<[f64; 2]>,
    t: Vec<f64>,
    d: Vec<f64>,
    upper: Vec<f64>,
    draws: usize,
}

impl Candidates {
    fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.draws..(i + 1) * self.draws]
    }

    fn len(&self) -> usize {
        self.pts.len()
    }

    fn keep(self, keep: &[bool]) -> Candidates {
        let b = self.draws;
        let mut out = Candidates {
            pts: vec![],
            t: vec![],
            d: vec![],
            upper: vec![],
            draws: b,
        };
        for (i, k) in keep.iter().enumerate() {
            if *k {
                out.pts.push(self.pts[i]);
                out.t.push(self.t[i]);
                out.d.extend_from_slice(self.row(i));
                out.upper.push(self.upper[i]);
            }
        }
        out
    }

    /// Slack T − u_{1−α/2}; a pair can only be retained if the two slacks sum to ≤ 0.
    fn min_slack(&self) -> f64 {
        self.t
            .iter()
            .zip(&self.upper)
            .map(|(t, u)| t - u)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Statistic (unscaled) and derivative row of one candidate.
fn candidate_draws(draws: &BootstrapDraws, moment: Moment, e: [f64; 2], out: &mut [f64]) -> f64 {
    let s = draws.s_n;
    match moment {
        Moment::Equal => {
            let t = draws.e_star.unwrap_or([0.0; 2]);
            let a = [e[0] - t[0], e[1] - t[1]];
            let base = a[0].abs() + a[1].abs();
            for (b, o) in out.iter_mut().enumerate() {
                let de = draws.de[b];
                *o = ((a[0] - s * de[0]).abs() + (a[1] - s * de[1]).abs() - base) / s;
            }
            base
        }
        Moment::Support { eq } => {
            let dirs = draws.grid.dirs();
            let g: Vec<f64> = dirs.iter().zip(&draws.h).map(|(d, h)| d.dot(e) - h).collect();
            let gmax = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let base = pos(gmax) + neg(g[eq]);
            let smax = draws.sup_abs.iter().copied().fold(0.0f64, f64::max);
            let mut order: Vec<usize> = (0..g.len())
                .filter(|&j| g[j] >= gmax - 2.0 * s * smax)
                .collect();
            order.sort_by(|a, b| g[*b].total_cmp(&g[*a]));
            for (b, o) in out.iter_mut().enumerate() {
                let mb = draws.sup_abs[b];
                let delta = draws.delta(b);
                let first = if gmax + s * mb <= 0.0 {
                    0.0
                } else {
                    let mut best = f64::NEG_INFINITY;
                    for &j in &order {
                        if g[j] + s * mb <= best {
                            break;
                        }
                        best = best.max(g[j] - s * delta[j]);
                    }
                    pos(best)
                };
                let second = neg(g[eq] - s * delta[eq]);
                *o = (first + second - base) / s;
            }
            base
        }
    }
}

/// Evaluates candidate points, dropping those whose own statistic exceeds `cap`.
fn evaluate_candidates(draws: &BootstrapDraws, moment: Moment, pts: &[[f64; 2]], alpha: f64, cap: f64) -> Candidates {
    let rn = draws.sqrt_n();
    let b = draws.draws;
    let rows: Vec<Option<([f64; 2], f64, Vec<f64>, f64)>> = pts
        .par_iter()
        .map(|p| {
            let mut row = vec![0.0; b];
            let base = candidate_draws(draws, moment, *p, &mut row);
            let t = rn * base;
            if t > cap {
                return None;
            }
            let u = quantile(&row, 1.0 - alpha / 2.0);
            Some((*p, t, row, u))
        })
        .collect();
    let mut out = Candidates {
        pts: vec![],
        t: vec![],
        d: vec![],
        upper: vec![],
        draws: b,
    };
    for (p, t, row, u) in rows.into_iter().flatten() {
        out.pts.push(p);
        out.t.push(t);
        out.d.extend(row);
        out.upper.push(u);
    }
    out
}

/// Exact membership of a pair: T_a + T_b ≤ ĉ_{1−α}(D_a + D_b).
fn pair_in_cs(a: &Candidates, i: usize, b: &Candidates, k: usize, alpha: f64, buf: &mut Vec<f64>) -> bool {
    let t = a.t[i] + b.t[k];
    if t > a.upper[i] + b.upper[k] {
        return false;
    }
    buf.clear();
    buf.extend(a.row(i).iter().zip(b.row(k)).map(|(x, y)| x + y));
    t <= quantile_in_place(buf, 1.0 - alpha)
}

/// Drops candidates that cannot be part of any retained pair (union bound).
fn prefilter(a: Candidates, b: Candidates) -> (Candidates, Candidates) {
    let (ma, mb) = (a.min_slack(), b.min_slack());
    let ka: Vec<bool> = a.t.iter().zip(&a.upper).map(|(t, u)| t - u <= -mb).collect();
    let kb: Vec<bool> = b.t.iter().zip(&b.upper).map(|(t, u)| t - u <= -ma).collect();
    (a.keep(&ka), b.keep(&kb))
}

/// Candidate grid on the bounding box of a region, restricted to B_C.
fn grid_points(lo: [f64; 2], hi: [f64; 2], size: usize, c: f64) -> (EGrid, Vec<[f64; 2]>) {
    let g = EGrid::new(lo, hi, size, size);
    let pts = g
        .points()
        .into_iter()
        .filter(|p| p[0].hypot(p[1]) <= c)
        .collect();
    (g, pts)
}

/// Refined box around surviving candidates, padded by one spacing of the previous grid.
fn refine_box(cands: &Candidates, prev: &EGrid) -> Option<([f64; 2], [f64; 2])> {
    if cands.len() == 0 {
        return None;
    }
    let sp = prev.spacing();
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in &cands.pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    for k in 0..2 {
        lo[k] = (lo[k] - sp[k]).max(prev.lo[k]);
        hi[k] = (hi[k] + sp[k]).min(prev.hi[k]);
    }
    Some((lo, hi))
}

/// Settings for the candidate grids of the two-point confidence sets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateConfig {
    /// Points per axis of each candidate grid.
    pub size: usize,
    /// Re-grid the bounding box of the first-pass survivors.
    pub refine: bool,
    /// Radius of B_C.
    pub c_bound: f64,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        CandidateConfig {
            size: 40,
            refine: true,
            c_bound: std::f64::consts::SQRT_2,
        }
    }
}

/// One side of a two-point confidence set: its moment and the region to grid.
struct Side {
    moment: Moment,
    region: Option<([f64; 2], [f64; 2])>,
}

struct PairSets {
    a: Candidates,
    b: Candidates,
    grids: Vec<EGrid>,
}

/// Candidate evaluation for both points, with optional refinement.
fn build_pair_sets(draws: &BootstrapDraws, sa: Side, sb: Side, alpha: f64, cap: f64, cfg: &CandidateConfig) -> PairSets {
    let empty = |b: usize| Candidates {
        pts: vec![],
        t: vec![],
        d: vec![],
        upper: vec![],
        draws: b,
    };
    let mut grids = Vec::new();
    let run = |region: Option<([f64; 2], [f64; 2])>, moment: Moment, grids: &mut Vec<EGrid>| match region {
        Some((lo, hi)) => {
            let (g, pts) = grid_points(lo, hi, cfg.size, cfg.c_bound);
            grids.push(g.clone());
            (Some(g), evaluate_candidates(draws, moment, &pts, alpha, cap))
        }
        None => (None, empty(draws.draws)),
    };
    let (ga, ca) = run(sa.region, sa.moment, &mut grids);
    let (gb, cb) = run(sb.region, sb.moment, &mut grids);
    let (mut ca, mut cb) = prefilter(ca, cb);
    if cfg.refine && ca.len() > 0 && cb.len() > 0 {
        let ra = ga.as_ref().and_then(|g| refine_box(&ca, g));
        let rb = gb.as_ref().and_then(|g| refine_box(&cb, g));
        let (_, na) = run(ra, sa.moment, &mut grids);
        let (_, nb) = run(rb, sb.moment, &mut grids);
        let (na, nb) = prefilter(na, nb);
        // keep the first pass if the finer grid lost every candidate of either point
        if na.len() > 0 && nb.len() > 0 {
            ca = na;
            cb = nb;
        }
    }
    PairSets { a: ca, b: cb, grids }
}

/// Region {z ∈ Ê(ĥ + slack)} ∩ extra halfplanes, as a bounding box.
fn region_box(draws: &BootstrapDraws, slack: f64, cuts: &[([f64; 2], f64)], c: f64) -> Result<Option<([f64; 2], [f64; 2])>> {
    let h: Vec<f64> = draws.h.iter().map(|v| v + slack).collect();
    let mut poly: Polygon = estimate_feasible_set(&h, &draws.grid, 2.0 * c + 1.0)?.polygon;
    for (q, v) in cuts {
        poly = poly.clip(*q, *v);
    }
    Ok(poly.bounding_box())
}

/// Result of the weak group-skew test.
#[derive(Clone, Debug, Serialize)]
pub struct SkewTestResult {
    pub result: TestResult,
    /// sup over the confidence set of ((𝔲₁−𝔲₂)ᵀR̃)((𝔲₁−𝔲₂)ᵀB̃); `None` when the set is empty.
    pub sup_product: Option<f64>,
    pub cs_empty: bool,
    /// Whether a supplied true (R, B) pair lies in the confidence set.
    pub truth_covered: Option<bool>,
    pub candidates_r: usize,
    pub candidates_b: usize,
    pub grids: Vec<EGrid>,
}

/// Weak group-skew test: confidence set for (R, B) by test inversion, then reject iff
/// every retained pair lies strictly on opposite sides of the 45-degree line.
pub fn test_weak_skew(
    draws: &BootstrapDraws,
    alpha: f64,
    cfg: &CandidateConfig,
    truth: Option<(RiskPoint, RiskPoint)>,
) -> Result<SkewTestResult> {
    check_alpha(alpha)?;
    let idx = &draws.index;
    let rn = draws.sqrt_n();
    // each point's derivative is at most 2 sup|Δ| in absolute value
    let bound: Vec<f64> = (0..draws.draws).map(|b| 4.0 * draws.sup_abs[b]).collect();
    let cap = quantile(&bound, 1.0 - alpha);
    let slack = cap / rn;
    let (hu1, hu2) = (draws.h[idx.u1], draws.h[idx.u2]);
    // [𝔲ⱼᵀz − ĥ(𝔲ⱼ)]₋ ≤ slack  ⇔  −𝔲ⱼᵀz ≤ −ĥ(𝔲ⱼ) + slack
    let reg_r = region_box(draws, slack, &[([1.0, 0.0], -hu1 + slack)], cfg.c_bound)?;
    let reg_b = region_box(draws, slack, &[([0.0, 1.0], -hu2 + slack)], cfg.c_bound)?;
    let sets = build_pair_sets(
        draws,
        Side {
            moment: Moment::Support { eq: idx.u1 },
            region: reg_r,
        },
        Side {
            moment: Moment::Support { eq: idx.u2 },
            region: reg_b,
        },
        alpha,
        cap,
        cfg,
    );
    let (a, b) = (&sets.a, &sets.b);
    let side = |p: &[f64; 2]| p[1] - p[0];
    let mut pairs: Vec<(f64, u32, u32)> = Vec::with_capacity(a.len() * b.len());
    for i in 0..a.len() {
        for k in 0..b.len() {
            if a.t[i] + b.t[k] <= a.upper[i] + b.upper[k] {
                pairs.push((side(&a.pts[i]) * side(&b.pts[k]), i as u32, k as u32));
            }
        }
    }
    pairs.sort_unstable_by(|x, y| y.0.total_cmp(&x.0));
    let mut buf = Vec::with_capacity(draws.draws);
    let sup = pairs
        .iter()
        .find(|(_, i, k)| pair_in_cs(a, *i as usize, b, *k as usize, alpha, &mut buf))
        .map(|p| p.0);

    let truth_covered = match truth {
        Some((r, bb)) => {
            let ta = evaluate_candidates(draws, Moment::Support { eq: idx.u1 }, &[r.as_array()], alpha, f64::INFINITY);
            let tb = evaluate_candidates(draws, Moment::Support { eq: idx.u2 }, &[bb.as_array()], alpha, f64::INFINITY);
            Some(pair_in_cs(&ta, 0, &tb, 0, alpha, &mut buf))
        }
        None => None,
    };

    // reject iff sup < 0, i.e. −sup > 0; an empty set rejects
    let stat = match sup {
        Some(s) => -s,
        None => f64::INFINITY,
    };
    let mut result = TestResult::new("weak_skew", draws, alpha, stat, 0.0);
    result.grid_sizes.insert("candidates_per_axis".into(), cfg.size);
    result.grid_sizes.insert("candidate_grids".into(), sets.grids.len());
    result.diagnostics.insert("cap".into(), cap);
    result.diagnostics.insert("pairs_checked".into(), pairs.len() as f64);
    if sup.is_none() {
        result.flags.push("empty_confidence_set".into());
        result.statistic = f64::MAX;
    }
    Ok(SkewTestResult {
        result,
        sup_product: sup,
        cs_empty: sup.is_none(),
        truth_covered,
        candidates_r: a.len(),
        candidates_b: b.len(),
        grids: sets.grids,
    })
}

/// Built-in distances ρ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    SquaredEuclidean,
    Euclidean,
    Manhattan,
    Chebyshev,
}

impl Distance {
    pub fn eval(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let (x, y) = ((a[0] - b[0]).abs(), (a[1] - b[1]).abs());
        match self {
            Distance::SquaredEuclidean => x * x + y * y,
            Distance::Euclidean => x.hypot(y),
            Distance::Manhattan => x + y,
            Distance::Chebyshev => x.max(y),
        }
    }

    pub fn parse(s: &str) -> Result<Distance> {
        match s {
            "squared_euclidean" | "sq_euclidean" => Ok(Distance::SquaredEuclidean),
            "euclidean" => Ok(Distance::Euclidean),
            "manhattan" => Ok(Distance::Manhattan),
            "chebyshev" => Ok(Distance::Chebyshev),
            other => Err(Error::InvalidInput(format!("unknown distance `{other}`"))),
        }
    }
}

/// One branch of the distance interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Branch {
    pub name: String,
    /// `None` when the branch is infeasible or its confidence set is empty.
    pub interval: Option<[f64; 2]>,
    pub note: String,
}

/// Union of branch intervals for ρ(e*, F).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub estimate: Option<f64>,
    pub branches: Vec<Branch>,
}

impl ConfidenceInterval {
    pub fn contains(&self, v: f64) -> bool {
        self.branches
            .iter()
            .filter_map(|b| b.interval)
            .any(|[lo, hi]| v >= lo && v <= hi)
    }

    /// Distance from v to the union of branch intervals (zero inside).
    pub fn gap_to(&self, v: f64) -> f64 {
        self.branches
            .iter()
            .filter_map(|b| b.interval)
            .map(|[lo, hi]| if v < lo { lo - v } else if v > hi { v - hi } else { 0.0 })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceConfig {
    pub candidates: CandidateConfig,
    pub derivative: EtildeDerivative,
    /// Search bound for c in the 45-degree minimization.
    pub etilde_bound: f64,
    pub etilde_tol: f64,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig {
            candidates: CandidateConfig::default(),
            derivative: EtildeDerivative::SingleMinimizer,
            etilde_bound: 50.0,
            etilde_tol: 1e-8,
        }
    }
}

/// How the bootstrap approximates the law of the 45-degree statistic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EtildeDerivative {
    /// Assumes a unique minimizing c: the inf derivative is the bootstrap process at
    /// the estimated minimizer, scaled by the norm of 𝔲₁(ĉ).
    SingleMinimizer,
    /// Numerical derivative of the grid version of h_Ẽ with step s_n.
    Numerical,
}

impl EtildeDerivative {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "single_minimizer" => Ok(Self::SingleMinimizer),
            "numerical" => Ok(Self::Numerical),
            _ => Err(Error::InvalidInput(format!("unknown derivative rule '{s}'"))),
        }
    }
}

/// Confidence interval for ρ(e*, F): union of the two off-line branches and the
/// 45-degree branch.
pub fn distance_to_f_ci(
    sfe: &SupportFunctionEstimate,
    draws: &BootstrapDraws,
    rho: Distance,
    alpha: f64,
    cfg: &DistanceConfig,
) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    let e = draws
        .e_star
        .ok_or_else(|| Error::InvalidInput("the distance interval needs status-quo risks".into()))?;
    let rn = draws.sqrt_n();
    let mut branches = Vec::new();
    let mut estimate = None;

    // 45-degree branch
    let et = sfe.eval_h_etilde(cfg.etilde_bound, cfg.etilde_tol);
    if et.unbounded {
        branches.push(Branch {
            name: "45".into(),
            interval: None,
            note: "inf over c is unbounded".into(),
        });
    } else {
        let f = et.fairest_point().as_array();
        let est = rho.eval(e, f);
        estimate = Some(est);
        let d = match cfg.derivative {
            EtildeDerivative::Numerical => {
                let idx = &draws.index;
                draws.derivative_draws(|h, ee| {
                    let v = h_etilde_on_grid(idx, h);
                    rho.eval(ee, [-v, -v])
                })?
            }
            EtildeDerivative::SingleMinimizer => {
                let u = [U1[0] - et.c_star, U1[1] + et.c_star];
                let norm = u[0].hypot(u[1]);
                let theta = u[1].atan2(u[0]);
                // one-sided difference quotient of ρ; exact in the limit for the
                // directionally differentiable distances offered here
                let t = 1e-7;
                (0..draws.draws)
                    .map(|b| {
                        let de = draws.de[b];
                        let dv = norm * draws.delta_at(b, theta);
                        let e1 = [e[0] + t * de[0], e[1] + t * de[1]];
                        let f1 = [f[0] - t * dv, f[1] - t * dv];
                        (rho.eval(e1, f1) - est) / t
                    })
                    .collect()
            }
        };
        let d: Vec<f64> = d.into_iter().map(f64::abs).collect();
        let c = quantile(&d, (1.0 - alpha + draws.varsigma).min(1.0)) + draws.varsigma;
        branches.push(Branch {
            name: "45".into(),
            interval: Some([(est - c / rn).max(0.0), est + c / rn]),
            note: format!("critical value {c:.6}"),
        });
    }

    // off-line branches: F̃ in the closed half above (below) the line
    for (name, d_idx, half) in [
        ("above", draws.index.d_below, [1.0, -1.0]),
        ("below", draws.index.d_above, [-1.0, 1.0]),
    ] {
        let bound: Vec<f64> = (0..draws.draws)
            .map(|b| {
                let de = draws.de[b];
                de[0].abs() + de[1].abs() + 2.0 * draws.sup_abs[b]
            })
            .collect();
        let cap = quantile(&bound, 1.0 - alpha);
        let slack = cap / rn;
        let dq = draws.grid.dirs()[d_idx].q;
        let hd = draws.h[d_idx];
        let reg_f = region_box(
            draws,
            slack,
            &[([-dq[0], -dq[1]], -hd + slack), (half, 0.0)],
            cfg.candidates.c_bound,
        )?;
        let reg_e = Some(([e[0] - slack, e[1] - slack], [e[0] + slack, e[1] + slack]));
        let sets = build_pair_sets(
            draws,
            Side {
                moment: Moment::Equal,
                region: reg_e,
            },
            Side {
                moment: Moment::Support { eq: d_idx },
                region: reg_f,
            },
            alpha,
            cap,
            &cfg.candidates,
        );
        let (a, b) = (&sets.a, &sets.b);
        // F̃ must sit in the closed half-space
        let ok_b: Vec<bool> = b.pts.iter().map(|p| half[0] * p[0] + half[1] * p[1] <= 0.0).collect();
        let mut pairs: Vec<(f64, u32, u32)> = Vec::new();
        for i in 0..a.len() {
            for k in 0..b.len() {
                if ok_b[k] && a.t[i] + b.t[k] <= a.upper[i] + b.upper[k] {
                    pairs.push((rho.eval(a.pts[i], b.pts[k]), i as u32, k as u32));
                }
            }
        }
        pairs.sort_unstable_by(|x, y| x.0.total_cmp(&y.0));
        let mut buf = Vec::with_capacity(draws.draws);
        let mut member = |p: &(f64, u32, u32)| pair_in_cs(a, p.1 as usize, b, p.2 as usize, alpha, &mut buf);
        let lo = pairs.iter().find(|p| member(p)).map(|p| p.0);
        let hi = pairs.iter().rev().find(|p| member(p)).map(|p| p.0);
        let interval = match (lo, hi) {
            (Some(l), Some(h)) => Some([l, h]),
            _ => None,
        };
        branches.push(Branch {
            name: name.into(),
            interval,
            note: format!("{} pairs checked", pairs.len()),
        });
    }

    let pieces: Vec<[f64; 2]> = branches.iter().filter_map(|b| b.interval).collect();
    if pieces.is_empty() {
        return Err(Error::Empty("degenerate: no branch feasible".into()));
    }
    let lo = pieces.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let hi = pieces.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    Ok(ConfidenceInterval {
        lo,
        hi,
        estimate,
        branches,
    })
}

/// Test of ρ(e*, F) = δ by inversion of the interval. The statistic is √n times the
/// distance from δ to the interval, so the test rejects iff δ lies outside it.
pub fn test_distance(
    sfe: &SupportFunctionEstimate,
    draws: &BootstrapDraws,
    rho: Distance,
    delta: f64,
    alpha: f64,
    cfg: &DistanceConfig,
) -> Result<(TestResult, ConfidenceInterval)> {
    let ci = distance_to_f_ci(sfe, draws, rho, alpha, cfg)?;
    let stat = draws.sqrt_n() * ci.gap_to(delta);
    let mut r = TestResult::new("distance_to_f", draws, alpha, stat, 0.0);
    r.diagnostics.insert("delta".into(), delta);
    r.diagnostics.insert("ci_lo".into(), ci.lo);
    r.diagnostics.insert("ci_hi".into(), ci.hi);
    if let Some(est) = ci.estimate {
        r.diagnostics.insert("estimate".into(), est);
    }
    r.grid_sizes.insert("candidates_per_axis".into(), cfg.candidates.size);
    Ok((r, ci))
}

/// Group of observation i, exposed for diagnostics that rebuild influence values.
pub fn group_of(sfe: &SupportFunctionEstimate, i: usize) -> Group {
    sfe.material().groups()[i]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{generate, DgpSpec};
    use crate::supportfn::{omega, ScoreMaterial};

    fn oracle_sfe(dgp: &DgpSpec, n: usize, seed: u64) -> (Dataset, SupportFunctionEstimate) {
        let ds = generate(dgp, n, seed).unwrap();
        let dt = (0..n).map(|i| dgp.delta_theta(ds.row(i))).collect();
        let mat = ScoreMaterial::from_dataset(&ds, &LossSpec::classification(), dt).unwrap();
        (ds, SupportFunctionEstimate::new(mat))
    }

    fn cfg(draws: usize) -> BootstrapConfig {
        BootstrapConfig {
            draws,
            seed: 11,
            ..BootstrapConfig::default()
        }
    }

    #[test]
    fn quantile_rank_is_ceiling() {
        let v: Vec<f64> = (1..=500).map(|i| i as f64).collect();
        assert_eq!(quantile(&v, 0.95), 475.0);
        assert_eq!(quantile(&v, 0.951), 476.0);
        assert_eq!(quantile(&v, 1.0), 500.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(99).validate(1000).is_err());
        assert!(cfg(100).validate(1000).is_ok());
        let tiny = BootstrapConfig {
            s_n: Some(0.01),
            ..cfg(100)
        };
        assert!(tiny.validate(100).is_err());
        let odd = BootstrapConfig {
            grid_size: 100,
            ..cfg(100)
        };
        assert!(odd.validate(1000).is_err());
    }

    #[test]
    fn grid_index_landmarks() {
        let g = DirectionGrid::full(360).unwrap();
        let idx = GridIndex::new(&g).unwrap();
        assert_eq!((idx.u1, idx.u2, idx.d_below, idx.d_above), (180, 270, 315, 135));
        assert_eq!(idx.pareto.first(), Some(&180));
        assert_eq!(idx.pareto.last(), Some(&270));
        assert!(idx.etilde.iter().all(|&(j, _)| j > 135 && j < 315));
    }

    #[test]
    fn unit_weights_reproduce_estimate() {
        let (ds, sfe) = oracle_sfe(&DgpSpec::balanced(), 400, 3);
        let a: Vec<f64> = (0..ds.n()).map(|i| (i % 7) as f64 / 6.0).collect();
        let sq = estimate_status_quo(&ds, &LossSpec::classification(), &a).unwrap();
        let grid = DirectionGrid::full(72).unwrap();
        let (d, de) = replicate_with_weights(&sfe, Some(&sq), &grid, &vec![1.0; ds.n()]).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-9));
        assert!(de[0].abs() < 1e-9 && de[1].abs() < 1e-9);
    }

    #[test]
    fn status_quo_rejects_bad_scores() {
        let (ds, _) = oracle_sfe(&DgpSpec::balanced(), 50, 1);
        let mut a = vec![0.5; 50];
        a[3] = 1.5;
        assert!(estimate_status_quo(&ds, &LossSpec::classification(), &a).is_err());
        assert!(estimate_status_quo(&ds, &LossSpec::classification(), &a[..10]).is_err());
    }

    #[test]
    fn bootstrap_spread_matches_influence_variance() {
        let (_, sfe) = oracle_sfe(&DgpSpec::balanced(), 3000, 5);
        let draws = multiplier_bootstrap(&sfe, None, &cfg(400)).unwrap();
        for j in [0usize, 100, 200, 300] {
            let q = draws.grid.dirs()[j];
            let v: Vec<f64> = (0..draws.draws()).map(|b| draws.delta(b)[j]).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
            let target = omega(&sfe, q, q).sqrt();
            assert!((sd / target - 1.0).abs() < 0.2, "direction {j}: {sd} vs {target}");
        }
    }

    #[test]
    fn frontier_point_test_behaviour() {
        let (_, sfe) = oracle_sfe(&DgpSpec::balanced(), 3000, 9);
        let draws = multiplier_bootstrap(&sfe, None, &cfg(200)).unwrap();
        // a support point on an admissible direction is on the frontier
        let s = draws.s[200];
        let on = test_frontier_point(&draws, RiskPoint::from_array(s), 0.05).unwrap();
        assert_eq!(on.decision, Decision::FailToReject, "{on:?}");
        // far outside the feasible set
        let off = test_frontier_point(&draws, RiskPoint::new(0.0, 0.0), 0.05).unwrap();
        assert_eq!(off.decision, Decision::Reject);
        // the worst-case point is feasible but dominated
        let worst = draws.s[45];
        let dom = test_frontier_point(&draws, RiskPoint::from_array(worst), 0.05).unwrap();
        assert_eq!(dom.decision, Decision::Reject);
    }

    #[test]
    fn distance_functions() {
        let (a, b) = ([0.0, 0.0], [3.0, -4.0]);
        assert_eq!(Distance::SquaredEuclidean.eval(a, b), 25.0);
        assert_eq!(Distance::Euclidean.eval(a, b), 5.0);
        assert_eq!(Distance::Manhattan.eval(a, b), 7.0);
        assert_eq!(Distance::Chebyshev.eval(a, b), 4.0);
        assert!(Distance::parse("hamming").is_err());
    }

    #[test]
    fn interval_membership() {
        let ci = ConfidenceInterval {
            lo: 0.0,
            hi: 1.0,
            estimate: None,
            branches: vec![
                Branch {
                    name: "a".into(),
                    interval: Some([0.0, 0.2]),
                    note: String::new(),
                },
                Branch {
                    name: "b".into(),
                    interval: Some([0.5, 1.0]),
                    note: String::new(),
                },
                Branch {
                    name: "c".into(),
                    interval: None,
                    note: String::new(),
                },
            ],
        };
        assert!(ci.contains(0.1) && ci.contains(0.7));
        assert!(!ci.contains(0.3));
        assert!((ci.gap_to(0.3) - 0.1).abs() < 1e-12);
        assert_eq!(ci.gap_to(0.6), 0.0);
    }
}
