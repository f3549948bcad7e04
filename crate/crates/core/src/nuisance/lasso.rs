//! L1-penalized learners fit by cyclic coordinate descent: a multinomial logistic
//! model (block majorization with the 1/4 curvature bound) and least squares.
//! Penalties are chosen by K-fold cross-validation over a log-spaced path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::assign_folds_with;
use crate::error::{Error, Result};

/// Number of classes of the group-by-outcome model.
pub const CLASSES: usize = 4;

/// Path and solver settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LassoConfig {
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub tol: f64,
    /// Looser tolerance for the cross-validation paths and the warm-start steps
    /// before the selected penalty.
    pub path_tol: f64,
    pub max_sweeps: usize,
    pub cv_folds: usize,
    pub seed: u64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            n_lambda: 50,
            lambda_min_ratio: 1e-3,
            tol: 1e-7,
            path_tol: 1e-4,
            max_sweeps: 10_000,
            cv_folds: 5,
            seed: 0x5eed,
        }
    }
}

/// Column means and scales of a training design.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[f64], n: usize, d: usize) -> Standardizer {
        let mut mean = vec![0.0; d];
        let mut scale = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                mean[j] += x[i * d + j];
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        for i in 0..n {
            for j in 0..d {
                let c = x[i * d + j] - mean[j];
                scale[j] += c * c;
            }
        }
        for s in &mut scale {
            let sd = (*s / n as f64).sqrt();
            *s = if sd > 1e-12 { sd } else { 1.0 };
        }
        Standardizer { mean, scale }
    }

    /// Standardized column-major copy of rows `idx`.
    fn column_major(&self, x: &[f64], d: usize, idx: &[usize]) -> Vec<f64> {
        let n = idx.len();
        let mut out = vec![0.0; n * d];
        for (r, &i) in idx.iter().enumerate() {
            for j in 0..d {
                out[j * n + r] = (x[i * d + j] - self.mean[j]) / self.scale[j];
            }
        }
        out
    }

    fn apply(&self, row: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(row.iter().enumerate().map(|(j, v)| (v - self.mean[j]) / self.scale[j]));
    }
}

/// Standardized training design with its Gram matrix (index 0 is the intercept).
struct Design {
    n: usize,
    d: usize,
    xs: Vec<f64>,
    gram: Vec<f64>,
}

impl Design {
    fn new(x: &[f64], d: usize, idx: &[usize], std: &Standardizer) -> Design {
        let n = idx.len();
        let xs = std.column_major(x, d, idx);
        let p = d + 1;
        let mut gram = vec![0.0; p * p];
        gram[0] = 1.0;
        for j in 0..d {
            let cj = &xs[j * n..(j + 1) * n];
            let m = cj.iter().sum::<f64>() / n as f64;
            gram[j + 1] = m;
            gram[(j + 1) * p] = m;
            for l in j..d {
                let cl = &xs[l * n..(l + 1) * n];
                let v = cj.iter().zip(cl).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                gram[(j + 1) * p + l + 1] = v;
                gram[(l + 1) * p + j + 1] = v;
            }
        }
        Design { n, d, xs, gram }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.xs[j * self.n..(j + 1) * self.n]
    }

    fn g(&self, a: usize, b: usize) -> f64 {
        self.gram[a * (self.d + 1) + b]
    }
}

fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn lambda_path(lmax: f64, cfg: &LassoConfig) -> Vec<f64> {
    let k = cfg.n_lambda.max(1);
    if k == 1 {
        return vec![lmax];
    }
    (0..k)
        .map(|l| lmax * cfg.lambda_min_ratio.powf(l as f64 / (k - 1) as f64))
        .collect()
}

/// Fitted multinomial logistic model on the four group-by-outcome classes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultinomialModel {
    pub std: Standardizer,
    pub present: [bool; CLASSES],
    pub intercept: [f64; CLASSES],
    /// Row-major d × 4 coefficients in the standardized scale.
    pub beta: Vec<f64>,
    pub lambda: f64,
}

impl MultinomialModel {
    pub fn predict_proba(&self, row: &[f64]) -> [f64; CLASSES] {
        let mut z = Vec::with_capacity(row.len());
        self.std.apply(row, &mut z);
        let mut eta = [f64::NEG_INFINITY; CLASSES];
        for k in 0..CLASSES {
            if self.present[k] {
                let mut v = self.intercept[k];
                for (j, zj) in z.iter().enumerate() {
                    v += zj * self.beta[j * CLASSES + k];
                }
                eta[k] = v;
            }
        }
        softmax(eta)
    }

    /// Number of non-zero slope coefficients.
    pub fn nnz(&self) -> usize {
        self.beta.iter().filter(|b| **b != 0.0).count()
    }
}

fn softmax(eta: [f64; CLASSES]) -> [f64; CLASSES] {
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; CLASSES];
    let mut z = 0.0;
    for k in 0..CLASSES {
        if eta[k].is_finite() {
            p[k] = (eta[k] - m).exp();
            z += p[k];
        }
    }
    for v in &mut p {
        *v /= z;
    }
    p
}

/// Working state of the multinomial solver on one design.
struct MultiState<'a> {
    des: &'a Design,
    y: &'a [u8],
    present: [bool; CLASSES],
    b: [f64; CLASSES],
    beta: Vec<f64>,
    eta: Vec<f64>,
    ex: Vec<f64>,
    z: Vec<f64>,
    off: Vec<f64>,
    active: Vec<bool>,
    res: Vec<f64>,
    sweeps: usize,
    trace: Option<Vec<f64>>,
}

impl<'a> MultiState<'a> {
    fn new(des: &'a Design, y: &'a [u8]) -> MultiState<'a> {
        let n = des.n;
        let mut counts = [0usize; CLASSES];
        for &c in y {
            counts[c as usize] += 1;
        }
        let present = counts.map(|c| c > 0);
        let b = std::array::from_fn(|k| {
            if present[k] {
                (counts[k] as f64 / n as f64).ln()
            } else {
                f64::NEG_INFINITY
            }
        });
        let mut s = MultiState {
            des,
            y,
            present,
            b,
            beta: vec![0.0; des.d * CLASSES],
            eta: vec![0.0; CLASSES * n],
            ex: vec![0.0; CLASSES * n],
            z: vec![0.0; n],
            off: vec![0.0; n],
            active: vec![false; des.d * CLASSES],
            res: vec![0.0; n],
            sweeps: 0,
            trace: None,
        };
        s.refresh();
        s
    }

    /// Recomputes η, cached exponentials and normalizers from the coefficients.
    fn refresh(&mut self) {
        let n = self.des.n;
        for k in 0..CLASSES {
            let eta = &mut self.eta[k * n..(k + 1) * n];
            if !self.present[k] {
                eta.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
                continue;
            }
            eta.iter_mut().for_each(|v| *v = self.b[k]);
            for j in 0..self.des.d {
                let bj = self.beta[j * CLASSES + k];
                if bj != 0.0 {
                    for (e, x) in eta.iter_mut().zip(self.des.col(j)) {
                        *e += bj * x;
                    }
                }
            }
        }
        for i in 0..n {
            self.rebase_row(i);
        }
    }

    fn rebase_row(&mut self, i: usize) {
        let n = self.des.n;
        let m = (0..CLASSES)
            .map(|k| self.eta[k * n + i])
            .fold(f64::NEG_INFINITY, f64::max);
        self.off[i] = m;
        let mut z = 0.0;
        for k in 0..CLASSES {
            let e = if self.present[k] {
                (self.eta[k * n + i] - m).exp()
            } else {
                0.0
            };
            self.ex[k * n + i] = e;
            z += e;
        }
        self.z[i] = z;
    }

    fn objective(&self, lambda: f64) -> f64 {
        let n = self.des.n;
        let nll = (0..n)
            .map(|i| {
                let c = self.y[i] as usize;
                -(self.ex[c * n + i] / self.z[i]).ln()
            })
            .sum::<f64>()
            / n as f64;
        nll + lambda * self.beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// Full gradient of the mean negative log-likelihood for class k (intercept first).
    fn gradient(&mut self, k: usize, cols: &[usize]) -> Vec<f64> {
        let n = self.des.n;
        for i in 0..n {
            let p = self.ex[k * n + i] / self.z[i];
            self.res[i] = p - if self.y[i] as usize == k { 1.0 } else { 0.0 };
        }
        let mut g = Vec::with_capacity(cols.len() + 1);
        g.push(self.res.iter().sum::<f64>() / n as f64);
        for &j in cols {
            let c = self.des.col(j);
            g.push(c.iter().zip(&self.res).map(|(a, b)| a * b).sum::<f64>() / n as f64);
        }
        g
    }

    /// Penalized quadratic step for class k's block with curvature `curv` times the Gram matrix.
    fn block_step(&self, k: usize, lambda: f64, cols: &[usize], g: &[f64], curv: f64) -> Vec<f64> {
        // s = 0 is the intercept, s = t + 1 is cols[t]
        let gi = |s: usize| if s == 0 { 0 } else { cols[s - 1] + 1 };
        let m = cols.len() + 1;
        let mut delta = vec![0.0; m];
        let mut r = vec![0.0; m];
        for _ in 0..200 {
            let mut maxd = 0.0f64;
            for s in 0..m {
                let c = curv * self.des.g(gi(s), gi(s));
                if c <= 0.0 {
                    continue;
                }
                let grad = g[s] + curv * r[s];
                let old = if s == 0 { self.b[k] } else { self.beta[cols[s - 1] * CLASSES + k] } + delta[s];
                let new = if s == 0 {
                    old - grad / c
                } else {
                    soft(old - grad / c, lambda / c)
                };
                let dd = new - old;
                if dd != 0.0 {
                    delta[s] += dd;
                    for t in 0..m {
                        r[t] += self.des.g(gi(t), gi(s)) * dd;
                    }
                    maxd = maxd.max(dd.abs());
                }
            }
            if maxd < 1e-13 {
                break;
            }
        }
        delta
    }

    /// One majorize-minimize step on class k's block. Returns the max coefficient change.
    fn update_class(&mut self, k: usize, lambda: f64) -> f64 {
        const CURV: f64 = 0.25;
        let d = self.des.d;
        let n = self.des.n;
        let cols: Vec<usize> = (0..d).filter(|&j| self.active[j * CLASSES + k]).collect();
        let g = self.gradient(k, &cols);
        let delta = self.block_step(k, lambda, &cols, &g, CURV);
        let mut maxchg = 0.0f64;
        self.b[k] += delta[0];
        maxchg = maxchg.max(delta[0].abs());
        {
            let eta = &mut self.eta[k * n..(k + 1) * n];
            if delta[0] != 0.0 {
                eta.iter_mut().for_each(|e| *e += delta[0]);
            }
            for s in 1..delta.len() {
                if delta[s] != 0.0 {
                    let j = cols[s - 1];
                    self.beta[j * CLASSES + k] += delta[s];
                    maxchg = maxchg.max(delta[s].abs());
                    for (e, x) in eta.iter_mut().zip(self.des.col(j)) {
                        *e += delta[s] * x;
                    }
                }
            }
        }
        if maxchg > 0.0 {
            for i in 0..n {
                let old = self.ex[k * n + i];
                let new = (self.eta[k * n + i] - self.off[i]).exp();
                if new > 1e150 || !new.is_finite() {
                    self.rebase_row(i);
                } else {
                    self.ex[k * n + i] = new;
                    self.z[i] += new - old;
                    if !(self.z[i] > 1e-150) {
                        self.rebase_row(i);
                    }
                }
            }
        }
        maxchg
    }

    /// Solves at one penalty level from the current state.
    fn solve(&mut self, lambda: f64, cfg: &LassoConfig, fold: usize) -> Result<()> {
        let d = self.des.d;
        loop {
            loop {
                let mut maxchg = 0.0f64;
                for k in 0..CLASSES {
                    if self.present[k] {
                        maxchg = maxchg.max(self.update_class(k, lambda));
                    }
                }
                self.sweeps += 1;
                if let Some(t) = self.trace.as_mut() {
                    t.push(f64::NAN);
                }
                if self.trace.is_some() {
                    let obj = self.objective(lambda);
                    *self.trace.as_mut().unwrap().last_mut().unwrap() = obj;
                }
                if maxchg < cfg.tol {
                    break;
                }
                if self.sweeps >= cfg.max_sweeps {
                    return Err(Error::NonConvergence { fold, delta: maxchg });
                }
            }
            // optimality check on the inactive coefficients
            let mut added = false;
            let all: Vec<usize> = (0..d).collect();
            for k in 0..CLASSES {
                if !self.present[k] {
                    continue;
                }
                let g = self.gradient(k, &all);
                for j in 0..d {
                    let a = j * CLASSES + k;
                    if !self.active[a] && g[j + 1].abs() > lambda * (1.0 + 1e-9) {
                        self.active[a] = true;
                        added = true;
                    }
                }
            }
            if !added {
                return Ok(());
            }
        }
    }

    fn lambda_max(&mut self) -> f64 {
        let all: Vec<usize> = (0..self.des.d).collect();
        let mut lmax = 0.0f64;
        for k in 0..CLASSES {
            if self.present[k] {
                let g = self.gradient(k, &all);
                for v in &g[1..] {
                    lmax = lmax.max(v.abs());
                }
            }
        }
        lmax
    }

    /// Strong-rule screening for the next penalty.
    fn screen(&mut self, lam_new: f64, lam_old: f64) {
        let all: Vec<usize> = (0..self.des.d).collect();
        for k in 0..CLASSES {
            if !self.present[k] {
                continue;
            }
            let g = self.gradient(k, &all);
            for j in 0..self.des.d {
                if g[j + 1].abs() >= 2.0 * lam_new - lam_old {
                    self.active[j * CLASSES + k] = true;
                }
            }
        }
    }

    fn model(&self, std: &Standardizer, lambda: f64) -> MultinomialModel {
        MultinomialModel {
            std: std.clone(),
            present: self.present,
            intercept: self.b,
            beta: self.beta.clone(),
            lambda,
        }
    }
}

/// Fits the multinomial path on rows `idx` and calls `visit` after each penalty.
fn multinomial_path<F>(
    x: &[f64],
    d: usize,
    y: &[u8],
    idx: &[usize],
    cfg: &LassoConfig,
    fold: usize,
    stop_at: Option<usize>,
    mut visit: F,
) -> Result<(Vec<f64>, MultinomialModel)>
where
    F: FnMut(usize, &MultinomialModel),
{
    let std = Standardizer::fit_rows(x, d, idx);
    let des = Design::new(x, d, idx, &std);
    let ys: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
    let mut st = MultiState::new(&des, &ys);
    let lmax = st.lambda_max();
    let path = lambda_path(lmax, cfg);
    let mut prev = lmax;
    let last = stop_at.unwrap_or(path.len() - 1).min(path.len() - 1);
    for (l, &lam) in path.iter().enumerate().take(last + 1) {
        if l > 0 {
            st.screen(lam, prev);
        }
        st.solve(lam, cfg, fold)?;
        visit(l, &st.model(&std, lam));
        prev = lam;
    }
    let model = st.model(&std, path[last]);
    Ok((path, model))
}

impl Standardizer {
    fn fit_rows(x: &[f64], d: usize, idx: &[usize]) -> Standardizer {
        let mut sub = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            sub.extend_from_slice(&x[i * d..(i + 1) * d]);
        }
        Standardizer::fit(&sub, idx.len(), d)
    }
}

/// Multinomial fit at a fixed penalty index of the path (used by tests and diagnostics).
pub fn fit_multinomial_at(
    x: &[f64],
    d: usize,
    y: &[u8],
    cfg: &LassoConfig,
    lambda_index: usize,
) -> Result<(MultinomialModel, Vec<f64>)> {
    let idx: Vec<usize> = (0..y.len()).collect();
    let (_, model) = multinomial_path(x, d, y, &idx, cfg, 0, Some(lambda_index), |_, _| {})?;
    let objective_trace = trace_objective(x, d, y, &idx, cfg, &model)?;
    Ok((model, objective_trace))
}

/// Refits at the model's penalty from the null model, recording the objective per sweep.
fn trace_objective(
    x: &[f64],
    d: usize,
    y: &[u8],
    idx: &[usize],
    cfg: &LassoConfig,
    model: &MultinomialModel,
) -> Result<Vec<f64>> {
    let std = Standardizer::fit_rows(x, d, idx);
    let des = Design::new(x, d, idx, &std);
    let ys: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
    let mut st = MultiState::new(&des, &ys);
    st.active.iter_mut().for_each(|a| *a = true);
    st.trace = Some(vec![st.objective(model.lambda)]);
    st.solve(model.lambda, cfg, 0)?;
    Ok(st.trace.take().unwrap_or_default())
}

/// Penalties past the running CV minimum after which the inner paths stop.
pub const CV_PATIENCE: usize = 5;

/// Cross-validated multinomial lasso on rows `idx` (class labels in 0..4).
///
/// All inner folds share the penalty sequence of the full training rows and are
/// advanced together, so the held-out deviance is compared at equal penalties.
/// The paths stop once the deviance has not improved for `CV_PATIENCE` steps.
pub fn fit_multinomial_cv(
    x: &[f64],
    d: usize,
    y: &[u8],
    idx: &[usize],
    cfg: &LassoConfig,
    fold: usize,
) -> Result<MultinomialModel> {
    let n = idx.len();
    let k = cfg.cv_folds.min(n).max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (fold as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let inner = assign_folds_with(n, k, &mut rng)?;

    let std = Standardizer::fit_rows(x, d, idx);
    let des = Design::new(x, d, idx, &std);
    let ys: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
    let mut full = MultiState::new(&des, &ys);
    let path = lambda_path(full.lambda_max(), cfg);

    struct Inner {
        std: Standardizer,
        des: Design,
        ys: Vec<u8>,
        test: Vec<usize>,
    }
    let parts: Vec<Inner> = (0..k)
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&r| inner[r] != f).map(|r| idx[r]).collect();
            let test: Vec<usize> = (0..n).filter(|&r| inner[r] == f).map(|r| idx[r]).collect();
            let std = Standardizer::fit_rows(x, d, &train);
            let des = Design::new(x, d, &train, &std);
            let ys = train.iter().map(|&i| y[i]).collect();
            Inner { std, des, ys, test }
        })
        .collect();
    let mut states: Vec<MultiState> = parts.iter().map(|p| MultiState::new(&p.des, &p.ys)).collect();
    let mut lam_prev: Vec<f64> = states.iter_mut().map(|s| s.lambda_max()).collect();

    let path_cfg = LassoConfig { tol: cfg.path_tol.max(cfg.tol), ..cfg.clone() };
    let mut best = 0;
    let mut best_dev = f64::INFINITY;
    for (l, &lam) in path.iter().enumerate() {
        let mut dev = 0.0;
        for (st, (p, prev)) in states.iter_mut().zip(parts.iter().zip(lam_prev.iter_mut())) {
            st.screen(lam, prev.max(lam));
            st.solve(lam, &path_cfg, fold)?;
            *prev = lam;
            let m = st.model(&p.std, lam);
            for &i in &p.test {
                let pr = m.predict_proba(&x[i * d..(i + 1) * d]);
                dev -= pr[y[i] as usize].max(1e-12).ln();
            }
        }
        if dev < best_dev {
            best_dev = dev;
            best = l;
        } else if l >= best + CV_PATIENCE {
            break;
        }
    }

    let mut prev = path[0];
    for (l, &lam) in path.iter().enumerate().take(best + 1) {
        if l > 0 {
            full.screen(lam, prev);
        }
        full.solve(lam, if l == best { cfg } else { &path_cfg }, fold)?;
        prev = lam;
    }
    Ok(full.model(&std, path[best]))
}

/// Fitted L1-penalized least-squares model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearModel {
    pub std: Standardizer,
    pub intercept: f64,
    pub beta: Vec<f64>,
    pub lambda: f64,
}

impl LinearModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut v = self.intercept;
        for (j, x) in row.iter().enumerate() {
            v += (x - self.std.mean[j]) / self.std.scale[j] * self.beta[j];
        }
        v
    }
}

/// Least-squares lasso path on rows `idx`; `visit` is called after each penalty.
fn linear_path<F>(
    x: &[f64],
    d: usize,
    t: &[f64],
    idx: &[usize],
    cfg: &LassoConfig,
    fold: usize,
    stop_at: Option<usize>,
    mut visit: F,
) -> Result<LinearModel>
where
    F: FnMut(usize, &LinearModel),
{
    let std = Standardizer::fit_rows(x, d, idx);
    let des = Design::new(x, d, idx, &std);
    let n = idx.len();
    let tmean = idx.iter().map(|&i| t[i]).sum::<f64>() / n as f64;
    let xty: Vec<f64> = (0..d)
        .map(|j| {
            des.col(j)
                .iter()
                .zip(idx)
                .map(|(a, &i)| a * (t[i] - tmean))
                .sum::<f64>()
                / n as f64
        })
        .collect();
    let lmax = xty.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let path = lambda_path(lmax.max(1e-300), cfg);
    let last = stop_at.unwrap_or(path.len() - 1).min(path.len() - 1);
    let mut beta = vec![0.0; d];
    let mut sweeps = 0usize;
    let mut model = LinearModel {
        std: std.clone(),
        intercept: tmean,
        beta: beta.clone(),
        lambda: path[0],
    };
    for (l, &lam) in path.iter().enumerate().take(last + 1) {
        loop {
            let mut maxd = 0.0f64;
            for j in 0..d {
                let gjj = des.g(j + 1, j + 1);
                if gjj <= 0.0 {
                    continue;
                }
                let mut fit = 0.0;
                for (m, b) in beta.iter().enumerate() {
                    if m != j {
                        fit += des.g(j + 1, m + 1) * b;
                    }
                }
                let new = soft(xty[j] - fit, lam) / gjj;
                maxd = maxd.max((new - beta[j]).abs());
                beta[j] = new;
            }
            sweeps += 1;
            if maxd < cfg.tol {
                break;
            }
            if sweeps >= cfg.max_sweeps {
                return Err(Error::NonConvergence { fold, delta: maxd });
            }
        }
        // intercept absorbs the column means, which are zero up to rounding
        let shift: f64 = (0..d).map(|j| des.g(0, j + 1) * beta[j]).sum();
        model = LinearModel {
            std: std.clone(),
            intercept: tmean - shift,
            beta: beta.clone(),
            lambda: lam,
        };
        visit(l, &model);
    }
    Ok(model)
}

/// Cross-validated least-squares lasso of `t` on rows `idx`.
pub fn fit_linear_cv(
    x: &[f64],
    d: usize,
    t: &[f64],
    idx: &[usize],
    cfg: &LassoConfig,
    fold: usize,
) -> Result<LinearModel> {
    let n = idx.len();
    let k = cfg.cv_folds.min(n).max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (fold as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xA5);
    let inner = assign_folds_with(n, k, &mut rng)?;
    let nl = cfg.n_lambda.max(1);
    let mut mse = vec![0.0; nl];
    for f in 0..k {
        let train: Vec<usize> = (0..n).filter(|&r| inner[r] != f).map(|r| idx[r]).collect();
        let test: Vec<usize> = (0..n).filter(|&r| inner[r] == f).map(|r| idx[r]).collect();
        linear_path(x, d, t, &train, cfg, fold, None, |l, m| {
            for &i in &test {
                let e = t[i] - m.predict(&x[i * d..(i + 1) * d]);
                mse[l] += e * e;
            }
        })?;
    }
    let best = (0..nl).fold(0, |b, l| if mse[l] < mse[b] { l } else { b });
    linear_path(x, d, t, idx, cfg, fold, Some(best), |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn synth(n: usize, d: usize, seed: u64) -> (Vec<f64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0; n * d];
        let mut y = vec![0u8; n];
        for i in 0..n {
            for j in 0..d {
                x[i * d + j] = rng.random::<f64>() * 2.0 - 1.0;
            }
            let eta = [0.0, 1.5 * x[i * d], -x[i * d + 1], 0.5];
            let p = softmax(eta);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for k in 0..CLASSES {
                acc += p[k];
                if u < acc || k == CLASSES - 1 {
                    y[i] = k as u8;
                    break;
                }
            }
        }
        (x, y)
    }

    #[test]
    fn objective_decreases_every_sweep() {
        let (x, y) = synth(400, 5, 1);
        let cfg = LassoConfig::default();
        let (_, trace) = fit_multinomial_at(&x, 5, &y, &cfg, 20).unwrap();
        assert!(trace.len() > 2);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "objective rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn huge_penalty_gives_marginal_frequencies() {
        let (x, y) = synth(300, 4, 2);
        let cfg = LassoConfig::default();
        let (m, _) = fit_multinomial_at(&x, 4, &y, &cfg, 0).unwrap();
        assert_eq!(m.nnz(), 0);
        let mut freq = [0.0; CLASSES];
        for c in &y {
            freq[*c as usize] += 1.0 / y.len() as f64;
        }
        let p = m.predict_proba(&x[0..4]);
        for k in 0..CLASSES {
            assert!((p[k] - freq[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn probabilities_sum_to_one_and_absent_class_is_zero() {
        let (x, mut y) = synth(300, 3, 3);
        for c in &mut y {
            if *c == 2 {
                *c = 3;
            }
        }
        let idx: Vec<usize> = (0..y.len()).collect();
        let m = fit_multinomial_cv(&x, 3, &y, &idx, &LassoConfig::default(), 0).unwrap();
        for i in 0..20 {
            let p = m.predict_proba(&x[i * 3..i * 3 + 3]);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert_eq!(p[2], 0.0);
        }
    }

    #[test]
    fn linear_lasso_recovers_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (n, d) = (500, 6);
        let x: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>()).collect();
        let t: Vec<f64> = (0..n).map(|i| 2.0 * x[i * d] - x[i * d + 3] + 0.1 * (rng.random::<f64>() - 0.5)).collect();
        let idx: Vec<usize> = (0..n).collect();
        let m = fit_linear_cv(&x, d, &t, &idx, &LassoConfig::default(), 0).unwrap();
        let row = [0.5, 0.2, 0.9, 0.1, 0.3, 0.3];
        assert!((m.predict(&row) - (1.0 - 0.1)).abs() < 0.05);
    }
}
