//! The two simulation designs: twenty covariates, a Bernoulli(0.6) group label
//! independent of X, and group-specific logistic outcome models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::data::{Dataset, Group};
use crate::error::{Error, Result};

pub const D_X: usize = 20;
pub const P_GROUP_R: f64 = 0.6;

/// Design family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DgpKind {
    Balanced,
    RSkew,
    Custom,
}

impl DgpKind {
    pub fn name(&self) -> &'static str {
        match self {
            DgpKind::Balanced => "balanced",
            DgpKind::RSkew => "r-skew",
            DgpKind::Custom => "custom",
        }
    }
}

/// Outcome model P(Y=1 | G=g, X) = logistic(scale_g · coef_gᵀX).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub d_x: usize,
    pub coef_r: Vec<f64>,
    pub coef_b: Vec<f64>,
    pub p_r: f64,
}

fn coefs(pairs: &[(usize, f64)], scale: f64) -> Vec<f64> {
    let mut c = vec![0.0; D_X];
    for &(j, v) in pairs {
        c[j] = v * scale;
    }
    c
}

impl DgpSpec {
    /// p_r = logistic(X₁ + X₂ + 0.5X₃), p_b = logistic(−X₁ − 0.5X₂ + X₄).
    pub fn balanced() -> DgpSpec {
        DgpSpec {
            kind: DgpKind::Balanced,
            d_x: D_X,
            coef_r: coefs(&[(0, 1.0), (1, 1.0), (2, 0.5)], 1.0),
            coef_b: coefs(&[(0, -1.0), (1, -0.5), (3, 1.0)], 1.0),
            p_r: P_GROUP_R,
        }
    }

    /// p_r = logistic(2(X₁ + X₂ + X₃)), p_b = logistic(0.7(X₁ + 0.5X₂ + 0.6X₄)).
    pub fn r_skew() -> DgpSpec {
        DgpSpec {
            kind: DgpKind::RSkew,
            d_x: D_X,
            coef_r: coefs(&[(0, 1.0), (1, 1.0), (2, 1.0)], 2.0),
            coef_b: coefs(&[(0, 1.0), (1, 0.5), (3, 0.6)], 0.7),
            p_r: P_GROUP_R,
        }
    }

    pub fn custom(coef_r: Vec<f64>, coef_b: Vec<f64>) -> Result<DgpSpec> {
        if coef_r.len() != D_X || coef_b.len() != D_X {
            return Err(Error::InvalidInput(format!("custom designs need {D_X} coefficients per group")));
        }
        Ok(DgpSpec {
            kind: DgpKind::Custom,
            d_x: D_X,
            coef_r,
            coef_b,
            p_r: P_GROUP_R,
        })
    }

    pub fn by_name(name: &str) -> Result<DgpSpec> {
        match name {
            "balanced" => Ok(DgpSpec::balanced()),
            "r-skew" | "rskew" => Ok(DgpSpec::r_skew()),
            other => Err(Error::InvalidInput(format!("unknown design `{other}`"))),
        }
    }

    /// (P(Y=1 | G=r, x), P(Y=1 | G=b, x)).
    pub fn outcome_probs(&self, x: &[f64]) -> [f64; 2] {
        let lin = |c: &[f64]| c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        [logistic(lin(&self.coef_r)), logistic(lin(&self.coef_b))]
    }

    /// Δθ(x) = (P(G=r)(1 − 2p_r(x)), P(G=b)(1 − 2p_b(x))) under the classification loss.
    pub fn delta_theta(&self, x: &[f64]) -> [f64; 2] {
        let p = self.outcome_probs(x);
        [self.p_r * (1.0 - 2.0 * p[0]), (1.0 - self.p_r) * (1.0 - 2.0 * p[1])]
    }
}

pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Inverse of the Beta(2,2) CDF F(x) = 3x² − 2x³ by safeguarded Newton steps.
pub fn beta22_quantile(u: f64) -> f64 {
    const TOL: f64 = 1e-6;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x = u;
    for _ in 0..100 {
        let f = x * x * (3.0 - 2.0 * x) - u;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let df = 6.0 * x * (1.0 - x);
        let mut next = if df > 0.0 { x - f / df } else { 0.5 * (lo + hi) };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - x).abs() < TOL * 1e-6 || hi - lo < TOL * 1e-6;
        x = next;
        if done {
            break;
        }
    }
    x
}

/// Standard normal truncated to [−3, 3] by rejection.
pub fn truncated_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 3.0 {
            return z;
        }
    }
}

/// Draws one covariate vector.
pub fn draw_x<R: Rng>(rng: &mut R, out: &mut [f64]) {
    for (j, v) in out.iter_mut().enumerate() {
        *v = match j {
            1 => rng.random::<f64>(),
            2 => beta22_quantile(rng.random::<f64>()),
            _ => truncated_normal(rng),
        };
    }
}

/// Simulated sample of size n. Group label 1 (probability 0.6) maps to r.
pub fn generate(dgp: &DgpSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidInput("need n >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = dgp.d_x;
    let mut x = vec![0.0; n * d];
    let mut y = vec![0.0; n];
    let mut g = vec![Group::R; n];
    for i in 0..n {
        let row = &mut x[i * d..(i + 1) * d];
        draw_x(&mut rng, row);
        let is_r = rng.random::<f64>() < dgp.p_r;
        let p = dgp.outcome_probs(row);
        let py = if is_r { p[0] } else { p[1] };
        y[i] = if rng.random::<f64>() < py { 1.0 } else { 0.0 };
        g[i] = if is_r { Group::R } else { Group::B };
    }
    Dataset::new(y, g, x, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_quantile_inverts_cdf() {
        for k in 1..100 {
            let u = k as f64 / 100.0;
            let x = beta22_quantile(u);
            assert!((x * x * (3.0 - 2.0 * x) - u).abs() < 1e-6);
        }
        assert!((beta22_quantile(0.5) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn supports_and_group_share() {
        let ds = generate(&DgpSpec::balanced(), 20_000, 3).unwrap();
        let mut share = 0.0;
        for i in 0..ds.n() {
            let r = ds.row(i);
            assert!(r[0].abs() <= 3.0 && (0.0..=1.0).contains(&r[1]) && (0.0..=1.0).contains(&r[2]));
            if ds.groups()[i] == Group::R {
                share += 1.0;
            }
        }
        share /= ds.n() as f64;
        assert!((share - 0.6).abs() < 0.015);
        assert_eq!(ds, generate(&DgpSpec::balanced(), 20_000, 3).unwrap());
    }
}
