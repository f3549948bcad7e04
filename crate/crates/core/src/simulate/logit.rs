//! The fixed status-quo classifier: an unpenalized logit of Y on (1, X) fitted once on
//! a 5,000/5,000 mixture of the balanced and r-skew designs.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::dgp::{generate, logistic, DgpSpec};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::rng::streams;

/// a*(x) = logistic(β₀ + βᵀx).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogitPolicy {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LogitPolicy {
    pub fn score(&self, x: &[f64]) -> f64 {
        logistic(self.intercept + self.coef.iter().zip(x).map(|(b, v)| b * v).sum::<f64>())
    }

    pub fn scores(&self, ds: &Dataset) -> Vec<f64> {
        (0..ds.n()).map(|i| self.score(ds.row(i))).collect()
    }
}

const MAX_NEWTON: usize = 50;

/// Newton–Raphson for the logit MLE of y on (1, x) with row-major x of width d.
pub fn fit_logit(x: &[f64], d: usize, y: &[f64]) -> Result<LogitPolicy> {
    let n = y.len();
    if x.len() != n * d || n == 0 {
        return Err(Error::InvalidInput("logit design does not match the outcomes".into()));
    }
    let p = d + 1;
    let design = |i: usize, j: usize| if j == 0 { 1.0 } else { x[i * d + j - 1] };
    let mut beta = DVector::<f64>::zeros(p);
    let mut last = f64::INFINITY;
    for _ in 0..MAX_NEWTON {
        let mut grad = DVector::<f64>::zeros(p);
        let mut hess = DMatrix::<f64>::zeros(p, p);
        for i in 0..n {
            let eta: f64 = (0..p).map(|j| beta[j] * design(i, j)).sum();
            let mu = logistic(eta);
            let w = mu * (1.0 - mu);
            let r = y[i] - mu;
            for a in 0..p {
                let xa = design(i, a);
                grad[a] += xa * r;
                for b in 0..=a {
                    hess[(a, b)] += w * xa * design(i, b);
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
        }
        let chol = hess
            .cholesky()
            .ok_or_else(|| Error::Numerical("logit information matrix is not positive definite".into()))?;
        let step = chol.solve(&grad);
        beta += &step;
        last = step.amax();
        if last < 1e-10 {
            return Ok(LogitPolicy {
                intercept: beta[0],
                coef: beta.iter().skip(1).copied().collect(),
            });
        }
    }
    Err(Error::NonConvergence { fold: 0, delta: last })
}

/// Trains the status-quo logit on 5,000 balanced and 5,000 r-skew draws.
pub fn status_quo_logit(seed: u64) -> Result<LogitPolicy> {
    let a = generate(&DgpSpec::balanced(), 5000, derive_seed(seed, streams::DATA, 0))?;
    let b = generate(&DgpSpec::r_skew(), 5000, derive_seed(seed, streams::DATA, 1))?;
    let mut y = a.y().to_vec();
    y.extend_from_slice(b.y());
    let mut x = a.x().to_vec();
    x.extend_from_slice(b.x());
    fit_logit(&x, a.d(), &y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Group;

    #[test]
    fn recovers_known_coefficients() {
        let ds = generate(&DgpSpec::balanced(), 20000, 4).unwrap();
        // keep group r only: Y | X follows logistic(X1 + X2 + 0.5 X3)
        let idx: Vec<usize> = (0..ds.n()).filter(|&i| ds.groups()[i] == Group::R).collect();
        let x: Vec<f64> = idx.iter().flat_map(|&i| ds.row(i).to_vec()).collect();
        let y: Vec<f64> = idx.iter().map(|&i| ds.y()[i]).collect();
        let fit = fit_logit(&x, ds.d(), &y).unwrap();
        assert!(fit.intercept.abs() < 0.1);
        for (j, want) in [(0, 1.0), (1, 1.0), (2, 0.5), (3, 0.0), (10, 0.0)] {
            assert!((fit.coef[j] - want).abs() < 0.15, "coef {j}: {}", fit.coef[j]);
        }
    }

    #[test]
    fn deterministic_and_in_unit_interval() {
        let a = status_quo_logit(1).unwrap();
        assert_eq!(a, status_quo_logit(1).unwrap());
        let ds = generate(&DgpSpec::r_skew(), 200, 2).unwrap();
        assert!(a.scores(&ds).iter().all(|&s| s > 0.0 && s < 1.0));
    }
}
