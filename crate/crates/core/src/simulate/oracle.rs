//! Population geometry of a design by Monte Carlo integration over X.
//!
//! Each covariate draw contributes both groups with weights P(G=g), and Y is
//! integrated out through p_g(x). The result is the support function at the true Δθ
//! with expectations replaced by averages over m draws of X only.

use rayon::prelude::*;
use serde::Serialize;

use super::dgp::{draw_x, DgpSpec};
use super::logit::LogitPolicy;
use crate::data::{DirectionGrid, Group, GroupScale, RiskPoint};
use crate::error::{Error, Result};
use crate::geometry::{estimate_feasible_set, Polygon};
use crate::rng::{stream_rng, streams};
use crate::supportfn::{ScoreMaterial, SupportFunctionEstimate};

const CHUNK: usize = 250_000;

/// Search bound for c in the fairest-point minimization.
const ETILDE_BOUND: f64 = 50.0;

#[derive(Clone, Debug, Serialize)]
pub struct OracleGeometry {
    pub r: RiskPoint,
    pub b: RiskPoint,
    pub f: RiskPoint,
    pub e_star: Option<RiskPoint>,
    pub polygon: Polygon,
    pub m: usize,
    pub grid_size: usize,
}

/// Conditional-expectation score material for m covariate draws, plus the status-quo
/// risks when a policy is given.
pub fn oracle_material(dgp: &DgpSpec, m: usize, seed: u64, policy: Option<&LogitPolicy>) -> Result<(ScoreMaterial, Option<RiskPoint>)> {
    let w = [dgp.p_r, 1.0 - dgp.p_r];
    let chunks = m.div_ceil(CHUNK);
    let parts: Vec<(Vec<[f64; 2]>, Vec<[f64; 2]>, [f64; 2])> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(m - c * CHUNK);
            let mut rng = stream_rng(seed, streams::DATA, c as u64);
            let mut x = vec![0.0; dgp.d_x];
            let mut l0 = Vec::with_capacity(len);
            let mut dl = Vec::with_capacity(len);
            let mut es = [0.0; 2];
            for _ in 0..len {
                draw_x(&mut rng, &mut x);
                let p = dgp.outcome_probs(&x);
                l0.push([w[0] * p[0], w[1] * p[1]]);
                dl.push([w[0] * (1.0 - 2.0 * p[0]), w[1] * (1.0 - 2.0 * p[1])]);
                if let Some(pol) = policy {
                    let a = pol.score(&x);
                    for g in 0..2 {
                        es[g] += a * (1.0 - p[g]) + (1.0 - a) * p[g];
                    }
                }
            }
            (l0, dl, es)
        })
        .collect();
    let mut l0 = Vec::with_capacity(m);
    let mut dl = Vec::with_capacity(m);
    let mut es = [0.0; 2];
    for (a, b, e) in parts {
        l0.extend(a);
        dl.extend(b);
        es[0] += e[0];
        es[1] += e[1];
    }
    let dtheta = dl.clone();
    let groups = vec![Group::R; m];
    let scale = GroupScale::new(w[0], w[1])?;
    let mat = ScoreMaterial::from_parts(l0, dl, dtheta, groups, scale)?;
    let e_star = policy.map(|_| RiskPoint::new(es[0] / m as f64, es[1] / m as f64));
    Ok((mat, e_star))
}

/// R, B, F, the feasible polygon and optionally e* of a status-quo policy.
pub fn oracle_geometry(
    dgp: &DgpSpec,
    m: usize,
    grid: &DirectionGrid,
    seed: u64,
    policy: Option<&LogitPolicy>,
) -> Result<OracleGeometry> {
    if m < 100_000 {
        return Err(Error::InvalidInput(format!("oracle geometry needs at least 1e5 draws, got {m}")));
    }
    let (mat, e_star) = oracle_material(dgp, m, seed, policy)?;
    let sfe = SupportFunctionEstimate::new(mat);
    let r = RiskPoint::from_array(sfe.eval_s_raw([-1.0, 0.0]));
    let b = RiskPoint::from_array(sfe.eval_s_raw([0.0, -1.0]));
    let et = sfe.eval_h_etilde(ETILDE_BOUND, 1e-9);
    if et.unbounded {
        return Err(Error::Numerical("fairest point search hit its bound".into()));
    }
    let h = sfe.grid_values(grid).h;
    let polygon = estimate_feasible_set(&h, grid, 4.0)?.polygon;
    Ok(OracleGeometry {
        r,
        b,
        f: et.fairest_point(),
        e_star,
        polygon,
        m,
        grid_size: grid.len(),
    })
}
