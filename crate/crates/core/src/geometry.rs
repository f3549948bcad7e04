//! Set-level objects built from a support function on a direction grid: the feasible
//! polygon Ê, the frontier estimate F̂, the Pareto arc, argmax direction sets,
//! frontier-point selection and Hausdorff distances.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Dataset, DirectionGrid, Group, LossSpec, RiskPoint};
use crate::error::{Error, Result};
use crate::supportfn::{eval_h_c_raw, SupportFunction, SupportFunctionEstimate, ADMISSIBLE_TOL};

/// A convex polygon with counterclockwise vertices. May be empty or degenerate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Polygon {
    pub vertices: Vec<[f64; 2]>,
}

impl Polygon {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn square(half: f64) -> Polygon {
        Polygon {
            vertices: vec![[-half, -half], [half, -half], [half, half], [-half, half]],
        }
    }

    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        if n < 3 {
            return 0.0;
        }
        0.5 * (0..n)
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % n]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>()
    }

    /// All cross products of consecutive edges are non-negative (counterclockwise convex).
    pub fn is_convex(&self, tol: f64) -> bool {
        let v = &self.vertices;
        let n = v.len();
        if n < 3 {
            return true;
        }
        (0..n).all(|i| cross3(v[i], v[(i + 1) % n], v[(i + 2) % n]) >= -tol)
    }

    pub fn bounding_box(&self) -> Option<([f64; 2], [f64; 2])> {
        if self.vertices.is_empty() {
            return None;
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Some((lo, hi))
    }

    /// Euclidean distance from `p` to the polygon (zero inside).
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        let v = &self.vertices;
        match v.len() {
            0 => f64::INFINITY,
            1 => dist(p, v[0]),
            2 => seg_dist(p, v[0], v[1]),
            n => {
                let inside = (0..n).all(|i| cross3(v[i], v[(i + 1) % n], p) >= 0.0);
                if inside {
                    0.0
                } else {
                    (0..n)
                        .map(|i| seg_dist(p, v[i], v[(i + 1) % n]))
                        .fold(f64::INFINITY, f64::min)
                }
            }
        }
    }

    /// Keeps the part with qᵀz ≤ h (Sutherland–Hodgman step for one halfplane).
    pub fn clip(&self, q: [f64; 2], h: f64) -> Polygon {
        let v = &self.vertices;
        let n = v.len();
        if n == 0 {
            return self.clone();
        }
        let scale = 1.0 + h.abs();
        let eps = 1e-12 * scale;
        let side = |p: [f64; 2]| q[0] * p[0] + q[1] * p[1] - h;
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..n {
            let a = v[i];
            let b = v[(i + 1) % n];
            let (fa, fb) = (side(a), side(b));
            let a_in = fa <= eps;
            let b_in = fb <= eps;
            if a_in {
                out.push(a);
            }
            if a_in != b_in && n > 1 {
                let t = fa / (fa - fb);
                if t.is_finite() {
                    out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                }
            }
        }
        Polygon { vertices: out }.cleaned(1e-12 * scale)
    }

    /// Removes repeated and collinear vertices.
    fn cleaned(mut self, tol: f64) -> Polygon {
        let mut v: Vec<[f64; 2]> = Vec::with_capacity(self.vertices.len());
        for p in self.vertices.drain(..) {
            if v.last().map_or(true, |l| dist(*l, p) > tol) {
                v.push(p);
            }
        }
        while v.len() > 1 && dist(v[0], *v.last().unwrap()) <= tol {
            v.pop();
        }
        let mut changed = true;
        while changed && v.len() > 2 {
            changed = false;
            let n = v.len();
            for i in 0..n {
                let (a, b, c) = (v[(i + n - 1) % n], v[i], v[(i + 1) % n]);
                let len = dist(a, c).max(tol);
                if cross3(a, b, c).abs() <= tol * len {
                    v.remove(i);
                    changed = true;
                    break;
                }
            }
        }
        Polygon { vertices: v }
    }
}

impl SupportFunction for Polygon {
    fn support(&self, q: [f64; 2]) -> f64 {
        self.vertices
            .iter()
            .map(|p| q[0] * p[0] + q[1] * p[1])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn cross3(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn seg_dist(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

/// Radius C of the ball B_C containing the feasible set:
/// √2 · max_g (1/μ̂_g)(1/n) Σ max_d |ℓ(d, Yᵢ)| 1{Gᵢ = g}.
pub fn c_bound(ds: &Dataset, loss: &LossSpec) -> f64 {
    let mut sum = [0.0; 2];
    let mut cnt = [0usize; 2];
    for i in 0..ds.n() {
        let y = ds.y()[i];
        let m = loss.eval(0, y).abs().max(loss.eval(1, y).abs());
        let g = ds.groups()[i].index();
        sum[g] += m;
        cnt[g] += 1;
    }
    let per = |g: usize| if cnt[g] == 0 { 0.0 } else { sum[g] / cnt[g] as f64 };
    std::f64::consts::SQRT_2 * per(Group::R.index()).max(per(Group::B.index()))
}

/// Default slack κ_n = √(log n).
pub fn kappa_default(n: usize) -> f64 {
    (n as f64).ln().sqrt()
}

/// Ê as a polygon: intersection of the halfplanes qᵀz ≤ ĥ(q) over a full-circle grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibleSetEstimate {
    pub polygon: Polygon,
    pub grid_size: usize,
}

pub fn estimate_feasible_set(h: &[f64], grid: &DirectionGrid, bound: f64) -> Result<FeasibleSetEstimate> {
    if !grid.is_full_circle() {
        return Err(Error::InvalidInput("feasible set needs a full-circle grid".into()));
    }
    if h.len() != grid.len() {
        return Err(Error::InvalidInput("support values do not match the grid".into()));
    }
    let hmax = h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut poly = Polygon::square(bound.max(2.0 * hmax + 1.0));
    for (d, hv) in grid.dirs().iter().zip(h) {
        poly = poly.clip(d.q, *hv);
        if poly.is_empty() {
            break;
        }
    }
    Ok(FeasibleSetEstimate {
        polygon: poly,
        grid_size: grid.len(),
    })
}

/// Index map j ↦ index of −q_j on an even full-circle grid.
pub fn opposite_indices(grid: &DirectionGrid) -> Result<Vec<usize>> {
    let n = grid.len();
    if !grid.is_full_circle() || n % 2 != 0 {
        return Err(Error::InvalidInput(
            "an even full-circle grid is required to pair opposite directions".into(),
        ));
    }
    Ok((0..n).map(|j| (j + n / 2) % n).collect())
}

/// Indices of grid directions in the admissible half q₁ + q₂ ≥ 0.
pub fn admissible_indices(grid: &DirectionGrid) -> Vec<usize> {
    grid.dirs()
        .iter()
        .enumerate()
        .filter(|(_, d)| d.q[0] + d.q[1] >= -ADMISSIBLE_TOL)
        .map(|(j, _)| j)
        .collect()
}

/// Precomputed grid data for frontier criteria.
#[derive(Clone, Debug)]
pub struct FrontierGrid<'a> {
    pub grid: &'a DirectionGrid,
    pub h: &'a [f64],
    opposite: Vec<usize>,
    admissible: Vec<usize>,
}

impl<'a> FrontierGrid<'a> {
    pub fn new(grid: &'a DirectionGrid, h: &'a [f64]) -> Result<FrontierGrid<'a>> {
        if h.len() != grid.len() {
            return Err(Error::InvalidInput("support values do not match the grid".into()));
        }
        Ok(FrontierGrid {
            grid,
            h,
            opposite: opposite_indices(grid)?,
            admissible: admissible_indices(grid),
        })
    }

    /// max_q (qᵀe − h(q)).
    pub fn outside_gap(&self, e: [f64; 2]) -> f64 {
        outside_gap(self.grid, self.h, e)
    }

    /// max over admissible q of (−h_C(e)(q) − h(−q)).
    pub fn separation(&self, e: [f64; 2]) -> f64 {
        let er = RiskPoint::from_array(e);
        self.admissible
            .iter()
            .map(|&j| {
                let hc = eval_h_c_raw(er, self.grid.dirs()[j].q).expect("admissible direction");
                -hc - self.h[self.opposite[j]]
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// [outside gap]₊ + [separation]₋.
    pub fn criterion(&self, e: [f64; 2]) -> f64 {
        self.outside_gap(e).max(0.0) + (-self.separation(e)).max(0.0)
    }

    pub fn admissible(&self) -> &[usize] {
        &self.admissible
    }

    pub fn opposite(&self) -> &[usize] {
        &self.opposite
    }
}

/// max over the grid of qᵀe − h(q).
pub fn outside_gap(grid: &DirectionGrid, h: &[f64], e: [f64; 2]) -> f64 {
    grid.dirs()
        .iter()
        .zip(h)
        .map(|(d, hv)| d.q[0] * e[0] + d.q[1] * e[1] - hv)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Rectangular candidate grid with inclusive endpoints.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EGrid {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub nr: usize,
    pub nb: usize,
}

impl EGrid {
    pub fn new(lo: [f64; 2], hi: [f64; 2], nr: usize, nb: usize) -> EGrid {
        EGrid { lo, hi, nr, nb }
    }

    pub fn spacing(&self) -> [f64; 2] {
        [
            if self.nr > 1 { (self.hi[0] - self.lo[0]) / (self.nr - 1) as f64 } else { 0.0 },
            if self.nb > 1 { (self.hi[1] - self.lo[1]) / (self.nb - 1) as f64 } else { 0.0 },
        ]
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        let s = self.spacing();
        [self.lo[0] + i as f64 * s[0], self.lo[1] + j as f64 * s[1]]
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.nr * self.nb);
        for i in 0..self.nr {
            for j in 0..self.nb {
                out.push(self.point(i, j));
            }
        }
        out
    }

    /// The default frontier grid: bounding box of Ê inflated by `pad`.
    pub fn around(poly: &Polygon, pad: f64, size: usize) -> Option<EGrid> {
        let (lo, hi) = poly.bounding_box()?;
        Some(EGrid::new(
            [lo[0] - pad, lo[1] - pad],
            [hi[0] + pad, hi[1] + pad],
            size,
            size,
        ))
    }
}

/// Retained frontier points and their criterion values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrontierEstimate {
    pub points: Vec<[f64; 2]>,
    pub criterion: Vec<f64>,
    pub kappa_n: f64,
    pub threshold: f64,
    pub e_grid: EGrid,
}

impl FrontierEstimate {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// F̂: grid points whose frontier criterion is at most κ_n/√n. Points outside B_C are skipped.
pub fn estimate_frontier(
    fg: &FrontierGrid<'_>,
    kappa_n: f64,
    n: usize,
    e_grid: &EGrid,
    c: f64,
) -> FrontierEstimate {
    estimate_frontier_with(fg, kappa_n, n, e_grid, c, |_| 0.0)
}

/// As [`estimate_frontier`] with an extra nonnegative term added to each criterion.
pub fn estimate_frontier_with<F>(
    fg: &FrontierGrid<'_>,
    kappa_n: f64,
    n: usize,
    e_grid: &EGrid,
    c: f64,
    extra: F,
) -> FrontierEstimate
where
    F: Fn([f64; 2]) -> f64 + Sync,
{
    let threshold = kappa_n / (n as f64).sqrt();
    let pts = e_grid.points();
    let kept: Vec<([f64; 2], f64)> = pts
        .par_iter()
        .filter(|p| p[0].hypot(p[1]) <= c)
        .filter_map(|p| {
            // cheap first term rejects most points
            let first = fg.outside_gap(*p).max(0.0) + extra(*p);
            if first > threshold {
                return None;
            }
            let v = first + (-fg.separation(*p)).max(0.0);
            (v <= threshold).then_some((*p, v))
        })
        .collect();
    FrontierEstimate {
        points: kept.iter().map(|k| k.0).collect(),
        criterion: kept.iter().map(|k| k.1).collect(),
        kappa_n,
        threshold,
        e_grid: e_grid.clone(),
    }
}

/// Support points along the Pareto arc.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParetoEstimate {
    pub angles: Vec<f64>,
    pub points: Vec<[f64; 2]>,
}

pub fn estimate_pareto(sfe: &SupportFunctionEstimate, arc: &DirectionGrid) -> ParetoEstimate {
    ParetoEstimate {
        angles: arc.angles().to_vec(),
        points: arc.dirs().iter().map(|d| sfe.eval_s_raw(d.q)).collect(),
    }
}

/// Which directions an argmax set ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ArcTag {
    FullCircle,
    ParetoArc,
    AdmissibleHalf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArgmaxSet {
    pub tag: ArcTag,
    pub indices: Vec<usize>,
    pub sup: f64,
}

/// Grid directions within κ_n/√n of the supremum of qᵀe − h(q) over the tagged arc.
pub fn argmax_set(
    grid: &DirectionGrid,
    h: &[f64],
    e: [f64; 2],
    tag: ArcTag,
    kappa_n: f64,
    n: usize,
) -> ArgmaxSet {
    let in_arc = |j: usize| {
        let q = grid.dirs()[j].q;
        match tag {
            ArcTag::FullCircle => true,
            ArcTag::ParetoArc => q[0] <= 1e-12 && q[1] <= 1e-12,
            ArcTag::AdmissibleHalf => q[0] + q[1] >= -ADMISSIBLE_TOL,
        }
    };
    let vals: Vec<(usize, f64)> = (0..grid.len())
        .filter(|&j| in_arc(j))
        .map(|j| {
            let q = grid.dirs()[j].q;
            (j, q[0] * e[0] + q[1] * e[1] - h[j])
        })
        .collect();
    let sup = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let cut = sup - kappa_n / (n as f64).sqrt();
    ArgmaxSet {
        tag,
        indices: vals.iter().filter(|v| v.1 >= cut).map(|v| v.0).collect(),
        sup,
    }
}

/// Retained point closest to e⁰ = 2C(−1/√2, −1/√2); ties go to smaller e_r, then e_b.
pub fn select_frontier_point(points: &[[f64; 2]], c: f64) -> Result<RiskPoint> {
    if points.is_empty() {
        return Err(Error::Empty("frontier estimate is empty".into()));
    }
    let e0 = [-c * std::f64::consts::SQRT_2, -c * std::f64::consts::SQRT_2];
    let d2 = |p: &[f64; 2]| (p[0] - e0[0]).powi(2) + (p[1] - e0[1]).powi(2);
    let mut best = points[0];
    let mut bd = d2(&best);
    for p in &points[1..] {
        let d = d2(p);
        let tie = (d - bd).abs() <= 1e-12 * bd.max(1.0);
        if (!tie && d < bd) || (tie && (p[0], p[1]) < (best[0], best[1])) {
            if !tie {
                bd = d;
            }
            best = *p;
        }
    }
    Ok(RiskPoint::from_array(best))
}

/// Point-set Hausdorff distance.
pub fn hausdorff_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("Hausdorff distance of an empty set".into()));
    }
    let directed = |x: &[[f64; 2]], y: &[[f64; 2]]| {
        x.iter()
            .map(|p| y.iter().map(|q| dist(*p, *q)).fold(f64::INFINITY, f64::min))
            .fold(0.0f64, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}

/// Hausdorff distance between two convex polygons viewed as filled sets.
pub fn hausdorff_polygons(a: &Polygon, b: &Polygon) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("Hausdorff distance of an empty set".into()));
    }
    let directed = |x: &Polygon, y: &Polygon| {
        x.vertices
            .iter()
            .map(|p| y.distance_to(*p))
            .fold(0.0f64, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}

/// max over grid directions of |h_A(q) − h_B(q)|.
pub fn support_gap(a: &dyn SupportFunction, b: &dyn SupportFunction, grid: &DirectionGrid) -> f64 {
    grid.dirs()
        .iter()
        .map(|d| (a.support(d.q) - b.support(d.q)).abs())
        .fold(0.0f64, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::supportfn::PointSupport;

    #[test]
    fn unit_square_from_axis_directions() {
        let grid = DirectionGrid::full(4).unwrap();
        let fs = estimate_feasible_set(&[1.0; 4], &grid, 2.0).unwrap();
        let mut v = fs.polygon.vertices.clone();
        assert_eq!(v.len(), 4);
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want = [[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]];
        for (p, w) in v.iter().zip(want) {
            assert!((p[0] - w[0]).abs() < 1e-12 && (p[1] - w[1]).abs() < 1e-12);
        }
        assert!((fs.polygon.area() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_point_polygon() {
        let grid = DirectionGrid::full(64).unwrap();
        let h: Vec<f64> = grid.dirs().iter().map(|d| d.dot([0.5, 0.5])).collect();
        let fs = estimate_feasible_set(&h, &grid, 2.0).unwrap();
        assert!(!fs.polygon.is_empty());
        for p in &fs.polygon.vertices {
            assert!(dist(*p, [0.5, 0.5]) < 1e-9);
        }
    }

    #[test]
    fn selection_tie_rule() {
        let p = select_frontier_point(&[[0.4, 0.2], [0.2, 0.4]], 1.0).unwrap();
        assert_eq!(p, RiskPoint::new(0.2, 0.4));
        assert_eq!(select_frontier_point(&[[0.3, 0.3]], 1.0).unwrap(), RiskPoint::new(0.3, 0.3));
        assert!(select_frontier_point(&[], 1.0).is_err());
    }

    #[test]
    fn hausdorff_examples() {
        let a = Polygon::square(1.0);
        let b = Polygon {
            vertices: a.vertices.iter().map(|p| [p[0] + 0.3, p[1]]).collect(),
        };
        assert_eq!(hausdorff_distance(&a.vertices, &a.vertices).unwrap(), 0.0);
        assert!((hausdorff_distance(&a.vertices, &b.vertices).unwrap() - 0.3).abs() < 1e-12);
        assert!((hausdorff_polygons(&a, &b).unwrap() - 0.3).abs() < 1e-12);
        assert!(hausdorff_distance(&[], &a.vertices).is_err());
    }

    #[test]
    fn argmax_kink_spans_quarter_arc() {
        let sq = PointSupport {
            points: Polygon::square(1.0).vertices,
        };
        let grid = DirectionGrid::full(40).unwrap();
        let h = sq.support_on_grid(&grid);
        let a = argmax_set(&grid, &h, [1.0, 1.0], ArcTag::FullCircle, 1e-9, 1);
        // every direction between (1,0) and (0,1) attains zero
        let want: Vec<usize> = (0..=10).collect();
        assert_eq!(a.indices, want);
        let exact = argmax_set(&grid, &h, [0.2, 0.9], ArcTag::FullCircle, 0.0, 100);
        assert_eq!(exact.indices.len(), 1);
    }

    #[test]
    fn c_bound_classification() {
        let ds = Dataset::new(vec![1.0, 0.0, 1.0], vec![Group::R, Group::B, Group::B], vec![], 0)
            .unwrap();
        assert!((c_bound(&ds, &LossSpec::classification()) - std::f64::consts::SQRT_2).abs() < 1e-15);
    }
}
