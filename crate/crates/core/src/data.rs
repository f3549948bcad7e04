//! Shared domain types: observations, datasets, losses, directions, risk points
//! and group scaling.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// The two groups. `R` is the first canonical group, `B` the second.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Group {
    R,
    B,
}

impl Group {
    pub fn index(self) -> usize {
        match self {
            Group::R => 0,
            Group::B => 1,
        }
    }

    pub fn from_index(i: usize) -> Group {
        if i == 0 {
            Group::R
        } else {
            Group::B
        }
    }
}

/// One row of the data: outcome, group and covariates.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub y: f64,
    pub g: Group,
    pub x: Vec<f64>,
}

/// A validated sample stored column-friendly: covariates are row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    g: Vec<Group>,
    x: Vec<f64>,
    d: usize,
    labels: [String; 2],
    covariate_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from flat arrays. `x` is row-major with `d` columns.
    pub fn new(y: Vec<f64>, g: Vec<Group>, x: Vec<f64>, d: usize) -> Result<Dataset> {
        let n = y.len();
        if g.len() != n {
            return Err(Error::InvalidInput(format!(
                "outcome length {n} does not match group length {}",
                g.len()
            )));
        }
        if x.len() != n * d {
            return Err(Error::InvalidInput(format!(
                "covariate buffer has {} values, expected {} x {}",
                x.len(),
                n,
                d
            )));
        }
        if n < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 observations, got {n}")));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite outcome at observation {i}")));
        }
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite covariate at observation {}, column {}",
                k / d.max(1),
                k % d.max(1)
            )));
        }
        for grp in [Group::R, Group::B] {
            if !g.contains(&grp) {
                return Err(Error::GroupAbsent(format!(
                    "no observation in group {}",
                    if grp == Group::R { "r" } else { "b" }
                )));
            }
        }
        let covariate_names = (1..=d).map(|j| format!("x{j}")).collect();
        Ok(Dataset {
            y,
            g,
            x,
            d,
            labels: ["r".to_string(), "b".to_string()],
            covariate_names,
        })
    }

    pub fn from_observations(obs: &[Observation]) -> Result<Dataset> {
        let d = obs.first().map(|o| o.x.len()).unwrap_or(0);
        if let Some(i) = obs.iter().position(|o| o.x.len() != d) {
            return Err(Error::InvalidInput(format!(
                "observation {i} has {} covariates, expected {d}",
                obs[i].x.len()
            )));
        }
        let y = obs.iter().map(|o| o.y).collect();
        let g = obs.iter().map(|o| o.g).collect();
        let x = obs.iter().flat_map(|o| o.x.iter().copied()).collect();
        Dataset::new(y, g, x, d)
    }

    /// Attaches display labels for the two groups (first is `r`).
    pub fn with_labels(mut self, r: &str, b: &str) -> Dataset {
        self.labels = [r.to_string(), b.to_string()];
        self
    }

    pub fn with_covariate_names(mut self, names: Vec<String>) -> Result<Dataset> {
        if names.len() != self.d {
            return Err(Error::InvalidInput(format!(
                "{} covariate names for {} columns",
                names.len(),
                self.d
            )));
        }
        self.covariate_names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn groups(&self) -> &[Group] {
        &self.g
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn labels(&self) -> &[String; 2] {
        &self.labels
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn observation(&self, i: usize) -> Observation {
        Observation {
            y: self.y[i],
            g: self.g[i],
            x: self.row(i).to_vec(),
        }
    }

    /// Rows `idx` in the given order. Fails if a group disappears.
    pub fn subset(&self, idx: &[usize]) -> Result<Dataset> {
        let y = idx.iter().map(|&i| self.y[i]).collect();
        let g = idx.iter().map(|&i| self.g[i]).collect();
        let mut x = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            x.extend_from_slice(self.row(i));
        }
        let mut out = Dataset::new(y, g, x, self.d)?;
        out.labels = self.labels.clone();
        out.covariate_names = self.covariate_names.clone();
        Ok(out)
    }

    /// Copy with one covariate column replaced.
    pub fn with_column(&self, col: usize, values: &[f64]) -> Result<Dataset> {
        if col >= self.d {
            return Err(Error::InvalidInput(format!(
                "column {col} out of range for {} covariates",
                self.d
            )));
        }
        if values.len() != self.n() {
            return Err(Error::InvalidInput("column length mismatch".into()));
        }
        let mut out = self.clone();
        for (i, v) in values.iter().enumerate() {
            out.x[i * self.d + col] = *v;
        }
        Ok(out)
    }
}

/// Whether the loss is the 0-1 classification loss or a user-supplied bounded loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LossMode {
    Classification,
    CustomBounded,
}

type LossFn = dyn Fn(u8, f64) -> f64 + Send + Sync;

/// Loss function ℓ(d, y) for decisions d in {0, 1}.
#[derive(Clone)]
pub struct LossSpec {
    mode: LossMode,
    name: String,
    c2: f64,
    f: Arc<LossFn>,
}

impl fmt::Debug for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossSpec")
            .field("mode", &self.mode)
            .field("name", &self.name)
            .field("c2", &self.c2)
            .finish()
    }
}

impl LossSpec {
    /// ℓ(d, y) = 1{d ≠ y}.
    pub fn classification() -> LossSpec {
        LossSpec {
            mode: LossMode::Classification,
            name: "classification".into(),
            c2: 1.0,
            f: Arc::new(|d, y| if (d as f64 - y).abs() > 0.5 { 1.0 } else { 0.0 }),
        }
    }

    /// Arbitrary loss with a declared bound on its second moment.
    pub fn custom<F>(name: &str, c2: f64, f: F) -> LossSpec
    where
        F: Fn(u8, f64) -> f64 + Send + Sync + 'static,
    {
        LossSpec {
            mode: LossMode::CustomBounded,
            name: name.into(),
            c2,
            f: Arc::new(f),
        }
    }

    /// Binary-outcome loss table: `table[d][y]`.
    pub fn table(table: [[f64; 2]; 2]) -> LossSpec {
        let c2 = table.iter().flatten().fold(0.0f64, |a, v| a.max(v * v));
        LossSpec::custom("table", c2, move |d, y| {
            let yi = if y > 0.5 { 1 } else { 0 };
            table[d as usize][yi]
        })
    }

    /// Classification loss with a constant added for every decision.
    pub fn shifted_classification(offset: f64) -> LossSpec {
        LossSpec::table([[offset, 1.0 + offset], [1.0 + offset, offset]])
    }

    pub fn mode(&self) -> LossMode {
        self.mode
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn eval(&self, d: u8, y: f64) -> f64 {
        (self.f)(d, y)
    }
}

/// Group-split losses of one observation: `l1[g] = ℓ(1,Y)1{G=g}`, `l0[g] = ℓ(0,Y)1{G=g}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossQuad {
    pub l1: [f64; 2],
    pub l0: [f64; 2],
}

impl LossQuad {
    pub fn delta(&self) -> [f64; 2] {
        [self.l1[0] - self.l0[0], self.l1[1] - self.l0[1]]
    }
}

/// Group-split losses for every observation.
pub fn compute_loss_quad(ds: &Dataset, loss: &LossSpec) -> Result<Vec<LossQuad>> {
    let mut out = Vec::with_capacity(ds.n());
    for i in 0..ds.n() {
        let y = ds.y()[i];
        let a1 = loss.eval(1, y);
        let a0 = loss.eval(0, y);
        if !a1.is_finite() || !a0.is_finite() {
            return Err(Error::NonFiniteLoss { index: i });
        }
        let gi = ds.groups()[i].index();
        let mut q = LossQuad {
            l1: [0.0; 2],
            l0: [0.0; 2],
        };
        q.l1[gi] = a1;
        q.l0[gi] = a0;
        out.push(q);
    }
    Ok(out)
}

/// Group proportions μ̂ and the scaling matrix M̂ = diag(1/μ̂_r, 1/μ̂_b).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GroupScale {
    pub mu: [f64; 2],
}

impl GroupScale {
    pub fn new(mu_r: f64, mu_b: f64) -> Result<GroupScale> {
        if !(mu_r > 0.0 && mu_r < 1.0 && mu_b > 0.0 && mu_b < 1.0) {
            return Err(Error::InvalidInput(format!(
                "group proportions must lie in (0,1), got ({mu_r}, {mu_b})"
            )));
        }
        Ok(GroupScale { mu: [mu_r, mu_b] })
    }

    /// Diagonal of M̂.
    pub fn m(&self) -> [f64; 2] {
        [1.0 / self.mu[0], 1.0 / self.mu[1]]
    }
}

pub fn group_proportions(ds: &Dataset) -> Result<GroupScale> {
    group_proportions_of(ds.groups())
}

pub fn group_proportions_of(groups: &[Group]) -> Result<GroupScale> {
    let n = groups.len();
    let nr = groups.iter().filter(|g| **g == Group::R).count();
    let nb = n - nr;
    if nr == 0 || nb == 0 {
        return Err(Error::GroupAbsent(format!(
            "group proportions need both groups (r: {nr}, b: {nb})"
        )));
    }
    GroupScale::new(nr as f64 / n as f64, nb as f64 / n as f64)
}

/// A unit vector in the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Direction {
    pub q: [f64; 2],
}

impl Direction {
    pub fn new(q1: f64, q2: f64) -> Result<Direction> {
        let norm = q1.hypot(q2);
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "direction ({q1}, {q2}) is not a unit vector"
            )));
        }
        Ok(Direction { q: [q1, q2] })
    }

    /// Normalizes a non-zero vector.
    pub fn normalized(q1: f64, q2: f64) -> Result<Direction> {
        let norm = q1.hypot(q2);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidInput("cannot normalize a zero vector".into()));
        }
        Ok(Direction {
            q: [q1 / norm, q2 / norm],
        })
    }

    pub fn from_angle(theta: f64) -> Direction {
        Direction {
            q: [theta.cos(), theta.sin()],
        }
    }

    /// Angle in [0, 2π).
    pub fn angle(&self) -> f64 {
        let a = self.q[1].atan2(self.q[0]);
        if a < 0.0 {
            a + 2.0 * PI
        } else {
            a
        }
    }

    pub fn dot(&self, e: [f64; 2]) -> f64 {
        self.q[0] * e[0] + self.q[1] * e[1]
    }
}

/// The Pareto-arc endpoints: 𝔲₁ = (−1, 0) and 𝔲₂ = (0, −1).
pub const U1: [f64; 2] = [-1.0, 0.0];
pub const U2: [f64; 2] = [0.0, -1.0];

/// Angle-uniform directions on an arc. For the full circle the endpoint 2π is excluded.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionGrid {
    angles: Vec<f64>,
    dirs: Vec<Direction>,
    lo: f64,
    hi: f64,
    full_circle: bool,
}

impl DirectionGrid {
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn dirs(&self) -> &[Direction] {
        &self.dirs
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn is_full_circle(&self) -> bool {
        self.full_circle
    }

    pub fn arc(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Angular spacing between neighbours.
    pub fn step(&self) -> f64 {
        if self.full_circle {
            2.0 * PI / self.len() as f64
        } else {
            (self.hi - self.lo) / (self.len() - 1) as f64
        }
    }

    /// Index of the stored direction closest in angle to `theta`, if within 1e-9.
    pub fn index_of_angle(&self, theta: f64) -> Option<usize> {
        let two_pi = 2.0 * PI;
        self.angles.iter().position(|a| {
            let mut d = (a - theta).rem_euclid(two_pi);
            if d > PI {
                d = two_pi - d;
            }
            d < 1e-9
        })
    }

    /// Full circle with `n` directions starting at angle 0.
    pub fn full(n: usize) -> Result<DirectionGrid> {
        make_direction_grid(n, 0.0, 2.0 * PI)
    }

    /// The Pareto arc [π, 3π/2] with `n` directions, endpoints included.
    pub fn pareto_arc(n: usize) -> Result<DirectionGrid> {
        make_direction_grid(n, PI, 1.5 * PI)
    }
}

pub fn make_direction_grid(n: usize, lo: f64, hi: f64) -> Result<DirectionGrid> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("direction grid needs N >= 2, got {n}")));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidInput(format!("invalid arc [{lo}, {hi}]")));
    }
    if hi - lo > 2.0 * PI + 1e-12 {
        return Err(Error::InvalidInput("arc longer than the full circle".into()));
    }
    let full_circle = (hi - lo - 2.0 * PI).abs() <= 1e-12;
    let step = if full_circle {
        (hi - lo) / n as f64
    } else {
        (hi - lo) / (n - 1) as f64
    };
    let angles: Vec<f64> = (0..n)
        .map(|j| if !full_circle && j == n - 1 { hi } else { lo + j as f64 * step })
        .collect();
    let dirs = angles.iter().map(|&a| Direction::from_angle(a)).collect();
    Ok(DirectionGrid {
        angles,
        dirs,
        lo,
        hi,
        full_circle,
    })
}

/// Group risks (e_r, e_b).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RiskPoint {
    pub r: f64,
    pub b: f64,
}

impl RiskPoint {
    pub fn new(r: f64, b: f64) -> RiskPoint {
        RiskPoint { r, b }
    }

    pub fn from_array(a: [f64; 2]) -> RiskPoint {
        RiskPoint { r: a[0], b: a[1] }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.r, self.b]
    }

    /// Signed distance-like gap e_b − e_r.
    pub fn gap(&self) -> f64 {
        self.b - self.r
    }

    /// Weak fairness-accuracy dominance of `self` over `other` with slack `tol`.
    pub fn fa_dominates(&self, other: &RiskPoint, tol: f64) -> bool {
        self.r <= other.r + tol
            && self.b <= other.b + tol
            && (self.r - self.b).abs() <= (other.r - other.b).abs() + tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::new(
            vec![1.0, 0.0, 1.0, 1.0],
            vec![Group::R, Group::R, Group::R, Group::B],
            vec![0.0, 1.0, 2.0, 3.0],
            1,
        )
        .unwrap()
    }

    #[test]
    fn loss_quad_examples() {
        let ds = Dataset::new(
            vec![1.0, 0.0, 1.0],
            vec![Group::R, Group::B, Group::B],
            vec![0.0; 3],
            1,
        )
        .unwrap();
        let q = compute_loss_quad(&ds, &LossSpec::classification()).unwrap();
        assert_eq!((q[0].l1, q[0].l0), ([0.0, 0.0], [1.0, 0.0]));
        assert_eq!((q[1].l1, q[1].l0), ([0.0, 1.0], [0.0, 0.0]));
        let twice = LossSpec::custom("double", 4.0, |d, y| {
            if (d as f64 - y).abs() > 0.5 {
                2.0
            } else {
                0.0
            }
        });
        let q = compute_loss_quad(&ds, &twice).unwrap();
        assert_eq!((q[2].l1, q[2].l0), ([0.0, 0.0], [0.0, 2.0]));
    }

    #[test]
    fn non_finite_loss_reports_index() {
        let ds = toy();
        let bad = LossSpec::custom("bad", 1.0, |_, y| if y == 0.0 { f64::NAN } else { 0.0 });
        match compute_loss_quad(&ds, &bad) {
            Err(Error::NonFiniteLoss { index }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn proportions() {
        let s = group_proportions(&toy()).unwrap();
        assert_eq!(s.mu, [0.75, 0.25]);
        let m = s.m();
        assert!((m[0] - 4.0 / 3.0).abs() < 1e-15 && m[1] == 4.0);
        let two = Dataset::new(vec![0.0, 1.0], vec![Group::R, Group::B], vec![], 0).unwrap();
        assert_eq!(group_proportions(&two).unwrap().mu, [0.5, 0.5]);
        assert!(matches!(
            group_proportions_of(&[Group::R, Group::R]),
            Err(Error::GroupAbsent(_))
        ));
    }

    #[test]
    fn single_group_dataset_rejected() {
        let r = Dataset::new(vec![0.0, 1.0], vec![Group::B, Group::B], vec![], 0);
        assert!(matches!(r, Err(Error::GroupAbsent(_))));
    }

    #[test]
    fn grids() {
        let g = DirectionGrid::full(4).unwrap();
        let want = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (d, w) in g.dirs().iter().zip(want) {
            assert!((d.q[0] - w[0]).abs() < 1e-15 && (d.q[1] - w[1]).abs() < 1e-15);
        }
        let a = DirectionGrid::pareto_arc(2).unwrap();
        assert!((a.dirs()[0].q[0] + 1.0).abs() < 1e-15 && a.dirs()[0].q[1].abs() < 1e-15);
        assert!(a.dirs()[1].q[0].abs() < 1e-15 && (a.dirs()[1].q[1] + 1.0).abs() < 1e-15);
        let h = make_direction_grid(3, 0.0, PI).unwrap();
        assert_eq!(h.angles(), &[0.0, PI / 2.0, PI]);
        assert!(make_direction_grid(1, 0.0, 1.0).is_err());
    }

    #[test]
    fn direction_norm_enforced() {
        assert!(Direction::new(0.6, 0.8).is_ok());
        assert!(Direction::new(1.0, 1.0).is_err());
    }
}
