use std::sync::Arc;

use fa_frontier::nuisance::{assign_folds, fit_cross_fit, jitter_covariate, NuisanceLearner};
use fa_frontier::geometry::estimate_pareto;
use fa_frontier::simulate::{generate, oracle_material, DgpSpec};
use fa_frontier::supportfn::{CovarianceKernel, ScoreMaterial, SupportFunctionEstimate};
use fa_frontier::{group_proportions, Dataset, Direction, DirectionGrid, Group, LossSpec};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Three-point covariate design: P(Y=1 | X=x, G=g) = P[g][x].
const P: [[f64; 3]; 2] = [[0.2, 0.55, 0.9], [0.7, 0.35, 0.15]];
const P_R: f64 = 0.6;

fn discrete_design(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut y, mut g, mut x) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let xi = rng.random_range(0..3usize);
        let gi = if rng.random::<f64>() < P_R { Group::R } else { Group::B };
        let p = P[gi.index()][xi];
        y.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
        g.push(gi);
        x.push(xi as f64);
    }
    Dataset::new(y, g, x, 1).unwrap()
}

fn discrete_oracle(x: f64) -> [f64; 2] {
    let k = x.round().clamp(0.0, 2.0) as usize;
    [P_R * (1.0 - 2.0 * P[0][k]), (1.0 - P_R) * (1.0 - 2.0 * P[1][k])]
}

/// Brute force over the two decisions at each support point:
/// h(q) = Σₓ P(x) max_d (q_r E[ℓ(d,Y)|x,r] + q_b E[ℓ(d,Y)|x,b]).
fn h_bruteforce(q: [f64; 2]) -> f64 {
    (0..3)
        .map(|k| {
            let treat = q[0] * (1.0 - P[0][k]) + q[1] * (1.0 - P[1][k]);
            let skip = q[0] * P[0][k] + q[1] * P[1][k];
            treat.max(skip) / 3.0
        })
        .sum()
}

fn oracle_estimate(ds: &Dataset) -> SupportFunctionEstimate {
    let dtheta: Vec<[f64; 2]> = (0..ds.n()).map(|i| discrete_oracle(ds.row(i)[0])).collect();
    let mat = ScoreMaterial::from_dataset(ds, &LossSpec::classification(), dtheta).unwrap();
    SupportFunctionEstimate::new(mat)
}

#[test]
fn discrete_design_matches_bruteforce() {
    let grid = DirectionGrid::full(1000).unwrap();
    let mut worst = Vec::new();
    for &n in &[2_000usize, 50_000] {
        let ds = jitter_covariate(&discrete_design(n, 11), 0, 0.1, 12).unwrap();
        let sfe = oracle_estimate(&ds);
        let gv = sfe.grid_values(&grid);
        let err = grid
            .dirs()
            .iter()
            .zip(&gv.h)
            .map(|(d, h)| (h - h_bruteforce(d.q)).abs())
            .fold(0.0f64, f64::max);
        let k = CovarianceKernel::new(&sfe, grid.dirs());
        let se = (0..grid.len()).map(|a| k.omega(a, a)).fold(0.0f64, f64::max).sqrt() / (n as f64).sqrt();
        assert!(err <= 3.0 * se, "n {n}: error {err} above three standard errors {se}");
        worst.push(err);
    }
    assert!(worst[1] < worst[0], "error did not shrink with n: {worst:?}");
    assert!(worst[1] < 0.01, "{worst:?}");
}

#[test]
fn jitter_widens_support_by_twice_the_scale() {
    let ds = discrete_design(20_000, 3);
    let j = jitter_covariate(&ds, 0, 0.05, 4).unwrap();
    let (lo, hi) = (0..j.n()).fold((f64::MAX, f64::MIN), |(a, b), i| {
        let v = j.row(i)[0];
        (a.min(v), b.max(v))
    });
    assert!((hi - lo - 2.1).abs() < 0.002, "width {}", hi - lo);
    assert_eq!(j.y(), ds.y());
}

#[test]
fn oracle_delta_theta_closed_form() {
    let bal = DgpSpec::balanced();
    let skew = DgpSpec::r_skew();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let x: Vec<f64> = (0..20).map(|_| rng.random_range(-3.0..3.0)).collect();
        let d = bal.delta_theta(&x);
        let want_r = 0.6 * (1.0 - 2.0 * logistic(x[0] + x[1] + 0.5 * x[2]));
        let want_b = 0.4 * (1.0 - 2.0 * logistic(-x[0] - 0.5 * x[1] + x[3]));
        assert!((d[0] - want_r).abs() < 1e-14 && (d[1] - want_b).abs() < 1e-14);
        let s = skew.delta_theta(&x);
        let want_r = 0.6 * (1.0 - 2.0 * logistic(2.0 * (x[0] + x[1] + x[2])));
        assert!((s[0] - want_r).abs() < 1e-14);
    }
}

#[test]
fn balanced_outcomes_follow_the_logistic_index() {
    // binned conditional mean of Y in group r near a point, against the index
    let ds = generate(&DgpSpec::balanced(), 400_000, 8).unwrap();
    let x0 = [0.3, 0.5, 0.5];
    let (mut hits, mut ones) = (0usize, 0.0);
    for i in 0..ds.n() {
        let x = ds.row(i);
        if ds.groups()[i] == Group::R && (0..3).all(|k| (x[k] - x0[k]).abs() < 0.15) {
            hits += 1;
            ones += ds.y()[i];
        }
    }
    let p = ones / hits as f64;
    let want = logistic(x0[0] + x0[1] + 0.5 * x0[2]);
    let se = (want * (1.0 - want) / hits as f64).sqrt();
    assert!(hits > 1000);
    assert!((p - want).abs() < 4.0 * se + 0.01, "p {p} want {want} hits {hits}");
}

#[test]
fn influence_variance_positive_on_balanced_sample() {
    let ds = generate(&DgpSpec::balanced(), 3000, 21).unwrap();
    let d = DgpSpec::balanced();
    let learner = NuisanceLearner::Oracle(Arc::new(move |x: &[f64]| d.delta_theta(x)));
    let folds = assign_folds(ds.n(), 5, 1).unwrap();
    let cf = fit_cross_fit(&ds, &LossSpec::classification(), &folds, &learner).unwrap();
    let sfe = SupportFunctionEstimate::new(
        ScoreMaterial::from_dataset(&ds, &LossSpec::classification(), cf.into_predictions()).unwrap(),
    );
    let grid = DirectionGrid::full(72).unwrap();
    let k = CovarianceKernel::new(&sfe, grid.dirs());
    for a in 0..grid.len() {
        assert!(k.omega(a, a) > 0.0, "direction {a}");
    }
}

#[test]
fn fairest_point_unbounded_when_set_lies_below_the_line() {
    // add a constant loss to group b only: every b-risk grows by 1, R and B end up
    // on the same side and the inf over c diverges
    let ds = generate(&DgpSpec::balanced(), 4000, 2).unwrap();
    let dgp = DgpSpec::balanced();
    let mut l0 = Vec::new();
    let mut dl = Vec::new();
    let mut dt = Vec::new();
    for i in 0..ds.n() {
        let g = ds.groups()[i];
        let y = ds.y()[i];
        let mut a = [0.0; 2];
        let mut b = [0.0; 2];
        a[g.index()] = y + if g == Group::B { 1.0 } else { 0.0 };
        b[g.index()] = 1.0 - 2.0 * y;
        l0.push(a);
        dl.push(b);
        let d = dgp.delta_theta(ds.row(i));
        dt.push([d[0], d[1]]);
    }
    let scale = group_proportions(&ds).unwrap();
    let mat = ScoreMaterial::from_parts(l0, dl, dt, ds.groups().to_vec(), scale).unwrap();
    let sfe = SupportFunctionEstimate::new(mat);
    assert!(sfe.eval_h_etilde(50.0, 1e-9).unbounded);
    let plain = oracle_like(&ds);
    assert!(!plain.eval_h_etilde(50.0, 1e-9).unbounded);
}

fn oracle_like(ds: &Dataset) -> SupportFunctionEstimate {
    let d = DgpSpec::balanced();
    let dt: Vec<[f64; 2]> = (0..ds.n()).map(|i| d.delta_theta(ds.row(i))).collect();
    SupportFunctionEstimate::new(ScoreMaterial::from_dataset(ds, &LossSpec::classification(), dt).unwrap())
}

#[test]
fn oracle_pareto_arc_is_monotone() {
    // with conditional expectations in place of losses the correction term vanishes
    // and the support points trace the lower-left boundary in order
    let (mat, _) = oracle_material(&DgpSpec::balanced(), 20_000, 9, None).unwrap();
    let sfe = SupportFunctionEstimate::new(mat);
    let arc = DirectionGrid::pareto_arc(91).unwrap();
    let par = estimate_pareto(&sfe, &arc);
    for w in par.points.windows(2) {
        assert!(w[1][0] >= w[0][0] - 1e-12, "e_r decreased: {w:?}");
        assert!(w[1][1] <= w[0][1] + 1e-12, "e_b increased: {w:?}");
    }
    let r = sfe.eval_support_set(Direction::new(-1.0, 0.0).unwrap());
    let b = sfe.eval_support_set(Direction::new(0.0, -1.0).unwrap());
    let first = par.points[0];
    let last = *par.points.last().unwrap();
    let near = |p: [f64; 2], e: fa_frontier::RiskPoint| (p[0] - e.r).abs() + (p[1] - e.b).abs() < 1e-12;
    assert!(near(first, r) || near(first, b));
    assert!(near(last, r) || near(last, b));
}
