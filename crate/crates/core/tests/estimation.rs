//! End-to-end estimation and inference on the simulation designs against oracle values.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use fa_frontier::geometry::{hausdorff_polygons, Polygon};
use fa_frontier::inference::{multiplier_bootstrap, test_frontier_point, BootstrapConfig, Decision};
use fa_frontier::nuisance::{assign_folds, fit_cross_fit, LassoConfig, NuisanceLearner};
use fa_frontier::policy::{build_policy, evaluate_policy, PolicyKind, SplitPlan};
use fa_frontier::simulate::{generate, oracle_geometry, DgpSpec, OracleGeometry};
use fa_frontier::supportfn::{CovarianceKernel, ScoreMaterial, SupportFunctionEstimate};
use fa_frontier::{Dataset, DirectionGrid, LossSpec, RiskPoint};

fn oracle() -> &'static OracleGeometry {
    static G: OnceLock<OracleGeometry> = OnceLock::new();
    G.get_or_init(|| oracle_geometry(&DgpSpec::balanced(), 1_000_000, &DirectionGrid::full(360).unwrap(), 1, None).unwrap())
}

fn oracle_learner() -> NuisanceLearner {
    let d = DgpSpec::balanced();
    NuisanceLearner::Oracle(Arc::new(move |x: &[f64]| d.delta_theta(x)))
}

fn estimate(ds: &Dataset, learner: &NuisanceLearner) -> SupportFunctionEstimate {
    let loss = LossSpec::classification();
    let folds = assign_folds(ds.n(), 5, 3).unwrap();
    let cf = fit_cross_fit(ds, &loss, &folds, learner).unwrap();
    SupportFunctionEstimate::new(ScoreMaterial::from_dataset(ds, &loss, cf.into_predictions()).unwrap())
}

fn polygon(sfe: &SupportFunctionEstimate) -> Polygon {
    let grid = DirectionGrid::full(360).unwrap();
    fa_frontier::geometry::estimate_feasible_set(&sfe.grid_values(&grid).h, &grid, 4.0)
        .unwrap()
        .polygon
}

#[test]
fn polygons_converge_to_the_oracle() {
    let ds = generate(&DgpSpec::balanced(), 10_000, 41).unwrap();
    let orc = &oracle().polygon;
    let with_oracle = hausdorff_polygons(&polygon(&estimate(&ds, &oracle_learner())), orc).unwrap();
    let lasso = NuisanceLearner::MultinomialLasso(LassoConfig::default());
    let with_lasso = hausdorff_polygons(&polygon(&estimate(&ds, &lasso)), orc).unwrap();
    assert!(with_oracle < 0.03, "oracle nuisance: {with_oracle}");
    assert!(with_lasso < 0.03, "lasso nuisance: {with_lasso}");
}

#[test]
fn oracle_landmarks_are_ordered() {
    let g = oracle();
    // R is best for r, B best for b, and F sits between them on the diagonal
    assert!(g.r.r < g.f.r && g.f.r < g.b.r);
    assert!(g.b.b < g.f.b && g.f.b < g.r.b);
    assert!((g.f.r - g.f.b).abs() < 1e-6);
    assert!(g.polygon.is_convex(1e-9));
}

/// Two-sample Kolmogorov-Smirnov distance.
fn ks(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn bootstrap_supremum_matches_gaussian_limit() {
    let ds = generate(&DgpSpec::balanced(), 5000, 17).unwrap();
    let sfe = estimate(&ds, &oracle_learner());
    let cfg = BootstrapConfig {
        draws: 1000,
        seed: 5,
        grid_size: 72,
        ..BootstrapConfig::default()
    };
    let draws = multiplier_bootstrap(&sfe, None, &cfg).unwrap();
    let boot: Vec<f64> = (0..draws.draws()).map(|b| draws.sup_abs(b)).collect();

    let k = CovarianceKernel::new(&sfe, draws.grid.dirs());
    let m = draws.grid.len();
    let g = k.gram();
    let cov = DMatrix::from_fn(m, m, |a, b| g[a][b] + if a == b { 1e-10 } else { 0.0 });
    let l = cov.cholesky().expect("Gram matrix is positive definite").l();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let gauss: Vec<f64> = (0..4000)
        .map(|_| {
            let z = nalgebra::DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
            (&l * z).amax()
        })
        .collect();
    let d = ks(boot, gauss);
    assert!(d <= 0.1, "KS distance {d}");
}

#[test]
fn frontier_points_and_the_interior() {
    let ds = generate(&DgpSpec::balanced(), 5000, 23).unwrap();
    let sfe = estimate(&ds, &oracle_learner());
    let cfg = BootstrapConfig {
        draws: 400,
        seed: 2,
        ..BootstrapConfig::default()
    };
    let draws = multiplier_bootstrap(&sfe, None, &cfg).unwrap();
    let g = oracle();
    // the true R lies on the frontier, the centroid of R and B does not
    let at_r = test_frontier_point(&draws, g.r, 0.05).unwrap();
    assert_eq!(at_r.decision, Decision::FailToReject, "{at_r:?}");
    let mid = RiskPoint::new((g.r.r + g.b.r) / 2.0, (g.r.b + g.b.b) / 2.0);
    let at_mid = test_frontier_point(&draws, mid, 0.05).unwrap();
    assert!(at_mid.statistic > 0.0);
    assert_eq!(at_mid.decision, Decision::Reject, "{at_mid:?}");
}

#[test]
fn axis_policies_reach_r_and_b() {
    let ds = generate(&DgpSpec::balanced(), 10_000, 31).unwrap();
    let split = SplitPlan::new(ds.n(), 0.5, 4).unwrap();
    let (train, eval) = split.apply(&ds).unwrap();
    let loss = LossSpec::classification();
    let g = oracle();
    for (kind, target) in [(PolicyKind::Rawlsian, g.r), (PolicyKind::Majority, g.b)] {
        let p = build_policy(&train, &loss, &oracle_learner(), kind.direction().unwrap(), None).unwrap();
        let e = evaluate_policy(&p, &eval, &loss).unwrap();
        assert!(
            (e.r - target.r).abs() < 0.03 && (e.b - target.b).abs() < 0.03,
            "{kind:?}: {e:?} vs {target:?}"
        );
    }
}
