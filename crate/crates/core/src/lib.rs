//! Estimation and inference for the fairness-accuracy frontier.
//!
//! The feasible set of group risk pairs is recovered through a debiased estimator of
//! its support function. On top of it sit set estimators (feasible polygon, frontier,
//! Pareto arc), bootstrap tests (group skew, less discriminatory alternatives,
//! distance to the fairest point), frontier-attaining policies and a Monte Carlo
//! harness for the two simulation designs.

pub mod data;
pub mod error;
pub mod geometry;
pub mod inference;
pub mod io;
pub mod nuisance;
pub mod policy;
pub mod rng;
pub mod simulate;
pub mod supportfn;

pub use data::{
    compute_loss_quad, group_proportions, make_direction_grid, Dataset, Direction, DirectionGrid,
    Group, GroupScale, LossMode, LossQuad, LossSpec, Observation, RiskPoint, U1, U2,
};
pub use error::{Error, Result};
