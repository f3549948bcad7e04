//! Simulation designs, oracle geometry, the status-quo logit and the Monte Carlo driver.

pub mod dgp;
pub mod logit;
pub mod mc;
pub mod oracle;

pub use dgp::{generate, DgpKind, DgpSpec};
pub use logit::{fit_logit, status_quo_logit, LogitPolicy};
pub use mc::{
    mc_truth, run_mc, run_rep, McConfig, McLearner, McReport, McRow, McTests, McTruth, RepOutcome,
    write_mc_csv,
};
pub use oracle::{oracle_geometry, oracle_material, OracleGeometry};
