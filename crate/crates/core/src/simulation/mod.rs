//! Synthetic data, oracle truths and Monte Carlo experiments.

pub mod dgp;
pub mod experiment;
pub mod oracle;
pub mod quadrature;

pub use dgp::{generate, DgpConfig, DgpKind, DgpParams, GeneratedSample};
pub use experiment::{
    run_experiment, ExperimentConfig, ExperimentReport, Misspecification, ReplicationRecord,
    SummaryRecord, Target,
};
pub use oracle::{analytic_test_truth, analytic_truth, oracle_truth, AnalyticOracle, OracleTruth};
