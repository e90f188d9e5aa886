//! Experiment orchestration: configuration, training/evaluation runs,
//! policy comparison, the value-iteration oracle, and reporting.

pub mod config;
pub mod experiment;
pub mod oracle;
pub mod report;

pub use config::{DataConfig, EvaluationConfig, ExperimentConfig, SchedulesConfig, TrainingConfig};
pub use experiment::{
    arrival_plan, build_exogenous, compare, derive_seeds, estimate_arrival_rates, evaluate_policy,
    run_evaluation, train_run, CompareOutcome, ExogenousSetup,
};
pub use oracle::{value_iteration_oracle, ExplicitMdp};
pub use report::{PolicyIncome, RunReport};
