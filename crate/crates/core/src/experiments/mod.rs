//! Experiment harness: training runs, evaluation, friction sweeps and the
//! transfer study.

pub mod config;
pub mod eval;
pub mod output;
pub mod plot;
pub mod sweep;
pub mod train;

pub use config::{EvaluationConfig, ExperimentConfig};
pub use eval::{evaluate_policy, write_summary, write_traces, EvalReport, TrialResult};
pub use output::Provenance;
pub use sweep::{
    friction_sweep, transfer_configs, transfer_matrix, transfer_study, write_sweep, write_transfer, SweepPoint,
    TransferMatrix,
};
pub use train::{run_training, test_seed, train, validation_seed, IterationRecord, TrainArtifacts, TrainOutcome};
