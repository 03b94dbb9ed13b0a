//! Experiment harness around `rkde-core`: seeded contaminated-sample
//! studies for density estimation and attention, plus a mechanism
//! equivalence check, all driven by flat JSON configs.
//!
//! The binary front end lives in `main.rs`; everything here is callable
//! as a library so tests can run experiments in-process.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod rng;
pub mod sampling;

pub use config::{AxisConfig, ExperimentConfig, ExperimentKind, InlierParams, LossKind, LossSpec, OutlierParams, SigmaSpec};
pub use error::CliError;
pub use experiments::{
    attention_experiment, density_experiment, equivalence_check, equivalence_report,
    max_rel_error, run_attention_experiment, run_density_experiment, run_equivalence_check,
    run_sweep, AttentionMetricsRecord, DensityOutcome, EquivalenceReport, MetricsRecord,
    EQUIVALENCE_TOLERANCE,
};
pub use output::{artifact_path, write_json, DensityRow, DensityTable};
pub use rng::PortableRng;
pub use sampling::{contaminate_tail_rows, normal_matrix, sample_contaminated, SampleLabel};
