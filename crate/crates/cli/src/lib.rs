//! Helix experiments, comparison baselines and the plumbing behind the
//! `lockern` command-line tool.

pub mod baselines;
pub mod experiment;
pub mod helix;
pub mod tools;

pub use baselines::{
    bernstein_demo, bernstein_scaled_error, density_corrected_estimate, heat_kernel_baseline,
    heat_kernel_normalized,
};
pub use experiment::{
    cumulative_histogram, helix_oracle, run_experiment, trial_rng, EvalMode, ExperimentConfig,
    ExperimentReport, OracleRun, TrialReport,
};
pub use helix::{gen_training, helix_target, HelixSpec, NoiseModel, HELIX_LENGTH};
