//! Multi-fidelity Gaussian-process emulation.
//!
//! Each kernel in a set gives one hierarchical-kriging chain, in which the
//! trend of every level is the scaled predictive mean of the level below.
//! The chains are averaged with weights proportional to their marginal
//! likelihoods. The disagreement between chains drives sequential design.

pub mod adaptive;
pub mod benchmarks;
pub mod data;
pub mod demo;
pub mod design;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod kernels;
pub mod numerics;
pub mod optimize;

pub use adaptive::{
    acquire_location, adaptive_loop, best_gain_ratio, candidate_set, information_gain, select_fidelity,
    AcquisitionStep, AdaptiveOutcome, AdaptiveSettings, CostModel, FidelityPolicy,
};
pub use benchmarks::{eval_benchmark, rmse, Benchmark, BenchmarkId, Fidelity};
pub use data::Dataset;
pub use design::{build_design, lhs_maximin, DesignPair};
pub use ensemble::{bma_weights, fit_chain, fit_ensemble, EnsemblePrediction, HKChain, MFEnsemble};
pub use error::{Error, Result};
pub use experiment::{emit_report, run_adaptive, run_one_shot, ExperimentConfig, ExperimentRecord, Sparsity};
pub use gp::{fit_gp, FittedLevel, TrendSpec};
pub use kernels::{default_kernel_set, gram_matrix, kernel_eval, KernelConfig, KernelParams};
pub use numerics::{cholesky_spd, JitterSchedule, SpdFactor};
pub use optimize::OptimizerSettings;
