//! Stochastic optimization for kernel support vector machines and streaming
//! principal component analysis.
//!
//! The [`svm`] module holds the stochastic batch perceptron trainer, the
//! comparison solvers and the support-set sparsifier. The [`pca`] module
//! holds the streaming PCA solvers, all of which work on a compact
//! eigendecomposition ([`EigState`]). [`experiment`] drives both from flat
//! configuration files and writes CSV logs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod experiment;
pub mod kernel;
pub mod metrics;
pub mod pca;
pub mod rng;
pub mod svm;
pub mod synthetic;

pub use data::{parse_libsvm, write_libsvm, Dataset, Label, SparseVector};
pub use error::{Error, Result};
pub use experiment::{run_experiment, run_sweep, ExperimentConfig, ExperimentReport, Task};
pub use kernel::{DualState, KernelOracle, KernelSpec};
pub use metrics::{MetricKind, MetricLog, MetricRecord};
pub use pca::{pca_train, EigState, PcaAlgorithm, PcaConfig, PcaRun, SampleSource, StepSchedule};
pub use rng::{stream, Purpose, Rng};
pub use svm::{
    baseline_train, sbp_train, sparsify, BaselineAlgorithm, BaselineConfig, Classifier, SbpConfig, SbpModel,
    SparseClassifier, SparsifyConfig, SparsifyResult,
};
pub use synthetic::{SyntheticFamily, SyntheticSource, SyntheticSpec};
