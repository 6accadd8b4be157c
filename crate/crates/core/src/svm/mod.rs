//! Kernel SVM training: the stochastic batch perceptron, baseline solvers and
//! post-hoc sparsification.

pub mod baselines;
pub mod model;
pub mod sbp;
pub mod sparsify;
pub mod water;

pub use baselines::{baseline_train, BaselineAlgorithm, BaselineConfig, BaselineRun, TrainedBaseline};
pub use model::{Classifier, ErrorProbe, SparseClassifier, SupportVector};
pub use sparsify::{build_problem, evaluate_f, slant_loss, sparsify, SparsifyConfig, SparsifyMode, SparsifyProblem, SparsifyResult};
pub use sbp::{sbp_train, Sbp, SbpConfig, SbpModel};
pub use water::{find_gamma, find_gamma_and_bias, find_gamma_partition, sample_support_index, water_volume, WaterLevel};
