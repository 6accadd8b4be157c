//! Stochastic PCA on compact eigendecompositions.

pub mod eig;
pub mod project;
pub mod solvers;
pub mod unrelax;

pub use eig::{largest_principal_angle, principal_cosines, EigState};
pub use project::{project_capped, project_relative_entropy, project_trace_simplex};
pub use solvers::{
    capped_msg_step, empirical_second_moment, evaluate_objective, incremental_step, msg_step, optimum, pca_train,
    power_step, saa_solve, warmuth_step, ConvergenceDetector, EmpiricalSource, PcaAlgorithm, PcaConfig, PcaRun,
    PcaSolver, Reference, SampleSource, StepSchedule,
};
pub use unrelax::{reconstruct, unrelax_decompose, MixtureComponent};
