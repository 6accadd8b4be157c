//! Post-hoc sparsification: given a dense classifier `g`, find a sparse `g~`
//! whose margins track `min(1, y g(x))` to within `epsilon` on every point
//! that `g` classifies correctly.

use crate::error::{Error, Result};
use crate::kernel::{DualState, KernelOracle};
use crate::metrics::{MetricKind, MetricLog, MetricRecord};
use crate::svm::model::SparseClassifier;

/// The problem of mimicking a dense classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsifyProblem {
    /// `min(1, y_i (g(x_i) + b))` for every example.
    pub margins: Vec<f64>,
    /// Targets `h_i = margins_i - y_i b`; equal to `margins` without a bias.
    pub h: Vec<f64>,
    /// Indices with `y_i (g(x_i) + b) > 0`, increasing.
    pub active: Vec<usize>,
    pub bias: Option<f64>,
    pub reference_norm_sq: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SparsifyMode {
    Basic,
    Aggressive,
    BiasLearning,
}

impl SparsifyMode {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "basic" => Ok(Self::Basic),
            "aggressive" => Ok(Self::Aggressive),
            "bias_learning" => Ok(Self::BiasLearning),
            other => Err(Error::Config(format!("unknown sparsify mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparsifyConfig {
    pub eta: f64,
    pub epsilon: f64,
    pub mode: SparsifyMode,
    /// Defaults to `8 * ceil(4 ||w||^2)`.
    pub max_iters: Option<usize>,
    /// Rescale `w~` back onto the ball `||w~|| <= ||w||` after each step.
    pub project_norm: bool,
}

impl Default for SparsifyConfig {
    fn default() -> Self {
        Self {
            eta: 0.5,
            epsilon: 0.5,
            mode: SparsifyMode::Basic,
            max_iters: None,
            project_norm: false,
        }
    }
}

impl SparsifyConfig {
    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1], got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Guaranteed iteration count `ceil(4 ||w||^2)` for `eta = epsilon = 1/2`.
pub fn iteration_bound(reference_norm_sq: f64) -> usize {
    (4.0 * reference_norm_sq).ceil() as usize
}

/// Builds the mimicking problem from the dense solution's responses
/// `c_i = y_i g(x_i)` and optional bias `b`.
pub fn build_problem(dense: &DualState, oracle: &KernelOracle<'_>, bias: Option<f64>) -> Result<SparsifyProblem> {
    let data = oracle.data();
    if dense.len() != data.len() {
        return Err(Error::contract("dense state and dataset differ in length"));
    }
    let b = bias.unwrap_or(0.0);
    let mut margins = Vec::with_capacity(data.len());
    let mut h = Vec::with_capacity(data.len());
    let mut active = Vec::new();
    for (i, &c) in dense.responses.iter().enumerate() {
        let y = data.y(i);
        let m = c + y * b;
        if m > 0.0 {
            active.push(i);
        }
        margins.push(m.min(1.0));
        h.push(m.min(1.0) - y * b);
    }
    if active.is_empty() {
        return Err(Error::NothingToMimic);
    }
    Ok(SparsifyProblem {
        margins,
        h,
        active,
        bias,
        reference_norm_sq: dense.norm_sq,
    })
}

/// `min(1, max(0, 1/2 - z))`.
pub fn slant_loss(z: f64) -> f64 {
    (0.5 - z).clamp(0.0, 1.0)
}

/// Result of a sparsification run.
#[derive(Clone, Debug)]
pub struct SparsifyResult {
    pub alpha: Vec<f64>,
    /// Learned bias (bias-learning mode) or the dense bias carried over.
    pub bias: Option<f64>,
    /// Objective value at termination.
    pub objective: f64,
    pub iterations: usize,
    /// Indices stepped on, in order; two per iteration in bias-learning mode.
    pub steps: Vec<usize>,
    pub log: MetricLog,
}

impl SparsifyResult {
    pub fn support_size(&self) -> usize {
        self.alpha.iter().filter(|&&a| a != 0.0).count()
    }

    pub fn classifier(&self, oracle: &KernelOracle<'_>) -> SparseClassifier {
        SparseClassifier::from_coefficients(oracle.data(), &self.alpha, oracle.spec(), self.bias)
    }
}

/// Largest violation over `candidates`, lowest index on ties.
fn most_violating(
    candidates: impl Iterator<Item = usize>,
    targets: &[f64],
    responses: &[f64],
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for i in candidates {
        let v = targets[i] - responses[i];
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((i, v));
        }
    }
    best
}

/// Subgradient descent on `f(w~) = max_{i active} (h_i - y_i g~(x_i))`.
///
/// In bias-learning mode the targets are the unshifted margins and the bias
/// `b~` is chosen in closed form: with `V+` and `V-` the largest unbiased
/// violations among active positives and negatives, the biased violations are
/// `V+ - b~` and `V- + b~`, which balance at `b~ = (V+ - V-) / 2` and give
/// `f = (V+ + V-) / 2`. Each iteration then steps on both maximizers.
pub fn sparsify(problem: &SparsifyProblem, oracle: &KernelOracle<'_>, config: &SparsifyConfig) -> Result<SparsifyResult> {
    config.validate()?;
    let data = oracle.data();
    let n = data.len();
    if problem.h.len() != n {
        return Err(Error::contract("problem and dataset differ in length"));
    }
    let learn_bias = config.mode == SparsifyMode::BiasLearning;
    let (pos, neg): (Vec<usize>, Vec<usize>) = problem.active.iter().partition(|&&i| data.y(i) > 0.0);
    if learn_bias && (pos.is_empty() || neg.is_empty()) {
        return Err(Error::contract("bias learning needs active examples of both classes"));
    }
    let targets = if learn_bias { &problem.margins } else { &problem.h };
    let max_iters = config
        .max_iters
        .unwrap_or(8 * iteration_bound(problem.reference_norm_sq).max(1));
    let norm_cap = problem.reference_norm_sq.sqrt();

    let mut state = DualState::zeros(n);
    let mut steps = Vec::new();
    let mut log = MetricLog::new(MetricKind::Svm);
    let mut best = f64::INFINITY;
    let mut next_checkpoint = 1usize;

    for iter in 0..=max_iters {
        let (objective, bias) = if learn_bias {
            let (_, vp) = most_violating(pos.iter().copied(), targets, &state.responses).expect("nonempty");
            let (_, vn) = most_violating(neg.iter().copied(), targets, &state.responses).expect("nonempty");
            (0.5 * (vp + vn), Some(0.5 * (vp - vn)))
        } else {
            let (_, v) = most_violating(problem.active.iter().copied(), targets, &state.responses).expect("nonempty");
            (v, problem.bias)
        };
        best = best.min(objective);
        let done = objective <= config.epsilon;
        if iter == next_checkpoint || done || iter == max_iters {
            if iter > 0 || done {
                log.push(MetricRecord::new(
                    iter as u64,
                    oracle.eval_count() as f64,
                    objective,
                    state.support_size() as f64,
                ));
            }
            if iter == next_checkpoint {
                next_checkpoint *= 2;
            }
        }
        if done {
            return Ok(SparsifyResult {
                alpha: state.alpha,
                bias,
                objective,
                iterations: iter,
                steps,
                log,
            });
        }
        if iter == max_iters {
            break;
        }

        let chosen: Vec<usize> = match config.mode {
            SparsifyMode::Basic => {
                vec![most_violating(problem.active.iter().copied(), targets, &state.responses).expect("nonempty").0]
            }
            SparsifyMode::Aggressive => {
                let reuse = most_violating(
                    problem
                        .active
                        .iter()
                        .copied()
                        .filter(|&i| state.alpha[i] != 0.0),
                    targets,
                    &state.responses,
                )
                .filter(|&(_, v)| v > config.epsilon);
                match reuse {
                    Some((i, _)) => vec![i],
                    None => vec![most_violating(problem.active.iter().copied(), targets, &state.responses)
                        .expect("nonempty")
                        .0],
                }
            }
            SparsifyMode::BiasLearning => vec![
                most_violating(pos.iter().copied(), targets, &state.responses).expect("nonempty").0,
                most_violating(neg.iter().copied(), targets, &state.responses).expect("nonempty").0,
            ],
        };
        for i in chosen {
            state.response_update(oracle, i, config.eta)?;
            steps.push(i);
        }
        if config.project_norm && state.norm() > norm_cap {
            let factor = norm_cap / state.norm();
            state.rescale(factor)?;
            state.norm_sq = norm_cap * norm_cap;
        }
    }
    Err(Error::NonConvergence {
        iters: max_iters,
        epsilon: config.epsilon,
        best,
    })
}

/// Objective value of `alpha_tilde` computed from scratch. With `b_tilde` the
/// unshifted margins are compared against `y_i (g~(x_i) + b~)`; without it,
/// the targets `h` against `y_i g~(x_i)`.
pub fn evaluate_f(
    problem: &SparsifyProblem,
    alpha_tilde: &[f64],
    oracle: &KernelOracle<'_>,
    b_tilde: Option<f64>,
) -> Result<f64> {
    let data = oracle.data();
    let support: Vec<usize> = (0..alpha_tilde.len()).filter(|&j| alpha_tilde[j] != 0.0).collect();
    let mut worst = f64::NEG_INFINITY;
    for &i in &problem.active {
        let mut g = 0.0;
        for &j in &support {
            g += alpha_tilde[j] * data.y(j) * oracle.eval(j, i)?;
        }
        let y = data.y(i);
        let v = match b_tilde {
            Some(b) => problem.margins[i] - y * (g + b),
            None => problem.h[i] - y * g,
        };
        worst = worst.max(v);
    }
    Ok(worst)
}
