//! Comparison solvers for the kernel SVM: norm-constrained SGD, Pegasos, dual
//! coordinate ascent (SDCA and SMO-style selection, optionally with an
//! unregularized bias), the kernel Perceptron, and random Fourier features.
//!
//! All kernelized solvers keep `w = sum_i alpha_i y_i Phi(x_i)` in a
//! [`DualState`]; one epoch is `n` steps.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Dataset, SparseVector};
use crate::error::{Error, Result};
use crate::kernel::{DualState, KernelOracle, KernelSpec};
use crate::metrics::{Checkpoints, MetricKind, MetricLog, MetricRecord};
use crate::rng::{stream, Purpose, Rng};
use crate::svm::model::{Classifier, ErrorProbe, SparseClassifier};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineAlgorithm {
    SgdNorm,
    Pegasos,
    Sdca,
    Smo,
    Perceptron,
    Rff,
}

impl BaselineAlgorithm {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "sgd_norm" => Self::SgdNorm,
            "pegasos" => Self::Pegasos,
            "sdca" => Self::Sdca,
            "smo" => Self::Smo,
            "perceptron" => Self::Perceptron,
            "rff" => Self::Rff,
            other => return Err(Error::Config(format!("unknown baseline {other:?}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::SgdNorm => "sgd_norm",
            Self::Pegasos => "pegasos",
            Self::Sdca => "sdca",
            Self::Smo => "smo",
            Self::Perceptron => "perceptron",
            Self::Rff => "rff",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineConfig {
    pub algorithm: BaselineAlgorithm,
    /// Norm cap for `sgd_norm`.
    pub r: f64,
    /// Regularization for `pegasos`, `sdca`, `smo` and the linear solver
    /// behind `rff`.
    pub lambda: f64,
    pub epochs: u64,
    /// Number of Fourier feature pairs for `rff`.
    pub features: usize,
    /// Unregularized bias for `sdca` and `smo`.
    pub with_bias: bool,
    pub seed: u64,
}

impl BaselineConfig {
    pub fn new(algorithm: BaselineAlgorithm) -> Self {
        Self {
            algorithm,
            r: 1.0,
            lambda: 1e-2,
            epochs: 1,
            features: 64,
            with_bias: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        use BaselineAlgorithm::*;
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        match self.algorithm {
            SgdNorm if !(self.r > 0.0) => Err(Error::Config(format!("R must be positive, got {}", self.r))),
            Pegasos | Sdca | Smo | Rff if !(self.lambda > 0.0) => {
                Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)))
            }
            Rff if self.features == 0 => Err(Error::Config("rff needs at least one feature pair".into())),
            _ => Ok(()),
        }
    }
}

/// Selection rule for dual coordinate methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectMode {
    Uniform,
    MaxGain,
}

/// Upper box bound `1 / (lambda n)` on each dual coefficient.
pub fn box_cap(lambda: f64, n: usize) -> f64 {
    1.0 / (lambda * n as f64)
}

/// One step of SGD on the norm-constrained hinge objective. Returns the
/// sampled index.
pub fn sgd_norm_step(state: &mut DualState, oracle: &KernelOracle<'_>, r: f64, eta: f64, rng: &mut Rng) -> Result<usize> {
    if !(r > 0.0) {
        return Err(Error::contract(format!("R must be positive, got {r}")));
    }
    let i = rng.random_range(0..state.len());
    if state.responses[i] < 1.0 {
        state.response_update(oracle, i, eta)?;
    }
    let norm = state.norm();
    if norm > r {
        state.rescale(r / norm)?;
        state.norm_sq = r * r;
    }
    Ok(i)
}

/// One Pegasos step: shrink by `1 - eta lambda`, then a hinge step on a
/// uniformly sampled example.
pub fn pegasos_step(state: &mut DualState, oracle: &KernelOracle<'_>, lambda: f64, eta: f64, rng: &mut Rng) -> Result<usize> {
    if !(lambda > 0.0) || !(eta * lambda < 1.0) {
        return Err(Error::contract(format!(
            "Pegasos needs lambda > 0 and eta * lambda < 1, got lambda={lambda}, eta={eta}"
        )));
    }
    state.rescale(1.0 - eta * lambda)?;
    let i = rng.random_range(0..state.len());
    if state.responses[i] < 1.0 {
        state.response_update(oracle, i, eta)?;
    }
    Ok(i)
}

/// Exact maximization of the dual along coordinate `i`, clipped to the box.
/// Returns the realized change in `alpha_i`.
pub fn dual_coordinate_step(state: &mut DualState, oracle: &KernelOracle<'_>, lambda: f64, i: usize) -> Result<f64> {
    let kii = oracle.diag(i)?;
    if !(kii > 0.0) {
        return Err(Error::Degenerate(format!("example {i} has K(x, x) = 0")));
    }
    let cap = box_cap(lambda, state.len());
    let delta = coordinate_delta(state.alpha[i], state.responses[i], kii, cap);
    if delta != 0.0 {
        state.response_update(oracle, i, delta)?;
        state.alpha[i] = state.alpha[i].clamp(0.0, cap);
    }
    Ok(delta)
}

fn coordinate_delta(alpha: f64, response: f64, kii: f64, cap: f64) -> f64 {
    let target = (alpha + (1.0 - response) / kii).clamp(0.0, cap);
    target - alpha
}

/// Dual gain `delta (1 - c_i) - delta^2 K_ii / 2` of the clipped coordinate
/// update.
fn coordinate_gain(alpha: f64, response: f64, kii: f64, cap: f64) -> f64 {
    if !(kii > 0.0) {
        return 0.0;
    }
    let delta = coordinate_delta(alpha, response, kii, cap);
    delta * (1.0 - response) - 0.5 * delta * delta * kii
}

/// Joint update of `alpha_i += y_i delta`, `alpha_j -= y_j delta`, which keeps
/// `sum_i y_i alpha_i` fixed, with `delta` maximizing the dual over the box.
/// Returns the realized `delta`.
pub fn dual_pair_step_biased(
    state: &mut DualState,
    oracle: &KernelOracle<'_>,
    lambda: f64,
    i: usize,
    j: usize,
) -> Result<f64> {
    if i == j {
        return Err(Error::contract("a working pair needs two distinct indices"));
    }
    let data = oracle.data();
    let cap = box_cap(lambda, state.len());
    let row_i = oracle.row(i)?;
    let kjj = oracle.diag(j)?;
    let (kii, kij) = (row_i[i], row_i[j]);
    let curvature = kii + kjj - 2.0 * kij;
    if !(curvature > 0.0) {
        return Err(Error::Degenerate(format!(
            "examples {i} and {j} coincide in feature space"
        )));
    }
    let (yi, yj) = (data.y(i), data.y(j));
    let slope = yi * (1.0 - state.responses[i]) - yj * (1.0 - state.responses[j]);
    let (lo_i, hi_i) = signed_room(state.alpha[i], yi, cap);
    let (lo_j, hi_j) = signed_room(state.alpha[j], -yj, cap);
    let delta = (slope / curvature).clamp(lo_i.max(lo_j), hi_i.min(hi_j));
    if delta != 0.0 {
        state.apply_row(data, i, yi * delta, &row_i);
        state.response_update(oracle, j, -yj * delta)?;
        state.alpha[i] = state.alpha[i].clamp(0.0, cap);
        state.alpha[j] = state.alpha[j].clamp(0.0, cap);
    }
    Ok(delta)
}

/// Range of `delta` keeping `alpha + sign * delta` inside `[0, cap]`.
fn signed_room(alpha: f64, sign: f64, cap: f64) -> (f64, f64) {
    if sign > 0.0 {
        (-alpha, cap - alpha)
    } else {
        (alpha - cap, alpha)
    }
}

/// Picks a coordinate: uniformly, or the one whose clipped update gains the
/// most dual objective (lowest index on ties). `diag` holds `K(x_i, x_i)`.
pub fn select_working_index(state: &DualState, diag: &[f64], cap: f64, mode: SelectMode, rng: &mut Rng) -> usize {
    match mode {
        SelectMode::Uniform => rng.random_range(0..state.len()),
        SelectMode::MaxGain => {
            let mut best = 0;
            let mut best_gain = f64::NEG_INFINITY;
            for (i, &kii) in diag.iter().enumerate().take(state.len()) {
                let g = coordinate_gain(state.alpha[i], state.responses[i], kii, cap);
                if g > best_gain {
                    best_gain = g;
                    best = i;
                }
            }
            best
        }
    }
}

/// Picks a working pair for the biased dual. `MaxGain` returns the maximal
/// violating pair, or `None` when no pair violates optimality by more than
/// `1e-12`; `Uniform` returns two distinct random indices.
pub fn select_working_pair(
    state: &DualState,
    data: &Dataset,
    cap: f64,
    mode: SelectMode,
    rng: &mut Rng,
) -> Option<(usize, usize)> {
    let n = state.len();
    if n < 2 {
        return None;
    }
    match mode {
        SelectMode::Uniform => {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            Some((i, j))
        }
        SelectMode::MaxGain => {
            let mut up: Option<(usize, f64)> = None;
            let mut low: Option<(usize, f64)> = None;
            for k in 0..n {
                let (a, y) = (state.alpha[k], data.y(k));
                let g = y * (1.0 - state.responses[k]);
                let can_raise = if y > 0.0 { a < cap } else { a > 0.0 };
                let can_lower = if y > 0.0 { a > 0.0 } else { a < cap };
                if can_raise && up.is_none_or(|(_, v)| g > v) {
                    up = Some((k, g));
                }
                if can_lower && low.is_none_or(|(_, v)| g < v) {
                    low = Some((k, g));
                }
            }
            match (up, low) {
                (Some((i, gi)), Some((j, gj))) if i != j && gi - gj > 1e-12 => Some((i, j)),
                _ => None,
            }
        }
    }
}

/// Bias of the biased dual: the average of `y_i - <w, Phi(x_i)>` over
/// coordinates strictly inside the box, or the midpoint of the interval of
/// biases consistent with the optimality conditions when none is interior.
pub fn recover_bias(state: &DualState, data: &Dataset, cap: f64) -> f64 {
    let tol = 1e-8;
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..state.len() {
        let (a, y, c) = (state.alpha[i], data.y(i), state.responses[i]);
        let b = y * (1.0 - c);
        if a > tol && a < cap - tol {
            sum += b;
            count += 1;
        } else if (a <= tol) == (y > 0.0) {
            lo = lo.max(b);
        } else {
            hi = hi.min(b);
        }
    }
    if count > 0 {
        return sum / count as f64;
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => 0.0,
    }
}

/// Output of the kernel Perceptron.
#[derive(Clone, Debug)]
pub struct PerceptronModel {
    pub alpha: Vec<f64>,
    pub mistakes: usize,
    /// Step whose hypothesis was drawn for the online-to-batch classifier.
    pub selected_step: usize,
    pub selected_alpha: Vec<f64>,
    pub log: MetricLog,
}

/// Kernel Perceptron over `passes` shuffled passes. Each prediction costs one
/// kernel evaluation per current support vector.
pub fn perceptron_train(oracle: &KernelOracle<'_>, passes: u64, seed: u64) -> Result<PerceptronModel> {
    let data = oracle.data();
    let n = data.len();
    let total = n as u64 * passes;
    let mut alpha = vec![0.0; n];
    let mut support: Vec<usize> = Vec::new();
    let mut log = MetricLog::new(MetricKind::Svm);
    if n == 0 {
        return Ok(PerceptronModel {
            alpha,
            mistakes: 0,
            selected_step: 0,
            selected_alpha: Vec::new(),
            log,
        });
    }
    let mut shuffle = stream(seed, Purpose::Shuffle);
    let selected_step = stream(seed, Purpose::Select).random_range(0..total) as usize;
    let mut selected_alpha = Vec::new();
    let mut checkpoints = Checkpoints::geometric(total);
    let mut order: Vec<usize> = (0..n).collect();
    let mut mistakes = 0usize;
    let mut t = 0u64;
    for _ in 0..passes {
        order.shuffle(&mut shuffle);
        for &i in &order {
            if t as usize == selected_step {
                selected_alpha = alpha.clone();
            }
            t += 1;
            let mut score = 0.0;
            for &j in &support {
                score += alpha[j] * data.y(j) * oracle.eval(j, i)?;
            }
            if data.y(i) * score <= 0.0 {
                if alpha[i] == 0.0 {
                    support.push(i);
                }
                alpha[i] += 1.0;
                mistakes += 1;
            }
            if checkpoints.hit(t) {
                log.push(MetricRecord::new(
                    t,
                    oracle.eval_count() as f64,
                    mistakes as f64 / t as f64,
                    support.len() as f64,
                ));
            }
        }
    }
    Ok(PerceptronModel {
        alpha,
        mistakes,
        selected_step,
        selected_alpha,
        log,
    })
}

/// Random Fourier features `[cos(<v, x> / sigma), sin(<v, x> / sigma), ...] /
/// sqrt(D)` for the Gaussian kernel `exp(-||x - x'||^2 / (2 sigma^2))`.
pub fn rff_map(x: &SparseVector, directions: &[Vec<f64>], sigma: f64) -> Vec<f64> {
    let scale = 1.0 / (directions.len() as f64).sqrt();
    let mut out = Vec::with_capacity(2 * directions.len());
    for v in directions {
        let z = x.dot_dense(v) / sigma;
        out.push(scale * z.cos());
        out.push(scale * z.sin());
    }
    out
}

/// A seeded draw of Fourier directions for a Gaussian kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierFeatures {
    pub directions: Vec<Vec<f64>>,
    pub sigma: f64,
}

impl FourierFeatures {
    pub fn new(kernel: KernelSpec, dim: usize, pairs: usize, seed: u64) -> Result<Self> {
        let rate = kernel
            .gaussian_rate()
            .ok_or_else(|| Error::Config("random Fourier features need a Gaussian kernel".into()))?;
        let mut rng = stream(seed, Purpose::Init);
        let directions = (0..pairs)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        Ok(Self {
            directions,
            sigma: (0.5 / rate).sqrt(),
        })
    }

    pub fn map(&self, x: &SparseVector) -> Vec<f64> {
        rff_map(x, &self.directions, self.sigma)
    }
}

/// Linear classifier on random Fourier features.
#[derive(Clone, Debug, PartialEq)]
pub struct RffModel {
    pub features: FourierFeatures,
    pub w: Vec<f64>,
}

impl Classifier for RffModel {
    fn decision(&self, x: &SparseVector) -> f64 {
        self.features.map(x).iter().zip(&self.w).map(|(a, b)| a * b).sum()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of a baseline run.
#[derive(Clone, Debug)]
pub enum TrainedBaseline {
    Kernel(SparseClassifier),
    Rff(RffModel),
}

impl Classifier for TrainedBaseline {
    fn decision(&self, x: &SparseVector) -> f64 {
        match self {
            TrainedBaseline::Kernel(c) => c.decision(x),
            TrainedBaseline::Rff(m) => m.decision(x),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BaselineRun {
    pub model: TrainedBaseline,
    pub log: MetricLog,
    /// Largest `||w^(t)||` over the run (kernel solvers only).
    pub max_iterate_norm: f64,
}

fn mean_hinge(responses: &[f64]) -> f64 {
    responses.iter().map(|c| (1.0 - c).max(0.0)).sum::<f64>() / responses.len() as f64
}

/// Trains the configured baseline for `epochs * n` steps. The logged objective
/// is the mean hinge loss of the averaged iterate (`sgd_norm`), the primal
/// objective (`pegasos`, `rff`), the dual objective (`sdca`, `smo`) or the
/// online mistake rate (`perceptron`). For `rff` the cost column counts
/// `d`-dimensional inner products spent building the features.
pub fn baseline_train(
    oracle: &KernelOracle<'_>,
    config: &BaselineConfig,
    mut test_error: Option<ErrorProbe<'_>>,
) -> Result<BaselineRun> {
    config.validate()?;
    let data = oracle.data();
    let n = data.len();
    if n == 0 {
        return Err(Error::contract("cannot train on an empty dataset"));
    }
    let spec = oracle.spec();
    let kernel_model = |alpha: &[f64], bias: Option<f64>| SparseClassifier::from_coefficients(data, alpha, spec, bias);

    match config.algorithm {
        BaselineAlgorithm::Perceptron => {
            let p = perceptron_train(oracle, config.epochs, config.seed)?;
            let mut log = p.log;
            let model = kernel_model(&p.alpha, None);
            if let (Some(f), Some(last)) = (test_error.as_deref_mut(), log.records.last_mut()) {
                last.error = f(&model);
            }
            Ok(BaselineRun {
                model: TrainedBaseline::Kernel(model),
                log,
                max_iterate_norm: f64::NAN,
            })
        }
        BaselineAlgorithm::Rff => rff_train(data, spec, config, test_error),
        _ => kernel_baseline(oracle, config, test_error),
    }
}

fn kernel_baseline(oracle: &KernelOracle<'_>, config: &BaselineConfig, mut test_error: Option<ErrorProbe<'_>>) -> Result<BaselineRun> {
    use BaselineAlgorithm::*;
    let data = oracle.data();
    let n = data.len();
    let total = n as u64 * config.epochs;
    let cap = box_cap(config.lambda, n);
    let mut rng = stream(config.seed, Purpose::Sampling);
    let mut state = DualState::zeros(n);
    let mut alpha_sum = vec![0.0; n];
    let mut response_sum = vec![0.0; n];
    let mut log = MetricLog::new(MetricKind::Svm);
    let mut checkpoints = Checkpoints::geometric(total);
    let mut max_norm: f64 = 0.0;
    if config.with_bias && matches!(config.algorithm, Sdca | Smo) && !data.has_both_classes() {
        return Err(Error::contract("training with a bias needs both classes"));
    }
    let diag: Vec<f64> = if config.algorithm == Smo && !config.with_bias {
        (0..n).map(|i| oracle.diag(i)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut stalled = false;

    for t in 1..=total {
        if !stalled {
            match config.algorithm {
                SgdNorm => {
                    let eta = config.r * (2.0 / t as f64).sqrt();
                    sgd_norm_step(&mut state, oracle, config.r, eta, &mut rng)?;
                }
                Pegasos => {
                    let eta = 1.0 / (config.lambda * (t + 1) as f64);
                    pegasos_step(&mut state, oracle, config.lambda, eta, &mut rng)?;
                }
                Sdca | Smo => {
                    let mode = if config.algorithm == Sdca {
                        SelectMode::Uniform
                    } else {
                        SelectMode::MaxGain
                    };
                    if config.with_bias {
                        match select_working_pair(&state, data, cap, mode, &mut rng) {
                            Some((i, j)) => match dual_pair_step_biased(&mut state, oracle, config.lambda, i, j) {
                                Ok(_) | Err(Error::Degenerate(_)) => {}
                                Err(e) => return Err(e),
                            },
                            None => stalled = true,
                        }
                    } else {
                        let i = select_working_index(&state, &diag, cap, mode, &mut rng);
                        match dual_coordinate_step(&mut state, oracle, config.lambda, i) {
                            Ok(delta) => stalled = mode == SelectMode::MaxGain && delta == 0.0,
                            Err(Error::Degenerate(_)) => {}
                            Err(e) => return Err(e),
                        }
                    }
                }
                Perceptron | Rff => unreachable!("handled by baseline_train"),
            }
        }
        max_norm = max_norm.max(state.norm());
        if config.algorithm == SgdNorm {
            alpha_sum.iter_mut().zip(&state.alpha).for_each(|(s, a)| *s += a);
            response_sum.iter_mut().zip(&state.responses).for_each(|(s, c)| *s += c);
        }
        if checkpoints.hit(t) {
            let (alpha, bias, objective) = match config.algorithm {
                SgdNorm => {
                    let inv = 1.0 / t as f64;
                    let alpha: Vec<f64> = alpha_sum.iter().map(|a| a * inv).collect();
                    let resp: Vec<f64> = response_sum.iter().map(|c| c * inv).collect();
                    (alpha, None, mean_hinge(&resp))
                }
                Pegasos => (
                    state.alpha.clone(),
                    None,
                    0.5 * config.lambda * state.norm_sq + mean_hinge(&state.responses),
                ),
                _ => {
                    let bias = config.with_bias.then(|| recover_bias(&state, data, cap));
                    (state.alpha.clone(), bias, state.dual_objective())
                }
            };
            let size = alpha.iter().filter(|&&a| a != 0.0).count();
            let mut rec = MetricRecord::new(t, oracle.eval_count() as f64, objective, size as f64);
            if let Some(f) = test_error.as_deref_mut() {
                rec.error = f(&SparseClassifier::from_coefficients(data, &alpha, oracle.spec(), bias));
            }
            log.push(rec);
            if t == total {
                let model = SparseClassifier::from_coefficients(data, &alpha, oracle.spec(), bias);
                return Ok(BaselineRun {
                    model: TrainedBaseline::Kernel(model),
                    log,
                    max_iterate_norm: max_norm,
                });
            }
        }
    }
    unreachable!("the final step is always a checkpoint")
}

/// Builds `config.features` Fourier pairs, then runs Pegasos on the linearized
/// problem for `config.epochs` epochs.
fn rff_train(
    data: &Dataset,
    kernel: KernelSpec,
    config: &BaselineConfig,
    test_error: Option<ErrorProbe<'_>>,
) -> Result<BaselineRun> {
    let features = FourierFeatures::new(kernel, data.dim(), config.features, config.seed)?;
    let mapped: Vec<Vec<f64>> = data.examples().iter().map(|x| features.map(x)).collect();
    let n = data.len();
    let mut rng = stream(config.seed, Purpose::Sampling);
    let mut w = vec![0.0; 2 * config.features];
    let lambda = config.lambda;
    let total = n as u64 * config.epochs;
    for t in 1..=total {
        let eta = 1.0 / (lambda * (t + 1) as f64);
        let shrink = 1.0 - eta * lambda;
        w.iter_mut().for_each(|v| *v *= shrink);
        let i = rng.random_range(0..n);
        let y = data.y(i);
        if y * dot(&w, &mapped[i]) < 1.0 {
            w.iter_mut().zip(&mapped[i]).for_each(|(v, f)| *v += eta * y * f);
        }
    }
    let hinge: f64 = (0..n)
        .map(|i| (1.0 - data.y(i) * dot(&w, &mapped[i])).max(0.0))
        .sum::<f64>()
        / n as f64;
    let objective = 0.5 * lambda * dot(&w, &w) + hinge;
    let model = RffModel { features, w };
    let mut log = MetricLog::new(MetricKind::Svm);
    let mut rec = MetricRecord::new(total, (config.features * n) as f64, objective, (2 * config.features) as f64);
    if let Some(f) = test_error {
        rec.error = f(&model);
    }
    log.push(rec);
    Ok(BaselineRun {
        model: TrainedBaseline::Rff(model),
        log,
        max_iterate_norm: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::rng::Rng;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn ds(rows: &[Vec<f64>], ys: &[f64]) -> Dataset {
        Dataset::from_dense(rows, ys).unwrap()
    }

    fn random_problem(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ys: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        ds(&rows, &ys)
    }

    #[test]
    fn sgd_norm_projects() {
        let d = ds(&[vec![1.0]], &[1.0]);
        let k = KernelOracle::new(KernelSpec::Linear, &d).unwrap();
        let mut rng = stream(0, Purpose::Sampling);

        let mut s = DualState::zeros(1);
        sgd_norm_step(&mut s, &k, 10.0, 1.0, &mut rng).unwrap();
        assert_eq!(s.responses, vec![1.0]);

        let mut s = DualState::zeros(1);
        sgd_norm_step(&mut s, &k, 2.0, 3.0, &mut rng).unwrap();
        assert_relative_eq!(s.responses[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(s.norm(), 2.0, epsilon = 1e-12);

        let before = k.eval_count();
        sgd_norm_step(&mut s, &k, 2.0, 3.0, &mut rng).unwrap();
        assert_eq!(k.eval_count(), before);
        assert_relative_eq!(s.responses[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn pegasos_shrinks_then_steps() {
        let d = ds(&[vec![1.0]], &[1.0]);
        let k = KernelOracle::new(KernelSpec::Linear, &d).unwrap();
        let mut rng = stream(0, Purpose::Sampling);
        let mut s = DualState::zeros(1);
        assert!(pegasos_step(&mut s, &k, 1.0, 1.0, &mut rng).is_err());
        s.response_update(&k, 0, 1.0).unwrap();
        pegasos_step(&mut s, &k, 1.0, 0.5, &mut rng).unwrap();
        // alpha 1 -> 0.5, response 0.5 < 1 so alpha += 0.5.
        assert_relative_eq!(s.alpha[0], 1.0, epsilon = 1e-12);
        let mut z = DualState::zeros(1);
        pegasos_step(&mut z, &k, 1.0, 0.5, &mut rng).unwrap();
        assert!(z.support_size() <= 1);
    }

    #[test]
    fn coordinate_step_examples() {
        let d = ds(&[vec![1.0]], &[1.0]);
        let k = KernelOracle::new(KernelSpec::Linear, &d).unwrap();
        let mut s = DualState::zeros(1);
        s.responses[0] = 0.5;
        dual_coordinate_step(&mut s, &k, 0.1, 0).unwrap();
        assert_relative_eq!(s.alpha[0], 0.5);

        let mut s = DualState::zeros(1);
        s.responses[0] = -3.0;
        dual_coordinate_step(&mut s, &k, 1.0, 0).unwrap();
        assert_eq!(s.alpha[0], 1.0);

        let mut s = DualState::zeros(1);
        s.responses[0] = 1.0;
        assert_eq!(dual_coordinate_step(&mut s, &k, 1.0, 0).unwrap(), 0.0);

        let zero = ds(&[vec![0.0]], &[1.0]);
        let k0 = KernelOracle::new(KernelSpec::Linear, &zero).unwrap();
        assert!(matches!(
            dual_coordinate_step(&mut DualState::zeros(1), &k0, 1.0, 0),
            Err(Error::Degenerate(_))
        ));
    }

    fn restricted_dual(data: &Dataset, alpha: &[f64]) -> f64 {
        let n = data.len();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += alpha[i] * alpha[j] * data.y(i) * data.y(j) * data.x(i).dot(data.x(j));
            }
        }
        alpha.iter().sum::<f64>() - 0.5 * quad
    }

    fn state_from_alpha(k: &KernelOracle<'_>, alpha: &[f64]) -> DualState {
        let mut s = DualState::zeros(alpha.len());
        for (i, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                s.response_update(k, i, a).unwrap();
            }
        }
        s
    }

    #[test]
    fn pair_step_matches_brute_force() {
        let data = random_problem(6, 3, 11);
        let k = KernelOracle::new(KernelSpec::Linear, &data).unwrap();
        let lambda = 1.0 / 6.0;
        let cap = box_cap(lambda, 6);
        let starts = [vec![0.0; 6], vec![0.3, 0.3, 0.9, 0.9, 0.0, 0.0], vec![1.0, 0.2, 0.5, 0.0, 0.7, 0.4]];
        for alpha0 in &starts {
            for (i, j) in [(0, 1), (2, 5), (4, 3), (0, 2), (1, 3)] {
                let mut s = state_from_alpha(&k, alpha0);
                dual_pair_step_biased(&mut s, &k, lambda, i, j).unwrap();
                let ours = restricted_dual(&data, &s.alpha);

                let (yi, yj) = (data.y(i), data.y(j));
                let (lo_i, hi_i) = signed_room(alpha0[i], yi, cap);
                let (lo_j, hi_j) = signed_room(alpha0[j], -yj, cap);
                let (lo, hi) = (lo_i.max(lo_j), hi_i.min(hi_j));
                let mut best = f64::NEG_INFINITY;
                let steps = 100_000;
                let mut a = alpha0.clone();
                for g in 0..=steps {
                    let delta = lo + (hi - lo) * g as f64 / steps as f64;
                    a[i] = alpha0[i] + yi * delta;
                    a[j] = alpha0[j] - yj * delta;
                    best = best.max(restricted_dual(&data, &a));
                }
                assert!(ours >= best - 1e-9, "pair ({i},{j}): {ours} < {best}");
                for &a in &s.alpha {
                    assert!((0.0..=cap).contains(&a));
                }
                let before: f64 = (0..6).map(|m| data.y(m) * alpha0[m]).sum();
                let after: f64 = (0..6).map(|m| data.y(m) * s.alpha[m]).sum();
                assert_relative_eq!(before, after, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pair_step_stationary_and_degenerate() {
        let data = ds(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]], &[1.0, -1.0, -1.0]);
        let k = KernelOracle::new(KernelSpec::Linear, &data).unwrap();
        let mut s = DualState::zeros(3);
        s.responses = vec![1.0, 1.0, 1.0];
        assert_eq!(dual_pair_step_biased(&mut s, &k, 0.1, 0, 1).unwrap(), 0.0);
        assert!(matches!(
            dual_pair_step_biased(&mut DualState::zeros(3), &k, 0.1, 0, 2),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn max_gain_selection() {
        let mut s = DualState::zeros(3);
        s.responses = vec![1.0, 1.0, 1.0];
        let mut rng = stream(0, Purpose::Sampling);
        assert_eq!(select_working_index(&s, &[1.0; 3], 1.0, SelectMode::MaxGain, &mut rng), 0);
        s.responses[2] = 0.2;
        assert_eq!(select_working_index(&s, &[1.0; 3], 1.0, SelectMode::MaxGain, &mut rng), 2);
    }

    #[test]
    fn max_gain_matches_exhaustive() {
        let data = random_problem(8, 3, 5);
        let k = KernelOracle::new(KernelSpec::gaussian(0.5).unwrap(), &data).unwrap();
        let lambda = 0.2;
        let cap = box_cap(lambda, 8);
        let s = state_from_alpha(&k, &[0.1, 0.0, 0.6, 0.0, 0.3, 0.625, 0.0, 0.2]);
        let diag = vec![1.0; 8];
        let mut rng = stream(0, Purpose::Sampling);
        let chosen = select_working_index(&s, &diag, cap, SelectMode::MaxGain, &mut rng);
        let gains: Vec<f64> = (0..8)
            .map(|i| {
                let mut t = s.clone();
                dual_coordinate_step(&mut t, &k, lambda, i).unwrap();
                t.dual_objective() - s.dual_objective()
            })
            .collect();
        let best = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((gains[chosen] - best).abs() < 1e-12);
    }

    #[test]
    fn bias_recovery_fallback() {
        let data = ds(&[vec![1.0], vec![-1.0]], &[1.0, -1.0]);
        let mut s = DualState::zeros(2);
        s.responses = vec![3.0, 3.0];
        // alpha = 0 for both: b >= 1 - 3 and -b >= 1 - 3, so b in [-2, 2].
        assert_eq!(recover_bias(&s, &data, 1.0), 0.0);
        s.alpha = vec![0.5, 0.5];
        s.responses = vec![0.8, 1.2];
        assert_relative_eq!(recover_bias(&s, &data, 1.0), 0.5 * (0.2 + 0.2));
    }

    #[test]
    fn perceptron_mistake_bound() {
        // Unit-norm points with y <u, x> >= 1 for u = 2 e1, so M <= ||u||^2 = 4.
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let a = i as f64 * 0.37;
                let x = 0.5 + 0.5 * (a.sin().abs());
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                vec![s * x, (1.0 - x * x).sqrt() * a.cos().signum()]
            })
            .collect();
        let ys: Vec<f64> = rows.iter().map(|r| r[0].signum()).collect();
        let data = ds(&rows, &ys);
        let k = KernelOracle::new(KernelSpec::Linear, &data).unwrap();
        let p = perceptron_train(&k, 1, 3).unwrap();
        assert!(p.mistakes <= 4, "{} mistakes", p.mistakes);
        assert_eq!(p.alpha.iter().filter(|&&a| a != 0.0).count(), p.mistakes);
        assert!(p.selected_step < 200);
    }

    #[test]
    fn perceptron_same_label_and_empty() {
        let data = ds(&[vec![1.0, 0.2], vec![0.5, 0.4], vec![0.9, 0.1]], &[1.0, 1.0, 1.0]);
        let k = KernelOracle::new(KernelSpec::gaussian(1.0).unwrap(), &data).unwrap();
        assert!(perceptron_train(&k, 1, 0).unwrap().mistakes <= 1);
        let empty = Dataset::default();
        let k0 = KernelOracle::new(KernelSpec::Linear, &empty).unwrap();
        assert!(perceptron_train(&k0, 1, 0).unwrap().alpha.is_empty());
    }

    #[test]
    fn rff_map_examples() {
        let dirs = vec![vec![0.3, -1.0], vec![2.0, 0.5], vec![-0.7, 0.1]];
        let zero = rff_map(&SparseVector::default(), &dirs, 1.0);
        let s = 1.0 / 3f64.sqrt();
        assert_eq!(zero, vec![s, 0.0, s, 0.0, s, 0.0]);
        let x = SparseVector::from_dense(&[0.4, -2.0]);
        let phi = rff_map(&x, &dirs, 0.7);
        assert_relative_eq!(phi.iter().map(|v| v * v).sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rff_approximates_gaussian() {
        let spec = KernelSpec::gaussian(0.5).unwrap();
        let f = FourierFeatures::new(spec, 5, 4096, 7).unwrap();
        assert_eq!(f, FourierFeatures::new(spec, 5, 4096, 7).unwrap());
        let mut rng = Rng::seed_from_u64(99);
        let mut total = 0.0;
        for _ in 0..100 {
            let a: Vec<f64> = (0..5).map(|_| rng.random_range(-0.5..0.5)).collect();
            let b: Vec<f64> = (0..5).map(|_| rng.random_range(-0.5..0.5)).collect();
            let (a, b) = (SparseVector::from_dense(&a), SparseVector::from_dense(&b));
            total += (dot(&f.map(&a), &f.map(&b)) - spec.eval(&a, &b)).abs();
        }
        assert!(total / 100.0 <= 3.0 / 4096f64.sqrt());
    }

    #[test]
    fn pegasos_stays_in_ball() {
        let data = random_problem(40, 3, 2);
        let k = KernelOracle::new(KernelSpec::gaussian(1.0).unwrap(), &data).unwrap();
        let lambda = 0.1;
        let mut s = DualState::zeros(40);
        let mut rng = stream(1, Purpose::Sampling);
        for t in 1..=2000u64 {
            let eta = 1.0 / (lambda * (t + 1) as f64);
            pegasos_step(&mut s, &k, lambda, eta, &mut rng).unwrap();
            if t > 100 {
                assert!(s.norm() <= 1.1 / lambda.sqrt());
            }
        }
    }

    #[test]
    fn training_loops_run() {
        let data = random_problem(30, 2, 8);
        let k = KernelOracle::new(KernelSpec::gaussian(0.5).unwrap(), &data).unwrap();
        for alg in ["sgd_norm", "pegasos", "sdca", "smo", "perceptron", "rff"] {
            for with_bias in [false, true] {
                let mut cfg = BaselineConfig::new(BaselineAlgorithm::parse(alg).unwrap());
                cfg.epochs = 3;
                cfg.lambda = 0.05;
                cfg.with_bias = with_bias;
                let mut probe = |c: &dyn Classifier| c.error_rate(&data);
                let run = baseline_train(&k, &cfg, Some(&mut probe)).unwrap();
                let last = run.log.last().unwrap();
                assert_eq!(last.iteration, 90);
                assert!(last.error.is_finite(), "{alg}");
            }
        }
    }

    proptest! {
        #[test]
        fn dual_steps_are_monotone_and_feasible(seed in 0u64..500, lambda in 0.05f64..2.0) {
            let data = random_problem(7, 2, seed);
            let k = KernelOracle::new(KernelSpec::gaussian(0.7).unwrap(), &data).unwrap();
            let cap = box_cap(lambda, 7);
            let mut rng = stream(seed, Purpose::Sampling);
            let mut s = DualState::zeros(7);
            for _ in 0..20 {
                let before = s.dual_objective();
                let i = rng.random_range(0..7);
                dual_coordinate_step(&mut s, &k, lambda, i).unwrap();
                prop_assert!(s.dual_objective() >= before - 1e-10);
                prop_assert!(s.alpha.iter().all(|&a| (0.0..=cap).contains(&a)));
            }
            let mut s = DualState::zeros(7);
            for _ in 0..20 {
                let before = s.dual_objective();
                if let Some((i, j)) = select_working_pair(&s, &data, cap, SelectMode::Uniform, &mut rng) {
                    dual_pair_step_biased(&mut s, &k, lambda, i, j).unwrap();
                }
                prop_assert!(s.dual_objective() >= before - 1e-10);
                prop_assert!(s.alpha.iter().all(|&a| (0.0..=cap).contains(&a)));
                let balance: f64 = (0..7).map(|m| data.y(m) * s.alpha[m]).sum();
                prop_assert!(balance.abs() < 1e-12);
            }
        }
    }
}
