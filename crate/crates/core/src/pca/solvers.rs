//! Streaming PCA: the power method, the incremental algorithm, matrix
//! exponentiated gradient (Warmuth-Kuzmin), MSG and capped MSG, plus the
//! sample-average baseline. Each iteration consumes one sample.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::metrics::{Checkpoints, MetricKind, MetricLog, MetricRecord};
use crate::pca::eig::{dense_eigen, largest_principal_angle, orthonormalize_columns, EigState};
use crate::pca::project::{project_capped, project_relative_entropy, project_trace_simplex};
use crate::rng::{stream, Purpose, Rng};

/// Largest dimension for which dense second-moment matrices are formed.
pub const DENSE_LIMIT: usize = 4096;

/// Principal angle above which a run counts as stuck.
pub const STUCK_ANGLE: f64 = 0.1;

/// Smallest eigenvalue passed to `ln` in the multiplicative update.
pub const EIGENVALUE_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PcaAlgorithm {
    Power,
    Incremental,
    Warmuth,
    Msg,
    CappedMsg,
    Saa,
}

impl PcaAlgorithm {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "power" => Self::Power,
            "incremental" => Self::Incremental,
            "warmuth" => Self::Warmuth,
            "msg" => Self::Msg,
            "capped_msg" => Self::CappedMsg,
            "saa" => Self::Saa,
            other => return Err(Error::Config(format!("unknown PCA algorithm {other:?}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Power => "power",
            Self::Incremental => "incremental",
            Self::Warmuth => "warmuth",
            Self::Msg => "msg",
            Self::CappedMsg => "capped_msg",
            Self::Saa => "saa",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule {
    /// `eta_t = c / sqrt(t)`.
    InvSqrt(f64),
    Constant(f64),
}

impl StepSchedule {
    pub fn eta(self, t: u64) -> f64 {
        match self {
            StepSchedule::InvSqrt(c) => c / (t as f64).sqrt(),
            StepSchedule::Constant(eta) => eta,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcaConfig {
    pub algorithm: PcaAlgorithm,
    pub k: usize,
    /// Rank cap for capped MSG.
    pub cap_rank: usize,
    pub iterations: u64,
    pub schedule: StepSchedule,
    pub seed: u64,
    /// Explicit MSG eigenvalues this close to the complement value are folded
    /// into it.
    pub drop_tolerance: f64,
}

impl PcaConfig {
    pub fn new(algorithm: PcaAlgorithm, k: usize, iterations: u64) -> Self {
        Self {
            algorithm,
            k,
            cap_rank: k + 1,
            iterations,
            schedule: StepSchedule::InvSqrt(1.0),
            seed: 0,
            drop_tolerance: 1e-12,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.k == 0 || self.k >= d {
            return Err(Error::Config(format!("need 1 <= k < d, got k = {}, d = {d}", self.k)));
        }
        if self.algorithm == PcaAlgorithm::CappedMsg && (self.cap_rank < self.k || self.cap_rank > d) {
            return Err(Error::Config(format!(
                "capped MSG needs k <= K <= d, got K = {}",
                self.cap_rank
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iteration count must be at least 1".into()));
        }
        let scale = match self.schedule {
            StepSchedule::InvSqrt(c) => c,
            StepSchedule::Constant(e) => e,
        };
        if !(scale > 0.0) {
            return Err(Error::Config(format!("step scale must be positive, got {scale}")));
        }
        Ok(())
    }
}

/// A stream of samples in `R^d`.
pub trait SampleSource {
    fn dim(&self) -> usize;
    fn sample(&mut self, rng: &mut Rng) -> Vec<f64>;
    /// `E[x x^T]` when known in closed form.
    fn second_moment(&self) -> Option<DMatrix<f64>> {
        None
    }
}

/// Uniform draws, with replacement, from a fixed list of vectors.
#[derive(Clone, Debug)]
pub struct EmpiricalSource {
    rows: Vec<Vec<f64>>,
    d: usize,
}

impl EmpiricalSource {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || rows.iter().any(|r| r.len() != d) {
            return Err(Error::contract("need a nonempty list of equal-length vectors"));
        }
        Ok(Self { rows, d })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

impl SampleSource for EmpiricalSource {
    fn dim(&self) -> usize {
        self.d
    }

    fn sample(&mut self, rng: &mut Rng) -> Vec<f64> {
        self.rows[rng.random_range(0..self.rows.len())].clone()
    }
}

/// `U <- U + eta x (x^T U)`; orthonormalization is left to the caller.
pub fn power_step(basis: &mut DMatrix<f64>, x: &[f64], eta: f64) {
    let xv = DVector::from_column_slice(x);
    let proj = basis.transpose() * &xv;
    basis.ger(eta, &xv, &proj, 1.0);
}

/// `(t+1) C <- rank-k truncation of (t C + x x^T)`, kept unnormalized.
pub fn incremental_step(state: &mut EigState, x: &[f64], k: usize) -> Result<()> {
    state.rank1_update(1.0, x)?;
    state.truncate_top(k);
    Ok(())
}

/// `M <- P(M + eta x x^T)` with `P` the Frobenius projection onto
/// `{0 <= M <= I, tr M = k}`.
pub fn msg_step(state: &mut EigState, x: &[f64], eta: f64, k: usize, drop_tolerance: f64) -> Result<()> {
    state.rank1_update(eta, x)?;
    let mut vals = state.eigvals.clone();
    let mut mult = vec![1.0; vals.len()];
    vals.push(state.complement);
    mult.push(state.complement_multiplicity() as f64);
    let (s, p) = project_trace_simplex(&vals, &mult, k as f64)?;
    state.complement = (state.complement + s).clamp(0.0, 1.0);
    state.set_eigvals(p[..state.rank()].to_vec());
    state.absorb_into_complement(drop_tolerance);
    Ok(())
}

/// MSG step followed by the rank-`K` capped projection.
pub fn capped_msg_step(state: &mut EigState, x: &[f64], eta: f64, k: usize, cap_rank: usize) -> Result<()> {
    if state.complement != 0.0 {
        return Err(Error::contract("capped MSG states have a zero complement"));
    }
    state.rank1_update(eta, x)?;
    let (p, kept) = project_capped(&state.eigvals, k, cap_rank)?;
    state.select_columns(&kept);
    state.set_eigvals(p);
    Ok(())
}

/// `W <- P_RE(exp(ln W - eta x x^T))`, with the relative-entropy projection
/// onto `{0 <= W <= I / (d - k), tr W = 1}`.
///
/// The bordered small matrix is formed in the log domain: `diag(ln sigma)`
/// on the explicit block and `ln(complement)` on the new direction, minus
/// `eta` times the projected `x x^T`.
pub fn warmuth_step(state: &mut EigState, x: &[f64], eta: f64, k: usize) -> Result<()> {
    let d = state.dim();
    let cap = 1.0 / (d - k) as f64;
    let log_sigma: Vec<f64> = state.eigvals.iter().map(|s| s.max(EIGENVALUE_FLOOR).ln()).collect();
    let log_comp = state.complement.max(EIGENVALUE_FLOOR).ln();
    let vals = state.bordered_decompose(x, |x_hat, r| {
        let m = log_sigma.len();
        let n = if r > 0.0 { m + 1 } else { m };
        let mut a = DMatrix::zeros(n, n);
        for i in 0..m {
            a[(i, i)] = log_sigma[i];
            for j in 0..m {
                a[(i, j)] -= eta * x_hat[i] * x_hat[j];
            }
        }
        if r > 0.0 {
            for i in 0..m {
                a[(i, m)] = -eta * r * x_hat[i];
                a[(m, i)] = -eta * r * x_hat[i];
            }
            a[(m, m)] = log_comp - eta * r * r;
        }
        a
    })?;
    let mut exp_vals: Vec<f64> = vals.iter().map(|v| v.exp()).collect();
    let explicit = exp_vals.len();
    let comp_mult = (d - explicit) as f64;
    exp_vals.push(state.complement);
    let mut mult = vec![1.0; explicit];
    mult.push(comp_mult);
    let (z, p) = project_relative_entropy(&exp_vals, &mult, cap)?;
    state.complement = (state.complement / z).min(cap);
    state.set_eigvals(p[..explicit].to_vec());
    if state.complement >= cap {
        state.complement = cap;
        state.absorb_into_complement(0.0);
    }
    Ok(())
}

/// Top-`k` eigenpairs of the empirical second moment `(1/n) sum x x^T`.
pub fn saa_solve(samples: &[Vec<f64>], k: usize) -> Result<EigState> {
    let d = samples.first().map_or(0, Vec::len);
    if d > DENSE_LIMIT {
        return Err(Error::TooLarge { d, limit: DENSE_LIMIT });
    }
    if samples.is_empty() {
        return Err(Error::contract("SAA needs at least one sample"));
    }
    let c = empirical_second_moment(samples)?;
    let (vals, vecs) = dense_eigen(&c);
    let k = k.min(d);
    EigState::from_parts(vecs.columns(0, k).into_owned(), vals[..k].to_vec(), 0.0)
}

/// `(1/n) sum_i x_i x_i^T`.
pub fn empirical_second_moment(samples: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = samples.first().map_or(0, Vec::len);
    if d > DENSE_LIMIT {
        return Err(Error::TooLarge { d, limit: DENSE_LIMIT });
    }
    let mut c = DMatrix::zeros(d, d);
    for x in samples {
        if x.len() != d {
            return Err(Error::contract("samples differ in dimension"));
        }
        let xv = DVector::from_column_slice(x);
        c.ger(1.0, &xv, &xv, 1.0);
    }
    Ok(c / samples.len().max(1) as f64)
}

/// What the captured variance is measured against.
pub enum Reference<'a> {
    Covariance(&'a DMatrix<f64>),
    Samples(&'a [Vec<f64>]),
}

/// Variance captured by the orthonormal `basis`: `tr(P^T Sigma P)` or its
/// sample mean `mean ||P^T x||^2`.
pub fn evaluate_objective(basis: &DMatrix<f64>, reference: Reference<'_>) -> f64 {
    match reference {
        Reference::Covariance(sigma) => (basis.transpose() * sigma * basis).trace(),
        Reference::Samples(samples) => {
            let total: f64 = samples
                .iter()
                .map(|x| (basis.transpose() * DVector::from_column_slice(x)).norm_squared())
                .sum();
            total / samples.len().max(1) as f64
        }
    }
}

/// Sum of the `k` largest eigenvalues of `sigma` and an orthonormal basis
/// for them.
pub fn optimum(sigma: &DMatrix<f64>, k: usize) -> (f64, DMatrix<f64>) {
    let (vals, vecs) = dense_eigen(sigma);
    (vals[..k].iter().sum(), vecs.columns(0, k).into_owned())
}

/// Flags capped MSG as converged once the explicit rank equals `k` and the
/// eigenvalues have moved less than `tolerance` over `window` steps.
#[derive(Clone, Debug)]
pub struct ConvergenceDetector {
    window: usize,
    tolerance: f64,
    history: VecDeque<Vec<f64>>,
}

impl ConvergenceDetector {
    pub fn new(window: usize, tolerance: f64) -> Self {
        Self {
            window: window.max(1),
            tolerance,
            history: VecDeque::new(),
        }
    }

    pub fn observe(&mut self, state: &EigState, k: usize) -> bool {
        let nonzero: Vec<f64> = state.eigvals.iter().copied().filter(|&v| v > 1e-12).collect();
        if nonzero.len() != k {
            self.history.clear();
            return false;
        }
        self.history.push_back(nonzero);
        if self.history.len() > self.window + 1 {
            self.history.pop_front();
        }
        if self.history.len() <= self.window {
            return false;
        }
        let first = &self.history[0];
        self.history
            .iter()
            .all(|h| h.iter().zip(first).all(|(a, b)| (a - b).abs() < self.tolerance))
    }
}

/// A streaming PCA solver bound to one algorithm and dimension.
#[derive(Clone, Debug)]
pub struct PcaSolver {
    config: PcaConfig,
    state: EigState,
    t: u64,
}

fn random_orthonormal(d: usize, k: usize, rng: &mut Rng) -> DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut m = DMatrix::from_fn(d, k, |_, _| StandardNormal.sample(rng));
    orthonormalize_columns(&mut m);
    m
}

impl PcaSolver {
    pub fn new(config: PcaConfig, d: usize) -> Result<Self> {
        config.validate(d)?;
        let k = config.k;
        let mut rng = stream(config.seed, Purpose::Init);
        let state = match config.algorithm {
            PcaAlgorithm::Power => EigState::from_parts(random_orthonormal(d, k, &mut rng), vec![1.0; k], 0.0)?,
            PcaAlgorithm::Incremental | PcaAlgorithm::Saa => EigState::zeros(d),
            PcaAlgorithm::Msg => EigState::scalar(d, k as f64 / d as f64),
            PcaAlgorithm::Warmuth => EigState::scalar(d, 1.0 / d as f64),
            PcaAlgorithm::CappedMsg => {
                let cap = config.cap_rank;
                EigState::from_parts(random_orthonormal(d, cap, &mut rng), vec![k as f64 / cap as f64; cap], 0.0)?
            }
        };
        Ok(Self { config, state, t: 0 })
    }

    pub fn state(&self) -> &EigState {
        &self.state
    }

    pub fn config(&self) -> &PcaConfig {
        &self.config
    }

    pub fn iteration(&self) -> u64 {
        self.t
    }

    /// Explicit rank used for runtime accounting.
    pub fn explicit_rank(&self) -> usize {
        match self.config.algorithm {
            PcaAlgorithm::Power => self.config.k,
            _ => self.state.rank(),
        }
    }

    pub fn step(&mut self, x: &[f64]) -> Result<()> {
        self.t += 1;
        let eta = self.config.schedule.eta(self.t);
        let k = self.config.k;
        match self.config.algorithm {
            PcaAlgorithm::Power => {
                power_step(&mut self.state.basis, x, eta);
                self.state.reorthonormalize_if_needed();
            }
            PcaAlgorithm::Incremental => incremental_step(&mut self.state, x, k)?,
            PcaAlgorithm::Msg => msg_step(&mut self.state, x, eta, k, self.config.drop_tolerance)?,
            PcaAlgorithm::CappedMsg => capped_msg_step(&mut self.state, x, eta, k, self.config.cap_rank)?,
            PcaAlgorithm::Warmuth => warmuth_step(&mut self.state, x, eta, k)?,
            PcaAlgorithm::Saa => return Err(Error::contract("SAA is not a streaming solver")),
        }
        Ok(())
    }

    /// Orthonormal basis of the reported `k`-dimensional subspace: the top
    /// eigenvectors, or for the Warmuth state the `k` smallest.
    pub fn reported_basis(&self) -> DMatrix<f64> {
        let k = self.config.k;
        match self.config.algorithm {
            PcaAlgorithm::Power => {
                let mut b = self.state.basis.clone();
                orthonormalize_columns(&mut b);
                b
            }
            PcaAlgorithm::Warmuth => self.state.reported_basis(k, false),
            _ => self.state.reported_basis(k, true),
        }
    }
}

/// Output of a streaming run.
#[derive(Clone, Debug)]
pub struct PcaRun {
    pub state: EigState,
    pub reported: DMatrix<f64>,
    pub log: MetricLog,
    /// Mean of `tr(Sigma M_t)` over the iterates, for relaxation-based
    /// solvers with a known covariance.
    pub mean_relaxed_objective: Option<f64>,
    pub estimated_runtime: f64,
}

/// Runs `config.iterations` steps on samples from `source`. Checkpoint records
/// hold the estimated runtime `sum_t k'_t^2`, the captured variance of the
/// reported subspace, its suboptimality and stuck flag when a reference
/// covariance is available, and the explicit rank.
pub fn pca_train(config: &PcaConfig, source: &mut dyn SampleSource, reference: Option<&DMatrix<f64>>) -> Result<PcaRun> {
    let d = source.dim();
    config.validate(d)?;
    let mut rng = stream(config.seed, Purpose::Sampling);
    let known = reference.cloned().or_else(|| source.second_moment());
    let opt = known.as_ref().map(|s| optimum(s, config.k));
    let mut log = MetricLog::new(MetricKind::Pca);
    let record = |t: u64, runtime: f64, basis: &DMatrix<f64>, rank: usize| {
        let mut rec = MetricRecord::new(t, runtime, f64::NAN, rank as f64);
        if let (Some(sigma), Some((best, best_basis))) = (known.as_ref(), opt.as_ref()) {
            let captured = evaluate_objective(basis, Reference::Covariance(sigma));
            rec.objective = captured;
            rec.error = best - captured;
            rec.stuck = f64::from(u8::from(largest_principal_angle(basis, best_basis) > STUCK_ANGLE));
        }
        rec
    };

    if config.algorithm == PcaAlgorithm::Saa {
        let samples: Vec<Vec<f64>> = (0..config.iterations).map(|_| source.sample(&mut rng)).collect();
        let state = saa_solve(&samples, config.k)?;
        let reported = state.basis.clone();
        let runtime = config.iterations as f64 * (d * d) as f64;
        log.push(record(config.iterations, runtime, &reported, state.rank()));
        return Ok(PcaRun {
            state,
            reported,
            log,
            mean_relaxed_objective: None,
            estimated_runtime: runtime,
        });
    }

    let relaxed = matches!(config.algorithm, PcaAlgorithm::Msg | PcaAlgorithm::CappedMsg);
    let mut solver = PcaSolver::new(config.clone(), d)?;
    let mut checkpoints = Checkpoints::geometric(config.iterations);
    let mut runtime = 0.0;
    let mut relaxed_sum = 0.0;
    for t in 1..=config.iterations {
        let x = source.sample(&mut rng);
        solver.step(&x)?;
        let kp = solver.explicit_rank() as f64;
        runtime += kp * kp;
        if relaxed {
            if let Some(sigma) = known.as_ref() {
                relaxed_sum += solver.state().trace_product(sigma);
            }
        }
        if checkpoints.hit(t) {
            log.push(record(t, runtime, &solver.reported_basis(), solver.explicit_rank()));
        }
    }
    let reported = solver.reported_basis();
    Ok(PcaRun {
        state: solver.state,
        reported,
        log,
        mean_relaxed_objective: (relaxed && known.is_some()).then(|| relaxed_sum / config.iterations as f64),
        estimated_runtime: runtime,
    })
}
