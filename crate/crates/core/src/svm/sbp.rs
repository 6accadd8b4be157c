//! Stochastic Batch Perceptron: stochastic supergradient ascent on the
//! slack-constrained margin objective, with the minimax distribution found by
//! water filling at every step.

use crate::error::{Error, Result};
use crate::kernel::{DualState, KernelOracle};
use crate::metrics::{Checkpoints, MetricKind, MetricLog, MetricRecord};
use crate::rng::{stream, Purpose, Rng};
use crate::svm::model::{ErrorProbe, SparseClassifier};
use crate::svm::water::{find_gamma, find_gamma_and_bias, sample_support_index, WaterLevel};

#[derive(Clone, Debug, PartialEq)]
pub struct SbpConfig {
    /// Average slack budget per example.
    pub nu: f64,
    pub iterations: u64,
    /// Initial step; defaults to `1 / sqrt(max_i K(x_i, x_i))`.
    pub eta0: Option<f64>,
    pub with_bias: bool,
    pub seed: u64,
}

impl Default for SbpConfig {
    fn default() -> Self {
        Self {
            nu: 0.0,
            iterations: 1000,
            eta0: None,
            with_bias: false,
            seed: 0,
        }
    }
}

impl SbpConfig {
    fn validate(&self) -> Result<()> {
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return Err(Error::Config(format!("nu must be nonnegative, got {}", self.nu)));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iteration count must be at least 1".into()));
        }
        if let Some(eta) = self.eta0 {
            if !(eta > 0.0) {
                return Err(Error::Config(format!("eta0 must be positive, got {eta}")));
            }
        }
        Ok(())
    }
}

/// Output of a training run: `alpha` and `bias` describe the rescaled
/// classifier `w_bar / gamma`.
#[derive(Clone, Debug)]
pub struct SbpModel {
    pub alpha: Vec<f64>,
    pub gamma: f64,
    pub bias: Option<f64>,
    pub log: MetricLog,
    /// Largest `||w^(t)||` seen over the run.
    pub max_iterate_norm: f64,
}

impl SbpModel {
    pub fn classifier(&self, oracle: &KernelOracle<'_>) -> SparseClassifier {
        SparseClassifier::from_coefficients(oracle.data(), &self.alpha, oracle.spec(), self.bias)
    }
}

/// Step-at-a-time SBP state.
pub struct Sbp<'o, 'a> {
    oracle: &'o KernelOracle<'a>,
    config: SbpConfig,
    state: DualState,
    alpha_sum: Vec<f64>,
    response_sum: Vec<f64>,
    eta0: f64,
    volume: f64,
    t: u64,
    rng: Rng,
    max_norm: f64,
}

impl<'o, 'a> Sbp<'o, 'a> {
    pub fn new(oracle: &'o KernelOracle<'a>, config: SbpConfig) -> Result<Self> {
        config.validate()?;
        let data = oracle.data();
        let n = data.len();
        if n == 0 {
            return Err(Error::contract("cannot train on an empty dataset"));
        }
        if config.with_bias && !data.has_both_classes() {
            return Err(Error::contract("training with a bias needs both classes"));
        }
        let eta0 = match config.eta0 {
            Some(e) => e,
            None => {
                let kmax = oracle.max_self_similarity();
                if kmax <= 0.0 {
                    return Err(Error::Degenerate("all examples have K(x, x) = 0".into()));
                }
                1.0 / kmax.sqrt()
            }
        };
        Ok(Self {
            oracle,
            state: DualState::zeros(n),
            alpha_sum: vec![0.0; n],
            response_sum: vec![0.0; n],
            eta0,
            volume: n as f64 * config.nu,
            t: 0,
            rng: stream(config.seed, Purpose::Sampling),
            max_norm: 0.0,
            config,
        })
    }

    pub fn state(&self) -> &DualState {
        &self.state
    }

    pub fn iteration(&self) -> u64 {
        self.t
    }

    fn level(&self, responses: &[f64]) -> Result<WaterLevel> {
        if self.config.with_bias {
            find_gamma_and_bias(self.oracle.data().labels(), responses, self.volume)
        } else {
            Ok(WaterLevel {
                gamma: find_gamma(responses, self.volume)?,
                bias: None,
            })
        }
    }

    /// One supergradient step; returns the sampled index.
    pub fn step(&mut self) -> Result<usize> {
        self.t += 1;
        let eta = self.eta0 / (self.t as f64).sqrt();
        let level = self.level(&self.state.responses)?;
        let i = match level.bias {
            None => sample_support_index(&self.state.responses, level.gamma, &mut self.rng)?,
            Some(b) => {
                let data = self.oracle.data();
                let shifted: Vec<f64> = self
                    .state
                    .responses
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| c + data.y(j) * b)
                    .collect();
                sample_support_index(&shifted, level.gamma, &mut self.rng)?
            }
        };
        self.state.response_update(self.oracle, i, eta)?;
        let r = self.state.norm();
        if r > 1.0 {
            self.state.rescale(1.0 / r)?;
            self.state.norm_sq = 1.0;
        }
        self.max_norm = self.max_norm.max(self.state.norm());
        for (s, a) in self.alpha_sum.iter_mut().zip(&self.state.alpha) {
            *s += a;
        }
        for (s, c) in self.response_sum.iter_mut().zip(&self.state.responses) {
            *s += c;
        }
        Ok(i)
    }

    /// Averaged coefficients and responses over the steps taken so far.
    pub fn averages(&self) -> (Vec<f64>, Vec<f64>) {
        let scale = 1.0 / self.t.max(1) as f64;
        (
            self.alpha_sum.iter().map(|a| a * scale).collect(),
            self.response_sum.iter().map(|c| c * scale).collect(),
        )
    }

    /// Objective value `f(w_bar)` of the averaged iterate.
    pub fn averaged_objective(&self) -> Result<f64> {
        let (_, c_bar) = self.averages();
        Ok(self.level(&c_bar)?.gamma)
    }

    /// Rescales the averaged iterate by its water level.
    pub fn current_model(&self) -> Result<(Vec<f64>, f64, Option<f64>)> {
        let (alpha_bar, c_bar) = self.averages();
        let level = self.level(&c_bar)?;
        if !(level.gamma > 0.0) {
            return Err(Error::Degenerate(format!(
                "water level {} is not positive; nu may be too large",
                level.gamma
            )));
        }
        let inv = 1.0 / level.gamma;
        let alpha = alpha_bar.iter().map(|a| a * inv).collect();
        Ok((alpha, level.gamma, level.bias.map(|b| b * inv)))
    }

    pub fn support_size(&self) -> usize {
        self.alpha_sum.iter().filter(|&&a| a != 0.0).count()
    }
}

/// Runs SBP for `config.iterations` steps. `test_error`, when given, is
/// evaluated on the rescaled averaged classifier at each checkpoint.
pub fn sbp_train(
    oracle: &KernelOracle<'_>,
    config: &SbpConfig,
    mut test_error: Option<ErrorProbe<'_>>,
) -> Result<SbpModel> {
    let mut sbp = Sbp::new(oracle, config.clone())?;
    let mut checkpoints = Checkpoints::geometric(config.iterations);
    let mut log = MetricLog::new(MetricKind::Svm);
    for t in 1..=config.iterations {
        sbp.step()?;
        if checkpoints.hit(t) {
            let objective = sbp.averaged_objective()?;
            let mut rec = MetricRecord::new(t, oracle.eval_count() as f64, objective, sbp.support_size() as f64);
            if let Some(f) = test_error.as_deref_mut() {
                if let Ok((alpha, _, bias)) = sbp.current_model() {
                    let clf = SparseClassifier::from_coefficients(oracle.data(), &alpha, oracle.spec(), bias);
                    rec.error = f(&clf);
                }
            }
            log.push(rec);
        }
    }
    let (alpha, gamma, bias) = sbp.current_model()?;
    Ok(SbpModel {
        alpha,
        gamma,
        bias,
        log,
        max_iterate_norm: sbp.max_norm,
    })
}
