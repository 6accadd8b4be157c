//! Experiment harness: flat `key = value` configuration, data splits, per-seed
//! runs with CSV logs, aggregation over seeds, validation sweeps and model
//! files.
//!
//! # Configuration keys
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `task` | `svm` or `pca` | required |
//! | `algorithm` | `sbp`, `sgd_norm`, `pegasos`, `sdca`, `smo`, `perceptron`, `rff`, `sparsify`; or `power`, `incremental`, `warmuth`, `msg`, `capped_msg`, `saa` | required |
//! | `data` | a LIBSVM path, `synthetic` (PCA families) or `separable` (SVM) | required |
//! | `family`, `d`, `k_param` | synthetic PCA family, dimension, its `k` | `gaussian_sigma_k`, 32, `k` |
//! | `n`, `data_seed` | size and seed of the `separable` set | 20, 0 |
//! | `kernel`, `sigma_sq` | `gaussian` or `linear`, bandwidth | `gaussian`, 1 |
//! | `split` | train, validation, test fractions | `0.4,0.2,0.4` |
//! | `seeds` | comma list or half-open range `a..b` | `0` |
//! | `out`, `name` | output directory and file prefix | `.`, `run` |
//! | `T` | iterations (SBP, PCA) | 1000 |
//! | `k`, `K` | PCA target rank and capped-MSG rank cap | 1, `k + 1` |
//! | `nu`, `lambda`, `r`, `epochs`, `features`, `with_bias` | SVM solver parameters | 0, 0.01, 1, 1, 64, false |
//! | `eta_scale`, `schedule` | step scale and `inv_sqrt` or `constant` | solver default, `inv_sqrt` |
//! | `eta`, `epsilon`, `mode`, `max_iters`, `project_norm`, `reference` | sparsifier settings and the dense solver it mimics | 0.5, 0.5, `basic`, bound, false, `sdca` |
//! | `sweep_key`, `sweep_values` | parameter to select on validation and its candidates | none |
//!
//! # Output files
//!
//! Each seed writes `<name>_seed<s>.csv`; successful seeds are averaged row by
//! row into `<name>_aggregate.csv`. SVM rows are
//! `iteration,kernel_evals,objective,test_error,support_size`; PCA rows are
//! `iteration,est_runtime,objective,suboptimality,rank,stuck`. Every CSV
//! starts with `#` lines echoing the configuration (all keys but `out`). Models go to
//! `<name>_seed<s>.model` (SVMODEL) or `<name>_seed<s>.eig` (EIGSTATE).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::data::{parse_libsvm, Dataset};
use crate::error::{Error, Result};
use crate::kernel::{DualState, KernelOracle, KernelSpec};
use crate::metrics::{MetricKind, MetricLog};
use crate::pca::eig::EigState;
use crate::pca::solvers::{
    empirical_second_moment, evaluate_objective, pca_train, EmpiricalSource, PcaAlgorithm, PcaConfig, Reference,
    SampleSource, StepSchedule, DENSE_LIMIT,
};
use crate::rng::{stream, Purpose};
use crate::svm::baselines::{baseline_train, BaselineAlgorithm, BaselineConfig, TrainedBaseline};
use crate::svm::model::{Classifier, SparseClassifier};
use crate::svm::sbp::{sbp_train, SbpConfig};
use crate::svm::sparsify::{build_problem, sparsify, SparsifyConfig, SparsifyMode};
use crate::synthetic::{SyntheticFamily, SyntheticSource, SyntheticSpec};

const KNOWN_KEYS: &[&str] = &[
    "task",
    "algorithm",
    "data",
    "family",
    "d",
    "k_param",
    "n",
    "data_seed",
    "kernel",
    "sigma_sq",
    "split",
    "seeds",
    "out",
    "name",
    "T",
    "k",
    "K",
    "nu",
    "lambda",
    "r",
    "epochs",
    "features",
    "with_bias",
    "eta_scale",
    "schedule",
    "eta",
    "epsilon",
    "mode",
    "max_iters",
    "project_norm",
    "reference",
    "sweep_key",
    "sweep_values",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Svm,
    Pca,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Libsvm(PathBuf),
    Synthetic(SyntheticSpec),
    /// Two well-separated clusters in the plane.
    Separable { n: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Splits {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for Splits {
    fn default() -> Self {
        Self {
            train: 0.4,
            validation: 0.2,
            test: 0.4,
        }
    }
}

impl Splits {
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<f64> = text
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("split {text:?}: {e}")))?;
        let [train, validation, test] = parts[..] else {
            return Err(Error::Config(format!("split needs three fractions, got {text:?}")));
        };
        let s = Self { train, validation, test };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.validation, self.test];
        if all.iter().any(|f| !(0.0..=1.0).contains(f)) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions must be in [0, 1] and sum to 1, got {all:?}")));
        }
        if self.train <= 0.0 {
            return Err(Error::Config("the training fraction must be positive".into()));
        }
        Ok(())
    }

    /// Shuffles `0..n` and cuts it into train, validation and test indices.
    pub fn assign(&self, n: usize, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut stream(seed, Purpose::Split));
        let n_train = ((self.train * n as f64).round() as usize).clamp(1.min(n), n);
        let n_val = ((self.validation * n as f64).round() as usize).min(n - n_train);
        let test = idx.split_off(n_train + n_val);
        let val = idx.split_off(n_train);
        (idx, val, test)
    }
}

/// Parsed experiment configuration. The raw entries are kept for the CSV
/// provenance lines.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    entries: BTreeMap<String, String>,
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment. Only the syntax and
    /// key names are checked here; see [`Self::validate`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected key = value, got {line:?}"),
                });
            };
            let key = key.trim();
            check_key(key)?;
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("duplicate key {key:?}"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets or replaces one entry.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        check_key(key)?;
        self.entries.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    /// Canonical text form, one sorted `key = value` line per entry.
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let task = self.task()?;
        let alg = self.require("algorithm")?;
        match task {
            Task::Svm if alg != "sbp" && alg != "sparsify" => {
                BaselineAlgorithm::parse(alg)?;
            }
            Task::Pca => {
                PcaAlgorithm::parse(alg)?;
            }
            _ => {}
        }
        self.data_source()?;
        self.splits()?;
        if self.seeds()?.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.kernel()?;
        if task == Task::Pca {
            self.pca_config(0)?;
        }
        Ok(())
    }

    pub fn task(&self) -> Result<Task> {
        match self.require("task")? {
            "svm" => Ok(Task::Svm),
            "pca" => Ok(Task::Pca),
            other => Err(Error::Config(format!("task must be svm or pca, got {other:?}"))),
        }
    }

    pub fn algorithm(&self) -> Result<&str> {
        self.require("algorithm")
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.get("out").unwrap_or("."))
    }

    pub fn name(&self) -> &str {
        self.get("name").unwrap_or("run")
    }

    pub fn splits(&self) -> Result<Splits> {
        self.get("split").map_or(Ok(Splits::default()), Splits::parse)
    }

    /// `a, b, c` or the half-open range `a..b`.
    pub fn seeds(&self) -> Result<Vec<u64>> {
        let text = self.get("seeds").unwrap_or("0");
        let bad = |e: std::num::ParseIntError| Error::Config(format!("seeds {text:?}: {e}"));
        if let Some((a, b)) = text.split_once("..") {
            let (a, b) = (a.trim().parse::<u64>().map_err(bad)?, b.trim().parse::<u64>().map_err(bad)?);
            return Ok((a..b).collect());
        }
        text.split(',').map(|s| s.trim().parse::<u64>().map_err(bad)).collect()
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        match self.get("kernel").unwrap_or("gaussian") {
            "linear" => Ok(KernelSpec::Linear),
            "gaussian" => KernelSpec::gaussian(self.number("sigma_sq", 1.0)?),
            other => Err(Error::Config(format!("unknown kernel {other:?}"))),
        }
    }

    pub fn data_source(&self) -> Result<DataSource> {
        match self.require("data")? {
            "synthetic" => {
                let family = SyntheticFamily::parse(self.get("family").unwrap_or("gaussian_sigma_k"))?;
                let spec = if family == SyntheticFamily::TwoPointFailure {
                    SyntheticSpec::two_point()
                } else {
                    let d = self.integer("d", 32)? as usize;
                    let k = self.integer("k_param", self.integer("k", 1)?)? as usize;
                    SyntheticSpec::new(family, d, k)?
                };
                Ok(DataSource::Synthetic(spec))
            }
            "separable" => Ok(DataSource::Separable {
                n: self.integer("n", 20)? as usize,
                seed: self.integer("data_seed", 0)?,
            }),
            path => Ok(DataSource::Libsvm(PathBuf::from(path))),
        }
    }

    pub fn pca_config(&self, seed: u64) -> Result<PcaConfig> {
        let algorithm = PcaAlgorithm::parse(self.algorithm()?)?;
        let k = self.integer("k", 1)? as usize;
        let mut cfg = PcaConfig::new(algorithm, k, self.integer("T", 1000)?);
        cfg.cap_rank = self.integer("K", k as u64 + 1)? as usize;
        let scale = self.number("eta_scale", 1.0)?;
        cfg.schedule = match self.get("schedule").unwrap_or("inv_sqrt") {
            "inv_sqrt" => StepSchedule::InvSqrt(scale),
            "constant" => StepSchedule::Constant(scale),
            other => return Err(Error::Config(format!("unknown schedule {other:?}"))),
        };
        cfg.seed = seed;
        Ok(cfg)
    }

    pub fn sbp_config(&self, seed: u64) -> Result<SbpConfig> {
        Ok(SbpConfig {
            nu: self.number("nu", 0.0)?,
            iterations: self.integer("T", 1000)?,
            eta0: self.get("eta_scale").map(|_| self.number("eta_scale", 1.0)).transpose()?,
            with_bias: self.flag("with_bias")?,
            seed,
        })
    }

    pub fn baseline_config(&self, algorithm: &str, seed: u64) -> Result<BaselineConfig> {
        let mut cfg = BaselineConfig::new(BaselineAlgorithm::parse(algorithm)?);
        cfg.r = self.number("r", cfg.r)?;
        cfg.lambda = self.number("lambda", cfg.lambda)?;
        cfg.epochs = self.integer("epochs", cfg.epochs)?;
        cfg.features = self.integer("features", cfg.features as u64)? as usize;
        cfg.with_bias = self.flag("with_bias")?;
        cfg.seed = seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sparsify_config(&self) -> Result<SparsifyConfig> {
        let defaults = SparsifyConfig::default();
        Ok(SparsifyConfig {
            eta: self.number("eta", defaults.eta)?,
            epsilon: self.number("epsilon", defaults.epsilon)?,
            mode: self.get("mode").map_or(Ok(defaults.mode), SparsifyMode::parse)?,
            max_iters: self.get("max_iters").map(|_| self.integer("max_iters", 0).map(|v| v as usize)).transpose()?,
            project_norm: self.flag("project_norm")?,
        })
    }

    /// The swept key and its candidates, sorted ascending.
    pub fn sweep(&self) -> Result<Option<(String, Vec<f64>)>> {
        let Some(key) = self.get("sweep_key") else {
            return Ok(None);
        };
        check_key(key)?;
        let values = self.require("sweep_values")?;
        let mut out: Vec<f64> = values
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("sweep_values {values:?}: {e}")))?;
        if out.is_empty() {
            return Err(Error::Config("sweep_values is empty".into()));
        }
        out.sort_by(f64::total_cmp);
        Ok(Some((key.to_string(), out)))
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Config(format!("missing required key {key:?}")))
    }

    fn number(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key).map_or(Ok(default), |v| {
            v.parse::<f64>().map_err(|e| Error::Config(format!("{key} = {v:?}: {e}")))
        })
    }

    fn integer(&self, key: &str, default: u64) -> Result<u64> {
        self.get(key).map_or(Ok(default), |v| {
            v.parse::<u64>().map_err(|e| Error::Config(format!("{key} = {v:?}: {e}")))
        })
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key).unwrap_or("false") {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(Error::Config(format!("{key} must be true or false, got {other:?}"))),
        }
    }
}

fn check_key(key: &str) -> Result<()> {
    if KNOWN_KEYS.contains(&key) {
        Ok(())
    } else {
        Err(Error::Config(format!("unknown configuration key {key:?}")))
    }
}

/// Labels alternate `+1, -1`; each point sits at `(2y, 0)` plus uniform noise
/// in `[-1/2, 1/2]^2`.
pub fn separable_dataset(n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = stream(seed, Purpose::Sampling);
    let signs: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let rows: Vec<Vec<f64>> = signs
        .iter()
        .map(|y| vec![2.0 * y + rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)])
        .collect();
    Dataset::from_dense(&rows, &signs)
}

/// Writes `contents` to a temporary file beside `path`, then renames it.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file_name = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn save_classifier(path: &Path, model: &SparseClassifier) -> Result<()> {
    write_atomic(path, &model.to_text())
}

pub fn load_classifier(path: &Path) -> Result<SparseClassifier> {
    SparseClassifier::from_text(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub fn save_eigstate(path: &Path, state: &EigState) -> Result<()> {
    write_atomic(path, &state.to_text())
}

pub fn load_eigstate(path: &Path) -> Result<EigState> {
    EigState::from_text(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Final numbers from one seed. `validation` is the selection metric (lower
/// is better): validation error for SVMs, suboptimality or negative held-out
/// captured variance for PCA. `test` is the matching test-side number.
#[derive(Clone, Debug)]
pub struct SeedSummary {
    pub log: MetricLog,
    pub validation: f64,
    pub test: f64,
}

#[derive(Clone, Debug)]
pub struct SeedOutcome {
    pub seed: u64,
    /// Solver errors are kept as text so the remaining seeds still run.
    pub result: std::result::Result<SeedSummary, String>,
    pub csv_path: PathBuf,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub seeds: Vec<SeedOutcome>,
    pub aggregate: Option<MetricLog>,
    pub aggregate_path: Option<PathBuf>,
}

impl ExperimentReport {
    fn successes(&self) -> impl Iterator<Item = &SeedSummary> {
        self.seeds.iter().filter_map(|s| s.result.as_ref().ok())
    }

    pub fn failures(&self) -> usize {
        self.seeds.iter().filter(|s| s.result.is_err()).count()
    }

    pub fn mean_validation(&self) -> f64 {
        mean(self.successes().map(|s| s.validation))
    }

    pub fn mean_test(&self) -> f64 {
        mean(self.successes().map(|s| s.test))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

enum Loaded {
    Svm(Dataset),
    Pca(Vec<Vec<f64>>),
    Stream(SyntheticSpec),
}

fn load_data(config: &ExperimentConfig) -> Result<Loaded> {
    let task = config.task()?;
    let source = config.data_source()?;
    match (task, source) {
        (Task::Svm, DataSource::Libsvm(path)) => {
            let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            Ok(Loaded::Svm(parse_libsvm(std::io::BufReader::new(file))?))
        }
        (Task::Svm, DataSource::Separable { n, seed }) => Ok(Loaded::Svm(separable_dataset(n, seed)?)),
        (Task::Pca, DataSource::Libsvm(path)) => {
            let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            let ds = parse_libsvm(std::io::BufReader::new(file))?;
            let d = ds.dim();
            Ok(Loaded::Pca(ds.examples().iter().map(|x| x.to_dense(d)).collect()))
        }
        (Task::Pca, DataSource::Synthetic(spec)) => Ok(Loaded::Stream(spec)),
        (task, _) => Err(Error::Config(format!(
            "data source does not fit the {} task",
            if task == Task::Svm { "svm" } else { "pca" }
        ))),
    }
}

fn error_rate(model: &dyn Classifier, data: &Dataset) -> f64 {
    if data.is_empty() {
        f64::NAN
    } else {
        model.error_rate(data)
    }
}

fn run_svm_seed(config: &ExperimentConfig, data: &Dataset, seed: u64, model_path: &Path) -> Result<SeedSummary> {
    let (train_idx, val_idx, test_idx) = config.splits()?.assign(data.len(), seed);
    let (train, val, test) = (data.subset(&train_idx), data.subset(&val_idx), data.subset(&test_idx));
    let oracle = KernelOracle::new(config.kernel()?, &train)?;
    let mut probe = |c: &dyn Classifier| error_rate(c, &test);
    let algorithm = config.algorithm()?;
    let (log, model): (MetricLog, Box<dyn Classifier>) = match algorithm {
        "sbp" => {
            let run = sbp_train(&oracle, &config.sbp_config(seed)?, Some(&mut probe))?;
            let model = run.classifier(&oracle);
            save_classifier(model_path, &model)?;
            (run.log, Box::new(model))
        }
        "sparsify" => {
            let reference = config.get("reference").unwrap_or("sdca");
            let dense = baseline_train(&oracle, &config.baseline_config(reference, seed)?, None)?;
            let TrainedBaseline::Kernel(dense_model) = dense.model else {
                return Err(Error::Config(format!("cannot sparsify a {reference} model")));
            };
            let mut state = DualState::zeros(train.len());
            for sv in &dense_model.support {
                state.response_update(&oracle, sv.index, sv.alpha)?;
            }
            let problem = build_problem(&state, &oracle, dense_model.bias)?;
            let result = sparsify(&problem, &oracle, &config.sparsify_config()?)?;
            let model = result.classifier(&oracle);
            save_classifier(model_path, &model)?;
            let mut log = result.log;
            if let Some(last) = log.records.last_mut() {
                last.error = error_rate(&model, &test);
            }
            (log, Box::new(model))
        }
        other => {
            let run = baseline_train(&oracle, &config.baseline_config(other, seed)?, Some(&mut probe))?;
            if let TrainedBaseline::Kernel(model) = &run.model {
                save_classifier(model_path, model)?;
            }
            (run.log, Box::new(run.model))
        }
    };
    Ok(SeedSummary {
        log,
        validation: error_rate(model.as_ref(), &val),
        test: error_rate(model.as_ref(), &test),
    })
}

fn run_pca_seed(config: &ExperimentConfig, loaded: &Loaded, seed: u64, state_path: &Path) -> Result<SeedSummary> {
    let cfg = config.pca_config(seed)?;
    let summary = match loaded {
        Loaded::Stream(spec) => {
            let mut src = SyntheticSource::new(*spec)?;
            let sigma = src.second_moment().expect("synthetic families have a known second moment");
            let run = pca_train(&cfg, &mut src, Some(&sigma))?;
            save_eigstate(state_path, &run.state)?;
            let last = run.log.last().map_or(f64::NAN, |r| r.error);
            SeedSummary {
                log: run.log,
                validation: last,
                test: last,
            }
        }
        Loaded::Pca(rows) => {
            let (train_idx, val_idx, test_idx) = config.splits()?.assign(rows.len(), seed);
            let pick = |idx: &[usize]| -> Vec<Vec<f64>> { idx.iter().map(|&i| rows[i].clone()).collect() };
            let (train, val, test) = (pick(&train_idx), pick(&val_idx), pick(&test_idx));
            let d = rows.first().map_or(0, Vec::len);
            let reference: Option<DMatrix<f64>> = if !test.is_empty() && d <= DENSE_LIMIT {
                Some(empirical_second_moment(&test)?)
            } else {
                None
            };
            let mut src = EmpiricalSource::new(train)?;
            let run = pca_train(&cfg, &mut src, reference.as_ref())?;
            save_eigstate(state_path, &run.state)?;
            let captured = |rows: &[Vec<f64>]| {
                if rows.is_empty() {
                    f64::NAN
                } else {
                    evaluate_objective(&run.reported, Reference::Samples(rows))
                }
            };
            SeedSummary {
                validation: -captured(&val),
                test: -captured(&test),
                log: run.log,
            }
        }
        Loaded::Svm(_) => unreachable!("load_data pairs datasets with tasks"),
    };
    Ok(summary)
}

fn provenance(config: &ExperimentConfig, extra: &str) -> String {
    let mut out = String::from("# stochopt experiment\n");
    for (k, v) in config.entries().iter().filter(|(k, _)| k.as_str() != "out") {
        out.push_str(&format!("# {k}={v}\n"));
    }
    out.push_str(&format!("# {extra}\n"));
    out
}

/// Runs every seed of `config`, writing per-seed CSVs, model files and the
/// aggregate CSV into the output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let loaded = load_data(config)?;
    let out = config.output_dir();
    let name = config.name();
    let kind = match config.task()? {
        Task::Svm => MetricKind::Svm,
        Task::Pca => MetricKind::Pca,
    };
    let mut seeds = Vec::new();
    for seed in config.seeds()? {
        let stem = out.join(format!("{name}_seed{seed}"));
        let result = match &loaded {
            Loaded::Svm(data) => run_svm_seed(config, data, seed, &stem.with_extension("model")),
            other => run_pca_seed(config, other, seed, &stem.with_extension("eig")),
        };
        let csv_path = stem.with_extension("csv");
        let result = match result {
            Ok(summary) => {
                let body = provenance(config, &format!("seed={seed}")) + &summary.log.to_csv();
                write_atomic(&csv_path, &body)?;
                Ok(summary)
            }
            Err(Error::Io { path, source }) => return Err(Error::Io { path, source }),
            Err(e) => {
                let message = e.to_string();
                let body = provenance(config, &format!("seed={seed}"))
                    + &format!("# error={message}\n")
                    + &MetricLog::new(kind).to_csv();
                write_atomic(&csv_path, &body)?;
                log::warn!("seed {seed} failed: {message}");
                Err(message)
            }
        };
        seeds.push(SeedOutcome { seed, result, csv_path });
    }
    let logs: Vec<MetricLog> = seeds
        .iter()
        .filter_map(|s| s.result.as_ref().ok().map(|r| r.log.clone()))
        .collect();
    let aggregate = MetricLog::mean(&logs);
    let aggregate_path = match &aggregate {
        Some(agg) => {
            let path = out.join(format!("{name}_aggregate.csv"));
            let ok: Vec<String> = seeds.iter().filter(|s| s.result.is_ok()).map(|s| s.seed.to_string()).collect();
            let body = provenance(config, &format!("mean over seeds={}", ok.join(","))) + &agg.to_csv();
            write_atomic(&path, &body)?;
            Some(path)
        }
        None => None,
    };
    Ok(ExperimentReport {
        seeds,
        aggregate,
        aggregate_path,
    })
}

#[derive(Clone, Debug)]
pub struct SweepCandidate {
    pub value: f64,
    pub validation: f64,
    pub test: f64,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub key: String,
    pub candidates: Vec<SweepCandidate>,
    pub best: SweepCandidate,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},validation,test,selected\n", self.key);
        for c in &self.candidates {
            out.push_str(&format!(
                "{},{},{},{}\n",
                c.value,
                c.validation,
                c.test,
                u8::from(c.value == self.best.value)
            ));
        }
        out
    }
}

/// Index of the smallest finite `metric`; ties and all-NaN inputs go to the
/// first (smallest) candidate.
pub fn select_best(metrics: &[f64]) -> usize {
    let mut best = 0;
    for (i, &m) in metrics.iter().enumerate() {
        if m.is_finite() && !(metrics[best] <= m) {
            best = i;
        }
    }
    best
}

/// Runs `config` once per candidate value of `key`, each in its own
/// subdirectory, and selects the candidate with the lowest mean validation
/// metric.
pub fn run_sweep(config: &ExperimentConfig, key: &str, values: &[f64]) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::Config("a sweep needs at least one candidate".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let base = config.output_dir();
    let mut candidates = Vec::new();
    for &value in &sorted {
        let mut cfg = config.clone();
        cfg.entries.remove("sweep_key");
        cfg.entries.remove("sweep_values");
        cfg.set(key, value.to_string())?;
        cfg.set("out", base.join(format!("{key}={value}")).to_string_lossy().into_owned())?;
        let report = run_experiment(&cfg)?;
        candidates.push(SweepCandidate {
            value,
            validation: report.mean_validation(),
            test: report.mean_test(),
        });
    }
    let metrics: Vec<f64> = candidates.iter().map(|c| c.validation).collect();
    let best = candidates[select_best(&metrics)].clone();
    let report = SweepReport {
        key: key.to_string(),
        candidates,
        best,
    };
    let body = provenance(config, &format!("sweep over {key}")) + &report.to_csv();
    write_atomic(&base.join(format!("{}_sweep.csv", config.name())), &body)?;
    Ok(report)
}
