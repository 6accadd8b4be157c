//! Kernel evaluation with an evaluation counter, and the coefficient/response
//! state shared by every solver that keeps a full response vector.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::data::{Dataset, SparseVector};
use crate::error::{Error, Result};

/// Kernel function and its parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelSpec {
    /// `K(x, x') = <x, x'>`.
    Linear,
    /// `K(x, x') = exp(-||x - x'||^2 / (2 sigma_sq))`. The default Gaussian form.
    Gaussian { sigma_sq: f64 },
    /// `K(x, x') = exp(-gamma ||x - x'||^2)`, the LIBSVM convention.
    GaussianGamma { gamma: f64 },
}

impl KernelSpec {
    pub fn gaussian(sigma_sq: f64) -> Result<Self> {
        let spec = KernelSpec::Gaussian { sigma_sq };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Gaussian { sigma_sq: p } | KernelSpec::GaussianGamma { gamma: p } => {
                if p > 0.0 && p.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!("gaussian bandwidth must be positive, got {p}")))
                }
            }
        }
    }

    /// Multiplier `g` such that the Gaussian kernel is `exp(-g ||x - x'||^2)`.
    pub fn gaussian_rate(&self) -> Option<f64> {
        match *self {
            KernelSpec::Linear => None,
            KernelSpec::Gaussian { sigma_sq } => Some(0.5 / sigma_sq),
            KernelSpec::GaussianGamma { gamma } => Some(gamma),
        }
    }

    /// Equivalent `sigma^2` for either Gaussian convention.
    pub fn sigma_sq(&self) -> Option<f64> {
        self.gaussian_rate().map(|g| 0.5 / g)
    }

    /// Direct evaluation, not counted.
    pub fn eval(&self, a: &SparseVector, b: &SparseVector) -> f64 {
        self.eval_with_norms(a, b, a.norm_sq(), b.norm_sq())
    }

    pub(crate) fn eval_with_norms(
        &self,
        a: &SparseVector,
        b: &SparseVector,
        a_sq: f64,
        b_sq: f64,
    ) -> f64 {
        let ip = a.dot(b);
        match self.gaussian_rate() {
            None => ip,
            Some(g) => {
                let dist_sq = (a_sq + b_sq - 2.0 * ip).max(0.0);
                (-g * dist_sq).exp()
            }
        }
    }

    /// Kernel self-similarity `K(x, x)`.
    pub fn self_similarity(&self, x: &SparseVector) -> f64 {
        match self {
            KernelSpec::Linear => x.norm_sq(),
            _ => 1.0,
        }
    }
}

/// Counts kernel evaluations over a fixed dataset. `Sync`: the counter is
/// atomic and the optional row cache sits behind a mutex.
pub struct KernelOracle<'a> {
    spec: KernelSpec,
    data: &'a Dataset,
    sq_norms: Vec<f64>,
    evals: AtomicU64,
    cache: Option<Mutex<RowCache>>,
}

struct RowCache {
    capacity: usize,
    rows: HashMap<usize, Arc<[f64]>>,
}

impl<'a> KernelOracle<'a> {
    pub fn new(spec: KernelSpec, data: &'a Dataset) -> Result<Self> {
        spec.validate()?;
        let sq_norms: Vec<f64> = data.examples().iter().map(SparseVector::norm_sq).collect();
        if let Some((i, k)) = (0..data.len())
            .map(|i| (i, spec.self_similarity(data.x(i))))
            .find(|&(_, k)| k > 1.0 + 1e-12)
        {
            log::warn!("K(x, x) = {k} > 1 at example {i}; convergence guarantees assume K(x, x) <= 1");
        }
        Ok(Self {
            spec,
            data,
            sq_norms,
            evals: AtomicU64::new(0),
            cache: None,
        })
    }

    /// Enables a cache holding up to `rows` full kernel rows. Cache hits are
    /// not counted as evaluations.
    pub fn with_row_cache(mut self, rows: usize) -> Self {
        self.cache = Some(Mutex::new(RowCache {
            capacity: rows,
            rows: HashMap::new(),
        }));
        self
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    fn check(&self, i: usize) -> Result<()> {
        if i < self.data.len() {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                index: i,
                len: self.data.len(),
            })
        }
    }

    fn raw(&self, i: usize, j: usize) -> f64 {
        if i == j && self.spec.gaussian_rate().is_some() {
            return 1.0;
        }
        self.spec
            .eval_with_norms(self.data.x(i), self.data.x(j), self.sq_norms[i], self.sq_norms[j])
    }

    fn cached_row(&self, i: usize) -> Option<Arc<[f64]>> {
        let cache = self.cache.as_ref()?.lock().expect("row cache poisoned");
        cache.rows.get(&i).cloned()
    }

    /// `K(x_i, x_j)`; one counted evaluation unless served from the cache.
    pub fn eval(&self, i: usize, j: usize) -> Result<f64> {
        self.check(i)?;
        self.check(j)?;
        if let Some(row) = self.cached_row(i) {
            return Ok(row[j]);
        }
        if let Some(row) = self.cached_row(j) {
            return Ok(row[i]);
        }
        self.evals.fetch_add(1, Ordering::Relaxed);
        Ok(self.raw(i, j))
    }

    /// The full row `K(x_i, x_j)` for all `j`; `n` counted evaluations on a
    /// cache miss.
    pub fn row(&self, i: usize) -> Result<Arc<[f64]>> {
        self.check(i)?;
        if let Some(row) = self.cached_row(i) {
            return Ok(row);
        }
        let n = self.data.len();
        let row: Arc<[f64]> = (0..n).map(|j| self.raw(i, j)).collect();
        self.evals.fetch_add(n as u64, Ordering::Relaxed);
        if let Some(cache) = &self.cache {
            let mut cache = cache.lock().expect("row cache poisoned");
            if cache.rows.len() < cache.capacity {
                cache.rows.insert(i, row.clone());
            }
        }
        Ok(row)
    }

    /// `K(x_i, x_i)`; counted like any other evaluation.
    pub fn diag(&self, i: usize) -> Result<f64> {
        self.eval(i, i)
    }

    /// Kernel between a training example and an arbitrary point. Counted.
    pub fn eval_external(&self, i: usize, x: &SparseVector) -> Result<f64> {
        self.check(i)?;
        self.evals.fetch_add(1, Ordering::Relaxed);
        Ok(self
            .spec
            .eval_with_norms(self.data.x(i), x, self.sq_norms[i], x.norm_sq()))
    }

    /// `max_i K(x_i, x_i)` computed without touching the counter; for Gaussian
    /// kernels this is 1, for linear it is the largest squared norm.
    pub fn max_self_similarity(&self) -> f64 {
        match self.spec {
            KernelSpec::Linear => self.sq_norms.iter().copied().fold(0.0, f64::max),
            _ => 1.0,
        }
    }
}

/// Coefficients `alpha` of `w = sum_i alpha_i y_i Phi(x_i)`, together with the
/// responses `c_i = y_i <w, Phi(x_i)>` and the cached `||w||^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub alpha: Vec<f64>,
    pub responses: Vec<f64>,
    pub norm_sq: f64,
}

impl DualState {
    pub fn zeros(n: usize) -> Self {
        Self {
            alpha: vec![0.0; n],
            responses: vec![0.0; n],
            norm_sq: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.max(0.0).sqrt()
    }

    pub fn support_size(&self) -> usize {
        self.alpha.iter().filter(|&&a| a != 0.0).count()
    }

    /// Adds `delta` to `alpha_i` and refreshes all responses with one kernel
    /// row (`n` evaluations).
    pub fn response_update(&mut self, oracle: &KernelOracle<'_>, i: usize, delta: f64) -> Result<()> {
        if i >= self.len() {
            return Err(Error::OutOfBounds {
                index: i,
                len: self.len(),
            });
        }
        let row = oracle.row(i)?;
        self.apply_row(oracle.data(), i, delta, &row);
        Ok(())
    }

    /// Same as [`Self::response_update`] with the kernel row already in hand.
    pub(crate) fn apply_row(&mut self, data: &Dataset, i: usize, delta: f64, row: &[f64]) {
        let yi = data.y(i);
        let c_old = self.responses[i];
        self.alpha[i] += delta;
        for (j, c) in self.responses.iter_mut().enumerate() {
            *c += yi * data.y(j) * delta * row[j];
        }
        self.norm_sq += 2.0 * delta * c_old + delta * delta * row[i];
    }

    /// Multiplies `alpha`, the responses and `||w||` by `factor`.
    pub fn rescale(&mut self, factor: f64) -> Result<()> {
        if !(factor >= 0.0 && factor.is_finite()) {
            return Err(Error::contract(format!(
                "rescale factor must be finite and nonnegative, got {factor}"
            )));
        }
        self.alpha.iter_mut().for_each(|a| *a *= factor);
        self.responses.iter_mut().for_each(|c| *c *= factor);
        self.norm_sq *= factor * factor;
        Ok(())
    }

    /// Dual objective `sum_i alpha_i - ||w||^2 / 2`.
    pub fn dual_objective(&self) -> f64 {
        self.alpha.iter().sum::<f64>() - 0.5 * self.norm_sq
    }
}
