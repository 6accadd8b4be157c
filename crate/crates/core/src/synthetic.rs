//! Synthetic PCA streams with known second moments.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::pca::SampleSource;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticFamily {
    /// Zero-mean Gaussian with covariance `diag(sigma^(k))`.
    GaussianSigmaK,
    /// The standard basis vector `e_i` with probability proportional to
    /// `sqrt(sigma^(k)_i)`.
    OrthogonalSigmaK,
    /// `[sqrt 3, 0]` with probability 1/3, otherwise `[0, sqrt 2]`.
    TwoPointFailure,
}

impl SyntheticFamily {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "gaussian_sigma_k" => Self::GaussianSigmaK,
            "orthogonal_sigma_k" => Self::OrthogonalSigmaK,
            "two_point_failure" => Self::TwoPointFailure,
            other => return Err(Error::Config(format!("unknown synthetic family {other:?}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::GaussianSigmaK => "gaussian_sigma_k",
            Self::OrthogonalSigmaK => "orthogonal_sigma_k",
            Self::TwoPointFailure => "two_point_failure",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub family: SyntheticFamily,
    pub d: usize,
    pub k: usize,
}

impl SyntheticSpec {
    pub fn new(family: SyntheticFamily, d: usize, k: usize) -> Result<Self> {
        let spec = Self { family, d, k };
        spec.validate()?;
        Ok(spec)
    }

    pub fn two_point() -> Self {
        Self {
            family: SyntheticFamily::TwoPointFailure,
            d: 2,
            k: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == SyntheticFamily::TwoPointFailure && self.d != 2 {
            return Err(Error::Config("two_point_failure lives in d = 2".into()));
        }
        if self.d < 2 || self.k == 0 || self.k >= self.d {
            return Err(Error::Config(format!(
                "synthetic spec needs d >= 2 and 1 <= k < d, got d = {}, k = {}",
                self.d, self.k
            )));
        }
        Ok(())
    }

    /// Diagonal of `E[x x^T]` for the family.
    pub fn second_moment_diagonal(&self) -> Vec<f64> {
        match self.family {
            SyntheticFamily::GaussianSigmaK => sigma_k(self.d, self.k),
            SyntheticFamily::OrthogonalSigmaK => orthogonal_probabilities(self.d, self.k),
            SyntheticFamily::TwoPointFailure => vec![1.0, 4.0 / 3.0],
        }
    }

    pub fn second_moment(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(self.second_moment_diagonal()))
    }
}

/// `sigma_i = (r^-i / sum_j r^-j + 1[i <= k] / k) / 2` with `r = 1.1`,
/// normalized to unit sum.
pub fn sigma_k(d: usize, k: usize) -> Vec<f64> {
    let smooth: Vec<f64> = (1..=d).map(|i| 1.1f64.powi(-(i as i32))).collect();
    let z: f64 = smooth.iter().sum();
    let raw: Vec<f64> = smooth
        .iter()
        .enumerate()
        .map(|(i, s)| 0.5 * (s / z + if i < k { 1.0 / k as f64 } else { 0.0 }))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Emission probabilities `sqrt(sigma_i) / sum_j sqrt(sigma_j)`.
pub fn orthogonal_probabilities(d: usize, k: usize) -> Vec<f64> {
    let roots: Vec<f64> = sigma_k(d, k).into_iter().map(f64::sqrt).collect();
    let z: f64 = roots.iter().sum();
    roots.into_iter().map(|r| r / z).collect()
}

pub fn sample_synthetic(spec: &SyntheticSpec, rng: &mut Rng) -> Vec<f64> {
    match spec.family {
        SyntheticFamily::GaussianSigmaK => sigma_k(spec.d, spec.k)
            .into_iter()
            .map(|s| {
                let z: f64 = StandardNormal.sample(rng);
                s.sqrt() * z
            })
            .collect(),
        SyntheticFamily::OrthogonalSigmaK => {
            let p = orthogonal_probabilities(spec.d, spec.k);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = spec.d - 1;
            for (i, pi) in p.iter().enumerate() {
                acc += pi;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            let mut x = vec![0.0; spec.d];
            x[pick] = 1.0;
            x
        }
        SyntheticFamily::TwoPointFailure => {
            if rng.random_range(0..3) == 0 {
                vec![3f64.sqrt(), 0.0]
            } else {
                vec![0.0, 2f64.sqrt()]
            }
        }
    }
}

/// A [`SampleSource`] drawing from a synthetic family. The diagonal and
/// standard deviations are computed once.
#[derive(Clone, Debug)]
pub struct SyntheticSource {
    spec: SyntheticSpec,
    scale: Vec<f64>,
    cumulative: Vec<f64>,
}

impl SyntheticSource {
    pub fn new(spec: SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        let diag = spec.second_moment_diagonal();
        let cumulative = diag
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            spec,
            scale: diag.iter().map(|s| s.sqrt()).collect(),
            cumulative,
        })
    }

    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }
}

impl SampleSource for SyntheticSource {
    fn dim(&self) -> usize {
        self.spec.d
    }

    fn sample(&mut self, rng: &mut Rng) -> Vec<f64> {
        match self.spec.family {
            SyntheticFamily::GaussianSigmaK => self
                .scale
                .iter()
                .map(|s| {
                    let z: f64 = StandardNormal.sample(rng);
                    s * z
                })
                .collect(),
            SyntheticFamily::OrthogonalSigmaK => {
                let u: f64 = rng.random();
                let pick = self.cumulative.partition_point(|&c| c <= u).min(self.spec.d - 1);
                let mut x = vec![0.0; self.spec.d];
                x[pick] = 1.0;
                x
            }
            SyntheticFamily::TwoPointFailure => sample_synthetic(&self.spec, rng),
        }
    }

    fn second_moment(&self) -> Option<DMatrix<f64>> {
        Some(self.spec.second_moment())
    }
}
