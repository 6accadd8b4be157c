//! Truncated eigendecompositions `U diag(sigma) U^T + c (I - U U^T)` and their
//! rank-one updates.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::svm::model::Lines;

pub const EIGSTATE_HEADER: &str = "EIGSTATE";
pub const EIGSTATE_VERSION: &str = "v1";

/// Orthonormality drift that triggers re-orthonormalization.
pub const ORTHO_TOLERANCE: f64 = 1e-10;

/// `M = U diag(sigma) U^T + complement * (I - U U^T)` with `U` a `d x k'`
/// column-orthonormal basis. Eigenvalues are kept in decreasing order.
#[derive(Clone, Debug, PartialEq)]
pub struct EigState {
    pub basis: DMatrix<f64>,
    pub eigvals: Vec<f64>,
    pub complement: f64,
}

impl EigState {
    /// The matrix `complement * I` in dimension `d`.
    pub fn scalar(d: usize, complement: f64) -> Self {
        Self {
            basis: DMatrix::zeros(d, 0),
            eigvals: Vec::new(),
            complement,
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self::scalar(d, 0.0)
    }

    /// Builds a state from explicit eigenpairs; columns of `basis` must be
    /// orthonormal.
    pub fn from_parts(basis: DMatrix<f64>, eigvals: Vec<f64>, complement: f64) -> Result<Self> {
        if basis.ncols() != eigvals.len() {
            return Err(Error::contract("basis columns and eigenvalues differ in count"));
        }
        if basis.ncols() > basis.nrows() {
            return Err(Error::contract("explicit rank exceeds the dimension"));
        }
        let mut s = Self {
            basis,
            eigvals,
            complement,
        };
        if s.ortho_error() > 1e-8 {
            return Err(Error::contract("basis is not orthonormal"));
        }
        s.sort_and_sign();
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.eigvals.len()
    }

    /// Multiplicity of the complement eigenvalue.
    pub fn complement_multiplicity(&self) -> usize {
        self.dim() - self.rank()
    }

    pub fn trace(&self) -> f64 {
        self.eigvals.iter().sum::<f64>() + self.complement * self.complement_multiplicity() as f64
    }

    /// `max |U^T U - I|`.
    pub fn ortho_error(&self) -> f64 {
        let g = self.basis.transpose() * &self.basis;
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Re-orthonormalizes the basis when it has drifted past
    /// [`ORTHO_TOLERANCE`]. Returns whether a pass ran.
    pub fn reorthonormalize_if_needed(&mut self) -> bool {
        if self.ortho_error() <= ORTHO_TOLERANCE {
            return false;
        }
        orthonormalize_columns(&mut self.basis);
        true
    }

    /// Dense `d x d` matrix; for tests and small problems.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let u = &self.basis;
        let mut m = DMatrix::identity(d, d) * self.complement;
        m -= u * u.transpose() * self.complement;
        m += u * DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigvals)) * u.transpose();
        m
    }

    /// Decomposes `M' = f(M, x)` where `f` acts on the bordered small matrix.
    ///
    /// With `x_hat = U^T x`, `v = x - U x_hat` and `r = ||v||`, `build` receives
    /// `(x_hat, r)` and returns the `(k'+1) x (k'+1)` matrix of `M'` in the
    /// basis `[U, v / r]` (or `k' x k'` in `U` when `r = 0`). Returns the raw
    /// eigenvalues of that matrix, in the new basis order; the caller then
    /// writes the transformed eigenvalues back with [`Self::set_eigvals`].
    pub(crate) fn bordered_decompose(
        &mut self,
        x: &[f64],
        build: impl FnOnce(&DVector<f64>, f64) -> DMatrix<f64>,
    ) -> Result<Vec<f64>> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::contract(format!("sample has dimension {}, expected {d}", x.len())));
        }
        let xv = DVector::from_column_slice(x);
        let u = &self.basis;
        let mut x_hat = u.transpose() * &xv;
        let mut v = &xv - u * &x_hat;
        // A second Gram-Schmidt pass removes what the first left behind.
        let again = u.transpose() * &v;
        v -= u * &again;
        x_hat += again;
        let r = v.norm();
        let grow = self.rank() < d && r > 1e-12 * xv.norm().max(1e-300);

        let expected = self.rank() + usize::from(grow);
        if expected == 0 {
            return Ok(Vec::new());
        }
        let small = build(&x_hat, if grow { r } else { 0.0 });
        if small.nrows() != expected || small.ncols() != expected {
            return Err(Error::contract("bordered matrix has the wrong size"));
        }
        let eig = SymmetricEigen::new(small);
        let extended = if grow {
            let mut e = DMatrix::zeros(d, expected);
            e.columns_mut(0, self.rank()).copy_from(&self.basis);
            e.set_column(self.rank(), &(v / r));
            e
        } else {
            self.basis.clone()
        };
        self.basis = extended * &eig.eigenvectors;
        Ok(eig.eigenvalues.iter().copied().collect())
    }

    /// Replaces the eigenvalues (in current basis order) and restores the
    /// decreasing order and sign convention.
    pub(crate) fn set_eigvals(&mut self, eigvals: Vec<f64>) {
        debug_assert_eq!(eigvals.len(), self.basis.ncols());
        self.eigvals = eigvals;
        self.sort_and_sign();
        self.reorthonormalize_if_needed();
    }

    /// Exact eigendecomposition of `M + eta x x^T`; the complement value is
    /// unchanged and the explicit rank grows by at most one.
    pub fn rank1_update(&mut self, eta: f64, x: &[f64]) -> Result<()> {
        let sigma = self.eigvals.clone();
        let comp = self.complement;
        let vals = self.bordered_decompose(x, |x_hat, r| {
            let k = sigma.len();
            let n = if r > 0.0 { k + 1 } else { k };
            let mut a = DMatrix::zeros(n, n);
            for i in 0..k {
                a[(i, i)] = sigma[i];
                for j in 0..k {
                    a[(i, j)] += eta * x_hat[i] * x_hat[j];
                }
            }
            if r > 0.0 {
                for i in 0..k {
                    a[(i, k)] = eta * r * x_hat[i];
                    a[(k, i)] = eta * r * x_hat[i];
                }
                a[(k, k)] = eta * r * r + comp;
            }
            a
        })?;
        self.set_eigvals(vals);
        Ok(())
    }

    /// Drops explicit eigenpairs whose eigenvalue is within `tol` of the
    /// complement value, folding them into the complement.
    pub fn absorb_into_complement(&mut self, tol: f64) {
        let keep: Vec<usize> = (0..self.rank())
            .filter(|&i| (self.eigvals[i] - self.complement).abs() > tol)
            .collect();
        if keep.len() == self.rank() {
            return;
        }
        self.select_columns(&keep);
    }

    /// Keeps the listed explicit eigenpairs, in the given order.
    pub(crate) fn select_columns(&mut self, keep: &[usize]) {
        self.basis = self.basis.select_columns(keep);
        self.eigvals = keep.iter().map(|&i| self.eigvals[i]).collect();
    }

    /// Keeps the `k` largest explicit eigenvalues; ties keep the lower index.
    pub fn truncate_top(&mut self, k: usize) {
        if self.rank() <= k {
            return;
        }
        let keep: Vec<usize> = (0..k).collect();
        self.select_columns(&keep);
    }

    /// An orthonormal `d x k` basis for the `k` largest (or smallest)
    /// eigenvalues of the full matrix, counting the complement eigenvalue with
    /// its multiplicity. Complement directions, when needed, come from
    /// orthogonalizing the standard basis against `U`.
    pub fn reported_basis(&self, k: usize, largest: bool) -> DMatrix<f64> {
        let d = self.dim();
        let k = k.min(d);
        let mut order: Vec<usize> = (0..self.rank()).collect();
        if !largest {
            order.reverse();
        }
        let beats = |s: f64| if largest { s >= self.complement } else { s <= self.complement };
        let preferred = order.iter().take_while(|&&i| beats(self.eigvals[i])).count();
        let from_explicit_first = preferred.min(k);
        let mut need_comp = (k - from_explicit_first).min(self.complement_multiplicity());
        let from_explicit = k - need_comp;
        let chosen: Vec<usize> = order.iter().take(from_explicit).copied().collect();
        let mut out = self.basis.select_columns(&chosen);
        if need_comp > 0 {
            let mut span = self.basis.clone();
            let mut extra = Vec::new();
            for e in 0..d {
                if need_comp == 0 {
                    break;
                }
                let mut v = DVector::zeros(d);
                v[e] = 1.0;
                for _ in 0..2 {
                    let proj = span.transpose() * &v;
                    v -= &span * proj;
                }
                let n = v.norm();
                if n > 1e-6 {
                    v /= n;
                    let c = span.ncols();
                    span = span.insert_column(c, 0.0);
                    span.set_column(c, &v);
                    extra.push(v);
                    need_comp -= 1;
                }
            }
            let base = out.ncols();
            out = out.resize_horizontally(base + extra.len(), 0.0);
            for (j, v) in extra.iter().enumerate() {
                out.set_column(base + j, v);
            }
        }
        out
    }

    /// `tr(Sigma M)` for a symmetric `Sigma`.
    pub fn trace_product(&self, sigma: &DMatrix<f64>) -> f64 {
        let mut explicit = 0.0;
        let mut captured = 0.0;
        for (j, s) in self.eigvals.iter().enumerate() {
            let u = self.basis.column(j);
            let q = (u.transpose() * sigma * u)[(0, 0)];
            explicit += s * q;
            captured += q;
        }
        explicit + self.complement * (sigma.trace() - captured)
    }

    fn sort_and_sign(&mut self) {
        let mut order: Vec<usize> = (0..self.rank()).collect();
        order.sort_by(|&a, &b| self.eigvals[b].total_cmp(&self.eigvals[a]));
        if order.iter().enumerate().any(|(i, &o)| i != o) {
            self.select_columns(&order);
        }
        apply_sign_convention(&mut self.basis);
    }

    /// Text form: header line, `d k' complement sigma_1..sigma_k'`, then one
    /// line of `d` values per basis column.
    pub fn to_text(&self) -> String {
        let mut out = format!("{EIGSTATE_HEADER} {EIGSTATE_VERSION}\n");
        let _ = write!(out, "{} {} {}", self.dim(), self.rank(), self.complement);
        for s in &self.eigvals {
            let _ = write!(out, " {s}");
        }
        out.push('\n');
        for j in 0..self.rank() {
            let col: Vec<String> = self.basis.column(j).iter().map(|v| v.to_string()).collect();
            out.push_str(&col.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        let (off, header) = lines.next_line("header")?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(EIGSTATE_HEADER) {
            return Err(Error::Format {
                offset: off,
                msg: format!("expected {EIGSTATE_HEADER} header"),
            });
        }
        let version = parts.next().unwrap_or("");
        if version != EIGSTATE_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version.to_string(),
                expected: EIGSTATE_VERSION.to_string(),
            });
        }
        let (off, line) = lines.next_line("dimension line")?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: String| Error::Format { offset: off, msg };
        if toks.len() < 3 {
            return Err(bad("expected d, k' and the complement value".into()));
        }
        let d: usize = toks[0].parse().map_err(|_| bad(format!("bad dimension {:?}", toks[0])))?;
        let k: usize = toks[1].parse().map_err(|_| bad(format!("bad rank {:?}", toks[1])))?;
        if k > d {
            return Err(bad(format!("rank {k} exceeds dimension {d}")));
        }
        if toks.len() != 3 + k {
            return Err(bad(format!("expected {k} eigenvalues, found {}", toks.len() - 3)));
        }
        let nums: Vec<f64> = toks[2..]
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad number {t:?}"))))
            .collect::<Result<_>>()?;
        let complement = nums[0];
        let eigvals = nums[1..].to_vec();
        let mut basis = DMatrix::zeros(d, k);
        for j in 0..k {
            let (off, line) = lines.next_line("basis row")?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| Error::Format {
                        offset: off,
                        msg: format!("bad number {t:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            if vals.len() != d {
                return Err(Error::Format {
                    offset: off,
                    msg: format!("basis row has {} values, expected {d}", vals.len()),
                });
            }
            basis.set_column(j, &DVector::from_vec(vals));
        }
        if let Ok((off, extra)) = lines.next_line("") {
            return Err(Error::Format {
                offset: off,
                msg: format!("unexpected trailing content {extra:?}"),
            });
        }
        Ok(Self {
            basis,
            eigvals,
            complement,
        })
    }
}

/// Makes the first non-negligible coordinate of every column positive.
pub fn apply_sign_convention(basis: &mut DMatrix<f64>) {
    for j in 0..basis.ncols() {
        let mut col = basis.column_mut(j);
        let scale = col.amax();
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-9 * scale) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass per column.
pub fn orthonormalize_columns(basis: &mut DMatrix<f64>) {
    for j in 0..basis.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let dot = basis.column(i).dot(&basis.column(j));
                let ci = basis.column(i).clone_owned();
                basis.column_mut(j).axpy(-dot, &ci, 1.0);
            }
        }
        let n = basis.column(j).norm();
        if n > 0.0 {
            basis.column_mut(j).unscale_mut(n);
        }
    }
}

/// Cosines of the principal angles between two orthonormal bases, in
/// decreasing order.
pub fn principal_cosines(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let m = a.transpose() * b;
    let mut s: Vec<f64> = m.singular_values().iter().map(|v| v.min(1.0)).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Largest principal angle between two subspaces of equal dimension.
pub fn largest_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let cos = principal_cosines(a, b);
    match cos.last() {
        Some(&c) if cos.len() == a.ncols().min(b.ncols()) => c.clamp(-1.0, 1.0).acos(),
        _ => std::f64::consts::FRAC_PI_2,
    }
}

/// Sorted eigenpairs of a dense symmetric matrix, decreasing.
pub fn dense_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = eig.eigenvectors.select_columns(&order);
    apply_sign_convention(&mut vecs);
    (vals, vecs)
}
