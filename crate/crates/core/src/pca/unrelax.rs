//! Decomposition of a feasible capped-simplex eigenvalue vector into a convex
//! combination of scaled rank-`(d - k)` projections.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    /// The `d - k` eigenbasis coordinates spanned by this component, increasing.
    pub indices: Vec<usize>,
}

/// Greedy decomposition of `eigvals` (length `d`, summing to one, each at most
/// `1 / (d - k)`).
///
/// Each round takes the `d - k` largest remaining values (lower index first on
/// ties) and subtracts the largest amount `lambda` that keeps every value
/// nonnegative and every unchosen value within the shrunken cap
/// `remaining / (d - k)`. The component weight is `(d - k) lambda`.
pub fn unrelax_decompose(eigvals: &[f64], k: usize) -> Result<Vec<MixtureComponent>> {
    let d = eigvals.len();
    if k >= d {
        return Err(Error::contract(format!("need k < d, got k = {k}, d = {d}")));
    }
    let m = (d - k) as f64;
    let cap = 1.0 / m;
    let total: f64 = eigvals.iter().sum();
    if (total - 1.0).abs() > 1e-9 || eigvals.iter().any(|&v| v < -1e-12 || v > cap + 1e-12) {
        return Err(Error::contract(format!(
            "eigenvalues must sum to 1 and lie in [0, {cap}]"
        )));
    }
    let mut rest: Vec<f64> = eigvals.iter().map(|v| v.clamp(0.0, cap)).collect();
    let mut mass = total;
    let mut out = Vec::new();
    while mass > 1e-12 {
        if out.len() >= d {
            return Err(Error::contract("decomposition did not finish within d components"));
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| rest[b].total_cmp(&rest[a]));
        let chosen = &order[..d - k];
        let smallest = rest[chosen[d - k - 1]];
        let largest_other = order[d - k..].iter().map(|&i| rest[i]).fold(0.0, f64::max);
        let lambda = smallest.min(mass / m - largest_other).max(0.0);
        if lambda <= 0.0 {
            return Err(Error::contract("decomposition stalled"));
        }
        let mut indices = chosen.to_vec();
        indices.sort_unstable();
        for &i in &indices {
            rest[i] = (rest[i] - lambda).max(0.0);
        }
        mass -= m * lambda;
        out.push(MixtureComponent {
            weight: m * lambda,
            indices,
        });
    }
    Ok(out)
}

/// Eigenvalue vector `sum_j w_j P_j / (d - k)` rebuilt from a decomposition.
pub fn reconstruct(components: &[MixtureComponent], d: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    let scale = 1.0 / (d - k) as f64;
    for c in components {
        for &i in &c.indices {
            out[i] += c.weight * scale;
        }
    }
    out
}
