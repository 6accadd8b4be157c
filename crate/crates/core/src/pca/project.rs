//! Eigenvalue projections onto the feasible sets of the convex PCA
//! relaxations. Every routine takes eigenvalues together with their
//! multiplicities, so an implicit block of repeated eigenvalues costs O(1).

use crate::error::{Error, Result};

fn check_lengths(values: &[f64], mult: &[f64]) -> Result<()> {
    if values.len() != mult.len() {
        return Err(Error::contract("eigenvalue and multiplicity lists differ in length"));
    }
    if values.iter().any(|v| !v.is_finite()) || mult.iter().any(|&m| !(m >= 0.0)) {
        return Err(Error::contract("eigenvalues must be finite and multiplicities nonnegative"));
    }
    Ok(())
}

/// Finds `S` with `sum_i m_i clip(v_i + S, 0, 1) = k` and returns it with the
/// clipped values. This is the Frobenius projection onto
/// `{0 <= M <= I, tr M = k}` in the eigenbasis of the input.
pub fn project_trace_simplex(values: &[f64], mult: &[f64], k: f64) -> Result<(f64, Vec<f64>)> {
    check_lengths(values, mult)?;
    let total: f64 = mult.iter().sum();
    if !(k >= 0.0) || k > total * (1.0 + 1e-12) {
        return Err(Error::Infeasible(format!(
            "trace {k} cannot be reached with total multiplicity {total}"
        )));
    }
    let phi = |s: f64| -> f64 {
        values
            .iter()
            .zip(mult)
            .map(|(v, m)| m * (v + s).clamp(0.0, 1.0))
            .sum()
    };
    let mut breaks: Vec<f64> = values
        .iter()
        .zip(mult)
        .filter(|(_, &m)| m > 0.0)
        .flat_map(|(v, _)| [-v, 1.0 - v])
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    if breaks.is_empty() {
        return Ok((0.0, values.to_vec()));
    }

    let s = if k >= total {
        *breaks.last().expect("nonempty")
    } else {
        // Largest breakpoint index with phi(b) <= k; phi is nondecreasing.
        let (mut lo, mut hi) = (0usize, breaks.len());
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if phi(breaks[mid]) <= k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let b = breaks[lo];
        let at_b = phi(b);
        if at_b >= k || lo + 1 == breaks.len() {
            b
        } else {
            let mid = 0.5 * (b + breaks[lo + 1]);
            let slope: f64 = values
                .iter()
                .zip(mult)
                .filter(|(v, _)| {
                    let z = *v + mid;
                    z > 0.0 && z < 1.0
                })
                .map(|(_, m)| m)
                .sum();
            b + (k - at_b) / slope
        }
    };
    let s = if values.iter().zip(mult).all(|(v, &m)| m == 0.0 || (*v >= 0.0 && *v <= 1.0))
        && (phi(0.0) - k).abs() <= 1e-12 * k.max(1.0)
    {
        0.0
    } else {
        s
    };
    Ok((s, values.iter().map(|v| (v + s).clamp(0.0, 1.0)).collect()))
}

/// Finds `Z > 0` with `sum_i m_i min(cap, v_i / Z) = 1` and returns it with
/// the scaled values: the relative-entropy projection onto
/// `{0 <= W <= cap I, tr W = 1}`.
pub fn project_relative_entropy(values: &[f64], mult: &[f64], cap: f64) -> Result<(f64, Vec<f64>)> {
    check_lengths(values, mult)?;
    if values.iter().any(|&v| v < 0.0) {
        return Err(Error::contract("relative-entropy projection needs nonnegative eigenvalues"));
    }
    let total_mult: f64 = mult.iter().sum();
    if !(cap > 0.0) || total_mult * cap < 1.0 - 1e-12 {
        return Err(Error::Infeasible(format!(
            "cap {cap} with multiplicity {total_mult} cannot hold unit trace"
        )));
    }
    let mass: f64 = values.iter().zip(mult).map(|(v, m)| v * m).sum();
    if !(mass > 0.0) {
        return Err(Error::Degenerate("all eigenvalues are zero".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| mult[i] > 0.0).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    // Cap the p largest values, scale the rest.
    let mut capped_mass = 0.0;
    let mut rest = mass;
    let mut z = f64::NAN;
    for p in 0..=order.len() {
        if p > 0 {
            let i = order[p - 1];
            capped_mass += mult[i] * cap;
            rest -= mult[i] * values[i];
        }
        let free = 1.0 - capped_mass;
        if free <= 1e-15 {
            z = if p < order.len() { values[order[p]] / cap } else { 0.0 };
            z = z.max(f64::MIN_POSITIVE);
            break;
        }
        let candidate = rest.max(0.0) / free;
        let next_ok = p == order.len() || values[order[p]] <= cap * candidate * (1.0 + 1e-12);
        let prefix_ok = p == 0 || values[order[p - 1]] >= cap * candidate * (1.0 - 1e-12);
        if next_ok && prefix_ok && candidate > 0.0 {
            z = candidate;
            break;
        }
    }
    if !z.is_finite() {
        return Err(Error::Degenerate("no normalizer found".into()));
    }
    Ok((z, values.iter().map(|v| (v / z).min(cap)).collect()))
}

/// Projection of at most `K + 1` explicit eigenvalues onto trace-`k`
/// matrices of rank at most `K`. With `K + 1` inputs each leave-one-out
/// subset is projected; the one closest to the input in Frobenius norm
/// (counting the dropped value) wins, and on ties the subset that keeps the
/// larger eigenvalue. Returns the projected values of the kept indices and
/// the kept indices themselves, in input order.
pub fn project_capped(values: &[f64], k: usize, cap_rank: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    if k > cap_rank {
        return Err(Error::Config(format!("k = {k} exceeds the rank cap K = {cap_rank}")));
    }
    if values.len() > cap_rank + 1 {
        return Err(Error::contract(format!(
            "{} eigenvalues exceed the rank cap {cap_rank} by more than one",
            values.len()
        )));
    }
    let kf = k as f64;
    if values.len() <= cap_rank {
        let (_, p) = project_trace_simplex(values, &vec![1.0; values.len()], kf)?;
        return Ok((p, (0..values.len()).collect()));
    }
    let mut best: Option<(f64, Vec<f64>, Vec<usize>)> = None;
    let mut order: Vec<usize> = (0..values.len()).collect();
    // Visit the smallest value first so that exact ties keep larger values.
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(b.cmp(&a)));
    for &left_out in &order {
        let kept: Vec<usize> = (0..values.len()).filter(|&i| i != left_out).collect();
        let sub: Vec<f64> = kept.iter().map(|&i| values[i]).collect();
        let (_, p) = project_trace_simplex(&sub, &vec![1.0; sub.len()], kf)?;
        let dist: f64 = p.iter().zip(&sub).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            + values[left_out] * values[left_out];
        let better = best
            .as_ref()
            .is_none_or(|(bd, _, _)| dist < bd - 1e-12 * bd.max(1e-300));
        if better {
            best = Some((dist, p, kept));
        }
    }
    let (_, p, kept) = best.expect("at least one subset");
    Ok((p, kept))
}
