//! Water filling: the inner minimax problem of the slack-constrained
//! objective.
//!
//! Pouring a volume `V` of slack over "basin" heights `c_i` gives a common
//! surface level `gamma` with `sum_i max(0, gamma - c_i) = V`. The minimax
//! distribution over examples is uniform on the covered indices.

use rand::Rng;

use crate::data::Label;
use crate::error::{Error, Result};

/// Water level, plus the bias for the two-basin variant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaterLevel {
    pub gamma: f64,
    pub bias: Option<f64>,
}

fn check_inputs(responses: &[f64], volume: f64) -> Result<()> {
    if responses.is_empty() {
        return Err(Error::contract("water level of an empty response vector"));
    }
    if !(volume >= 0.0) || !volume.is_finite() {
        return Err(Error::contract(format!("water volume must be nonnegative, got {volume}")));
    }
    if responses.iter().any(|c| !c.is_finite()) {
        return Err(Error::contract("responses must be finite"));
    }
    Ok(())
}

fn sorted(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Sort-based water level, `O(n log n)`.
///
/// With ascending heights `c_(1..n)` and prefix sums `S_k`, the level is
/// `(V + S_k) / k` for the first `k` whose level does not reach `c_(k+1)`.
pub fn find_gamma(responses: &[f64], volume: f64) -> Result<f64> {
    check_inputs(responses, volume)?;
    let c = sorted(responses.iter().copied());
    let mut sum = 0.0;
    for k in 0..c.len() {
        sum += c[k];
        let level = (volume + sum) / (k + 1) as f64;
        if k + 1 == c.len() || level <= c[k + 1] {
            return Ok(level);
        }
    }
    unreachable!("loop returns on the last element")
}

/// Divide-and-conquer water level in expected linear time.
///
/// Partitions around a pivot with `select_nth_unstable`, tracks the sum of
/// the part known to be under water, and recurses into the side that
/// contains the surface. Agrees with [`find_gamma`] up to rounding.
pub fn find_gamma_partition(responses: &[f64], volume: f64) -> Result<f64> {
    check_inputs(responses, volume)?;
    let mut c = responses.to_vec();
    // c[..low] is known to be fully covered; c[up..] is known to be dry.
    let (mut low, mut up) = (0usize, c.len());
    let mut low_sum = 0.0;
    while up - low > 1 {
        let mid = low + (up - low) / 2;
        c[low..up].select_nth_unstable_by(mid - low, f64::total_cmp);
        let pivot = c[mid];
        // Elements of c[low..mid] are <= pivot.
        let part_sum: f64 = c[low..mid].iter().sum();
        let mid_sum = low_sum + part_sum;
        // Volume needed to raise everything below the pivot up to the pivot.
        let needed = pivot * mid as f64 - mid_sum;
        if needed >= volume {
            // Surface lies below the pivot: the pivot and above stay dry.
            up = mid;
        } else {
            low = mid;
            low_sum = mid_sum;
        }
    }
    // Exactly one undecided element remains at c[low]; it is covered iff the
    // level computed with it included reaches past it, which always holds
    // when low == 0 (the minimum is always covered).
    let with = (volume + low_sum + c[low]) / (low + 1) as f64;
    if low == 0 || with >= c[low] {
        Ok(with)
    } else {
        Ok((volume + low_sum) / low as f64)
    }
}

/// Two-basin water level with an unregularized bias.
///
/// Positive heights are `c_i + b`, negative heights `c_i - b`. At the optimal
/// `b` both basins have the same number `m` of covered indices, and the
/// level `(V + S+_m + S-_m) / 2m` no longer depends on `b`; the optimum is the
/// smallest such level over `m`. Among the biases attaining it, the midpoint
/// of the feasible interval is returned.
pub fn find_gamma_and_bias(labels: &[Label], responses: &[f64], volume: f64) -> Result<WaterLevel> {
    check_inputs(responses, volume)?;
    if labels.len() != responses.len() {
        return Err(Error::contract("labels and responses differ in length"));
    }
    let pos = sorted(
        labels
            .iter()
            .zip(responses)
            .filter(|(y, _)| **y == Label::Pos)
            .map(|(_, &c)| c),
    );
    let neg = sorted(
        labels
            .iter()
            .zip(responses)
            .filter(|(y, _)| **y == Label::Neg)
            .map(|(_, &c)| c),
    );
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::contract("biased water filling needs both classes"));
    }

    let mut best = (f64::INFINITY, 0usize);
    let (mut sp, mut sn) = (0.0, 0.0);
    for m in 1..=pos.len().min(neg.len()) {
        sp += pos[m - 1];
        sn += neg[m - 1];
        let level = (volume + sp + sn) / (2 * m) as f64;
        if level < best.0 {
            best = (level, m);
        }
    }
    let (gamma, m) = best;

    // Covered sets are exactly the m lowest of each class:
    //   pos[m-1] <= gamma - b <= pos[m],  neg[m-1] <= gamma + b <= neg[m].
    let mut lo = neg[m - 1] - gamma;
    let mut hi = gamma - pos[m - 1];
    if let Some(&next) = pos.get(m) {
        lo = lo.max(gamma - next);
    }
    if let Some(&next) = neg.get(m) {
        hi = hi.min(next - gamma);
    }
    Ok(WaterLevel {
        gamma,
        bias: Some(0.5 * (lo + hi)),
    })
}

/// Draws an index uniformly from `{j : c_j < gamma}`, falling back to the
/// indices at the level when that set is empty.
pub fn sample_support_index(responses: &[f64], gamma: f64, rng: &mut impl Rng) -> Result<usize> {
    if responses.is_empty() {
        return Err(Error::contract("cannot sample from an empty response vector"));
    }
    let strict = responses.iter().filter(|&&c| c < gamma).count();
    if strict > 0 {
        let k = rng.random_range(0..strict);
        return Ok(nth_matching(responses, k, |c| c < gamma));
    }
    let tol = 1e-12 * gamma.abs().max(1.0);
    let ties = responses.iter().filter(|&&c| (c - gamma).abs() <= tol).count();
    if ties > 0 {
        let k = rng.random_range(0..ties);
        return Ok(nth_matching(responses, k, |c| (c - gamma).abs() <= tol));
    }
    Err(Error::contract(format!(
        "no response at or below the water level {gamma}"
    )))
}

fn nth_matching(values: &[f64], k: usize, pred: impl Fn(f64) -> bool) -> usize {
    values
        .iter()
        .enumerate()
        .filter(|(_, &c)| pred(c))
        .nth(k)
        .map(|(i, _)| i)
        .expect("k is below the match count")
}

/// `sum_i max(0, gamma - c_i)`.
pub fn water_volume(responses: &[f64], gamma: f64) -> f64 {
    responses.iter().map(|&c| (gamma - c).max(0.0)).sum()
}
