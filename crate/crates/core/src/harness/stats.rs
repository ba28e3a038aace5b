//! Angle-error aggregation and bootstrap intervals.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::numerics::RngStream;
use crate::{Error, Result};

/// How estimated angles are matched to true angles within a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Both lists sorted ascending, matched by position.
    #[default]
    Sorted,
    /// Permutation minimizing the summed squared error.
    Optimal,
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Sum over the K angles of the squared error in degrees².
/// Inputs are in radians.
pub fn trial_squared_error(estimate: &[f64], truth: &[f64], pairing: Pairing) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::invalid(format!(
            "trial has {} estimates for {} true angles",
            estimate.len(),
            truth.len()
        )));
    }
    let truth = sorted(truth);
    let cost = |est: &[f64]| -> f64 {
        est.iter()
            .zip(&truth)
            .map(|(e, t)| (e - t).to_degrees().powi(2))
            .sum()
    };
    Ok(match pairing {
        Pairing::Sorted => cost(&sorted(estimate)),
        Pairing::Optimal => estimate
            .iter()
            .copied()
            .permutations(estimate.len())
            .map(|perm| cost(&perm))
            .fold(f64::INFINITY, f64::min),
    })
}

/// `√( (1/(QK)) Σ_q Σ_k (θ̂_{q,k} − θ_{q,k})² )` in degrees. Angles in radians.
pub fn rmse_deg(estimates: &[Vec<f64>], truths: &[Vec<f64>], pairing: Pairing) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::invalid(format!(
            "{} estimate trials for {} truth trials",
            estimates.len(),
            truths.len()
        )));
    }
    if estimates.is_empty() {
        return Err(Error::invalid("rmse needs at least one trial"));
    }
    let k = truths[0].len();
    let mut total = 0.0;
    for (est, truth) in estimates.iter().zip(truths) {
        if truth.len() != k {
            return Err(Error::invalid("every trial must have the same K"));
        }
        total += trial_squared_error(est, truth, pairing)?;
    }
    Ok((total / (estimates.len() * k) as f64).sqrt())
}

/// RMSE from per-trial squared-error sums.
pub fn rmse_from_squared(per_trial: &[f64], k: usize) -> f64 {
    (per_trial.iter().sum::<f64>() / (per_trial.len() * k) as f64).sqrt()
}

/// Percentile bootstrap over trial indices. `statistic` receives the
/// resampled indices so paired statistics (same trials across methods)
/// resample jointly.
pub fn bootstrap_interval<F>(n: usize, resamples: usize, level: f64, seed: u64, mut statistic: F) -> (f64, f64)
where
    F: FnMut(&[usize]) -> f64,
{
    let mut rng = RngStream::new(seed, 0);
    let mut idx = vec![0usize; n];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for slot in idx.iter_mut() {
                *slot = rng.index_below(n);
            }
            statistic(&idx)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| stats[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (at(tail), at(1.0 - tail))
}
