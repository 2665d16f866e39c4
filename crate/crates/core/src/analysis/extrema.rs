//! Local extrema of a fringe trace with a minimum peak spacing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Bins per fringe for a trombone scan: `(lambda_p / (fold v_m)) / t_bin`.
pub fn expected_period_bins<T: Real>(
    lambda_p: T,
    v_m: T,
    fold_factor: T,
    bin_duration: T,
) -> Result<T> {
    if !(lambda_p > T::zero())
        || !(v_m > T::zero())
        || !(fold_factor > T::zero())
        || bin_duration < T::zero()
    {
        return Err(Error::domain(
            "wavelength, velocity and fold factor must be positive",
        ));
    }
    let seconds_per_fringe = lambda_p / (fold_factor * v_m);
    Ok(seconds_per_fringe / bin_duration)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Extrema {
    /// `(bin index, value)` of each maximum, in index order.
    pub maxima: Vec<(usize, f64)>,
    pub minima: Vec<(usize, f64)>,
    /// Set when the trace was too short to contain a full period.
    pub too_short: bool,
}

impl Extrema {
    pub fn max_values(&self) -> Vec<f64> {
        self.maxima.iter().map(|m| m.1).collect()
    }

    pub fn min_values(&self) -> Vec<f64> {
        self.minima.iter().map(|m| m.1).collect()
    }

    pub fn max_mean(&self) -> Option<f64> {
        mean(&self.max_values())
    }

    pub fn min_mean(&self) -> Option<f64> {
        mean(&self.min_values())
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Plateau-aware strict local maxima, endpoints excluded. A flat top
/// reports its first bin.
fn local_maxima(x: &[f64]) -> Vec<usize> {
    let n = x.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i] > x[i - 1] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Keeps the highest peaks such that no two kept peaks are closer than
/// `min_distance` bins. Equal heights favour the earlier bin.
fn enforce_spacing(x: &[f64], peaks: Vec<usize>, min_distance: f64) -> Vec<usize> {
    let mut order = peaks.clone();
    order.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::with_capacity(peaks.len());
    for p in order {
        let clash = kept
            .iter()
            .any(|&k| ((p as f64) - (k as f64)).abs() < min_distance);
        if !clash {
            kept.push(p);
        }
    }
    kept.sort_unstable();
    kept
}

/// Centered moving average over `window` bins, truncated at the edges.
fn local_mean(x: &[f64], window: usize) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().copied().unwrap_or(0.0) + v);
    }
    let half = window / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Finds maxima and minima separated by at least half the expected period.
///
/// A maximum must lie above the one-period moving average around it and a
/// minimum below it, which rejects noise bumps in troughs and dips on crests.
pub fn find_extrema(trace: &[f64], expected_period_bins: f64) -> Result<Extrema> {
    if !(expected_period_bins >= 4.0) {
        return Err(Error::domain(format!(
            "expected period of {expected_period_bins} bins is below 4"
        )));
    }
    if (trace.len() as f64) < expected_period_bins {
        log::warn!(
            "trace of {} bins is shorter than one {expected_period_bins:.2}-bin period",
            trace.len()
        );
        return Ok(Extrema {
            too_short: true,
            ..Extrema::default()
        });
    }
    let spacing = expected_period_bins / 2.0;
    let midline = local_mean(trace, expected_period_bins.round() as usize);
    let mut peaks = local_maxima(trace);
    peaks.retain(|&i| trace[i] > midline[i]);
    let maxima = enforce_spacing(trace, peaks, spacing);
    let negated: Vec<f64> = trace.iter().map(|v| -v).collect();
    let mut troughs = local_maxima(&negated);
    troughs.retain(|&i| trace[i] < midline[i]);
    let minima = enforce_spacing(&negated, troughs, spacing);
    Ok(Extrema {
        maxima: maxima.into_iter().map(|i| (i, trace[i])).collect(),
        minima: minima.into_iter().map(|i| (i, trace[i])).collect(),
        too_short: false,
    })
}
