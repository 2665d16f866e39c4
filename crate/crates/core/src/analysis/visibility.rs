//! Fringe visibility, its shot-noise error and Monte Carlo distributions.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Visibility of a pair of extremum means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    /// Ratio clamped to `[0, 1]`.
    pub value: f64,
    /// Unclamped ratio.
    pub raw: f64,
    /// Set when clamping changed the value (noise pushed min above max).
    pub clamped: bool,
}

/// `V = (max - min) / (max + min)`.
pub fn visibility(max_mean: f64, min_mean: f64) -> Result<Visibility> {
    let den = max_mean + min_mean;
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::degenerate(format!(
            "visibility undefined for max {max_mean} and min {min_mean}"
        )));
    }
    let raw = (max_mean - min_mean) / den;
    let value = raw.clamp(0.0, 1.0);
    Ok(Visibility {
        value,
        raw,
        clamped: value != raw,
    })
}

/// Gaussian propagation of Poisson errors `sqrt(n)` through the visibility
/// ratio: `2 sqrt(m^2 M + M^2 m) / (M + m)^2`.
pub fn shot_noise_visibility_error<T: Real>(mu_max: T, mu_min: T) -> Result<T> {
    let den = mu_max + mu_min;
    if !(den > T::zero()) || mu_max < T::zero() || mu_min < T::zero() {
        return Err(Error::degenerate(format!(
            "shot-noise error undefined for max {mu_max} and min {mu_min}"
        )));
    }
    let two = T::lit(2.0);
    Ok(two * (mu_min * mu_min * mu_max + mu_max * mu_max * mu_min).sqrt() / (den * den))
}

/// How each Monte Carlo draw combines the observed extrema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    /// One randomly chosen maximum and minimum per draw, each Poisson
    /// resampled; the spread reflects single-fringe uncertainty.
    #[default]
    PairedExtrema,
    /// Every extremum resampled per draw, visibility of the resampled means.
    PooledMeans,
}

pub const DEFAULT_MC_SAMPLES: usize = 100_000;
pub const MIN_MC_SAMPLES: usize = 10_000;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityEstimate {
    /// Sample mean of the draws, clamped to `[0, 1]`.
    pub mean: f64,
    pub raw_mean: f64,
    /// Standard deviation of the draws (not of their mean).
    pub std: f64,
    /// Visibility of the observed extremum means.
    pub point: f64,
    pub n_maxima: usize,
    pub n_minima: usize,
    pub n_samples: usize,
    /// Draws with zero resampled counts at both extrema, which are skipped.
    pub degenerate_draws: usize,
    pub mode: Resampling,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

/// A Poisson sampler that accepts a zero mean.
#[derive(Clone, Copy)]
enum Counts {
    Zero,
    Poisson(Poisson<f64>),
}

impl Counts {
    fn new(mean: f64) -> Result<Self> {
        if mean == 0.0 {
            Ok(Counts::Zero)
        } else {
            Poisson::new(mean)
                .map(Counts::Poisson)
                .map_err(|e| Error::domain(format!("extremum value {mean}: {e}")))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Counts::Zero => 0.0,
            Counts::Poisson(p) => p.sample(rng),
        }
    }
}

/// Monte Carlo visibility distribution treating each observed extremum as
/// the mean of a Poisson variable. Deterministic for a given seed,
/// independent of the thread count.
pub fn monte_carlo_visibility(
    maxima: &[f64],
    minima: &[f64],
    n_samples: usize,
    seed: u64,
    mode: Resampling,
) -> Result<VisibilityEstimate> {
    if maxima.is_empty() || minima.is_empty() {
        return Err(Error::degenerate("no extrema to resample"));
    }
    if n_samples == 0 {
        return Err(Error::domain("n_samples must be positive"));
    }
    if n_samples < MIN_MC_SAMPLES {
        log::warn!("{n_samples} Monte Carlo samples is below the recommended {MIN_MC_SAMPLES}");
    }
    let check = |v: &f64| v.is_finite() && *v >= 0.0;
    if !maxima.iter().all(check) || !minima.iter().all(check) {
        return Err(Error::domain(
            "extremum values must be finite and non-negative",
        ));
    }
    let max_d = maxima
        .iter()
        .map(|&m| Counts::new(m))
        .collect::<Result<Vec<_>>>()?;
    let min_d = minima
        .iter()
        .map(|&m| Counts::new(m))
        .collect::<Result<Vec<_>>>()?;

    let n_chunks = n_samples.div_ceil(CHUNK);
    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(n_samples - c * CHUNK);
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                let (hi, lo) = match mode {
                    Resampling::PairedExtrema => {
                        let i = rng.random_range(0..max_d.len());
                        let j = rng.random_range(0..min_d.len());
                        (max_d[i].sample(&mut rng), min_d[j].sample(&mut rng))
                    }
                    Resampling::PooledMeans => {
                        let hi: f64 = max_d.iter().map(|d| d.sample(&mut rng)).sum();
                        let lo: f64 = min_d.iter().map(|d| d.sample(&mut rng)).sum();
                        (hi / max_d.len() as f64, lo / min_d.len() as f64)
                    }
                };
                // NaN marks a draw with no counts at all.
                out.push(if hi + lo > 0.0 {
                    (hi - lo) / (hi + lo)
                } else {
                    f64::NAN
                });
            }
            out
        })
        .collect();

    let mut samples = Vec::with_capacity(n_samples);
    let mut degenerate_draws = 0;
    for v in chunks.into_iter().flatten() {
        if v.is_nan() {
            degenerate_draws += 1;
        } else {
            samples.push(v);
        }
    }
    if samples.is_empty() {
        return Err(Error::degenerate("every Monte Carlo draw had zero counts"));
    }
    let n = samples.len() as f64;
    let raw_mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|v| (v - raw_mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let max_mean = maxima.iter().sum::<f64>() / maxima.len() as f64;
    let min_mean = minima.iter().sum::<f64>() / minima.len() as f64;
    let point = visibility(max_mean, min_mean)
        .map(|v| v.value)
        .unwrap_or(0.0);
    Ok(VisibilityEstimate {
        mean: raw_mean.clamp(0.0, 1.0),
        raw_mean,
        std: var.sqrt(),
        point,
        n_maxima: maxima.len(),
        n_minima: minima.len(),
        n_samples,
        degenerate_draws,
        mode,
        samples,
    })
}

pub const HISTOGRAM_BINS: usize = 200;

/// Counts of `samples` in `bins` equal bins over `[-1, 1]`; out-of-range
/// values go to the edge bins.
pub fn histogram(samples: &[f64], bins: usize) -> Vec<u64> {
    let mut h = vec![0u64; bins];
    if bins == 0 {
        return h;
    }
    for &v in samples {
        let k = ((v + 1.0) / 2.0 * bins as f64).floor();
        let k = (k.max(0.0) as usize).min(bins - 1);
        h[k] += 1;
    }
    h
}

/// Writes `bin_lo,bin_hi,count` rows for [`histogram`].
pub fn write_histogram_csv<W: Write>(
    samples: &[f64],
    bins: usize,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "bin_lo,bin_hi,count")?;
    let width = 2.0 / bins as f64;
    for (k, c) in histogram(samples, bins).into_iter().enumerate() {
        let lo = -1.0 + k as f64 * width;
        writeln!(w, "{:.4},{:.4},{}", lo, lo + width, c)?;
    }
    w.flush()
}
