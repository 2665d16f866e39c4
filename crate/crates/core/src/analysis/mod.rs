//! Statistical pipeline for fringe traces: extrema, visibility
//! distributions, shot-noise errors, cosine fits and extrapolation.

pub mod extrapolate;
pub mod extrema;
pub mod fit;
pub mod visibility;

use serde::{Deserialize, Serialize};

pub use extrapolate::{linear_visibility_extrapolation, LinearExtrapolation};
pub use extrema::{expected_period_bins, find_extrema, Extrema};
pub use fit::{fit_cosine, CosineFit};
pub use visibility::{
    histogram, monte_carlo_visibility, shot_noise_visibility_error, visibility,
    write_histogram_csv, Resampling, Visibility, VisibilityEstimate, DEFAULT_MC_SAMPLES,
    HISTOGRAM_BINS, MIN_MC_SAMPLES,
};

use crate::error::Result;
use crate::trace::FringeTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub n_samples: usize,
    pub seed: u64,
    pub resampling: Resampling,
    pub fit: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            n_samples: DEFAULT_MC_SAMPLES,
            seed: 0,
            resampling: Resampling::PairedExtrema,
            fit: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceAnalysis {
    pub label: String,
    pub n_bins: usize,
    pub mean_counts: f64,
    pub expected_period_bins: f64,
    pub n_maxima: usize,
    pub n_minima: usize,
    pub max_mean: Option<f64>,
    pub min_mean: Option<f64>,
    /// Visibility of the extremum means.
    pub point: Option<Visibility>,
    pub estimate: Option<VisibilityEstimate>,
    /// Closed-form single-fringe shot-noise error at the extremum means.
    pub shot_noise: Option<f64>,
    pub fit: Option<CosineFit<f64>>,
    /// Set when no visibility could be computed (no extrema, no counts).
    pub degenerate: bool,
    pub notes: Vec<String>,
}

/// Runs the full pipeline on one trace. Degenerate traces (constant, empty,
/// too short) produce a flagged result rather than an error; invalid
/// parameters are still errors.
pub fn analyze_trace(
    trace: &FringeTrace,
    period_bins: f64,
    opts: &AnalysisOptions,
) -> Result<TraceAnalysis> {
    let y = trace.as_f64();
    let extrema = find_extrema(&y, period_bins)?;
    let mut out = TraceAnalysis {
        label: trace.label.clone(),
        n_bins: trace.len(),
        mean_counts: trace.mean(),
        expected_period_bins: period_bins,
        n_maxima: extrema.maxima.len(),
        n_minima: extrema.minima.len(),
        max_mean: extrema.max_mean(),
        min_mean: extrema.min_mean(),
        point: None,
        estimate: None,
        shot_noise: None,
        fit: None,
        degenerate: false,
        notes: Vec::new(),
    };
    if extrema.too_short {
        out.notes
            .push("trace shorter than one fringe period".into());
    }

    match (out.max_mean, out.min_mean) {
        (Some(hi), Some(lo)) => match visibility(hi, lo) {
            Ok(v) => {
                if v.clamped {
                    out.notes
                        .push(format!("visibility clamped from raw value {:.6}", v.raw));
                }
                out.point = Some(v);
                out.shot_noise = shot_noise_visibility_error(hi, lo).ok();
                match monte_carlo_visibility(
                    &extrema.max_values(),
                    &extrema.min_values(),
                    opts.n_samples,
                    opts.seed,
                    opts.resampling,
                ) {
                    Ok(e) => out.estimate = Some(e),
                    Err(e) => out.notes.push(format!("monte carlo: {e}")),
                }
            }
            Err(e) => out.notes.push(e.to_string()),
        },
        _ => out.notes.push("no extrema found".into()),
    }
    out.degenerate = out.estimate.is_none();

    if opts.fit && (trace.len() as f64) >= 2.0 * period_bins {
        match fit_cosine(&y, period_bins) {
            Ok(f) => {
                if !f.converged {
                    out.notes.push("cosine fit did not converge".into());
                }
                out.fit = Some(f);
            }
            Err(e) => out.notes.push(format!("cosine fit: {e}")),
        }
    }
    Ok(out)
}
