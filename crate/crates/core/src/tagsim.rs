//! Synthetic two-channel time-tag streams for a trombone phase scan.
//!
//! Pairs are emitted as an inhomogeneous Poisson process whose rate follows
//! the two-source interference fringe. The first source has a fixed gain;
//! the second source's gain and the phase wander come from the turbulence
//! model, one value per integration bin. Each pair photon is detected
//! independently; detectors also see a flat non-interfering background and
//! dark counts. Timestamps get Gaussian jitter and are quantized to 1 ps.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::DetectorParams;
use crate::scalar::{seconds_to_ps, PS_PER_S};
use crate::tags::{Channel, StreamMeta, TimeTagStream};
use crate::turbulence::{sample_gain_series, TurbulenceModel};

/// Default bound on the expected number of generated tags.
pub const DEFAULT_TAG_CAP: u64 = 400_000_000;

// RNG stream ids, one per independent random source.
const STREAM_PAIRS: u64 = 3;
const STREAM_DETECT: u64 = 4;
const STREAM_JITTER_S: u64 = 5;
const STREAM_JITTER_I: u64 = 6;
const STREAM_BG_S: u64 = 7;
const STREAM_BG_I: u64 = 8;
const STREAM_DARK_S: u64 = 9;
const STREAM_DARK_I: u64 = 10;
const STREAM_PHASE: u64 = 11;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Everything needed to simulate one scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPlan {
    pub scenario: String,
    /// Scan length, s.
    pub duration: f64,
    /// Phase-averaged pair rate with both sources at their nominal gains, 1/s.
    pub pair_rate: f64,
    /// Gain of the first source.
    pub gain_first: f64,
    /// Nominal gain of the second source before turbulence losses.
    pub gain_second: f64,
    /// Contrast left after mode mismatch and pump coherence, in `[0, 1]`.
    pub intrinsic_visibility: f64,
    /// Pump wavelength setting the fringe period, m.
    pub pump_wavelength: f64,
    pub stage_velocity: f64,
    pub fold_factor: f64,
    /// Fixed starting phase; drawn uniformly from the seed when absent.
    pub initial_phase: Option<f64>,
    pub turbulence: TurbulenceModel,
    pub detector: DetectorParams,
    pub tag_cap: u64,
}

impl ScanPlan {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("duration", self.duration),
            ("pump_wavelength", self.pump_wavelength),
            ("stage_velocity", self.stage_velocity),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::validation(name, "must be positive"));
            }
        }
        if !(self.pair_rate >= 0.0) || !self.pair_rate.is_finite() {
            return Err(Error::validation("pair_rate", "must be nonnegative"));
        }
        if !(self.gain_first >= 0.0) || !(self.gain_second >= 0.0) {
            return Err(Error::validation("gains", "must be nonnegative"));
        }
        if self.gain_first + self.gain_second <= 0.0 {
            return Err(Error::validation("gains", "at least one source must emit"));
        }
        if !(0.0..=1.0).contains(&self.intrinsic_visibility) {
            return Err(Error::validation(
                "intrinsic_visibility",
                "must lie in [0, 1]",
            ));
        }
        if !(self.fold_factor >= 1.0) {
            return Err(Error::validation("fold_factor", "must be at least 1"));
        }
        self.turbulence
            .validate()
            .map_err(|e| Error::validation("turbulence", e.to_string()))?;
        self.detector.validate()
    }

    /// Fringe angular frequency of the stage scan, rad/s.
    pub fn phase_rate(&self) -> f64 {
        TAU * self.fold_factor * self.stage_velocity / self.pump_wavelength
    }

    pub fn n_bins(&self) -> usize {
        let bin_ps = seconds_to_ps(self.detector.integration_time).max(1);
        (seconds_to_ps(self.duration) / bin_ps) as usize
    }

    fn norm(&self) -> f64 {
        self.gain_first.powi(2) + self.gain_second.powi(2)
    }

    /// Non-interfering background rate on each detector.
    pub fn background_rates(&self) -> (f64, f64) {
        let d = &self.detector;
        let bg = |eff: f64, frac: f64| eff * self.pair_rate * frac / (1.0 - frac);
        (
            bg(d.efficiency_s, d.background_fraction_s),
            bg(d.efficiency_i, d.background_fraction_i),
        )
    }
}

/// Per-bin truth behind a simulated scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGroundTruth {
    pub bin_duration: f64,
    pub initial_phase: f64,
    /// Bin-averaged pair emission rate, 1/s.
    pub pair_rate: Vec<f64>,
    /// Interference phase at the bin centre, rad.
    pub phase: Vec<f64>,
    /// Second-source gain per bin.
    pub gains: Vec<f64>,
    pub phase_offsets: Vec<f64>,
    /// Expected coincidences per bin, accidentals included.
    pub expected_coincidences: Vec<f64>,
    pub expected_singles_s: Vec<f64>,
    pub expected_singles_i: Vec<f64>,
    /// Times at which the unperturbed fringe peaks, s.
    pub peak_times: Vec<f64>,
    /// Number of pairs where both photons were detected.
    pub detected_pairs: u64,
}

#[derive(Debug, Clone)]
pub struct SimulatedScan {
    pub signal: TimeTagStream,
    pub idler: TimeTagStream,
    pub truth: ScanGroundTruth,
}

/// Inhomogeneous Poisson event times on `[0, duration)` by thinning a
/// homogeneous process of rate `rate_max`.
pub fn thinned_poisson_times<F>(
    rate_fn: F,
    duration: f64,
    rate_max: f64,
    seed: u64,
) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    thinned_poisson_times_with(rate_fn, duration, rate_max, &mut rng)
}

pub fn thinned_poisson_times_with<F, R>(
    mut rate_fn: F,
    duration: f64,
    rate_max: f64,
    rng: &mut R,
) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> f64,
    R: Rng + ?Sized,
{
    if !(rate_max >= 0.0) || !rate_max.is_finite() {
        return Err(Error::domain("rate bound must be finite and nonnegative"));
    }
    let mut out = Vec::new();
    if rate_max == 0.0 || !(duration > 0.0) {
        return Ok(out);
    }
    let gap = Exp::new(rate_max).map_err(|e| Error::domain(e.to_string()))?;
    let mut t = gap.sample(rng);
    while t < duration {
        let r = rate_fn(t);
        if r > rate_max * (1.0 + 1e-12) {
            return Err(Error::RateBoundExceeded {
                time: t,
                rate: r,
                bound: rate_max,
            });
        }
        if rng.random::<f64>() * rate_max < r {
            out.push(t);
        }
        t += gap.sample(rng);
    }
    Ok(out)
}

fn homogeneous_ps(rate: f64, duration: f64, rng: &mut ChaCha8Rng) -> Result<Vec<u64>> {
    Ok(thinned_poisson_times_with(|_| rate, duration, rate, rng)?
        .into_iter()
        .map(seconds_to_ps)
        .collect())
}

fn jittered_ps(t: f64, jitter: Option<&Normal<f64>>, rng: &mut ChaCha8Rng) -> u64 {
    let dt = jitter.map_or(0.0, |n| n.sample(rng));
    seconds_to_ps(t + dt)
}

/// Drops tags arriving within `dead_ps` of the last recorded one.
fn apply_dead_time(ts: Vec<u64>, dead_ps: u64) -> Vec<u64> {
    if dead_ps == 0 {
        return ts;
    }
    let mut out = Vec::with_capacity(ts.len());
    let mut last: Option<u64> = None;
    for t in ts {
        if last.is_none_or(|l| t >= l + dead_ps) {
            out.push(t);
            last = Some(t);
        }
    }
    out
}

/// Mean of `1 + v cos(phase0 + w t)` over `[a, b]`.
fn mean_fringe(v: f64, phase0: f64, w: f64, a: f64, b: f64) -> f64 {
    if w == 0.0 || b <= a {
        return 1.0 + v * phase0.cos();
    }
    let integral = ((phase0 + w * b).sin() - (phase0 + w * a).sin()) / w;
    1.0 + v * integral / (b - a)
}

/// Simulates the tag streams of one scan.
pub fn simulate_scan(plan: &ScanPlan, seed: u64) -> Result<SimulatedScan> {
    plan.validate()?;
    let det = &plan.detector;
    let t_int = det.integration_time;
    let n_bins = plan.n_bins().max(1);
    let duration = plan.duration;

    let series = sample_gain_series(&plan.turbulence, plan.gain_second, n_bins, t_int, seed)?;
    let initial_phase = plan
        .initial_phase
        .unwrap_or_else(|| rng_for(seed, STREAM_PHASE).random::<f64>() * TAU);
    let omega = plan.phase_rate();
    let g1 = plan.gain_first;
    let norm = plan.norm();
    let vis = plan.intrinsic_visibility;

    // Per-bin emission shape: rate(t) = pair_rate * (a_k + b_k cos(phi(t))).
    let coeffs: Vec<(f64, f64)> = series
        .gains
        .iter()
        .zip(&series.gain_power)
        .map(|(&g2, &p2)| ((g1 * g1 + p2) / norm, 2.0 * g1 * g2 * vis / norm))
        .collect();
    let rate_max = plan.pair_rate * coeffs.iter().map(|(a, b)| a + b).fold(0.0, f64::max);

    let (bg_s, bg_i) = plan.background_rates();
    let expected_tags = duration
        * (rate_max * (det.efficiency_s + det.efficiency_i) + bg_s + bg_i + 2.0 * det.dark_rate);
    if expected_tags > plan.tag_cap as f64 {
        return Err(Error::TagCapExceeded {
            expected: expected_tags,
            cap: plan.tag_cap,
        });
    }

    let bin_of = |t: f64| ((t / t_int) as usize).min(n_bins - 1);
    let phase_at = |t: f64, k: usize| initial_phase + omega * t + series.phase_offsets[k];

    let mut pair_rng = rng_for(seed, STREAM_PAIRS);
    let pair_times = thinned_poisson_times_with(
        |t| {
            let k = bin_of(t);
            let (a, b) = coeffs[k];
            (plan.pair_rate * (a + b * phase_at(t, k).cos())).max(0.0)
        },
        duration,
        rate_max,
        &mut pair_rng,
    )?;

    let jitter = if det.jitter > 0.0 {
        Some(Normal::new(0.0, det.jitter).map_err(|e| Error::domain(e.to_string()))?)
    } else {
        None
    };
    let mut detect_rng = rng_for(seed, STREAM_DETECT);
    let mut jit_s = rng_for(seed, STREAM_JITTER_S);
    let mut jit_i = rng_for(seed, STREAM_JITTER_I);
    let mut sig = Vec::with_capacity((pair_times.len() as f64 * det.efficiency_s * 1.1) as usize);
    let mut idl = Vec::with_capacity((pair_times.len() as f64 * det.efficiency_i * 1.1) as usize);
    let mut detected_pairs = 0u64;
    for &t in &pair_times {
        let hit_s = detect_rng.random::<f64>() < det.efficiency_s;
        let hit_i = detect_rng.random::<f64>() < det.efficiency_i;
        if hit_s {
            sig.push(jittered_ps(t, jitter.as_ref(), &mut jit_s));
        }
        if hit_i {
            idl.push(jittered_ps(t, jitter.as_ref(), &mut jit_i));
        }
        if hit_s && hit_i {
            detected_pairs += 1;
        }
    }
    sig.extend(homogeneous_ps(
        bg_s,
        duration,
        &mut rng_for(seed, STREAM_BG_S),
    )?);
    idl.extend(homogeneous_ps(
        bg_i,
        duration,
        &mut rng_for(seed, STREAM_BG_I),
    )?);
    sig.extend(homogeneous_ps(
        det.dark_rate,
        duration,
        &mut rng_for(seed, STREAM_DARK_S),
    )?);
    idl.extend(homogeneous_ps(
        det.dark_rate,
        duration,
        &mut rng_for(seed, STREAM_DARK_I),
    )?);
    sig.sort_unstable();
    idl.sort_unstable();
    let dead_ps = seconds_to_ps(det.dead_time);
    let sig = apply_dead_time(sig, dead_ps);
    let idl = apply_dead_time(idl, dead_ps);

    // Ground truth, bin by bin.
    let mut truth = ScanGroundTruth {
        bin_duration: t_int,
        initial_phase,
        pair_rate: Vec::with_capacity(n_bins),
        phase: Vec::with_capacity(n_bins),
        gains: series.gains.clone(),
        phase_offsets: series.phase_offsets.clone(),
        expected_coincidences: Vec::with_capacity(n_bins),
        expected_singles_s: Vec::with_capacity(n_bins),
        expected_singles_i: Vec::with_capacity(n_bins),
        peak_times: Vec::new(),
        detected_pairs,
    };
    for (k, &(a, b)) in coeffs.iter().enumerate() {
        let start = k as f64 * t_int;
        let end = start + t_int;
        let p0 = initial_phase + series.phase_offsets[k];
        // a + b cos = a (1 + (b/a) cos)
        let rate = if a > 0.0 {
            plan.pair_rate * a * mean_fringe(b / a, p0, omega, start, end)
        } else {
            0.0
        };
        let singles_s = det.efficiency_s * rate + bg_s + det.dark_rate;
        let singles_i = det.efficiency_i * rate + bg_i + det.dark_rate;
        let accidental = singles_s * singles_i * det.coincidence_window;
        truth.pair_rate.push(rate);
        truth.phase.push(p0 + omega * (start + end) / 2.0);
        truth
            .expected_coincidences
            .push((det.efficiency_s * det.efficiency_i * rate + accidental) * t_int);
        truth.expected_singles_s.push(singles_s * t_int);
        truth.expected_singles_i.push(singles_i * t_int);
    }
    if omega > 0.0 {
        let first = (initial_phase / TAU).ceil();
        let mut m = first;
        loop {
            let t = (m * TAU - initial_phase) / omega;
            if t >= duration {
                break;
            }
            if t > 0.0 {
                truth.peak_times.push(t);
            }
            m += 1.0;
        }
    }

    let meta = StreamMeta {
        duration_ps: (duration * PS_PER_S).round() as u64,
        seed,
        scenario: plan.scenario.clone(),
    };
    Ok(SimulatedScan {
        signal: TimeTagStream::new(Channel::Signal, sig, meta.clone())?,
        idler: TimeTagStream::new(Channel::Idler, idl, meta)?,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coincidence::{count_coincidences, CoincidenceWindow};

    pub(crate) fn test_plan() -> ScanPlan {
        ScanPlan {
            scenario: "unit".into(),
            duration: 5.0,
            pair_rate: 2e4,
            gain_first: 0.05,
            gain_second: 0.05,
            intrinsic_visibility: 0.98,
            pump_wavelength: 405.5e-9,
            stage_velocity: 180e-9,
            fold_factor: 2.0,
            initial_phase: None,
            turbulence: TurbulenceModel::quiet(2.0),
            detector: DetectorParams {
                efficiency_s: 0.2,
                efficiency_i: 0.2,
                dark_rate: 100.0,
                coincidence_window: 1.5e-9,
                integration_time: 0.07,
                background_fraction_s: 0.5,
                background_fraction_i: 0.5,
                jitter: 100e-12,
                dead_time: 0.0,
            },
            tag_cap: DEFAULT_TAG_CAP,
        }
    }

    #[test]
    fn thinning_constant_rate_count() {
        // Poisson(rT) with rT = 500: mean over 100 seeds within 3 sigma of
        // the mean's standard error.
        let counts: Vec<f64> = (0..100)
            .map(|s| {
                thinned_poisson_times(|_| 50.0, 10.0, 80.0, s)
                    .unwrap()
                    .len() as f64
            })
            .collect();
        let mean = counts.iter().sum::<f64>() / 100.0;
        assert!(
            (mean - 500.0).abs() < 3.0 * (500.0f64 / 100.0).sqrt(),
            "{mean}"
        );
    }

    #[test]
    fn thinning_edge_cases() {
        assert!(thinned_poisson_times(|_| 0.0, 10.0, 100.0, 1)
            .unwrap()
            .is_empty());
        assert!(thinned_poisson_times(|_| 5.0, 10.0, 0.0, 1)
            .unwrap()
            .is_empty());
        let ts =
            thinned_poisson_times(|t| if t < 5.0 { 100.0 } else { 0.0 }, 10.0, 100.0, 4).unwrap();
        assert!(!ts.is_empty());
        assert!(ts.iter().all(|&t| t < 5.0));
        assert!(ts.windows(2).all(|w| w[0] <= w[1]));
        let err = thinned_poisson_times(|_| 200.0, 10.0, 100.0, 1);
        assert!(matches!(err, Err(Error::RateBoundExceeded { .. })));
    }

    #[test]
    fn zero_rates_give_empty_streams() {
        let mut p = test_plan();
        p.pair_rate = 0.0;
        p.detector.dark_rate = 0.0;
        let s = simulate_scan(&p, 1).unwrap();
        assert!(s.signal.is_empty() && s.idler.is_empty());
        assert!(s.truth.expected_coincidences.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn reproducible_per_seed() {
        let p = test_plan();
        let a = simulate_scan(&p, 9).unwrap();
        let b = simulate_scan(&p, 9).unwrap();
        let c = simulate_scan(&p, 10).unwrap();
        assert_eq!(a.signal, b.signal);
        assert_eq!(a.idler, b.idler);
        assert_eq!(a.truth, b.truth);
        assert_ne!(a.signal, c.signal);
    }

    #[test]
    fn exact_coincidences_without_noise() {
        let mut p = test_plan();
        p.detector.jitter = 0.0;
        p.detector.dark_rate = 0.0;
        p.detector.background_fraction_s = 0.0;
        p.detector.background_fraction_i = 0.0;
        let s = simulate_scan(&p, 3).unwrap();
        let w = CoincidenceWindow::from_full_width(1.5e-9).unwrap();
        let n = count_coincidences(s.signal.timestamps(), s.idler.timestamps(), w)
            .unwrap()
            .total();
        // Pairs closer than the window could cross-match, but at 2e4/s that
        // essentially never happens; the count is exact for this seed.
        assert_eq!(n, s.truth.detected_pairs);
    }

    #[test]
    fn singles_rate_matches_expectation() {
        let p = test_plan();
        let (bg_s, _) = p.background_rates();
        // Phase-averaged pair rate is the nominal rate without turbulence.
        let expected = p.detector.efficiency_s * p.pair_rate + bg_s + p.detector.dark_rate;
        let n = 20;
        let rates: Vec<f64> = (0..n)
            .map(|s| simulate_scan(&p, s).unwrap().signal.rate())
            .collect();
        let mean = rates.iter().sum::<f64>() / n as f64;
        // The fringe does not average out over a non-integer number of
        // periods; allow for that on top of the Poisson error.
        let sigma = (expected / p.duration / n as f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * sigma + 0.02 * expected,
            "{mean} vs {expected}"
        );
    }

    #[test]
    fn tags_sorted_and_nonnegative() {
        let mut p = test_plan();
        p.detector.jitter = 2e-9;
        let s = simulate_scan(&p, 17).unwrap();
        for st in [&s.signal, &s.idler] {
            assert!(st.timestamps().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn tag_cap_enforced() {
        let mut p = test_plan();
        p.tag_cap = 1000;
        assert!(matches!(
            simulate_scan(&p, 1),
            Err(Error::TagCapExceeded { .. })
        ));
    }

    #[test]
    fn dead_time_filters_close_tags() {
        assert_eq!(apply_dead_time(vec![0, 5, 10, 30, 31], 10), vec![0, 10, 30]);
        assert_eq!(apply_dead_time(vec![0, 5], 0), vec![0, 5]);
    }

    #[test]
    fn fringe_peaks_in_seventy_seconds() {
        let mut p = test_plan();
        p.duration = 70.0;
        p.pair_rate = 10.0;
        p.initial_phase = Some(0.3);
        let s = simulate_scan(&p, 2).unwrap();
        assert_eq!(s.truth.pair_rate.len(), 1000);
        let n = s.truth.peak_times.len();
        assert!((61..=63).contains(&n), "{n}");
    }
}
