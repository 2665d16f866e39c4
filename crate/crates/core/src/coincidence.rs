//! Two-channel coincidence detection over sorted time-tag streams.
//!
//! The default matcher is a single two-pointer pass: every tag is used at
//! most once and each signal tag takes the earliest unused idler tag with
//! `|t_s - t_i| <= half_width`. That is what a hardware coincidence counter
//! reports and it never double counts. [`MatchMode::AllPairs`] counts every
//! compatible pair instead.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{ps_to_seconds, seconds_to_ps};
use crate::tags::first_inversion;
use crate::trace::FringeTrace;

/// Symmetric coincidence window, stored as its half width in picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceWindow {
    half_width_ps: u64,
}

impl CoincidenceWindow {
    /// Window accepting `|dt| <= half_width`.
    pub fn from_half_width(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::domain("coincidence window must be positive"));
        }
        Ok(CoincidenceWindow {
            half_width_ps: seconds_to_ps(half_width),
        })
    }

    /// Window of total width `full_width`, i.e. `|dt| <= full_width / 2`.
    ///
    /// This is the width that enters the accidental rate `C_A C_B t_c`.
    pub fn from_full_width(full_width: f64) -> Result<Self> {
        Self::from_half_width(full_width / 2.0)
    }

    pub fn half_width_ps(&self) -> u64 {
        self.half_width_ps
    }

    pub fn full_width(&self) -> f64 {
        2.0 * ps_to_seconds(self.half_width_ps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    #[default]
    Greedy,
    AllPairs,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoincidenceResult {
    /// Matched `(t_signal, t_idler)` pairs in signal order.
    pub pairs: Vec<(u64, u64)>,
}

impl CoincidenceResult {
    pub fn total(&self) -> u64 {
        self.pairs.len() as u64
    }

    /// Signal-side times of the matched pairs.
    pub fn times(&self) -> Vec<u64> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn binned(&self, t_int: f64, duration: f64) -> Result<FringeTrace> {
        bin_counts(&self.times(), t_int, duration)
    }
}

fn unsorted(channel: &'static str, index: usize) -> Error {
    Error::UnsortedStream { channel, index }
}

/// Greedy earliest-match coincidences.
pub fn count_coincidences(
    signal: &[u64],
    idler: &[u64],
    window: CoincidenceWindow,
) -> Result<CoincidenceResult> {
    let w = window.half_width_ps;
    let mut pairs = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    while i < signal.len() && j < idler.len() {
        let s = signal[i];
        let d = idler[j];
        if d.saturating_add(w) < s {
            j += 1;
            if j < idler.len() && idler[j] < d {
                return Err(unsorted("idler", j));
            }
        } else if s.saturating_add(w) < d {
            i += 1;
            if i < signal.len() && signal[i] < s {
                return Err(unsorted("signal", i));
            }
        } else {
            pairs.push((s, d));
            i += 1;
            j += 1;
            if i < signal.len() && signal[i] < s {
                return Err(unsorted("signal", i));
            }
            if j < idler.len() && idler[j] < d {
                return Err(unsorted("idler", j));
            }
        }
    }
    // Tails that were never compared still have to be ordered.
    if let Some(k) = first_inversion(&signal[i.saturating_sub(1)..]) {
        return Err(unsorted("signal", k + i.saturating_sub(1)));
    }
    if let Some(k) = first_inversion(&idler[j.saturating_sub(1)..]) {
        return Err(unsorted("idler", k + j.saturating_sub(1)));
    }
    Ok(CoincidenceResult { pairs })
}

/// Every `(signal, idler)` pair inside the window, with tags reused.
pub fn count_all_pairs(
    signal: &[u64],
    idler: &[u64],
    window: CoincidenceWindow,
) -> Result<CoincidenceResult> {
    if let Some(k) = first_inversion(signal) {
        return Err(unsorted("signal", k));
    }
    if let Some(k) = first_inversion(idler) {
        return Err(unsorted("idler", k));
    }
    let w = window.half_width_ps;
    let mut pairs = Vec::new();
    let mut lo = 0usize;
    for &s in signal {
        while lo < idler.len() && idler[lo].saturating_add(w) < s {
            lo += 1;
        }
        let mut k = lo;
        while k < idler.len() && idler[k] <= s.saturating_add(w) {
            pairs.push((s, idler[k]));
            k += 1;
        }
    }
    Ok(CoincidenceResult { pairs })
}

pub fn count_with_mode(
    signal: &[u64],
    idler: &[u64],
    window: CoincidenceWindow,
    mode: MatchMode,
) -> Result<CoincidenceResult> {
    match mode {
        MatchMode::Greedy => count_coincidences(signal, idler, window),
        MatchMode::AllPairs => count_all_pairs(signal, idler, window),
    }
}

/// Greedy matching split into independent time segments processed in
/// parallel.
///
/// Cuts are placed only in gaps wider than the window across both channels,
/// so no compatible pair straddles a cut and the result equals
/// [`count_coincidences`] exactly.
pub fn count_coincidences_parallel(
    signal: &[u64],
    idler: &[u64],
    window: CoincidenceWindow,
    segment: f64,
) -> Result<CoincidenceResult> {
    if let Some(k) = first_inversion(signal) {
        return Err(unsorted("signal", k));
    }
    if let Some(k) = first_inversion(idler) {
        return Err(unsorted("idler", k));
    }
    let seg_ps = seconds_to_ps(segment).max(1);
    let w = window.half_width_ps;
    let end = signal
        .last()
        .copied()
        .unwrap_or(0)
        .max(idler.last().copied().unwrap_or(0));

    let mut cuts = vec![(0usize, 0usize)];
    let mut target = seg_ps;
    while target <= end {
        let mut t = target;
        loop {
            let si = signal.partition_point(|&x| x < t);
            let di = idler.partition_point(|&x| x < t);
            let left = [
                si.checked_sub(1).map(|k| signal[k]),
                di.checked_sub(1).map(|k| idler[k]),
            ]
            .into_iter()
            .flatten()
            .max();
            let right = [signal.get(si).copied(), idler.get(di).copied()]
                .into_iter()
                .flatten()
                .min();
            match (left, right) {
                (_, None) => {
                    t = u64::MAX;
                    break;
                }
                (Some(l), Some(r)) if r - l <= w => t = r + 1,
                _ => {
                    cuts.push((si, di));
                    break;
                }
            }
        }
        if t == u64::MAX {
            break;
        }
        target = t.max(target) + seg_ps;
    }
    cuts.push((signal.len(), idler.len()));
    cuts.dedup();

    let parts: Vec<Result<CoincidenceResult>> = cuts
        .par_windows(2)
        .map(|c| {
            let (s0, d0) = c[0];
            let (s1, d1) = c[1];
            count_coincidences(&signal[s0..s1], &idler[d0..d1], window)
        })
        .collect();
    let mut pairs = Vec::new();
    for p in parts {
        pairs.extend(p?.pairs);
    }
    Ok(CoincidenceResult { pairs })
}

/// Counts per consecutive bin of width `t_int` covering `[0, duration)`.
/// A trailing partial bin is dropped, as are events beyond the last full bin.
pub fn bin_counts(times: &[u64], t_int: f64, duration: f64) -> Result<FringeTrace> {
    if !(t_int > 0.0) {
        return Err(Error::domain("integration time must be positive"));
    }
    let bin_ps = seconds_to_ps(t_int).max(1);
    let n_bins = (seconds_to_ps(duration.max(0.0)) / bin_ps) as usize;
    let mut counts = vec![0u64; n_bins];
    for &t in times {
        let k = (t / bin_ps) as usize;
        if k < n_bins {
            counts[k] += 1;
        }
    }
    Ok(FringeTrace::new(counts, t_int))
}

/// Accidental coincidence rate from a delayed window.
///
/// The idler stream is delayed by `offset` (much larger than the window and
/// the pair correlation time) and matched again; the rate is taken over the
/// part of the scan where both streams overlap. With `offset = 0` this is the
/// ordinary coincidence rate.
pub fn accidental_estimate(
    signal: &[u64],
    idler: &[u64],
    window: CoincidenceWindow,
    offset: f64,
    duration: f64,
) -> Result<f64> {
    if !(offset >= 0.0) || !(duration > offset) {
        return Err(Error::domain("offset must lie in [0, duration)"));
    }
    let off = seconds_to_ps(offset);
    let shifted: Vec<u64> = idler.iter().map(|&t| t + off).collect();
    let n = count_coincidences(signal, &shifted, window)?.total();
    Ok(n as f64 / (duration - offset))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    // Quadratic oracle: each signal tag in time order takes the first unused
    // idler tag in the window.
    fn brute_force(signal: &[u64], idler: &[u64], w: u64) -> u64 {
        let mut used = vec![false; idler.len()];
        let mut n = 0;
        for &s in signal {
            for (k, &d) in idler.iter().enumerate() {
                if !used[k] && s.abs_diff(d) <= w {
                    used[k] = true;
                    n += 1;
                    break;
                }
            }
        }
        n
    }

    fn brute_all_pairs(signal: &[u64], idler: &[u64], w: u64) -> u64 {
        let mut n = 0;
        for &s in signal {
            for &d in idler {
                if s.abs_diff(d) <= w {
                    n += 1;
                }
            }
        }
        n
    }

    fn random_sorted(rng: &mut ChaCha8Rng, n: usize, span: u64) -> Vec<u64> {
        let mut v: Vec<u64> = (0..n).map(|_| rng.random_range(0..span)).collect();
        v.sort_unstable();
        v
    }

    fn win() -> CoincidenceWindow {
        CoincidenceWindow::from_half_width(1.5e-9).unwrap()
    }

    #[test]
    fn trivial_cases() {
        assert_eq!(count_coincidences(&[], &[], win()).unwrap().total(), 0);
        assert_eq!(count_coincidences(&[0], &[1000], win()).unwrap().total(), 1);
        assert_eq!(count_coincidences(&[0], &[1501], win()).unwrap().total(), 0);
        assert_eq!(
            count_coincidences(&[5000], &[3500], win()).unwrap().total(),
            1
        );
    }

    #[test]
    fn window_conventions() {
        let full = CoincidenceWindow::from_full_width(1.5e-9).unwrap();
        assert_eq!(full.half_width_ps(), 750);
        assert!((full.full_width() - 1.5e-9).abs() < 1e-18);
        assert_eq!(count_coincidences(&[0], &[1000], full).unwrap().total(), 0);
        assert!(CoincidenceWindow::from_half_width(0.0).is_err());
    }

    #[test]
    fn each_tag_used_once() {
        // Two idlers compete for one signal.
        let r = count_coincidences(&[1000], &[500, 1200], win()).unwrap();
        assert_eq!(r.pairs, vec![(1000, 500)]);
        let all = count_all_pairs(&[1000], &[500, 1200], win()).unwrap();
        assert_eq!(all.total(), 2);
    }

    #[test]
    fn unsorted_input_detected() {
        let err = count_coincidences(&[10, 5], &[10_000], win()).unwrap_err();
        assert!(matches!(
            err,
            Error::UnsortedStream {
                channel: "signal",
                ..
            }
        ));
        let err = count_coincidences(&[100_000], &[10, 20_000, 5], win()).unwrap_err();
        assert!(matches!(
            err,
            Error::UnsortedStream {
                channel: "idler",
                ..
            }
        ));
        assert!(count_all_pairs(&[3, 2], &[], win()).is_err());
    }

    #[test]
    fn matches_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..500 {
            let ns = rng.random_range(0..200);
            let ni = rng.random_range(0..200);
            let span = rng.random_range(1_000..2_000_000);
            let s = random_sorted(&mut rng, ns, span);
            let i = random_sorted(&mut rng, ni, span);
            let w = rng.random_range(1..5_000);
            let window = CoincidenceWindow { half_width_ps: w };
            let fast = count_coincidences(&s, &i, window).unwrap();
            assert_eq!(fast.total(), brute_force(&s, &i, w));
            assert!(fast.pairs.iter().all(|&(a, b)| a.abs_diff(b) <= w));
            assert_eq!(
                count_all_pairs(&s, &i, window).unwrap().total(),
                brute_all_pairs(&s, &i, w)
            );
            // Channel exchange leaves the count unchanged.
            assert_eq!(
                count_coincidences(&i, &s, window).unwrap().total(),
                fast.total()
            );
        }
    }

    #[test]
    fn invariant_under_time_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_sorted(&mut rng, 400, 5_000_000);
        let i = random_sorted(&mut rng, 400, 5_000_000);
        let base = count_coincidences(&s, &i, win()).unwrap().total();
        let shift = 123_456_789u64;
        let s2: Vec<u64> = s.iter().map(|t| t + shift).collect();
        let i2: Vec<u64> = i.iter().map(|t| t + shift).collect();
        assert_eq!(count_coincidences(&s2, &i2, win()).unwrap().total(), base);
    }

    #[test]
    fn parallel_segments_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let span = 1_000_000_000u64;
            let s = random_sorted(&mut rng, 20_000, span);
            let i = random_sorted(&mut rng, 20_000, span);
            let seq = count_coincidences(&s, &i, win()).unwrap();
            let par = count_coincidences_parallel(&s, &i, win(), 1e-5).unwrap();
            assert_eq!(seq, par);
        }
        let dense: Vec<u64> = (0..1000).map(|k| k * 100).collect();
        let seq = count_coincidences(&dense, &dense, win()).unwrap();
        assert_eq!(
            count_coincidences_parallel(&dense, &dense, win(), 1e-9).unwrap(),
            seq
        );
        assert_eq!(
            count_coincidences_parallel(&[], &[], win(), 1e-9)
                .unwrap()
                .total(),
            0
        );
    }

    #[test]
    fn binning() {
        let t = bin_counts(&[], 0.07, 70.0).unwrap();
        assert_eq!(t.len(), 1000);
        assert_eq!(t.total(), 0);

        let bin_ps = 70_000_000_000u64;
        let times: Vec<u64> = (0..1000).map(|k| k * bin_ps + 1).collect();
        let t = bin_counts(&times, 0.07, 70.0).unwrap();
        assert!(t.counts.iter().all(|&c| c == 1));

        let t = bin_counts(&[0, 10, 250_000_000_000], 0.1, 0.25).unwrap();
        assert_eq!(t.counts, vec![2, 0]);
        assert!(bin_counts(&[1], 0.0, 1.0).is_err());
    }

    #[test]
    fn accidental_estimate_edges() {
        let s = vec![100, 2_000_000, 5_000_000];
        assert_eq!(
            accidental_estimate(&s, &[], win(), 1e-7, 1e-5).unwrap(),
            0.0
        );
        let i = vec![600, 2_000_900, 9_000_000];
        let at_zero = accidental_estimate(&s, &i, win(), 0.0, 1e-5).unwrap();
        let direct = count_coincidences(&s, &i, win()).unwrap().total() as f64 / 1e-5;
        assert_eq!(at_zero, direct);
        assert!(accidental_estimate(&s, &i, win(), 2e-5, 1e-5).is_err());
    }
}
