//! Free-space degradation of the second source.
//!
//! Angle-of-arrival fluctuations of the pump at the second crystal reduce its
//! mode overlap with the down-conversion field. The second process's gain
//! follows the pump field amplitude, so it scales with the square root of the
//! Gaussian coupling efficiency. A slow, independent phase wander perturbs
//! the interferometer phase. Both are stationary AR(1) sequences. When the
//! correlation time is shorter than an integration bin they are sampled on
//! finer sub-steps and averaged, so each bin carries the mean emission shape
//! rather than one frozen snapshot.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbulenceModel {
    /// Standard deviation of the arrival angle, rad.
    pub sigma_angle: f64,
    /// Angle at which the coupling efficiency drops to `1/e`, rad.
    pub angle_scale: f64,
    /// Per-bin standard deviation of the phase wander, rad.
    pub sigma_phase: f64,
    /// 1/e correlation time of both processes, s.
    pub correlation_time: f64,
    /// Link length, m.
    pub distance: f64,
}

impl TurbulenceModel {
    /// A model that does nothing.
    pub fn quiet(distance: f64) -> Self {
        TurbulenceModel {
            sigma_angle: 0.0,
            angle_scale: 1.0,
            sigma_phase: 0.0,
            correlation_time: 1.0,
            distance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("sigma_angle", self.sigma_angle),
            ("sigma_phase", self.sigma_phase),
            ("distance", self.distance),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::domain(format!(
                    "{name} must be finite and nonnegative"
                )));
            }
        }
        if !(self.angle_scale > 0.0) {
            return Err(Error::domain("angle_scale must be positive"));
        }
        if !(self.correlation_time > 0.0) {
            return Err(Error::domain("correlation_time must be positive"));
        }
        Ok(())
    }
}

/// Sub-steps per correlation time when the process is faster than a bin.
const SUBSTEPS_PER_CORRELATION: f64 = 4.0;
const MAX_SUBSTEPS: usize = 64;

/// Per-bin averages of the second source's emission.
///
/// Within a bin the rate is `g1^2 + <g2^2> + 2 g1 |<g2 e^{i d}>| cos(phi + arg)`,
/// so `gains` holds the magnitude of the mean complex amplitude, `gain_power`
/// the mean squared gain and `phase_offsets` the argument. With a single
/// sub-step per bin `gain_power == gains^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSeries {
    pub gains: Vec<f64>,
    pub gain_power: Vec<f64>,
    pub phase_offsets: Vec<f64>,
    pub bin_duration: f64,
    pub substeps: usize,
}

impl GainSeries {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

/// Gaussian mode-overlap efficiency `exp(-(theta/theta0)^2)`.
pub fn coupling_efficiency<T: Real>(theta: T, theta0: T) -> Result<T> {
    if !(theta0 > T::zero()) {
        return Err(Error::domain("angle scale must be positive"));
    }
    let x = theta / theta0;
    Ok((-x * x).exp())
}

/// Stationary AR(1) sequence with marginal std `sigma` and lag-one
/// correlation `rho`.
fn ar1(n: usize, sigma: f64, rho: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if sigma == 0.0 {
        out.resize(n, 0.0);
        return out;
    }
    let innovation = sigma * (1.0 - rho * rho).sqrt();
    let z: f64 = StandardNormal.sample(rng);
    let mut x = sigma * z;
    for _ in 0..n {
        out.push(x);
        let e: f64 = StandardNormal.sample(rng);
        x = rho * x + innovation * e;
    }
    out
}

/// Samples the per-bin gain of the second source and the phase wander.
///
/// The angle and phase sequences use separate ChaCha streams of the same
/// seed, so changing one standard deviation leaves the other sequence intact.
pub fn sample_gain_series(
    model: &TurbulenceModel,
    base_gain: f64,
    n_bins: usize,
    bin_duration: f64,
    seed: u64,
) -> Result<GainSeries> {
    model.validate()?;
    if !(base_gain >= 0.0) {
        return Err(Error::domain("base gain must be nonnegative"));
    }
    if n_bins == 0 {
        return Err(Error::domain("at least one bin is required"));
    }
    if !(bin_duration > 0.0) {
        return Err(Error::domain("bin duration must be positive"));
    }
    let ratio = SUBSTEPS_PER_CORRELATION * bin_duration / model.correlation_time;
    // Round ratios that are integral up to floating-point noise.
    let ratio = if (ratio - ratio.round()).abs() < 1e-9 {
        ratio.round()
    } else {
        ratio.ceil()
    };
    let substeps = (ratio as usize).clamp(1, MAX_SUBSTEPS);
    let dt = bin_duration / substeps as f64;
    let rho = (-dt / model.correlation_time).exp();

    let mut angle_rng = ChaCha8Rng::seed_from_u64(seed);
    angle_rng.set_stream(1);
    let mut phase_rng = ChaCha8Rng::seed_from_u64(seed);
    phase_rng.set_stream(2);

    let n = n_bins * substeps;
    let angles = ar1(n, model.sigma_angle, rho, &mut angle_rng);
    let phases = ar1(n, model.sigma_phase, rho, &mut phase_rng);

    let mut gains = Vec::with_capacity(n_bins);
    let mut gain_power = Vec::with_capacity(n_bins);
    let mut phase_offsets = Vec::with_capacity(n_bins);
    for (a, p) in angles.chunks(substeps).zip(phases.chunks(substeps)) {
        if substeps == 1 {
            let g = base_gain * coupling_efficiency(a[0], model.angle_scale)?.sqrt();
            gains.push(g);
            gain_power.push(g * g);
            phase_offsets.push(p[0]);
            continue;
        }
        let (mut re, mut im, mut pow) = (0.0, 0.0, 0.0);
        for (&theta, &d) in a.iter().zip(p) {
            let eff = coupling_efficiency(theta, model.angle_scale)?;
            let g = base_gain * eff.sqrt();
            re += g * d.cos();
            im += g * d.sin();
            pow += g * g;
        }
        let m = substeps as f64;
        let (re, im) = (re / m, im / m);
        gains.push(re.hypot(im));
        gain_power.push(pow / m);
        phase_offsets.push(if im == 0.0 && re >= 0.0 {
            0.0
        } else {
            im.atan2(re)
        });
    }

    Ok(GainSeries {
        gains,
        gain_power,
        phase_offsets,
        bin_duration,
        substeps,
    })
}

/// Distance-to-angle-spread calibration point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub distance: f64,
    pub sigma_angle: f64,
}

/// Piecewise-linear interpolation of the angle spread through `anchors`,
/// clamped to the end values outside their range.
pub fn sigma_from_distance(distance: f64, anchors: &[Anchor]) -> Result<f64> {
    if anchors.is_empty() {
        return Err(Error::domain("turbulence calibration has no anchors"));
    }
    let mut sorted = anchors.to_vec();
    sorted.sort_by(|a, b| a.distance.total_cmp(&b.distance));

    let first = sorted[0];
    let last = sorted[sorted.len() - 1];
    if distance <= first.distance {
        return Ok(first.sigma_angle);
    }
    if distance >= last.distance {
        return Ok(last.sigma_angle);
    }
    let hi = sorted.partition_point(|a| a.distance < distance);
    let (a, b) = (sorted[hi - 1], sorted[hi]);
    if b.distance == a.distance {
        return Ok(b.sigma_angle);
    }
    let t = (distance - a.distance) / (b.distance - a.distance);
    Ok(a.sigma_angle + t * (b.sigma_angle - a.sigma_angle))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::Rng;

    use super::*;

    fn model(sigma_angle: f64, sigma_phase: f64) -> TurbulenceModel {
        TurbulenceModel {
            sigma_angle,
            angle_scale: 20e-6,
            sigma_phase,
            correlation_time: 0.3,
            distance: 20.0,
        }
    }

    #[test]
    fn coupling_examples() {
        assert_eq!(coupling_efficiency(0.0, 1e-5).unwrap(), 1.0);
        assert_relative_eq!(coupling_efficiency(1e-5, 1e-5).unwrap(), (-1.0f64).exp());
        assert_relative_eq!(
            coupling_efficiency(3e-5, 1e-5).unwrap(),
            (-9.0f64).exp(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            coupling_efficiency(3e-5, 1e-5).unwrap(),
            1.23e-4,
            max_relative = 1e-2
        );
        assert!(coupling_efficiency(1.0, 0.0).is_err());
    }

    #[test]
    fn quiet_series_is_constant() {
        let s = sample_gain_series(&model(0.0, 0.0), 0.07, 500, 0.07, 3).unwrap();
        assert!(s.gains.iter().all(|&g| g == 0.07));
        assert!(s.phase_offsets.iter().all(|&p| p == 0.0));
        assert_eq!(s.len(), 500);
    }

    #[test]
    fn series_is_reproducible() {
        let m = model(10e-6, 0.2);
        let a = sample_gain_series(&m, 1.0, 300, 0.07, 42).unwrap();
        let b = sample_gain_series(&m, 1.0, 300, 0.07, 42).unwrap();
        let c = sample_gain_series(&m, 1.0, 300, 0.07, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.gains.iter().all(|&g| g > 0.0 && g <= 1.0));
        assert_eq!(a.substeps, 1);
        assert_eq!(
            a.gain_power,
            a.gains.iter().map(|g| g * g).collect::<Vec<_>>()
        );
    }

    #[test]
    fn fast_turbulence_averages_within_bins() {
        let m = TurbulenceModel {
            sigma_angle: 20e-6,
            angle_scale: 20e-6,
            sigma_phase: 0.3,
            correlation_time: 0.005,
            distance: 70.0,
        };
        let s = sample_gain_series(&m, 1.0, 2000, 0.07, 11).unwrap();
        assert_eq!(s.substeps, 56);
        // Averaging lowers the amplitude below the rms gain (Jensen) and
        // shrinks the bin-to-bin spread relative to frozen snapshots.
        assert!(s
            .gains
            .iter()
            .zip(&s.gain_power)
            .all(|(g, p)| g * g <= p + 1e-15));
        let frozen = sample_gain_series(
            &TurbulenceModel {
                correlation_time: 10.0,
                ..m
            },
            1.0,
            2000,
            0.07,
            11,
        )
        .unwrap();
        let spread = |x: &[f64]| {
            let mu = x.iter().sum::<f64>() / x.len() as f64;
            (x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
        };
        assert!(spread(&s.gains) < 0.5 * spread(&frozen.gains));
    }

    #[test]
    fn mean_efficiency_matches_direct_average() {
        let theta0 = 20e-6;
        let m = TurbulenceModel {
            sigma_angle: theta0,
            correlation_time: 0.05,
            ..model(0.0, 0.0)
        };
        let s = sample_gain_series(&m, 1.0, 400_000, 0.07, 9).unwrap();
        assert!(s.substeps > 1);
        let from_series = s.gain_power.iter().sum::<f64>() / s.len() as f64;

        // Independent draws of theta ~ N(0, sigma).
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let n = 400_000;
        let direct = (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                (-(z * z)).exp()
            })
            .sum::<f64>()
            / n as f64;

        let closed = 1.0 / 3f64.sqrt();
        assert!((direct - closed).abs() < 3e-3);
        assert!(
            (from_series - direct).abs() < 5e-3,
            "{from_series} vs {direct}"
        );
    }

    #[test]
    fn ar1_has_target_spread_and_correlation() {
        let m = TurbulenceModel {
            sigma_angle: 0.0,
            sigma_phase: 0.5,
            correlation_time: 0.35,
            ..model(0.0, 0.0)
        };
        let s = sample_gain_series(&m, 1.0, 200_000, 0.07, 5).unwrap();
        let x = &s.phase_offsets;
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let lag1 = x
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum::<f64>()
            / (n - 1.0)
            / var;
        assert!((var.sqrt() - 0.5).abs() < 0.02);
        assert!((lag1 - (-0.2f64).exp()).abs() < 0.01);
    }

    #[test]
    fn invalid_models_rejected() {
        let mut m = model(1e-6, 0.0);
        m.correlation_time = 0.0;
        assert!(sample_gain_series(&m, 1.0, 10, 0.07, 0).is_err());
        assert!(sample_gain_series(&model(-1.0, 0.0), 1.0, 10, 0.07, 0).is_err());
        assert!(sample_gain_series(&model(1e-6, 0.0), 1.0, 0, 0.07, 0).is_err());
    }

    #[test]
    fn anchors_interpolate() {
        let anchors = [
            Anchor {
                distance: 20.0,
                sigma_angle: 4.0,
            },
            Anchor {
                distance: 2.0,
                sigma_angle: 1.0,
            },
            Anchor {
                distance: 70.0,
                sigma_angle: 9.0,
            },
        ];
        assert_eq!(sigma_from_distance(2.0, &anchors).unwrap(), 1.0);
        assert_eq!(sigma_from_distance(20.0, &anchors).unwrap(), 4.0);
        assert_relative_eq!(sigma_from_distance(11.0, &anchors).unwrap(), 2.5);
        assert_relative_eq!(sigma_from_distance(45.0, &anchors).unwrap(), 6.5);
        assert_eq!(sigma_from_distance(0.5, &anchors).unwrap(), 1.0);
        assert_eq!(sigma_from_distance(500.0, &anchors).unwrap(), 9.0);
        assert!(sigma_from_distance(1.0, &[]).is_err());
    }
}
