//! Closed-form count rates: the coincidence fringe, singles, accidentals and
//! the brightness estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Parameters of the coincidence fringe
/// `C = |A|^2 I_p f_s f_i [1 + V_p V_c cos(k_p dL + dPhi)]`.
///
/// Signal and idler are taken as frequency degenerate, so their wavenumber
/// sum matches the pump and no extra phase term appears.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams<T> {
    /// Overall conversion constant, counts cm^2 / (W s).
    pub amp_sq: T,
    /// Pump intensity, W/cm^2.
    pub pump_intensity: T,
    pub spectral_s: T,
    pub spectral_i: T,
    /// Pump coherence contrast.
    pub vis_pump: T,
    /// Amplitude balance times mode overlap.
    pub vis_contrast: T,
    /// Pump wavenumber `2pi/lambda_p`, 1/m.
    pub k_pump: T,
    pub delta_l: T,
    pub delta_phi: T,
}

impl<T: Real> RateParams<T> {
    /// Mean rate over a full fringe, `|A|^2 I_p f_s f_i`.
    pub fn mean_rate(&self) -> T {
        self.amp_sq * self.pump_intensity * self.spectral_s * self.spectral_i
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: T| x >= T::zero() && x <= T::one();
        if !unit(self.vis_pump) || !unit(self.vis_contrast) {
            return Err(Error::domain("visibilities must lie in [0, 1]"));
        }
        for x in [
            self.amp_sq,
            self.pump_intensity,
            self.spectral_s,
            self.spectral_i,
        ] {
            if !(x >= T::zero()) {
                return Err(Error::domain("rate factors must be nonnegative"));
            }
        }
        Ok(())
    }
}

pub fn coincidence_rate<T: Real>(params: &RateParams<T>) -> Result<T> {
    params.validate()?;
    let v = params.vis_pump * params.vis_contrast;
    let phase = params.k_pump * params.delta_l + params.delta_phi;
    Ok(params.mean_rate() * (T::one() + v * phase.cos()))
}

/// Stage travel per fringe, `lambda_p / fold_factor`.
///
/// A retroreflecting trombone changes the optical path by twice the stage
/// travel, which is a fold factor of 2.
pub fn fringe_period_in_stage_travel<T: Real>(lambda_p: T, fold_factor: T) -> Result<T> {
    if !(fold_factor >= T::one()) {
        return Err(Error::domain("fold factor must be at least 1"));
    }
    if !(lambda_p > T::zero()) {
        return Err(Error::domain("wavelength must be positive"));
    }
    Ok(lambda_p / fold_factor)
}

/// Chance coincidences of two uncorrelated streams in a window of total
/// width `t_c`: `C_A C_B t_c`.
pub fn accidental_rate<T: Real>(singles_a: T, singles_b: T, t_c: T) -> Result<T> {
    if singles_a < T::zero() || singles_b < T::zero() || t_c < T::zero() {
        return Err(Error::domain("rates and window must be nonnegative"));
    }
    Ok(singles_a * singles_b * t_c)
}

/// Pair rate at the source inferred from singles and coincidences,
/// `C_A C_B / C_c`. Background and accidentals are not subtracted.
pub fn brightness<T: Real>(singles_a: T, singles_b: T, coincidences: T) -> Result<T> {
    if !(coincidences > T::zero()) {
        return Err(Error::domain("coincidence rate must be positive"));
    }
    Ok(singles_a * singles_b / coincidences)
}

/// Singles rate on one detector.
///
/// A fraction `1 - background_fraction` of the detected light comes from the
/// interfering pairs and follows their fringe of visibility
/// `fringe_visibility`; the rest is a flat, non-interfering background of
/// the same mean. Dark counts add on top. Without dark counts the singles
/// fringe visibility is `(1 - background_fraction) * fringe_visibility`.
pub fn singles_rate<T: Real>(
    pair_rate: T,
    efficiency: T,
    background_fraction: T,
    dark_rate: T,
    phase: T,
    fringe_visibility: T,
) -> Result<T> {
    let unit = |x: T| x >= T::zero() && x <= T::one();
    if !unit(efficiency) || !unit(background_fraction) || !unit(fringe_visibility) {
        return Err(Error::domain(
            "efficiency, background fraction and visibility must lie in [0, 1]",
        ));
    }
    if pair_rate < T::zero() || dark_rate < T::zero() {
        return Err(Error::domain("rates must be nonnegative"));
    }
    let interfering =
        (T::one() - background_fraction) * (T::one() + fringe_visibility * phase.cos());
    Ok(efficiency * pair_rate * (interfering + background_fraction) + dark_rate)
}

/// Background fraction that dilutes a fringe of visibility `pair_visibility`
/// down to `singles_visibility`.
pub fn singles_background_fraction<T: Real>(
    singles_visibility: T,
    pair_visibility: T,
) -> Result<T> {
    if !(pair_visibility > T::zero())
        || singles_visibility < T::zero()
        || singles_visibility > pair_visibility
    {
        return Err(Error::domain(
            "singles visibility must lie in [0, pair visibility] and the pair visibility be positive",
        ));
    }
    Ok(T::one() - singles_visibility / pair_visibility)
}

/// Detection chain of the two channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub efficiency_s: f64,
    pub efficiency_i: f64,
    /// Dark counts per second on each detector.
    pub dark_rate: f64,
    /// Total width of the coincidence window, s.
    pub coincidence_window: f64,
    pub integration_time: f64,
    /// Non-interfering share of the signal detector's singles.
    pub background_fraction_s: f64,
    /// Non-interfering share of the idler detector's singles.
    pub background_fraction_i: f64,
    /// Gaussian timestamp jitter per detector, s.
    pub jitter: f64,
    /// Non-paralyzable dead time, s. Zero disables it.
    pub dead_time: f64,
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("efficiency_s", self.efficiency_s),
            ("efficiency_i", self.efficiency_i),
            ("background_fraction_s", self.background_fraction_s),
            ("background_fraction_i", self.background_fraction_i),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(name, format!("{v} is outside [0, 1]")));
            }
        }
        // A fully background channel cannot be scaled from the pair rate.
        for (name, v) in [
            ("background_fraction_s", self.background_fraction_s),
            ("background_fraction_i", self.background_fraction_i),
        ] {
            if v >= 1.0 {
                return Err(Error::validation(name, "must be below 1"));
            }
        }
        let nonneg = [
            ("dark_rate", self.dark_rate),
            ("jitter", self.jitter),
            ("dead_time", self.dead_time),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::validation(name, "must be finite and nonnegative"));
            }
        }
        for (name, v) in [
            ("coincidence_window", self.coincidence_window),
            ("integration_time", self.integration_time),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::validation(name, "must be positive"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;

    fn params(v: f64, delta_l: f64, delta_phi: f64) -> RateParams<f64> {
        RateParams {
            amp_sq: 0.2,
            pump_intensity: 1568.5,
            spectral_s: 0.9,
            spectral_i: 0.8,
            vis_pump: 1.0,
            vis_contrast: v,
            k_pump: 2.0 * PI / 405.5e-9,
            delta_l,
            delta_phi,
        }
    }

    #[test]
    fn coincidence_fringe_extremes() {
        let p = params(1.0, 0.0, PI);
        assert!(coincidence_rate(&p).unwrap().abs() < 1e-12);
        let p = params(1.0, 0.0, 0.0);
        assert_relative_eq!(coincidence_rate(&p).unwrap(), 2.0 * p.mean_rate());
        // Against one crystal at the same per-crystal rate (half the mean),
        // the constructive peak is four times larger.
        assert_relative_eq!(coincidence_rate(&p).unwrap() / (p.mean_rate() / 2.0), 4.0);
    }

    #[test]
    fn rate_visibility_from_two_phases() {
        let hi = coincidence_rate(&params(0.92, 0.0, 0.0)).unwrap();
        let lo = coincidence_rate(&params(0.92, 0.0, PI)).unwrap();
        assert_relative_eq!((hi - lo) / (hi + lo), 0.92, epsilon = 1e-12);
    }

    #[test]
    fn over_unity_visibility_rejected() {
        let mut p = params(1.0, 0.0, 0.0);
        p.vis_pump = 1.01;
        assert!(coincidence_rate(&p).is_err());
    }

    #[test]
    fn stage_travel() {
        let p = fringe_period_in_stage_travel::<f64>(405.5e-9, 2.0).unwrap();
        assert_relative_eq!(p, 202.75e-9);
        let per_fringe = p / 180e-9;
        assert_relative_eq!(per_fringe, 1.1264, max_relative = 1e-4);
        assert_eq!((70.0 / per_fringe).floor(), 62.0);
        assert_relative_eq!(
            fringe_period_in_stage_travel(405.5e-9, 1.0).unwrap(),
            405.5e-9
        );
        assert_relative_eq!(fringe_period_in_stage_travel(810e-9, 2.0).unwrap(), 405e-9);
        assert!(fringe_period_in_stage_travel(405.5e-9, 0.5).is_err());
    }

    #[test]
    fn accidentals() {
        let acc = accidental_rate(1.8e4, 1.8e4, 1.5e-9).unwrap();
        assert_relative_eq!(acc, 0.486, max_relative = 1e-12);
        assert_relative_eq!(acc * 0.07, 0.034, max_relative = 1e-2);
        assert_eq!(accidental_rate(0.0, 5e4, 1.5e-9).unwrap(), 0.0);
        assert_relative_eq!(
            accidental_rate(1e4, 1e4, 1.5e-9).unwrap(),
            0.15,
            max_relative = 1e-12
        );
    }

    #[test]
    fn brightness_examples() {
        assert_eq!(brightness(1.8e4, 1.8e4, 675.0).unwrap(), 4.8e5);
        assert_eq!(brightness(3e3, 7e3, 3e3).unwrap(), 7e3);
        assert_eq!(brightness(1e4, 1e4, 1e3).unwrap(), 1e5);
        assert!(brightness(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn singles_examples() {
        // Pure pair light tracks the coincidence fringe shape.
        for phi in [0.0, 0.7, PI] {
            let s = singles_rate(1e4, 0.2, 0.0, 0.0, phi, 1.0).unwrap();
            assert_relative_eq!(s, 0.2 * 1e4 * (1.0 + phi.cos()), epsilon = 1e-9);
        }
        assert_eq!(singles_rate(0.0, 0.2, 0.3, 150.0, 1.0, 0.9).unwrap(), 150.0);

        let bf = singles_background_fraction(0.199, 0.96).unwrap();
        let hi = singles_rate(1e4, 0.2, bf, 0.0, 0.0, 0.96).unwrap();
        let lo = singles_rate(1e4, 0.2, bf, 0.0, PI, 0.96).unwrap();
        assert_relative_eq!((hi - lo) / (hi + lo), 0.199, epsilon = 1e-12);
        assert!(singles_background_fraction(0.5, 0.4).is_err());
    }

    proptest! {
        #[test]
        fn scan_visibility_is_product(
            vp in 0.0f64..1.0, vc in 0.0f64..1.0, phi0 in 0.0f64..6.3
        ) {
            let mut p = params(vc, 0.0, phi0);
            p.vis_pump = vp;
            let period = 2.0 * PI / p.k_pump;
            let n = 2048;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for k in 0..=n {
                // Sample at the exact extremal phases as well.
                let dl = period * k as f64 / n as f64 - phi0 / p.k_pump;
                p.delta_l = dl;
                let r = coincidence_rate(&p).unwrap();
                lo = lo.min(r);
                hi = hi.max(r);
            }
            prop_assert!(((hi - lo) / (hi + lo) - vp * vc).abs() < 1e-10);
        }

        #[test]
        fn periodic_in_path(dl in -1e-6f64..1e-6, m in -5i32..5) {
            let mut a = params(0.8, dl, 0.3);
            let b0 = coincidence_rate(&a).unwrap();
            a.delta_l = dl + m as f64 * 405.5e-9;
            let b1 = coincidence_rate(&a).unwrap();
            prop_assert!((b0 - b1).abs() < 1e-6 * a.mean_rate());
        }
    }
}
