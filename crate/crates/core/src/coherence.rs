//! Temporal coherence of the pump and down-converted light, and the two
//! path-length conditions under which the sources can interfere.
//!
//! Path lengths in a [`PathLayout`] are measured from the first crystal's
//! output facet to the second crystal's input facet. For degenerate photons
//! each down-conversion arm enters the phase at half the pump wavenumber, so
//! a balanced layout has `pump_path = dc_path_a + dc_path_b` when the arms
//! are expressed in pump-equivalent length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Real, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lineshape {
    #[default]
    Lorentzian,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpectrum<T> {
    pub center_wavelength: T,
    /// FWHM bandwidth in Hz.
    pub fwhm_bandwidth: T,
    pub lineshape: Lineshape,
}

impl<T: Real> SourceSpectrum<T> {
    pub fn new(center_wavelength: T, fwhm_bandwidth: T, lineshape: Lineshape) -> Result<Self> {
        if !(center_wavelength > T::zero()) {
            return Err(Error::domain("center wavelength must be positive"));
        }
        if !(fwhm_bandwidth > T::zero()) {
            return Err(Error::domain("bandwidth must be positive"));
        }
        Ok(SourceSpectrum {
            center_wavelength,
            fwhm_bandwidth,
            lineshape,
        })
    }
}

/// Coherence time of a spectrum.
///
/// Lorentzian: `1/(pi dnu)`. Gaussian: `sqrt(2 ln2 / pi) / dnu`.
pub fn coherence_time<T: Real>(spectrum: &SourceSpectrum<T>) -> Result<T> {
    let dnu = spectrum.fwhm_bandwidth;
    if !(dnu > T::zero()) {
        return Err(Error::domain("bandwidth must be positive"));
    }
    Ok(match spectrum.lineshape {
        Lineshape::Lorentzian => T::one() / (T::PI() * dnu),
        Lineshape::Gaussian => (T::lit(2.0) * T::LN_2() / T::PI()).sqrt() / dnu,
    })
}

/// `c * t_coh`.
pub fn coherence_length<T: Real>(t_coh: T) -> Result<T> {
    if !(t_coh > T::zero()) {
        return Err(Error::domain("coherence time must be positive"));
    }
    Ok(T::lit(SPEED_OF_LIGHT) * t_coh)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLayout<T> {
    pub pump_path: T,
    pub dc_path_a: T,
    pub dc_path_b: T,
    pub pump_coh_len: T,
    pub dc_coh_len: T,
}

impl<T: Real> PathLayout<T> {
    pub fn new(
        pump_path: T,
        dc_path_a: T,
        dc_path_b: T,
        pump_coh_len: T,
        dc_coh_len: T,
    ) -> Result<Self> {
        for (name, v) in [
            ("pump_path", pump_path),
            ("dc_path_a", dc_path_a),
            ("dc_path_b", dc_path_b),
        ] {
            if !(v >= T::zero()) {
                return Err(Error::domain(format!("{name} must be nonnegative")));
            }
        }
        if !(pump_coh_len > T::zero()) || !(dc_coh_len > T::zero()) {
            return Err(Error::domain("coherence lengths must be positive"));
        }
        Ok(PathLayout {
            pump_path,
            dc_path_a,
            dc_path_b,
            pump_coh_len,
            dc_coh_len,
        })
    }

    /// `|L_p - L_a - L_b|`.
    pub fn pump_mismatch(&self) -> T {
        (self.pump_path - self.dc_path_a - self.dc_path_b).abs()
    }

    /// `|L_a - L_b|`.
    pub fn dc_mismatch(&self) -> T {
        (self.dc_path_a - self.dc_path_b).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck<T> {
    pub satisfied: bool,
    /// Coherence length minus mismatch; negative when violated.
    pub margin: T,
}

fn check<T: Real>(coh_len: T, mismatch: T) -> ConditionCheck<T> {
    let margin = coh_len - mismatch;
    ConditionCheck {
        satisfied: margin >= T::zero(),
        margin,
    }
}

/// Pump path mismatch against the pump coherence length.
pub fn pump_condition<T: Real>(layout: &PathLayout<T>) -> ConditionCheck<T> {
    check(layout.pump_coh_len, layout.pump_mismatch())
}

/// Down-conversion arm mismatch against their coherence length.
pub fn dc_condition<T: Real>(layout: &PathLayout<T>) -> ConditionCheck<T> {
    check(layout.dc_coh_len, layout.dc_mismatch())
}

/// Interference contrast left by a path mismatch, in `[0, 1]`.
///
/// Lorentzian lines decay as `exp(-|d|/l)` (the modulus of their
/// exponential autocorrelation); Gaussian lines as `exp(-(d/l)^2)`.
pub fn pump_coherence_factor<T: Real>(mismatch: T, coh_len: T, lineshape: Lineshape) -> Result<T> {
    if !(coh_len > T::zero()) {
        return Err(Error::domain("coherence length must be positive"));
    }
    let x = mismatch.abs() / coh_len;
    if x.is_infinite() {
        return Ok(T::zero());
    }
    Ok(match lineshape {
        Lineshape::Lorentzian => (-x).exp(),
        Lineshape::Gaussian => (-x * x).exp(),
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;

    fn spectrum(bw: f64, shape: Lineshape) -> SourceSpectrum<f64> {
        SourceSpectrum::new(405.5e-9, bw, shape).unwrap()
    }

    #[test]
    fn pump_laser_coherence() {
        let t = coherence_time(&spectrum(160e6, Lineshape::Lorentzian)).unwrap();
        assert_relative_eq!(t, 1.989e-9, max_relative = 1e-3);
        let l = coherence_length(t).unwrap();
        assert_relative_eq!(l, 0.5963, max_relative = 1e-3);
    }

    #[test]
    fn coherence_time_examples() {
        let t = coherence_time(&spectrum(1e9, Lineshape::Lorentzian)).unwrap();
        assert_relative_eq!(t, 1.0 / (std::f64::consts::PI * 1e9), max_relative = 1e-15);
        assert_relative_eq!(t, 0.3183e-9, max_relative = 1e-4);
        let g = coherence_time(&spectrum(1e9, Lineshape::Gaussian)).unwrap();
        assert_relative_eq!(g, (2.0 * 2f64.ln() / std::f64::consts::PI).sqrt() / 1e9);
        let wide = coherence_time(&spectrum(1e300, Lineshape::Lorentzian)).unwrap();
        assert!(wide < 1e-299);
    }

    #[test]
    fn bad_spectra_rejected() {
        assert!(SourceSpectrum::new(405e-9, 0.0, Lineshape::Lorentzian).is_err());
        assert!(SourceSpectrum::new(0.0, 1e6, Lineshape::Lorentzian).is_err());
        let raw = SourceSpectrum {
            center_wavelength: 405e-9,
            fwhm_bandwidth: -1.0,
            lineshape: Lineshape::Gaussian,
        };
        assert!(coherence_time(&raw).is_err());
    }

    #[test]
    fn coherence_length_examples() {
        assert_eq!(coherence_length(1.0).unwrap(), 299_792_458.0);
        assert_relative_eq!(coherence_length(2e-9).unwrap(), 0.5996, max_relative = 1e-4);
        assert!(coherence_length(0.0).is_err());
        assert!(coherence_length(-1e-9).is_err());
    }

    #[test]
    fn pump_condition_examples() {
        let balanced = PathLayout::new(4.0, 2.0, 2.0, 0.596, 1e-4).unwrap();
        let c = pump_condition(&balanced);
        assert!(c.satisfied);
        assert_relative_eq!(c.margin, 0.596);

        let half = PathLayout::new(4.5, 2.0, 2.0, 0.596, 1e-4).unwrap();
        let c = pump_condition(&half);
        assert!(c.satisfied);
        assert_relative_eq!(c.margin, 0.096, epsilon = 1e-12);

        let one = PathLayout::new(5.0, 2.0, 2.0, 0.596, 1e-4).unwrap();
        assert!(!pump_condition(&one).satisfied);
    }

    #[test]
    fn dc_condition_examples() {
        let equal = PathLayout::new(4.0, 2.0, 2.0, 0.596, 1e-4).unwrap();
        assert!(dc_condition(&equal).satisfied);
        assert_relative_eq!(dc_condition(&equal).margin, 1e-4);
        let off = PathLayout::new(4.0, 2.001, 2.0, 0.596, 1e-4).unwrap();
        assert!(!dc_condition(&off).satisfied);
    }

    #[test]
    fn layout_validation() {
        assert!(PathLayout::new(-1.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(PathLayout::new(1.0, 0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn coherence_factor_examples() {
        assert_eq!(
            pump_coherence_factor(0.0, 0.3, Lineshape::Lorentzian).unwrap(),
            1.0
        );
        assert_eq!(
            pump_coherence_factor(0.0, 0.3, Lineshape::Gaussian).unwrap(),
            1.0
        );
        assert_relative_eq!(
            pump_coherence_factor(0.596, 0.596, Lineshape::Lorentzian).unwrap(),
            (-1.0f64).exp()
        );
        assert_eq!(
            pump_coherence_factor(f64::INFINITY, 0.596, Lineshape::Lorentzian).unwrap(),
            0.0
        );
        assert!(pump_coherence_factor(0.1, 0.0, Lineshape::Gaussian).is_err());
    }

    proptest! {
        #[test]
        fn conditions_symmetric_under_relabeling(
            lp in 0.0f64..10.0, la in 0.0f64..5.0, lb in 0.0f64..5.0,
            cp in 1e-3f64..1.0, cd in 1e-6f64..1e-2
        ) {
            let ab = PathLayout::new(lp, la, lb, cp, cd).unwrap();
            let ba = PathLayout::new(lp, lb, la, cp, cd).unwrap();
            prop_assert_eq!(pump_condition(&ab).satisfied, pump_condition(&ba).satisfied);
            prop_assert!((pump_condition(&ab).margin - pump_condition(&ba).margin).abs() < 1e-12);
            prop_assert_eq!(dc_condition(&ab), dc_condition(&ba));
        }

        #[test]
        fn coherence_factor_monotone(
            d1 in 0.0f64..5.0, d2 in 0.0f64..5.0, l in 1e-3f64..2.0, gaussian: bool
        ) {
            let shape = if gaussian { Lineshape::Gaussian } else { Lineshape::Lorentzian };
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let a = pump_coherence_factor(lo, l, shape).unwrap();
            let b = pump_coherence_factor(hi, l, shape).unwrap();
            prop_assert!(a >= b);
            prop_assert!((0.0..=1.0).contains(&b));
            prop_assert_eq!(pump_coherence_factor(-lo, l, shape).unwrap(), a);
        }

        #[test]
        fn unit_factor_only_at_full_margin(
            l in 1e-3f64..2.0, d in 1e-6f64..1.0
        ) {
            let layout = PathLayout::new(1.0 + d, 0.5, 0.5, l, 1e-3).unwrap();
            let f = pump_coherence_factor(layout.pump_mismatch(), l, Lineshape::Lorentzian).unwrap();
            prop_assert!(f < 1.0);
            prop_assert!(pump_condition(&layout).margin < l);
        }
    }
}
