//! Paraxial Gaussian beams and thin focusing elements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// TEM00 beam described by its waist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBeam<T> {
    pub wavelength: T,
    /// `1/e^2` intensity radius at the waist.
    pub waist_radius: T,
    /// Axial position of the waist.
    pub waist_position: T,
}

impl<T: Real> GaussianBeam<T> {
    pub fn new(wavelength: T, waist_radius: T, waist_position: T) -> Result<Self> {
        if !(wavelength > T::zero()) {
            return Err(Error::domain("wavelength must be positive"));
        }
        if !(waist_radius > T::zero()) {
            return Err(Error::domain("waist radius must be positive"));
        }
        Ok(GaussianBeam {
            wavelength,
            waist_radius,
            waist_position,
        })
    }

    /// Beam with its waist at the origin.
    pub fn at_origin(wavelength: T, waist_radius: T) -> Result<Self> {
        Self::new(wavelength, waist_radius, T::zero())
    }

    pub fn rayleigh_length(&self) -> T {
        rayleigh_length(self)
    }

    pub fn radius_at(&self, z: T) -> T {
        beam_radius_at(self, z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusingElement<T> {
    pub focal_length: T,
    pub aperture_diameter: T,
}

impl<T: Real> FocusingElement<T> {
    pub fn new(focal_length: T, aperture_diameter: T) -> Result<Self> {
        if !(focal_length > T::zero()) || !(aperture_diameter > T::zero()) {
            return Err(Error::domain(
                "focal length and aperture diameter must be positive",
            ));
        }
        Ok(FocusingElement {
            focal_length,
            aperture_diameter,
        })
    }
}

/// `z_R = pi w0^2 / lambda`.
pub fn rayleigh_length<T: Real>(beam: &GaussianBeam<T>) -> T {
    T::PI() * beam.waist_radius * beam.waist_radius / beam.wavelength
}

/// `w(z) = w0 sqrt(1 + ((z - z0)/z_R)^2)`.
pub fn beam_radius_at<T: Real>(beam: &GaussianBeam<T>, z: T) -> T {
    let u = (z - beam.waist_position) / rayleigh_length(beam);
    beam.waist_radius * (T::one() + u * u).sqrt()
}

/// Image of a waist placed in the front focal plane of `element`.
///
/// The output waist sits in the back focal plane with radius
/// `f lambda / (pi w_in)`. This covers both collimating a tight focus and
/// focusing a collimated beam; the map is its own inverse.
pub fn conjugate_waist<T: Real>(
    beam: &GaussianBeam<T>,
    element: &FocusingElement<T>,
) -> GaussianBeam<T> {
    let f = element.focal_length;
    let w_out = f * beam.wavelength / (T::PI() * beam.waist_radius);
    let ratio = w_out / beam.waist_radius;
    if ratio < T::lit(10.0) && ratio > T::lit(0.1) {
        log::warn!(
            "waist {} -> {} is neither a collimation nor a tight focus; the far-field picture is marginal",
            beam.waist_radius,
            w_out
        );
    }
    GaussianBeam {
        wavelength: beam.wavelength,
        waist_radius: w_out,
        waist_position: beam.waist_position + f + f,
    }
}

/// Down-conversion focal parameter that best couples to a pump focused with
/// parameter `xi_pump`: `sqrt(2.84 xi_pump)`.
pub fn matched_spdc_focal_parameter<T: Real>(xi_pump: T) -> Result<T> {
    if !(xi_pump > T::zero()) {
        return Err(Error::domain("focal parameter must be positive"));
    }
    Ok((T::lit(2.84) * xi_pump).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApertureCheck<T> {
    pub pass: bool,
    /// Beam diameter over aperture diameter.
    pub ratio: T,
}

/// Whether the `1/e^2` diameter at `z` fits through an aperture.
pub fn aperture_check<T: Real>(
    beam: &GaussianBeam<T>,
    z: T,
    aperture_diameter: T,
) -> Result<ApertureCheck<T>> {
    if !(aperture_diameter > T::zero()) {
        return Err(Error::domain("aperture diameter must be positive"));
    }
    let ratio = T::lit(2.0) * beam_radius_at(beam, z) / aperture_diameter;
    Ok(ApertureCheck {
        pass: ratio <= T::one(),
        ratio,
    })
}

/// On-axis intensity `2P/(pi w0^2)` in W/cm^2 for power in W and waist in m.
pub fn peak_intensity<T: Real>(power: T, waist: T) -> Result<T> {
    if power < T::zero() || !(waist > T::zero()) {
        return Err(Error::domain(
            "power must be nonnegative and waist positive",
        ));
    }
    let w_per_m2 = T::lit(2.0) * power / (T::PI() * waist * waist);
    Ok(w_per_m2 * T::lit(1e-4))
}
