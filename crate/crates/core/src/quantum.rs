//! Truncated SPDC expansion and the amplitude of a pair emitted by two
//! coherently pumped sources whose output modes are overlapped.
//!
//! After path identity the two processes feed the same signal/idler modes,
//! so the first-order pair coefficient is the sum of the two process
//! amplitudes. The relative phase is attached to the first process:
//!
//! ```text
//! |0,0> + (g2 + g1 e^{i phi}) |1,1>
//! ```
//!
//! Only the relative phase is observable, so the opposite convention gives
//! identical probabilities.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default gain above which the first-order truncation is considered unreliable.
pub const DEFAULT_GAIN_WARNING: f64 = 0.1;

/// One nonlinear pair source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdcProcess<T> {
    gain: T,
    phase: T,
    pub pump_wavelength: T,
    pub crystal_length: T,
}

impl<T: Real> SpdcProcess<T> {
    /// Builds a process, reducing `phase` to `[0, 2pi)`.
    ///
    /// Gains above [`DEFAULT_GAIN_WARNING`] are accepted but logged.
    pub fn new(gain: T, phase: T, pump_wavelength: T, crystal_length: T) -> Result<Self> {
        Self::with_gain_threshold(
            gain,
            phase,
            pump_wavelength,
            crystal_length,
            T::lit(DEFAULT_GAIN_WARNING),
        )
    }

    pub fn with_gain_threshold(
        gain: T,
        phase: T,
        pump_wavelength: T,
        crystal_length: T,
        threshold: T,
    ) -> Result<Self> {
        check_gain(gain)?;
        if !(pump_wavelength > T::zero()) || !(crystal_length > T::zero()) {
            return Err(Error::domain(
                "pump wavelength and crystal length must be positive",
            ));
        }
        if gain > threshold {
            log::warn!("gain {gain} exceeds {threshold}; higher-order emission is not negligible");
        }
        Ok(SpdcProcess {
            gain,
            phase: reduce_phase(phase),
            pump_wavelength,
            crystal_length,
        })
    }

    pub fn gain(&self) -> T {
        self.gain
    }

    /// Phase in `[0, 2pi)`.
    pub fn phase(&self) -> T {
        self.phase
    }

    pub fn is_perturbative(&self, threshold: T) -> bool {
        self.gain <= threshold
    }
}

/// Reduces an angle to `[0, 2pi)`.
pub fn reduce_phase<T: Real>(phase: T) -> T {
    let two_pi = T::TAU();
    let r = phase % two_pi;
    let r = if r < T::zero() { r + two_pi } else { r };
    // `r + 2pi` can round up to exactly 2pi for tiny negative inputs.
    if r >= two_pi {
        T::zero()
    } else {
        r
    }
}

fn check_gain<T: Real>(g: T) -> Result<()> {
    if g >= T::zero() {
        Ok(())
    } else {
        Err(Error::domain(format!("gain must be nonnegative, got {g}")))
    }
}

/// Coefficient of `|1,1>` when both processes feed the same modes:
/// `g2 + g1 e^{i phi}`.
pub fn superposed_pair_amplitude<T: Real>(g1: T, g2: T, phi: T) -> Result<Complex<T>> {
    check_gain(g1)?;
    check_gain(g2)?;
    Ok(Complex::new(g2, T::zero()) + Complex::from_polar(g1, phi))
}

/// `|g2 + g1 e^{i phi}|^2 = g1^2 + g2^2 + 2 g1 g2 cos(phi)`.
pub fn emission_probability<T: Real>(g1: T, g2: T, phi: T) -> Result<T> {
    check_gain(g1)?;
    check_gain(g2)?;
    let two = T::lit(2.0);
    Ok(g1 * g1 + g2 * g2 + two * g1 * g2 * phi.cos())
}

/// Fringe visibility of [`emission_probability`] over a full phase scan,
/// `2 g1 g2 / (g1^2 + g2^2)`.
pub fn fringe_visibility_from_amplitudes<T: Real>(g1: T, g2: T) -> Result<T> {
    check_gain(g1)?;
    check_gain(g2)?;
    let denom = g1 * g1 + g2 * g2;
    if denom <= T::zero() {
        return Err(Error::degenerate("both gains are zero"));
    }
    Ok(T::lit(2.0) * g1 * g2 / denom)
}

/// Truncated two-mode state in the `|n,n>` basis, `n <= 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeState<T> {
    pub amp_vac: Complex<T>,
    pub amp_pair: Complex<T>,
    pub amp_double: Complex<T>,
}

impl<T: Real> TwoModeState<T> {
    /// Unnormalized expansion `1 + A |1,1> (+ A^2/2 |2,2>)` with
    /// `A = g2 + g1 e^{i phi}`.
    ///
    /// The double-pair coefficient squares the summed first-order amplitude,
    /// which is what a single effective process of gain `A` would give. It
    /// ignores the cross terms of two separately squeezed modes.
    pub fn expansion(g1: T, g2: T, phi: T, include_double: bool) -> Result<Self> {
        let pair = superposed_pair_amplitude(g1, g2, phi)?;
        let double = if include_double {
            pair * pair / T::lit(2.0)
        } else {
            Complex::new(T::zero(), T::zero())
        };
        Ok(TwoModeState {
            amp_vac: Complex::new(T::one(), T::zero()),
            amp_pair: pair,
            amp_double: double,
        })
    }

    pub fn norm_sqr(&self) -> T {
        self.amp_vac.norm_sqr() + self.amp_pair.norm_sqr() + self.amp_double.norm_sqr()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        TwoModeState {
            amp_vac: self.amp_vac / n,
            amp_pair: self.amp_pair / n,
            amp_double: self.amp_double / n,
        }
    }

    /// Mean number of pairs, `P(1,1) + 2 P(2,2)`, of the normalized state.
    pub fn mean_pair_number(&self) -> T {
        let s = self.normalized();
        s.amp_pair.norm_sqr() + T::lit(2.0) * s.amp_double.norm_sqr()
    }
}

/// Normalized truncated state for two sources with relative phase `phi`.
pub fn truncated_state<T: Real>(
    g1: T,
    g2: T,
    phi: T,
    include_double: bool,
) -> Result<TwoModeState<T>> {
    Ok(TwoModeState::expansion(g1, g2, phi, include_double)?.normalized())
}
