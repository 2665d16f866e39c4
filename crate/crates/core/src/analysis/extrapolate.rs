//! Ordinary least-squares line through `(distance, visibility)` points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearExtrapolation<T> {
    /// Visibility change per metre.
    pub slope: T,
    pub intercept: T,
}

impl<T: Real> LinearExtrapolation<T> {
    pub fn value_at(&self, distance: T) -> T {
        self.intercept + self.slope * distance
    }

    /// Distance at which the line reaches `v`; `None` for a flat line.
    pub fn distance_at(&self, v: T) -> Option<T> {
        if self.slope == T::zero() {
            None
        } else {
            Some((self.intercept - v) / -self.slope)
        }
    }
}

pub fn linear_visibility_extrapolation<T: Real>(
    points: &[(T, T)],
) -> Result<LinearExtrapolation<T>> {
    if points.len() < 2 {
        return Err(Error::domain(format!(
            "extrapolation needs at least two points, got {}",
            points.len()
        )));
    }
    if !points.iter().all(|(x, y)| x.is_finite() && y.is_finite()) {
        return Err(Error::domain("extrapolation points must be finite"));
    }
    let n = T::from_usize(points.len()).unwrap();
    let mx = points.iter().fold(T::zero(), |a, p| a + p.0) / n;
    let my = points.iter().fold(T::zero(), |a, p| a + p.1) / n;
    let sxx = points
        .iter()
        .fold(T::zero(), |a, p| a + (p.0 - mx) * (p.0 - mx));
    let sxy = points
        .iter()
        .fold(T::zero(), |a, p| a + (p.0 - mx) * (p.1 - my));
    if !(sxx > T::zero()) {
        return Err(Error::degenerate("all distances are equal"));
    }
    let slope = sxy / sxx;
    Ok(LinearExtrapolation {
        slope,
        intercept: my - slope * mx,
    })
}
