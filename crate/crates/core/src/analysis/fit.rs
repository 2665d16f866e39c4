//! Least-squares fit of `offset + amplitude cos(2 pi t / period + phase)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineFit<T> {
    pub amplitude: T,
    pub offset: T,
    /// In bins.
    pub period: T,
    /// Phase at bin 0, in `[0, 2 pi)`.
    pub phase: T,
    /// Sum of squared residuals.
    pub residual: T,
    /// Standard error of [`CosineFit::visibility`] from the
    /// heteroscedasticity-robust (sandwich) covariance of the fit; `None`
    /// when the normal equations are singular.
    pub visibility_std: Option<T>,
    pub converged: bool,
}

impl<T: Real> CosineFit<T> {
    /// `amplitude / offset`, zero when the offset is not positive.
    pub fn visibility(&self) -> T {
        if self.offset > T::zero() {
            self.amplitude / self.offset
        } else {
            T::zero()
        }
    }

    pub fn eval(&self, t: T) -> T {
        self.offset + self.amplitude * (T::TAU() * t / self.period + self.phase).cos()
    }
}

/// Solves `a x = b` for a dense `n x n` row-major matrix by Gaussian
/// elimination with partial pivoting. Returns `None` when singular.
fn solve<T: Real>(mut a: Vec<T>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i * n + col]
                .abs()
                .partial_cmp(&a[j * n + col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if !(a[pivot * n + col].abs() > T::zero()) {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                let v = a[col * n + k];
                a[row * n + k] = a[row * n + k] - f * v;
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s = s - a[row * n + k] * x[k];
        }
        x[row] = s / a[row * n + row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Parameters `(c, a, b, omega)` of `c + a cos(omega s) + b sin(omega s)`
/// with `s` the centered time.
type Params<T> = [T; 4];

fn residual<T: Real>(y: &[T], s: &[T], p: &Params<T>) -> T {
    y.iter().zip(s).fold(T::zero(), |acc, (&yi, &si)| {
        let (sn, cs) = (p[3] * si).sin_cos();
        let r = yi - (p[0] + p[1] * cs + p[2] * sn);
        acc + r * r
    })
}

/// Linear least squares for `(c, a, b)` at a fixed angular frequency.
fn linear_fit<T: Real>(y: &[T], s: &[T], omega: T) -> Option<Params<T>> {
    let mut ata = vec![T::zero(); 9];
    let mut aty = vec![T::zero(); 3];
    for (&yi, &si) in y.iter().zip(s) {
        let (sn, cs) = (omega * si).sin_cos();
        let row = [T::one(), cs, sn];
        for i in 0..3 {
            aty[i] = aty[i] + row[i] * yi;
            for j in 0..3 {
                ata[i * 3 + j] = ata[i * 3 + j] + row[i] * row[j];
            }
        }
    }
    let x = solve(ata, aty)?;
    Some([x[0], x[1], x[2], omega])
}

const MAX_ITERATIONS: usize = 200;

/// Fits a cosine to `trace` (time in bins), starting from a period scan
/// within 10 % of `initial_period` and refining all four parameters with
/// Levenberg-Marquardt. Non-convergence is reported through the
/// `converged` flag.
pub fn fit_cosine<T: Real>(trace: &[T], initial_period: T) -> Result<CosineFit<T>> {
    let n = trace.len();
    if !(initial_period > T::zero()) || !initial_period.is_finite() {
        return Err(Error::domain("initial period must be positive"));
    }
    if T::from_usize(n).unwrap() < T::lit(2.0) * initial_period || n < 5 {
        return Err(Error::domain(format!(
            "a trace of {n} bins is shorter than two {initial_period}-bin periods"
        )));
    }
    if !trace.iter().all(|v| v.is_finite()) {
        return Err(Error::domain("trace contains non-finite values"));
    }
    let center = T::from_usize(n - 1).unwrap() / T::lit(2.0);
    let s: Vec<T> = (0..n).map(|k| T::from_usize(k).unwrap() - center).collect();

    // Coarse scan over the period.
    let steps = 81;
    let mut best: Option<(T, Params<T>)> = None;
    for k in 0..steps {
        let frac = T::lit(-0.1 + 0.2 * k as f64 / (steps - 1) as f64);
        let omega = T::TAU() / (initial_period * (T::one() + frac));
        if let Some(p) = linear_fit(trace, &s, omega) {
            let r = residual(trace, &s, &p);
            if best.is_none_or(|(rb, _)| r < rb) {
                best = Some((r, p));
            }
        }
    }
    let (mut cost, mut p) =
        best.ok_or_else(|| Error::degenerate("cosine design matrix is singular"))?;

    let mut lambda = T::lit(1e-3);
    let mut converged = false;
    let tiny = T::epsilon();
    for _ in 0..MAX_ITERATIONS {
        let mut jtj = vec![T::zero(); 16];
        let mut jtr = vec![T::zero(); 4];
        for (&yi, &si) in trace.iter().zip(&s) {
            let (sn, cs) = (p[3] * si).sin_cos();
            let r = yi - (p[0] + p[1] * cs + p[2] * sn);
            let jac = [T::one(), cs, sn, si * (p[2] * cs - p[1] * sn)];
            for i in 0..4 {
                jtr[i] = jtr[i] + jac[i] * r;
                for j in 0..4 {
                    jtj[i * 4 + j] = jtj[i * 4 + j] + jac[i] * jac[j];
                }
            }
        }
        let max_diag = (0..4).map(|i| jtj[i * 5]).fold(T::zero(), T::max);
        let mut improved = false;
        while lambda < T::lit(1e12) {
            let mut a = jtj.clone();
            for i in 0..4 {
                a[i * 5] = a[i * 5] + lambda * (jtj[i * 5] + tiny * max_diag);
            }
            let Some(step) = solve(a, jtr.clone()) else {
                lambda = lambda * T::lit(10.0);
                continue;
            };
            let trial = [
                p[0] + step[0],
                p[1] + step[1],
                p[2] + step[2],
                p[3] + step[3],
            ];
            let c = residual(trace, &s, &trial);
            if c <= cost {
                let scale = p
                    .iter()
                    .fold(T::zero(), |m, v| m.max(v.abs()))
                    .max(T::one());
                let small_step = step.iter().all(|d| d.abs() <= T::lit(1e3) * tiny * scale);
                let small_gain = cost - c <= tiny * cost;
                p = trial;
                cost = c;
                lambda = (lambda / T::lit(10.0)).max(T::lit(1e-12));
                improved = true;
                if small_step || small_gain {
                    converged = true;
                }
                break;
            }
            lambda = lambda * T::lit(10.0);
        }
        if !improved {
            // No downhill step exists: already at a minimum of the cost.
            converged = true;
        }
        if converged {
            break;
        }
    }

    let mut omega = p[3];
    let (mut ca, mut cb) = (p[1], p[2]);
    if omega < T::zero() {
        omega = -omega;
        cb = -cb;
    }
    let amplitude = (ca * ca + cb * cb).sqrt();
    let visibility_std = visibility_std(trace, &s, &p);
    if amplitude == T::zero() {
        ca = T::one();
    }
    // a cos(w s) + b sin(w s) = A cos(w s - atan2(b, a)) and s = t - center.
    let phase = (-cb.atan2(ca) - omega * center) % T::TAU();
    let phase = if phase < T::zero() {
        phase + T::TAU()
    } else {
        phase
    };
    Ok(CosineFit {
        amplitude,
        offset: p[0],
        period: T::TAU() / omega,
        phase,
        residual: cost,
        visibility_std,
        converged,
    })
}

/// Sandwich estimate of the standard error of `sqrt(a^2 + b^2) / c`.
fn visibility_std<T: Real>(y: &[T], s: &[T], p: &Params<T>) -> Option<T> {
    let amp = (p[1] * p[1] + p[2] * p[2]).sqrt();
    if !(p[0] > T::zero()) || !(amp > T::zero()) {
        return None;
    }
    let jac = |si: T| {
        let (sn, cs) = (p[3] * si).sin_cos();
        [T::one(), cs, sn, si * (p[2] * cs - p[1] * sn)]
    };
    let mut jtj = vec![T::zero(); 16];
    for &si in s {
        let j = jac(si);
        for a in 0..4 {
            for b in 0..4 {
                jtj[a * 4 + b] = jtj[a * 4 + b] + j[a] * j[b];
            }
        }
    }
    let grad = vec![
        -amp / (p[0] * p[0]),
        p[1] / (amp * p[0]),
        p[2] / (amp * p[0]),
        T::zero(),
    ];
    let x = solve(jtj, grad)?;
    let var = y.iter().zip(s).fold(T::zero(), |acc, (&yi, &si)| {
        let (sn, cs) = (p[3] * si).sin_cos();
        let r = yi - (p[0] + p[1] * cs + p[2] * sn);
        let j = jac(si);
        let jx = j[0] * x[0] + j[1] * x[1] + j[2] * x[2] + j[3] * x[3];
        acc + r * r * jx * jx
    });
    Some(var.sqrt())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::TAU;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    use super::*;
    use crate::analysis::visibility::shot_noise_visibility_error;

    fn synth(n: usize, c: f64, a: f64, period: f64, phase: f64) -> Vec<f64> {
        (0..n)
            .map(|k| c + a * (TAU * k as f64 / period + phase).cos())
            .collect()
    }

    #[test]
    fn solver_handles_pivoting_and_singularity() {
        let x = solve(vec![0.0, 1.0, 2.0, 0.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(x, vec![2.0, 3.0]);
        assert!(solve(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 1.0]).is_none());
    }

    #[test]
    fn recovers_noiseless_cosine() {
        let y = synth(1000, 51.0, 49.0, 16.09, 1.234);
        let f = fit_cosine(&y, 15.0).unwrap();
        assert!(f.converged);
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(f.offset, 51.0) < 1e-8, "{f:?}");
        assert!(rel(f.amplitude, 49.0) < 1e-8, "{f:?}");
        assert!(rel(f.period, 16.09) < 1e-8, "{f:?}");
        assert!(rel(f.phase, 1.234) < 1e-8, "{f:?}");
        assert!((f.eval(10.0) - y[10]).abs() < 1e-6);
    }

    #[test]
    fn single_precision_fit() {
        let y: Vec<f32> = synth(400, 20.0, 10.0, 16.0, 0.5)
            .into_iter()
            .map(|v| v as f32)
            .collect();
        let f = fit_cosine(&y, 16.5f32).unwrap();
        assert!((f.visibility() - 0.5).abs() < 1e-3, "{f:?}");
    }

    #[test]
    fn constant_trace_has_no_amplitude() {
        let f = fit_cosine(&[5.0f64; 200], 16.0).unwrap();
        assert!(f.amplitude < 1e-9, "{f:?}");
        assert!((f.offset - 5.0).abs() < 1e-9);
        assert_eq!(f.visibility(), f.amplitude / 5.0);
    }

    #[test]
    fn rejects_short_traces() {
        assert!(fit_cosine(&[1.0; 20], 16.0).is_err());
        assert!(fit_cosine(&[1.0; 100], 0.0).is_err());
        assert!(fit_cosine(&[1.0, f64::NAN, 1.0, 1.0, 1.0, 1.0, 1.0], 2.0).is_err());
    }

    #[test]
    fn noisy_fit_within_two_sigma() {
        let (mean, v) = (51.0, 0.9615);
        let truth = synth(1000, mean, mean * v, 16.09, 0.3);
        let sigma = shot_noise_visibility_error(mean * (1.0 + v), mean * (1.0 - v)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let y: Vec<f64> = truth
            .iter()
            .map(|&m| Poisson::new(m).unwrap().sample(&mut rng))
            .collect();
        let f = fit_cosine(&y, 16.09).unwrap();
        assert!(
            (f.visibility() - v).abs() < 2.0 * sigma,
            "{} vs {v}",
            f.visibility()
        );
    }

    #[test]
    fn visibility_std_matches_seed_spread() {
        let (mean, v) = (40.0, 0.8);
        let truth = synth(600, mean, mean * v, 16.09, 1.1);
        let mut fits = Vec::new();
        let mut stds = Vec::new();
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = truth
                .iter()
                .map(|&m| Poisson::new(m).unwrap().sample(&mut rng))
                .collect();
            let f = fit_cosine(&y, 16.09).unwrap();
            fits.push(f.visibility());
            stds.push(f.visibility_std.unwrap());
        }
        let n = fits.len() as f64;
        let m = fits.iter().sum::<f64>() / n;
        let spread = (fits.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let predicted = stds.iter().sum::<f64>() / n;
        assert!(
            (predicted / spread - 1.0).abs() < 0.15,
            "{predicted} vs {spread}"
        );
        assert!((m - v).abs() < 3.0 * spread / n.sqrt());
    }

    #[test]
    fn noiseless_fit_has_zero_std() {
        let f = fit_cosine(&synth(200, 10.0, 5.0, 16.09, 0.4), 16.0).unwrap();
        assert!(f.visibility_std.unwrap() < 1e-9);
        assert!(fit_cosine(&[3.0; 64], 16.0)
            .unwrap()
            .visibility_std
            .is_none_or(|s| s < 1e-9));
    }
}
