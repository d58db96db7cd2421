//! The change of variables `w = f(u)`.
//!
//! `f` is the solution of `f'(t) = 1 / sqrt(1 + 2 f(t)^2)`, `f(0) = 0`. Its
//! inverse has the closed form
//!
//! ```text
//! F(s) = s * sqrt(1 + 2 s^2) / 2 + asinh(sqrt(2) s) / (2 sqrt(2)),
//! ```
//!
//! so `f` is evaluated by inverting `F` with a safeguarded Newton iteration
//! rather than by integrating the ODE.

use crate::error::DomainError;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Default mixed absolute/relative inversion tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Evaluator for `f`, `f'`, `f''` and `f^{-1}`.
///
/// Stateless apart from the inversion tolerance, so it is `Copy` and can be
/// shared freely between threads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualTransform {
    tolerance: f64,
}

impl Default for DualTransform {
    fn default() -> Self {
        Self::new()
    }
}

impl DualTransform {
    pub fn new() -> Self {
        Self { tolerance: DEFAULT_TOLERANCE }
    }

    /// Transform with a custom inversion tolerance (clamped to at least
    /// machine epsilon).
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self { tolerance: tolerance.max(f64::EPSILON) }
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// `f(t)`. Errors on non-finite input.
    pub fn f(&self, t: f64) -> Result<f64, DomainError> {
        check_finite("f", t)?;
        Ok(self.value(t))
    }

    /// `f'(t) = 1 / sqrt(1 + 2 f(t)^2)`, always in `(0, 1]`.
    pub fn f_prime(&self, t: f64) -> Result<f64, DomainError> {
        check_finite("f_prime", t)?;
        Ok(derivative_at(self.value(t)))
    }

    /// `f^{-1}(w) = F(w)` in closed form.
    pub fn f_inverse(&self, w: f64) -> Result<f64, DomainError> {
        check_finite("f_inverse", w)?;
        Ok(inverse(w))
    }

    /// Unchecked `f`, for hot loops whose inputs are already known finite.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let target = t.abs();
        // |f(t)| <= min(|t|, 2^{1/4} sqrt|t|) brackets the root from above
        let mut hi = target.min(2f64.powf(0.25) * target.sqrt());
        let mut lo = 0.0_f64;
        let mut w = initial_guess(target).min(hi);
        for _ in 0..200 {
            let residual = inverse(w) - target;
            if residual > 0.0 {
                hi = w;
            } else {
                lo = w;
            }
            let slope = (1.0 + 2.0 * w * w).sqrt();
            let mut next = w - residual / slope;
            if !(next >= lo && next <= hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - w).abs();
            w = next;
            // Newton error after a step of size h is at most 0.36 h^2
            if 0.36 * step * step <= 0.25 * self.tolerance * (1.0 + w) || hi - lo <= f64::EPSILON * w {
                break;
            }
        }
        w.copysign(t)
    }

    /// `f`, `f'` and `f''` at once.
    #[inline]
    pub fn triple(&self, t: f64) -> (f64, f64, f64) {
        let w = self.value(t);
        let d = derivative_at(w);
        (w, d, -2.0 * w * d.powi(4))
    }

    /// Largest `C1` with `|f(t)| >= C1 |t|` for `|t| <= 1` and
    /// `|f(t)| >= C1 sqrt|t|` for `|t| >= 1`, as a sweep infimum.
    pub fn lower_bound_constant(&self) -> f64 {
        let mut c = self.value(1.0);
        for t in standard_sweep().into_iter().filter(|t| *t > 0.0) {
            let ratio = if t <= 1.0 { self.value(t) / t } else { self.value(t) / t.sqrt() };
            c = c.min(ratio);
        }
        c
    }

    /// Constants `(c1, c2)` with `|t| <= c1 |f(t)| + c2 f(t)^2`; `c1` is fixed
    /// to 1 and `c2` is the sweep supremum of `(|t| - |f(t)|) / f(t)^2`.
    pub fn linear_quadratic_constants(&self) -> (f64, f64) {
        let mut c2 = 0.0_f64;
        for t in standard_sweep().into_iter().filter(|t| *t > 0.0) {
            let w = self.value(t);
            c2 = c2.max((t - w) / (w * w));
        }
        (1.0, c2)
    }

    /// Sweep supremum of `f(2t)^2 / f(t)^2`.
    pub fn doubling_constant(&self) -> f64 {
        standard_sweep()
            .into_iter()
            .filter(|t| *t > 0.0)
            .map(|t| (self.value(2.0 * t) / self.value(t)).powi(2))
            .fold(0.0, f64::max)
    }
}

/// Series `t - t^3/3 + 13 t^5/30` for small `t`, otherwise two fixed-point
/// sweeps of `s^2 = sqrt2 (t - (1/2 + ln(2 sqrt2 s)) / (2 sqrt2))`.
#[inline]
fn initial_guess(t: f64) -> f64 {
    if t < 0.5 {
        let t2 = t * t;
        return t * (1.0 - t2 / 3.0 + 13.0 / 30.0 * t2 * t2);
    }
    let mut s = 2f64.powf(0.25) * t.sqrt();
    for _ in 0..2 {
        let c = if s > 0.5 { (0.5 + (2.0 * SQRT2 * s).ln()) / (2.0 * SQRT2) } else { 0.0 };
        s = (SQRT2 * (t - c)).max(1e-300).sqrt();
    }
    s
}

/// `F(w) = f^{-1}(w)`.
#[inline]
pub(crate) fn inverse(w: f64) -> f64 {
    0.5 * w * (1.0 + 2.0 * w * w).sqrt() + (SQRT2 * w).asinh() / (2.0 * SQRT2)
}

#[inline]
fn derivative_at(w: f64) -> f64 {
    1.0 / (1.0 + 2.0 * w * w).sqrt()
}

fn check_finite(op: &'static str, x: f64) -> Result<(), DomainError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(DomainError::NonFinite { op, value: x })
    }
}

/// 0, then 5000 log-spaced points on `[1e-6, 1e6]` and their negatives.
pub fn standard_sweep() -> Vec<f64> {
    let n = 5000;
    let (lo, hi) = (-6.0_f64, 6.0_f64);
    let mut out = Vec::with_capacity(2 * n + 1);
    out.push(0.0);
    for i in 0..n {
        let t = 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64);
        out.push(t);
        out.push(-t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite 5-point Gauss-Legendre of sqrt(1 + 2 s^2) on [0, w].
    fn quadrature_inverse(w: f64) -> f64 {
        let nodes = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        let weights = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let panels = 2000;
        let h = w / panels as f64;
        let mut sum = 0.0;
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for (x, wt) in nodes.iter().zip(weights) {
                let s = mid + 0.5 * h * x;
                sum += wt * 0.5 * h * (1.0 + 2.0 * s * s).sqrt();
            }
        }
        sum
    }

    #[test]
    fn f_at_zero_is_zero() {
        let ft = DualTransform::new();
        assert_eq!(ft.f(0.0).unwrap(), 0.0);
        assert_eq!(ft.f_prime(0.0).unwrap(), 1.0);
        assert_eq!(ft.f_inverse(0.0).unwrap(), 0.0);
    }

    #[test]
    fn inverse_at_one_matches_quadrature() {
        let oracle = quadrature_inverse(1.0);
        // frozen from the quadrature oracle
        assert!((oracle - 1.271_273_898_522_815_6).abs() < 1e-13);
        let ft = DualTransform::new();
        assert!((ft.f_inverse(1.0).unwrap() - oracle).abs() < 1e-12);
        assert!((ft.f(oracle).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn f_of_1_27129_is_near_one() {
        let ft = DualTransform::new();
        assert!((ft.f(1.271290).unwrap() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn square_root_growth() {
        let ft = DualTransform::new();
        let ratio = ft.f(1e8).unwrap() / 1e4;
        assert!((ratio - 2f64.powf(0.25)).abs() < 1e-3, "{ratio}");
    }

    #[test]
    fn product_bound_attained_asymptotically() {
        let ft = DualTransform::new();
        let t = 1e6;
        let p = ft.f(t).unwrap() * ft.f_prime(t).unwrap();
        assert!((p - 0.5f64.sqrt()).abs() < 1e-4, "{p}");
    }

    #[test]
    fn f_prime_at_most_one() {
        let ft = DualTransform::new();
        for t in [0.5, -0.5, 3.0, -3.0, 100.0, -100.0] {
            assert!(ft.f_prime(t).unwrap() <= 1.0);
        }
    }

    #[test]
    fn inverse_is_odd() {
        let ft = DualTransform::new();
        for w in [0.3, 2.0, 50.0] {
            assert_eq!(ft.f_inverse(-w).unwrap(), -ft.f_inverse(w).unwrap());
        }
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let ft = DualTransform::new();
        assert!(ft.f(f64::NAN).is_err());
        assert!(ft.f_prime(f64::INFINITY).is_err());
        assert!(ft.f_inverse(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn lower_bound_constant_is_valid() {
        let ft = DualTransform::new();
        let c1 = ft.lower_bound_constant();
        assert!(c1 > 0.0 && c1 <= 1.0);
        assert!(ft.value(1.0) >= c1);
        assert!(ft.value(0.5) >= c1 * 0.5);
        assert!(ft.value(4.0) >= c1 * 2.0);
    }

    #[test]
    fn second_derivative_matches_differences() {
        let ft = DualTransform::new();
        for t in [-2.0, 0.3, 1.7, 40.0] {
            let (_, _, d2) = ft.triple(t);
            let e = 1e-4 * (1.0 + t.abs());
            let fd = (derivative_at(ft.value(t + e)) - derivative_at(ft.value(t - e))) / (2.0 * e);
            assert!((d2 - fd).abs() < 1e-7, "{t}: {d2} vs {fd}");
        }
    }
}
