//! The conditionally negative definite kernel `h(r) = sqrt(a^2 + r^2) - a`.
//!
//! With `a = 0` this is the plain Euclidean norm and the induced distance is the
//! classical energy distance. A small positive `a` rounds off the kink at the
//! origin so gradients stay finite when two atoms coincide.

use serde::{Deserialize, Serialize};

/// Default smoothing parameter.
pub const DEFAULT_A: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    a: f64,
}

impl Default for Kernel {
    fn default() -> Self {
        Self { a: DEFAULT_A }
    }
}

impl Kernel {
    /// Panics if `a` is negative or not finite.
    pub fn new(a: f64) -> Self {
        assert!(a.is_finite() && a >= 0.0, "kernel parameter must be finite and >= 0, got {a}");
        Self { a }
    }

    /// Fallible constructor for user-supplied values.
    pub fn try_new(a: f64) -> Option<Self> {
        (a.is_finite() && a >= 0.0).then_some(Self { a })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// `h(r)` for a radius `r >= 0`.
    ///
    /// Panics on a negative (or NaN) radius: radii are norms, so a negative one
    /// is a bug in the caller.
    pub fn h(&self, r: f64) -> f64 {
        assert!(r >= 0.0, "kernel radius must be nonnegative, got {r}");
        self.h_unchecked(r)
    }

    /// `h(r)` without the sign check. Evaluated as `r^2 / (sqrt(a^2 + r^2) + a)`,
    /// which avoids cancellation when `r << a`.
    #[inline]
    pub(crate) fn h_unchecked(&self, r: f64) -> f64 {
        if self.a == 0.0 {
            return r;
        }
        let r2 = r * r;
        r2 / ((self.a * self.a + r2).sqrt() + self.a)
    }

    /// `h'(r) / r = 1 / sqrt(a^2 + r^2)`.
    ///
    /// For `a = 0` and `r = 0` the quotient is undefined; this returns 0, which
    /// picks the zero subgradient at the kink.
    pub fn h_prime_over_r(&self, r: f64) -> f64 {
        assert!(r >= 0.0, "kernel radius must be nonnegative, got {r}");
        self.h_prime_over_r_unchecked(r)
    }

    #[inline]
    pub(crate) fn h_prime_over_r_unchecked(&self, r: f64) -> f64 {
        let s = (self.a * self.a + r * r).sqrt();
        if s == 0.0 {
            0.0
        } else {
            1.0 / s
        }
    }

    /// Checks `h(|x - y|) <= h(|x|) + h(|y|) + a` up to a few ulps.
    ///
    /// This bound is what makes the compression objective coercive; it holds for
    /// every pair of points, so a `false` here means the kernel is broken.
    pub fn cnd_inequality_holds(&self, x: &[f64], y: &[f64]) -> bool {
        assert_eq!(x.len(), y.len(), "points must share a dimension");
        let lhs = self.h(dist(x, y));
        let rhs = self.h(norm(x)) + self.h(norm(y)) + self.a;
        lhs <= rhs + 4.0 * f64::EPSILON * rhs.max(1.0)
    }
}

#[inline]
pub(crate) fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

#[inline]
pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
