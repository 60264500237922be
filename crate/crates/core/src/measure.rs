//! Finite signed measures `sum_k p_k delta_{z_k}` and their kernel distance.
//!
//! The squared distance between two discrete measures only depends on their
//! difference, so everything here works on a single [`SignedPointMeasure`]
//! holding that difference:
//!
//! ```text
//! d^2 = - sum_{k,l} p_k p_l h(|z_k - z_l|)
//! ```
//!
//! Summation policy: [`SignedPointMeasure::distance_squared`] first brings the
//! atoms into a canonical order (lexicographic by coordinates, then by weight)
//! and merges atoms at identical locations. The result is therefore exactly
//! invariant under permutations of the input, and `eta - eta` evaluates to
//! exactly 0. The fused value-and-gradient path used inside the optimizer skips
//! this step and sums in input order; it is deterministic for a fixed input.

use thiserror::Error;

use crate::kernel::{dist, Kernel};

/// Absolute tolerance on the total mass of a difference measure.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Largest negative rounding residue that is silently clamped to zero.
pub const NEGATIVE_CLAMP: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("a uniform measure needs at least one point")]
    Empty,
    #[error("dimension mismatch: expected {expected}, found {found} (atom {index})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        index: usize,
    },
    #[error("points must have dimension >= 1")]
    ZeroDimension,
    #[error("{points} points but {weights} weights")]
    LengthMismatch { points: usize, weights: usize },
    #[error("difference measure has total mass {0:e}, expected 0")]
    NonZeroMass(f64),
    #[error("squared distance {0:e} is negative beyond rounding")]
    NegativeDistance(f64),
    #[error("free index {index} out of range for {len} atoms")]
    IndexOutOfRange { index: usize, len: usize },
}

/// A finite list of weighted Dirac atoms. Weights may have either sign.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignedPointMeasure {
    /// 0 while the measure is empty and no dimension has been fixed.
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl SignedPointMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Empty measure with a fixed dimension.
    pub fn with_dim(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn new<P: AsRef<[f64]>>(points: &[P], weights: &[f64]) -> Result<Self, MeasureError> {
        if points.len() != weights.len() {
            return Err(MeasureError::LengthMismatch {
                points: points.len(),
                weights: weights.len(),
            });
        }
        let mut m = Self::empty();
        for (p, &w) in points.iter().zip(weights) {
            m.push(p.as_ref(), w)?;
        }
        Ok(m)
    }

    /// `(1/K) sum_k delta_{x_k}`.
    pub fn uniform<P: AsRef<[f64]>>(points: &[P]) -> Result<Self, MeasureError> {
        if points.is_empty() {
            return Err(MeasureError::Empty);
        }
        let w = 1.0 / points.len() as f64;
        let mut m = Self::empty();
        m.reserve(points.len());
        for p in points {
            m.push(p.as_ref(), w)?;
        }
        Ok(m)
    }

    /// `c1 * m1 + c2 * m2`, keeping the atoms of `m1` first.
    pub fn combine(m1: &Self, m2: &Self, c1: f64, c2: f64) -> Result<Self, MeasureError> {
        let mut out = Self::with_dim(m1.dim.max(m2.dim));
        out.reserve(m1.len() + m2.len());
        out.extend_scaled(m1, c1)?;
        out.extend_scaled(m2, c2)?;
        Ok(out)
    }

    pub(crate) fn reserve(&mut self, atoms: usize) {
        self.weights.reserve(atoms);
        self.coords.reserve(atoms * self.dim.max(1));
    }

    /// Appends every atom of `other` with its weight multiplied by `scale`.
    pub fn extend_scaled(&mut self, other: &Self, scale: f64) -> Result<(), MeasureError> {
        for i in 0..other.len() {
            self.push(other.point(i), scale * other.weights[i])?;
        }
        Ok(())
    }

    pub fn push(&mut self, point: &[f64], weight: f64) -> Result<(), MeasureError> {
        if point.is_empty() {
            return Err(MeasureError::ZeroDimension);
        }
        if self.dim == 0 {
            self.dim = point.len();
        } else if point.len() != self.dim {
            return Err(MeasureError::DimensionMismatch {
                expected: self.dim,
                found: point.len(),
                index: self.len(),
            });
        }
        self.coords.extend_from_slice(point);
        self.weights.push(weight);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Point dimension, or 0 for an empty measure without a fixed dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn point_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn check_mass(&self) -> Result<(), MeasureError> {
        let mass = self.total_mass();
        if mass.abs() > MASS_TOLERANCE || !mass.is_finite() {
            return Err(MeasureError::NonZeroMass(mass));
        }
        Ok(())
    }

    /// `-sum_{k,l} p_k p_l h(|z_k - z_l|)` without mass check or clamping.
    pub(crate) fn raw_distance_squared(&self, kernel: &Kernel) -> f64 {
        let n = self.len();
        let mut acc = 0.0;
        for i in 0..n {
            let zi = self.point(i);
            let wi = self.weights[i];
            let mut row = 0.0;
            for j in (i + 1)..n {
                row += self.weights[j] * kernel.h_unchecked(dist(zi, self.point(j)));
            }
            acc += wi * row;
        }
        -2.0 * acc
    }

    /// Atoms sorted lexicographically (coordinates, then weight) with coincident
    /// atoms merged and zero weights dropped.
    pub fn canonical(&self) -> Self {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&i, &j| {
            let (a, b) = (self.point(i), self.point(j));
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(self.weights[i].total_cmp(&self.weights[j]))
        });
        let mut out = Self::with_dim(self.dim);
        out.reserve(self.len());
        for i in order {
            let p = self.point(i);
            let w = self.weights[i];
            let n = out.len();
            if n > 0 && out.point(n - 1) == p {
                out.weights[n - 1] += w;
            } else {
                out.coords.extend_from_slice(p);
                out.weights.push(w);
            }
        }
        // merged atoms may have cancelled out
        let keep: Vec<usize> = (0..out.len()).filter(|&i| out.weights[i] != 0.0).collect();
        if keep.len() < out.len() {
            let mut kept = Self::with_dim(self.dim);
            for i in keep {
                kept.coords.extend_from_slice(out.point(i));
                kept.weights.push(out.weights[i]);
            }
            out = kept;
        }
        out
    }

    /// Squared kernel distance encoded by this difference measure.
    ///
    /// The measure must have zero total mass (within [`MASS_TOLERANCE`]); only then
    /// is the double sum guaranteed nonnegative. Negative rounding residue down to
    /// `-NEGATIVE_CLAMP` is reported as 0.
    pub fn distance_squared(&self, kernel: &Kernel) -> Result<f64, MeasureError> {
        self.check_mass()?;
        clamp(self.canonical().raw_distance_squared(kernel))
    }

    /// Gradient of [`distance_squared`](Self::distance_squared) with respect to
    /// the atoms listed in `free`, in the order given.
    pub fn distance_squared_gradient(
        &self,
        free: &[usize],
        kernel: &Kernel,
    ) -> Result<Vec<Vec<f64>>, MeasureError> {
        self.check_mass()?;
        let n = self.len();
        let mut out = Vec::with_capacity(free.len());
        for &k in free {
            if k >= n {
                return Err(MeasureError::IndexOutOfRange { index: k, len: n });
            }
            let zk = self.point(k);
            let mut g = vec![0.0; self.dim];
            for l in 0..n {
                if l == k {
                    continue;
                }
                let zl = self.point(l);
                let c = self.weights[l] * kernel.h_prime_over_r_unchecked(dist(zk, zl));
                for (gd, (a, b)) in g.iter_mut().zip(zk.iter().zip(zl)) {
                    *gd += c * (a - b);
                }
            }
            let scale = -2.0 * self.weights[k];
            g.iter_mut().for_each(|v| *v *= scale);
            out.push(g);
        }
        Ok(out)
    }

    /// Value and gradient with respect to the leading `n_free` atoms, in one
    /// pass over the pairs. The gradient is written to `grad` as a flat
    /// `n_free * dim` buffer.
    pub(crate) fn value_and_leading_gradient(
        &self,
        n_free: usize,
        kernel: &Kernel,
        grad: &mut [f64],
    ) -> Result<f64, MeasureError> {
        self.check_mass()?;
        let n = self.len();
        let dim = self.dim;
        debug_assert!(n_free <= n);
        debug_assert_eq!(grad.len(), n_free * dim);
        grad.iter_mut().for_each(|g| *g = 0.0);

        let mut acc = 0.0;
        for i in 0..n {
            let zi = self.point(i);
            let wi = self.weights[i];
            let mut row = 0.0;
            for j in (i + 1)..n {
                let zj = self.point(j);
                let r = dist(zi, zj);
                row += self.weights[j] * kernel.h_unchecked(r);
                if i < n_free {
                    // j may also be free; the pair contributes to both.
                    let c = kernel.h_prime_over_r_unchecked(r);
                    let wj = self.weights[j];
                    let (gi, gj) = if j < n_free {
                        let (lo, hi) = grad.split_at_mut(j * dim);
                        (&mut lo[i * dim..(i + 1) * dim], Some(&mut hi[..dim]))
                    } else {
                        (&mut grad[i * dim..(i + 1) * dim], None)
                    };
                    match gj {
                        Some(gj) => {
                            for d in 0..dim {
                                let diff = zi[d] - zj[d];
                                gi[d] += wj * c * diff;
                                gj[d] -= wi * c * diff;
                            }
                        }
                        None => {
                            for d in 0..dim {
                                gi[d] += wj * c * (zi[d] - zj[d]);
                            }
                        }
                    }
                }
            }
            acc += wi * row;
        }
        for k in 0..n_free {
            let scale = -2.0 * self.weights[k];
            grad[k * dim..(k + 1) * dim]
                .iter_mut()
                .for_each(|g| *g *= scale);
        }
        clamp(-2.0 * acc)
    }
}

fn clamp(v: f64) -> Result<f64, MeasureError> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -NEGATIVE_CLAMP {
        Ok(0.0)
    } else {
        // also catches NaN
        Err(MeasureError::NegativeDistance(v))
    }
}
