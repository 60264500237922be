//! Quality measures for point clouds: Monte-Carlo energy distance to a target,
//! cluster allocation, spacing, and a finite-difference gradient oracle.

use thiserror::Error;

use crate::distributions::{SeededRng, TargetDistribution};
use crate::kernel::{dist, Kernel};
use crate::measure::{MeasureError, SignedPointMeasure};

/// Above this many distinct reference pairs the reference self-interaction is
/// estimated from a subset of pairs instead of the full double sum.
pub const EXACT_PAIR_LIMIT: usize = 1 << 24;

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
}

/// A fixed reference sample `S` of a target with its self-interaction
/// `(1/n^2) sum_{s,s'} h(|s - s'|)` precomputed, so that many clouds can be
/// scored against the same sample in `O(K n)` each.
///
/// When `S` has more than [`EXACT_PAIR_LIMIT`] distinct pairs, the
/// self-interaction is estimated from the pairs `(s_i, s_{(i+j) mod n})`,
/// `j = 1..=m`, with `m` chosen to stay within the pair budget. Every `s_i`
/// appears in the same number of pairs, which keeps the estimator's leading
/// fluctuation identical to the full double sum.
#[derive(Debug, Clone)]
pub struct EnergyReference {
    sample: Vec<Vec<f64>>,
    kernel: Kernel,
    self_term: f64,
    exact: bool,
}

impl EnergyReference {
    pub fn new(sample: Vec<Vec<f64>>, kernel: Kernel) -> Result<Self, DiagnosticsError> {
        let n = sample.len();
        if n < 2 {
            return Err(DiagnosticsError::TooFewPoints { needed: 2, got: n });
        }
        check_dim(&sample, sample[0].len())?;
        let pairs = n * (n - 1) / 2;
        let exact = pairs <= EXACT_PAIR_LIMIT;
        let mean_offdiag = if exact {
            let mut acc = 0.0;
            for i in 0..n {
                let mut row = 0.0;
                for j in (i + 1)..n {
                    row += kernel.h_unchecked(dist(&sample[i], &sample[j]));
                }
                acc += row;
            }
            acc / pairs as f64
        } else {
            let m = EXACT_PAIR_LIMIT.div_ceil(n).min(n / 2);
            let mut acc = 0.0;
            for i in 0..n {
                let mut row = 0.0;
                for j in 1..=m {
                    row += kernel.h_unchecked(dist(&sample[i], &sample[(i + j) % n]));
                }
                acc += row;
            }
            acc / (n * m) as f64
        };
        // V-statistic form: diagonal terms are zero.
        let self_term = mean_offdiag * (n - 1) as f64 / n as f64;
        Ok(Self {
            sample,
            kernel,
            self_term,
            exact,
        })
    }

    pub fn sample(&self) -> &[Vec<f64>] {
        &self.sample
    }

    /// Whether the self-interaction was computed from every pair.
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// Squared distance between the uniform cloud on `points` and the uniform
    /// measure on the reference sample. Negative estimates are reported as 0.
    pub fn distance_sq(&self, points: &[Vec<f64>]) -> Result<f64, DiagnosticsError> {
        let k = points.len();
        if k == 0 {
            return Err(DiagnosticsError::TooFewPoints { needed: 1, got: 0 });
        }
        check_dim(points, self.sample[0].len())?;
        let n = self.sample.len() as f64;

        let mut cross = 0.0;
        for x in points {
            let mut row = 0.0;
            for s in &self.sample {
                row += self.kernel.h_unchecked(dist(x, s));
            }
            cross += row;
        }
        cross /= k as f64 * n;

        let mut within = 0.0;
        for i in 0..k {
            for j in (i + 1)..k {
                within += self.kernel.h_unchecked(dist(&points[i], &points[j]));
            }
        }
        within *= 2.0 / (k * k) as f64;

        Ok((2.0 * cross - within - self.self_term).max(0.0))
    }
}

fn check_dim(points: &[Vec<f64>], dim: usize) -> Result<(), DiagnosticsError> {
    match points.iter().position(|p| p.len() != dim) {
        Some(index) => Err(DiagnosticsError::DimensionMismatch {
            index,
            expected: dim,
            found: points[index].len(),
        }),
        None => Ok(()),
    }
}

/// Monte-Carlo estimate of `d(delta_X, mu)^2` from `n_samples` target draws.
pub fn mc_energy_distance_sq(
    points: &[Vec<f64>],
    target: &TargetDistribution,
    n_samples: usize,
    kernel: &Kernel,
    rng: &mut SeededRng,
) -> Result<f64, DiagnosticsError> {
    let sample = target.sample(n_samples, rng);
    EnergyReference::new(sample, *kernel)?.distance_sq(points)
}

/// Number of points whose nearest center is each center (ties go to the lower
/// center index).
pub fn allocation_counts(points: &[Vec<f64>], centers: &[Vec<f64>]) -> Vec<usize> {
    let mut counts = vec![0; centers.len()];
    if centers.is_empty() {
        return counts;
    }
    for p in points {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in centers.iter().enumerate() {
            let d = dist(p, c);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        counts[best] += 1;
    }
    counts
}

pub fn min_pairwise_distance(points: &[Vec<f64>]) -> Result<f64, DiagnosticsError> {
    if points.len() < 2 {
        return Err(DiagnosticsError::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    let mut min = f64::INFINITY;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            min = min.min(dist(&points[i], &points[j]));
        }
    }
    Ok(min)
}

/// Central differences of the squared distance with respect to the atoms in
/// `free`, using the step `rel_step * (1 + |coordinate|)` per coordinate.
pub fn finite_difference_gradient(
    q: &SignedPointMeasure,
    free: &[usize],
    kernel: &Kernel,
    rel_step: f64,
) -> Result<Vec<Vec<f64>>, MeasureError> {
    // Validates mass and indices the same way the analytic route does.
    q.distance_squared_gradient(&[], kernel)?;
    if let Some(&index) = free.iter().find(|&&i| i >= q.len()) {
        return Err(MeasureError::IndexOutOfRange { index, len: q.len() });
    }
    let mut work = q.clone();
    let mut out = Vec::with_capacity(free.len());
    for &k in free {
        let mut g = vec![0.0; q.dim()];
        for (d, gd) in g.iter_mut().enumerate() {
            let x = q.point(k)[d];
            let step = rel_step * (1.0 + x.abs());
            work.point_mut(k)[d] = x + step;
            let plus = work.raw_distance_squared(kernel);
            work.point_mut(k)[d] = x - step;
            let minus = work.raw_distance_squared(kernel);
            work.point_mut(k)[d] = x;
            *gd = (plus - minus) / (2.0 * step);
        }
        out.push(g);
    }
    Ok(out)
}

/// Median of a slice (mean of the two middle values for even lengths).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
