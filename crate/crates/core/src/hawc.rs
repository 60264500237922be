//! History-aware compression.
//!
//! Given a target `mu`, `K_p` previously emitted points `y_j` and `K` free points
//! `x_k`, the free points minimize the kernel distance between the uniform cloud
//! `(1/K) sum_k delta_{x_k}` and the signed target
//!
//! ```text
//! eta = ((K_p + K) mu - sum_j delta_{y_j}) / K
//! ```
//!
//! so that the pooled cloud `{x} u {y}` tracks `mu` as a whole. `mu` is replaced
//! by a fresh mini-batch of `B` draws on every iteration, which makes the
//! difference measure
//!
//! ```text
//! q = sum_k (1/K) delta_{x_k} - sum_b (K_p + K)/(K B) delta_{z_b} + sum_j (1/K) delta_{y_j}
//! ```
//!
//! with zero total mass. For `K = 1` the target weights are exactly
//! `(K_p + 1)/B` on the batch and `-1` on the history; for larger `K` the whole
//! loss is that normalization divided by `K^2`, which has the same minimizers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{SeededRng, TargetDistribution};
use crate::kernel::{Kernel, DEFAULT_A};
use crate::measure::{MeasureError, SignedPointMeasure};
use crate::optim::{Optimizer, StepSchedule};

#[derive(Debug, Error, PartialEq)]
pub enum HawcError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{what} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("history index {found} at position {position}, expected {expected}")]
    LedgerIndex {
        position: usize,
        expected: u64,
        found: u64,
    },
    #[error("loss became non-finite at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// How the free points are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    /// `K` draws from the target.
    #[default]
    FromTarget,
    /// All free points at the origin.
    Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawcConfig {
    pub k: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub step_size: f64,
    pub optimizer: Optimizer,
    #[serde(default)]
    pub schedule: StepSchedule,
    pub kernel_a: f64,
    pub seed: u64,
    #[serde(default)]
    pub init: Initialization,
}

impl Default for HawcConfig {
    fn default() -> Self {
        Self {
            k: 1,
            batch_size: 256,
            iterations: 1000,
            step_size: 0.05,
            optimizer: Optimizer::default(),
            schedule: StepSchedule::default(),
            kernel_a: DEFAULT_A,
            seed: 0,
            init: Initialization::FromTarget,
        }
    }
}

impl HawcConfig {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), HawcError> {
        let fail = |m: &str| Err(HawcError::Config(m.to_string()));
        if self.k == 0 {
            return fail("k must be >= 1");
        }
        if self.batch_size == 0 {
            return fail("batch size must be >= 1");
        }
        if self.iterations == 0 {
            return fail("iterations must be >= 1");
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return fail("step size must be finite and > 0");
        }
        if !(self.kernel_a.is_finite() && self.kernel_a >= 0.0) {
            return fail("kernel parameter a must be finite and >= 0");
        }
        if let Optimizer::AdaptiveMoment { beta1, beta2, eps } = self.optimizer {
            let unit = |b: f64| (0.0..1.0).contains(&b);
            if !(unit(beta1) && unit(beta2) && eps.is_finite() && eps > 0.0) {
                return fail("adaptive-moment parameters need beta in [0, 1) and eps > 0");
            }
        }
        Ok(())
    }

    pub fn kernel(&self) -> Kernel {
        Kernel::new(self.kernel_a)
    }
}

/// Previously emitted points, in emission order. The point at position `i`
/// carries emission index `i + 1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HistoryLedger {
    points: Vec<Vec<f64>>,
}

impl HistoryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self, HawcError> {
        let mut ledger = Self::new();
        for p in points {
            ledger.push(p)?;
        }
        Ok(ledger)
    }

    /// Rebuilds a ledger from stored `(index, point)` rows; indices must read 1, 2, ... without gaps.
    pub fn from_indexed(indices: &[u64], points: Vec<Vec<f64>>) -> Result<Self, HawcError> {
        assert_eq!(indices.len(), points.len());
        for (position, &found) in indices.iter().enumerate() {
            let expected = position as u64 + 1;
            if found != expected {
                return Err(HawcError::LedgerIndex {
                    position,
                    expected,
                    found,
                });
            }
        }
        Self::from_points(points)
    }

    /// Appends a point and returns its emission index.
    pub fn push(&mut self, point: Vec<f64>) -> Result<u64, HawcError> {
        if point.is_empty() {
            return Err(MeasureError::ZeroDimension.into());
        }
        if let Some(dim) = self.dim() {
            if point.len() != dim {
                return Err(HawcError::DimensionMismatch {
                    what: "history point",
                    expected: dim,
                    found: point.len(),
                });
            }
        }
        self.points.push(point);
        Ok(self.points.len() as u64)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Vec::len)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn indices(&self) -> Vec<u64> {
        (1..=self.points.len() as u64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionResult {
    pub points: Vec<Vec<f64>>,
    /// Loss of the final points against one extra fresh batch.
    pub final_loss: f64,
    /// Loss at each iteration, evaluated before that iteration's update.
    pub loss_trace: Vec<f64>,
}

fn check_dims(what: &'static str, pts: &[Vec<f64>], dim: usize) -> Result<(), HawcError> {
    match pts.iter().find(|p| p.len() != dim) {
        Some(p) => Err(HawcError::DimensionMismatch {
            what,
            expected: dim,
            found: p.len(),
        }),
        None => Ok(()),
    }
}

/// The difference measure `delta_X - eta` with the free points first.
pub fn difference_measure(
    x: &[Vec<f64>],
    history: &HistoryLedger,
    batch: &[Vec<f64>],
) -> Result<SignedPointMeasure, HawcError> {
    let k = x.len();
    let b = batch.len();
    if k == 0 || b == 0 {
        return Err(HawcError::Config("need at least one free point and one batch point".into()));
    }
    let dim = x[0].len();
    check_dims("free point", x, dim)?;
    check_dims("batch point", batch, dim)?;
    check_dims("history point", history.points(), dim)?;

    let kp = history.len();
    let w_free = 1.0 / k as f64;
    let w_batch = -((kp + k) as f64) / (k as f64 * b as f64);

    let mut q = SignedPointMeasure::with_dim(dim);
    q.reserve(k + b + kp);
    for p in x {
        q.push(p, w_free)?;
    }
    for p in batch {
        q.push(p, w_batch)?;
    }
    for p in history.points() {
        q.push(p, w_free)?;
    }
    Ok(q)
}

/// Squared distance between the free cloud `x` and the history-adjusted
/// target represented by `batch`.
pub fn hawc_loss(
    x: &[Vec<f64>],
    history: &HistoryLedger,
    batch: &[Vec<f64>],
    kernel: &Kernel,
) -> Result<f64, HawcError> {
    Ok(difference_measure(x, history, batch)?.distance_squared(kernel)?)
}

/// Loss and its gradient with respect to each free point.
pub fn hawc_loss_and_gradient(
    x: &[Vec<f64>],
    history: &HistoryLedger,
    batch: &[Vec<f64>],
    kernel: &Kernel,
) -> Result<(f64, Vec<Vec<f64>>), HawcError> {
    let q = difference_measure(x, history, batch)?;
    let dim = q.dim();
    let mut flat = vec![0.0; x.len() * dim];
    let loss = q.value_and_leading_gradient(x.len(), kernel, &mut flat)?;
    Ok((loss, flat.chunks(dim).map(<[f64]>::to_vec).collect()))
}

/// Runs the stochastic compression loop and returns the optimized free points.
pub fn compress(
    target: &TargetDistribution,
    history: &HistoryLedger,
    config: &HawcConfig,
) -> Result<CompressionResult, HawcError> {
    config.validate()?;
    let dim = target.dim();
    if let Some(found) = history.dim() {
        if found != dim {
            return Err(HawcError::DimensionMismatch {
                what: "history",
                expected: dim,
                found,
            });
        }
    }
    let kernel = config.kernel();
    let mut rng = SeededRng::new(config.seed);
    let k = config.k;

    let x0 = match config.init {
        Initialization::FromTarget => target.sample(k, &mut rng),
        Initialization::Origin => vec![vec![0.0; dim]; k],
    };
    let mut params: Vec<f64> = x0.into_iter().flatten().collect();
    let mut grad = vec![0.0; params.len()];
    let mut opt = config.optimizer.state(params.len());
    let mut loss_trace = Vec::with_capacity(config.iterations);

    // The measure is rebuilt in place: free atoms first, then batch, then history.
    let mut q = measure_template(k, history, config.batch_size, dim)?;
    let history_offset = k + config.batch_size;
    debug_assert_eq!(q.len(), history_offset + history.len());

    for iteration in 0..config.iterations {
        load_free(&mut q, &params, k);
        for b in 0..config.batch_size {
            let z = target.sample_one(&mut rng);
            q.point_mut(k + b).copy_from_slice(&z);
        }
        let loss = q
            .value_and_leading_gradient(k, &kernel, &mut grad)
            .map_err(|e| match e {
                MeasureError::NegativeDistance(_) => HawcError::NonFinite { iteration },
                other => other.into(),
            })?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(HawcError::NonFinite { iteration });
        }
        loss_trace.push(loss);
        let lr = config
            .schedule
            .step_size(config.step_size, iteration, config.iterations);
        opt.step(&mut params, &grad, lr);
    }

    let points: Vec<Vec<f64>> = params.chunks(dim).map(<[f64]>::to_vec).collect();
    let batch = target.sample(config.batch_size, &mut rng);
    let final_loss = hawc_loss(&points, history, &batch, &kernel)?;
    if !final_loss.is_finite() || points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(HawcError::NonFinite {
            iteration: config.iterations,
        });
    }
    Ok(CompressionResult {
        points,
        final_loss,
        loss_trace,
    })
}

fn measure_template(
    k: usize,
    history: &HistoryLedger,
    batch_size: usize,
    dim: usize,
) -> Result<SignedPointMeasure, HawcError> {
    let zeros = vec![0.0; dim];
    let x = vec![zeros.clone(); k];
    let batch = vec![zeros; batch_size];
    difference_measure(&x, history, &batch)
}

fn load_free(q: &mut SignedPointMeasure, params: &[f64], k: usize) {
    let dim = q.dim();
    for i in 0..k {
        q.point_mut(i).copy_from_slice(&params[i * dim..(i + 1) * dim]);
    }
}

/// One step of the incremental sampler: a single-point compression against the
/// current history. The history is not modified; the caller records the point.
pub fn sample_next(
    target: &TargetDistribution,
    history: &HistoryLedger,
    config: &HawcConfig,
) -> Result<Vec<f64>, HawcError> {
    if config.k != 1 {
        return Err(HawcError::Config(format!(
            "incremental sampling emits one point per step, got k = {}",
            config.k
        )));
    }
    let mut result = compress(target, history, config)?;
    Ok(result.points.pop().expect("k = 1"))
}

/// Runs `count` incremental steps starting from `history`, appending each
/// emitted point. Step `j` (emission index `n`) uses the seed
/// `derive_seed(config.seed, n)`.
pub fn sample_sequence(
    target: &TargetDistribution,
    history: &mut HistoryLedger,
    config: &HawcConfig,
    count: usize,
) -> Result<Vec<Vec<f64>>, HawcError> {
    let mut emitted = Vec::with_capacity(count);
    for _ in 0..count {
        let step = step_config(config, history.len() as u64 + 1);
        let p = sample_next(target, history, &step)?;
        history.push(p.clone())?;
        emitted.push(p);
    }
    Ok(emitted)
}

/// Configuration for emitting the point with the given 1-based index.
pub fn step_config(config: &HawcConfig, emission_index: u64) -> HawcConfig {
    HawcConfig {
        k: 1,
        seed: crate::distributions::derive_seed(config.seed, emission_index),
        ..config.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn loss_zero_when_free_point_is_the_batch() {
        let x = vec![vec![0.3, -0.2]];
        let loss = hawc_loss(&x, &HistoryLedger::new(), &x, &Kernel::default()).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn loss_two_diracs() {
        let loss = hawc_loss(&[vec![0.0]], &HistoryLedger::new(), &[vec![1.0]], &Kernel::new(0.0)).unwrap();
        assert_eq!(loss, 2.0);
    }

    #[test]
    fn difference_measure_has_zero_mass() {
        for (k, b, kp) in [(1, 1, 0), (3, 7, 5), (48, 256, 0), (1, 256, 9), (7, 3, 11)] {
            let x = vec![vec![0.0]; k];
            let batch = vec![vec![1.0]; b];
            let hist = HistoryLedger::from_points(vec![vec![2.0]; kp]).unwrap();
            let q = difference_measure(&x, &hist, &batch).unwrap();
            assert!(q.total_mass().abs() < 1e-13, "({k},{b},{kp}) {}", q.total_mass());
        }
    }

    #[test]
    fn k_one_weights_match_literal_normalization() {
        let hist = HistoryLedger::from_points(vec![vec![0.0], vec![1.0]]).unwrap();
        let batch = vec![vec![0.5]; 4];
        let q = difference_measure(&[vec![2.0]], &hist, &batch).unwrap();
        // delta_x - ((K_p+1)/B sum delta_z - sum delta_y)
        assert_eq!(q.weights(), &[1.0, -0.75, -0.75, -0.75, -0.75, 1.0, 1.0]);
    }

    #[test]
    fn larger_k_is_a_rescaling() {
        let kernel = Kernel::default();
        let x = vec![vec![0.1, 0.0], vec![-0.5, 0.7], vec![1.0, 1.0]];
        let hist = HistoryLedger::from_points(vec![vec![0.0, 0.0], vec![0.4, -0.3]]).unwrap();
        let batch: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.1, -(i as f64) * 0.05]).collect();
        let loss = hawc_loss(&x, &hist, &batch, &kernel).unwrap();

        // literal form with unit weights on x and history, (K_p+K)/B on the batch
        let mut q = SignedPointMeasure::empty();
        for p in &x {
            q.push(p, 1.0).unwrap();
        }
        for p in &batch {
            q.push(p, -5.0 / 10.0).unwrap();
        }
        for p in hist.points() {
            q.push(p, 1.0).unwrap();
        }
        let literal = q.distance_squared(&kernel).unwrap();
        assert_relative_eq!(loss * 9.0, literal, max_relative = 1e-12);
    }

    #[test]
    fn gradient_matches_separate_route() {
        let kernel = Kernel::default();
        let x = vec![vec![0.1, 0.0], vec![-0.5, 0.7]];
        let hist = HistoryLedger::from_points(vec![vec![0.0, 0.0]]).unwrap();
        let batch: Vec<Vec<f64>> = (0..6).map(|i| vec![(i as f64).sin(), (i as f64).cos()]).collect();
        let (loss, grad) = hawc_loss_and_gradient(&x, &hist, &batch, &kernel).unwrap();
        let q = difference_measure(&x, &hist, &batch).unwrap();
        assert_relative_eq!(loss, q.distance_squared(&kernel).unwrap(), max_relative = 1e-14);
        let g2 = q.distance_squared_gradient(&[0, 1], &kernel).unwrap();
        for (a, b) in grad.iter().flatten().zip(g2.iter().flatten()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-12);
        }
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let kernel = Kernel::default();
        let hist = HistoryLedger::from_points(vec![vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            hawc_loss(&[vec![0.0]], &hist, &[vec![1.0]], &kernel),
            Err(HawcError::DimensionMismatch { what: "history point", .. })
        ));
        assert!(matches!(
            hawc_loss(&[vec![0.0]], &HistoryLedger::new(), &[vec![1.0, 2.0]], &kernel),
            Err(HawcError::DimensionMismatch { what: "batch point", .. })
        ));
        let target = TargetDistribution::standard_gaussian(1).unwrap();
        assert!(matches!(
            compress(&target, &hist, &HawcConfig::with_k(1)),
            Err(HawcError::DimensionMismatch { what: "history", .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(HawcConfig::default().validate().is_ok());
        for bad in [
            HawcConfig { k: 0, ..Default::default() },
            HawcConfig { batch_size: 0, ..Default::default() },
            HawcConfig { iterations: 0, ..Default::default() },
            HawcConfig { step_size: 0.0, ..Default::default() },
            HawcConfig { step_size: f64::NAN, ..Default::default() },
            HawcConfig { kernel_a: -1.0, ..Default::default() },
            HawcConfig {
                optimizer: Optimizer::AdaptiveMoment { beta1: 1.0, beta2: 0.999, eps: 1e-8 },
                ..Default::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(HawcError::Config(_))), "{bad:?}");
        }
    }

    #[test]
    fn ledger_indices() {
        let mut l = HistoryLedger::new();
        assert_eq!(l.push(vec![1.0, 2.0]).unwrap(), 1);
        assert_eq!(l.push(vec![3.0, 4.0]).unwrap(), 2);
        assert!(l.push(vec![1.0]).is_err());
        assert_eq!(l.indices(), vec![1, 2]);

        assert!(HistoryLedger::from_indexed(&[1, 2], vec![vec![0.0], vec![1.0]]).is_ok());
        assert!(matches!(
            HistoryLedger::from_indexed(&[1, 3], vec![vec![0.0], vec![1.0]]),
            Err(HawcError::LedgerIndex { position: 1, expected: 2, found: 3 })
        ));
        assert!(HistoryLedger::from_indexed(&[2], vec![vec![0.0]]).is_err());
    }

    #[test]
    fn sample_next_requires_single_point() {
        let target = TargetDistribution::standard_gaussian(2).unwrap();
        let err = sample_next(&target, &HistoryLedger::new(), &HawcConfig::with_k(2)).unwrap_err();
        assert!(matches!(err, HawcError::Config(_)));
    }

    #[test]
    fn compress_shapes_and_determinism() {
        let target = TargetDistribution::standard_gaussian(3).unwrap();
        let config = HawcConfig {
            k: 4,
            batch_size: 32,
            iterations: 20,
            seed: 5,
            ..Default::default()
        };
        let a = compress(&target, &HistoryLedger::new(), &config).unwrap();
        assert_eq!(a.points.len(), 4);
        assert!(a.points.iter().all(|p| p.len() == 3));
        assert_eq!(a.loss_trace.len(), 20);
        let b = compress(&target, &HistoryLedger::new(), &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn origin_initialization() {
        let target = TargetDistribution::standard_gaussian(1).unwrap();
        let config = HawcConfig {
            iterations: 1,
            step_size: 1e-3,
            init: Initialization::Origin,
            ..Default::default()
        };
        let r = compress(&target, &HistoryLedger::new(), &config).unwrap();
        assert!(r.points[0][0].abs() <= 1e-3 + 1e-12);
    }

    #[test]
    fn sequence_appends_to_history() {
        let target = TargetDistribution::standard_gaussian(2).unwrap();
        let config = HawcConfig {
            iterations: 50,
            batch_size: 32,
            seed: 1,
            ..Default::default()
        };
        let mut hist = HistoryLedger::new();
        let pts = sample_sequence(&target, &mut hist, &config, 3).unwrap();
        assert_eq!(hist.points(), &pts[..]);
        // continuing a prefix gives the same tail as one long run
        let mut prefix = HistoryLedger::from_points(pts[..1].to_vec()).unwrap();
        let tail = sample_sequence(&target, &mut prefix, &config, 2).unwrap();
        assert_eq!(tail, pts[1..].to_vec());
    }
}
