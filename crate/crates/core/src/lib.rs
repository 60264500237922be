//! History-aware compression of probability distributions into a few Dirac
//! points under the energy distance, and an incremental sampler built on it
//! whose successive outputs avoid the points it has already produced.

pub mod cli;
pub mod diagnostics;
pub mod distributions;
pub mod hawc;
pub mod io;
pub mod kernel;
pub mod measure;
pub mod optim;

pub use diagnostics::{
    allocation_counts, finite_difference_gradient, mc_energy_distance_sq, min_pairwise_distance,
    EnergyReference,
};
pub use distributions::{GridMixture, SeededRng, TargetDistribution, TargetSpec};
pub use hawc::{
    compress, hawc_loss, sample_next, sample_sequence, CompressionResult, HawcConfig, HawcError,
    HistoryLedger, Initialization,
};
pub use kernel::Kernel;
pub use measure::{MeasureError, SignedPointMeasure};
pub use optim::{Optimizer, StepSchedule};
