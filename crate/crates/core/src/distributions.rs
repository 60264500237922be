//! Target distributions and the seeded random stream used to sample them.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::io::{read_point_table, PointFileError};

/// Deterministic random stream.
///
/// ChaCha8 keyed by `seed_from_u64(seed)`; Gaussian variates come from the
/// ziggurat sampler of `rand_distr` (`StandardNormal`). Integer draws always use
/// 64-bit ranges so the stream does not depend on the platform's `usize`.
/// Both crates are pinned in `Cargo.lock`; changing either version may change
/// the streams.
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream number `stream` derived from `seed`.
    pub fn split(seed: u64, stream: u64) -> Self {
        Self::new(derive_seed(seed, stream))
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform integer in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n as u64) as usize
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

/// SplitMix64 finalizer applied to `seed + (stream + 1) * golden`, giving
/// well-separated child seeds for consecutive stream numbers.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Error)]
pub enum DistributionError {
    #[error("dimension must be >= 1")]
    ZeroDimension,
    #[error("grid needs rows >= 1 and cols >= 1, got {rows}x{cols}")]
    EmptyGrid { rows: usize, cols: usize },
    #[error("grid spacing must be finite and > 0, got {0}")]
    BadSpacing(f64),
    #[error("component sigma must be finite and > 0, got {0}")]
    BadSigma(f64),
    #[error("empirical distribution needs at least one point")]
    EmptyEmpirical,
    #[error("empirical point {index} has dimension {found}, expected {expected}")]
    RaggedEmpirical {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}: no data rows")]
    EmptyFile { path: PathBuf },
    #[error(transparent)]
    File(#[from] PointFileError),
    #[error("bad target spec {spec:?}: {reason}")]
    Spec { spec: String, reason: String },
}

/// Uniform mixture of isotropic 2D Gaussians centered on a lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMixture {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    pub sigma: f64,
}

impl Default for GridMixture {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 4,
            spacing: 1.0,
            sigma: 0.2,
        }
    }
}

impl GridMixture {
    pub fn new(rows: usize, cols: usize, spacing: f64, sigma: f64) -> Result<Self, DistributionError> {
        if rows == 0 || cols == 0 {
            return Err(DistributionError::EmptyGrid { rows, cols });
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(DistributionError::BadSpacing(spacing));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(DistributionError::BadSigma(sigma));
        }
        Ok(Self {
            rows,
            cols,
            spacing,
            sigma,
        })
    }

    /// Cell centers `(i*s, j*s)` shifted so their centroid is the origin,
    /// ordered row-major (`i` outer, `j` inner).
    pub fn centers(&self) -> Vec<Vec<f64>> {
        let ox = (self.rows - 1) as f64 * self.spacing / 2.0;
        let oy = (self.cols - 1) as f64 * self.spacing / 2.0;
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.push(vec![i as f64 * self.spacing - ox, j as f64 * self.spacing - oy]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetDistribution {
    StandardGaussian { dim: usize },
    GridMixture(GridMixture),
    Empirical(Vec<Vec<f64>>),
}

impl TargetDistribution {
    pub fn standard_gaussian(dim: usize) -> Result<Self, DistributionError> {
        if dim == 0 {
            return Err(DistributionError::ZeroDimension);
        }
        Ok(Self::StandardGaussian { dim })
    }

    pub fn grid(rows: usize, cols: usize, spacing: f64, sigma: f64) -> Result<Self, DistributionError> {
        GridMixture::new(rows, cols, spacing, sigma).map(Self::GridMixture)
    }

    pub fn empirical(points: Vec<Vec<f64>>) -> Result<Self, DistributionError> {
        let dim = points.first().ok_or(DistributionError::EmptyEmpirical)?.len();
        if dim == 0 {
            return Err(DistributionError::ZeroDimension);
        }
        if let Some((index, p)) = points.iter().enumerate().find(|(_, p)| p.len() != dim) {
            return Err(DistributionError::RaggedEmpirical {
                index,
                expected: dim,
                found: p.len(),
            });
        }
        Ok(Self::Empirical(points))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::StandardGaussian { dim } => *dim,
            Self::GridMixture(_) => 2,
            Self::Empirical(points) => points[0].len(),
        }
    }

    /// Grid centers when this is a grid mixture.
    pub fn grid_centers(&self) -> Option<Vec<Vec<f64>>> {
        match self {
            Self::GridMixture(g) => Some(g.centers()),
            _ => None,
        }
    }

    pub fn sample_one(&self, rng: &mut SeededRng) -> Vec<f64> {
        match self {
            Self::StandardGaussian { dim } => (0..*dim).map(|_| rng.standard_normal()).collect(),
            Self::GridMixture(g) => {
                let cell = rng.index(g.rows * g.cols);
                let (i, j) = (cell / g.cols, cell % g.cols);
                let cx = i as f64 * g.spacing - (g.rows - 1) as f64 * g.spacing / 2.0;
                let cy = j as f64 * g.spacing - (g.cols - 1) as f64 * g.spacing / 2.0;
                vec![
                    cx + g.sigma * rng.standard_normal(),
                    cy + g.sigma * rng.standard_normal(),
                ]
            }
            Self::Empirical(points) => points[rng.index(points.len())].clone(),
        }
    }

    /// `count` i.i.d. draws.
    pub fn sample(&self, count: usize, rng: &mut SeededRng) -> Vec<Vec<f64>> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }
}

/// Loads a point CSV as an empirical distribution.
pub fn load_empirical(path: &Path) -> Result<TargetDistribution, DistributionError> {
    let table = read_point_table(path)?;
    if table.points.is_empty() {
        return Err(DistributionError::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    TargetDistribution::empirical(table.points)
}

/// Textual target description:
/// `gaussian:dim=<N>`, `grid:rows=<r>,cols=<c>,spacing=<s>,sigma=<sigma>`, or
/// `csv:<path>`. Grid keys may be omitted and default to a 4x4 grid with
/// spacing 1 and sigma 0.2.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Gaussian { dim: usize },
    Grid(GridMixture),
    Csv(PathBuf),
}

impl TargetSpec {
    /// Builds the distribution, reading the CSV file for `csv:` specs.
    pub fn resolve(&self) -> Result<TargetDistribution, DistributionError> {
        match self {
            Self::Gaussian { dim } => TargetDistribution::standard_gaussian(*dim),
            Self::Grid(g) => Ok(TargetDistribution::GridMixture(*g)),
            Self::Csv(path) => load_empirical(path),
        }
    }
}

impl FromStr for TargetSpec {
    type Err = DistributionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: String| DistributionError::Spec {
            spec: s.to_string(),
            reason,
        };
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| bad("expected `<kind>:<params>`".into()))?;
        match kind.trim() {
            "csv" => {
                if rest.is_empty() {
                    return Err(bad("missing path".into()));
                }
                Ok(Self::Csv(PathBuf::from(rest)))
            }
            "gaussian" => {
                let mut dim = None;
                for (key, value) in key_values(rest).map_err(&bad)? {
                    match key {
                        "dim" => dim = Some(parse_num::<usize>(key, value).map_err(&bad)?),
                        other => return Err(bad(format!("unknown key `{other}`"))),
                    }
                }
                let dim = dim.ok_or_else(|| bad("missing `dim`".into()))?;
                if dim == 0 {
                    return Err(bad("dim must be >= 1".into()));
                }
                Ok(Self::Gaussian { dim })
            }
            "grid" => {
                let mut g = GridMixture::default();
                for (key, value) in key_values(rest).map_err(&bad)? {
                    match key {
                        "rows" => g.rows = parse_num(key, value).map_err(&bad)?,
                        "cols" => g.cols = parse_num(key, value).map_err(&bad)?,
                        "spacing" => g.spacing = parse_num(key, value).map_err(&bad)?,
                        "sigma" => g.sigma = parse_num(key, value).map_err(&bad)?,
                        other => return Err(bad(format!("unknown key `{other}`"))),
                    }
                }
                let g = GridMixture::new(g.rows, g.cols, g.spacing, g.sigma)
                    .map_err(|e| bad(e.to_string()))?;
                Ok(Self::Grid(g))
            }
            other => Err(bad(format!("unknown kind `{other}` (gaussian, grid, csv)"))),
        }
    }
}

fn key_values(s: &str) -> Result<Vec<(&str, &str)>, String> {
    s.split(',')
        .filter(|kv| !kv.trim().is_empty())
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| format!("expected `key=value`, got `{kv}`"))
        })
        .collect()
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse `{value}` for `{key}`"))
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaussian { dim } => write!(f, "gaussian:dim={dim}"),
            Self::Grid(g) => write!(
                f,
                "grid:rows={},cols={},spacing={},sigma={}",
                g.rows, g.cols, g.spacing, g.sigma
            ),
            Self::Csv(path) => write!(f, "csv:{}", path.display()),
        }
    }
}
