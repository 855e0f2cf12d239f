//! Joint distributions of multivariate Bernoulli vectors.
//!
//! A [`JointPmf`] is a dense table of `2^d` probabilities indexed by
//! configuration mask (bit `i - 1` holds `x_i`). Constructors cover explicit
//! tables, independent products, empirical frequencies, a one-factor Gaussian
//! threshold model and the FGM-copula threshold model in dimension two.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::{normal_cdf, GaussHermite};
use crate::sample::SampleSet;
use crate::subset::Subset;

/// Largest dimension for which dense `2^d` tables are materialized.
pub const DENSE_MAX_DIM: usize = 24;

/// Default number of Gauss–Hermite nodes for [`JointPmf::gaussian_equicorrelated`].
pub const DEFAULT_QUADRATURE_NODES: usize = 64;

/// Classification of the support of a joint distribution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum SupportClass {
    /// Every configuration has positive probability.
    Full,
    /// `zero_cells` configurations are impossible, but fewer than `2^{d-1}`,
    /// no marginal is degenerate and no coordinate determines another.
    Degenerate { zero_cells: usize },
    /// Too many zero cells, a degenerate marginal, or a functional relation
    /// between two coordinates.
    Collapsed { zero_cells: usize, reason: String },
}

impl SupportClass {
    pub fn is_full(&self) -> bool {
        matches!(self, SupportClass::Full)
    }

    pub fn zero_cells(&self) -> usize {
        match self {
            SupportClass::Full => 0,
            SupportClass::Degenerate { zero_cells }
            | SupportClass::Collapsed { zero_cells, .. } => *zero_cells,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointPmf {
    d: usize,
    probs: Vec<f64>,
    support: SupportClass,
    smoothing: f64,
}

/// Distribution of the sub-vector `x_A`, indexed by packed pattern
/// (see [`Subset::compress`]).
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalTable {
    pub subset: Subset,
    pub probs: Vec<f64>,
}

impl MarginalTable {
    /// `P_A(x_A)` for a full configuration mask `x`.
    pub fn prob_of(&self, x: usize) -> f64 {
        self.probs[self.subset.compress(x)]
    }

    /// Reinterprets the table as a joint distribution over `|A|` inputs.
    pub fn to_pmf(&self) -> Result<JointPmf> {
        JointPmf::from_table(self.probs.clone())
    }
}

/// On-disk pmf format.
#[derive(Debug, Serialize, Deserialize)]
struct PmfFile {
    d: usize,
    probs: Vec<f64>,
    #[serde(default = "mask_ascending")]
    order: String,
}

fn mask_ascending() -> String {
    "mask-ascending".to_string()
}

impl JointPmf {
    /// Validates and normalizes an explicit probability table.
    pub fn from_table(probs: Vec<f64>) -> Result<Self> {
        let len = probs.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        let d = len.trailing_zeros() as usize;
        if d > DENSE_MAX_DIM {
            return Err(Error::DimensionTooLarge {
                d,
                limit: DENSE_MAX_DIM,
            });
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::NegativeProbability { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::NotNormalized { sum });
        }
        let probs: Vec<f64> = probs.into_iter().map(|p| p / sum).collect();
        let support = classify_support(d, &probs);
        Ok(JointPmf {
            d,
            probs,
            support,
            smoothing: 0.0,
        })
    }

    /// Independent inputs with `P(X_i = 1) = q[i]`.
    pub fn product_of_marginals(q: &[f64]) -> Result<Self> {
        let d = q.len();
        if d == 0 || d > DENSE_MAX_DIM {
            return Err(Error::InvalidDimension(d));
        }
        for (i, &qi) in q.iter().enumerate() {
            if !(qi > 0.0 && qi < 1.0) {
                return Err(Error::DegenerateMarginal {
                    index: i + 1,
                    q: qi,
                });
            }
        }
        let probs = (0..1usize << d)
            .map(|x| {
                q.iter()
                    .enumerate()
                    .map(|(i, &qi)| if (x >> i) & 1 == 1 { qi } else { 1.0 - qi })
                    .product()
            })
            .collect();
        Self::from_table(probs)
    }

    /// Frequencies of the sample rows, with optional additive smoothing `alpha`
    /// per cell.
    pub fn empirical(samples: &SampleSet, smoothing: Option<f64>) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::InsufficientSamples { n, required: 1 });
        }
        let d = samples.dim();
        if d > DENSE_MAX_DIM {
            return Err(Error::DimensionTooLarge {
                d,
                limit: DENSE_MAX_DIM,
            });
        }
        let alpha = smoothing.unwrap_or(0.0);
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::Parse(format!(
                "smoothing {alpha} must be non-negative"
            )));
        }
        let cells = 1usize << d;
        let mut counts = vec![0u64; cells];
        for &x in samples.rows() {
            counts[x] += 1;
        }
        let denom = n as f64 + alpha * cells as f64;
        let probs = counts.iter().map(|&c| (c as f64 + alpha) / denom).collect();
        let mut pmf = Self::from_table(probs)?;
        pmf.smoothing = alpha;
        Ok(pmf)
    }

    /// Thresholded equicorrelated Gaussian: `X_i = 1{Z_i ≤ 0}` with
    /// `Corr(Z_i, Z_j) = rho`. Uses the one-factor representation
    /// `Z_i = √ρ W + √(1-ρ) ε_i` and integrates over `W` with an `nodes`-point
    /// Gauss–Hermite rule.
    pub fn gaussian_equicorrelated(d: usize, rho: f64, nodes: usize) -> Result<Self> {
        if d == 0 || d > DENSE_MAX_DIM {
            return Err(Error::InvalidDimension(d));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidCorrelation(rho));
        }
        if nodes == 0 {
            return Err(Error::Parse("quadrature needs at least one node".into()));
        }
        let gh = GaussHermite::new(nodes);
        let scale = (rho / (1.0 - rho)).sqrt();
        // P(x) depends on x only through its number of ones.
        let by_count: Vec<f64> = (0..=d)
            .map(|k| {
                gh.expect(|w| {
                    let p = normal_cdf(-scale * w);
                    p.powi(k as i32) * (1.0 - p).powi((d - k) as i32)
                })
            })
            .collect();
        let probs = (0..1usize << d)
            .map(|x| by_count[x.count_ones() as usize])
            .collect();
        Self::from_table(probs)
    }

    /// Two inputs obtained by thresholding an FGM copula at 1/2, parameterized
    /// by `rho = P(X_1 = 1, X_2 = 1)`; the copula parameter is `16 rho - 4`.
    pub fn fgm_threshold(rho: f64) -> Result<Self> {
        let theta = 16.0 * rho - 4.0;
        if !(-1.0..=1.0).contains(&theta) {
            return Err(Error::OutOfFgmRange(rho));
        }
        Self::from_table(vec![rho, 0.5 - rho, 0.5 - rho, rho])
    }

    /// Two inputs with marginals `q1`, `q2` and `P(X_1 = 1, X_2 = 1) = p11`.
    pub fn bivariate(q1: f64, q2: f64, p11: f64) -> Result<Self> {
        // Mask order: 00, 10, 01, 11 (bit 0 is x_1).
        let cells = vec![1.0 - q1 - q2 + p11, q1 - p11, q2 - p11, p11];
        Self::from_table(
            cells
                .into_iter()
                .map(|p| if p.abs() < 1e-15 { 0.0 } else { p })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, x: usize) -> f64 {
        self.probs[x]
    }

    pub fn support(&self) -> &SupportClass {
        &self.support
    }

    pub fn is_full_support(&self) -> bool {
        self.support.is_full()
    }

    /// Additive smoothing used to build an empirical pmf (0 otherwise).
    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    /// Configurations with positive probability, ascending.
    pub fn support_configs(&self) -> Vec<usize> {
        (0..self.probs.len())
            .filter(|&x| self.probs[x] > 0.0)
            .collect()
    }

    /// `P(X_i = 1)` for 1-based `i`.
    pub fn marginal_one(&self, i: usize) -> f64 {
        let bit = 1usize << (i - 1);
        self.probs
            .iter()
            .enumerate()
            .filter(|(x, _)| x & bit != 0)
            .map(|(_, p)| p)
            .sum()
    }

    /// Distribution of `x_A` by exact summation.
    pub fn marginal(&self, a: Subset) -> MarginalTable {
        let mut probs = vec![0.0; 1usize << a.len()];
        for (x, &p) in self.probs.iter().enumerate() {
            probs[a.compress(x)] += p;
        }
        MarginalTable { subset: a, probs }
    }

    /// Draws `n` i.i.d. configurations by inverse-CDF lookup with a seeded
    /// ChaCha generator.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleSet> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    /// As [`JointPmf::sample`] with a caller-owned generator.
    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<SampleSet> {
        if n == 0 {
            return Err(Error::InsufficientSamples { n, required: 1 });
        }
        let cdf = self.cdf();
        let last = self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        let rows = (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                cdf.partition_point(|&c| c <= u).min(last)
            })
            .collect();
        SampleSet::new(self.d, rows)
    }

    fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect()
    }

    /// Total variation distance to another pmf of the same dimension.
    pub fn total_variation(&self, other: &JointPmf) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PmfFile {
            d: self.d,
            probs: self.probs.clone(),
            order: mask_ascending(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: PmfFile = serde_json::from_str(s)?;
        if file.order != "mask-ascending" {
            return Err(Error::Parse(format!(
                "unsupported cell order {:?}",
                file.order
            )));
        }
        if file.probs.len() != 1usize << file.d.min(DENSE_MAX_DIM + 1) {
            return Err(Error::Parse(format!(
                "d = {} requires {} cells, found {}",
                file.d,
                1usize << file.d.min(DENSE_MAX_DIM + 1),
                file.probs.len()
            )));
        }
        Self::from_table(file.probs)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn classify_support(d: usize, probs: &[f64]) -> SupportClass {
    let zero_cells = probs.iter().filter(|&&p| p == 0.0).count();
    if zero_cells == 0 {
        return SupportClass::Full;
    }
    let collapsed = |reason: String| SupportClass::Collapsed { zero_cells, reason };
    if zero_cells >= 1usize << (d - 1) {
        return collapsed(format!("{zero_cells} zero cells, at least 2^(d-1)"));
    }
    // Positivity of pair cells is decided exactly: a pattern is possible iff some
    // configuration carrying it has positive mass.
    let mut pair_possible = vec![[false; 4]; d * d];
    let mut one_possible = vec![[false; 2]; d];
    for (x, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for i in 0..d {
            let xi = (x >> i) & 1;
            one_possible[i][xi] = true;
            for j in (i + 1)..d {
                let xj = (x >> j) & 1;
                pair_possible[i * d + j][xi * 2 + xj] = true;
            }
        }
    }
    for (i, seen) in one_possible.iter().enumerate() {
        if !(seen[0] && seen[1]) {
            return collapsed(format!("marginal of X_{} is degenerate", i + 1));
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let cell = &pair_possible[i * d + j];
            let j_given_i = (0..2).all(|a| (cell[a * 2] as u8 + cell[a * 2 + 1] as u8) <= 1);
            let i_given_j = (0..2).all(|b| (cell[b] as u8 + cell[2 + b] as u8) <= 1);
            if j_given_i || i_given_j {
                return collapsed(format!(
                    "X_{} and X_{} are functionally dependent",
                    i + 1,
                    j + 1
                ));
            }
        }
    }
    SupportClass::Degenerate { zero_cells }
}
