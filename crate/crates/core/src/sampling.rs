//! Seeded random generation: hyperplane normals from Gaussians and Gaussian
//! mixtures, uniform directions, extension-level masking and intercepts.
//!
//! # Reproducibility
//!
//! All randomness flows through [`RngStream`], a ChaCha8 generator
//! (`rand_chacha`) seeded with `seed_from_u64(seed)` and switched to stream
//! `stream_id`. Uniform reals take the top 53 bits of a `u64`; standard normal
//! variates use the Marsaglia polar method with the second variate of each
//! accepted pair cached; bounded integers use rejection below the largest
//! multiple of the bound. None of these depend on platform floating-point
//! library behavior beyond `ln` and `sqrt`, so sequences are stable across
//! runs and machines.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_len, cholesky, CholeskyFactor, SymMatrix};

/// Tolerance on the sum of mixture weights.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// A single-owner deterministic random stream identified by `(seed, stream_id)`.
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound`.
    pub fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "empty range");
        let bound = bound as u64;
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return (x % bound) as usize;
            }
        }
    }

    /// Standard normal variate (Marsaglia polar method).
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * f);
                return u * f;
            }
        }
    }

    pub fn standard_normal_vec(&mut self, d: usize) -> Vec<f64> {
        (0..d).map(|_| self.standard_normal()).collect()
    }

    /// `count` distinct indices from `0..n`, uniformly without replacement
    /// (partial Fisher-Yates).
    pub fn choose_indices(&mut self, n: usize, count: usize) -> Vec<usize> {
        assert!(count <= n, "cannot choose {count} of {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..count {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool
    }
}

/// `N(0, A)` with its Cholesky factor cached.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    cov: SymMatrix,
    chol: CholeskyFactor,
}

impl GaussianSpec {
    pub fn new(cov: SymMatrix) -> Result<Self> {
        let chol = cholesky(&cov)?;
        Ok(Self { cov, chol })
    }

    /// The isotropic `N(0, I)` of standard EIF.
    pub fn isotropic(dim: usize) -> Self {
        Self::new(SymMatrix::identity(dim)).expect("identity is positive definite")
    }

    pub fn cov(&self) -> &SymMatrix {
        &self.cov
    }

    pub fn chol(&self) -> &CholeskyFactor {
        &self.chol
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    /// `L z` for a fresh standard normal vector `z`.
    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let z = rng.standard_normal_vec(self.dim());
        self.transform(&z)
    }

    /// `L z` for a caller-supplied `z`.
    pub fn transform(&self, z: &[f64]) -> Vec<f64> {
        self.chol.mul_vec(z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub gaussian: GaussianSpec,
}

/// `sum_i pi_i N(0, c A_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    components: Vec<MixtureComponent>,
    scale: f64,
}

impl MixtureSpec {
    pub fn new(components: Vec<(f64, SymMatrix)>, scale: f64) -> Result<Self> {
        let first = components.first().ok_or(Error::EmptyInput)?;
        let dim = first.1.dim();
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mixture scale must be positive, got {scale}"
            )));
        }
        let mut total = 0.0;
        let mut out = Vec::with_capacity(components.len());
        for (weight, cov) in components {
            if !(weight > 0.0 && weight <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "mixture weight {weight} outside (0, 1]"
                )));
            }
            check_len(dim, cov.dim())?;
            total += weight;
            out.push(MixtureComponent {
                weight,
                gaussian: GaussianSpec::new(cov)?,
            });
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            components: out,
            scale,
        })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mixture scale must be positive, got {scale}"
            )));
        }
        Ok(Self {
            components: self.components.clone(),
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.components[0].gaussian.dim()
    }

    /// Index of the component selected by a uniform draw.
    pub fn select_component(&self, rng: &mut RngStream) -> usize {
        let u = rng.uniform();
        let mut cumulative = 0.0;
        for (i, c) in self.components.iter().enumerate() {
            cumulative += c.weight;
            if u < cumulative {
                return i;
            }
        }
        self.components.len() - 1
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let i = self.select_component(rng);
        let root = self.scale.sqrt();
        let mut v = self.components[i].gaussian.sample(rng);
        v.iter_mut().for_each(|x| *x *= root);
        v
    }
}

/// Distribution of hyperplane normal vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum NormalDistribution {
    Gaussian(GaussianSpec),
    Mixture(MixtureSpec),
}

impl NormalDistribution {
    pub fn isotropic(dim: usize) -> Self {
        Self::Gaussian(GaussianSpec::isotropic(dim))
    }

    /// `N(0, cov)`
    pub fn gaussian(cov: SymMatrix) -> Result<Self> {
        Ok(Self::Gaussian(GaussianSpec::new(cov)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian(g) => g.dim(),
            Self::Mixture(m) => m.dim(),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        match self {
            Self::Gaussian(g) => g.sample(rng),
            Self::Mixture(m) => m.sample(rng),
        }
    }

    /// True for `N(0, I)`, i.e. the forest is a standard extended isolation forest.
    pub fn is_isotropic(&self) -> bool {
        matches!(self, Self::Gaussian(g) if g.cov().is_identity())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Gaussian(_) => "gaussian",
            Self::Mixture(_) => "mixture",
        }
    }
}

/// Number of axes a split hyperplane may intersect, minus one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "ExtensionRepr", into = "ExtensionRepr")]
pub enum ExtensionLevel {
    #[default]
    Full,
    Level(usize),
}

impl ExtensionLevel {
    /// The concrete `k` for dimension `d`.
    pub fn resolve(self, d: usize) -> Result<usize> {
        match self {
            Self::Full => Ok(d - 1),
            Self::Level(k) if k < d => Ok(k),
            Self::Level(k) => Err(Error::InvalidParameter(format!(
                "extension level {k} must be below the dimension {d}"
            ))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExtensionRepr {
    Level(usize),
    Name(String),
}

impl TryFrom<ExtensionRepr> for ExtensionLevel {
    type Error = String;

    fn try_from(r: ExtensionRepr) -> std::result::Result<Self, String> {
        match r {
            ExtensionRepr::Level(k) => Ok(Self::Level(k)),
            ExtensionRepr::Name(s) if s == "full" => Ok(Self::Full),
            ExtensionRepr::Name(s) => Err(format!(
                "extension must be a non-negative integer or \"full\", got {s:?}"
            )),
        }
    }
}

impl From<ExtensionLevel> for ExtensionRepr {
    fn from(e: ExtensionLevel) -> Self {
        match e {
            ExtensionLevel::Full => Self::Name("full".into()),
            ExtensionLevel::Level(k) => Self::Level(k),
        }
    }
}

/// Uniform direction on the unit sphere in `R^d`.
pub fn sample_unit_sphere(d: usize, rng: &mut RngStream) -> Vec<f64> {
    assert!(d >= 1, "sphere of dimension zero");
    loop {
        let mut v = rng.standard_normal_vec(d);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm >= 1e-12 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
}

/// Zeroes `d - k - 1` distinct components of `omega`, chosen uniformly.
///
/// Fails with [`Error::DegenerateNormal`] when nothing nonzero survives.
pub fn apply_extension_mask(
    omega: &[f64],
    level: ExtensionLevel,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let d = omega.len();
    let k = level.resolve(d)?;
    let mut masked = omega.to_vec();
    let zeroed = d - k - 1;
    if zeroed > 0 {
        for j in rng.choose_indices(d, zeroed) {
            masked[j] = 0.0;
        }
    }
    if masked.iter().all(|&x| x == 0.0) {
        return Err(Error::DegenerateNormal);
    }
    Ok(masked)
}

/// A point drawn uniformly from the box `[lo, hi]`.
pub fn sample_intercept(lo: &[f64], hi: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
    check_len(lo.len(), hi.len())?;
    lo.iter()
        .zip(hi)
        .map(|(&a, &b)| {
            if a > b {
                Err(Error::InvalidParameter(format!(
                    "intercept range [{a}, {b}] is empty"
                )))
            } else if a == b {
                Ok(a)
            } else {
                Ok(a + rng.uniform() * (b - a))
            }
        })
        .collect()
}
