//! Serializable descriptions of normal-vector distributions and forest runs.
//!
//! A covariance can be written as row-major nested arrays, as `{ diag = [...] }`,
//! or as `{ identity = d }`:
//!
//! ```toml
//! trees = 500
//! subsample = 128
//! extension = "full"
//! seed = 7
//!
//! [distribution]
//! kind = "mixture"
//! scale = 2.0
//! components = [
//!   { weight = 0.5, cov = { diag = [1.0, 0.01] } },
//!   { weight = 0.5, cov = [[0.01, 0.0], [0.0, 1.0]] },
//! ]
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::ForestParams;
use crate::linalg::SymMatrix;
use crate::sampling::{ExtensionLevel, GaussianSpec, MixtureSpec, NormalDistribution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixConfig {
    Rows(Vec<Vec<f64>>),
    Diagonal { diag: Vec<f64> },
    Identity { identity: usize },
}

impl MatrixConfig {
    pub fn build(&self) -> Result<SymMatrix> {
        match self {
            Self::Rows(rows) => SymMatrix::from_rows(rows),
            Self::Diagonal { diag } => SymMatrix::from_diagonal(diag),
            Self::Identity { identity: 0 } => Err(Error::EmptyInput),
            Self::Identity { identity } => Ok(SymMatrix::identity(*identity)),
        }
    }
}

impl From<&SymMatrix> for MatrixConfig {
    fn from(m: &SymMatrix) -> Self {
        Self::Rows(m.to_rows())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub weight: f64,
    pub cov: MatrixConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DistributionConfig {
    Gaussian {
        cov: MatrixConfig,
    },
    Mixture {
        components: Vec<ComponentConfig>,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
}

fn unit_scale() -> f64 {
    1.0
}

impl DistributionConfig {
    pub fn build(&self) -> Result<NormalDistribution> {
        match self {
            Self::Gaussian { cov } => Ok(NormalDistribution::Gaussian(GaussianSpec::new(
                cov.build()?,
            )?)),
            Self::Mixture { components, scale } => {
                let parts = components
                    .iter()
                    .map(|c| Ok((c.weight, c.cov.build()?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(NormalDistribution::Mixture(MixtureSpec::new(parts, *scale)?))
            }
        }
    }
}

impl From<&NormalDistribution> for DistributionConfig {
    fn from(d: &NormalDistribution) -> Self {
        match d {
            NormalDistribution::Gaussian(g) => Self::Gaussian {
                cov: g.cov().into(),
            },
            NormalDistribution::Mixture(m) => Self::Mixture {
                components: m
                    .components()
                    .iter()
                    .map(|c| ComponentConfig {
                        weight: c.weight,
                        cov: c.gaussian.cov().into(),
                    })
                    .collect(),
                scale: m.scale(),
            },
        }
    }
}

impl Serialize for NormalDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DistributionConfig::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for NormalDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        DistributionConfig::deserialize(d)?
            .build()
            .map_err(serde::de::Error::custom)
    }
}

/// Everything needed to fit one forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub distribution: DistributionConfig,
    #[serde(default = "default_trees")]
    pub trees: usize,
    #[serde(default = "default_subsample")]
    pub subsample: usize,
    #[serde(default)]
    pub extension: ExtensionLevel,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub leaf_adjustment: bool,
    #[serde(default)]
    pub standardize: bool,
}

fn default_trees() -> usize {
    500
}

fn default_subsample() -> usize {
    128
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    pub fn new(distribution: DistributionConfig) -> Self {
        Self {
            distribution,
            trees: default_trees(),
            subsample: default_subsample(),
            extension: ExtensionLevel::Full,
            seed: 0,
            leaf_adjustment: true,
            standardize: false,
        }
    }

    pub fn params(&self) -> ForestParams {
        ForestParams {
            trees: self.trees,
            subsample: self.subsample,
            extension: self.extension,
            seed: self.seed,
            leaf_adjustment: self.leaf_adjustment,
        }
    }

    /// Checks every constraint that does not depend on the data and builds the
    /// distribution. When `dim` is given the distribution and extension level
    /// are checked against it too.
    pub fn validate(&self, dim: Option<usize>) -> Result<NormalDistribution> {
        let dist = self.distribution.build()?;
        if self.trees == 0 {
            return Err(Error::InvalidParameter("trees must be at least 1".into()));
        }
        if self.subsample < 2 {
            return Err(Error::InvalidParameter(
                "subsample must be at least 2".into(),
            ));
        }
        self.extension.resolve(dist.dim())?;
        if let Some(d) = dim {
            if dist.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: dist.dim(),
                });
            }
        }
        Ok(dist)
    }
}
