//! Persisted models: a fitted forest with the configuration and feature
//! metadata needed to score new data.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use aif_core::{Dataset, Forest, RunConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::table::Table;

pub const MODEL_FORMAT: &str = "aif-model";
pub const MODEL_VERSION: u32 = 1;

/// Per-feature z-scoring `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    /// Sample mean and standard deviation per column; constant columns get
    /// scale 1.
    pub fn fit(data: &Dataset) -> Self {
        let n = data.len() as f64;
        let (mean, scale) = (0..data.dim())
            .map(|j| {
                let col = data.column(j);
                let m = col.iter().sum::<f64>() / n;
                let var = if data.len() > 1 {
                    col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                (m, if var > 0.0 { var.sqrt() } else { 1.0 })
            })
            .unzip();
        Self { mean, scale }
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.dim() != self.mean.len() {
            return Err(aif_core::Error::DimensionMismatch {
                expected: self.mean.len(),
                found: data.dim(),
            }
            .into());
        }
        let d = data.dim();
        let values = data
            .as_flat()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - self.mean[i % d]) / self.scale[i % d])
            .collect();
        Ok(Dataset::from_flat(d, values)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub config: RunConfig,
    pub features: Vec<String>,
    pub standardization: Option<Standardization>,
    pub forest: Forest,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

impl ModelFile {
    /// Validates `config` against the table and fits a forest on it.
    pub fn fit(config: &RunConfig, table: &Table) -> Result<Self> {
        let distribution = config.validate(Some(table.data.dim()))?;
        let standardization = config.standardize.then(|| Standardization::fit(&table.data));
        let forest = match &standardization {
            Some(s) => Forest::fit(&s.apply(&table.data)?, distribution, &config.params())?,
            None => Forest::fit(&table.data, distribution, &config.params())?,
        };
        Ok(Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            config: config.clone(),
            features: table.names.clone(),
            standardization,
            forest,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, self).map_err(|e| CliError::io(path, e.into()))?;
        w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let header: Header = serde_json::from_str(&text)
            .map_err(|e| CliError::input(path, format!("not a model file: {e}")))?;
        if header.format != MODEL_FORMAT {
            return Err(CliError::input(path, format!("unknown format {:?}", header.format)));
        }
        if header.version != MODEL_VERSION {
            return Err(CliError::input(
                path,
                format!("unsupported model version {} (expected {MODEL_VERSION})", header.version),
            ));
        }
        let model: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::input(path, format!("invalid model: {e}")))?;
        let dist = model
            .config
            .validate(Some(model.forest.dim()))
            .map_err(|e| CliError::input(path, format!("embedded config: {e}")))?;
        if &dist != model.forest.distribution() || model.features.len() != model.forest.dim() {
            return Err(CliError::input(path, "embedded config does not match the forest"));
        }
        if let Some(s) = &model.standardization {
            if s.mean.len() != model.forest.dim() || s.scale.len() != model.forest.dim() {
                return Err(CliError::input(path, "standardization has the wrong length"));
            }
        }
        Ok(model)
    }

    /// Data as seen by the forest.
    pub fn prepare(&self, data: &Dataset) -> Result<Dataset> {
        match &self.standardization {
            Some(s) => s.apply(data),
            None => Ok(data.clone()),
        }
    }

    pub fn summary(&self) -> String {
        let f = &self.forest;
        let kind = if f.distribution().is_isotropic() {
            "gaussian, identity covariance (EIF-equivalent)".to_string()
        } else {
            f.distribution().kind().to_string()
        };
        format!(
            "trees={} subsample={} height_limit={} dim={} distribution={kind}{}",
            f.trees().len(),
            f.subsample(),
            f.height_limit(),
            f.dim(),
            if self.standardization.is_some() { " standardized" } else { "" }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardization_round_trip() {
        let d = Dataset::from_rows(&[[1.0, 5.0], [3.0, 5.0], [5.0, 5.0]]).unwrap();
        let s = Standardization::fit(&d);
        assert_eq!(s.mean, vec![3.0, 5.0]);
        assert_eq!(s.scale, vec![2.0, 1.0]);
        let z = s.apply(&d).unwrap();
        assert_eq!(z.column(0), vec![-1.0, 0.0, 1.0]);
        assert_eq!(z.column(1), vec![0.0; 3]);
    }
}
