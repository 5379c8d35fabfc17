use crate::error::{Error, Result};

/// Dense row-major `n x d` matrix of finite observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput)?;
        let dim = first.as_ref().len();
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            values.extend_from_slice(row.as_ref());
            if row.as_ref().len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.as_ref().len(),
                });
            }
        }
        Self::from_flat(dim, values)
    }

    pub fn from_flat(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: values.len() % dim,
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite value in row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { dim, values })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + DoubleEndedIterator + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Rows selected by `mask`.
    pub fn select(&self, mask: &[bool]) -> Vec<&[f64]> {
        self.rows().zip(mask).filter(|(_, m)| **m).map(|(r, _)| r).collect()
    }
}

/// Componentwise `(min, max)` over a non-empty set of points.
pub fn bounding_box<R: AsRef<[f64]>>(points: &[R]) -> (Vec<f64>, Vec<f64>) {
    let mut lo = points[0].as_ref().to_vec();
    let mut hi = lo.clone();
    for p in &points[1..] {
        for (j, &v) in p.as_ref().iter().enumerate() {
            if v < lo[j] {
                lo[j] = v;
            }
            if v > hi[j] {
                hi[j] = v;
            }
        }
    }
    (lo, hi)
}
