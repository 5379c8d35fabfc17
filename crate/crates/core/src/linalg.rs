//! Small dense symmetric linear algebra.
//!
//! Everything here works on row-major `f64` storage and is sized for the
//! matrices that parameterize normal-vector distributions (a handful up to a
//! few hundred dimensions).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when accepting user-supplied matrices as symmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Pivots at or below this value reject a matrix as a covariance.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOLERANCE: f64 = 1e-12;

/// A real symmetric matrix. Symmetry is exact: construction averages the two
/// triangles after checking they agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds a matrix from row-major nested rows.
    ///
    /// Rows must form a non-empty square with finite entries, and
    /// `|a_ij - a_ji| <= 1e-9 * max(1, |a_ij|, |a_ji|)`. The stored matrix is
    /// `(A + A')/2`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::EmptyInput);
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(
                    "matrix entries must be finite".into(),
                ));
            }
            data.extend_from_slice(row);
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (data[i * dim + j], data[j * dim + i]);
                let gap = (a - b).abs();
                if gap > SYMMETRY_TOLERANCE * 1f64.max(a.abs()).max(b.abs()) {
                    return Err(Error::NotSymmetric { i, j, gap });
                }
                let mean = 0.5 * (a + b);
                data[i * dim + j] = mean;
                data[j * dim + i] = mean;
            }
        }
        Ok(Self { dim, data })
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::EmptyInput);
        }
        if diag.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "matrix entries must be finite".into(),
            ));
        }
        let dim = diag.len();
        let mut data = vec![0.0; dim * dim];
        for (i, &v) in diag.iter().enumerate() {
            data[i * dim + i] = v;
        }
        Ok(Self { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim > 0, "identity of dimension zero");
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    /// Every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_identity(&self) -> bool {
        (0..self.dim).all(|i| {
            (0..self.dim).all(|j| self.get(i, j) == if i == j { 1.0 } else { 0.0 })
        })
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, x.len())?;
        Ok((0..self.dim)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

/// Lower-triangular `L` with `L L' = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    dim: usize,
    lower: Vec<f64>,
}

impl CholeskyFactor {
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.dim + j]
    }

    /// `L z`, touching only the lower triangle.
    pub fn mul_vec(&self, z: &[f64]) -> Vec<f64> {
        debug_assert_eq!(z.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                let row = &self.lower[i * self.dim..i * self.dim + i + 1];
                row.iter().zip(z).fold(0.0, |acc, (l, v)| acc + l * v)
            })
            .collect()
    }

    /// `L L'`
    pub fn reconstruct(&self) -> SymMatrix {
        let d = self.dim;
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let v: f64 = (0..=j).map(|k| self.get(i, k) * self.get(j, k)).sum();
                data[i * d + j] = v;
                data[j * d + i] = v;
            }
        }
        SymMatrix { dim: d, data }
    }

    /// Determinant of the factored matrix, `prod(L_ii)^2`.
    pub fn determinant(&self) -> f64 {
        let p: f64 = (0..self.dim).map(|i| self.get(i, i)).product();
        p * p
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector for `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

impl EigenDecomposition {
    /// `sum_i lambda_i g_i g_i'`
    pub fn reconstruct(&self) -> SymMatrix {
        let d = self.values.len();
        let mut data = vec![0.0; d * d];
        for (lambda, g) in self.values.iter().zip(&self.vectors) {
            for i in 0..d {
                for j in 0..d {
                    data[i * d + j] += lambda * g[i] * g[j];
                }
            }
        }
        SymMatrix::from_rows(&data.chunks(d).collect::<Vec<_>>())
            .expect("outer-product sum is symmetric")
    }
}

pub fn cholesky(a: &SymMatrix) -> Result<CholeskyFactor> {
    let d = a.dim;
    let mut lower = vec![0.0; d * d];
    for j in 0..d {
        let mut pivot = a.get(j, j);
        for k in 0..j {
            pivot -= lower[j * d + k] * lower[j * d + k];
        }
        if !(pivot > PIVOT_TOLERANCE) {
            return Err(Error::NotPositiveDefinite { row: j, pivot });
        }
        let diag = pivot.sqrt();
        lower[j * d + j] = diag;
        for i in (j + 1)..d {
            let mut v = a.get(i, j);
            for k in 0..j {
                v -= lower[i * d + k] * lower[j * d + k];
            }
            lower[i * d + j] = v / diag;
        }
    }
    Ok(CholeskyFactor { dim: d, lower })
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius norm falls to
/// `1e-12 * ||A||_F`; more than 100 sweeps is reported as
/// [`Error::ConvergenceFailure`]. Each eigenvector is signed so that its first
/// non-negligible component is positive.
pub fn eigh(a: &SymMatrix) -> Result<EigenDecomposition> {
    let d = a.dim;
    let mut m = a.data.clone();
    let mut v = SymMatrix::identity(d).data;
    let threshold = JACOBI_REL_TOLERANCE * a.frobenius_norm();

    let off_norm = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                s += 2.0 * m[i * d + j] * m[i * d + j];
            }
        }
        s.sqrt()
    };

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_norm(&m) <= threshold {
            converged = true;
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * d + q] - m[p * d + p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (mkp, mkq) = (m[k * d + p], m[k * d + q]);
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let (mpk, mqk) = (m[p * d + k], m[q * d + k]);
                    m[p * d + k] = c * mpk - s * mqk;
                    m[q * d + k] = s * mpk + c * mqk;
                }
                m[p * d + q] = 0.0;
                m[q * d + p] = 0.0;
                for k in 0..d {
                    let (vkp, vkq) = (v[k * d + p], v[k * d + q]);
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off_norm(&m) > threshold {
        return Err(Error::ConvergenceFailure {
            sweeps: JACOBI_MAX_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[j * d + j].total_cmp(&m[i * d + i]));
    let values = order.iter().map(|&i| m[i * d + i]).collect();
    let vectors = order
        .iter()
        .map(|&col| {
            let mut g: Vec<f64> = (0..d).map(|k| v[k * d + col]).collect();
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            g.iter_mut().for_each(|x| *x /= norm);
            if let Some(first) = g.iter().find(|x| x.abs() > 1e-12) {
                if *first < 0.0 {
                    g.iter_mut().for_each(|x| *x = -*x);
                }
            }
            g
        })
        .collect();
    Ok(EigenDecomposition { values, vectors })
}

/// `n' A n` as the full double sum.
pub fn quadratic_form(n: &[f64], a: &SymMatrix) -> Result<f64> {
    check_len(a.dim, n.len())?;
    let mut total = 0.0;
    for (i, ni) in n.iter().enumerate() {
        let row: f64 = a.row(i).iter().zip(n).map(|(aij, nj)| aij * nj).sum();
        total += ni * row;
    }
    Ok(total)
}

/// Largest eigenvalue magnitude.
pub fn spectral_radius(a: &SymMatrix) -> Result<f64> {
    let eig = eigh(a)?;
    Ok(eig.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// `A / rho(A)`, so the result has unit spectral radius.
pub fn normalize_spectral(a: &SymMatrix) -> Result<SymMatrix> {
    let rho = spectral_radius(a)?;
    if rho <= PIVOT_TOLERANCE {
        return Err(Error::ZeroMatrix);
    }
    Ok(SymMatrix {
        dim: a.dim,
        data: a.data.iter().map(|v| v / rho).collect(),
    })
}

#[inline]
pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
