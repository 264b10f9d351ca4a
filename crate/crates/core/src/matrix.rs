//! Dense symmetric linear algebra.
//!
//! [`SymmetricMatrix`] is the carrier for every covariance, correlation and
//! precision matrix in the crate. The eigensolver is backed by nalgebra's
//! symmetric QR iteration; ordering and sign conventions are imposed here so
//! that results are reproducible bit for bit.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{HubError, Result};

const EIGEN_MAX_ITERATIONS: usize = 10_000;

/// Dense `p x p` real symmetric matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    data: DMatrix<f64>,
}

impl SymmetricMatrix {
    /// Builds from an arbitrary square matrix, replacing it by `(A + Aᵀ) / 2`.
    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(HubError::DimensionMismatch {
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(HubError::InvalidSize(
                "matrix dimension must be at least 1".into(),
            ));
        }
        check_finite(&m)?;
        let p = m.nrows();
        let mut data = m;
        for i in 0..p {
            for j in (i + 1)..p {
                let avg = 0.5 * (data[(i, j)] + data[(j, i)]);
                data[(i, j)] = avg;
                data[(j, i)] = avg;
            }
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(HubError::DimensionMismatch {
                expected: p,
                actual: bad.len(),
            });
        }
        Self::from_dmatrix(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
    }

    /// Builds from an entry function; only the lower triangle (`i >= j`) is queried.
    pub fn from_fn(p: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..=i {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self::from_dmatrix(m)
    }

    pub fn identity(p: usize) -> Self {
        Self {
            data: DMatrix::identity(p, p),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::from_dmatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.data[(i, i)]).collect()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| self.data.row(i).iter().copied().collect())
            .collect()
    }

    /// Row-major flattening.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.to_rows().into_iter().flatten().collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Principal submatrix on `indices`, in the given order.
    pub fn principal_submatrix(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.dim()) {
            return Err(HubError::InvalidSize(format!(
                "index {bad} out of range for dimension {}",
                self.dim()
            )));
        }
        let t = indices.len();
        Ok(Self {
            data: DMatrix::from_fn(t, t, |a, b| self.data[(indices[a], indices[b])]),
        })
    }

    /// Symmetric permutation `P A Pᵀ` where row `i` of the result is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.dim() {
            return Err(HubError::DimensionMismatch {
                expected: self.dim(),
                actual: perm.len(),
            });
        }
        self.principal_submatrix(perm)
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(HubError::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Eigenvalues sorted in descending order with matching orthonormal eigenvectors.
///
/// Column `i` of [`EigenDecomposition::vectors`] pairs with `eigenvalues()[i]`.
/// Each eigenvector is oriented so that its entry of largest magnitude
/// (lowest index on ties) is non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDecomposition {
    eigenvalues: Vec<f64>,
    #[serde(with = "dmatrix_serde")]
    vectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvector at descending sort position `i`.
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i).iter().copied().collect()
    }

    /// Eigenvectors of the `s` smallest eigenvalues, smallest first.
    pub fn tail_vectors(&self, s: usize) -> Vec<Vec<f64>> {
        let p = self.dim();
        (0..s.min(p)).map(|i| self.vector(p - 1 - i)).collect()
    }

    /// `V diag(values) Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        &self.vectors * d * self.vectors.transpose()
    }
}

mod dmatrix_serde {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }
}

/// Full eigendecomposition of a symmetric (possibly indefinite) matrix.
pub fn symmetric_eigen(a: &SymmetricMatrix) -> Result<EigenDecomposition> {
    check_finite(a.as_dmatrix())?;
    let p = a.dim();
    let eig = SymmetricEigen::try_new(a.as_dmatrix().clone(), f64::EPSILON, EIGEN_MAX_ITERATIONS)
        .ok_or(HubError::ConvergenceFailure {
        iterations: EIGEN_MAX_ITERATIONS,
    })?;

    let mut order: Vec<usize> = (0..p).collect();
    // stable sort: equal eigenvalues keep solver order
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));

    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut lead = 0;
        for i in 1..p {
            if col[i].abs() > col[lead].abs() {
                lead = i;
            }
        }
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..p {
            vectors[(i, dst)] = sign * col[i];
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        vectors,
    })
}

/// Lower-triangular Cholesky factor with a strictly positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    data: DMatrix<f64>,
}

impl LowerTriangular {
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Solves `L x = b` by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let p = self.dim();
        let mut x = b.to_vec();
        for i in 0..p {
            let acc: f64 = (0..i).map(|k| self.data[(i, k)] * x[k]).sum();
            x[i] = (x[i] - acc) / self.data[(i, i)];
        }
        x
    }

    /// Solves `Lᵀ x = b` by back substitution.
    pub fn solve_upper_transpose(&self, b: &[f64]) -> Vec<f64> {
        let p = self.dim();
        let mut x = b.to_vec();
        for i in (0..p).rev() {
            let acc: f64 = ((i + 1)..p).map(|k| self.data[(k, i)] * x[k]).sum();
            x[i] = (x[i] - acc) / self.data[(i, i)];
        }
        x
    }
}

/// Cholesky factorization `A = L Lᵀ`.
pub fn cholesky(a: &SymmetricMatrix) -> Result<LowerTriangular> {
    let p = a.dim();
    let m = a.as_dmatrix();
    let mut l = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(HubError::NotPositiveDefinite { pivot: j, value: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..p {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(LowerTriangular { data: l })
}

/// Inverse of a symmetric positive definite matrix via its Cholesky factor.
pub fn invert_spd(a: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let l = cholesky(a)?;
    let p = a.dim();
    // columns of L⁻¹
    let mut linv = DMatrix::<f64>::zeros(p, p);
    let mut e = vec![0.0; p];
    for j in 0..p {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = l.solve_lower(&e);
        for i in 0..p {
            linv[(i, j)] = col[i];
        }
    }
    SymmetricMatrix::from_dmatrix(linv.transpose() * &linv)
}

/// Rescales a covariance matrix to unit diagonal.
pub fn cov_to_corr(a: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let diag = a.diagonal();
    if let Some(index) = diag.iter().position(|&d| d <= 0.0) {
        return Err(HubError::ZeroVariance { index });
    }
    SymmetricMatrix::from_fn(a.dim(), |i, j| {
        if i == j {
            1.0
        } else {
            (a.get(i, j) / (diag[i] * diag[j]).sqrt()).clamp(-1.0, 1.0)
        }
    })
}
