//! Covariance and correlation estimators: sample, screened, masked and thresholded.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{HubError, Result};
use crate::matrix::{cov_to_corr, SymmetricMatrix};

/// `n x p` block of observations (rows) on variables (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    variable_names: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                if !values[(i, j)].is_finite() {
                    return Err(HubError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self {
            values,
            variable_names: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(HubError::DimensionMismatch {
                expected: p,
                actual: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(HubError::DimensionMismatch {
                expected: self.p(),
                actual: names.len(),
            });
        }
        self.variable_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[(row, col)]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    pub fn variable_names(&self) -> Option<&[String]> {
        self.variable_names.as_deref()
    }

    /// Keeps the listed columns, in the given order, together with their names.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.p()) {
            return Err(HubError::InvalidSize(format!("column {bad} out of range")));
        }
        let values = DMatrix::from_fn(self.n(), cols.len(), |i, k| self.values[(i, cols[k])]);
        let variable_names = self
            .variable_names
            .as_ref()
            .map(|names| cols.iter().map(|&c| names[c].clone()).collect());
        Ok(Self {
            values,
            variable_names,
        })
    }
}

/// Unbiased sample covariance (denominator `n - 1`).
pub fn sample_covariance(x: &DataMatrix) -> Result<SymmetricMatrix> {
    let n = x.n();
    if n < 2 {
        return Err(HubError::InsufficientSamples { n });
    }
    let mut centered = x.values.clone();
    for mut col in centered.column_iter_mut() {
        let mean = col.iter().sum::<f64>() / n as f64;
        col.iter_mut().for_each(|v| *v -= mean);
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    SymmetricMatrix::from_dmatrix(cov)
}

/// Sample correlation; fails with [`HubError::ZeroVariance`] on a constant column.
pub fn sample_correlation(x: &DataMatrix) -> Result<SymmetricMatrix> {
    cov_to_corr(&sample_covariance(x)?)
}

/// Result of covariance screening.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenSelection {
    /// Retained original indices, ascending.
    pub selected: Vec<usize>,
    /// Per-variable screening score `max_{j != i} |s_ij|`.
    pub scores: Vec<f64>,
    /// Principal submatrix on `selected`.
    pub submatrix: SymmetricMatrix,
}

/// Per-variable screening scores: the largest absolute off-diagonal entry in each row.
pub fn screening_scores(s: &SymmetricMatrix) -> Vec<f64> {
    let p = s.dim();
    (0..p)
        .map(|i| {
            (0..p)
                .filter(|&j| j != i)
                .map(|j| s.get(i, j).abs())
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Keeps the `t` variables with the largest screening scores (ties to the lower index).
pub fn screen_variables(s: &SymmetricMatrix, t: usize) -> Result<ScreenSelection> {
    let p = s.dim();
    if p < 2 {
        return Err(HubError::InvalidSize("screening needs p >= 2".into()));
    }
    if t < 1 || t > p {
        return Err(HubError::InvalidSize(format!(
            "screen size {t} must satisfy 1 <= T <= p = {p}"
        )));
    }
    let scores = screening_scores(s);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut selected = order[..t].to_vec();
    selected.sort_unstable();
    let submatrix = s.principal_submatrix(&selected)?;
    Ok(ScreenSelection {
        selected,
        scores,
        submatrix,
    })
}

/// Symmetric `{0, 1}` mask with unit diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    dim: usize,
    keep: Vec<bool>,
}

impl Mask {
    /// Builds from an entry predicate evaluated on the strict lower triangle.
    pub fn from_fn(dim: usize, mut keep: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = vec![false; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = true;
            for j in 0..i {
                let k = keep(i, j);
                m[i * dim + j] = k;
                m[j * dim + i] = k;
            }
        }
        Self { dim, keep: m }
    }

    pub fn all_ones(dim: usize) -> Self {
        Self::from_fn(dim, |_, _| true)
    }

    pub fn diagonal(dim: usize) -> Self {
        Self::from_fn(dim, |_, _| false)
    }

    /// Parses a dense 0/1 matrix; rejects asymmetric input or a zero diagonal.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut keep = vec![false; dim * dim];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(HubError::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                keep[i * dim + j] = if v == 1.0 {
                    true
                } else if v == 0.0 {
                    false
                } else {
                    return Err(HubError::InvalidConfig(format!(
                        "mask entry ({i}, {j}) = {v} is not 0 or 1"
                    )));
                };
            }
        }
        for i in 0..dim {
            if !keep[i * dim + i] {
                return Err(HubError::InvalidConfig(format!(
                    "mask diagonal ({i}, {i}) must be 1"
                )));
            }
            for j in 0..i {
                if keep[i * dim + j] != keep[j * dim + i] {
                    return Err(HubError::InvalidConfig(format!(
                        "mask is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { dim, keep })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn keeps(&self, i: usize, j: usize) -> bool {
        self.keep[i * self.dim + j]
    }

    /// Number of retained off-diagonal pairs.
    pub fn off_diagonal_pairs(&self) -> usize {
        (0..self.dim)
            .map(|i| (0..i).filter(|&j| self.keeps(i, j)).count())
            .sum()
    }
}

/// Whether the threshold compares `|s_ij|` or the signed entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    #[default]
    Absolute,
    Signed,
}

/// The cutoff `xi * sqrt(ln(p) / n)`.
pub fn threshold_level(xi: f64, p: usize, n: usize) -> f64 {
    xi * ((p as f64).ln() / n as f64).sqrt()
}

/// Thresholding mask keeping off-diagonal pairs with `|s_ij| >= xi * sqrt(ln p / n)`.
pub fn threshold_mask(s: &SymmetricMatrix, xi: f64, n: usize) -> Result<Mask> {
    threshold_mask_with(s, xi, n, ThresholdRule::Absolute)
}

pub fn threshold_mask_with(
    s: &SymmetricMatrix,
    xi: f64,
    n: usize,
    rule: ThresholdRule,
) -> Result<Mask> {
    let p = s.dim();
    if p < 2 {
        return Err(HubError::InvalidSize("thresholding needs p >= 2".into()));
    }
    if n < 1 {
        return Err(HubError::InvalidSize("thresholding needs n >= 1".into()));
    }
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(HubError::InvalidConfig(format!(
            "xi must be a finite value >= 0, got {xi}"
        )));
    }
    let level = threshold_level(xi, p, n);
    Ok(Mask::from_fn(p, |i, j| {
        let v = s.get(i, j);
        match rule {
            ThresholdRule::Absolute => v.abs() >= level,
            ThresholdRule::Signed => v >= level,
        }
    }))
}

/// Entrywise product `M ⊙ S`.
pub fn apply_mask(m: &Mask, s: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    if m.dim() != s.dim() {
        return Err(HubError::DimensionMismatch {
            expected: s.dim(),
            actual: m.dim(),
        });
    }
    SymmetricMatrix::from_fn(
        s.dim(),
        |i, j| if m.keeps(i, j) { s.get(i, j) } else { 0.0 },
    )
}

/// Squared matrix 1-2 norm: the largest column sum of squared mask entries.
pub fn mask_complexity(m: &Mask) -> f64 {
    (0..m.dim())
        .map(|j| (0..m.dim()).filter(|&i| m.keeps(i, j)).count())
        .max()
        .unwrap_or(0) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(rows: &[Vec<f64>]) -> SymmetricMatrix {
        SymmetricMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn covariance_two_points() {
        let x = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        let s = sample_covariance(&x).unwrap();
        assert_eq!(s.to_rows(), vec![vec![2.0, 2.0], vec![2.0, 2.0]]);
        let r = sample_correlation(&x).unwrap();
        assert_eq!(r.to_rows(), vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn covariance_constant_column_is_zero() {
        let x = DataMatrix::from_rows(&[vec![1.0, 3.0], vec![2.0, 3.0], vec![4.0, 3.0]]).unwrap();
        let s = sample_covariance(&x).unwrap();
        assert_eq!(s.get(1, 1), 0.0);
        assert_eq!(s.get(0, 1), 0.0);
        assert_eq!(
            sample_correlation(&x),
            Err(HubError::ZeroVariance { index: 1 })
        );
    }

    #[test]
    fn covariance_needs_two_rows() {
        let x = DataMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert_eq!(
            sample_covariance(&x),
            Err(HubError::InsufficientSamples { n: 1 })
        );
    }

    #[test]
    fn screening_dominant_pair() {
        let mut rows = vec![vec![0.1; 4]; 4];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        rows[1][2] = 0.9;
        rows[2][1] = 0.9;
        let sel = screen_variables(&sym(&rows), 2).unwrap();
        assert_eq!(sel.selected, vec![1, 2]);
        assert_eq!(sel.scores, vec![0.1, 0.9, 0.9, 0.1]);
        assert_eq!(
            sel.submatrix.to_rows(),
            vec![vec![1.0, 0.9], vec![0.9, 1.0]]
        );
    }

    #[test]
    fn screening_full_and_ties() {
        let mut rows = vec![vec![0.3; 4]; 4];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let s = sym(&rows);
        let full = screen_variables(&s, 4).unwrap();
        assert_eq!(full.selected, vec![0, 1, 2, 3]);
        assert_eq!(full.submatrix, s);
        assert_eq!(screen_variables(&s, 2).unwrap().selected, vec![0, 1]);
    }

    #[test]
    fn screening_size_validation() {
        let s = SymmetricMatrix::identity(3);
        assert!(matches!(
            screen_variables(&s, 0),
            Err(HubError::InvalidSize(_))
        ));
        assert!(matches!(
            screen_variables(&s, 4),
            Err(HubError::InvalidSize(_))
        ));
    }

    #[test]
    fn threshold_examples() {
        let s = sym(&[
            vec![1.0, 0.3, 0.05],
            vec![0.3, 1.0, -0.05],
            vec![0.05, -0.05, 1.0],
        ]);
        assert_eq!(threshold_mask(&s, 0.0, 100).unwrap(), Mask::all_ones(3));
        assert_eq!(threshold_mask(&s, 100.0, 100).unwrap(), Mask::diagonal(3));
        // sqrt(ln 3 / 100) = 0.104815...
        assert!((threshold_level(1.0, 3, 100) - 0.104_814_707_396_820_5).abs() < 1e-12);
        let m = threshold_mask(&s, 1.0, 100).unwrap();
        assert!(m.keeps(0, 1) && m.keeps(1, 0));
        assert!(!m.keeps(0, 2) && !m.keeps(1, 2));
        assert_eq!(m.off_diagonal_pairs(), 1);
    }

    #[test]
    fn threshold_signed_drops_negatives() {
        let s = sym(&[vec![1.0, -0.9], vec![-0.9, 1.0]]);
        assert!(threshold_mask(&s, 1.0, 100).unwrap().keeps(0, 1));
        assert!(!threshold_mask_with(&s, 1.0, 100, ThresholdRule::Signed)
            .unwrap()
            .keeps(0, 1));
    }

    #[test]
    fn apply_mask_examples() {
        let s = sym(&[
            vec![1.0, 0.5, 0.2],
            vec![0.5, 1.0, 0.3],
            vec![0.2, 0.3, 1.0],
        ]);
        assert_eq!(apply_mask(&Mask::all_ones(3), &s).unwrap(), s);
        assert_eq!(
            apply_mask(&Mask::diagonal(3), &s).unwrap(),
            SymmetricMatrix::identity(3)
        );
        let keep12 = Mask::from_fn(3, |i, j| (i, j) == (1, 0));
        assert_eq!(
            apply_mask(&keep12, &s).unwrap().to_rows(),
            vec![
                vec![1.0, 0.5, 0.0],
                vec![0.5, 1.0, 0.0],
                vec![0.0, 0.0, 1.0]
            ]
        );
        assert!(matches!(
            apply_mask(&Mask::all_ones(2), &s),
            Err(HubError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn complexity_examples() {
        assert_eq!(mask_complexity(&Mask::diagonal(5)), 1.0);
        assert_eq!(mask_complexity(&Mask::all_ones(5)), 5.0);
        // column 0 connected to rows 1, 2, 3 -> four ones
        let star = Mask::from_fn(5, |i, j| j == 0 && i <= 3);
        assert_eq!(mask_complexity(&star), 4.0);
    }

    #[test]
    fn mask_parsing_validates() {
        assert!(Mask::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).is_err());
        assert!(Mask::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]).is_err());
        assert!(Mask::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).is_err());
        let m = Mask::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(m, Mask::all_ones(2));
    }
}
