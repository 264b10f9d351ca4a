//! Optional transforms applied to raw data before estimation.

use nalgebra::DMatrix;

use crate::error::{HubError, Result};
use crate::estimators::DataMatrix;

/// Per-column shift used by [`log_shift`] when no constant is given:
/// `max(0, 1 - min)`, so every shifted value is at least 1.
pub fn default_shift(column: &[f64]) -> f64 {
    let min = column.iter().copied().fold(f64::INFINITY, f64::min);
    (1.0 - min).max(0.0)
}

/// `ln(x + c)` column by column. `constant` overrides the per-column shift.
pub fn log_shift(x: &DataMatrix, constant: Option<f64>) -> Result<DataMatrix> {
    let mut out = x.values().clone();
    for j in 0..x.p() {
        let col = x.column(j);
        let c = constant.unwrap_or_else(|| default_shift(&col));
        for (i, v) in col.iter().enumerate() {
            let shifted = v + c;
            if shifted <= 0.0 {
                return Err(HubError::InvalidConfig(format!(
                    "log shift leaves a non-positive value at row {i}, column {j}"
                )));
            }
            out[(i, j)] = shifted.ln();
        }
    }
    rebuild(x, out)
}

/// Replaces each column by its least-squares residual on an intercept plus `covariates` (n x q).
pub fn residualize(x: &DataMatrix, covariates: &DMatrix<f64>) -> Result<DataMatrix> {
    let n = x.n();
    if covariates.nrows() != n {
        return Err(HubError::DimensionMismatch {
            expected: n,
            actual: covariates.nrows(),
        });
    }
    let q = covariates.ncols();
    if q + 1 >= n {
        return Err(HubError::InvalidSize(format!(
            "residualizing on {q} covariates needs more than {} observations",
            q + 1
        )));
    }
    let design = DMatrix::from_fn(
        n,
        q + 1,
        |i, j| if j == 0 { 1.0 } else { covariates[(i, j - 1)] },
    );
    let svd = design.clone().svd(true, true);
    let coef = svd
        .solve(x.values(), 1e-12)
        .map_err(|e| HubError::InvalidConfig(format!("least squares failed: {e}")))?;
    let resid = x.values() - design * coef;
    rebuild(x, resid)
}

/// Indices (ascending) of the `k` columns with the largest sample variance.
pub fn top_variance_indices(x: &DataMatrix, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > x.p() {
        return Err(HubError::InvalidSize(format!(
            "top-variance size must lie in 1..={}, got {k}",
            x.p()
        )));
    }
    let n = x.n() as f64;
    let var: Vec<f64> = (0..x.p())
        .map(|j| {
            let col = x.column(j);
            let mean = col.iter().sum::<f64>() / n;
            col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .collect();
    let mut order: Vec<usize> = (0..x.p()).collect();
    order.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
    let mut keep = order[..k].to_vec();
    keep.sort_unstable();
    Ok(keep)
}

fn rebuild(x: &DataMatrix, values: DMatrix<f64>) -> Result<DataMatrix> {
    let out = DataMatrix::new(values)?;
    match x.variable_names() {
        Some(names) => out.with_names(names.to_vec()),
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_examples() {
        assert_eq!(default_shift(&[-2.0, 0.0, 5.0]), 3.0);
        assert_eq!(default_shift(&[1.5, 2.0]), 0.0);
        assert_eq!(default_shift(&[0.5, 2.0]), 0.5);
    }

    #[test]
    fn log_shift_makes_min_zero() {
        let x = DataMatrix::from_rows(&[vec![-2.0, 3.0], vec![0.0, 4.0], vec![5.0, 9.0]]).unwrap();
        let y = log_shift(&x, None).unwrap();
        assert_eq!(y.get(0, 0), 0.0);
        assert!((y.get(2, 0) - 8f64.ln()).abs() < 1e-15);
        assert!((y.get(0, 1) - 3f64.ln()).abs() < 1e-15);
        assert!(log_shift(&x, Some(1.0)).is_err());
    }

    #[test]
    fn residuals_are_orthogonal_to_covariates() {
        let z = DMatrix::from_column_slice(6, 1, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let x = DataMatrix::from_rows(&[
            vec![3.1, 1.0],
            vec![5.0, 0.0],
            vec![6.9, 2.0],
            vec![9.2, 1.0],
            vec![11.0, 3.0],
            vec![12.8, 0.5],
        ])
        .unwrap();
        let r = residualize(&x, &z).unwrap();
        for j in 0..2 {
            let col = r.column(j);
            let sum: f64 = col.iter().sum();
            let dot: f64 = col.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
            assert!(sum.abs() < 1e-10 && dot.abs() < 1e-10);
        }
    }

    #[test]
    fn top_variance_keeps_widest_columns() {
        let x = DataMatrix::from_rows(&[
            vec![0.0, 0.0, 0.0, 1.0],
            vec![1.0, 10.0, 0.1, 1.0],
            vec![2.0, 20.0, 0.2, 1.0],
        ])
        .unwrap();
        assert_eq!(top_variance_indices(&x, 2).unwrap(), vec![0, 1]);
        assert_eq!(top_variance_indices(&x, 1).unwrap(), vec![1]);
        assert!(top_variance_indices(&x, 5).is_err());
    }
}
