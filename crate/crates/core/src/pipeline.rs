//! Data matrix -> covariance estimate -> hub detection.

use serde::{Deserialize, Serialize};

use crate::error::{HubError, Result};
use crate::estimators::{
    apply_mask, sample_correlation, sample_covariance, screen_variables, threshold_mask_with,
    DataMatrix, Mask, ThresholdRule,
};
use crate::ipchd::{detect, HubResult, IpchdConfig};
use crate::matrix::SymmetricMatrix;

/// Which estimate of the covariance feeds the detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorKind {
    Sample,
    /// Keep the `t` variables with the largest off-diagonal entry.
    Screened {
        t: usize,
    },
    Thresholded {
        xi: f64,
        rule: ThresholdRule,
    },
    Masked {
        mask: Mask,
    },
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Sample => "sample",
            EstimatorKind::Screened { .. } => "screened",
            EstimatorKind::Thresholded { .. } => "thresholded",
            EstimatorKind::Masked { .. } => "masked",
        }
    }

    /// Sample estimate when `n > p`, thresholding with `xi = 1` otherwise.
    pub fn default_for(n: usize, p: usize) -> Self {
        if n > p {
            EstimatorKind::Sample
        } else {
            EstimatorKind::Thresholded {
                xi: 1.0,
                rule: ThresholdRule::Absolute,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Correlation,
    Covariance,
}

impl std::str::FromStr for Scale {
    type Err = HubError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correlation" => Ok(Scale::Correlation),
            "covariance" => Ok(Scale::Covariance),
            _ => Err(HubError::InvalidConfig(format!(
                "scale must be 'correlation' or 'covariance', got '{s}'"
            ))),
        }
    }
}

/// An estimate plus the original index of each of its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub matrix: SymmetricMatrix,
    pub original_indices: Option<Vec<usize>>,
}

pub fn estimate(x: &DataMatrix, kind: &EstimatorKind, scale: Scale) -> Result<Estimate> {
    let base = match scale {
        Scale::Correlation => sample_correlation(x)?,
        Scale::Covariance => sample_covariance(x)?,
    };
    let (matrix, original_indices) = match kind {
        EstimatorKind::Sample => (base, None),
        EstimatorKind::Screened { t } => {
            if *t > x.n() {
                return Err(HubError::InvalidConfig(format!(
                    "screen size must satisfy T <= n (T = {t}, n = {})",
                    x.n()
                )));
            }
            let sel = screen_variables(&base, *t)?;
            (sel.submatrix, Some(sel.selected))
        }
        EstimatorKind::Thresholded { xi, rule } => {
            let mask = threshold_mask_with(&base, *xi, x.n(), *rule)?;
            (apply_mask(&mask, &base)?, None)
        }
        EstimatorKind::Masked { mask } => (apply_mask(mask, &base)?, None),
    };
    Ok(Estimate {
        matrix,
        original_indices,
    })
}

/// Estimates the covariance and runs detection; hubs of a screened run keep
/// their subset positions in `hubs` and map back via `original_indices`.
pub fn detect_data(
    x: &DataMatrix,
    kind: &EstimatorKind,
    scale: Scale,
    cfg: &IpchdConfig,
) -> Result<HubResult> {
    let est = estimate(x, kind, scale)?;
    let mut res = detect(&est.matrix, cfg)?;
    res.original_indices = est.original_indices;
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> DataMatrix {
        DataMatrix::from_rows(&[
            vec![1.0, 2.0, 0.5, 3.0],
            vec![2.0, 4.1, 0.1, 2.0],
            vec![3.0, 6.2, 0.7, 1.0],
            vec![4.0, 7.9, 0.2, 0.5],
            vec![5.0, 10.0, 0.9, 0.1],
        ])
        .unwrap()
    }

    #[test]
    fn default_estimator_follows_dimensions() {
        assert_eq!(EstimatorKind::default_for(10, 5), EstimatorKind::Sample);
        assert_eq!(EstimatorKind::default_for(5, 5).name(), "thresholded");
    }

    #[test]
    fn screening_beyond_n_is_rejected() {
        let err = estimate(
            &data(),
            &EstimatorKind::Screened { t: 6 },
            Scale::Correlation,
        )
        .unwrap_err();
        assert!(err.to_string().contains("T <= n"));
    }

    #[test]
    fn screened_estimate_carries_indices() {
        let est = estimate(
            &data(),
            &EstimatorKind::Screened { t: 2 },
            Scale::Correlation,
        )
        .unwrap();
        assert_eq!(est.matrix.dim(), 2);
        assert_eq!(est.original_indices, Some(vec![0, 1]));
    }

    #[test]
    fn huge_threshold_leaves_the_diagonal() {
        let kind = EstimatorKind::Thresholded {
            xi: 1e6,
            rule: ThresholdRule::Absolute,
        };
        let est = estimate(&data(), &kind, Scale::Covariance).unwrap();
        let m = est.matrix;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(m.get(i, j), 0.0);
                }
            }
        }
        assert!(m.get(0, 0) > 0.0);
    }

    #[test]
    fn masked_with_ones_matches_sample() {
        let kind = EstimatorKind::Masked {
            mask: Mask::all_ones(4),
        };
        let a = estimate(&data(), &kind, Scale::Correlation).unwrap().matrix;
        let b = sample_correlation(&data()).unwrap();
        assert_eq!(a, b);
    }
}
