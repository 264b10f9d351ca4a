//! Inverse principal components for hub detection.
//!
//! The tail eigenvectors of a covariance estimate are the leading
//! eigenvectors of the corresponding precision matrix. A hub set shows up as
//! a small group of separated precision eigenvalues, and hub variables carry
//! most of the mass of the associated eigenvectors. Detection therefore runs
//! in three steps:
//!
//! 1. pick the spike count `s` from regularized ratios of consecutive tail
//!    eigenvalues (or over-estimate it as `floor(p / 5)`),
//! 2. score each variable by its squared loading on the `s` tail eigenvectors,
//! 3. keep the variables whose score clears a threshold.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HubError, Result};
use crate::estimators::{sample_correlation, screen_variables, DataMatrix};
use crate::matrix::{invert_spd, symmetric_eigen, EigenDecomposition, SymmetricMatrix};

/// Default factor by which the largest ratio must beat the runner-up.
pub const DEFAULT_RATIO_FACTOR: f64 = 1.5;

/// Fraction of the median eigenvalue added by the automatic regularizer.
pub const AUTO_RHO_MEDIAN_FRACTION: f64 = 0.05;

/// Multiple of the most negative eigenvalue added by the automatic regularizer.
pub const AUTO_RHO_NEGATIVE_MULTIPLIER: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Rho {
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Kappa {
    Fixed(f64),
    /// Mean plus two sample standard deviations of the influence measures.
    Auto2Sd,
    /// `2 * s_hat / p`.
    #[default]
    Auto2SOverP,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SMode {
    #[default]
    DataDriven,
    OverEstimated,
    Fixed(usize),
}

impl fmt::Display for Rho {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rho::Auto => f.write_str("auto"),
            Rho::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Rho {
    type Err = HubError;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Rho::Auto);
        }
        let v: f64 = s.parse().map_err(|_| {
            HubError::InvalidConfig(format!("rho must be 'auto' or a number, got '{s}'"))
        })?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(HubError::InvalidConfig(format!(
                "rho must be >= 0, got {v}"
            )));
        }
        Ok(Rho::Fixed(v))
    }
}

impl fmt::Display for Kappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kappa::Fixed(v) => write!(f, "{v}"),
            Kappa::Auto2Sd => f.write_str("auto-2sd"),
            Kappa::Auto2SOverP => f.write_str("auto-2s-over-p"),
        }
    }
}

impl FromStr for Kappa {
    type Err = HubError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto-2sd" => Ok(Kappa::Auto2Sd),
            "auto-2s-over-p" => Ok(Kappa::Auto2SOverP),
            _ => {
                let v: f64 = s.parse().map_err(|_| {
                    HubError::InvalidConfig(format!(
                        "kappa must be a number in (0, 1], 'auto-2sd' or 'auto-2s-over-p', got '{s}'"
                    ))
                })?;
                if !(v > 0.0 && v <= 1.0) {
                    return Err(HubError::InvalidConfig(format!(
                        "kappa must lie in (0, 1], got {v}"
                    )));
                }
                Ok(Kappa::Fixed(v))
            }
        }
    }
}

impl fmt::Display for SMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SMode::DataDriven => f.write_str("data-driven"),
            SMode::OverEstimated => f.write_str("over-estimated"),
            SMode::Fixed(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for SMode {
    type Err = HubError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "data-driven" | "data_driven" => Ok(SMode::DataDriven),
            "over-estimated" | "over_estimated" => Ok(SMode::OverEstimated),
            _ => s.parse::<usize>().map(SMode::Fixed).map_err(|_| {
                HubError::InvalidConfig(format!(
                    "s-mode must be 'data-driven', 'over-estimated' or a positive integer, got '{s}'"
                ))
            }),
        }
    }
}

/// Tuning of a single detection run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpchdConfig {
    pub rho: Rho,
    pub kappa: Kappa,
    pub s_mode: SMode,
    pub ratio_factor: f64,
}

impl Default for IpchdConfig {
    fn default() -> Self {
        Self {
            rho: Rho::Auto,
            kappa: Kappa::Auto2SOverP,
            s_mode: SMode::DataDriven,
            ratio_factor: DEFAULT_RATIO_FACTOR,
        }
    }
}

impl IpchdConfig {
    /// Checks the parts of the configuration that do not depend on `p`.
    pub fn validate(&self) -> Result<()> {
        if let Rho::Fixed(v) = self.rho {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(HubError::InvalidConfig(format!(
                    "rho must be >= 0, got {v}"
                )));
            }
        }
        if let Kappa::Fixed(k) = self.kappa {
            if !(k > 0.0 && k <= 1.0) {
                return Err(HubError::InvalidConfig(format!(
                    "kappa must lie in (0, 1], got {k}"
                )));
            }
        }
        if !(self.ratio_factor > 1.0 && self.ratio_factor.is_finite()) {
            return Err(HubError::InvalidConfig(format!(
                "ratio factor must exceed 1, got {}",
                self.ratio_factor
            )));
        }
        if self.s_mode == SMode::Fixed(0) {
            return Err(HubError::InvalidConfig("fixed s must be at least 1".into()));
        }
        Ok(())
    }

    pub fn validate_for_dim(&self, p: usize) -> Result<()> {
        self.validate()?;
        if p < 2 {
            return Err(HubError::InvalidSize(format!(
                "hub detection needs p >= 2, got {p}"
            )));
        }
        if let SMode::Fixed(s) = self.s_mode {
            if s > p / 2 {
                return Err(HubError::InvalidConfig(format!(
                    "fixed s = {s} exceeds floor(p / 2) = {}",
                    p / 2
                )));
            }
        }
        Ok(())
    }
}

/// How the spike count was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SModeUsed {
    DataDriven,
    /// Data-driven rule found no dominant ratio and fell back to `floor(p / 5)`.
    DataDrivenFallback,
    OverEstimated,
    Fixed,
}

impl SModeUsed {
    pub fn is_fallback(self) -> bool {
        self == SModeUsed::DataDrivenFallback
    }
}

/// Output of [`detect`], with every intermediate that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubResult {
    pub p: usize,
    pub s_hat: usize,
    pub s_mode_used: SModeUsed,
    pub fallback: bool,
    pub rho_used: f64,
    pub kappa_used: f64,
    /// Descending eigenvalues of the covariance estimate.
    pub eigenvalues: Vec<f64>,
    /// `delta_rho(i)` for `i = 1..=floor(p / 2)`.
    pub ratios: Vec<f64>,
    pub influence: Vec<f64>,
    /// Positions (0-based, in the analysed matrix) selected as hubs.
    pub hubs: Vec<usize>,
    /// Position -> original variable index, when the analysed matrix is a subset.
    pub original_indices: Option<Vec<usize>>,
}

impl HubResult {
    /// Hub indices mapped back through `original_indices`.
    pub fn hubs_original(&self) -> Vec<usize> {
        match &self.original_indices {
            Some(map) => self.hubs.iter().map(|&h| map[h]).collect(),
            None => self.hubs.clone(),
        }
    }

    /// Influence measures scattered into a length-`p_total` vector (0 off the subset).
    pub fn influence_original(&self, p_total: usize) -> Vec<f64> {
        match &self.original_indices {
            Some(map) => {
                let mut out = vec![0.0; p_total];
                for (k, &orig) in map.iter().enumerate() {
                    out[orig] = self.influence[k];
                }
                out
            }
            None => self.influence.clone(),
        }
    }
}

/// `delta_rho(i) = (g[p-i-1] + rho) / (g[p-i] + rho)` for `i = 1..=floor(p/2)`
/// on descending eigenvalues `g` (0-based storage).
pub fn eigenvalue_ratios(eigenvalues: &[f64], rho: f64) -> Result<Vec<f64>> {
    let p = eigenvalues.len();
    if p < 2 {
        return Err(HubError::InvalidSize(
            "eigenvalue ratios need p >= 2".into(),
        ));
    }
    (1..=p / 2)
        .map(|i| {
            let denominator = eigenvalues[p - i] + rho;
            if denominator <= 0.0 {
                return Err(HubError::NonPositiveDenominator {
                    position: i,
                    value: denominator,
                });
            }
            Ok((eigenvalues[p - i - 1] + rho) / denominator)
        })
        .collect()
}

/// Regularizer that keeps ratio denominators positive and above the noise floor.
///
/// `2 * max(0, -g_min) + 0.05 * median(g)`. A negative smallest eigenvalue
/// bounds the estimation error from below, so shifting by twice its size
/// keeps noise-level tail eigenvalues from producing spurious large ratios.
/// When the median is not positive (rank-deficient estimates) the mean
/// absolute eigenvalue stands in for it.
pub fn auto_rho(eigenvalues: &[f64]) -> f64 {
    let p = eigenvalues.len();
    if p == 0 {
        return 0.0;
    }
    let smallest = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let mut sorted = eigenvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if p % 2 == 1 {
        sorted[p / 2]
    } else {
        0.5 * (sorted[p / 2 - 1] + sorted[p / 2])
    };
    let scale = if median > 0.0 {
        median
    } else {
        eigenvalues.iter().map(|g| g.abs()).sum::<f64>() / p as f64
    };
    AUTO_RHO_NEGATIVE_MULTIPLIER * (-smallest).max(0.0) + AUTO_RHO_MEDIAN_FRACTION * scale
}

/// Over-estimated spike count `floor(p / 5)`, clamped to `1..=max(1, floor(p / 2))`.
pub fn estimate_s_over(p: usize) -> usize {
    (p / 5).max(1).min((p / 2).max(1))
}

/// Picks the position of the dominant ratio, or falls back to `floor(p / 5)`.
///
/// Returns the 1-based spike count and whether the fallback was taken.
pub fn estimate_s_data_driven(ratios: &[f64], p: usize, ratio_factor: f64) -> (usize, bool) {
    if ratios.len() < 2 {
        return (estimate_s_over(p), true);
    }
    let argmax_excluding = |skip: Option<usize>| {
        let mut best: Option<usize> = None;
        for (i, &r) in ratios.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            if best.is_none_or(|b| r > ratios[b]) {
                best = Some(i);
            }
        }
        best.expect("at least two ratios")
    };
    let first = argmax_excluding(None);
    let second = argmax_excluding(Some(first));
    if ratios[first] > ratio_factor * ratios[second] {
        (first + 1, false)
    } else {
        (estimate_s_over(p), true)
    }
}

/// Squared loadings on the `s_hat` eigenvectors with the smallest eigenvalues.
pub fn influence_measures(eig: &EigenDecomposition, s_hat: usize) -> Result<Vec<f64>> {
    let p = eig.dim();
    if s_hat < 1 || s_hat > p {
        return Err(HubError::InvalidS { s: s_hat, p });
    }
    let v = eig.vectors();
    Ok((0..p)
        // smallest eigenvector first, so omega(s + 1) extends omega(s) term by term
        .map(|k| (p - s_hat..p).rev().map(|c| v[(k, c)] * v[(k, c)]).sum())
        .collect())
}

/// Indices with `influence[k] >= kappa`.
pub fn select_hubs(influence: &[f64], kappa: f64) -> Vec<usize> {
    influence
        .iter()
        .enumerate()
        .filter(|&(_, &w)| w >= kappa)
        .map(|(k, _)| k)
        .collect()
}

/// Mean plus two sample standard deviations (denominator `p - 1`).
pub fn two_sd_cutoff(connectivity: &[f64]) -> f64 {
    let p = connectivity.len();
    let mean = connectivity.iter().sum::<f64>() / p as f64;
    if p < 2 {
        return mean;
    }
    let var = connectivity.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (p as f64 - 1.0);
    mean + 2.0 * var.sqrt()
}

/// Indices whose connectivity is strictly above mean + 2 sd.
pub fn select_hubs_2sd(connectivity: &[f64]) -> Vec<usize> {
    let cutoff = two_sd_cutoff(connectivity);
    connectivity
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c > cutoff)
        .map(|(k, _)| k)
        .collect()
}

/// Runs the full detection on a covariance (or correlation) estimate.
pub fn detect(sigma_hat: &SymmetricMatrix, cfg: &IpchdConfig) -> Result<HubResult> {
    let p = sigma_hat.dim();
    cfg.validate_for_dim(p)?;
    let eig = symmetric_eigen(sigma_hat)?;
    detect_from_eigen(&eig, cfg)
}

/// Detection on a precomputed eigendecomposition.
pub fn detect_from_eigen(eig: &EigenDecomposition, cfg: &IpchdConfig) -> Result<HubResult> {
    let p = eig.dim();
    cfg.validate_for_dim(p)?;
    let eigenvalues = eig.eigenvalues().to_vec();
    let rho_used = match cfg.rho {
        Rho::Auto => auto_rho(&eigenvalues),
        Rho::Fixed(v) => v,
    };

    let (s_hat, s_mode_used, ratios) = match cfg.s_mode {
        SMode::DataDriven => {
            let ratios = eigenvalue_ratios(&eigenvalues, rho_used)?;
            let (s, fallback) = estimate_s_data_driven(&ratios, p, cfg.ratio_factor);
            let used = if fallback {
                SModeUsed::DataDrivenFallback
            } else {
                SModeUsed::DataDriven
            };
            (s, used, ratios)
        }
        // ratios are informational here; a too-small rho must not block detection
        SMode::OverEstimated => (
            estimate_s_over(p),
            SModeUsed::OverEstimated,
            eigenvalue_ratios(&eigenvalues, rho_used).unwrap_or_default(),
        ),
        SMode::Fixed(s) => (
            s,
            SModeUsed::Fixed,
            eigenvalue_ratios(&eigenvalues, rho_used).unwrap_or_default(),
        ),
    };

    let influence = influence_measures(eig, s_hat)?;
    let (kappa_used, hubs) = match cfg.kappa {
        Kappa::Fixed(k) => (k, select_hubs(&influence, k)),
        Kappa::Auto2SOverP => {
            let k = 2.0 * s_hat as f64 / p as f64;
            (k, select_hubs(&influence, k))
        }
        Kappa::Auto2Sd => (two_sd_cutoff(&influence), select_hubs_2sd(&influence)),
    };

    Ok(HubResult {
        p,
        s_hat,
        s_mode_used,
        fallback: s_mode_used.is_fallback(),
        rho_used,
        kappa_used,
        eigenvalues,
        ratios,
        influence,
        hubs,
        original_indices: None,
    })
}

/// Weighted degree of connection: squared Euclidean norm of each column.
pub fn weighted_degree(theta: &SymmetricMatrix) -> Vec<f64> {
    let m = theta.as_dmatrix();
    m.column_iter()
        .map(|c| c.iter().map(|v| v * v).sum())
        .collect()
}

/// Hubs and scores of the raw inverse-correlation baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    /// Original indices, ascending.
    pub hubs: Vec<usize>,
    /// Weighted degree on the inverse correlation; 0 for screened-out variables.
    pub scores: Vec<f64>,
    pub screened: Option<Vec<usize>>,
}

/// Inverts the sample correlation (optionally after screening) and applies
/// the two-standard-deviation rule to the weighted degrees.
pub fn raw_inverse_baseline(x: &DataMatrix, screen_t: Option<usize>) -> Result<BaselineResult> {
    let (n, p) = (x.n(), x.p());
    let r = sample_correlation(x)?;
    let (matrix, screened) = match screen_t {
        Some(t) => {
            let sel = screen_variables(&r, t)?;
            (sel.submatrix, Some(sel.selected))
        }
        None if p >= n => return Err(HubError::MissingScreenSize { p, n }),
        None => (r, None),
    };
    if matrix.dim() >= n {
        return Err(HubError::InvalidSize(format!(
            "inverting a {0}x{0} correlation needs more than {0} observations, got {n}",
            matrix.dim()
        )));
    }
    let alpha = weighted_degree(&invert_spd(&matrix)?);
    let local_hubs = select_hubs_2sd(&alpha);
    let (hubs, scores) = match &screened {
        Some(map) => {
            let mut scores = vec![0.0; p];
            for (k, &orig) in map.iter().enumerate() {
                scores[orig] = alpha[k];
            }
            (local_hubs.iter().map(|&h| map[h]).collect(), scores)
        }
        None => (local_hubs, alpha),
    };
    Ok(BaselineResult {
        hubs,
        scores,
        screened,
    })
}
