//! Synthetic precision matrices with planted hubs, and Gaussian sampling from them.
//!
//! The precision matrix has a `t x t` signal block in the leading variables
//! holding `r` hubs, sparse non-signal blocks elsewhere, and a constant
//! diagonal shifted so that its smallest eigenvalue equals `delta`.
//!
//! Every random stage (hub choice, adjacency, weights, sampling) draws from
//! its own ChaCha stream keyed by the seed, so changing the sample size never
//! perturbs the generated matrix.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{HubError, Result};
use crate::estimators::DataMatrix;
use crate::ipchd::weighted_degree;
use crate::matrix::{cholesky, cov_to_corr, invert_spd, symmetric_eigen, SymmetricMatrix};

const STREAM_HUBS: u64 = 1;
const STREAM_ADJACENCY: u64 = 2;
const STREAM_WEIGHTS: u64 = 3;
const STREAM_SAMPLES: u64 = 4;

const MAX_GRAPH_ATTEMPTS: usize = 100;

/// Seeded generator for one stage of the simulation.
pub fn stage_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Parameters of the hub graph generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub p: usize,
    pub t: usize,
    pub r: usize,
    pub p_hub: f64,
    pub p_nonhub: f64,
    pub p_nonsignal: f64,
    pub delta: f64,
    #[serde(default = "default_weight_low")]
    pub weight_low: f64,
    #[serde(default = "default_weight_high")]
    pub weight_high: f64,
    pub seed: u64,
}

fn default_weight_low() -> f64 {
    4.0
}

fn default_weight_high() -> f64 {
    5.0
}

impl SimConfig {
    /// Strong-hub preset: `p_hub = 0.8`, `p_nonhub = 0.05`, `p_nonsignal = 0.005`.
    pub fn strong(p: usize, t: usize, r: usize, delta: f64, seed: u64) -> Self {
        Self {
            p,
            t,
            r,
            p_hub: 0.8,
            p_nonhub: 0.05,
            p_nonsignal: 0.005,
            delta,
            weight_low: default_weight_low(),
            weight_high: default_weight_high(),
            seed,
        }
    }

    /// Weak-hub preset: `p_hub = 0.4`, otherwise as [`SimConfig::strong`].
    pub fn weak(p: usize, t: usize, r: usize, delta: f64, seed: u64) -> Self {
        Self {
            p_hub: 0.4,
            ..Self::strong(p, t, r, delta, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HubError::InvalidConfig(msg));
        if self.p < 2 {
            return bad(format!("p must be at least 2, got {}", self.p));
        }
        if !(1 <= self.r && self.r <= self.t && self.t <= self.p) {
            return bad(format!(
                "need 1 <= r <= t <= p, got r = {}, t = {}, p = {}",
                self.r, self.t, self.p
            ));
        }
        if self.r >= self.p {
            return bad("r must be smaller than p so that non-hubs exist".into());
        }
        let probs_ok = 0.0 <= self.p_nonsignal
            && self.p_nonsignal <= self.p_nonhub
            && self.p_nonhub < self.p_hub
            && self.p_hub <= 1.0;
        if !probs_ok {
            return bad(format!(
                "need 0 <= p_nonsignal <= p_nonhub < p_hub <= 1, got p_nonsignal = {}, p_nonhub = {}, p_hub = {}",
                self.p_nonsignal, self.p_nonhub, self.p_hub
            ));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if !(0.0 < self.weight_low
            && self.weight_low < self.weight_high
            && self.weight_high.is_finite())
        {
            return bad(format!(
                "need 0 < weight_low < weight_high, got {} and {}",
                self.weight_low, self.weight_high
            ));
        }
        Ok(())
    }
}

/// A generated precision matrix together with its derived matrices and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthModel {
    pub config: SimConfig,
    pub theta: SymmetricMatrix,
    pub sigma: SymmetricMatrix,
    pub corr: SymmetricMatrix,
    pub inv_corr: SymmetricMatrix,
    pub hub_set: Vec<usize>,
    /// `min_{h in H} alpha_h / max_{k not in H} alpha_k` on the inverse correlation.
    pub empirical_tau: f64,
    /// `max_{h in H} alpha_h / min_{h in H} alpha_h` on the inverse correlation.
    pub empirical_c: f64,
}

impl GroundTruthModel {
    /// Derives covariance, correlation and inverse correlation from `theta`.
    pub fn from_theta(
        config: SimConfig,
        theta: SymmetricMatrix,
        hub_set: Vec<usize>,
    ) -> Result<Self> {
        if theta.dim() != config.p {
            return Err(HubError::DimensionMismatch {
                expected: config.p,
                actual: theta.dim(),
            });
        }
        let sigma = invert_spd(&theta)?;
        let corr = cov_to_corr(&sigma)?;
        let inv_corr = invert_spd(&corr)?;
        let (empirical_tau, empirical_c) = separation(&weighted_degree(&inv_corr), &hub_set);
        Ok(Self {
            config,
            theta,
            sigma,
            corr,
            inv_corr,
            hub_set,
            empirical_tau,
            empirical_c,
        })
    }

    pub fn p(&self) -> usize {
        self.theta.dim()
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            config: self.config.clone(),
            theta: self.theta.to_rows(),
            hub_set: self.hub_set.clone(),
            empirical_tau: self.empirical_tau,
            empirical_c: self.empirical_c,
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let theta = SymmetricMatrix::from_rows(&doc.theta)?;
        Self::from_theta(doc.config.clone(), theta, doc.hub_set.clone())
    }
}

/// Serialized form of a [`GroundTruthModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub config: SimConfig,
    /// Dense matrix, one array per row.
    pub theta: Vec<Vec<f64>>,
    pub hub_set: Vec<usize>,
    pub empirical_tau: f64,
    pub empirical_c: f64,
}

/// Hub/non-hub separation `(tau, c)` of a connectivity vector.
pub fn separation(alpha: &[f64], hubs: &[usize]) -> (f64, f64) {
    let mut is_hub = vec![false; alpha.len()];
    for &h in hubs {
        is_hub[h] = true;
    }
    let hub_vals = hubs.iter().map(|&h| alpha[h]);
    let hub_min = hub_vals.clone().fold(f64::INFINITY, f64::min);
    let hub_max = hub_vals.fold(f64::NEG_INFINITY, f64::max);
    let other_max = alpha
        .iter()
        .zip(&is_hub)
        .filter(|(_, &h)| !h)
        .map(|(&a, _)| a)
        .fold(f64::NEG_INFINITY, f64::max);
    (hub_min / other_max, hub_max / hub_min)
}

/// Builds a precision matrix with planted hubs.
pub fn generate_precision(cfg: &SimConfig) -> Result<GroundTruthModel> {
    cfg.validate()?;
    let (p, t) = (cfg.p, cfg.t);

    let mut hub_rng = stage_rng(cfg.seed, STREAM_HUBS);
    let mut hub_set = index::sample(&mut hub_rng, t, cfg.r).into_vec();
    hub_set.sort_unstable();
    let mut is_hub = vec![false; p];
    for &h in &hub_set {
        is_hub[h] = true;
    }

    let edge_probability = |i: usize, j: usize| {
        if i < t && j < t {
            if is_hub[i] || is_hub[j] {
                cfg.p_hub
            } else {
                cfg.p_nonhub
            }
        } else {
            cfg.p_nonsignal
        }
    };

    let mut adj_rng = stage_rng(cfg.seed, STREAM_ADJACENCY);
    let mut adjacency = vec![false; p * p];
    let mut attempts = 0;
    loop {
        attempts += 1;
        let mut any = false;
        for i in 0..p {
            for j in (i + 1)..p {
                let connected = adj_rng.random::<f64>() < edge_probability(i, j);
                adjacency[i * p + j] = connected;
                any |= connected;
            }
        }
        if any {
            break;
        }
        if attempts >= MAX_GRAPH_ATTEMPTS {
            return Err(HubError::DegenerateGraph { attempts });
        }
    }

    let mut weight_rng = stage_rng(cfg.seed, STREAM_WEIGHTS);
    let mut off_diagonal = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            let sign = if weight_rng.random::<bool>() {
                1.0
            } else {
                -1.0
            };
            let magnitude = weight_rng.random_range(cfg.weight_low..=cfg.weight_high);
            if adjacency[i * p + j] {
                off_diagonal[(i, j)] = sign * magnitude;
                off_diagonal[(j, i)] = sign * magnitude;
            }
        }
    }

    let unshifted = SymmetricMatrix::from_dmatrix(off_diagonal.clone())?;
    let lambda_min = *symmetric_eigen(&unshifted)?
        .eigenvalues()
        .last()
        .expect("p >= 2");
    let diagonal = cfg.delta - lambda_min;
    for i in 0..p {
        off_diagonal[(i, i)] = diagonal;
    }
    let theta = SymmetricMatrix::from_dmatrix(off_diagonal)?;
    GroundTruthModel::from_theta(cfg.clone(), theta, hub_set)
}

/// Draws `n` i.i.d. rows from `N(0, Θ⁻¹)` (or `N(0, R)` when `use_correlation`).
///
/// With `Θ = L Lᵀ`, each row solves `Lᵀ x = z` for a standard normal `z`.
pub fn sample_gaussian(
    model: &GroundTruthModel,
    n: usize,
    seed: u64,
    use_correlation: bool,
) -> Result<DataMatrix> {
    if n < 1 {
        return Err(HubError::InvalidSize(
            "sample size must be at least 1".into(),
        ));
    }
    let precision = if use_correlation {
        &model.inv_corr
    } else {
        &model.theta
    };
    let l = cholesky(precision)?;
    let p = precision.dim();
    let mut rng = stage_rng(seed, STREAM_SAMPLES);
    let mut values = DMatrix::<f64>::zeros(n, p);
    let mut z = vec![0.0; p];
    for row in 0..n {
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let x = l.solve_upper_transpose(&z);
        for (col, v) in x.into_iter().enumerate() {
            values[(row, col)] = v;
        }
    }
    DataMatrix::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SimConfig {
        SimConfig::strong(20, 20, 2, 2.0, seed)
    }

    #[test]
    fn validation_rejects_bad_orderings() {
        let mut c = small(0);
        c.p_hub = 0.3;
        c.p_nonhub = 0.4;
        assert!(matches!(c.validate(), Err(HubError::InvalidConfig(_))));
        let mut c = small(0);
        c.r = 0;
        assert!(c.validate().is_err());
        let mut c = small(0);
        c.t = 21;
        assert!(c.validate().is_err());
        let mut c = small(0);
        c.delta = 0.0;
        assert!(c.validate().is_err());
        let mut c = small(0);
        c.weight_low = 5.0;
        assert!(c.validate().is_err());
        let mut c = small(0);
        c.p_nonsignal = 0.06;
        assert!(c.validate().is_err());
    }

    #[test]
    fn forced_structure() {
        let cfg = SimConfig {
            p: 12,
            t: 12,
            r: 2,
            p_hub: 1.0,
            p_nonhub: 0.0,
            p_nonsignal: 0.0,
            delta: 1.0,
            weight_low: 4.0,
            weight_high: 5.0,
            seed: 3,
        };
        let m = generate_precision(&cfg).unwrap();
        assert_eq!(m.hub_set.len(), 2);
        for i in 0..12 {
            for j in 0..12 {
                if i == j {
                    continue;
                }
                let touches_hub = m.hub_set.contains(&i) || m.hub_set.contains(&j);
                let v = m.theta.get(i, j);
                if touches_hub {
                    assert!((4.0..=5.0).contains(&v.abs()), "({i},{j}) = {v}");
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn spectrum_floor_and_constant_diagonal() {
        for seed in 0..5 {
            let m = generate_precision(&small(seed)).unwrap();
            let eig = symmetric_eigen(&m.theta).unwrap();
            assert!((eig.eigenvalues().last().unwrap() - 2.0).abs() < 1e-8);
            let d = m.theta.diagonal();
            assert!(d.iter().all(|&v| v == d[0]));
            assert!(cholesky(&m.theta).is_ok());
            assert!(m.corr.diagonal().iter().all(|&v| v == 1.0));
            assert!(m.empirical_tau > 0.0 && m.empirical_c >= 1.0);
        }
    }

    #[test]
    fn signal_block_layout() {
        let cfg = SimConfig {
            p_nonsignal: 0.0,
            ..SimConfig::strong(30, 10, 2, 5.0, 11)
        };
        let m = generate_precision(&cfg).unwrap();
        assert!(m.hub_set.iter().all(|&h| h < 10));
        for i in 10..30 {
            for j in 0..30 {
                if i != j {
                    assert_eq!(m.theta.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn degenerate_graph_is_reported() {
        let cfg = SimConfig {
            p: 3,
            t: 3,
            r: 1,
            p_hub: 1e-300,
            p_nonhub: 0.0,
            p_nonsignal: 0.0,
            delta: 1.0,
            weight_low: 4.0,
            weight_high: 5.0,
            seed: 1,
        };
        assert_eq!(
            generate_precision(&cfg).unwrap_err(),
            HubError::DegenerateGraph { attempts: 100 }
        );
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_precision(&small(42)).unwrap();
        let b = generate_precision(&small(42)).unwrap();
        assert_eq!(a, b);
        let c = generate_precision(&small(43)).unwrap();
        assert_ne!(a.theta, c.theta);
    }

    #[test]
    fn sampling_shape_and_determinism() {
        let m = generate_precision(&small(1)).unwrap();
        let x = sample_gaussian(&m, 1, 9, false).unwrap();
        assert_eq!((x.n(), x.p()), (1, 20));
        let a = sample_gaussian(&m, 30, 9, true).unwrap();
        let b = sample_gaussian(&m, 30, 9, true).unwrap();
        assert_eq!(a, b);
        let bits = |d: &DataMatrix| d.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert!(sample_gaussian(&m, 0, 9, true).is_err());
    }

    #[test]
    fn document_round_trip() {
        let m = generate_precision(&small(5)).unwrap();
        let json = serde_json::to_string(&m.to_document()).unwrap();
        let doc: ModelDocument = serde_json::from_str(&json).unwrap();
        let back = GroundTruthModel::from_document(&doc).unwrap();
        assert_eq!(back.theta, m.theta);
        assert_eq!(back.hub_set, m.hub_set);
        assert_eq!(back.empirical_tau, m.empirical_tau);
    }

    #[test]
    fn separation_values() {
        let (tau, c) = separation(&[10.0, 1.0, 20.0, 2.0], &[0, 2]);
        assert_eq!(tau, 5.0);
        assert_eq!(c, 2.0);
    }
}
