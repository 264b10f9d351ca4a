//! Hub-recovery scoring and the replicated simulation grid.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HubError, Result};
use crate::estimators::DataMatrix;
use crate::ipchd::{raw_inverse_baseline, IpchdConfig, Kappa, Rho, SMode, DEFAULT_RATIO_FACTOR};
use crate::pipeline::{detect_data, EstimatorKind, Scale};
use crate::simgen::{generate_precision, sample_gaussian, SimConfig};

/// Threshold multiplier used by the thresholded method unless overridden.
pub const DEFAULT_GRID_XI: f64 = 0.75;

/// Fraction of true hubs recovered.
pub fn tpr(true_hubs: &[usize], est_hubs: &[usize]) -> Result<f64> {
    if true_hubs.is_empty() {
        return Err(HubError::EmptyTruth);
    }
    let hits = est_hubs.iter().filter(|h| true_hubs.contains(h)).count();
    Ok(hits as f64 / true_hubs.len() as f64)
}

/// Fraction of non-hubs flagged as hubs.
pub fn fpr(true_hubs: &[usize], est_hubs: &[usize], p: usize) -> Result<f64> {
    let non_hubs = p.saturating_sub(true_hubs.len());
    if non_hubs == 0 {
        return Err(HubError::NoNonHubs);
    }
    let false_hits = est_hubs.iter().filter(|h| !true_hubs.contains(h)).count();
    Ok(false_hits as f64 / non_hubs as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    IpchdSample,
    IpchdScreened,
    IpchdThresholded,
    RawInverse,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::IpchdSample,
        Method::IpchdScreened,
        Method::IpchdThresholded,
        Method::RawInverse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::IpchdSample => "ipchd_sample",
            Method::IpchdScreened => "ipchd_screened",
            Method::IpchdThresholded => "ipchd_thresholded",
            Method::RawInverse => "raw_inverse",
        }
    }

    pub fn is_ipchd(self) -> bool {
        self != Method::RawInverse
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = HubError;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| HubError::InvalidConfig(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HubStrength {
    Weak,
    Strong,
}

impl HubStrength {
    pub fn p_hub(self) -> f64 {
        match self {
            HubStrength::Weak => 0.4,
            HubStrength::Strong => 0.8,
        }
    }
}

impl FromStr for HubStrength {
    type Err = HubError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weak" => Ok(HubStrength::Weak),
            "strong" => Ok(HubStrength::Strong),
            _ => Err(HubError::InvalidConfig(format!(
                "hub strength must be 'weak' or 'strong', got '{s}'"
            ))),
        }
    }
}

/// A size given either absolutely or as a fraction of `p` (`"0.25p"`, `"p"`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeSpec {
    Absolute(usize),
    FractionOfP(f64),
}

impl SizeSpec {
    pub fn resolve(self, p: usize) -> usize {
        match self {
            SizeSpec::Absolute(v) => v,
            SizeSpec::FractionOfP(f) => (f * p as f64).round() as usize,
        }
    }
}

impl FromStr for SizeSpec {
    type Err = HubError;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            HubError::InvalidConfig(format!(
                "size must be an integer, 'p' or '<fraction>p', got '{s}'"
            ))
        };
        if let Some(frac) = s.strip_suffix('p') {
            let f = if frac.is_empty() {
                1.0
            } else {
                frac.parse::<f64>().map_err(|_| bad())?
            };
            if !(f > 0.0 && f.is_finite()) {
                return Err(bad());
            }
            return Ok(SizeSpec::FractionOfP(f));
        }
        s.parse::<usize>()
            .map(SizeSpec::Absolute)
            .map_err(|_| bad())
    }
}

/// Full factorial simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub p_values: Vec<usize>,
    pub t_values: Vec<SizeSpec>,
    pub n_values: Vec<SizeSpec>,
    pub delta_values: Vec<f64>,
    pub strengths: Vec<HubStrength>,
    pub r: usize,
    pub p_nonhub: f64,
    pub p_nonsignal: f64,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub base_seed: u64,
    /// Threshold multiplier for `ipchd_thresholded`.
    pub xi: f64,
    /// Screen size for `ipchd_screened`; defaults to `min(n, p)`.
    pub screen_t: Option<usize>,
    pub s_mode: SModeSpec,
}

/// Serializable stand-in for [`SMode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SModeSpec {
    DataDriven,
    OverEstimated,
}

impl From<SModeSpec> for SMode {
    fn from(s: SModeSpec) -> Self {
        match s {
            SModeSpec::DataDriven => SMode::DataDriven,
            SModeSpec::OverEstimated => SMode::OverEstimated,
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            p_values: vec![100],
            t_values: vec![SizeSpec::FractionOfP(1.0)],
            n_values: vec![SizeSpec::FractionOfP(1.0)],
            delta_values: vec![5.0],
            strengths: vec![HubStrength::Strong],
            r: 5,
            p_nonhub: 0.05,
            p_nonsignal: 0.005,
            replicates: 50,
            methods: vec![Method::IpchdThresholded],
            base_seed: 0,
            xi: DEFAULT_GRID_XI,
            screen_t: None,
            s_mode: SModeSpec::DataDriven,
        }
    }
}

/// One resolved design point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub p: usize,
    pub t: usize,
    pub r: usize,
    pub n: usize,
    pub delta: f64,
    pub p_hub: f64,
    pub p_nonhub: f64,
    pub p_nonsignal: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HubError::InvalidConfig(m.into()));
        if self.p_values.is_empty()
            || self.t_values.is_empty()
            || self.n_values.is_empty()
            || self.delta_values.is_empty()
            || self.strengths.is_empty()
            || self.methods.is_empty()
        {
            return bad("every grid value list must be non-empty");
        }
        if self.replicates < 1 {
            return bad("replicates must be at least 1");
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return bad("xi must be >= 0");
        }
        for cell in self.cells() {
            if cell.n < 2 {
                return Err(HubError::InvalidConfig(format!(
                    "cell n = {} is below 2",
                    cell.n
                )));
            }
            self.sim_config(&cell, 0).validate()?;
            if self.methods.contains(&Method::IpchdScreened) {
                let t = self.screen_size(&cell);
                if t < 2 || t > cell.p {
                    return Err(HubError::InvalidConfig(format!(
                        "screen size {t} must lie in 2..={}",
                        cell.p
                    )));
                }
                if t > cell.n {
                    return Err(HubError::InvalidConfig(format!(
                        "screen size must satisfy T <= n (T = {t}, n = {})",
                        cell.n
                    )));
                }
            }
        }
        Ok(())
    }

    /// Design points in `p, t, n, delta, strength` nesting order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &p in &self.p_values {
            for t in &self.t_values {
                for n in &self.n_values {
                    for &delta in &self.delta_values {
                        for strength in &self.strengths {
                            out.push(Cell {
                                index: out.len(),
                                p,
                                t: t.resolve(p),
                                r: self.r,
                                n: n.resolve(p),
                                delta,
                                p_hub: strength.p_hub(),
                                p_nonhub: self.p_nonhub,
                                p_nonsignal: self.p_nonsignal,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn screen_size(&self, cell: &Cell) -> usize {
        self.screen_t.unwrap_or(cell.n.min(cell.p))
    }

    pub fn sim_config(&self, cell: &Cell, seed: u64) -> SimConfig {
        SimConfig {
            p: cell.p,
            t: cell.t,
            r: cell.r,
            p_hub: cell.p_hub,
            p_nonhub: cell.p_nonhub,
            p_nonsignal: cell.p_nonsignal,
            delta: cell.delta,
            weight_low: 4.0,
            weight_high: 5.0,
            seed,
        }
    }

    fn ipchd_config(&self) -> IpchdConfig {
        IpchdConfig {
            rho: Rho::Auto,
            kappa: Kappa::Auto2Sd,
            s_mode: self.s_mode.into(),
            ratio_factor: DEFAULT_RATIO_FACTOR,
        }
    }
}

/// Seed of one replicate within one cell.
pub fn replicate_seed(base_seed: u64, cell: usize, replicate: usize) -> u64 {
    let mut h = splitmix64(base_seed);
    h = splitmix64(h ^ cell as u64);
    splitmix64(h ^ replicate as u64)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Outcome of one method on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub p: usize,
    pub t: usize,
    pub r: usize,
    pub n: usize,
    pub delta: f64,
    pub p_hub: f64,
    pub p_nonhub: f64,
    pub p_nonsignal: f64,
    pub method: Method,
    pub replicate: usize,
    pub seed: u64,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub wall_time_ms: f64,
    pub s_hat: Option<usize>,
    pub fallback: bool,
    pub error: Option<String>,
    #[serde(skip)]
    pub cell: usize,
}

impl ExperimentRecord {
    fn blank(cell: &Cell, method: Method, replicate: usize, seed: u64) -> Self {
        Self {
            p: cell.p,
            t: cell.t,
            r: cell.r,
            n: cell.n,
            delta: cell.delta,
            p_hub: cell.p_hub,
            p_nonhub: cell.p_nonhub,
            p_nonsignal: cell.p_nonsignal,
            method,
            replicate,
            seed,
            tpr: None,
            fpr: None,
            wall_time_ms: 0.0,
            s_hat: None,
            fallback: false,
            error: None,
            cell: cell.index,
        }
    }
}

struct MethodOutcome {
    hubs: Vec<usize>,
    s_hat: Option<usize>,
    fallback: bool,
}

fn run_method(
    spec: &GridSpec,
    cell: &Cell,
    method: Method,
    x: &DataMatrix,
) -> Result<MethodOutcome> {
    let cfg = spec.ipchd_config();
    let kind = match method {
        Method::IpchdSample => EstimatorKind::Sample,
        Method::IpchdScreened => EstimatorKind::Screened {
            t: spec.screen_size(cell),
        },
        Method::IpchdThresholded => EstimatorKind::Thresholded {
            xi: spec.xi,
            rule: Default::default(),
        },
        Method::RawInverse => {
            let screen = (cell.p >= cell.n).then(|| (cell.n / 2).min(cell.p));
            let res = raw_inverse_baseline(x, screen)?;
            return Ok(MethodOutcome {
                hubs: res.hubs,
                s_hat: None,
                fallback: false,
            });
        }
    };
    let res = detect_data(x, &kind, Scale::Correlation, &cfg)?;
    Ok(MethodOutcome {
        hubs: res.hubs_original(),
        s_hat: Some(res.s_hat),
        fallback: res.fallback,
    })
}

fn run_replicate(spec: &GridSpec, cell: &Cell, replicate: usize) -> Vec<ExperimentRecord> {
    let seed = replicate_seed(spec.base_seed, cell.index, replicate);
    let data = generate_precision(&spec.sim_config(cell, seed))
        .and_then(|model| sample_gaussian(&model, cell.n, seed, true).map(|x| (model, x)));
    spec.methods
        .iter()
        .map(|&method| {
            let mut rec = ExperimentRecord::blank(cell, method, replicate, seed);
            let (model, x) = match &data {
                Ok(d) => d,
                Err(e) => {
                    rec.error = Some(format!("data generation: {e}"));
                    return rec;
                }
            };
            let start = Instant::now();
            let outcome = run_method(spec, cell, method, x);
            rec.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            match outcome.and_then(|o| {
                let t = tpr(&model.hub_set, &o.hubs)?;
                let f = fpr(&model.hub_set, &o.hubs, cell.p)?;
                Ok((o, t, f))
            }) {
                Ok((o, t, f)) => {
                    rec.tpr = Some(t);
                    rec.fpr = Some(f);
                    rec.s_hat = o.s_hat;
                    rec.fallback = o.fallback;
                }
                Err(e) => rec.error = Some(e.to_string()),
            }
            rec
        })
        .collect()
}

/// Runs every (cell, method, replicate) combination.
///
/// Records come back sorted by cell, method and replicate regardless of
/// how the work was scheduled. Failures are embedded as error records.
pub fn run_grid(spec: &GridSpec) -> Result<Vec<ExperimentRecord>> {
    run_grid_with_progress(spec, |_, _| {})
}

/// [`run_grid`] with a callback invoked after each cell completes
/// (`cell index`, `cell count`).
pub fn run_grid_with_progress(
    spec: &GridSpec,
    progress: impl Fn(usize, usize) + Sync,
) -> Result<Vec<ExperimentRecord>> {
    spec.validate()?;
    let cells = spec.cells();
    let mut records: Vec<ExperimentRecord> = Vec::new();
    for cell in &cells {
        let batch: Vec<ExperimentRecord> = (0..spec.replicates)
            .into_par_iter()
            .flat_map_iter(|rep| run_replicate(spec, cell, rep))
            .collect();
        records.extend(batch);
        progress(cell.index, cells.len());
    }
    records.sort_by_key(|r| (r.cell, r.method, r.replicate));
    Ok(records)
}

/// [`run_grid`] on a dedicated pool of `threads` workers (0 = rayon default).
pub fn run_grid_with_threads(
    spec: &GridSpec,
    threads: usize,
    progress: impl Fn(usize, usize) + Sync + Send,
) -> Result<Vec<ExperimentRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HubError::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| run_grid_with_progress(spec, progress))
}

pub const RECORD_COLUMNS: [&str; 17] = [
    "p",
    "t",
    "r",
    "n",
    "delta",
    "p_hub",
    "p_nonhub",
    "p_nonsignal",
    "method",
    "replicate",
    "seed",
    "tpr",
    "fpr",
    "wall_time_ms",
    "s_hat",
    "fallback",
    "error",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

/// Writes records as CSV with the fixed column set.
pub fn write_records_csv<W: Write>(records: &[ExperimentRecord], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record([
            r.p.to_string(),
            r.t.to_string(),
            r.r.to_string(),
            r.n.to_string(),
            r.delta.to_string(),
            r.p_hub.to_string(),
            r.p_nonhub.to_string(),
            r.p_nonsignal.to_string(),
            r.method.to_string(),
            r.replicate.to_string(),
            r.seed.to_string(),
            opt(&r.tpr),
            opt(&r.fpr),
            r.wall_time_ms.to_string(),
            opt(&r.s_hat),
            r.fallback.to_string(),
            opt(&r.error),
        ])?;
    }
    w.flush()
}

/// Writes one JSON object per line.
pub fn write_records_jsonl<W: Write>(
    records: &[ExperimentRecord],
    mut out: W,
) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Mean and sample standard deviation (0 for a single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Self { mean, sd })
    }
}

/// One aggregated (cell, method) row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub p: usize,
    pub t: usize,
    pub r: usize,
    pub n: usize,
    pub delta: f64,
    pub p_hub: f64,
    pub p_nonhub: f64,
    pub p_nonsignal: f64,
    pub method: Method,
    pub replicates: usize,
    pub errors: usize,
    pub tpr: Option<Moments>,
    pub fpr: Option<Moments>,
    pub wall_time_ms: Option<Moments>,
}

/// Groups records by (cell, method); error records count towards `errors` only.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, Method), Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.cell, r.method)).or_default().push(r);
    }
    groups
        .into_values()
        .map(|recs| {
            let first = recs[0];
            let ok: Vec<&&ExperimentRecord> = recs.iter().filter(|r| r.error.is_none()).collect();
            let collect = |f: &dyn Fn(&ExperimentRecord) -> Option<f64>| {
                Moments::of(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
            };
            SummaryRow {
                p: first.p,
                t: first.t,
                r: first.r,
                n: first.n,
                delta: first.delta,
                p_hub: first.p_hub,
                p_nonhub: first.p_nonhub,
                p_nonsignal: first.p_nonsignal,
                method: first.method,
                replicates: recs.len(),
                errors: recs.len() - ok.len(),
                tpr: collect(&|r| r.tpr),
                fpr: collect(&|r| r.fpr),
                wall_time_ms: collect(&|r| Some(r.wall_time_ms)),
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "p",
        "t",
        "r",
        "n",
        "delta",
        "p_hub",
        "p_nonhub",
        "p_nonsignal",
        "method",
        "replicates",
        "errors",
        "tpr_mean",
        "tpr_sd",
        "fpr_mean",
        "fpr_sd",
        "wall_time_ms_mean",
        "wall_time_ms_sd",
    ])?;
    let m = |v: &Option<Moments>| {
        v.map_or((String::new(), String::new()), |m| {
            (m.mean.to_string(), m.sd.to_string())
        })
    };
    for row in rows {
        let (tm, ts) = m(&row.tpr);
        let (fm, fs) = m(&row.fpr);
        let (wm, ws) = m(&row.wall_time_ms);
        w.write_record([
            row.p.to_string(),
            row.t.to_string(),
            row.r.to_string(),
            row.n.to_string(),
            row.delta.to_string(),
            row.p_hub.to_string(),
            row.p_nonhub.to_string(),
            row.p_nonsignal.to_string(),
            row.method.to_string(),
            row.replicates.to_string(),
            row.errors.to_string(),
            tm,
            ts,
            fm,
            fs,
            wm,
            ws,
        ])?;
    }
    w.flush()
}
