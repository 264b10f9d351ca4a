use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;

use super::input::{read_table, with_output, write_json, InputFingerprint, RunManifest, Table};
use super::{
    CliError, DetectArgs, EstimatorArgs, EstimatorChoice, GenerateArgs, InputArgs, PreprocessOrder,
    RecordFormat, ScreeArgs, SimulateArgs,
};
use crate::estimators::{DataMatrix, Mask, ThresholdRule};
use crate::ipchd::{self, auto_rho, eigenvalue_ratios, IpchdConfig, Rho, SModeUsed};
use crate::matrix::symmetric_eigen;
use crate::metrics::{
    run_grid_with_threads, summarize, write_records_csv, write_records_jsonl, write_summary_csv,
    GridSpec,
};
use crate::pipeline::{estimate, EstimatorKind};
use crate::preprocess::{log_shift, residualize, top_variance_indices};
use crate::simgen::{generate_precision, sample_gaussian, SimConfig};

/// Preprocessed data and the input column behind each of its columns.
struct Prepared {
    table: Table,
    x: DataMatrix,
    columns: Vec<usize>,
}

fn prepare(args: &InputArgs) -> Result<Prepared, CliError> {
    let table = read_table(&args.input, !args.no_header)?;
    if table.p() < 2 {
        return Err(CliError::Usage(format!(
            "{}: need at least 2 columns, found {}",
            args.input.display(),
            table.p()
        )));
    }
    let mut cov_cols = Vec::new();
    for key in &args.covariates {
        let c = table.column_index(key)?;
        if !cov_cols.contains(&c) {
            cov_cols.push(c);
        }
    }
    let mut columns: Vec<usize> = (0..table.p()).filter(|c| !cov_cols.contains(c)).collect();
    let covariates = (!cov_cols.is_empty()).then(|| {
        DMatrix::from_fn(table.n(), cov_cols.len(), |i, k| {
            table.values[(i, cov_cols[k])]
        })
    });

    let mut x = table.data(&columns)?;
    let select = |x: &mut DataMatrix, columns: &mut Vec<usize>| -> Result<(), CliError> {
        if let Some(k) = args.top_variance {
            let keep = top_variance_indices(x, k)
                .map_err(|e| CliError::Usage(format!("--top-variance: {e}")))?;
            *x = x
                .select_columns(&keep)
                .map_err(|e| CliError::hub("top-variance selection", e))?;
            *columns = keep.iter().map(|&k| columns[k]).collect();
        }
        Ok(())
    };
    let transform = |x: &mut DataMatrix| -> Result<(), CliError> {
        if args.log_shift || args.log_shift_const.is_some() {
            *x = log_shift(x, args.log_shift_const)
                .map_err(|e| CliError::Usage(format!("--log-shift: {e}")))?;
        }
        if let Some(z) = &covariates {
            *x = residualize(x, z).map_err(|e| CliError::hub("covariate residualization", e))?;
        }
        Ok(())
    };
    match args.preprocess_order {
        PreprocessOrder::TransformFirst => {
            transform(&mut x)?;
            select(&mut x, &mut columns)?;
        }
        PreprocessOrder::SelectFirst => {
            select(&mut x, &mut columns)?;
            transform(&mut x)?;
        }
    }
    if x.n() < 2 || x.p() < 2 {
        return Err(CliError::Usage(format!(
            "need at least 2 observations and 2 variables after preprocessing, have n = {}, p = {}",
            x.n(),
            x.p()
        )));
    }
    Ok(Prepared { table, x, columns })
}

fn estimator_kind(args: &EstimatorArgs, n: usize, p: usize) -> Result<EstimatorKind, CliError> {
    if !(args.xi >= 0.0 && args.xi.is_finite()) {
        return Err(CliError::Usage(format!(
            "--xi must be >= 0, got {}",
            args.xi
        )));
    }
    let rule = if args.signed_threshold {
        ThresholdRule::Signed
    } else {
        ThresholdRule::Absolute
    };
    let choice = args.estimator.unwrap_or(if n > p {
        EstimatorChoice::Sample
    } else {
        EstimatorChoice::Thresholded
    });
    Ok(match choice {
        EstimatorChoice::Sample => EstimatorKind::Sample,
        EstimatorChoice::Thresholded => EstimatorKind::Thresholded { xi: args.xi, rule },
        EstimatorChoice::Screened => {
            let t = args.screen_size.ok_or_else(|| {
                CliError::Usage("--estimator screened requires --screen-size".into())
            })?;
            if t > n {
                return Err(CliError::Usage(format!(
                    "screen size must satisfy T ≤ n (--screen-size {t}, n = {n})"
                )));
            }
            if t < 2 || t > p {
                return Err(CliError::Usage(format!(
                    "--screen-size must lie in 2..={p}, got {t}"
                )));
            }
            EstimatorKind::Screened { t }
        }
        EstimatorChoice::Masked => {
            let path = args
                .mask_file
                .as_deref()
                .ok_or_else(|| CliError::Usage("--estimator masked requires --mask-file".into()))?;
            let table = read_table(path, false)?;
            let rows: Vec<Vec<f64>> = table
                .values
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect();
            let mask = Mask::from_rows(&rows)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            if mask.dim() != p {
                return Err(CliError::Usage(format!(
                    "{}: mask is {d}x{d} but the data have {p} variables",
                    path.display(),
                    d = mask.dim()
                )));
            }
            EstimatorKind::Masked { mask }
        }
    })
}

fn estimator_params(kind: &EstimatorKind, args: &EstimatorArgs) -> serde_json::Value {
    json!({
        "estimator": kind.name(),
        "scale": args.scale,
        "screen_size": match kind { EstimatorKind::Screened { t } => Some(*t), _ => None },
        "xi": matches!(kind, EstimatorKind::Thresholded { .. }).then_some(args.xi),
        "threshold_rule": match kind { EstimatorKind::Thresholded { rule, .. } => Some(*rule), _ => None },
        "mask_file": args.mask_file.as_ref().map(|p| p.display().to_string()),
    })
}

fn input_params(args: &InputArgs) -> serde_json::Value {
    json!({
        "no_header": args.no_header,
        "log_shift": args.log_shift || args.log_shift_const.is_some(),
        "log_shift_const": args.log_shift_const,
        "covariates": args.covariates,
        "top_variance": args.top_variance,
        "preprocess_order": match args.preprocess_order {
            PreprocessOrder::TransformFirst => "transform-first",
            PreprocessOrder::SelectFirst => "select-first",
        },
    })
}

fn merge(mut a: serde_json::Value, b: serde_json::Value) -> serde_json::Value {
    if let (Some(a), serde_json::Value::Object(b)) = (a.as_object_mut(), b) {
        a.extend(b);
    }
    a
}

#[derive(Serialize)]
struct DetectDocument {
    manifest: RunManifest,
    p: usize,
    n: usize,
    estimator: &'static str,
    s_hat: usize,
    s_mode_used: SModeUsed,
    fallback: bool,
    rho_used: f64,
    kappa_used: f64,
    eigenvalues: Vec<f64>,
    ratios: Vec<f64>,
    influence: Vec<f64>,
    hubs: Vec<usize>,
    original_indices: Option<Vec<usize>>,
    variable_names: Option<Vec<String>>,
}

pub fn detect(args: &DetectArgs, command: &[String]) -> Result<(), CliError> {
    let cfg = IpchdConfig {
        rho: args.rho,
        kappa: args.kappa,
        s_mode: args.s_mode,
        ratio_factor: args.ratio_factor,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let prep = prepare(&args.input)?;
    let (n, p) = (prep.x.n(), prep.x.p());
    cfg.validate_for_dim(p)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let kind = estimator_kind(&args.estimator, n, p)?;

    let est = estimate(&prep.x, &kind, args.estimator.scale)
        .map_err(|e| CliError::hub("covariance estimation", e))?;
    let res = ipchd::detect(&est.matrix, &cfg).map_err(|e| CliError::hub("hub detection", e))?;

    let positions: Vec<usize> = match &est.original_indices {
        Some(map) => map.iter().map(|&k| prep.columns[k]).collect(),
        None => prep.columns.clone(),
    };
    let identity =
        positions.len() == prep.table.p() && positions.iter().enumerate().all(|(i, &c)| i == c);
    let hubs = res.hubs.iter().map(|&h| positions[h]).collect();

    let params = merge(
        merge(
            input_params(&args.input),
            estimator_params(&kind, &args.estimator),
        ),
        json!({
            "rho": args.rho.to_string(),
            "rho_used": res.rho_used,
            "kappa": args.kappa.to_string(),
            "kappa_used": res.kappa_used,
            "s_mode": args.s_mode.to_string(),
            "ratio_factor": args.ratio_factor,
        }),
    );
    let doc = DetectDocument {
        manifest: RunManifest::new(command, params, Some(InputFingerprint::of(&prep.table))),
        p,
        n,
        estimator: kind.name(),
        s_hat: res.s_hat,
        s_mode_used: res.s_mode_used,
        fallback: res.fallback,
        rho_used: res.rho_used,
        kappa_used: res.kappa_used,
        eigenvalues: res.eigenvalues,
        ratios: res.ratios,
        influence: res.influence,
        hubs,
        original_indices: (!identity).then_some(positions),
        variable_names: prep.table.names.clone(),
    };
    write_json(args.output.as_deref(), &doc)
}

pub fn scree(args: &ScreeArgs, command: &[String]) -> Result<(), CliError> {
    if let Rho::Fixed(v) = args.rho {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(CliError::Usage(format!("--rho must be >= 0, got {v}")));
        }
    }
    let prep = prepare(&args.input)?;
    let (n, p) = (prep.x.n(), prep.x.p());
    let kind = estimator_kind(&args.estimator, n, p)?;
    let est = estimate(&prep.x, &kind, args.estimator.scale)
        .map_err(|e| CliError::hub("covariance estimation", e))?;
    let eig = symmetric_eigen(&est.matrix).map_err(|e| CliError::hub("eigendecomposition", e))?;
    let gammas = eig.eigenvalues();
    let rho = match args.rho {
        Rho::Auto => auto_rho(gammas),
        Rho::Fixed(v) => v,
    };
    let ratios =
        eigenvalue_ratios(gammas, rho).map_err(|e| CliError::hub("eigenvalue ratios", e))?;

    if let Some(path) = &args.manifest {
        let params = merge(
            merge(
                input_params(&args.input),
                estimator_params(&kind, &args.estimator),
            ),
            json!({ "rho": args.rho.to_string(), "rho_used": rho }),
        );
        let manifest = RunManifest::new(command, params, Some(InputFingerprint::of(&prep.table)));
        write_json(Some(path), &manifest)?;
    }
    with_output(args.output.as_deref(), |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["i", "gamma_desc", "delta_rho"])?;
        for (i, g) in gammas.iter().enumerate() {
            let ratio = ratios.get(i).map(f64::to_string).unwrap_or_default();
            csv.write_record([(i + 1).to_string(), g.to_string(), ratio])?;
        }
        csv.flush()
    })
}

fn grid_from_args(args: &SimulateArgs) -> Result<GridSpec, CliError> {
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        return serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())));
    }
    Ok(GridSpec {
        p_values: args.p.clone(),
        t_values: args.t.clone(),
        n_values: args.n.clone(),
        delta_values: args.delta.clone(),
        strengths: args.strength.clone(),
        r: args.r,
        p_nonhub: args.p_nonhub,
        p_nonsignal: args.p_nonsignal,
        replicates: args.replicates,
        methods: args.methods.clone(),
        base_seed: args.seed,
        xi: args.xi,
        screen_t: args.screen_size,
        s_mode: args.s_mode.into(),
    })
}

pub fn simulate(args: &SimulateArgs, command: &[String]) -> Result<(), CliError> {
    let spec = grid_from_args(args)?;
    spec.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut records = run_grid_with_threads(&spec, args.threads, |cell, total| {
        eprintln!("cell {}/{total} done", cell + 1);
    })
    .map_err(|e| CliError::hub("simulation grid", e))?;
    if !args.timing {
        for r in &mut records {
            r.wall_time_ms = 0.0;
        }
    }
    if let Some(path) = &args.manifest {
        let params = serde_json::to_value(&spec).expect("grid spec serializes");
        write_json(Some(path), &RunManifest::new(command, params, None))?;
    }
    with_output(args.output.as_deref(), |w| match args.format {
        RecordFormat::Csv => write_records_csv(&records, w),
        RecordFormat::Jsonl => write_records_jsonl(&records, w),
    })?;
    if let Some(path) = &args.summary {
        let rows = summarize(&records);
        with_output(Some(path), |w| write_summary_csv(&rows, w))?;
    }
    let errors = records.iter().filter(|r| r.error.is_some()).count();
    eprintln!("{} records, {errors} with errors", records.len());
    Ok(())
}

pub fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    let cfg = SimConfig {
        p: args.p,
        t: args.t.unwrap_or(args.p),
        r: args.r,
        p_hub: args.p_hub.unwrap_or(args.strength.p_hub()),
        p_nonhub: args.p_nonhub,
        p_nonsignal: args.p_nonsignal,
        delta: args.delta,
        weight_low: args.weight_low,
        weight_high: args.weight_high,
        seed: args.seed,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if args.n == Some(0) {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let model = generate_precision(&cfg).map_err(|e| CliError::hub("model generation", e))?;
    write_json(args.output.as_deref(), &model.to_document())?;
    if let (Some(n), Some(path)) = (args.n, args.data_output.as_deref()) {
        let x = sample_gaussian(&model, n, cfg.seed, args.standardized)
            .map_err(|e| CliError::hub("sampling", e))?;
        write_data_csv(path, &x)?;
    }
    Ok(())
}

fn write_data_csv(path: &Path, x: &DataMatrix) -> Result<(), CliError> {
    with_output(Some(path), |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record((1..=x.p()).map(|j| format!("X{j}")))?;
        for i in 0..x.n() {
            csv.write_record((0..x.p()).map(|j| x.get(i, j).to_string()))?;
        }
        csv.flush()
    })
}
