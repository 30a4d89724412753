//! Replication driver.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{
    calibrate_wdecorr_lambda, centered_ols, concentration_ci, default_s0, ols_report,
    tale_estimate, w_decorrelation, SigmaHat, TaleConfig,
};
use crate::generators::generate;
use crate::linalg::center_columns;
use crate::metrics::coordinate_weights;
use crate::model::{
    AdaptiveDataset, CoordOutcome, EstimateReport, Interval, Method, MethodOutcome,
    ReplicationRecord,
};

use super::config::{EstimatorConfig, ExperimentConfig, NoiseMode};
use super::seeds::{derive_seed, CALIBRATION_TAG};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; all available cores when `None`.
    pub jobs: Option<usize>,
    pub quiet: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    /// Sorted by `(k, rep_index)`.
    pub records: Vec<ReplicationRecord>,
    /// Calibrated W-decorrelation regularizer per `k`.
    pub lambdas: BTreeMap<usize, f64>,
    pub jobs: usize,
    pub wall_time_s: f64,
}

/// Run every `(k, replication)` pair of `cfg`. The records do not depend on
/// `opts.jobs`.
pub fn execute(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentResults> {
    cfg.validate()?;
    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        if j == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let jobs = pool.current_num_threads();

    let (records, lambdas) = pool.install(|| -> Result<_> {
        let lambdas = calibrate_lambdas(cfg, opts)?;
        let tasks: Vec<(usize, usize)> = cfg
            .k_values()
            .into_iter()
            .flat_map(|k| (0..cfg.n_reps).map(move |rep| (k, rep)))
            .collect();
        let done = AtomicUsize::new(0);
        let total = tasks.len();
        let step = (total / 10).max(1);
        let records = tasks
            .par_iter()
            .map(|&(k, rep)| {
                let rec = run_replication(cfg, k, rep, lambdas.get(&k).copied());
                let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
                if !opts.quiet && (finished.is_multiple_of(step) || finished == total) {
                    eprintln!("[{}] {finished}/{total} replications", cfg.name);
                }
                rec
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((records, lambdas))
    })?;

    Ok(ExperimentResults {
        config: cfg.clone(),
        records,
        lambdas,
        jobs,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn calibrate_lambdas(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<BTreeMap<usize, f64>> {
    let mut out = BTreeMap::new();
    let draws = cfg.estimators.iter().find_map(|e| match e {
        EstimatorConfig::WDecorrelation {
            lambda: None,
            calibration_draws,
        } => Some(*calibration_draws),
        _ => None,
    });
    let Some(draws) = draws else {
        return Ok(out);
    };
    for k in cfg.k_values() {
        let gen = cfg.generator_config(k, 0)?;
        let seed = derive_seed(cfg.master_seed, k as u64, CALIBRATION_TAG);
        let lambda = calibrate_wdecorr_lambda(&gen, draws, seed)?;
        if !opts.quiet {
            eprintln!("[{}] k = {k}: calibrated lambda = {lambda:.6e}", cfg.name);
        }
        out.insert(k, lambda);
    }
    Ok(out)
}

/// One replication: generate the dataset for `(k, rep)` and run every
/// configured estimator on it.
pub fn run_replication(
    cfg: &ExperimentConfig,
    k: usize,
    rep: usize,
    calibrated_lambda: Option<f64>,
) -> Result<ReplicationRecord> {
    let gen = cfg.generator_config(k, rep)?;
    let ds = generate(&gen)?;
    let truth = &gen.spec.theta_star;
    let sigma = match cfg.noise {
        NoiseMode::Known => SigmaHat::Plugin(gen.spec.sigma),
        NoiseMode::Estimated => SigmaHat::Residual,
    };
    let targets = cfg.target_coords();
    let alphas = &cfg.alpha_grid;

    let mut plain_weights: Option<Vec<f64>> = None;
    let mut centered_weights: Option<Vec<f64>> = None;
    let mut outcomes = Vec::with_capacity(cfg.estimators.len());
    for est in &cfg.estimators {
        let clock = Instant::now();
        let report = run_estimator(est, &ds, &targets, alphas, sigma, calibrated_lambda)?;
        let runtime_ms = cfg
            .record_timing
            .then(|| clock.elapsed().as_secs_f64() * 1e3);

        let weights = if est.method() == Method::CenteredOls {
            lazy_weights(&mut centered_weights, &center_columns(ds.x()), &targets)?
        } else {
            lazy_weights(&mut plain_weights, ds.x(), &targets)?
        };
        let coords = targets
            .iter()
            .zip(weights)
            .filter_map(|(&c, &weight)| {
                let pos = report.position(c)?;
                let estimate = report.estimate[pos];
                let err = estimate - truth[c];
                Some(CoordOutcome {
                    coord: c,
                    truth: truth[c],
                    estimate,
                    stderr: report.stderr.as_ref().map(|s| s[pos]),
                    intervals: report
                        .intervals
                        .iter()
                        .map(|set| Interval {
                            alpha: set.alpha,
                            lower: set.lower[pos],
                            upper: set.upper[pos],
                        })
                        .collect(),
                    scaled_mse: Some(err * err * weight),
                })
            })
            .collect();
        outcomes.push(MethodOutcome {
            method: report.method,
            coords,
            sigma_hat: report.sigma_hat,
            runtime_ms,
        });
    }
    Ok(ReplicationRecord {
        k,
        rep_index: rep,
        outcomes,
    })
}

fn lazy_weights<'a>(
    slot: &'a mut Option<Vec<f64>>,
    x: &nalgebra::DMatrix<f64>,
    targets: &[usize],
) -> Result<&'a Vec<f64>> {
    if slot.is_none() {
        *slot = Some(coordinate_weights(x, targets)?);
    }
    Ok(slot.as_ref().expect("filled above"))
}

fn run_estimator(
    est: &EstimatorConfig,
    ds: &AdaptiveDataset,
    targets: &[usize],
    alphas: &[f64],
    sigma: SigmaHat,
    calibrated_lambda: Option<f64>,
) -> Result<EstimateReport> {
    match est {
        EstimatorConfig::Ols {} => ols_report(ds, alphas, sigma),
        EstimatorConfig::CenteredOls {} => centered_ols(ds, alphas, sigma),
        EstimatorConfig::Tale { s0 } => {
            let cfg = TaleConfig {
                s0: s0.unwrap_or_else(|| default_s0(ds.n())),
                sigma_hat: sigma,
                alpha_levels: alphas.to_vec(),
            };
            Ok(tale_estimate(ds, &cfg)?.to_report())
        }
        EstimatorConfig::ConcentrationCi {} => {
            let mut merged: Option<EstimateReport> = None;
            for &t in targets {
                let r = concentration_ci(ds, t, alphas, sigma)?;
                match merged.as_mut() {
                    None => merged = Some(r),
                    Some(m) => {
                        m.estimate.extend(r.estimate);
                        m.target_idx.extend(r.target_idx);
                        for (dst, src) in m.intervals.iter_mut().zip(r.intervals) {
                            dst.lower.extend(src.lower);
                            dst.upper.extend(src.upper);
                        }
                    }
                }
            }
            merged.ok_or_else(|| Error::InvalidInput("no target coordinates".into()))
        }
        EstimatorConfig::WDecorrelation { lambda, .. } => {
            let lambda = lambda.or(calibrated_lambda).ok_or_else(|| {
                Error::Config("w_decorrelation has neither a fixed nor a calibrated lambda".into())
            })?;
            w_decorrelation(ds, lambda, alphas, sigma)
        }
    }
}
