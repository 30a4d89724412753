//! Result files of an experiment run.
//!
//! `replications.csv` has one row per (k, replication, method, coordinate,
//! level); `summary.csv` aggregates over replications; `histograms.csv` bins
//! the standardized errors. Coordinates are written 1-based. Floats use 17
//! significant digits so every value round-trips exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    coverage_and_width, histogram, standardized_errors, DEFAULT_BINS, DEFAULT_RANGE,
};
use crate::model::{Method, ReplicationRecord};
use crate::stats::{mean, std_dev};

use super::runner::ExperimentResults;
use super::seeds::derive_seed;

pub const REPLICATION_COLUMNS: [&str; 16] = [
    "experiment",
    "name",
    "k",
    "rep",
    "method",
    "coord",
    "estimate",
    "stderr",
    "alpha",
    "ci_lo",
    "ci_hi",
    "covered",
    "scaled_mse",
    "std_err_pivot",
    "sigma_hat",
    "runtime_ms",
];

pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

pub fn write_replications<W: Write>(out: W, results: &ExperimentResults) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPLICATION_COLUMNS)?;
    let cfg = &results.config;
    let name = cfg.generator.kind.as_str();
    for rec in &results.records {
        for o in &rec.outcomes {
            for c in &o.coords {
                let pivot = c.pivot();
                let levels: Vec<Option<_>> = if c.intervals.is_empty() {
                    vec![None]
                } else {
                    c.intervals.iter().map(Some).collect()
                };
                for iv in levels {
                    w.write_record([
                        cfg.name.clone(),
                        name.to_string(),
                        rec.k.to_string(),
                        rec.rep_index.to_string(),
                        o.method.to_string(),
                        (c.coord + 1).to_string(),
                        fmt_float(c.estimate),
                        fmt_opt(c.stderr),
                        fmt_opt(iv.map(|i| i.alpha)),
                        fmt_opt(iv.map(|i| i.lower)),
                        fmt_opt(iv.map(|i| i.upper)),
                        iv.map(|i| u8::from(i.contains(c.truth)).to_string())
                            .unwrap_or_default(),
                        fmt_opt(c.scaled_mse),
                        fmt_opt(pivot),
                        fmt_float(o.sigma_hat),
                        fmt_opt(o.runtime_ms),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One aggregated row of `summary.csv`. Level-dependent fields are empty
/// when the experiment has no `alpha_grid` or the method has no interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub name: String,
    pub k: usize,
    pub method: Method,
    pub coord: usize,
    pub alpha: Option<f64>,
    pub nominal: Option<f64>,
    pub n_reps: usize,
    pub coverage: Option<f64>,
    pub coverage_se: Option<f64>,
    pub mean_width: Option<f64>,
    pub sd_width: Option<f64>,
    pub mean_estimate: f64,
    pub sd_estimate: f64,
    pub mean_scaled_mse: Option<f64>,
    pub sd_scaled_mse: Option<f64>,
    pub mean_pivot: Option<f64>,
    pub sd_pivot: Option<f64>,
    pub ks_distance: Option<f64>,
    pub ks_pvalue: Option<f64>,
}

const SUMMARY_COLUMNS: [&str; 20] = [
    "experiment",
    "name",
    "k",
    "method",
    "coord",
    "alpha",
    "nominal",
    "n_reps",
    "coverage",
    "coverage_se",
    "mean_width",
    "sd_width",
    "mean_estimate",
    "sd_estimate",
    "mean_scaled_mse",
    "sd_scaled_mse",
    "mean_pivot",
    "sd_pivot",
    "ks_distance",
    "ks_pvalue",
];

/// Records grouped by `k`, in increasing `k`.
fn by_k(records: &[ReplicationRecord]) -> Vec<(usize, &[ReplicationRecord])> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=records.len() {
        if i == records.len() || records[i].k != records[start].k {
            groups.push((records[start].k, &records[start..i]));
            start = i;
        }
    }
    groups
}

pub fn summarize(results: &ExperimentResults) -> Result<Vec<SummaryRow>> {
    let cfg = &results.config;
    let mut rows = Vec::new();
    for (k, recs) in by_k(&results.records) {
        for est in &cfg.estimators {
            let method = est.method();
            for coord in cfg.target_coords() {
                let hits: Vec<_> = recs.iter().filter_map(|r| r.coord(method, coord)).collect();
                if hits.is_empty() {
                    continue;
                }
                let estimates: Vec<f64> = hits.iter().map(|c| c.estimate).collect();
                let mses: Vec<f64> = hits.iter().filter_map(|c| c.scaled_mse).collect();
                let std_errs = standardized_errors(recs, method, coord);
                let has_pivot = !std_errs.values.is_empty();
                let moments = |v: &[f64]| {
                    if v.is_empty() {
                        (None, None)
                    } else {
                        (Some(mean(v)), Some(std_dev(v)))
                    }
                };
                let (mean_mse, sd_mse) = moments(&mses);
                let (mean_pivot, sd_pivot) = moments(&std_errs.values);
                let base = SummaryRow {
                    experiment: cfg.name.clone(),
                    name: cfg.generator.kind.as_str().to_string(),
                    k,
                    method,
                    coord: coord + 1,
                    alpha: None,
                    nominal: None,
                    n_reps: hits.len(),
                    coverage: None,
                    coverage_se: None,
                    mean_width: None,
                    sd_width: None,
                    mean_estimate: mean(&estimates),
                    sd_estimate: std_dev(&estimates),
                    mean_scaled_mse: mean_mse,
                    sd_scaled_mse: sd_mse,
                    mean_pivot,
                    sd_pivot,
                    ks_distance: has_pivot.then_some(std_errs.ks.distance),
                    ks_pvalue: has_pivot.then_some(std_errs.ks.p_value),
                };
                let has_intervals = hits.iter().all(|c| !c.intervals.is_empty());
                if cfg.alpha_grid.is_empty() || !has_intervals {
                    rows.push(base);
                    continue;
                }
                for &alpha in &cfg.alpha_grid {
                    let cov = coverage_and_width(recs, method, coord, alpha)?;
                    rows.push(SummaryRow {
                        alpha: Some(alpha),
                        nominal: Some(cov.nominal),
                        coverage: Some(cov.empirical),
                        coverage_se: Some(cov.empirical_se),
                        mean_width: Some(cov.mean_width),
                        sd_width: Some(cov.sd_width),
                        ..base.clone()
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.name.clone(),
            r.k.to_string(),
            r.method.to_string(),
            r.coord.to_string(),
            fmt_opt(r.alpha),
            fmt_opt(r.nominal),
            r.n_reps.to_string(),
            fmt_opt(r.coverage),
            fmt_opt(r.coverage_se),
            fmt_opt(r.mean_width),
            fmt_opt(r.sd_width),
            fmt_float(r.mean_estimate),
            fmt_float(r.sd_estimate),
            fmt_opt(r.mean_scaled_mse),
            fmt_opt(r.sd_scaled_mse),
            fmt_opt(r.mean_pivot),
            fmt_opt(r.sd_pivot),
            fmt_opt(r.ks_distance),
            fmt_opt(r.ks_pvalue),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(SUMMARY_COLUMNS) {
        return Err(Error::Parse(format!(
            "unexpected summary header: {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn write_histograms<W: Write>(out: W, results: &ExperimentResults) -> Result<()> {
    let cfg = &results.config;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "experiment",
        "k",
        "method",
        "coord",
        "bin_lo",
        "bin_hi",
        "count",
    ])?;
    let (lo, hi) = DEFAULT_RANGE;
    for (k, recs) in by_k(&results.records) {
        for est in &cfg.estimators {
            for coord in cfg.target_coords() {
                let values = standardized_errors(recs, est.method(), coord).values;
                if values.is_empty() {
                    continue;
                }
                let h = histogram(&values, DEFAULT_BINS, lo, hi);
                let mut bins = vec![(f64::NEG_INFINITY, lo, h.below)];
                bins.extend(
                    h.edges
                        .windows(2)
                        .zip(&h.counts)
                        .map(|(e, &c)| (e[0], e[1], c)),
                );
                bins.push((hi, f64::INFINITY, h.above));
                for (a, b, count) in bins {
                    w.write_record([
                        cfg.name.clone(),
                        k.to_string(),
                        est.method().to_string(),
                        (coord + 1).to_string(),
                        fmt_float(a),
                        fmt_float(b),
                        count.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn manifest_json(results: &ExperimentResults) -> serde_json::Value {
    let cfg = &results.config;
    let seeds: serde_json::Map<String, serde_json::Value> = cfg
        .k_values()
        .into_iter()
        .map(|k| {
            let s: Vec<u64> = (0..cfg.n_reps)
                .map(|rep| derive_seed(cfg.master_seed, k as u64, rep as u64))
                .collect();
            (k.to_string(), s.into())
        })
        .collect();
    let lambdas: serde_json::Map<String, serde_json::Value> = results
        .lambdas
        .iter()
        .map(|(k, l)| (k.to_string(), (*l).into()))
        .collect();
    serde_json::json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": cfg.name,
        "master_seed": cfg.master_seed,
        "n_reps": cfg.n_reps,
        "k_values": cfg.k_values(),
        "replication_seeds": seeds,
        "calibrated_lambda": lambdas,
        "jobs": results.jobs,
        "wall_time_s": results.wall_time_s,
        "files": ["replications.csv", "summary.csv", "histograms.csv", "config.echo"],
    })
}

/// Write all result files into `dir`, creating it if needed.
pub fn write_outputs(results: &ExperimentResults, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let file = |name: &str| fs::File::create(dir.join(name)).map(std::io::BufWriter::new);
    write_replications(file("replications.csv")?, results)?;
    write_summary(file("summary.csv")?, &summarize(results)?)?;
    write_histograms(file("histograms.csv")?, results)?;
    fs::write(dir.join("config.echo"), results.config.to_toml_string()?)?;
    let manifest = serde_json::to_string_pretty(&manifest_json(results))
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    fs::write(dir.join("manifest.json"), manifest + "\n")?;
    Ok(())
}
