//! Dataset files: a CSV with header `y,x1,...,xd` and a JSON sidecar
//! `<file>.meta.json` naming the adaptive columns (1-based).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AdaptiveDataset, GenerationMeta};

use super::output::fmt_float;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSidecar {
    /// 1-based adaptive column numbers (column `x1` is 1).
    pub adaptive_cols: Vec<usize>,
    #[serde(default)]
    pub generator: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn write_dataset_csv<W: Write>(out: W, ds: &AdaptiveDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["y".to_string()];
    header.extend((1..=ds.d()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for i in 0..ds.n() {
        let mut row = Vec::with_capacity(ds.d() + 1);
        row.push(fmt_float(ds.y()[i]));
        row.extend(ds.x().row(i).iter().map(|&v| fmt_float(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn sidecar_for(ds: &AdaptiveDataset) -> DatasetSidecar {
    DatasetSidecar {
        adaptive_cols: ds.adaptive_idx().iter().map(|j| j + 1).collect(),
        generator: ds.meta.generator.clone(),
        seed: ds.meta.seed,
        params: ds.meta.params.clone(),
    }
}

/// Write `path` and its sidecar.
pub fn write_dataset(path: &Path, ds: &AdaptiveDataset) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_dataset_csv(std::io::BufWriter::new(fs::File::create(path)?), ds)?;
    let meta = serde_json::to_string_pretty(&sidecar_for(ds))
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    fs::write(sidecar_path(path), meta + "\n")?;
    Ok(())
}

/// Parse the CSV body into `(X, y)`.
pub fn parse_dataset_csv(text: &str) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let d = headers.len().saturating_sub(1);
    if headers.get(0).map(str::trim) != Some("y") || d == 0 {
        return Err(Error::Parse(
            "dataset header must start with y followed by x1..xd".into(),
        ));
    }
    for (j, h) in headers.iter().skip(1).enumerate() {
        if h.trim() != format!("x{}", j + 1) {
            return Err(Error::Parse(format!(
                "expected column x{}, found '{h}'",
                j + 1
            )));
        }
    }
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != d + 1 {
            return Err(Error::Parse(format!(
                "row {} has {} fields, expected {}",
                line + 1,
                rec.len(),
                d + 1
            )));
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "row {}, column {}: '{field}' is not a number",
                    line + 1,
                    j + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Parse(format!(
                    "row {}, column {}: non-finite value",
                    line + 1,
                    j + 1
                )));
            }
            if j == 0 {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    if ys.is_empty() {
        return Err(Error::Parse("dataset has no rows".into()));
    }
    let n = ys.len();
    Ok((DMatrix::from_row_slice(n, d, &xs), DVector::from_vec(ys)))
}

pub fn parse_sidecar(text: &str) -> Result<DatasetSidecar> {
    let meta: DatasetSidecar =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("sidecar: {e}")))?;
    if meta.adaptive_cols.contains(&0) {
        return Err(Error::Parse("sidecar adaptive_cols are 1-based".into()));
    }
    Ok(meta)
}

/// Load a dataset. Adaptive columns come from `adaptive_cols` (1-based) when
/// given, otherwise from the sidecar; with neither, the dataset has none.
pub fn read_dataset(path: &Path, adaptive_cols: Option<&[usize]>) -> Result<AdaptiveDataset> {
    let text = fs::read_to_string(path)?;
    let (x, y) = parse_dataset_csv(&text)?;
    let side = sidecar_path(path);
    let sidecar = if side.exists() {
        Some(parse_sidecar(&fs::read_to_string(&side)?)?)
    } else {
        None
    };
    let cols: Vec<usize> = match (adaptive_cols, &sidecar) {
        (Some(c), _) => c.to_vec(),
        (None, Some(s)) => s.adaptive_cols.clone(),
        (None, None) => Vec::new(),
    };
    if cols.contains(&0) {
        return Err(Error::InvalidInput("adaptive columns are 1-based".into()));
    }
    let meta = sidecar
        .map(|s| GenerationMeta {
            generator: s.generator,
            params: s.params,
            seed: s.seed,
        })
        .unwrap_or_default();
    AdaptiveDataset::new(x, y, cols.iter().map(|c| c - 1).collect(), meta)
}
