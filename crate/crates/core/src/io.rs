//! CSV ingestion and the synthetic hourly fixture.
//!
//! Dialect: comma separated, header row required, `.` decimal. Cells equal
//! to `""`, `"NA"` or `"NaN"` are missing, and any row with a missing cell in
//! a requested column is dropped.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::linalg::check_finite;
use crate::numerics::{Matrix, RngStream};
use crate::permutation::SparsePermutation;
use crate::simulate::inject_local_mismatch;

pub const NA_MARKERS: [&str; 3] = ["", "NA", "NaN"];
pub const MIN_SD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub response_name: String,
    pub covariate_names: Vec<String>,
    pub nuisance_names: Vec<String>,
    pub y: Vec<f64>,
    pub x: Matrix,
    pub z: Option<Matrix>,
    pub rows_read: usize,
    pub rows_dropped: usize,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }
}

fn parse_cell(raw: &str, row: usize, col: &str) -> Result<Option<f64>> {
    let s = raw.trim();
    if NA_MARKERS.contains(&s) {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::Schema(format!(
            "row {row}, column `{col}`: cannot parse `{s}` as a finite number"
        ))),
    }
}

/// Shift to mean zero and scale to unit population standard deviation.
pub fn standardize(v: &mut [f64], name: &str) -> Result<()> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(sd >= MIN_SD) {
        return Err(Error::DegenerateColumn(name.to_string()));
    }
    v.iter_mut().for_each(|x| *x = (*x - mean) / sd);
    Ok(())
}

pub fn ingest_csv(
    path: &Path,
    response: &str,
    covariates: &[String],
    nuisance: &[String],
    standardize_columns: bool,
) -> Result<Dataset> {
    if covariates.is_empty() {
        return Err(Error::Schema("at least one covariate is required".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let header = reader.headers()?.clone();
    let locate = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in header")))
    };
    let names: Vec<&str> = std::iter::once(response)
        .chain(covariates.iter().map(String::as_str))
        .chain(nuisance.iter().map(String::as_str))
        .collect();
    let idx: Vec<usize> = names.iter().map(|n| locate(n)).collect::<Result<_>>()?;

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let (mut rows_read, mut rows_dropped) = (0, 0);
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        rows_read += 1;
        let mut cells = Vec::with_capacity(idx.len());
        for (&c, name) in idx.iter().zip(&names) {
            let raw = record
                .get(c)
                .ok_or_else(|| Error::Schema(format!("row {} has no column `{name}`", r + 1)))?;
            cells.push(parse_cell(raw, r + 1, name)?);
        }
        match cells.into_iter().collect::<Option<Vec<f64>>>() {
            Some(vals) => vals
                .into_iter()
                .zip(&mut columns)
                .for_each(|(v, col)| col.push(v)),
            None => rows_dropped += 1,
        }
    }

    let n = columns[0].len();
    let p = covariates.len() + nuisance.len();
    if n < p + 2 {
        return Err(Error::Schema(format!(
            "{n} complete rows, need at least {}",
            p + 2
        )));
    }
    if standardize_columns {
        for (col, name) in columns.iter_mut().zip(&names) {
            standardize(col, name)?;
        }
    }
    let mut columns = columns.into_iter();
    let y = columns.next().expect("response column");
    check_finite(&y, "response")?;
    let x_cols: Vec<Vec<f64>> = columns.by_ref().take(covariates.len()).collect();
    let z_cols: Vec<Vec<f64>> = columns.collect();
    Ok(Dataset {
        response_name: response.to_string(),
        covariate_names: covariates.to_vec(),
        nuisance_names: nuisance.to_vec(),
        y,
        x: Matrix::from_columns(&x_cols)?,
        z: if z_cols.is_empty() {
            None
        } else {
            Some(Matrix::from_columns(&z_cols)?)
        },
        rows_read,
        rows_dropped,
    })
}

/// Covariate names of the hourly fixture, echoing an air-quality record.
pub const FIXTURE_COVARIATES: [&str; 10] = [
    "TEMP", "PRES", "DEWP", "RAIN", "WSPM", "SO2", "NO2", "CO", "O3", "PM10",
];
pub const FIXTURE_RESPONSE: &str = "PM25";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub hours: usize,
    /// Noise sd relative to the unit-variance signal.
    pub noise: f64,
    /// Fraction of rows swapped within the same day and window.
    pub shuffle_rate: f64,
    pub window_hours: usize,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            hours: 200,
            noise: 0.05,
            shuffle_rate: 0.0,
            window_hours: 3,
            seed: 2024,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub spec: FixtureSpec,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// The swap applied to the response column.
    pub shuffle: SparsePermutation,
}

impl Fixture {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn covariate_names() -> Vec<String> {
        FIXTURE_COVARIATES.iter().map(|s| s.to_string()).collect()
    }
}

/// Hourly series with diurnal cycles and AR(1) weather, a linear response,
/// and optionally a windowed shuffle of the response confined to each day.
pub fn hourly_fixture(spec: &FixtureSpec) -> Result<Fixture> {
    let n = spec.hours;
    let mut rng = RngStream::new(spec.seed, 0).generator();
    let p = FIXTURE_COVARIATES.len();
    let mut state = vec![0.0; p];
    let phases: Vec<f64> = (0..p)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let mut x = vec![vec![0.0; p]; n];
    for (t, row) in x.iter_mut().enumerate() {
        let clock = std::f64::consts::TAU * (t % 24) as f64 / 24.0;
        for j in 0..p {
            let e: f64 = rng.sample(StandardNormal);
            state[j] = 0.8 * state[j] + 0.6 * e;
            row[j] = (clock + phases[j]).sin() + state[j];
        }
    }
    let beta: Vec<f64> = (0..p)
        .map(|j| if j % 2 == 0 { 1.0 } else { -0.5 } * (1.0 + j as f64 / p as f64))
        .collect();
    let signal: Vec<f64> = x
        .iter()
        .map(|r| r.iter().zip(&beta).map(|(a, b)| a * b).sum())
        .collect();
    let scale = {
        let m = signal.iter().sum::<f64>() / n as f64;
        (signal.iter().map(|s| (s - m).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let y: Vec<f64> = signal
        .iter()
        .map(|s| s / scale + spec.noise * rng.sample::<f64, _>(StandardNormal))
        .collect();

    // Days are pushed apart in the timestamp so no window spans midnight.
    let gap = (24 + spec.window_hours + 1) as f64;
    let stamps: Vec<f64> = (0..n)
        .map(|t| (t / 24) as f64 * gap + (t % 24) as f64)
        .collect();
    let (y, shuffle) = inject_local_mismatch(
        &y,
        &stamps,
        spec.shuffle_rate,
        spec.window_hours as f64,
        &mut rng,
    )?;

    let mut header = vec!["hour".to_string(), FIXTURE_RESPONSE.to_string()];
    header.extend(Fixture::covariate_names());
    let rows = (0..n)
        .map(|t| {
            let mut row = vec![t as f64, y[t]];
            row.extend(&x[t]);
            row
        })
        .collect();
    Ok(Fixture {
        spec: spec.clone(),
        header,
        rows,
        shuffle,
    })
}
