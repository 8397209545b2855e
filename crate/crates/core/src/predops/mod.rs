//! Prediction-space and weight-space utilities.

pub mod activation;
mod correlation;
mod updates;

pub use correlation::{avg_max_translation_correlation, k_translation_correlation, FilterTensor};
pub use updates::{weight_update_stats, IntervalStats, LayerUpdates, SnapshotSeries};

use crate::error::{bail, Error, Result};

/// Tolerance on row sums of a [`PredictionSet`].
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// Row-stochastic N×K matrix of class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    rows: Vec<Vec<f64>>,
}

impl PredictionSet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let Some(k) = rows.first().map(Vec::len) else {
            bail!("prediction set has no rows");
        };
        if k == 0 {
            bail!("prediction rows are empty");
        }
        for (n, row) in rows.iter().enumerate() {
            if row.len() != k {
                bail!("row {n} has {} entries, expected {k}", row.len());
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                bail!("row {n} has entries outside [0, 1]");
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                bail!("row {n} sums to {s}, not 1");
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.rows[0].len()
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.rows
    }

    pub fn to_csv(&self) -> String {
        write_real_csv(&self.rows)
    }
}

/// Element-wise mean of several classifiers' predictions.
pub fn ensemble_average(members: &[PredictionSet]) -> Result<PredictionSet> {
    let Some(first) = members.first() else {
        bail!("ensemble has no members");
    };
    let (n, k) = (first.n(), first.k());
    for (m, p) in members.iter().enumerate() {
        if p.n() != n || p.k() != k {
            bail!("member {m} is {}×{}, expected {n}×{k}", p.n(), p.k());
        }
    }
    let scale = 1.0 / members.len() as f64;
    let rows = (0..n)
        .map(|i| {
            (0..k)
                .map(|j| members.iter().map(|p| p.rows[i][j]).sum::<f64>() * scale)
                .collect()
        })
        .collect();
    Ok(PredictionSet { rows })
}

/// Soft targets `α·t + (1 − α)·y`.
pub fn smooth_labels(
    targets: &PredictionSet,
    ensemble: &PredictionSet,
    alpha: f64,
) -> Result<PredictionSet> {
    if !(0.0..=1.0).contains(&alpha) {
        bail!("alpha must be in [0, 1], got {alpha}");
    }
    if targets.n() != ensemble.n() || targets.k() != ensemble.k() {
        bail!(
            "targets are {}×{} but ensemble is {}×{}",
            targets.n(),
            targets.k(),
            ensemble.n(),
            ensemble.k()
        );
    }
    let rows = targets
        .rows
        .iter()
        .zip(&ensemble.rows)
        .map(|(t, y)| {
            t.iter()
                .zip(y)
                .map(|(t, y)| alpha * t + (1.0 - alpha) * y)
                .collect()
        })
        .collect();
    Ok(PredictionSet { rows })
}

/// Reads a headerless CSV of reals, one row per sample.
pub fn parse_real_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>().map_err(|_| {
                    Error::syntax(line, c + 1, format!("expected a number, found `{f}`"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_real_csv(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in rows {
        let fields: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}
