//! Confusion matrices and the quality metrics derived from them.
//!
//! Rows index the true class, columns the predicted class. Row sums `r(i)`
//! double as per-class sample counts.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::ordering::Permutation;

/// Square count table with one label per class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ConfusionFile", into = "ConfusionFile")]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    cells: Vec<u64>,
}

/// On-disk structured form: `{"labels": [...], "matrix": [[...], ...]}`.
#[derive(Serialize, Deserialize)]
struct ConfusionFile {
    labels: Vec<String>,
    matrix: Vec<Vec<u64>>,
}

impl TryFrom<ConfusionFile> for ConfusionMatrix {
    type Error = Error;

    fn try_from(f: ConfusionFile) -> Result<Self> {
        ConfusionMatrix::from_rows(f.labels, f.matrix)
    }
}

impl From<ConfusionMatrix> for ConfusionFile {
    fn from(c: ConfusionMatrix) -> Self {
        ConfusionFile {
            matrix: c.rows().map(<[u64]>::to_vec).collect(),
            labels: c.labels,
        }
    }
}

impl ConfusionMatrix {
    pub fn from_rows(labels: Vec<String>, rows: Vec<Vec<u64>>) -> Result<Self> {
        let k = rows.len();
        if k < 2 {
            bail!("confusion matrix needs at least 2 classes, got {k}");
        }
        if labels.len() != k {
            bail!("{} labels for a {k}x{k} matrix", labels.len());
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                bail!("duplicate class label `{l}`");
            }
        }
        let mut cells = Vec::with_capacity(k * k);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != k {
                bail!("row {i} has {} entries, expected {k}", row.len());
            }
            cells.extend(row);
        }
        if cells.iter().all(|&c| c == 0) {
            bail!("confusion matrix is all zeros");
        }
        Ok(Self { labels, cells })
    }

    /// Matrix with labels `"0".."K-1"`.
    pub fn unlabeled(rows: Vec<Vec<u64>>) -> Result<Self> {
        let labels = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::from_rows(labels, rows)
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, true_class: usize, predicted: usize) -> u64 {
        self.cells[true_class * self.k() + predicted]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.cells.chunks(self.k())
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.rows().nth(i).map_or(0, |r| r.iter().sum())
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.get(i, i)).sum()
    }

    /// Reorders rows and columns jointly: display position `p` shows the
    /// original class `perm.order()[p]`.
    pub fn permuted(&self, perm: &Permutation) -> Result<Self> {
        let k = self.k();
        if perm.len() != k {
            bail!("permutation of length {} for {k} classes", perm.len());
        }
        let o = perm.order();
        let labels = o.iter().map(|&c| self.labels[c].clone()).collect();
        let mut cells = Vec::with_capacity(k * k);
        for &r in o {
            for &c in o {
                cells.push(self.get(r, c));
            }
        }
        Ok(Self { labels, cells })
    }

    /// Parses the CSV form. A header row is recognised when its first field
    /// is not a number.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut labels = None;
        let mut rows = Vec::new();
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.iter().all(str::is_empty) {
                continue;
            }
            let first = rec.get(0).unwrap_or("");
            if n == 0 && first.parse::<f64>().is_err() {
                labels = Some(rec.iter().map(str::to_string).collect::<Vec<_>>());
                continue;
            }
            let line = rec.position().map_or(n + 1, |p| p.line() as usize);
            let mut row = Vec::with_capacity(rec.len());
            for (col, field) in rec.iter().enumerate() {
                let v = field.parse::<u64>().map_err(|_| {
                    Error::syntax(line, col + 1, format!("expected a count, found `{field}`"))
                })?;
                row.push(v);
            }
            rows.push(row);
        }
        match labels {
            Some(l) => Self::from_rows(l, rows),
            None => Self::unlabeled(rows),
        }
    }

    /// CSV form. The header is left out when the labels are the defaults
    /// `0..K-1`; a non-default first label that reads as a number cannot
    /// round-trip through CSV, use JSON for those.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let default = self
            .labels
            .iter()
            .enumerate()
            .all(|(i, l)| *l == i.to_string());
        if !default {
            out.push_str(&self.labels.join(","));
            out.push('\n');
        }
        for row in self.rows() {
            let fields: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Accepts either the structured JSON object or CSV, sniffed from the
    /// first non-blank character.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Ok(serde_json::from_str(text)?)
        } else {
            Self::from_csv(text)
        }
    }
}

/// Tallies argmax predictions against true labels.
///
/// Ties in a prediction row go to the lowest class index.
pub fn build_confusion(
    predictions: &[Vec<f64>],
    true_labels: &[usize],
    labels: Vec<String>,
) -> Result<ConfusionMatrix> {
    let k = labels.len();
    if predictions.is_empty() {
        bail!("no predictions");
    }
    if predictions.len() != true_labels.len() {
        bail!(
            "{} prediction rows but {} labels",
            predictions.len(),
            true_labels.len()
        );
    }
    let mut rows = vec![vec![0u64; k]; k];
    for (n, (row, &t)) in predictions.iter().zip(true_labels).enumerate() {
        if row.len() != k {
            bail!("prediction row {n} has {} entries, expected {k}", row.len());
        }
        if t >= k {
            bail!("label {t} of sample {n} is out of range for {k} classes");
        }
        rows[t][argmax(row)] += 1;
    }
    ConfusionMatrix::from_rows(labels, rows)
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

pub const DEFAULT_SKEW_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// Mean of per-class accuracies over classes with at least one sample.
    pub mean_accuracy: f64,
    /// `c_kk / r(k)`; `None` for classes without samples.
    pub sensitivity: Vec<Option<f64>>,
    /// Row-normalised matrix; rows of empty classes are all zero.
    pub confusability: Vec<Vec<f64>>,
    /// Set when accuracy is within `epsilon` of the majority-class rate.
    pub skew_flag: bool,
    pub epsilon: f64,
}

pub fn metrics(c: &ConfusionMatrix, epsilon: f64) -> Result<MetricsReport> {
    if !(0.0..1.0).contains(&epsilon) {
        bail!("epsilon must be in [0, 1), got {epsilon}");
    }
    let total = c.total();
    if total == 0 {
        bail!("confusion matrix is all zeros");
    }
    let total_f = total as f64;
    let accuracy = c.trace() as f64 / total_f;

    let k = c.k();
    let mut sensitivity = Vec::with_capacity(k);
    let mut confusability = Vec::with_capacity(k);
    let mut max_row = 0u64;
    for (i, row) in c.rows().enumerate() {
        let r: u64 = row.iter().sum();
        max_row = max_row.max(r);
        if r == 0 {
            sensitivity.push(None);
            confusability.push(vec![0.0; k]);
        } else {
            let rf = r as f64;
            sensitivity.push(Some(row[i] as f64 / rf));
            confusability.push(row.iter().map(|&v| v as f64 / rf).collect());
        }
    }
    let populated: Vec<f64> = sensitivity.iter().flatten().copied().collect();
    let mean_accuracy = populated.iter().sum::<f64>() / populated.len() as f64;
    let skew_flag = accuracy <= max_row as f64 / total_f + epsilon;

    Ok(MetricsReport {
        accuracy,
        mean_accuracy,
        sensitivity,
        confusability,
        skew_flag,
        epsilon,
    })
}

pub const DEFAULT_CLAMP_EPS: f64 = 1e-7;

/// Binary cross-entropy summed over samples and classes, plus ℓ1 and ℓ2
/// weight penalties. Outputs are clamped into `[clamp_eps, 1 - clamp_eps]`.
pub fn cross_entropy_loss(
    outputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    weights: &[f64],
    lambda1: f64,
    lambda2: f64,
    clamp_eps: f64,
) -> Result<f64> {
    if outputs.is_empty() {
        bail!("empty output set");
    }
    if lambda1 < 0.0 || lambda2 < 0.0 {
        bail!("regularisation weights must be non-negative");
    }
    if !(clamp_eps > 0.0 && clamp_eps < 0.5) {
        bail!("clamp epsilon must be in (0, 0.5), got {clamp_eps}");
    }
    if outputs.len() != targets.len() {
        bail!(
            "{} output rows but {} target rows",
            outputs.len(),
            targets.len()
        );
    }
    let mut data = 0.0;
    for (n, (o_row, t_row)) in outputs.iter().zip(targets).enumerate() {
        if o_row.len() != t_row.len() {
            bail!(
                "row {n}: {} outputs vs {} targets",
                o_row.len(),
                t_row.len()
            );
        }
        for (&o, &t) in o_row.iter().zip(t_row) {
            let o = o.clamp(clamp_eps, 1.0 - clamp_eps);
            data -= t * o.ln() + (1.0 - t) * (1.0 - o).ln();
        }
    }
    let l1: f64 = weights.iter().map(|w| w.abs()).sum();
    let l2: f64 = weights.iter().map(|w| w * w).sum();
    Ok(data + lambda1 * l1 + lambda2 * l2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: Vec<Vec<u64>>) -> ConfusionMatrix {
        ConfusionMatrix::unlabeled(rows).unwrap()
    }

    #[test]
    fn build_perfect_and_tie() {
        let c = build_confusion(
            &[vec![0.9, 0.1], vec![0.2, 0.8]],
            &[0, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert_eq!(c.rows().collect::<Vec<_>>(), vec![&[1, 0][..], &[0, 1][..]]);

        let c = build_confusion(&[vec![0.5, 0.5]], &[1], vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(c.get(1, 0), 1);
        assert_eq!(c.get(1, 1), 0);
    }

    #[test]
    fn build_mixed_tally() {
        // true: 0 0 1 1 2 2; argmax: 0 1 1 1 0 2
        let preds = vec![
            vec![0.7, 0.2, 0.1],
            vec![0.3, 0.6, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.2, 0.5, 0.3],
            vec![0.4, 0.3, 0.3],
            vec![0.1, 0.1, 0.8],
        ];
        let names = vec!["x".into(), "y".into(), "z".into()];
        let c = build_confusion(&preds, &[0, 0, 1, 1, 2, 2], names).unwrap();
        let expect: Vec<&[u64]> = vec![&[1, 1, 0], &[0, 2, 0], &[1, 0, 1]];
        assert_eq!(c.rows().collect::<Vec<_>>(), expect);
        assert_eq!(
            (0..3).map(|i| c.row_sum(i)).collect::<Vec<_>>(),
            vec![2, 2, 2]
        );
    }

    #[test]
    fn build_errors() {
        let names = || vec!["a".to_string(), "b".to_string()];
        assert!(build_confusion(&[], &[], names()).is_err());
        assert!(build_confusion(&[vec![0.5, 0.2, 0.3]], &[0], names()).is_err());
        assert!(build_confusion(&[vec![0.5, 0.5]], &[2], names()).is_err());
    }

    #[test]
    fn metrics_examples() {
        let m = metrics(&cm(vec![vec![50, 0], vec![0, 50]]), 0.01).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.mean_accuracy, 1.0);
        assert!(!m.skew_flag);

        let m = metrics(&cm(vec![vec![40, 10], vec![20, 30]]), 0.0).unwrap();
        assert!((m.accuracy - 0.70).abs() < 1e-12);
        assert!((m.mean_accuracy - 0.70).abs() < 1e-12);
        assert!((m.sensitivity[0].unwrap() - 0.8).abs() < 1e-12);
        assert!((m.sensitivity[1].unwrap() - 0.6).abs() < 1e-12);
        assert!((m.confusability[0][0] - 0.8).abs() < 1e-12);
        assert!((m.confusability[0][1] - 0.2).abs() < 1e-12);

        let m = metrics(&cm(vec![vec![90, 0], vec![10, 0]]), 0.01).unwrap();
        assert!((m.accuracy - 0.9).abs() < 1e-12);
        assert!(m.skew_flag);
    }

    #[test]
    fn empty_class_excluded_from_mean() {
        let m = metrics(&cm(vec![vec![3, 1, 0], vec![0, 0, 0], vec![0, 1, 1]]), 0.01).unwrap();
        assert_eq!(m.sensitivity[1], None);
        assert!((m.mean_accuracy - (0.75 + 0.5) / 2.0).abs() < 1e-12);
        assert_eq!(m.confusability[1], vec![0.0; 3]);
    }

    #[test]
    fn rejects_invalid_matrices() {
        assert!(ConfusionMatrix::unlabeled(vec![vec![0, 0], vec![0, 0]]).is_err());
        assert!(ConfusionMatrix::unlabeled(vec![vec![1]]).is_err());
        assert!(ConfusionMatrix::unlabeled(vec![vec![1, 2], vec![3]]).is_err());
        assert!(ConfusionMatrix::from_rows(
            vec!["a".into(), "a".into()],
            vec![vec![1, 0], vec![0, 1]]
        )
        .is_err());
        assert!(metrics(&cm(vec![vec![1, 0], vec![0, 1]]), 1.0).is_err());
    }

    #[test]
    fn csv_with_and_without_header() {
        let c = ConfusionMatrix::from_csv("cat,dog\n5,1\n2,7\n").unwrap();
        assert_eq!(c.labels(), &["cat", "dog"]);
        assert_eq!(c.get(1, 0), 2);
        let c = ConfusionMatrix::from_csv("5, 1\n2, 7\n").unwrap();
        assert_eq!(c.labels(), &["0", "1"]);
        assert_eq!(ConfusionMatrix::from_csv(&c.to_csv()).unwrap(), c);
        let err = ConfusionMatrix::from_csv("1,2\n3,x\n").unwrap_err();
        assert!(
            matches!(
                err,
                Error::Syntax {
                    line: 2,
                    column: 2,
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn json_form() {
        let c = ConfusionMatrix::parse(r#"{"labels":["a","b"],"matrix":[[1,2],[3,4]]}"#).unwrap();
        assert_eq!(c.get(0, 1), 2);
        let back = serde_json::to_string(&c).unwrap();
        assert_eq!(back, r#"{"labels":["a","b"],"matrix":[[1,2],[3,4]]}"#);
        assert!(ConfusionMatrix::parse(r#"{"labels":["a"],"matrix":[[1,2],[3,4]]}"#).is_err());
    }

    #[test]
    fn loss_examples() {
        let l = cross_entropy_loss(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[],
            0.0,
            0.0,
            DEFAULT_CLAMP_EPS,
        )
        .unwrap();
        assert!((0.0..=8.0 * DEFAULT_CLAMP_EPS).contains(&l));

        let base = cross_entropy_loss(
            &[vec![0.5, 0.5]],
            &[vec![1.0, 0.0]],
            &[],
            0.0,
            0.0,
            DEFAULT_CLAMP_EPS,
        )
        .unwrap();
        assert!((base - std::f64::consts::LN_2 * 2.0).abs() < 1e-12);

        let reg = cross_entropy_loss(
            &[vec![0.5, 0.5]],
            &[vec![1.0, 0.0]],
            &[1.0, 2.0],
            0.0,
            0.1,
            DEFAULT_CLAMP_EPS,
        )
        .unwrap();
        assert!((reg - base - 0.5).abs() < 1e-12);
    }

    #[test]
    fn loss_errors() {
        let o = [vec![0.5, 0.5]];
        let t = [vec![1.0, 0.0]];
        assert!(cross_entropy_loss(&[], &[], &[], 0.0, 0.0, 1e-7).is_err());
        assert!(cross_entropy_loss(&o, &t, &[], -1.0, 0.0, 1e-7).is_err());
        assert!(cross_entropy_loss(&o, &t, &[], 0.0, -0.1, 1e-7).is_err());
        assert!(cross_entropy_loss(&o, &[vec![1.0]], &[], 0.0, 0.0, 1e-7).is_err());
    }
}
