use serde::Serialize;

use crate::error::{bail, Result};
use crate::tensor::Tensor;

/// Per-epoch weight snapshots: each epoch lists named layers in the same
/// order with the same lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSeries {
    layers: Vec<String>,
    epochs: Vec<Vec<Vec<f64>>>,
}

impl SnapshotSeries {
    pub fn new(epochs: Vec<Vec<(String, Vec<f64>)>>) -> Result<Self> {
        if epochs.len() < 2 {
            bail!("need at least two epochs, got {}", epochs.len());
        }
        let layers: Vec<String> = epochs[0].iter().map(|(n, _)| n.clone()).collect();
        let sizes: Vec<usize> = epochs[0].iter().map(|(_, w)| w.len()).collect();
        let mut out = Vec::with_capacity(epochs.len());
        for (e, epoch) in epochs.into_iter().enumerate() {
            if epoch.len() != layers.len() {
                bail!(
                    "epoch {e} has {} layers, expected {}",
                    epoch.len(),
                    layers.len()
                );
            }
            let mut ws = Vec::with_capacity(epoch.len());
            for (l, (name, w)) in epoch.into_iter().enumerate() {
                if name != layers[l] {
                    bail!("epoch {e} layer {l} is `{name}`, expected `{}`", layers[l]);
                }
                if w.len() != sizes[l] {
                    bail!(
                        "layer `{name}` changes size in epoch {e}: {} vs {}",
                        w.len(),
                        sizes[l]
                    );
                }
                ws.push(w);
            }
            out.push(ws);
        }
        Ok(Self {
            layers,
            epochs: out,
        })
    }

    /// One tensor list per epoch, as read from the tensor container.
    pub fn from_tensors(epochs: Vec<Vec<Tensor>>) -> Result<Self> {
        Self::new(
            epochs
                .into_iter()
                .map(|ts| ts.into_iter().map(|t| (t.name, t.values)).collect())
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalStats {
    pub mean: f64,
    pub max: f64,
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerUpdates {
    pub layer: String,
    /// Entry `i` covers the change from epoch `i` to epoch `i + 1`.
    pub intervals: Vec<IntervalStats>,
}

/// Mean, max and sum of `|Δw|` per layer between consecutive epochs.
pub fn weight_update_stats(series: &SnapshotSeries) -> Vec<LayerUpdates> {
    series
        .layers
        .iter()
        .enumerate()
        .map(|(l, name)| LayerUpdates {
            layer: name.clone(),
            intervals: series
                .epochs
                .windows(2)
                .map(|pair| {
                    let (before, after) = (&pair[0][l], &pair[1][l]);
                    let mut sum = 0.0;
                    let mut max = 0.0f64;
                    for (a, b) in before.iter().zip(after) {
                        let d = (b - a).abs();
                        sum += d;
                        max = max.max(d);
                    }
                    let mean = if before.is_empty() {
                        0.0
                    } else {
                        sum / before.len() as f64
                    };
                    IntervalStats { mean, max, sum }
                })
                .collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(epochs: Vec<Vec<f64>>) -> SnapshotSeries {
        SnapshotSeries::new(
            epochs
                .into_iter()
                .map(|w| vec![("w".to_string(), w)])
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_snapshots() {
        let s = series(vec![vec![0.1, 0.2], vec![0.1, 0.2], vec![0.1, 0.2]]);
        let u = weight_update_stats(&s);
        assert_eq!(u[0].intervals.len(), 2);
        for i in &u[0].intervals {
            assert_eq!(
                *i,
                IntervalStats {
                    mean: 0.0,
                    max: 0.0,
                    sum: 0.0
                }
            );
        }
    }

    #[test]
    fn single_change() {
        let before = vec![1.0; 10];
        let mut after = before.clone();
        after[3] -= 0.5;
        let u = weight_update_stats(&series(vec![before, after]));
        let i = u[0].intervals[0];
        assert!((i.mean - 0.05).abs() < 1e-15);
        assert_eq!(i.max, 0.5);
        assert_eq!(i.sum, 0.5);
    }

    #[test]
    fn homogeneous_in_delta() {
        let a = vec![0.0, 1.0, -2.0];
        let b = vec![0.25, 0.5, -2.125];
        let b2: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + 2.0 * (y - x)).collect();
        let s1 = weight_update_stats(&series(vec![a.clone(), b]))[0].intervals[0];
        let s2 = weight_update_stats(&series(vec![a, b2]))[0].intervals[0];
        assert_eq!(s2.mean, 2.0 * s1.mean);
        assert_eq!(s2.max, 2.0 * s1.max);
        assert_eq!(s2.sum, 2.0 * s1.sum);
    }

    #[test]
    fn shape_drift_rejected() {
        let e0 = vec![("w".to_string(), vec![1.0, 2.0])];
        let e1 = vec![("w".to_string(), vec![1.0])];
        assert!(SnapshotSeries::new(vec![e0.clone(), e1]).is_err());
        assert!(SnapshotSeries::new(vec![e0.clone()]).is_err());
        let renamed = vec![("v".to_string(), vec![1.0, 2.0])];
        assert!(SnapshotSeries::new(vec![e0, renamed]).is_err());
    }
}
