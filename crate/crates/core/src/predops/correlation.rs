use rayon::prelude::*;

use crate::error::{bail, Result};
use crate::tensor::Tensor;

/// Filter of shape `width × height × depth`, stored row-major with the
/// width axis outermost: index `(x·height + y)·depth + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTensor {
    width: usize,
    height: usize,
    depth: usize,
    values: Vec<f64>,
}

impl FilterTensor {
    pub fn new(width: usize, height: usize, depth: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || depth == 0 {
            bail!("filter dimensions must be positive, got {width}×{height}×{depth}");
        }
        if values.len() != width * height * depth {
            bail!(
                "{width}×{height}×{depth} filter needs {} values, got {}",
                width * height * depth,
                values.len()
            );
        }
        Ok(Self {
            width,
            height,
            depth,
            values,
        })
    }

    /// Accepts `[w, h]` or `[w, h, d]` shaped tensors.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match t.shape[..] {
            [w, h] => Self::new(w, h, 1, t.values.clone()),
            [w, h, d] => Self::new(w, h, d, t.values.clone()),
            _ => bail!("tensor `{}` of shape {:?} is not a filter", t.name, t.shape),
        }
    }

    /// Splits a `[n, w, h, d]` tensor into its `n` filters.
    pub fn layer_from_tensor(t: &Tensor) -> Result<Vec<Self>> {
        let [n, w, h, d] = t.shape[..] else {
            bail!(
                "tensor `{}` of shape {:?} is not a filter bank",
                t.name,
                t.shape
            );
        };
        let size = w * h * d;
        (0..n)
            .map(|i| Self::new(w, h, d, t.values[i * size..(i + 1) * size].to_vec()))
            .collect()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.depth)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.values[(x * self.height + y) * self.depth + c]
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `⟨self, T(other, dx, dy)⟩` where `T` moves content by `(dx, dy)`
    /// and fills vacated cells with zeros.
    fn shifted_dot(&self, other: &Self, dx: isize, dy: isize) -> f64 {
        let mut acc = 0.0;
        for x in 0..self.width {
            let Some(sx) = x.checked_sub_signed(dx).filter(|&v| v < self.width) else {
                continue;
            };
            for y in 0..self.height {
                let Some(sy) = y.checked_sub_signed(dy).filter(|&v| v < self.height) else {
                    continue;
                };
                let a = &self.values[(x * self.height + y) * self.depth..][..self.depth];
                let b = &other.values[(sx * self.height + sy) * self.depth..][..self.depth];
                acc += a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
            }
        }
        acc
    }
}

/// Maximum normalised inner product between `a` and the zero-filled
/// translations of `b` by every nonzero offset in `[-k, k]²`.
pub fn k_translation_correlation(a: &FilterTensor, b: &FilterTensor, k: usize) -> Result<f64> {
    if a.dims() != b.dims() {
        bail!("filter dimensions differ: {:?} vs {:?}", a.dims(), b.dims());
    }
    if k == 0 {
        bail!("translation window k must be at least 1");
    }
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        bail!("zero-norm filter");
    }
    let k = k as isize;
    let mut best = f64::NEG_INFINITY;
    for dx in -k..=k {
        for dy in -k..=k {
            if dx == 0 && dy == 0 {
                continue;
            }
            best = best.max(a.shifted_dot(b, dx, dy));
        }
    }
    Ok(best / denom)
}

/// Mean over filters of the best correlation against any other filter.
pub fn avg_max_translation_correlation(layer: &[FilterTensor], k: usize) -> Result<f64> {
    if layer.len() < 2 {
        bail!("need at least two filters, got {}", layer.len());
    }
    let per_filter: Vec<f64> = (0..layer.len())
        .into_par_iter()
        .map(|i| {
            let mut best = f64::NEG_INFINITY;
            for (j, other) in layer.iter().enumerate() {
                if i != j {
                    best = best.max(k_translation_correlation(&layer[i], other, k)?);
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(per_filter.iter().sum::<f64>() / layer.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spike(w: usize, h: usize, x: usize, y: usize) -> FilterTensor {
        let mut v = vec![0.0; w * h];
        v[x * h + y] = 1.0;
        FilterTensor::new(w, h, 1, v).unwrap()
    }

    #[test]
    fn unit_filters_have_no_overlap() {
        let a = FilterTensor::new(1, 1, 1, vec![2.0]).unwrap();
        let b = FilterTensor::new(1, 1, 1, vec![-3.0]).unwrap();
        assert_eq!(k_translation_correlation(&a, &b, 3).unwrap(), 0.0);
        assert_eq!(
            avg_max_translation_correlation(&[a.clone(), b, a], 1).unwrap(),
            0.0
        );
    }

    #[test]
    fn translation_aligns_spikes() {
        let a = spike(3, 3, 0, 1);
        let b = spike(3, 3, 0, 0);
        assert!((k_translation_correlation(&a, &b, 1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn far_apart_spikes_are_uncorrelated() {
        let a = spike(4, 4, 0, 0);
        let b = spike(4, 4, 3, 3);
        assert_eq!(k_translation_correlation(&a, &b, 1).unwrap(), 0.0);
        assert_eq!(k_translation_correlation(&a, &b, 3).unwrap(), 1.0);
    }

    #[test]
    fn offset_copies_average_to_one() {
        let a = spike(3, 3, 1, 1);
        let b = spike(3, 3, 2, 1);
        assert!((avg_max_translation_correlation(&[a, b], 1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let a = spike(2, 2, 0, 0);
        let z = FilterTensor::new(2, 2, 1, vec![0.0; 4]).unwrap();
        assert!(k_translation_correlation(&a, &z, 1).is_err());
        assert!(k_translation_correlation(&a, &spike(3, 3, 0, 0), 1).is_err());
        assert!(k_translation_correlation(&a, &a, 0).is_err());
        assert!(avg_max_translation_correlation(std::slice::from_ref(&a), 1).is_err());
        assert!(avg_max_translation_correlation(&[a, z], 1).is_err());
        assert!(FilterTensor::new(0, 1, 1, vec![]).is_err());
    }

    #[test]
    fn bank_splitting() {
        let t = Tensor::new("w", vec![2, 1, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let bank = FilterTensor::layer_from_tensor(&t).unwrap();
        assert_eq!(bank[1].values(), &[3.0, 4.0]);
        assert_eq!(bank[1].at(0, 0, 1), 4.0);
    }
}
