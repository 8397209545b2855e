//! Raster utilities: linear filtering with boundary handling, average
//! pooling, and crop extraction from segmentation data.

mod crops;
mod filter;
pub mod netpbm;

pub use crops::{crop_dataset, dominant_class, CropDraw, CropParams};
pub use filter::{avg_pool, filter2d, Boundary};

use crate::error::{bail, Result};
use crate::tensor::Tensor;

/// Row-major `height × width × channels` image. `T = f64` for images,
/// `T = u32` for label maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    channels: usize,
    values: Vec<T>,
}

pub type ImageRaster = Raster<f64>;
pub type LabelRaster = Raster<u32>;

impl<T: Copy> Raster<T> {
    pub fn new(width: usize, height: usize, channels: usize, values: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            bail!("raster dimensions must be positive, got {width}×{height}×{channels}");
        }
        if values.len() != width * height * channels {
            bail!(
                "{width}×{height}×{channels} raster needs {} values, got {}",
                width * height * channels,
                values.len()
            );
        }
        Ok(Self {
            width,
            height,
            channels,
            values,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    values.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> T {
        self.values[(y * self.width + x) * self.channels + c]
    }

    /// Sub-raster covering columns `x..x+w` and rows `y..y+h`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Self> {
        if x + w > self.width || y + h > self.height {
            bail!(
                "crop {w}×{h} at ({x}, {y}) exceeds {}×{} raster",
                self.width,
                self.height
            );
        }
        Self::from_fn(w, h, self.channels, |cx, cy, c| self.at(x + cx, y + cy, c))
    }
}

impl ImageRaster {
    /// Tensor with shape `[height, width, channels]`.
    pub fn to_tensor(&self, name: &str) -> Tensor {
        Tensor {
            name: name.to_string(),
            shape: vec![self.height, self.width, self.channels],
            values: self.values.clone(),
        }
    }

    /// Accepts `[height, width]` or `[height, width, channels]`.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match t.shape[..] {
            [h, w] => Self::new(w, h, 1, t.values.clone()),
            [h, w, c] => Self::new(w, h, c, t.values.clone()),
            _ => bail!("tensor `{}` of shape {:?} is not a raster", t.name, t.shape),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_crop() {
        let r = Raster::from_fn(3, 2, 2, |x, y, c| (100 * y + 10 * x + c) as u32).unwrap();
        assert_eq!(r.at(2, 1, 1), 121);
        let c = r.crop(1, 1, 2, 1).unwrap();
        assert_eq!(c.values(), &[110, 111, 120, 121]);
        assert!(r.crop(2, 0, 2, 1).is_err());
        assert!(Raster::<u32>::new(2, 2, 1, vec![0; 3]).is_err());
    }

    #[test]
    fn tensor_round_trip() {
        let r = Raster::from_fn(3, 2, 1, |x, y, _| (x + 3 * y) as f64).unwrap();
        assert_eq!(ImageRaster::from_tensor(&r.to_tensor("img")).unwrap(), r);
    }
}
