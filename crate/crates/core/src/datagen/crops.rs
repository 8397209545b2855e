use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ImageRaster, LabelRaster};
use crate::error::{bail, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropParams {
    pub width: usize,
    pub height: usize,
    /// Number of positions drawn.
    pub count: usize,
    /// Minimum share of the crop the dominant class must cover.
    pub majority: f64,
    pub seed: u64,
}

/// One drawn position. `majority` is `None` when no class covers enough of
/// the label crop, in which case the sample is rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct CropDraw {
    pub x: usize,
    pub y: usize,
    pub majority: Option<u32>,
    pub image: ImageRaster,
    pub labels: LabelRaster,
}

impl CropDraw {
    pub fn accepted(&self) -> bool {
        self.majority.is_some()
    }
}

/// Turns a segmentation pair into classification crops.
///
/// Each draw picks `x` uniformly in `0..=W−w`, then `y` in `0..=H−h`, from a
/// SplitMix64 stream seeded with `params.seed`. The dominant class (lowest
/// id on ties) is reported when its share reaches `params.majority`.
pub fn crop_dataset(
    image: &ImageRaster,
    labels: &LabelRaster,
    params: &CropParams,
) -> Result<Vec<CropDraw>> {
    let CropParams {
        width: w,
        height: h,
        count,
        majority,
        seed,
    } = *params;
    if labels.width() != image.width() || labels.height() != image.height() {
        bail!(
            "label raster {}×{} does not match image {}×{}",
            labels.width(),
            labels.height(),
            image.width(),
            image.height()
        );
    }
    if labels.channels() != 1 {
        bail!("label raster must have one channel");
    }
    if w == 0 || h == 0 || w > image.width() || h > image.height() {
        bail!(
            "crop {w}×{h} does not fit a {}×{} raster",
            image.width(),
            image.height()
        );
    }
    if !(0.5..=1.0).contains(&majority) {
        bail!("majority share must be in [0.5, 1], got {majority}");
    }
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let x = rng.range_inclusive(0, labels.width() - w);
        let y = rng.range_inclusive(0, labels.height() - h);
        let label_crop = labels.crop(x, y, w, h)?;
        let majority = dominant_class(label_crop.values(), majority);
        out.push(CropDraw {
            x,
            y,
            majority,
            image: image.crop(x, y, w, h)?,
            labels: label_crop,
        });
    }
    Ok(out)
}

/// Most frequent label (lowest on ties) if its share is at least `threshold`.
pub fn dominant_class(labels: &[u32], threshold: f64) -> Option<u32> {
    let mut counts = BTreeMap::<u32, usize>::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let (class, n) =
        counts
            .into_iter()
            .fold(None, |best: Option<(u32, usize)>, (c, n)| match best {
                Some((_, bn)) if bn >= n => best,
                _ => Some((c, n)),
            })?;
    (n as f64 >= threshold * labels.len() as f64).then_some(class)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blank(w: usize, h: usize) -> ImageRaster {
        ImageRaster::from_fn(w, h, 3, |x, y, c| (x + y + c) as f64).unwrap()
    }

    #[test]
    fn uniform_labels_always_accepted() {
        let labels = LabelRaster::from_fn(8, 6, 1, |_, _, _| 7).unwrap();
        let p = CropParams {
            width: 3,
            height: 2,
            count: 50,
            majority: 0.9,
            seed: 11,
        };
        let draws = crop_dataset(&blank(8, 6), &labels, &p).unwrap();
        assert_eq!(draws.len(), 50);
        assert!(draws.iter().all(|d| d.majority == Some(7)));
        assert!(draws.iter().all(|d| d.x <= 5 && d.y <= 4));
    }

    #[test]
    fn half_split_is_accepted_at_bound() {
        let labels = LabelRaster::from_fn(4, 3, 1, |x, _, _| u32::from(x >= 2)).unwrap();
        let p = CropParams {
            width: 4,
            height: 2,
            count: 5,
            majority: 0.5,
            seed: 0,
        };
        let draws = crop_dataset(&blank(4, 3), &labels, &p).unwrap();
        assert!(draws.iter().all(|d| d.majority == Some(0)));
        let strict = CropParams {
            majority: 0.51,
            ..p
        };
        let draws = crop_dataset(&blank(4, 3), &labels, &strict).unwrap();
        assert!(draws.iter().all(|d| !d.accepted()));
    }

    #[test]
    fn dominant_class_ties() {
        assert_eq!(dominant_class(&[3, 1, 3, 1], 0.5), Some(1));
        assert_eq!(dominant_class(&[3, 1, 2, 1], 0.5), Some(1));
        assert_eq!(dominant_class(&[3, 1, 2, 0], 0.5), None);
    }

    #[test]
    fn errors() {
        let labels = LabelRaster::from_fn(4, 4, 1, |_, _, _| 0).unwrap();
        let img = blank(4, 4);
        let p = CropParams {
            width: 5,
            height: 1,
            count: 1,
            majority: 0.5,
            seed: 0,
        };
        assert!(crop_dataset(&img, &labels, &p).is_err());
        let p = CropParams {
            width: 2,
            height: 2,
            count: 1,
            majority: 0.4,
            seed: 0,
        };
        assert!(crop_dataset(&img, &labels, &p).is_err());
        let small = LabelRaster::from_fn(3, 4, 1, |_, _, _| 0).unwrap();
        let p = CropParams { majority: 0.5, ..p };
        assert!(crop_dataset(&img, &small, &p).is_err());
    }
}
