use serde::{Deserialize, Serialize};

use super::ImageRaster;
use crate::error::{bail, Result};
use crate::predops::FilterTensor;

/// How pixels outside the image are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Only positions where the kernel fits; the output shrinks.
    DontCompute,
    Zero,
    /// Clamp to the closest edge pixel.
    Nearest,
    /// Mirror about the edge pixel (`-1 → 1`).
    Reflect,
}

impl std::str::FromStr for Boundary {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "dont_compute" | "valid" => Boundary::DontCompute,
            "zero" => Boundary::Zero,
            "nearest" => Boundary::Nearest,
            "reflect" => Boundary::Reflect,
            other => bail!("unknown boundary mode `{other}`"),
        })
    }
}

fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    (if m < n as isize { m } else { period - m }) as usize
}

/// Cross-correlates `image` with `kernel`, producing one channel.
///
/// For padded modes the kernel's anchor sits at offset
/// `((k_w − 1)/2, (k_h − 1)/2)`, so interior output positions coincide with
/// the `DontCompute` output shifted by that offset.
pub fn filter2d(
    image: &ImageRaster,
    kernel: &FilterTensor,
    boundary: Boundary,
) -> Result<ImageRaster> {
    let (kw, kh, kd) = kernel.dims();
    if kd != image.channels() {
        bail!(
            "kernel depth {kd} does not match {} image channels",
            image.channels()
        );
    }
    let (w, h) = (image.width(), image.height());
    if boundary == Boundary::DontCompute {
        if kw > w || kh > h {
            bail!("{kw}×{kh} kernel larger than {w}×{h} image");
        }
        return ImageRaster::from_fn(w - kw + 1, h - kh + 1, 1, |x, y, _| {
            let mut acc = 0.0;
            for ix in 0..kw {
                for iy in 0..kh {
                    for c in 0..kd {
                        acc += image.at(x + ix, y + iy, c) * kernel.at(ix, iy, c);
                    }
                }
            }
            acc
        });
    }
    let (ox, oy) = (((kw - 1) / 2) as isize, ((kh - 1) / 2) as isize);
    let sample = |sx: isize, sy: isize, c: usize| -> f64 {
        let inside = |v: isize, n: usize| (0..n as isize).contains(&v);
        match boundary {
            Boundary::Zero => {
                if inside(sx, w) && inside(sy, h) {
                    image.at(sx as usize, sy as usize, c)
                } else {
                    0.0
                }
            }
            Boundary::Nearest => image.at(
                sx.clamp(0, w as isize - 1) as usize,
                sy.clamp(0, h as isize - 1) as usize,
                c,
            ),
            Boundary::Reflect => image.at(reflect(sx, w), reflect(sy, h), c),
            Boundary::DontCompute => unreachable!(),
        }
    };
    ImageRaster::from_fn(w, h, 1, |x, y, _| {
        let mut acc = 0.0;
        for ix in 0..kw {
            for iy in 0..kh {
                let sx = x as isize - ox + ix as isize;
                let sy = y as isize - oy + iy as isize;
                for c in 0..kd {
                    acc += sample(sx, sy, c) * kernel.at(ix, iy, c);
                }
            }
        }
        acc
    })
}

/// Channel-wise `p × p` average pooling with stride `p` (no padding).
pub fn avg_pool(image: &ImageRaster, p: usize) -> Result<ImageRaster> {
    if p == 0 || p > image.width() || p > image.height() {
        bail!(
            "pool size {p} does not fit a {}×{} image",
            image.width(),
            image.height()
        );
    }
    let scale = 1.0 / (p * p) as f64;
    ImageRaster::from_fn(
        image.width() / p,
        image.height() / p,
        image.channels(),
        |x, y, c| {
            let mut acc = 0.0;
            for dy in 0..p {
                for dx in 0..p {
                    acc += image.at(p * x + dx, p * y + dy, c);
                }
            }
            acc * scale
        },
    )
}
