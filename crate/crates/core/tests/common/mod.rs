//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use convlens::datagen::{Boundary, ImageRaster};
use convlens::predops::FilterTensor;
use convlens::rng::SplitMix64;
use convlens::ConfusionMatrix;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn random_matrix(rng: &mut SplitMix64, k: usize, max_cell: u64) -> ConfusionMatrix {
    loop {
        let rows: Vec<Vec<u64>> = (0..k)
            .map(|_| {
                (0..k)
                    .map(|_| rng.below(max_cell as usize + 1) as u64)
                    .collect()
            })
            .collect();
        if rows.iter().flatten().any(|&v| v > 0) {
            return ConfusionMatrix::unlabeled(rows).unwrap();
        }
    }
}

/// Σ_ij C[o_i][o_j]·|i − j| straight from the definition.
pub fn objective(c: &ConfusionMatrix, order: &[usize]) -> u64 {
    let k = order.len();
    let mut f = 0;
    for i in 0..k {
        for j in 0..k {
            f += c.get(order[i], order[j]) * i.abs_diff(j) as u64;
        }
    }
    f
}

/// Minimum objective over all permutations (Heap's algorithm).
pub fn optimum(c: &ConfusionMatrix) -> u64 {
    let k = c.k();
    let mut a: Vec<usize> = (0..k).collect();
    let mut stack = vec![0usize; k];
    let mut best = objective(c, &a);
    let mut i = 1;
    while i < k {
        if stack[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(stack[i], i);
            }
            best = best.min(objective(c, &a));
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    best
}

/// ρ_k by explicit translation of `b` into a zero-filled copy.
pub fn rho(a: &FilterTensor, b: &FilterTensor, k: usize) -> f64 {
    let (w, h, d) = a.dims();
    let norm = |f: &FilterTensor| f.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let denom = norm(a) * norm(b);
    let k = k as isize;
    let mut best = f64::NEG_INFINITY;
    for dx in -k..=k {
        for dy in -k..=k {
            if dx == 0 && dy == 0 {
                continue;
            }
            let mut shifted = vec![0.0; w * h * d];
            for x in 0..w as isize {
                for y in 0..h as isize {
                    let (sx, sy) = (x - dx, y - dy);
                    if sx < 0 || sy < 0 || sx >= w as isize || sy >= h as isize {
                        continue;
                    }
                    for c in 0..d {
                        shifted[(x as usize * h + y as usize) * d + c] =
                            b.at(sx as usize, sy as usize, c);
                    }
                }
            }
            let dot: f64 = a.values().iter().zip(&shifted).map(|(p, q)| p * q).sum();
            best = best.max(dot / denom);
        }
    }
    best
}

fn fetch(img: &ImageRaster, x: isize, y: isize, c: usize, boundary: Boundary) -> f64 {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mirror = |v: isize, n: isize| {
        let mut v = v;
        while v < 0 || v >= n {
            if v < 0 {
                v = -v;
            }
            if v >= n {
                v = 2 * (n - 1) - v;
            }
        }
        v
    };
    let (x, y) = match boundary {
        Boundary::Zero | Boundary::DontCompute => {
            if x < 0 || y < 0 || x >= w || y >= h {
                return 0.0;
            }
            (x, y)
        }
        Boundary::Nearest => (x.clamp(0, w - 1), y.clamp(0, h - 1)),
        Boundary::Reflect => {
            if w == 1 || h == 1 {
                (
                    if w == 1 { 0 } else { mirror(x, w) },
                    if h == 1 { 0 } else { mirror(y, h) },
                )
            } else {
                (mirror(x, w), mirror(y, h))
            }
        }
    };
    img.at(x as usize, y as usize, c)
}

/// Nested-loop filtering; returns (width, height, row-major values).
pub fn filter_oracle(
    img: &ImageRaster,
    f: &FilterTensor,
    boundary: Boundary,
) -> (usize, usize, Vec<f64>) {
    let (kw, kh, d) = f.dims();
    let (w, h) = (img.width(), img.height());
    let (ow, oh, ox, oy) = match boundary {
        Boundary::DontCompute => (w + 1 - kw, h + 1 - kh, 0, 0),
        _ => (w, h, (kw as isize - 1) / 2, (kh as isize - 1) / 2),
    };
    let mut out = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for ix in 0..kw {
                for iy in 0..kh {
                    for c in 0..d {
                        let sx = x as isize + ix as isize - ox;
                        let sy = y as isize + iy as isize - oy;
                        acc += fetch(img, sx, sy, c, boundary) * f.at(ix, iy, c);
                    }
                }
            }
            out.push(acc);
        }
    }
    (ow, oh, out)
}

pub fn random_filter(rng: &mut SplitMix64, w: usize, h: usize, d: usize) -> FilterTensor {
    loop {
        let values: Vec<f64> = (0..w * h * d).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
        if values.iter().any(|v| *v != 0.0) {
            return FilterTensor::new(w, h, d, values).unwrap();
        }
    }
}

pub fn random_image(rng: &mut SplitMix64, w: usize, h: usize, c: usize) -> ImageRaster {
    ImageRaster::from_fn(w, h, c, |_, _, _| rng.next_f64() * 10.0 - 5.0).unwrap()
}
