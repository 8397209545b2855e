//! SVG heatmaps of confusion matrices and block tiling for large K.

use std::fmt::Write as _;
use std::ops::Range;

use serde::Serialize;

use crate::confmat::ConfusionMatrix;
use crate::error::{bail, Result};
use crate::ordering::Permutation;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapOptions {
    pub zero_diagonal: bool,
    pub row_normalize: bool,
    /// Map `ln(1 + v)` instead of `v`.
    pub log_scale: bool,
    pub cell_px: f64,
    pub show_labels: bool,
}

impl Default for HeatmapOptions {
    fn default() -> Self {
        Self {
            zero_diagonal: false,
            row_normalize: false,
            log_scale: false,
            cell_px: 12.0,
            show_labels: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub svg: String,
    /// Every displayed value was zero; the grid is all white.
    pub blank: bool,
}

/// Displayed values in display order, after zeroing, normalization and scaling.
pub fn display_values(
    c: &ConfusionMatrix,
    order: &Permutation,
    opts: &HeatmapOptions,
) -> Result<Vec<Vec<f64>>> {
    let p = c.permuted(order)?;
    let k = p.k();
    let mut rows: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if opts.zero_diagonal && i == j {
                        0.0
                    } else {
                        p.get(i, j) as f64
                    }
                })
                .collect()
        })
        .collect();
    if opts.row_normalize {
        for row in &mut rows {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
    }
    if opts.log_scale {
        rows.iter_mut().flatten().for_each(|v| *v = v.ln_1p());
    }
    Ok(rows)
}

/// Grayscale level for `v`: 255 is white (zero), 0 is black (the maximum).
pub fn gray_level(v: f64, vmax: f64) -> u8 {
    if vmax <= 0.0 {
        return 255;
    }
    (255.0 * (1.0 - v / vmax)).round().clamp(0.0, 255.0) as u8
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn heatmap(c: &ConfusionMatrix, order: &Permutation, opts: &HeatmapOptions) -> Result<Heatmap> {
    if !(opts.cell_px.is_finite() && opts.cell_px > 0.0) {
        bail!("cell size must be positive, got {}", opts.cell_px);
    }
    let values = display_values(c, order, opts)?;
    let k = values.len();
    let vmax = values.iter().flatten().copied().fold(0.0, f64::max);
    let cell = opts.cell_px;
    let font = (cell * 0.8).min(12.0);
    let labels: Vec<&str> = order
        .order()
        .iter()
        .map(|&i| c.labels()[i].as_str())
        .collect();
    let margin = if opts.show_labels {
        let longest = labels.iter().map(|l| l.chars().count()).max().unwrap_or(0);
        longest as f64 * font * 0.6 + 4.0
    } else {
        0.0
    };
    let side = margin + cell * k as f64;

    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{side:.2}\" height=\"{side:.2}\" viewBox=\"0 0 {side:.2} {side:.2}\">"
    );
    let _ = writeln!(
        svg,
        "<rect x=\"0.00\" y=\"0.00\" width=\"{side:.2}\" height=\"{side:.2}\" fill=\"#ffffff\"/>"
    );
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let g = gray_level(v, vmax);
            let _ = writeln!(
                svg,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{cell:.2}\" height=\"{cell:.2}\" fill=\"#{g:02x}{g:02x}{g:02x}\"/>",
                margin + j as f64 * cell,
                margin + i as f64 * cell,
            );
        }
    }
    if opts.show_labels {
        let _ = writeln!(
            svg,
            "<g font-family=\"monospace\" font-size=\"{font:.2}\" fill=\"#000000\">"
        );
        for (i, label) in labels.iter().enumerate() {
            let centre = margin + (i as f64 + 0.5) * cell;
            let label = escape(label);
            let _ = writeln!(
                svg,
                "<text x=\"{:.2}\" y=\"{centre:.2}\" text-anchor=\"end\" dominant-baseline=\"middle\">{label}</text>",
                margin - 2.0
            );
            let _ = writeln!(
                svg,
                "<text x=\"{centre:.2}\" y=\"{:.2}\" text-anchor=\"start\" dominant-baseline=\"middle\" transform=\"rotate(-90 {centre:.2} {:.2})\">{label}</text>",
                margin - 2.0,
                margin - 2.0
            );
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    Ok(Heatmap {
        svg,
        blank: vmax == 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Tiling {
    /// Consecutive display-order ranges.
    pub blocks: Vec<Range<usize>>,
    /// Block pairs `(row block, column block)` that need their own matrix.
    pub tiles: Vec<(usize, usize)>,
    pub matrices: usize,
}

/// Splits the display order into chunks of `max_block` and counts the
/// matrices needed: every diagonal block, plus each off-diagonal block
/// whose confusion mass exceeds `mass_threshold`.
pub fn tile_blocks(
    c: &ConfusionMatrix,
    order: &Permutation,
    max_block: usize,
    mass_threshold: u64,
) -> Result<Tiling> {
    if max_block < 2 {
        bail!("max block size must be at least 2, got {max_block}");
    }
    let p = c.permuted(order)?;
    let k = p.k();
    let blocks: Vec<Range<usize>> = (0..k)
        .step_by(max_block)
        .map(|s| s..(s + max_block).min(k))
        .collect();
    let mut tiles = Vec::new();
    for (a, ra) in blocks.iter().enumerate() {
        for (b, rb) in blocks.iter().enumerate() {
            let keep = a == b || {
                let mass: u64 = ra
                    .clone()
                    .flat_map(|i| rb.clone().map(move |j| (i, j)))
                    .map(|(i, j)| p.get(i, j))
                    .sum();
                mass > mass_threshold
            };
            if keep {
                tiles.push((a, b));
            }
        }
    }
    Ok(Tiling {
        matrices: tiles.len(),
        blocks,
        tiles,
    })
}
