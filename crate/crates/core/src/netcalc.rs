//! Parameter, FLOPs and memory accounting for [`ArchSpec`]s.
//!
//! Conventions:
//!
//! * conv: `n·(d·k_w·k_h + bias)` parameters, `(2·k_w·k_h·d − 1)·n·w·h`
//!   FLOPs (bias adds ignored);
//! * fc: `n·(k + bias)` parameters, `2·n·k` FLOPs;
//! * batch norm: two parameters per channel, FLOPs equal to its parameters;
//! * activations: `act_cost` FLOPs per output element (default 5);
//! * pooling: five FLOPs per kernel application, `w·h·c / s²` applications;
//! * global average pooling: one FLOP per channel.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::netarch::{ArchSpec, LayerSpec, PoolKind};

pub const DEFAULT_ACT_COST: u64 = 5;
const POOL_APPLICATION_COST: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseBlockParams {
    /// `L + 9n + 9n²(L² − L)/2`, the closed form as usually printed.
    pub printed: u64,
    /// `L + 9n + 9n²·L(L+1)/2`, i.e. evaluating the sum `Σ_{i=0}^{L} (L − i)`.
    pub summation: u64,
}

/// Parameter count of a 3×3 dense block of depth `depth` and growth rate
/// `growth`, under both readings of the closed form.
pub fn dense_block_params(depth: u64, growth: u64) -> Result<DenseBlockParams> {
    if depth == 0 || growth == 0 {
        bail!("dense block depth and growth must be at least 1");
    }
    let (l, n) = (depth, growth);
    let base = l + 9 * n;
    Ok(DenseBlockParams {
        printed: base + 9 * n * n * (l * l - l) / 2,
        summation: base + 9 * n * n * (l * (l + 1) / 2),
    })
}

/// Parameters per layer.
pub fn count_params(arch: &ArchSpec) -> Vec<u64> {
    (0..arch.layers.len())
        .map(|i| layer_params(arch, i))
        .collect()
}

fn layer_params(arch: &ArchSpec, i: usize) -> u64 {
    let Some(input) = arch.input_shape(i) else {
        return 0;
    };
    match &arch.layers[i] {
        LayerSpec::Conv {
            filters,
            kernel,
            bias,
            in_channels,
            ..
        } => {
            let depth = in_channels.unwrap_or(input.channels);
            filters * (depth * kernel.0 * kernel.1 + u64::from(*bias))
        }
        LayerSpec::Fc { units, bias } => units * (input.numel() + u64::from(*bias)),
        LayerSpec::Bn => 2 * input.channels,
        LayerSpec::Pool {
            pool: PoolKind::ScaledAvg,
            ..
        } => 2,
        LayerSpec::Dense { depth, growth } => dense_block_params(*depth, *growth)
            .map(|p| p.summation)
            .unwrap_or(0),
        _ => 0,
    }
}

/// FLOPs per layer with `act_cost` operations per activation.
pub fn count_flops(arch: &ArchSpec, act_cost: u64) -> Vec<u64> {
    (0..arch.layers.len())
        .map(|i| layer_flops(arch, i, act_cost))
        .collect()
}

fn layer_flops(arch: &ArchSpec, i: usize, act_cost: u64) -> u64 {
    let Some(input) = arch.input_shape(i) else {
        return 0;
    };
    let out = arch.shapes[i];
    match &arch.layers[i] {
        LayerSpec::Conv {
            filters,
            kernel,
            in_channels,
            ..
        } => {
            let depth = in_channels.unwrap_or(input.channels);
            (2 * kernel.0 * kernel.1 * depth - 1) * (filters * out.width * out.height)
        }
        LayerSpec::Fc { units, .. } => 2 * units * input.numel(),
        LayerSpec::Act { .. } => act_cost * out.numel(),
        LayerSpec::Bn => layer_params(arch, i),
        LayerSpec::Pool { stride, .. } => {
            POOL_APPLICATION_COST
                * (input.width * input.height * input.channels / (stride * stride))
        }
        LayerSpec::Gap => input.channels,
        _ => 0,
    }
}

/// Output floats per layer, the input layer included.
pub fn count_out_floats(arch: &ArchSpec) -> Vec<u64> {
    arch.shapes.iter().map(|s| s.numel()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Footprint {
    pub training_bytes: u64,
    pub inference_bytes: u64,
}

/// Memory estimates in bytes.
///
/// Training keeps every layer output of the mini-batch plus the weights and
/// `optimizer_factor` extra values per weight. Inference holds the weights
/// and the largest pair of consecutive layer outputs (input included).
pub fn memory_footprint(
    arch: &ArchSpec,
    batch: u64,
    bytes_per_value: u64,
    optimizer_factor: u64,
) -> Result<Footprint> {
    if batch == 0 {
        bail!("batch size must be at least 1");
    }
    if bytes_per_value == 0 {
        bail!("bytes per value must be at least 1");
    }
    let params: u64 = count_params(arch).iter().sum();
    let outs = count_out_floats(arch);
    let activations: u64 = outs.iter().skip(1).sum();
    let peak_pair = outs
        .windows(2)
        .map(|w| w[0] + w[1])
        .max()
        .unwrap_or(outs[0]);
    Ok(Footprint {
        training_bytes: bytes_per_value * (batch * activations + params * (1 + optimizer_factor)),
        inference_bytes: bytes_per_value * (peak_pair + params),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

impl Optimizer {
    /// Extra values stored per weight.
    pub fn factor(self) -> u64 {
        match self {
            Optimizer::Sgd => 0,
            Optimizer::Adam => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostOptions {
    pub act_cost: u64,
    pub batch: u64,
    pub bytes_per_value: u64,
    pub optimizer_factor: u64,
}

impl Default for CostOptions {
    fn default() -> Self {
        Self {
            act_cost: DEFAULT_ACT_COST,
            batch: 1,
            bytes_per_value: 4,
            optimizer_factor: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostRow {
    pub name: String,
    pub description: String,
    pub output: String,
    pub params: u64,
    pub flops: u64,
    pub out_floats: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostTotals {
    pub params: u64,
    pub flops: u64,
    pub out_floats: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub rows: Vec<CostRow>,
    pub totals: CostTotals,
    pub batch: u64,
    pub bytes_per_value: u64,
    pub optimizer_factor: u64,
    pub act_cost: u64,
    pub footprint: Footprint,
}

pub fn cost_report(arch: &ArchSpec, opts: CostOptions) -> Result<CostReport> {
    let params = count_params(arch);
    let flops = count_flops(arch, opts.act_cost);
    let outs = count_out_floats(arch);
    let mut counters = std::collections::HashMap::<&str, usize>::new();
    let rows: Vec<CostRow> = arch
        .layers
        .iter()
        .enumerate()
        .map(|(i, layer)| {
            let kw = layer.keyword();
            let n = counters.entry(kw).or_default();
            *n += 1;
            CostRow {
                name: if kw == "input" {
                    kw.to_string()
                } else {
                    format!("{kw}{n}")
                },
                description: describe(arch, i),
                output: arch.shapes[i].to_string(),
                params: params[i],
                flops: flops[i],
                out_floats: outs[i],
            }
        })
        .collect();
    let totals = CostTotals {
        params: params.iter().sum(),
        flops: flops.iter().sum(),
        out_floats: outs.iter().sum(),
    };
    Ok(CostReport {
        rows,
        totals,
        batch: opts.batch,
        bytes_per_value: opts.bytes_per_value,
        optimizer_factor: opts.optimizer_factor,
        act_cost: opts.act_cost,
        footprint: memory_footprint(
            arch,
            opts.batch,
            opts.bytes_per_value,
            opts.optimizer_factor,
        )?,
    })
}

fn describe(arch: &ArchSpec, i: usize) -> String {
    let input = arch.input_shape(i);
    match &arch.layers[i] {
        LayerSpec::Input { .. } => "Input".into(),
        LayerSpec::Conv {
            filters,
            kernel,
            stride,
            padding,
            in_channels,
            ..
        } => {
            let d = in_channels.unwrap_or_else(|| input.map_or(0, |s| s.channels));
            let v = if *padding == crate::netarch::Padding::Valid {
                " (v)"
            } else {
                ""
            };
            format!(
                "Convolution{v} {filters} @ {}×{}×{d} /{stride}",
                kernel.0, kernel.1
            )
        }
        LayerSpec::Fc { units, .. } => format!("Fully connected {units}"),
        LayerSpec::Pool {
            pool,
            kernel,
            stride,
            ..
        } => {
            let name = match pool {
                PoolKind::Max => "Max pooling",
                PoolKind::Avg => "Avg pooling",
                PoolKind::ScaledAvg => "Scaled avg pooling",
            };
            format!("{name} {}×{} /{stride}", kernel.0, kernel.1)
        }
        LayerSpec::Gap => "Global avg pooling".into(),
        LayerSpec::Bn => "BN".into(),
        LayerSpec::Act { name } => format!("Activation {name}"),
        LayerSpec::Dropout { rate } => format!("Dropout {rate}"),
        LayerSpec::Dense { depth, growth } => format!("Dense block L={depth} n={growth}"),
        LayerSpec::Lcn => "LCN".into(),
        LayerSpec::Flatten => "Flatten".into(),
    }
}

/// Groups digits in threes separated by spaces: `1736704` → `1 736 704`.
pub fn group_digits(v: u64) -> String {
    let s = v.to_string();
    let mut out = String::with_capacity(s.len() + s.len() / 3);
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(' ');
        }
        out.push(ch);
    }
    out
}

impl CostReport {
    /// Column-aligned table: type, parameters, FLOPs, output size.
    pub fn to_table(&self) -> String {
        let header = ["#", "Type", "Parameters", "FLOPs", "Output size"];
        let mut cells: Vec<[String; 5]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.name.clone(),
                    r.description.clone(),
                    group_digits(r.params),
                    group_digits(r.flops),
                    r.output.clone(),
                ]
            })
            .collect();
        cells.push([
            "Σ".into(),
            String::new(),
            group_digits(self.totals.params),
            group_digits(self.totals.flops),
            group_digits(self.totals.out_floats),
        ]);
        let mut widths = header.map(|h| h.chars().count());
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let mut line = |row: &[String]| {
            let mut l = String::new();
            for (j, (c, w)) in row.iter().zip(widths).enumerate() {
                let pad = w - c.chars().count();
                if j > 0 {
                    l.push_str("  ");
                }
                if (2..4).contains(&j) {
                    l.push_str(&" ".repeat(pad));
                    l.push_str(c);
                } else {
                    l.push_str(c);
                    l.push_str(&" ".repeat(pad));
                }
            }
            out.push_str(l.trim_end());
            out.push('\n');
        };
        line(&header.map(String::from));
        for row in &cells {
            line(row);
        }
        let _ = writeln!(
            out,
            "\nmemory: training {} B (batch {}, {} B/value, optimizer factor {}), inference {} B",
            group_digits(self.footprint.training_bytes),
            self.batch,
            self.bytes_per_value,
            self.optimizer_factor,
            group_digits(self.footprint.inference_bytes)
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netarch::parse_arch;

    #[test]
    fn dense_block_examples() {
        assert_eq!(
            dense_block_params(1, 1).unwrap(),
            DenseBlockParams {
                printed: 10,
                summation: 19
            }
        );
        assert_eq!(
            dense_block_params(2, 12).unwrap(),
            DenseBlockParams {
                printed: 1406,
                summation: 3998
            }
        );
        assert!(dense_block_params(0, 4).is_err());
    }

    #[test]
    fn fc_flops() {
        let a = parse_arch("input 5 1 1\nfc 10\n").unwrap();
        assert_eq!(count_flops(&a, 5), vec![0, 100]);
        let a = parse_arch("input 5 1 1\nfc 10\nact tanh\n").unwrap();
        assert_eq!(count_flops(&a, 5).iter().sum::<u64>(), 150);
        assert_eq!(count_params(&a), vec![0, 60, 0]);
    }

    #[test]
    fn footprint_single_fc() {
        let a = parse_arch("input 5 1 1\nfc 10\n").unwrap();
        let f = memory_footprint(&a, 1, 4, 0).unwrap();
        assert_eq!(f.training_bytes, 280);
        assert_eq!(f.inference_bytes, 4 * (15 + 60));
        let adam = memory_footprint(&a, 1, 4, 2).unwrap();
        assert_eq!(
            adam.training_bytes - 4 * 10,
            3 * (f.training_bytes - 4 * 10)
        );
        assert!(memory_footprint(&a, 0, 4, 0).is_err());
    }

    #[test]
    fn conv_on_unit_map_equals_fc() {
        for (d, n, bias) in [(7, 3, true), (512, 10, false), (1, 1, true)] {
            let nb = if bias { "" } else { " nobias" };
            let conv = parse_arch(&format!("input {d} 1 1\nconv {n} 1x1{nb}\n")).unwrap();
            let fc = parse_arch(&format!("input {d} 1 1\nfc {n}{nb}\n")).unwrap();
            assert_eq!(count_params(&conv), count_params(&fc));
        }
    }

    #[test]
    fn flatten_is_free() {
        let a = parse_arch("input 2 4 4\nconv 3 3x3\nfc 5\n").unwrap();
        let b = parse_arch("input 2 4 4\nconv 3 3x3\nflatten\nfc 5\n").unwrap();
        let sum = |v: Vec<u64>| v.iter().sum::<u64>();
        assert_eq!(sum(count_params(&a)), sum(count_params(&b)));
        assert_eq!(sum(count_flops(&a, 5)), sum(count_flops(&b, 5)));
    }

    #[test]
    fn grouped_conv_override() {
        let a = parse_arch("input 96 27 27\nconv 256 5x5 in=48\n").unwrap();
        assert_eq!(count_params(&a)[1], 307_456);
    }

    #[test]
    fn digit_grouping() {
        assert_eq!(group_digits(0), "0");
        assert_eq!(group_digits(999), "999");
        assert_eq!(group_digits(1000), "1 000");
        assert_eq!(group_digits(1_736_704), "1 736 704");
    }

    #[test]
    fn report_totals_are_column_sums() {
        let a = parse_arch("input 3 8 8\nconv 4 3x3\nbn\nact relu\nmaxpool 2x2\nfc 2\n").unwrap();
        let r = cost_report(&a, CostOptions::default()).unwrap();
        assert_eq!(
            r.totals.params,
            r.rows.iter().map(|x| x.params).sum::<u64>()
        );
        assert_eq!(r.totals.flops, r.rows.iter().map(|x| x.flops).sum::<u64>());
        assert_eq!(r.rows[1].name, "conv1");
        assert!(r.to_table().contains("Σ"));
    }
}
