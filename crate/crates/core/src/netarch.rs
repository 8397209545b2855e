//! Line-oriented description language for sequential CNNs.
//!
//! ```text
//! # comment
//! input 3 32 32
//! conv 32 3x3 /1 same
//! bn
//! act elu
//! maxpool 2x2
//! conv K 1x1 nobias     # `K` is replaced by the class count
//! gap
//! ```
//!
//! One layer per line:
//!
//! | line | defaults |
//! |------|----------|
//! | `input C H W` | |
//! | `conv N KxK [/S] [same\|valid] [nobias] [in=D]` | stride 1, same, bias |
//! | `fc N [nobias]` | bias |
//! | `maxpool\|avgpool KxK [/S] [same\|valid]` | stride = kernel, valid |
//! | `scaledavgpool KxK [/S]` | stride = kernel, valid |
//! | `gap`, `bn`, `lcn`, `flatten` | |
//! | `act NAME`, `dropout P`, `dense L G` | |

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Same,
    Valid,
}

impl Padding {
    fn output(self, input: u64, kernel: u64, stride: u64) -> Option<u64> {
        match self {
            Padding::Same => Some(input.div_ceil(stride)),
            Padding::Valid => (kernel <= input).then(|| (input - kernel) / stride + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    Max,
    Avg,
    /// LeNet-style subsampling with a trainable scale and offset.
    ScaledAvg,
}

impl PoolKind {
    fn keyword(self) -> &'static str {
        match self {
            PoolKind::Max => "maxpool",
            PoolKind::Avg => "avgpool",
            PoolKind::ScaledAvg => "scaledavgpool",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    Input {
        channels: u64,
        height: u64,
        width: u64,
    },
    Conv {
        filters: u64,
        kernel: (u64, u64),
        stride: u64,
        padding: Padding,
        bias: bool,
        /// Overrides the inferred input depth (grouped convolutions).
        in_channels: Option<u64>,
    },
    Fc {
        units: u64,
        bias: bool,
    },
    Pool {
        pool: PoolKind,
        kernel: (u64, u64),
        stride: u64,
        padding: Padding,
    },
    Gap,
    Bn,
    Act {
        name: String,
    },
    Dropout {
        rate: f64,
    },
    Dense {
        depth: u64,
        growth: u64,
    },
    Lcn,
    Flatten,
}

impl LayerSpec {
    pub fn keyword(&self) -> &'static str {
        match self {
            LayerSpec::Input { .. } => "input",
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Fc { .. } => "fc",
            LayerSpec::Pool { pool, .. } => pool.keyword(),
            LayerSpec::Gap => "gap",
            LayerSpec::Bn => "bn",
            LayerSpec::Act { .. } => "act",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Lcn => "lcn",
            LayerSpec::Flatten => "flatten",
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.keyword())?;
        match self {
            LayerSpec::Input {
                channels,
                height,
                width,
            } => write!(f, " {channels} {height} {width}"),
            LayerSpec::Conv {
                filters,
                kernel,
                stride,
                padding,
                bias,
                in_channels,
            } => {
                write!(
                    f,
                    " {filters} {}x{} /{stride} {}",
                    kernel.0,
                    kernel.1,
                    pad_word(*padding)
                )?;
                if !bias {
                    write!(f, " nobias")?;
                }
                if let Some(d) = in_channels {
                    write!(f, " in={d}")?;
                }
                Ok(())
            }
            LayerSpec::Fc { units, bias } => {
                write!(f, " {units}")?;
                if !bias {
                    write!(f, " nobias")?;
                }
                Ok(())
            }
            LayerSpec::Pool {
                pool,
                kernel,
                stride,
                padding,
            } => {
                write!(f, " {}x{} /{stride}", kernel.0, kernel.1)?;
                if *pool != PoolKind::ScaledAvg {
                    write!(f, " {}", pad_word(*padding))?;
                }
                Ok(())
            }
            LayerSpec::Act { name } => write!(f, " {name}"),
            LayerSpec::Dropout { rate } => write!(f, " {rate}"),
            LayerSpec::Dense { depth, growth } => write!(f, " {depth} {growth}"),
            LayerSpec::Gap | LayerSpec::Bn | LayerSpec::Lcn | LayerSpec::Flatten => Ok(()),
        }
    }
}

fn pad_word(p: Padding) -> &'static str {
    match p {
        Padding::Same => "same",
        Padding::Valid => "valid",
    }
}

/// Feature-map shape after a layer. Vectors are `n × 1 × 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub channels: u64,
    pub height: u64,
    pub width: u64,
}

impl Shape {
    pub fn numel(&self) -> u64 {
        self.channels * self.height * self.width
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} @ {}×{}", self.channels, self.height, self.width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub layers: Vec<LayerSpec>,
    /// Output shape of each layer, aligned with `layers`.
    pub shapes: Vec<Shape>,
}

impl ArchSpec {
    /// Builds a spec from layers, inferring shapes.
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let mut shapes: Vec<Shape> = Vec::with_capacity(layers.len());
        for (i, layer) in layers.iter().enumerate() {
            let shape = infer(shapes.last(), layer).map_err(|m| Error::syntax(i + 1, 1, m))?;
            shapes.push(shape);
        }
        if shapes.is_empty() {
            return Err(Error::invalid("architecture has no layers"));
        }
        Ok(Self { layers, shapes })
    }

    /// Input shape seen by layer `i` (`None` for the input layer).
    pub fn input_shape(&self, i: usize) -> Option<Shape> {
        i.checked_sub(1).map(|p| self.shapes[p])
    }

    /// Round-trippable text form.
    pub fn to_text(&self) -> String {
        self.layers.iter().map(|l| format!("{l}\n")).collect()
    }
}

fn infer(prev: Option<&Shape>, layer: &LayerSpec) -> std::result::Result<Shape, String> {
    let prev = match (prev, layer) {
        (
            None,
            LayerSpec::Input {
                channels,
                height,
                width,
            },
        ) => {
            if *channels == 0 || *height == 0 || *width == 0 {
                return Err("input dimensions must be positive".into());
            }
            return Ok(Shape {
                channels: *channels,
                height: *height,
                width: *width,
            });
        }
        (Some(_), LayerSpec::Input { .. }) => return Err("input may only appear first".into()),
        (None, l) => return Err(format!("`{}` before the input layer", l.keyword())),
        (Some(p), _) => *p,
    };
    let spatial = |kernel: (u64, u64), stride: u64, padding: Padding| {
        let h = padding.output(prev.height, kernel.1, stride);
        let w = padding.output(prev.width, kernel.0, stride);
        match (h, w) {
            (Some(h), Some(w)) if h > 0 && w > 0 => Ok((h, w)),
            _ => Err(format!(
                "{}x{} kernel does not fit a {}×{} input under valid padding",
                kernel.0, kernel.1, prev.height, prev.width
            )),
        }
    };
    Ok(match layer {
        LayerSpec::Input { .. } => unreachable!(),
        LayerSpec::Conv {
            filters,
            kernel,
            stride,
            padding,
            ..
        } => {
            let (height, width) = spatial(*kernel, *stride, *padding)?;
            Shape {
                channels: *filters,
                height,
                width,
            }
        }
        LayerSpec::Pool {
            kernel,
            stride,
            padding,
            ..
        } => {
            let (height, width) = spatial(*kernel, *stride, *padding)?;
            Shape {
                channels: prev.channels,
                height,
                width,
            }
        }
        LayerSpec::Fc { units, .. } => Shape {
            channels: *units,
            height: 1,
            width: 1,
        },
        LayerSpec::Gap => Shape {
            height: 1,
            width: 1,
            ..prev
        },
        LayerSpec::Flatten => Shape {
            channels: prev.numel(),
            height: 1,
            width: 1,
        },
        LayerSpec::Dense { depth, growth } => Shape {
            channels: prev.channels + depth * growth,
            ..prev
        },
        LayerSpec::Bn | LayerSpec::Act { .. } | LayerSpec::Dropout { .. } | LayerSpec::Lcn => prev,
    })
}

/// Parses architecture text. A bare `K` in a count position requires
/// `classes`; see [`parse_arch_with`].
pub fn parse_arch(text: &str) -> Result<ArchSpec> {
    parse_arch_with(text, None)
}

/// Parses architecture text, substituting `classes` for the symbol `K`.
pub fn parse_arch_with(text: &str, classes: Option<u64>) -> Result<ArchSpec> {
    let mut layers = Vec::new();
    let mut shapes: Vec<Shape> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens = tokenize(content);
        if tokens.is_empty() {
            continue;
        }
        let layer = LineParser {
            line: line_no,
            tokens: &tokens,
            pos: 0,
            classes,
            end_col: content.trim_end().chars().count() + 1,
        }
        .parse()?;
        let shape =
            infer(shapes.last(), &layer).map_err(|m| Error::syntax(line_no, tokens[0].0, m))?;
        shapes.push(shape);
        layers.push(layer);
    }
    if layers.is_empty() {
        return Err(Error::invalid("architecture has no layers"));
    }
    Ok(ArchSpec { layers, shapes })
}

/// Whitespace-separated tokens with their 1-based starting column.
fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (col, (idx, ch)) in line.char_indices().enumerate() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some((col + 1, idx)),
            (true, Some((c, s))) => {
                out.push((c, &line[s..idx]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some((c, s)) = start {
        out.push((c, &line[s..]));
    }
    out
}

struct LineParser<'a> {
    line: usize,
    tokens: &'a [(usize, &'a str)],
    pos: usize,
    classes: Option<u64>,
    end_col: usize,
}

impl<'a> LineParser<'a> {
    fn err_at(&self, col: usize, msg: impl Into<String>) -> Error {
        Error::syntax(self.line, col, msg)
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let t = self
            .tokens
            .get(self.pos)
            .copied()
            .ok_or_else(|| self.err_at(self.end_col, format!("expected {what}")))?;
        self.pos += 1;
        Ok(t)
    }

    fn count(&mut self, what: &str) -> Result<u64> {
        let (col, tok) = self.next(what)?;
        self.count_token(col, tok, what)
    }

    fn count_token(&self, col: usize, tok: &str, what: &str) -> Result<u64> {
        let v = if tok == "K" {
            self.classes
                .ok_or_else(|| self.err_at(col, "symbolic `K` needs a class count"))?
        } else if tok.starts_with('-') {
            return Err(self.err_at(col, format!("{what} must not be negative")));
        } else {
            tok.parse::<u64>()
                .map_err(|_| self.err_at(col, format!("expected {what}, found `{tok}`")))?
        };
        if v == 0 {
            return Err(self.err_at(col, format!("{what} must be at least 1")));
        }
        Ok(v)
    }

    fn kernel(&mut self) -> Result<(u64, u64)> {
        let (col, tok) = self.next("kernel size WxH")?;
        let (w, h) = tok
            .split_once(['x', 'X'])
            .ok_or_else(|| self.err_at(col, format!("expected kernel size WxH, found `{tok}`")))?;
        let w = self.count_token(col, w, "kernel width")?;
        let h = self.count_token(col + w.to_string().len() + 1, h, "kernel height")?;
        Ok((w, h))
    }

    fn peek(&self) -> Option<(usize, &'a str)> {
        self.tokens.get(self.pos).copied()
    }

    fn stride(&mut self, default: u64) -> Result<u64> {
        match self.peek() {
            Some((col, tok)) if tok.starts_with('/') => {
                self.pos += 1;
                let rest = &tok[1..];
                if rest.is_empty() {
                    self.count("stride")
                } else {
                    self.count_token(col + 1, rest, "stride")
                }
            }
            _ => Ok(default),
        }
    }

    fn finish(&self) -> Result<()> {
        match self.peek() {
            Some((col, tok)) => Err(self.err_at(col, format!("unexpected `{tok}`"))),
            None => Ok(()),
        }
    }

    fn parse(mut self) -> Result<LayerSpec> {
        let (col, kw) = self.next("layer kind")?;
        let layer = match kw {
            "input" => LayerSpec::Input {
                channels: self.count("channel count")?,
                height: self.count("height")?,
                width: self.count("width")?,
            },
            "conv" => {
                let filters = self.count("filter count")?;
                let kernel = self.kernel()?;
                let stride = self.stride(1)?;
                let mut padding = Padding::Same;
                let mut bias = true;
                let mut in_channels = None;
                while let Some((c, tok)) = self.peek() {
                    self.pos += 1;
                    match tok {
                        "same" => padding = Padding::Same,
                        "valid" => padding = Padding::Valid,
                        "nobias" => bias = false,
                        t if t.starts_with("in=") => {
                            in_channels = Some(self.count_token(c + 3, &t[3..], "input depth")?)
                        }
                        t => return Err(self.err_at(c, format!("unexpected `{t}`"))),
                    }
                }
                LayerSpec::Conv {
                    filters,
                    kernel,
                    stride,
                    padding,
                    bias,
                    in_channels,
                }
            }
            "fc" => {
                let units = self.count("unit count")?;
                let mut bias = true;
                if let Some((c, tok)) = self.peek() {
                    if tok != "nobias" {
                        return Err(self.err_at(c, format!("unexpected `{tok}`")));
                    }
                    self.pos += 1;
                    bias = false;
                }
                LayerSpec::Fc { units, bias }
            }
            "maxpool" | "avgpool" | "scaledavgpool" => {
                let pool = match kw {
                    "maxpool" => PoolKind::Max,
                    "avgpool" => PoolKind::Avg,
                    _ => PoolKind::ScaledAvg,
                };
                let kernel = self.kernel()?;
                let stride = self.stride(kernel.0)?;
                let mut padding = Padding::Valid;
                if pool != PoolKind::ScaledAvg {
                    if let Some((c, tok)) = self.peek() {
                        padding = match tok {
                            "same" => Padding::Same,
                            "valid" => Padding::Valid,
                            t => return Err(self.err_at(c, format!("unexpected `{t}`"))),
                        };
                        self.pos += 1;
                    }
                }
                LayerSpec::Pool {
                    pool,
                    kernel,
                    stride,
                    padding,
                }
            }
            "gap" => LayerSpec::Gap,
            "bn" => LayerSpec::Bn,
            "lcn" => LayerSpec::Lcn,
            "flatten" => LayerSpec::Flatten,
            "act" => LayerSpec::Act {
                name: self.next("activation name")?.1.to_string(),
            },
            "dropout" => {
                let (c, tok) = self.next("dropout rate")?;
                let rate: f64 = tok
                    .parse()
                    .map_err(|_| self.err_at(c, format!("expected dropout rate, found `{tok}`")))?;
                if !(0.0..1.0).contains(&rate) {
                    return Err(self.err_at(c, "dropout rate must be in [0, 1)"));
                }
                LayerSpec::Dropout { rate }
            }
            "dense" => LayerSpec::Dense {
                depth: self.count("block depth")?,
                growth: self.count("growth rate")?,
            },
            other => return Err(self.err_at(col, format!("unknown layer kind `{other}`"))),
        };
        self.finish()?;
        Ok(layer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_first_conv() {
        let a = parse_arch("input 3 32 32\nconv 32 3x3 /1 same\n").unwrap();
        assert_eq!(a.layers.len(), 2);
        assert_eq!(a.shapes[1].to_string(), "32 @ 32×32");
    }

    #[test]
    fn lenet_valid_conv() {
        let a = parse_arch("input 1 32 32\nconv 6 5x5 valid\n").unwrap();
        assert_eq!(a.shapes[1].to_string(), "6 @ 28×28");
    }

    #[test]
    fn conv_without_input_fails() {
        let err = parse_arch("conv 8 3x3\n").unwrap_err();
        assert!(
            matches!(
                err,
                Error::Syntax {
                    line: 1,
                    column: 1,
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn defaults_and_comments() {
        let a = parse_arch(
            "# net\n\ninput 3 9 9  # rgb\nmaxpool 2x2\nconv 4 3x3\nfc 10\nact softmax\n",
        )
        .unwrap();
        assert_eq!(
            a.layers[1],
            LayerSpec::Pool {
                pool: PoolKind::Max,
                kernel: (2, 2),
                stride: 2,
                padding: Padding::Valid
            }
        );
        assert_eq!(
            a.shapes[1],
            Shape {
                channels: 3,
                height: 4,
                width: 4
            }
        );
        assert!(matches!(
            a.layers[2],
            LayerSpec::Conv {
                stride: 1,
                padding: Padding::Same,
                bias: true,
                in_channels: None,
                ..
            }
        ));
        assert_eq!(
            a.shapes[3],
            Shape {
                channels: 10,
                height: 1,
                width: 1
            }
        );
    }

    #[test]
    fn same_padding_rounds_up() {
        let a = parse_arch("input 1 7 5\nconv 2 3x3 /2\nmaxpool 2x2 same\n").unwrap();
        assert_eq!(
            a.shapes[1],
            Shape {
                channels: 2,
                height: 4,
                width: 3
            }
        );
        assert_eq!(
            a.shapes[2],
            Shape {
                channels: 2,
                height: 2,
                width: 2
            }
        );
    }

    #[test]
    fn symbolic_classes() {
        let text = "input 3 4 4\nconv K 1x1 nobias\n";
        assert!(parse_arch(text).is_err());
        let a = parse_arch_with(text, Some(43)).unwrap();
        assert_eq!(a.shapes[1].channels, 43);
    }

    #[test]
    fn error_positions() {
        let cases = [
            ("input 3 8 8\nconv 8 9x9 valid\n", 2, 1),
            ("input 3 8 8\nconv -3 3x3\n", 2, 6),
            ("input 3 8 8\npool 2x2\n", 2, 1),
            ("input 3 8 8\nconv 8 3y3\n", 2, 8),
            ("input 3 8 8\nconv 8 3x3 wide\n", 2, 12),
            ("input 3 8 8\ndropout 1.5\n", 2, 9),
            ("input 3 8 8\nact\n", 2, 4),
            ("input 3 8 8\ninput 3 8 8\n", 2, 1),
            ("input 0 8 8\n", 1, 7),
        ];
        for (text, line, column) in cases {
            match parse_arch(text) {
                Err(Error::Syntax {
                    line: l, column: c, ..
                }) => {
                    assert_eq!((l, c), (line, column), "{text:?}")
                }
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn pretty_print_round_trip() {
        let text = "input 3 32 32\nconv 32 3x3 /1 same\nbn\nact elu\nmaxpool 2x2 /2\n\
                    conv 64 5x5 /2 valid nobias in=16\ndropout 0.5\nscaledavgpool 2x2\n\
                    lcn\ndense 2 12\ngap\nflatten\nfc 10 nobias\navgpool 1x1 same\n";
        let a = parse_arch(text).unwrap();
        let b = parse_arch(&a.to_text()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn arch_new_matches_parser() {
        let a = parse_arch("input 1 6 6\nconv 2 3x3 valid\ngap\n").unwrap();
        let b = ArchSpec::new(a.layers.clone()).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            b.input_shape(1),
            Some(Shape {
                channels: 1,
                height: 6,
                width: 6
            })
        );
    }
}
