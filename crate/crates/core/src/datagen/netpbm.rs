//! Minimal PGM/PPM (netpbm) reader and writer, ASCII and binary variants.

use super::{ImageRaster, LabelRaster, Raster};
use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Magic {
    P2,
    P3,
    P5,
    P6,
}

impl Magic {
    fn channels(self) -> usize {
        match self {
            Magic::P2 | Magic::P5 => 1,
            Magic::P3 | Magic::P6 => 3,
        }
    }

    fn binary(self) -> bool {
        matches!(self, Magic::P5 | Magic::P6)
    }
}

struct Header {
    magic: Magic,
    width: usize,
    height: usize,
    maxval: u32,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a str> {
        self.skip_space();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#')
        {
            self.pos += 1;
        }
        if start == self.pos {
            bail!("netpbm data ends early");
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| crate::Error::invalid("netpbm header is not ASCII"))
    }

    fn number(&mut self) -> Result<u32> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| crate::Error::invalid(format!("bad netpbm number `{tok}`")))
    }
}

fn read_header<'a>(bytes: &'a [u8]) -> Result<(Header, Cursor<'a>)> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = match cur.token()? {
        "P2" => Magic::P2,
        "P3" => Magic::P3,
        "P5" => Magic::P5,
        "P6" => Magic::P6,
        m => bail!("unsupported netpbm magic `{m}`"),
    };
    let width = cur.number()? as usize;
    let height = cur.number()? as usize;
    let maxval = cur.number()?;
    if width == 0 || height == 0 {
        bail!("netpbm image has zero size");
    }
    if maxval == 0 || maxval > 65535 {
        bail!("netpbm maxval {maxval} outside 1..=65535");
    }
    if magic.binary() {
        // exactly one whitespace byte separates the header from the raster
        if !cur.bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
            bail!("missing separator after netpbm header");
        }
        cur.pos += 1;
    }
    Ok((
        Header {
            magic,
            width,
            height,
            maxval,
        },
        cur,
    ))
}

fn read_samples(bytes: &[u8]) -> Result<(Header, Vec<u32>)> {
    let (h, mut cur) = read_header(bytes)?;
    let n = h.width * h.height * h.magic.channels();
    let samples = if h.magic.binary() {
        let wide = h.maxval > 255;
        let need = n * if wide { 2 } else { 1 };
        let data = &bytes[cur.pos..];
        if data.len() < need {
            bail!("netpbm raster has {} bytes, expected {need}", data.len());
        }
        if wide {
            data[..need]
                .chunks_exact(2)
                .map(|p| u32::from(u16::from_be_bytes([p[0], p[1]])))
                .collect()
        } else {
            data[..need].iter().map(|&b| u32::from(b)).collect()
        }
    } else {
        (0..n).map(|_| cur.number()).collect::<Result<Vec<_>>>()?
    };
    if let Some(v) = samples.iter().find(|&&v| v > h.maxval) {
        bail!("netpbm sample {v} exceeds maxval {}", h.maxval);
    }
    Ok((h, samples))
}

/// Reads a PGM or PPM file into raw sample values.
pub fn read_image(bytes: &[u8]) -> Result<ImageRaster> {
    let (h, samples) = read_samples(bytes)?;
    Raster::new(
        h.width,
        h.height,
        h.magic.channels(),
        samples.into_iter().map(f64::from).collect(),
    )
}

/// Reads a PGM label map; each gray level is a class id.
pub fn read_labels(bytes: &[u8]) -> Result<LabelRaster> {
    let (h, samples) = read_samples(bytes)?;
    if h.magic.channels() != 1 {
        bail!("label maps must be grayscale (P2 or P5)");
    }
    Raster::new(h.width, h.height, 1, samples)
}

fn encode(
    width: usize,
    height: usize,
    channels: usize,
    samples: &[u32],
    maxval: u32,
) -> Result<Vec<u8>> {
    let magic = match channels {
        1 => "P5",
        3 => "P6",
        c => bail!("netpbm supports 1 or 3 channels, not {c}"),
    };
    let mut out = format!("{magic}\n{width} {height}\n{maxval}\n").into_bytes();
    if maxval > 255 {
        for &s in samples {
            out.extend_from_slice(&(s as u16).to_be_bytes());
        }
    } else {
        out.extend(samples.iter().map(|&s| s as u8));
    }
    Ok(out)
}

/// Binary PGM/PPM. Values are rounded and clamped to `0..=maxval`.
pub fn write_image(image: &ImageRaster, maxval: u32) -> Result<Vec<u8>> {
    if maxval == 0 || maxval > 65535 {
        bail!("maxval {maxval} outside 1..=65535");
    }
    let samples: Vec<u32> = image
        .values()
        .iter()
        .map(|v| {
            if v.is_nan() {
                0
            } else {
                v.round().clamp(0.0, f64::from(maxval)) as u32
            }
        })
        .collect();
    encode(
        image.width(),
        image.height(),
        image.channels(),
        &samples,
        maxval,
    )
}

/// Binary PGM of a label map, 16-bit when any id exceeds 255.
pub fn write_labels(labels: &LabelRaster) -> Result<Vec<u8>> {
    if labels.channels() != 1 {
        bail!("label maps have one channel");
    }
    let top = labels.values().iter().copied().max().unwrap_or(0);
    if top > 65535 {
        bail!("label id {top} does not fit a 16-bit PGM");
    }
    let maxval = if top > 255 { 65535 } else { 255 };
    encode(labels.width(), labels.height(), 1, labels.values(), maxval)
}
