//! Greyscale (PGM) and colour (PPM) netpbm images, ASCII and binary.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Raw integer samples of a netpbm image, row-major and channel-interleaved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetpbmImage {
    pub width: usize,
    pub height: usize,
    /// 1 for PGM, 3 for PPM.
    pub channels: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

/// Sample encoding on disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    Ascii,
    Binary,
}

impl NetpbmImage {
    fn magic(&self, encoding: Encoding) -> &'static str {
        match (self.channels, encoding) {
            (1, Encoding::Ascii) => "P2",
            (1, Encoding::Binary) => "P5",
            (_, Encoding::Ascii) => "P3",
            (_, Encoding::Binary) => "P6",
        }
    }

    pub fn encode(&self, encoding: Encoding) -> Vec<u8> {
        let mut out = format!("{}\n{} {}\n{}\n", self.magic(encoding), self.width, self.height, self.maxval).into_bytes();
        match encoding {
            Encoding::Ascii => {
                let per_row = self.width * self.channels;
                for row in self.samples.chunks(per_row.max(1)) {
                    let line: Vec<String> = row.iter().map(|s| s.to_string()).collect();
                    out.extend_from_slice(line.join(" ").as_bytes());
                    out.push(b'\n');
                }
            }
            Encoding::Binary => {
                if self.maxval < 256 {
                    out.extend(self.samples.iter().map(|&s| s as u8));
                } else {
                    for &s in &self.samples {
                        out.extend_from_slice(&s.to_be_bytes());
                    }
                }
            }
        }
        out
    }

    /// Samples scaled into `[0, 1]`, shaped `[h, w]` or `[3, h, w]`.
    pub fn to_tensor(&self) -> Tensor {
        let scale = 1.0 / self.maxval as f64;
        let (h, w) = (self.height, self.width);
        if self.channels == 1 {
            let data = self.samples.iter().map(|&s| s as f64 * scale).collect();
            return Tensor::from_vec(&[h, w], data).expect("validated dimensions");
        }
        let mut data = vec![0.0; self.channels * h * w];
        for (idx, &s) in self.samples.iter().enumerate() {
            let (pixel, c) = (idx / self.channels, idx % self.channels);
            data[c * h * w + pixel] = s as f64 * scale;
        }
        Tensor::from_vec(&[self.channels, h, w], data).expect("validated dimensions")
    }

    /// Quantizes a `[h, w]` or `[3, h, w]` tensor, clamping to `[0, 1]` and
    /// rounding half to even.
    pub fn from_tensor(t: &Tensor, maxval: u16) -> Result<Self> {
        if maxval == 0 {
            return Err(Error::invalid("maxval must be positive"));
        }
        let (channels, h, w) = t.image_dims()?;
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("netpbm stores 1 or 3 channels, got {channels}")));
        }
        let m = maxval as f64;
        let quantize = |v: f64| (v.clamp(0.0, 1.0) * m).round_ties_even() as u16;
        let mut samples = Vec::with_capacity(channels * h * w);
        for pixel in 0..h * w {
            for c in 0..channels {
                samples.push(quantize(t.data()[c * h * w + pixel]));
            }
        }
        Ok(Self {
            width: w,
            height: h,
            channels,
            maxval,
            samples,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> std::result::Result<u64, String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format!("expected {what} at byte {start}"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| format!("{what} out of range"))
    }
}

/// Parses a P2, P3, P5 or P6 image.
pub fn parse_netpbm(bytes: &[u8]) -> std::result::Result<NetpbmImage, String> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err("missing netpbm magic number".into());
    }
    let (channels, binary) = match bytes[1] {
        b'2' => (1, false),
        b'3' => (3, false),
        b'5' => (1, true),
        b'6' => (3, true),
        other => return Err(format!("unsupported netpbm variant P{}", other as char)),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err("image dimensions must be positive".into());
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    let maxval = maxval as u16;
    let count = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(channels))
        .ok_or("image dimensions overflow")?;
    let mut samples = Vec::with_capacity(count);
    if binary {
        match bytes.get(cur.pos) {
            Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err("missing whitespace after maxval".into()),
        }
        let width_bytes = if maxval < 256 { 1 } else { 2 };
        let payload = &bytes[cur.pos..];
        if payload.len() < count * width_bytes {
            return Err(format!(
                "truncated payload: {} bytes for {count} samples",
                payload.len()
            ));
        }
        for i in 0..count {
            let s = if width_bytes == 1 {
                payload[i] as u16
            } else {
                u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]])
            };
            samples.push(s);
        }
    } else {
        for i in 0..count {
            let s = cur.number("sample").map_err(|_| format!("truncated payload: only {i} of {count} samples"))?;
            if s > 65535 {
                return Err(format!("sample {s} out of range"));
            }
            samples.push(s as u16);
        }
    }
    if let Some(bad) = samples.iter().find(|&&s| s > maxval) {
        return Err(format!("sample {bad} exceeds maxval {maxval}"));
    }
    Ok(NetpbmImage {
        width,
        height,
        channels,
        maxval,
        samples,
    })
}

pub fn read_netpbm(path: &Path) -> Result<NetpbmImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_netpbm(&bytes).map_err(|reason| Error::format(path, reason))
}

pub fn write_netpbm(path: &Path, image: &NetpbmImage, encoding: Encoding) -> Result<()> {
    fs::write(path, image.encode(encoding)).map_err(|e| Error::io(path, e))
}

/// Reads an image straight into a `[0, 1]` tensor.
pub fn read_image(path: &Path) -> Result<Tensor> {
    Ok(read_netpbm(path)?.to_tensor())
}

/// Writes a `[0, 1]` tensor as 8-bit binary PGM or PPM.
pub fn write_image(path: &Path, image: &Tensor) -> Result<()> {
    write_netpbm(path, &NetpbmImage::from_tensor(image, 255)?, Encoding::Binary)
}
