//! Feature tensors, the uniform quantizer and the `.ftz` file format.
//!
//! Samples are stored channel-major: `C` planes, each a row-major `N x M`
//! grid. The quantizer maps `[v_min, v_max]` linearly onto `[0, 2^n - 1]`
//! and rounds half away from zero.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const FTZ_MAGIC: &[u8; 4] = b"FTNS";
pub const FTZ_VERSION: u8 = 1;
pub const FTZ_HEADER_LEN: usize = 20;

pub const MIN_BITS: u8 = 2;
pub const MAX_BITS: u8 = 8;

/// Floating-point activation volume with its observed range.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    rows: usize,
    cols: usize,
    channels: usize,
    data: Vec<f32>,
    v_min: f32,
    v_max: f32,
}

impl FeatureTensor {
    /// Builds a tensor from channel-major samples, computing `v_min`/`v_max`.
    pub fn new(rows: usize, cols: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(rows, cols, channels, data.len())?;
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidTensor(format!(
                "non-finite sample {} at index {pos}",
                data[pos]
            )));
        }
        let (v_min, v_max) = data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        Ok(Self {
            rows,
            cols,
            channels,
            data,
            v_min,
            v_max,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn v_min(&self) -> f32 {
        self.v_min
    }

    pub fn v_max(&self) -> f32 {
        self.v_max
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.rows * self.cols;
        &self.data[c * plane..(c + 1) * plane]
    }
}

/// Integer volume produced by [`quantize`], plus what is needed to invert it.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    rows: usize,
    cols: usize,
    channels: usize,
    q_bits: u8,
    v_min: f32,
    v_max: f32,
    data: Vec<u8>,
}

impl QuantizedTensor {
    pub fn from_parts(
        rows: usize,
        cols: usize,
        channels: usize,
        q_bits: u8,
        v_min: f32,
        v_max: f32,
        data: Vec<u8>,
    ) -> Result<Self> {
        check_dims(rows, cols, channels, data.len())?;
        check_bits(q_bits)?;
        if !v_min.is_finite() || !v_max.is_finite() || v_min > v_max {
            return Err(Error::InvalidTensor(format!(
                "bad range [{v_min}, {v_max}]"
            )));
        }
        let max_level = max_level(q_bits);
        if let Some(&v) = data.iter().find(|&&v| u32::from(v) > max_level) {
            return Err(Error::InvalidTensor(format!(
                "level {v} exceeds {max_level} for {q_bits}-bit data"
            )));
        }
        Ok(Self {
            rows,
            cols,
            channels,
            q_bits,
            v_min,
            v_max,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn q_bits(&self) -> u8 {
        self.q_bits
    }

    pub fn v_min(&self) -> f32 {
        self.v_min
    }

    pub fn v_max(&self) -> f32 {
        self.v_max
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn plane_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn channel(&self, c: usize) -> &[u8] {
        let plane = self.plane_len();
        &self.data[c * plane..(c + 1) * plane]
    }

    /// Width of one quantization step in the original units.
    pub fn step(&self) -> f64 {
        (f64::from(self.v_max) - f64::from(self.v_min)) / f64::from(max_level(self.q_bits))
    }
}

fn check_dims(rows: usize, cols: usize, channels: usize, len: usize) -> Result<()> {
    if rows == 0 || cols == 0 || channels == 0 {
        return Err(Error::InvalidTensor(format!(
            "dimensions must be positive, got {rows}x{cols}x{channels}"
        )));
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|p| p.checked_mul(channels))
        .ok_or_else(|| Error::InvalidTensor("dimensions overflow".into()))?;
    if expected != len {
        return Err(Error::InvalidTensor(format!(
            "{rows}x{cols}x{channels} needs {expected} samples, got {len}"
        )));
    }
    Ok(())
}

pub(crate) fn check_bits(q_bits: u8) -> Result<()> {
    if !(MIN_BITS..=MAX_BITS).contains(&q_bits) {
        return Err(Error::InvalidTensor(format!(
            "bit depth {q_bits} outside [{MIN_BITS}, {MAX_BITS}]"
        )));
    }
    Ok(())
}

/// Largest level of an `n`-bit quantizer, `2^n - 1`.
pub fn max_level(q_bits: u8) -> u32 {
    (1u32 << q_bits) - 1
}

/// Quantizes a single value against a fixed range.
pub fn quantize_value(v: f32, v_min: f32, v_max: f32, q_bits: u8) -> u8 {
    if v_max == v_min {
        return 0;
    }
    let level = f64::from(max_level(q_bits));
    let scaled = (f64::from(v) - f64::from(v_min)) / (f64::from(v_max) - f64::from(v_min)) * level;
    // f64::round rounds half away from zero.
    scaled.round().clamp(0.0, level) as u8
}

/// Maps a level back to the original range, in double precision.
pub fn dequantize_value(q: u8, v_min: f32, v_max: f32, q_bits: u8) -> f64 {
    if v_max == v_min {
        return f64::from(v_min);
    }
    let level = f64::from(max_level(q_bits));
    f64::from(v_min) + f64::from(q) / level * (f64::from(v_max) - f64::from(v_min))
}

pub fn quantize(t: &FeatureTensor, q_bits: u8) -> Result<QuantizedTensor> {
    check_bits(q_bits)?;
    let (v_min, v_max) = (t.v_min, t.v_max);
    let data = t
        .data
        .iter()
        .map(|&v| quantize_value(v, v_min, v_max, q_bits))
        .collect();
    QuantizedTensor::from_parts(t.rows, t.cols, t.channels, q_bits, v_min, v_max, data)
}

pub fn dequantize(q: &QuantizedTensor) -> FeatureTensor {
    let data = q
        .data
        .iter()
        .map(|&l| dequantize_value(l, q.v_min, q.v_max, q.q_bits) as f32)
        .collect();
    FeatureTensor {
        rows: q.rows,
        cols: q.cols,
        channels: q.channels,
        data,
        v_min: q.v_min,
        v_max: q.v_max,
    }
}

/// Serializes a tensor in the `.ftz` layout.
pub fn write_tensor(t: &FeatureTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(FTZ_HEADER_LEN + 4 * t.data.len());
    out.extend_from_slice(FTZ_MAGIC);
    out.push(FTZ_VERSION);
    out.extend_from_slice(&[0; 3]);
    for dim in [t.rows, t.cols, t.channels] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_tensor(bytes: &[u8]) -> Result<FeatureTensor> {
    if bytes.len() < FTZ_HEADER_LEN {
        return Err(Error::Format(format!(
            "tensor file is {} bytes, shorter than its {FTZ_HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != FTZ_MAGIC {
        return Err(Error::Format("bad tensor magic".into()));
    }
    if bytes[4] != FTZ_VERSION {
        return Err(Error::Format(format!(
            "unsupported tensor version {}",
            bytes[4]
        )));
    }
    let dim = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (rows, cols, channels) = (dim(8), dim(12), dim(16));
    if rows == 0 || cols == 0 || channels == 0 {
        return Err(Error::Format(format!(
            "zero dimension in {rows}x{cols}x{channels}"
        )));
    }
    let count = rows
        .checked_mul(cols)
        .and_then(|p| p.checked_mul(channels))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let payload = &bytes[FTZ_HEADER_LEN..];
    if payload.len() != count * 4 {
        return Err(Error::Format(format!(
            "header claims {count} samples ({} bytes), payload has {} bytes",
            count * 4,
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureTensor::new(rows, cols, channels, data).map_err(|e| match e {
        Error::InvalidTensor(msg) => Error::Format(msg),
        other => other,
    })
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<FeatureTensor> {
    read_tensor(&fs::read(path)?)
}

pub fn save_tensor(path: impl AsRef<Path>, t: &FeatureTensor) -> Result<()> {
    fs::write(path, write_tensor(t))?;
    Ok(())
}
