//! Channel tiling: all channels of a quantized tensor laid out in one 2-D
//! matrix, plus PGM export of that matrix.

use std::io::Write;

use crate::error::{Error, Result};
use crate::tensor::QuantizedTensor;

/// Tiles per row and per column for `channels` channels.
///
/// The grid exponent is `ceil(log2 C)`, split as `ceil(k/2)` across and
/// `floor(k/2)` down, so the grid always holds every channel.
pub fn grid_dims(channels: usize) -> (usize, usize) {
    assert!(channels > 0, "channel count must be positive");
    let k = channels.next_power_of_two().trailing_zeros() as usize;
    (1 << k.div_ceil(2), 1 << (k / 2))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TiledMatrix {
    pub width: usize,
    pub height: usize,
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub tile_w: usize,
    pub tile_h: usize,
    pub samples: Vec<u8>,
}

impl TiledMatrix {
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.samples[y * self.width + x]
    }

    /// Binary PGM (`P5`, maxval 255).
    pub fn write_pgm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.samples)
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.samples.len() + 32);
        self.write_pgm(&mut buf)
            .expect("writing to a Vec cannot fail");
        buf
    }
}

/// Places channel `k` at tile `(k / tiles_x, k % tiles_x)`; filler tiles are zero.
pub fn tile(q: &QuantizedTensor) -> TiledMatrix {
    let (tiles_x, tiles_y) = grid_dims(q.channels());
    let (tile_h, tile_w) = (q.rows(), q.cols());
    let width = tiles_x * tile_w;
    let height = tiles_y * tile_h;
    let mut samples = vec![0u8; width * height];
    for c in 0..q.channels() {
        let (ty, tx) = (c / tiles_x, c % tiles_x);
        let plane = q.channel(c);
        for r in 0..tile_h {
            let dst = (ty * tile_h + r) * width + tx * tile_w;
            samples[dst..dst + tile_w].copy_from_slice(&plane[r * tile_w..(r + 1) * tile_w]);
        }
    }
    TiledMatrix {
        width,
        height,
        tiles_x,
        tiles_y,
        tile_w,
        tile_h,
        samples,
    }
}

/// Inverse of [`tile`]: recovers the channel-major samples of `channels`
/// tiles of `rows x cols`.
pub fn untile(m: &TiledMatrix, rows: usize, cols: usize, channels: usize) -> Result<Vec<u8>> {
    if rows == 0 || cols == 0 || channels == 0 {
        return Err(Error::Format("zero dimension".into()));
    }
    let (tiles_x, tiles_y) = grid_dims(channels);
    if m.tiles_x != tiles_x
        || m.tiles_y != tiles_y
        || m.tile_h != rows
        || m.tile_w != cols
        || m.width != tiles_x * cols
        || m.height != tiles_y * rows
        || m.samples.len() != m.width * m.height
    {
        return Err(Error::Format(format!(
            "{}x{} matrix is inconsistent with {channels} tiles of {rows}x{cols}",
            m.width, m.height
        )));
    }
    let mut out = Vec::with_capacity(rows * cols * channels);
    for c in 0..channels {
        let (ty, tx) = (c / tiles_x, c % tiles_x);
        for r in 0..rows {
            let src = (ty * rows + r) * m.width + tx * cols;
            out.extend_from_slice(&m.samples[src..src + cols]);
        }
    }
    Ok(out)
}
