//! The `.nldc` bitstream: a fixed 36-byte header followed by one
//! arithmetic-coded payload.
//!
//! Payload layout, per channel (tile) in channel order:
//!
//! 1. palette re-sort (implicit, from counts of earlier tiles) and the
//!    truncated-unary index `j*` in bypass bins;
//! 2. every 4x4 block of the tile, padded to a multiple of 4 by edge
//!    replication, in raster order: the mpm flag, two bypass bins naming the
//!    mode when it is not the mpm, then the residual (SKIP flag,
//!    significance map in the mode's scan order, greater-than-1 and
//!    greater-than-2 flags, Rice-coded remainder and bypass sign per
//!    non-zero coefficient).
//!
//! Samples in the padding take part in prediction only; they carry no
//! residual syntax and the decoder discards them.
//!
//! The payload ends with a terminating bin and zero padding to a byte.

use std::fs;
use std::path::Path;

use crate::entropy::{CtxId, Decoder, Encoder, EncoderSnapshot};
use crate::error::{Error, Result};
use crate::palette::{self, PaletteState, PALETTE_SIZE};
use crate::prediction::{
    self, compute_residual, derive_mpm, reconstruct_block, BlockContext, BlockMode, Residual,
    TrialCoder, BLOCK, BLOCK_LEN,
};
use crate::tensor::{self, FeatureTensor, QuantizedTensor};

pub const MAGIC: &[u8; 4] = b"NLDC";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 36;

// Decoder refuses headers describing more samples than this.
const MAX_SAMPLES: u64 = 1 << 32;

/// Fixed-length stream header.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamHeader {
    pub q_bits: u8,
    pub rows: u32,
    pub cols: u32,
    pub channels: u32,
    pub v_min: f32,
    pub v_max: f32,
    /// Palette values in their initial (first-tile) order.
    pub palette: [u8; PALETTE_SIZE],
}

impl StreamHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(MAGIC);
        out[4] = VERSION;
        out[5] = self.q_bits;
        // 6..8 reserved
        out[8..12].copy_from_slice(&self.rows.to_le_bytes());
        out[12..16].copy_from_slice(&self.cols.to_le_bytes());
        out[16..20].copy_from_slice(&self.channels.to_le_bytes());
        out[20..24].copy_from_slice(&self.v_min.to_le_bytes());
        out[24..28].copy_from_slice(&self.v_max.to_le_bytes());
        out[28..36].copy_from_slice(&self.palette);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "stream is {} bytes, shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Format("bad stream magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::Format(format!(
                "unsupported stream version {}",
                bytes[4]
            )));
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let f32_at = |at: usize| f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let header = Self {
            q_bits: bytes[5],
            rows: u32_at(8),
            cols: u32_at(12),
            channels: u32_at(16),
            v_min: f32_at(20),
            v_max: f32_at(24),
            palette: bytes[28..36].try_into().unwrap(),
        };
        header.validate()?;
        Ok(header)
    }

    fn validate(&self) -> Result<()> {
        tensor::check_bits(self.q_bits).map_err(|e| Error::Format(e.to_string()))?;
        if self.rows == 0 || self.cols == 0 || self.channels == 0 {
            return Err(Error::Format(format!(
                "zero dimension in {}x{}x{}",
                self.rows, self.cols, self.channels
            )));
        }
        let samples = u64::from(self.rows) * u64::from(self.cols) * u64::from(self.channels);
        if samples > MAX_SAMPLES {
            return Err(Error::Format(format!("{samples} samples is too large")));
        }
        if !self.v_min.is_finite() || !self.v_max.is_finite() || self.v_min > self.v_max {
            return Err(Error::Format(format!(
                "bad range [{}, {}]",
                self.v_min, self.v_max
            )));
        }
        let mut seen = [false; 256];
        for &v in &self.palette {
            if std::mem::replace(&mut seen[v as usize], true) {
                return Err(Error::Format(format!("duplicate palette value {v}")));
            }
        }
        Ok(())
    }
}

/// Coefficient scan of a 4x4 residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanOrder {
    Horizontal,
    Vertical,
    ZigZag,
}

const HORIZONTAL_SCAN: [usize; BLOCK_LEN] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15];
const VERTICAL_SCAN: [usize; BLOCK_LEN] = [0, 4, 8, 12, 1, 5, 9, 13, 2, 6, 10, 14, 3, 7, 11, 15];
const ZIGZAG_SCAN: [usize; BLOCK_LEN] = [0, 1, 4, 8, 5, 2, 3, 6, 9, 12, 13, 10, 7, 11, 14, 15];

impl ScanOrder {
    /// Raster positions in scan order.
    pub fn positions(self) -> &'static [usize; BLOCK_LEN] {
        match self {
            ScanOrder::Horizontal => &HORIZONTAL_SCAN,
            ScanOrder::Vertical => &VERTICAL_SCAN,
            ScanOrder::ZigZag => &ZIGZAG_SCAN,
        }
    }

    pub fn for_mode(mode: BlockMode) -> Self {
        match mode {
            BlockMode::Hor => ScanOrder::Horizontal,
            BlockMode::Ver => ScanOrder::Vertical,
            _ => ScanOrder::ZigZag,
        }
    }
}

pub fn encode_mode(enc: &mut Encoder, mode: BlockMode, mpm: BlockMode) {
    if mode == mpm {
        enc.encode_bin(CtxId::Mpm, true);
    } else {
        enc.encode_bin(CtxId::Mpm, false);
        let rank = mode.index() - usize::from(mode.index() > mpm.index());
        enc.encode_bypass_n(rank as u32, 2);
    }
}

pub fn decode_mode(dec: &mut Decoder, mpm: BlockMode) -> Result<BlockMode> {
    if dec.decode_bin(CtxId::Mpm)? {
        return Ok(mpm);
    }
    let rank = dec.decode_bypass_n(2)? as usize;
    let index = rank + usize::from(rank >= mpm.index());
    Ok(BlockMode::from_index(index).expect("rank < 4 maps into five modes"))
}

fn is_padding(padding: u16, pos: usize) -> bool {
    padding >> pos & 1 == 1
}

/// True when every residual outside the padding is zero.
pub fn is_skip(residual: &Residual, padding: u16) -> bool {
    residual
        .iter()
        .enumerate()
        .all(|(pos, &r)| r == 0 || is_padding(padding, pos))
}

/// Codes the residual of one block. Positions flagged in `padding` carry no
/// syntax; their residual values are ignored.
pub fn encode_block_residual(
    enc: &mut Encoder,
    residual: &Residual,
    mode: BlockMode,
    padding: u16,
) {
    if is_skip(residual, padding) {
        enc.encode_bin(CtxId::Skip, true);
        return;
    }
    enc.encode_bin(CtxId::Skip, false);
    let scan = ScanOrder::for_mode(mode).positions();
    let coded = || {
        scan.iter()
            .copied()
            .filter(|&pos| !is_padding(padding, pos))
    };
    for pos in coded() {
        enc.encode_bin(CtxId::Sig, residual[pos] != 0);
    }
    for pos in coded() {
        let r = residual[pos];
        if r == 0 {
            continue;
        }
        let mag = r.unsigned_abs() as u32;
        enc.encode_bin(CtxId::Gt1, mag > 1);
        if mag > 1 {
            enc.encode_bin(CtxId::Gt2, mag > 2);
            if mag > 2 {
                enc.encode_remainder(mag - 3);
            }
        }
        enc.encode_bypass(r < 0);
    }
}

/// Inverse of [`encode_block_residual`]; padding positions come back as 0.
pub fn decode_block_residual(dec: &mut Decoder, mode: BlockMode, padding: u16) -> Result<Residual> {
    let mut residual = [0i16; BLOCK_LEN];
    if dec.decode_bin(CtxId::Skip)? {
        return Ok(residual);
    }
    let scan = ScanOrder::for_mode(mode).positions();
    let mut significant = [false; BLOCK_LEN];
    for &pos in scan.iter().filter(|&&pos| !is_padding(padding, pos)) {
        significant[pos] = dec.decode_bin(CtxId::Sig)?;
    }
    if !significant.contains(&true) {
        return Err(Error::Format(
            "non-skipped block with empty significance map".into(),
        ));
    }
    for &pos in scan {
        if !significant[pos] {
            continue;
        }
        let mut mag = 1u32;
        if dec.decode_bin(CtxId::Gt1)? {
            mag = 2;
            if dec.decode_bin(CtxId::Gt2)? {
                mag = 3u32.saturating_add(dec.decode_remainder()?);
            }
        }
        let negative = dec.decode_bypass()?;
        let limit = if negative { 128 } else { 127 };
        if mag > limit {
            return Err(Error::Format(format!(
                "residual magnitude {mag} out of range"
            )));
        }
        residual[pos] = if negative { -(mag as i16) } else { mag as i16 };
    }
    Ok(residual)
}

impl TrialCoder for Encoder {
    type Snapshot = EncoderSnapshot;

    fn snapshot(&self) -> EncoderSnapshot {
        Encoder::snapshot(self)
    }

    fn rollback(&mut self, snapshot: &EncoderSnapshot) {
        Encoder::rollback(self, snapshot)
    }

    fn bits(&self) -> u64 {
        Encoder::bits(self)
    }

    fn encode_block(&mut self, mode: BlockMode, mpm: BlockMode, residual: &Residual, padding: u16) {
        encode_mode(self, mode, mpm);
        encode_block_residual(self, residual, mode, padding);
    }
}

/// How the encoder picks each block's mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModeSearch {
    /// Trial-encode all modes from a snapshot and roll back.
    #[default]
    Rollback,
    /// Reference path: re-encode the stream from the start for every
    /// candidate of every block. Quadratic in the block count; meant for
    /// checking [`ModeSearch::Rollback`] on small tensors.
    Replay,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncoderOptions {
    pub mode_search: ModeSearch,
}

/// Per-stream coding statistics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EncodeStats {
    /// Blocks coded with each mode, in canonical mode order.
    pub mode_counts: [u64; 5],
    pub skipped_blocks: u64,
    pub palette_indices: Vec<u8>,
}

impl EncodeStats {
    pub fn blocks(&self) -> u64 {
        self.mode_counts.iter().sum()
    }

    /// Mode selection shares in percent, canonical order.
    pub fn mode_percentages(&self) -> [f64; 5] {
        let total = self.blocks().max(1) as f64;
        self.mode_counts.map(|n| 100.0 * n as f64 / total)
    }
}

#[derive(Debug, Clone)]
pub struct EncodeOutput {
    pub bytes: Vec<u8>,
    pub stats: EncodeStats,
}

#[derive(Debug, Clone, Copy)]
struct TileGeometry {
    rows: usize,
    cols: usize,
    padded_rows: usize,
    padded_cols: usize,
}

impl TileGeometry {
    fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            padded_rows: rows.div_ceil(BLOCK) * BLOCK,
            padded_cols: cols.div_ceil(BLOCK) * BLOCK,
        }
    }

    fn blocks_x(&self) -> usize {
        self.padded_cols / BLOCK
    }

    fn blocks_y(&self) -> usize {
        self.padded_rows / BLOCK
    }

    fn blocks(&self) -> usize {
        self.blocks_x() * self.blocks_y()
    }

    /// Copies a tile into the padded layout, replicating the last column and row.
    fn pad(&self, tile: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.padded_rows * self.padded_cols);
        for y in 0..self.padded_rows {
            let row = &tile[y.min(self.rows - 1) * self.cols..][..self.cols];
            out.extend_from_slice(row);
            out.extend(std::iter::repeat_n(
                row[self.cols - 1],
                self.padded_cols - self.cols,
            ));
        }
        out
    }

    /// Bit `y * 4 + x` set where block sample `(x, y)` lies outside the tile.
    fn padding_mask(&self, bx: usize, by: usize) -> u16 {
        let mut mask = 0;
        for y in 0..BLOCK {
            for x in 0..BLOCK {
                if bx * BLOCK + x >= self.cols || by * BLOCK + y >= self.rows {
                    mask |= 1 << (y * BLOCK + x);
                }
            }
        }
        mask
    }

    fn crop(&self, padded: &[u8], out: &mut Vec<u8>) {
        for y in 0..self.rows {
            out.extend_from_slice(&padded[y * self.padded_cols..][..self.cols]);
        }
    }
}

fn neighbour_mpm(modes: &[Option<BlockMode>], bw: usize, bx: usize, by: usize) -> BlockMode {
    let at = |x: usize, y: usize| modes[y * bw + x];
    let left = (bx > 0).then(|| at(bx - 1, by)).flatten();
    let top_left = (bx > 0 && by > 0).then(|| at(bx - 1, by - 1)).flatten();
    let top = (by > 0).then(|| at(bx, by - 1)).flatten();
    derive_mpm(left, top_left, top)
}

struct PayloadRun {
    encoder: Encoder,
    stats: EncodeStats,
    /// Meter reading just before the stop block's mode was coded.
    bits_before_stop: u64,
}

/// Runs the encoder over the payload. `decide` picks the mode of the block
/// with the given global index. With `stop_after`, returns right after that
/// block is coded.
fn run_payload<F>(
    q: &QuantizedTensor,
    initial_order: [u8; PALETTE_SIZE],
    mut decide: F,
    stop_after: Option<usize>,
) -> PayloadRun
where
    F: FnMut(usize, &BlockContext, BlockMode, &mut Encoder) -> BlockMode,
{
    let geom = TileGeometry::new(q.rows(), q.cols());
    let mut enc = Encoder::new();
    let mut palette = PaletteState::new(initial_order);
    let mut stats = EncodeStats::default();
    let mut block_index = 0usize;
    let mut modes = vec![None; geom.blocks()];

    for c in 0..q.channels() {
        let tile = q.channel(c);
        if c > 0 {
            palette.resort();
        }
        let order = palette.order();
        let j = palette::select_index(&order, tile);
        for bit in palette::unary_encode(j) {
            enc.encode_bypass(bit);
        }
        stats.palette_indices.push(j);
        let palette_value = order[j as usize];
        let padded = geom.pad(tile);
        modes.fill(None);

        for by in 0..geom.blocks_y() {
            for bx in 0..geom.blocks_x() {
                let ctx = BlockContext::new(&padded, geom.padded_cols, palette_value, bx, by)
                    .with_padding(geom.padding_mask(bx, by));
                let mpm = neighbour_mpm(&modes, geom.blocks_x(), bx, by);
                let mode = decide(block_index, &ctx, mpm, &mut enc);
                let residual = compute_residual(mode, &ctx);
                let before = enc.bits();
                enc.encode_block(mode, mpm, &residual, ctx.padding());
                modes[by * geom.blocks_x() + bx] = Some(mode);
                stats.mode_counts[mode.index()] += 1;
                if is_skip(&residual, ctx.padding()) {
                    stats.skipped_blocks += 1;
                }
                if stop_after == Some(block_index) {
                    return PayloadRun {
                        encoder: enc,
                        stats,
                        bits_before_stop: before,
                    };
                }
                block_index += 1;
            }
        }
        palette.accumulate(tile);
    }
    PayloadRun {
        encoder: enc,
        stats,
        bits_before_stop: 0,
    }
}

fn header_for(q: &QuantizedTensor) -> Result<StreamHeader> {
    let dim = |v: usize| {
        u32::try_from(v).map_err(|_| Error::InvalidTensor(format!("dimension {v} exceeds u32")))
    };
    let values = palette::extract_palette(q.data());
    Ok(StreamHeader {
        q_bits: q.q_bits(),
        rows: dim(q.rows())?,
        cols: dim(q.cols())?,
        channels: dim(q.channels())?,
        v_min: q.v_min(),
        v_max: q.v_max(),
        palette: palette::initial_sort(values, q.channel(0)),
    })
}

pub fn encode_quantized_with(
    q: &QuantizedTensor,
    options: &EncoderOptions,
) -> Result<EncodeOutput> {
    let header = header_for(q)?;
    let run = match options.mode_search {
        ModeSearch::Rollback => run_payload(
            q,
            header.palette,
            |_, ctx, mpm, enc| prediction::choose_mode(ctx, mpm, enc).0,
            None,
        ),
        ModeSearch::Replay => {
            let decisions = replay_decisions(q, header.palette);
            run_payload(q, header.palette, |i, _, _, _| decisions[i], None)
        }
    };
    let mut bytes = header.to_bytes().to_vec();
    bytes.extend(run.encoder.finish());
    Ok(EncodeOutput {
        bytes,
        stats: run.stats,
    })
}

/// Mode decisions found by re-encoding from scratch for every candidate.
fn replay_decisions(q: &QuantizedTensor, initial_order: [u8; PALETTE_SIZE]) -> Vec<BlockMode> {
    let total = TileGeometry::new(q.rows(), q.cols()).blocks() * q.channels();
    let mut decisions: Vec<BlockMode> = Vec::with_capacity(total);
    for b in 0..total {
        let mut best = (BlockMode::Pal, u64::MAX);
        for candidate in BlockMode::ALL {
            let run = run_payload(
                q,
                initial_order,
                |i, _, _, _| if i < b { decisions[i] } else { candidate },
                Some(b),
            );
            let cost = run.encoder.bits() - run.bits_before_stop;
            if cost < best.1 {
                best = (candidate, cost);
            }
        }
        decisions.push(best.0);
    }
    decisions
}

pub fn encode_quantized(q: &QuantizedTensor) -> Result<Vec<u8>> {
    Ok(encode_quantized_with(q, &EncoderOptions::default())?.bytes)
}

/// Quantizes to `q_bits` and encodes.
pub fn encode_tensor(t: &FeatureTensor, q_bits: u8) -> Result<Vec<u8>> {
    encode_quantized(&tensor::quantize(t, q_bits)?)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<QuantizedTensor> {
    let header = StreamHeader::parse(bytes)?;
    let (rows, cols, channels) = (
        header.rows as usize,
        header.cols as usize,
        header.channels as usize,
    );
    let geom = TileGeometry::new(rows, cols);
    let mut dec = Decoder::new(&bytes[HEADER_LEN..])?;
    let mut palette = PaletteState::new(header.palette);
    let mut data = Vec::with_capacity(rows * cols * channels);
    let mut plane = vec![0u8; geom.padded_rows * geom.padded_cols];
    let mut modes = vec![None; geom.blocks()];

    for c in 0..channels {
        if c > 0 {
            palette.resort();
        }
        let j = palette::unary_decode(|| dec.decode_bypass())?;
        let palette_value = palette.value(j);
        modes.fill(None);
        for by in 0..geom.blocks_y() {
            for bx in 0..geom.blocks_x() {
                let mpm = neighbour_mpm(&modes, geom.blocks_x(), bx, by);
                let mode = decode_mode(&mut dec, mpm)?;
                let residual = decode_block_residual(&mut dec, mode, geom.padding_mask(bx, by))?;
                reconstruct_block(
                    mode,
                    &mut plane,
                    geom.padded_cols,
                    palette_value,
                    bx,
                    by,
                    &residual,
                );
                modes[by * geom.blocks_x() + bx] = Some(mode);
            }
        }
        let start = data.len();
        geom.crop(&plane, &mut data);
        palette.accumulate(&data[start..]);
    }
    dec.finish()?;

    QuantizedTensor::from_parts(
        rows,
        cols,
        channels,
        header.q_bits,
        header.v_min,
        header.v_max,
        data,
    )
    .map_err(|e| match e {
        Error::InvalidTensor(msg) => Error::Format(msg),
        other => other,
    })
}

/// Decodes and maps levels back to feature values.
pub fn decode_features(bytes: &[u8]) -> Result<FeatureTensor> {
    Ok(tensor::dequantize(&decode_tensor(bytes)?))
}

/// Compressed bits per feature value.
pub fn measure_bpp(bytes: &[u8], samples: usize) -> Result<f64> {
    if samples == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(8.0 * bytes.len() as f64 / samples as f64)
}

pub fn encode_file(
    input: impl AsRef<Path>,
    output: impl AsRef<Path>,
    q_bits: u8,
) -> Result<Vec<u8>> {
    let t = tensor::load_tensor(input)?;
    let bytes = encode_tensor(&t, q_bits)?;
    fs::write(output, &bytes)?;
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::Decoder;

    fn qt(rows: usize, cols: usize, channels: usize, data: Vec<u8>) -> QuantizedTensor {
        QuantizedTensor::from_parts(rows, cols, channels, 8, -1.0, 2.0, data).unwrap()
    }

    fn lcg(seed: u64) -> impl FnMut() -> u64 {
        let mut x = seed;
        move || {
            x = x
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            x >> 33
        }
    }

    #[test]
    fn scans_are_permutations() {
        for scan in [
            ScanOrder::Horizontal,
            ScanOrder::Vertical,
            ScanOrder::ZigZag,
        ] {
            let mut p = *scan.positions();
            p.sort();
            assert_eq!(p, HORIZONTAL_SCAN);
        }
        let coords: Vec<(usize, usize)> = ZIGZAG_SCAN.iter().map(|&p| (p / 4, p % 4)).collect();
        assert_eq!(
            coords,
            [
                (0, 0),
                (0, 1),
                (1, 0),
                (2, 0),
                (1, 1),
                (0, 2),
                (0, 3),
                (1, 2),
                (2, 1),
                (3, 0),
                (3, 1),
                (2, 2),
                (1, 3),
                (2, 3),
                (3, 2),
                (3, 3)
            ]
        );
        assert_eq!(ScanOrder::for_mode(BlockMode::Hor), ScanOrder::Horizontal);
        assert_eq!(ScanOrder::for_mode(BlockMode::Ver), ScanOrder::Vertical);
        assert_eq!(ScanOrder::for_mode(BlockMode::Fil1), ScanOrder::ZigZag);
    }

    #[test]
    fn header_is_36_bytes_and_roundtrips() {
        let h = StreamHeader {
            q_bits: 8,
            rows: 13,
            cols: 13,
            channels: 512,
            v_min: -0.75,
            v_max: 12.5,
            palette: [20, 21, 19, 22, 0, 255, 18, 23],
        };
        let bytes = h.to_bytes();
        assert_eq!(bytes.len(), 36);
        assert_eq!(&bytes[..6], b"NLDC\x01\x08");
        assert_eq!(&bytes[16..20], &512u32.to_le_bytes());
        assert_eq!(StreamHeader::parse(&bytes).unwrap(), h);
    }

    #[test]
    fn header_rejections() {
        let h = StreamHeader {
            q_bits: 8,
            rows: 4,
            cols: 4,
            channels: 1,
            v_min: 0.0,
            v_max: 1.0,
            palette: [0, 1, 2, 3, 4, 5, 6, 7],
        };
        let good = h.to_bytes();
        let mut bad = good;
        bad[0] = b'X';
        assert!(matches!(StreamHeader::parse(&bad), Err(Error::Format(_))));
        let mut bad = good;
        bad[4] = 2;
        assert!(StreamHeader::parse(&bad).is_err());
        let mut bad = good;
        bad[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(StreamHeader::parse(&bad).is_err());
        let mut bad = good;
        bad[29] = 0;
        assert!(StreamHeader::parse(&bad).is_err());
        assert!(StreamHeader::parse(&good[..20]).is_err());
    }

    #[test]
    fn mode_signalling_roundtrip() {
        let mut enc = Encoder::new();
        for mpm in BlockMode::ALL {
            for mode in BlockMode::ALL {
                encode_mode(&mut enc, mode, mpm);
            }
        }
        let bytes = enc.finish();
        let mut dec = Decoder::new(&bytes).unwrap();
        for mpm in BlockMode::ALL {
            for mode in BlockMode::ALL {
                assert_eq!(decode_mode(&mut dec, mpm).unwrap(), mode);
            }
        }
    }

    #[test]
    fn zero_residual_is_one_skip_bin() {
        let mut enc = Encoder::new();
        encode_block_residual(&mut enc, &[0; 16], BlockMode::Pal, 0);
        // exactly one context-coded bin, on the SKIP context
        assert_eq!(enc.contexts(), &{
            let mut e = Encoder::new();
            e.encode_bin(CtxId::Skip, true);
            e.contexts().clone()
        });
    }

    #[test]
    fn single_plus_three_trace() {
        let mut residual = [0i16; 16];
        residual[0] = 3;
        let mut actual = Encoder::new();
        encode_block_residual(&mut actual, &residual, BlockMode::Pal, 0);

        let mut expected = Encoder::new();
        expected.encode_bin(CtxId::Skip, false);
        expected.encode_bin(CtxId::Sig, true);
        for _ in 0..15 {
            expected.encode_bin(CtxId::Sig, false);
        }
        expected.encode_bin(CtxId::Gt1, true);
        expected.encode_bin(CtxId::Gt2, true);
        // remainder 0 with Rice parameter 0: one terminating prefix bin
        expected.encode_bin(CtxId::RicePrefix { k: 0, pos: 0 }, false);
        expected.encode_bypass(false);
        assert_eq!(actual.contexts(), expected.contexts());
        assert_eq!(actual.bits(), expected.bits());
        assert_eq!(actual.finish(), expected.finish());
    }

    #[test]
    fn residuals_roundtrip_under_all_scans() {
        let mut next = lcg(3);
        let mut blocks = Vec::new();
        for i in 0..600 {
            let mut r = [0i16; 16];
            for v in r.iter_mut() {
                let x = next();
                *v = match (i + x as usize) % 4 {
                    0 => 0,
                    1 => (x % 5) as i16 - 2,
                    _ => (x % 256) as i16 - 128,
                };
            }
            if i % 9 == 0 {
                r = [0; 16];
            }
            blocks.push((r, BlockMode::ALL[i % 5]));
        }
        let mut enc = Encoder::new();
        for (r, mode) in &blocks {
            encode_block_residual(&mut enc, r, *mode, 0);
        }
        let bytes = enc.finish();
        let mut dec = Decoder::new(&bytes).unwrap();
        for (r, mode) in &blocks {
            assert_eq!(&decode_block_residual(&mut dec, *mode, 0).unwrap(), r);
        }
        dec.finish().unwrap();
    }

    #[test]
    fn padding_replicates_edges() {
        let g = TileGeometry::new(2, 3);
        assert_eq!((g.padded_rows, g.padded_cols), (4, 4));
        let padded = g.pad(&[1, 2, 3, 4, 5, 6]);
        assert_eq!(padded, vec![1, 2, 3, 3, 4, 5, 6, 6, 4, 5, 6, 6, 4, 5, 6, 6]);
        let mut out = Vec::new();
        g.crop(&padded, &mut out);
        assert_eq!(out, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn padding_mask_marks_outside_samples() {
        let g = TileGeometry::new(5, 6);
        assert_eq!(g.padding_mask(0, 0), 0);
        // columns 6, 7 of the second block column
        assert_eq!(g.padding_mask(1, 0), 0b1100_1100_1100_1100);
        // rows 5..8 of the second block row
        assert_eq!(g.padding_mask(0, 1), 0xfff0);
        assert_eq!(g.padding_mask(1, 1), 0xfffc);
    }

    #[test]
    fn padding_positions_carry_no_syntax() {
        let padding = 0b1100_1100_1100_1100;
        let mut real = [0i16; 16];
        real[0] = 5;
        real[5] = -2;
        let mut noisy = real;
        for pos in [2, 3, 6, 7, 10, 11, 14, 15] {
            noisy[pos] = 99;
        }
        let bits = |r: &Residual| {
            let mut e = Encoder::new();
            encode_block_residual(&mut e, r, BlockMode::Hor, padding);
            e.finish()
        };
        assert_eq!(bits(&real), bits(&noisy));
        let bytes = bits(&noisy);
        let mut d = Decoder::new(&bytes).unwrap();
        assert_eq!(
            decode_block_residual(&mut d, BlockMode::Hor, padding).unwrap(),
            real
        );

        // nonzero residuals only in padding still skip
        let mut e = Encoder::new();
        let mut only_pad = [0i16; 16];
        only_pad[15] = 40;
        assert!(is_skip(&only_pad, padding));
        encode_block_residual(&mut e, &only_pad, BlockMode::Pal, padding);
        assert!(e.bits() <= 1);
    }

    #[test]
    fn smallest_block_aligned_tensor() {
        let q = qt(4, 4, 1, (0..16).map(|v| v * 7).collect());
        let bytes = encode_quantized(&q).unwrap();
        assert_eq!(decode_tensor(&bytes).unwrap(), q);
    }

    #[test]
    fn odd_shapes_roundtrip() {
        let mut next = lcg(5);
        for (r, c, ch) in [(1, 1, 1), (5, 7, 3), (3, 9, 2), (13, 13, 5), (1, 17, 4)] {
            let data = (0..r * c * ch).map(|_| (next() % 40) as u8 + 10).collect();
            let q = qt(r, c, ch, data);
            let bytes = encode_quantized(&q).unwrap();
            assert_eq!(decode_tensor(&bytes).unwrap(), q, "{r}x{c}x{ch}");
        }
    }

    #[test]
    fn constant_palette_tensor_skips_every_block() {
        let q = qt(16, 16, 8, vec![42; 16 * 16 * 8]);
        let out = encode_quantized_with(&q, &EncoderOptions::default()).unwrap();
        let blocks = out.stats.blocks();
        assert_eq!(blocks, 128);
        assert_eq!(out.stats.skipped_blocks, blocks);
        assert_eq!(out.stats.mode_counts[BlockMode::Pal.index()], blocks);
        let payload_bits = 8 * (out.bytes.len() - HEADER_LEN) as u64;
        assert!(
            payload_bits < 2 * blocks,
            "{payload_bits} bits for {blocks} blocks"
        );
        assert_eq!(decode_tensor(&out.bytes).unwrap(), q);
    }

    #[test]
    fn low_bit_depth_roundtrip() {
        let mut next = lcg(9);
        for bits in [2u8, 4, 6] {
            let levels = 1u64 << bits;
            let data = (0..8 * 8 * 3).map(|_| (next() % levels) as u8).collect();
            let q = QuantizedTensor::from_parts(8, 8, 3, bits, 0.0, 1.0, data).unwrap();
            let bytes = encode_quantized(&q).unwrap();
            assert_eq!(bytes[5], bits);
            assert_eq!(decode_tensor(&bytes).unwrap(), q);
        }
    }

    #[test]
    fn truncated_payload_reports_truncation() {
        let mut next = lcg(11);
        let q = qt(8, 8, 4, (0..256).map(|_| next() as u8).collect());
        let bytes = encode_quantized(&q).unwrap();
        let cut = &bytes[..HEADER_LEN + (bytes.len() - HEADER_LEN) / 2];
        assert!(matches!(decode_tensor(cut), Err(Error::TruncatedStream)));
        assert!(matches!(
            decode_tensor(&bytes[..HEADER_LEN]),
            Err(Error::TruncatedStream)
        ));
    }

    #[test]
    fn trailing_garbage_rejected() {
        let q = qt(4, 4, 1, vec![3; 16]);
        let mut bytes = encode_quantized(&q).unwrap();
        bytes.extend([0, 0]);
        assert!(decode_tensor(&bytes).is_err());
    }

    #[test]
    fn chosen_mode_is_never_beaten() {
        let mut next = lcg(13);
        let mut enc = Encoder::new();
        for _ in 0..300 {
            let plane: Vec<u8> = (0..64).map(|_| (next() % 12) as u8 + 100).collect();
            let ctx = BlockContext::new(&plane, 8, 104, 1, 1);
            let mpm = BlockMode::ALL[(next() % 5) as usize];
            let (mode, cost) = prediction::choose_mode(&ctx, mpm, &mut enc);
            for other in BlockMode::ALL {
                let snap = enc.snapshot();
                let start = enc.bits();
                enc.encode_block(other, mpm, &compute_residual(other, &ctx), 0);
                let c = enc.bits() - start;
                enc.rollback(&snap);
                assert!(cost <= c);
                if c == cost {
                    assert!(mode <= other);
                }
            }
            enc.encode_block(mode, mpm, &compute_residual(mode, &ctx), 0);
        }
    }

    #[test]
    fn symmetric_block_prefers_hor_over_ver() {
        // block of 50s whose left column and top row are 50 too; only the
        // top-left corner differs, so Hor and Ver both give zero residuals
        let mut plane = vec![50u8; 64];
        plane[3 * 8 + 3] = 200;
        let ctx = BlockContext::new(&plane, 8, 0, 1, 1);
        assert_eq!(compute_residual(BlockMode::Hor, &ctx), [0; 16]);
        assert_eq!(compute_residual(BlockMode::Ver, &ctx), [0; 16]);
        assert_ne!(compute_residual(BlockMode::Fil1, &ctx), [0; 16]);
        let (mode, cost) = prediction::choose_mode(&ctx, BlockMode::Pal, &mut Encoder::new());
        assert_eq!(mode, BlockMode::Hor);

        let mut ver = Encoder::new();
        ver.encode_block(BlockMode::Ver, BlockMode::Pal, &[0; 16], 0);
        assert_eq!(ver.bits(), cost);
    }

    #[test]
    fn replay_reference_agrees_on_small_tensor() {
        let mut next = lcg(17);
        let q = qt(6, 9, 3, (0..162).map(|_| (next() % 9) as u8 + 30).collect());
        let fast = encode_quantized_with(&q, &EncoderOptions::default()).unwrap();
        let slow = encode_quantized_with(
            &q,
            &EncoderOptions {
                mode_search: ModeSearch::Replay,
            },
        )
        .unwrap();
        assert_eq!(fast.bytes, slow.bytes);
        assert_eq!(fast.stats, slow.stats);
    }

    #[test]
    fn bpp_measure() {
        assert_eq!(measure_bpp(&[0; 10], 80).unwrap(), 1.0);
        assert!(matches!(measure_bpp(&[0; 10], 0), Err(Error::EmptyInput)));
    }
}
