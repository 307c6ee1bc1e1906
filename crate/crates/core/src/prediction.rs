//! 4x4 block prediction.
//!
//! Every sample of a block is predicted from causal neighbours inside the
//! same tile, in raster order. Neighbours outside the tile are replaced by
//! the tile's palette value `p_j*`. Residuals are taken modulo 256 and kept
//! in `[-128, 127]`, so reconstruction is `(prediction + residual) mod 256`.

pub const BLOCK: usize = 4;
pub const BLOCK_LEN: usize = BLOCK * BLOCK;

/// Residuals of one block in raster order.
pub type Residual = [i16; BLOCK_LEN];

/// Prediction modes in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockMode {
    Pal,
    Hor,
    Ver,
    Fil1,
    Fil2,
}

impl BlockMode {
    pub const ALL: [BlockMode; 5] = [
        BlockMode::Pal,
        BlockMode::Hor,
        BlockMode::Ver,
        BlockMode::Fil1,
        BlockMode::Fil2,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            BlockMode::Pal => "Pal",
            BlockMode::Hor => "Hor",
            BlockMode::Ver => "Ver",
            BlockMode::Fil1 => "Fil1",
            BlockMode::Fil2 => "Fil2",
        }
    }
}

/// Read access to the causal part of one tile plus the tile's palette value.
#[derive(Debug, Clone, Copy)]
pub struct BlockContext<'a> {
    plane: &'a [u8],
    width: usize,
    palette_value: u8,
    bx: usize,
    by: usize,
    padding: u16,
}

impl<'a> BlockContext<'a> {
    /// `plane` is the (padded) tile, row-major with `width` columns; only
    /// samples before the one being predicted are read.
    pub fn new(plane: &'a [u8], width: usize, palette_value: u8, bx: usize, by: usize) -> Self {
        debug_assert!(width > 0 && plane.len().is_multiple_of(width));
        Self {
            plane,
            width,
            palette_value,
            bx,
            by,
            padding: 0,
        }
    }

    /// Marks block samples lying in tile padding: bit `y * 4 + x` set.
    pub fn with_padding(mut self, mask: u16) -> Self {
        self.padding = mask;
        self
    }

    pub fn padding(&self) -> u16 {
        self.padding
    }

    pub fn palette_value(&self) -> u8 {
        self.palette_value
    }

    pub fn block_pos(&self) -> (usize, usize) {
        (self.bx, self.by)
    }

    /// Tile sample at `(x, y)`, or `None` left of or above the tile.
    pub fn neighbor(&self, x: isize, y: isize) -> Option<u8> {
        if x < 0 || y < 0 {
            return None;
        }
        Some(self.plane[y as usize * self.width + x as usize])
    }

    fn neighbor_or_palette(&self, x: isize, y: isize) -> u8 {
        self.neighbor(x, y).unwrap_or(self.palette_value)
    }

    /// The block's 16 samples from the plane.
    pub fn block(&self) -> [u8; BLOCK_LEN] {
        let mut out = [0u8; BLOCK_LEN];
        for y in 0..BLOCK {
            let row = (self.by * BLOCK + y) * self.width + self.bx * BLOCK;
            out[y * BLOCK..(y + 1) * BLOCK].copy_from_slice(&self.plane[row..row + BLOCK]);
        }
        out
    }
}

/// Prediction of in-block sample `(x, y)`.
pub fn predict_sample(mode: BlockMode, ctx: &BlockContext, x: usize, y: usize) -> u8 {
    let ax = (ctx.bx * BLOCK + x) as isize;
    let ay = (ctx.by * BLOCK + y) as isize;
    let left = || u32::from(ctx.neighbor_or_palette(ax - 1, ay));
    let top = || u32::from(ctx.neighbor_or_palette(ax, ay - 1));
    let top_left = || u32::from(ctx.neighbor_or_palette(ax - 1, ay - 1));
    match mode {
        BlockMode::Pal => ctx.palette_value,
        BlockMode::Hor => left() as u8,
        BlockMode::Ver => top() as u8,
        BlockMode::Fil1 => ((3 * top_left() + 7 * top() + 22 * left() + 16) >> 5) as u8,
        BlockMode::Fil2 => ((14 * top_left() + 18 * left() + 16) >> 5) as u8,
    }
}

/// Wraps `value - prediction` into `[-128, 127]`.
pub fn wrap_residual(value: u8, prediction: u8) -> i16 {
    i16::from(value.wrapping_sub(prediction) as i8)
}

pub fn reconstruct_sample(prediction: u8, residual: i16) -> u8 {
    prediction.wrapping_add(residual as u8)
}

/// Residual of the block at the context's position, whose samples are read
/// from the context plane (lossless: reconstructed equals original).
pub fn compute_residual(mode: BlockMode, ctx: &BlockContext) -> Residual {
    let block = ctx.block();
    let mut out = [0i16; BLOCK_LEN];
    for y in 0..BLOCK {
        for x in 0..BLOCK {
            let i = y * BLOCK + x;
            out[i] = wrap_residual(block[i], predict_sample(mode, ctx, x, y));
        }
    }
    out
}

/// Decodes a block in place: `plane` holds every causal sample already, and
/// the block's samples are written in raster order.
pub fn reconstruct_block(
    mode: BlockMode,
    plane: &mut [u8],
    width: usize,
    palette_value: u8,
    bx: usize,
    by: usize,
    residual: &Residual,
) {
    for y in 0..BLOCK {
        for x in 0..BLOCK {
            let pred = {
                let ctx = BlockContext::new(plane, width, palette_value, bx, by);
                predict_sample(mode, &ctx, x, y)
            };
            let at = (by * BLOCK + y) * width + bx * BLOCK + x;
            plane[at] = reconstruct_sample(pred, residual[y * BLOCK + x]);
        }
    }
}

/// Most frequent mode among the available neighbour blocks; lowest canonical
/// mode on ties; `Pal` when none is available.
pub fn derive_mpm(
    left: Option<BlockMode>,
    top_left: Option<BlockMode>,
    top: Option<BlockMode>,
) -> BlockMode {
    let mut counts = [0u8; 5];
    for m in [left, top_left, top].into_iter().flatten() {
        counts[m.index()] += 1;
    }
    let mut best = BlockMode::Pal;
    for m in BlockMode::ALL {
        if counts[m.index()] > counts[best.index()] {
            best = m;
        }
    }
    best
}

/// A coder that can cost a block's syntax and undo it.
pub trait TrialCoder {
    type Snapshot;

    fn snapshot(&self) -> Self::Snapshot;
    fn rollback(&mut self, snapshot: &Self::Snapshot);
    /// Bits emitted so far.
    fn bits(&self) -> u64;
    /// Codes mode signalling (against `mpm`) followed by the residual;
    /// `padding` is the block's padding mask.
    fn encode_block(&mut self, mode: BlockMode, mpm: BlockMode, residual: &Residual, padding: u16);
}

/// Trial-codes every mode from the same coder state and returns the cheapest
/// (lowest canonical index on ties) with its cost. The coder is left exactly
/// as it was on entry.
pub fn choose_mode<T: TrialCoder>(
    ctx: &BlockContext,
    mpm: BlockMode,
    coder: &mut T,
) -> (BlockMode, u64) {
    let snapshot = coder.snapshot();
    let start = coder.bits();
    let mut best = (BlockMode::Pal, u64::MAX);
    for mode in BlockMode::ALL {
        let residual = compute_residual(mode, ctx);
        coder.encode_block(mode, mpm, &residual, ctx.padding());
        let cost = coder.bits() - start;
        coder.rollback(&snapshot);
        if cost < best.1 {
            best = (mode, cost);
        }
    }
    best
}
