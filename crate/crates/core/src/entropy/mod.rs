//! Context-adaptive binary arithmetic coding.
//!
//! The engine is the 9-bit-range, 64-state M-coder. Context bins adapt a
//! [`ContextModel`]; bypass bins are equiprobable and cost exactly one bit.
//! Multi-bin syntax elements are binarized in [`binarize`].

mod binarize;
mod engine;
pub mod tables;

pub use binarize::{eg0_bins, MAX_RICE_PARAM, RICE_PREFIX_CAP, RICE_PREFIX_CONTEXTS};
pub use engine::{Decoder, Encoder, EncoderSnapshot};

use tables::{MAX_STATE, TRANS_IDX_LPS};

/// Adaptive probability estimate for one binary syntax element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ContextModel {
    state: u8,
    mps: bool,
}

impl ContextModel {
    /// The equiprobable starting state.
    pub const fn new() -> Self {
        Self {
            state: 0,
            mps: false,
        }
    }

    pub fn state(&self) -> u8 {
        self.state
    }

    pub fn mps(&self) -> bool {
        self.mps
    }

    fn update(&mut self, bin: bool) {
        if bin == self.mps {
            self.state = (self.state + 1).min(MAX_STATE);
        } else {
            if self.state == 0 {
                self.mps = !self.mps;
            }
            self.state = TRANS_IDX_LPS[self.state as usize];
        }
    }
}

/// Identifies one context of the [`ContextSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtxId {
    Mpm,
    Skip,
    Sig,
    Gt1,
    Gt2,
    /// Remainder prefix bin for Rice parameter `k` at position `pos`
    /// (position saturates).
    RicePrefix {
        k: u8,
        pos: u8,
    },
}

impl CtxId {
    fn slot(self) -> usize {
        match self {
            CtxId::Mpm => 0,
            CtxId::Skip => 1,
            CtxId::Sig => 2,
            CtxId::Gt1 => 3,
            CtxId::Gt2 => 4,
            CtxId::RicePrefix { k, pos } => {
                5 + (k as usize).min(MAX_RICE_PARAM as usize) * RICE_PREFIX_CONTEXTS
                    + (pos as usize).min(RICE_PREFIX_CONTEXTS - 1)
            }
        }
    }
}

const NUM_CONTEXTS: usize = 5 + (MAX_RICE_PARAM as usize + 1) * RICE_PREFIX_CONTEXTS;

/// All adaptive state of a coding session: the context models plus the
/// running remainder mean that picks the Rice parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextSet {
    models: [ContextModel; NUM_CONTEXTS],
    // Exponential moving average of remainders, scaled by 16.
    remainder_mean: u32,
}

impl Default for ContextSet {
    fn default() -> Self {
        Self::new()
    }
}

impl ContextSet {
    pub fn new() -> Self {
        Self {
            models: [ContextModel::new(); NUM_CONTEXTS],
            remainder_mean: 0,
        }
    }

    pub fn get(&self, id: CtxId) -> &ContextModel {
        &self.models[id.slot()]
    }

    fn get_mut(&mut self, id: CtxId) -> &mut ContextModel {
        &mut self.models[id.slot()]
    }

    /// Current Rice parameter for remainders: `floor(log2(mean))`, capped.
    pub fn rice_param(&self) -> u32 {
        let mean = self.remainder_mean >> 4;
        mean.checked_ilog2().unwrap_or(0).min(MAX_RICE_PARAM)
    }

    fn update_rice(&mut self, remainder: u32) {
        // clamp keeps the average bounded; larger values all mean k = 7
        let v = remainder.min(1 << 12);
        self.remainder_mean = self.remainder_mean - (self.remainder_mean >> 4) + v;
    }
}
