//! Binarizations coded through the arithmetic engine.
//!
//! Exp-Golomb order 0 is bypass-coded. Residual remainders use a
//! Golomb-Rice code whose parameter follows the recent remainder
//! magnitudes; its unary prefix is context-coded and escapes to exp-Golomb
//! after [`RICE_PREFIX_CAP`] bins, the suffix is bypass-coded.

use super::engine::{Decoder, Encoder};
use super::CtxId;
use crate::error::{Error, Result};

/// Largest Rice parameter.
pub const MAX_RICE_PARAM: u32 = 7;
/// Prefix length at which the remainder escapes to exp-Golomb.
pub const RICE_PREFIX_CAP: u32 = 8;
/// Distinct prefix positions per Rice parameter (later positions share the last).
pub const RICE_PREFIX_CONTEXTS: usize = 4;

// Longest exp-Golomb prefix a u32 value can produce.
const MAX_EG_PREFIX: u32 = 32;

/// Order-0 exp-Golomb bin string of `value`, as the encoder emits it.
pub fn eg0_bins(value: u32) -> Vec<bool> {
    let x = u64::from(value) + 1;
    let len = 63 - x.leading_zeros();
    let mut bins = vec![false; len as usize];
    bins.extend((0..=len).rev().map(|i| (x >> i) & 1 == 1));
    bins
}

impl Encoder {
    pub fn encode_eg0(&mut self, value: u32) {
        let x = u64::from(value) + 1;
        let len = 63 - x.leading_zeros();
        for _ in 0..len {
            self.encode_bypass(false);
        }
        for i in (0..=len).rev() {
            self.encode_bypass((x >> i) & 1 == 1);
        }
    }

    /// Codes a residual remainder with the adaptive Rice parameter.
    pub fn encode_remainder(&mut self, value: u32) {
        let k = self.contexts().rice_param();
        let prefix = value >> k;
        for i in 0..prefix.min(RICE_PREFIX_CAP) {
            self.encode_bin(
                CtxId::RicePrefix {
                    k: k as u8,
                    pos: i as u8,
                },
                true,
            );
        }
        if prefix < RICE_PREFIX_CAP {
            self.encode_bin(
                CtxId::RicePrefix {
                    k: k as u8,
                    pos: prefix as u8,
                },
                false,
            );
        } else {
            self.encode_eg0(prefix - RICE_PREFIX_CAP);
        }
        self.encode_bypass_n(value & ((1 << k) - 1), k);
        self.contexts_mut().update_rice(value);
    }
}

impl Decoder<'_> {
    pub fn decode_eg0(&mut self) -> Result<u32> {
        let mut len = 0;
        while !self.decode_bypass()? {
            len += 1;
            if len > MAX_EG_PREFIX {
                return Err(Error::Format("exp-Golomb prefix too long".into()));
            }
        }
        let mut x: u64 = 1;
        for _ in 0..len {
            x = (x << 1) | u64::from(self.decode_bypass()?);
        }
        u32::try_from(x - 1).map_err(|_| Error::Format("exp-Golomb value overflows".into()))
    }

    pub fn decode_remainder(&mut self) -> Result<u32> {
        let k = self.contexts().rice_param();
        let mut prefix = 0;
        while prefix < RICE_PREFIX_CAP
            && self.decode_bin(CtxId::RicePrefix {
                k: k as u8,
                pos: prefix as u8,
            })?
        {
            prefix += 1;
        }
        if prefix == RICE_PREFIX_CAP {
            prefix += self.decode_eg0()?;
        }
        let suffix = self.decode_bypass_n(k)?;
        let value = prefix
            .checked_mul(1 << k)
            .and_then(|high| high.checked_add(suffix))
            .ok_or_else(|| Error::Format("remainder overflows".into()))?;
        self.contexts_mut().update_rice(value);
        Ok(value)
    }
}
