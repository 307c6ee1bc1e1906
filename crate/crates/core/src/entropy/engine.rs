use super::tables::RANGE_TAB_LPS;
use super::{ContextSet, CtxId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
struct BitWriter {
    bytes: Vec<u8>,
    cur: u8,
    filled: u8,
}

impl BitWriter {
    fn put(&mut self, bit: bool) {
        self.cur = (self.cur << 1) | u8::from(bit);
        self.filled += 1;
        if self.filled == 8 {
            self.bytes.push(self.cur);
            self.cur = 0;
            self.filled = 0;
        }
    }

    /// Pads the partial byte with zeros.
    fn finish(mut self) -> Vec<u8> {
        if self.filled > 0 {
            self.bytes.push(self.cur << (8 - self.filled));
        }
        self.bytes
    }
}

/// Arithmetic encoder with an exact output-bit meter and O(1) snapshots.
///
/// Every bit resolved by renormalization is counted as soon as it is
/// produced, including bits still waiting on a carry, so [`Encoder::bits`]
/// is exactly the number of bits the stream holds once those resolve.
#[derive(Debug, Clone)]
pub struct Encoder {
    low: u32,
    range: u32,
    outstanding: u64,
    out: BitWriter,
    bits: u64,
    contexts: ContextSet,
}

/// Complete encoder state at one point of the stream.
#[derive(Debug, Clone)]
pub struct EncoderSnapshot {
    low: u32,
    range: u32,
    outstanding: u64,
    bytes_len: usize,
    cur: u8,
    filled: u8,
    bits: u64,
    contexts: ContextSet,
}

impl Default for Encoder {
    fn default() -> Self {
        Self::new()
    }
}

impl Encoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            range: 510,
            outstanding: 0,
            out: BitWriter::default(),
            bits: 0,
            contexts: ContextSet::new(),
        }
    }

    /// Output bits produced so far.
    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn contexts(&self) -> &ContextSet {
        &self.contexts
    }

    pub(super) fn contexts_mut(&mut self) -> &mut ContextSet {
        &mut self.contexts
    }

    pub fn snapshot(&self) -> EncoderSnapshot {
        EncoderSnapshot {
            low: self.low,
            range: self.range,
            outstanding: self.outstanding,
            bytes_len: self.out.bytes.len(),
            cur: self.out.cur,
            filled: self.out.filled,
            bits: self.bits,
            contexts: self.contexts.clone(),
        }
    }

    /// Restores a snapshot taken from this encoder. Bytes written since the
    /// snapshot are discarded.
    pub fn rollback(&mut self, s: &EncoderSnapshot) {
        self.low = s.low;
        self.range = s.range;
        self.outstanding = s.outstanding;
        self.out.bytes.truncate(s.bytes_len);
        self.out.cur = s.cur;
        self.out.filled = s.filled;
        self.bits = s.bits;
        self.contexts.clone_from(&s.contexts);
    }

    fn put_bit(&mut self, bit: bool) {
        self.out.put(bit);
        while self.outstanding > 0 {
            self.out.put(!bit);
            self.outstanding -= 1;
        }
    }

    fn renorm(&mut self) {
        while self.range < 256 {
            if self.low < 256 {
                self.put_bit(false);
            } else if self.low >= 512 {
                self.low -= 512;
                self.put_bit(true);
            } else {
                self.low -= 256;
                self.outstanding += 1;
            }
            self.bits += 1;
            self.range <<= 1;
            self.low <<= 1;
        }
    }

    /// Codes `bin` against the adaptive context `id`.
    pub fn encode_bin(&mut self, id: CtxId, bin: bool) {
        let model = self.contexts.get_mut(id);
        let lps = u32::from(RANGE_TAB_LPS[model.state as usize][((self.range >> 6) & 3) as usize]);
        self.range -= lps;
        if bin != model.mps {
            self.low += self.range;
            self.range = lps;
        }
        model.update(bin);
        self.renorm();
    }

    /// Codes an equiprobable bin.
    pub fn encode_bypass(&mut self, bin: bool) {
        self.low <<= 1;
        if bin {
            self.low += self.range;
        }
        if self.low >= 1024 {
            self.put_bit(true);
            self.low -= 1024;
        } else if self.low < 512 {
            self.put_bit(false);
        } else {
            self.low -= 512;
            self.outstanding += 1;
        }
        self.bits += 1;
    }

    /// `n` bypass bins holding `value`, most significant first.
    pub fn encode_bypass_n(&mut self, value: u32, n: u32) {
        for i in (0..n).rev() {
            self.encode_bypass((value >> i) & 1 == 1);
        }
    }

    /// Codes an end-of-payload marker and flushes. The final stream is
    /// byte-aligned with zero padding.
    pub fn finish(mut self) -> Vec<u8> {
        self.range -= 2;
        self.low += self.range;
        self.range = 2;
        self.renorm();
        self.put_bit((self.low >> 9) & 1 == 1);
        let tail = ((self.low >> 7) & 3) | 1;
        self.out.put(tail & 2 == 2);
        self.out.put(tail & 1 == 1);
        self.out.finish()
    }
}

/// Arithmetic decoder mirroring [`Encoder`].
#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    data: &'a [u8],
    pos: usize,
    range: u32,
    offset: u32,
    contexts: ContextSet,
}

impl<'a> Decoder<'a> {
    pub fn new(data: &'a [u8]) -> Result<Self> {
        let mut d = Self {
            data,
            pos: 0,
            range: 510,
            offset: 0,
            contexts: ContextSet::new(),
        };
        // The encoder's first output bit is a register artefact.
        d.read_bit()?;
        d.offset = d.read_bits(9)?;
        Ok(d)
    }

    pub fn contexts(&self) -> &ContextSet {
        &self.contexts
    }

    pub(super) fn contexts_mut(&mut self) -> &mut ContextSet {
        &mut self.contexts
    }

    /// Bits consumed from the payload so far.
    pub fn bits_consumed(&self) -> usize {
        self.pos
    }

    fn read_bit(&mut self) -> Result<u32> {
        let byte = *self.data.get(self.pos / 8).ok_or(Error::TruncatedStream)?;
        let bit = (byte >> (7 - self.pos % 8)) & 1;
        self.pos += 1;
        Ok(u32::from(bit))
    }

    fn read_bits(&mut self, n: u32) -> Result<u32> {
        let mut v = 0;
        for _ in 0..n {
            v = (v << 1) | self.read_bit()?;
        }
        Ok(v)
    }

    pub fn decode_bin(&mut self, id: CtxId) -> Result<bool> {
        let model = self.contexts.get_mut(id);
        let lps = u32::from(RANGE_TAB_LPS[model.state as usize][((self.range >> 6) & 3) as usize]);
        self.range -= lps;
        let bin = if self.offset >= self.range {
            self.offset -= self.range;
            self.range = lps;
            !model.mps
        } else {
            model.mps
        };
        model.update(bin);
        while self.range < 256 {
            self.range <<= 1;
            self.offset = (self.offset << 1) | self.read_bit()?;
        }
        Ok(bin)
    }

    pub fn decode_bypass(&mut self) -> Result<bool> {
        self.offset = (self.offset << 1) | self.read_bit()?;
        if self.offset >= self.range {
            self.offset -= self.range;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub fn decode_bypass_n(&mut self, n: u32) -> Result<u32> {
        let mut v = 0;
        for _ in 0..n {
            v = (v << 1) | u32::from(self.decode_bypass()?);
        }
        Ok(v)
    }

    /// Checks the end-of-payload marker and that only zero padding follows.
    pub fn finish(mut self) -> Result<()> {
        self.range -= 2;
        if self.offset < self.range {
            return Err(Error::Format("missing end-of-payload marker".into()));
        }
        // The lookahead already holds every flushed bit; only padding remains.
        let total_bits = self.data.len() * 8;
        if total_bits < self.pos || total_bits - self.pos >= 8 {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                (total_bits - self.pos) / 8
            )));
        }
        while self.pos < total_bits {
            if self.read_bit()? != 0 {
                return Err(Error::Format("non-zero padding after payload".into()));
            }
        }
        Ok(())
    }
}
