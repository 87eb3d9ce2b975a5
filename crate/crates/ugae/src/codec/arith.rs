//! Adaptive binary arithmetic coder (32-bit range, carry-free with
//! pending-bit renormalization). Symbol probabilities come from simple
//! adaptive counters; encoding is strictly sequential and bit-exact
//! reproducible.

use super::CodecError;

const CODE_MAX: u64 = 0xFFFF_FFFF;
const HALF: u64 = 0x8000_0000;
const QUARTER: u64 = 0x4000_0000;
const THREE_QUARTERS: u64 = 0xC000_0000;
/// Rescale adaptive counts when they reach this total, keeping the coder's
/// `range * count` products well inside u64.
const COUNT_LIMIT: u32 = 1 << 16;
/// How many zero bits a decoder may fabricate past the payload before the
/// stream is declared corrupt.
const OVERREAD_SLACK_BITS: usize = 64;

/// Adaptive model for one binary context: frequency counts of the two
/// symbols, halved periodically so the estimate tracks local statistics.
#[derive(Debug, Clone)]
pub struct BinaryModel {
    c0: u32,
    c1: u32,
}

impl Default for BinaryModel {
    fn default() -> Self {
        Self::new()
    }
}

impl BinaryModel {
    pub fn new() -> Self {
        Self { c0: 1, c1: 1 }
    }

    fn update(&mut self, bit: bool) {
        if bit {
            self.c1 += 1;
        } else {
            self.c0 += 1;
        }
        if self.c0 + self.c1 >= COUNT_LIMIT {
            self.c0 = (self.c0 + 1) / 2;
            self.c1 = (self.c1 + 1) / 2;
        }
    }
}

/// Split the current interval after the zero-symbol share; returns the
/// last code value that decodes as 0.
#[inline]
fn zero_boundary(low: u64, high: u64, c0: u32, c1: u32) -> u64 {
    let range = high - low + 1;
    low + range * c0 as u64 / (c0 + c1) as u64 - 1
}

#[derive(Debug)]
pub struct BitEncoder {
    low: u64,
    high: u64,
    pending: u64,
    out: Vec<u8>,
    cur: u8,
    cur_bits: u8,
}

impl Default for BitEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl BitEncoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            high: CODE_MAX,
            pending: 0,
            out: Vec::new(),
            cur: 0,
            cur_bits: 0,
        }
    }

    fn push_bit(&mut self, bit: bool) {
        self.cur = (self.cur << 1) | u8::from(bit);
        self.cur_bits += 1;
        if self.cur_bits == 8 {
            self.out.push(self.cur);
            self.cur = 0;
            self.cur_bits = 0;
        }
    }

    fn emit(&mut self, bit: bool) {
        self.push_bit(bit);
        while self.pending > 0 {
            self.push_bit(!bit);
            self.pending -= 1;
        }
    }

    fn renormalize(&mut self) {
        loop {
            if self.high < HALF {
                self.emit(false);
            } else if self.low >= HALF {
                self.emit(true);
                self.low -= HALF;
                self.high -= HALF;
            } else if self.low >= QUARTER && self.high < THREE_QUARTERS {
                self.pending += 1;
                self.low -= QUARTER;
                self.high -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
        }
    }

    /// Encode one bit under an adaptive context.
    pub fn encode(&mut self, model: &mut BinaryModel, bit: bool) {
        let mid = zero_boundary(self.low, self.high, model.c0, model.c1);
        if bit {
            self.low = mid + 1;
        } else {
            self.high = mid;
        }
        model.update(bit);
        self.renormalize();
    }

    /// Encode one bit at a fixed 50/50 split (no adaptation).
    pub fn encode_bypass(&mut self, bit: bool) {
        let mid = zero_boundary(self.low, self.high, 1, 1);
        if bit {
            self.low = mid + 1;
        } else {
            self.high = mid;
        }
        self.renormalize();
    }

    /// Flush the interval state; the returned bytes fully determine the
    /// encoded bit sequence.
    pub fn finish(mut self) -> Vec<u8> {
        self.pending += 1;
        if self.low < QUARTER {
            self.emit(false);
        } else {
            self.emit(true);
        }
        while self.cur_bits != 0 {
            self.push_bit(false);
        }
        self.out
    }
}

#[derive(Debug)]
pub struct BitDecoder<'a> {
    bytes: &'a [u8],
    low: u64,
    high: u64,
    value: u64,
    next_bit: usize,
}

impl<'a> BitDecoder<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        let mut dec = Self {
            bytes,
            low: 0,
            high: CODE_MAX,
            value: 0,
            next_bit: 0,
        };
        for _ in 0..32 {
            // Cannot overread here: 32 bits are within the slack even for
            // an empty payload.
            dec.value = (dec.value << 1) | dec.pull_bit().unwrap();
        }
        dec
    }

    /// Byte offset of the next unread input bit (for error reports).
    pub fn position(&self) -> usize {
        (self.next_bit / 8).min(self.bytes.len())
    }

    fn pull_bit(&mut self) -> Result<u64, CodecError> {
        let total = self.bytes.len() * 8;
        if self.next_bit >= total + OVERREAD_SLACK_BITS {
            return Err(CodecError::CorruptStream {
                offset: self.bytes.len(),
                detail: "decoder ran past the end of the payload".to_string(),
            });
        }
        let bit = if self.next_bit < total {
            (self.bytes[self.next_bit / 8] >> (7 - self.next_bit % 8)) & 1
        } else {
            0
        };
        self.next_bit += 1;
        Ok(bit as u64)
    }

    fn out_of_range(&self) -> CodecError {
        CodecError::CorruptStream {
            offset: self.position(),
            detail: "code value outside the current interval".to_string(),
        }
    }

    fn renormalize(&mut self) -> Result<(), CodecError> {
        loop {
            if self.high < HALF {
                // Nothing to subtract.
            } else if self.low >= HALF {
                self.low -= HALF;
                self.high -= HALF;
                self.value = self
                    .value
                    .checked_sub(HALF)
                    .ok_or_else(|| self.out_of_range())?;
            } else if self.low >= QUARTER && self.high < THREE_QUARTERS {
                self.low -= QUARTER;
                self.high -= QUARTER;
                self.value = self
                    .value
                    .checked_sub(QUARTER)
                    .ok_or_else(|| self.out_of_range())?;
            } else {
                break;
            }
            // A valid stream keeps the code value inside [low, high]; a
            // violation here can only come from corrupt input.
            if self.value > self.high {
                return Err(self.out_of_range());
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
            self.value = (self.value << 1) | self.pull_bit()?;
        }
        Ok(())
    }

    /// Decode one bit under an adaptive context; must mirror the encoder's
    /// context sequence exactly.
    pub fn decode(&mut self, model: &mut BinaryModel) -> Result<bool, CodecError> {
        let mid = zero_boundary(self.low, self.high, model.c0, model.c1);
        let bit = self.value > mid;
        if bit {
            self.low = mid + 1;
        } else {
            self.high = mid;
        }
        model.update(bit);
        self.renormalize()?;
        Ok(bit)
    }

    /// Decode one fixed 50/50 bit.
    pub fn decode_bypass(&mut self) -> Result<bool, CodecError> {
        let mid = zero_boundary(self.low, self.high, 1, 1);
        let bit = self.value > mid;
        if bit {
            self.low = mid + 1;
        } else {
            self.high = mid;
        }
        self.renormalize()?;
        Ok(bit)
    }
}
