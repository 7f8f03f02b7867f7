// SPDX-License-Identifier: Apache-2.0

//! HyperLogLog counters packed into dense counter arrays.
//!
//! A counter is an array of `p = 2^b` registers of `register_width` bits.
//! An array of `n` counters stores each counter in its own run of
//! `ceil(p * register_width / 64)` words; inside that run registers are
//! packed back to back and may straddle word boundaries. Keeping every
//! counter word-aligned lets workers own disjoint counters without
//! synchronization.
//!
//! Union is computed with a broadword register-wise maximum over the whole
//! run of words, so merging two counters costs a few word operations per
//! 64 bits of registers rather than one branch per register.

use std::io::{Read, Write};

use thiserror::Error;

/// Smallest admissible `log2m` (16 registers).
pub const MIN_LOG2M: u32 = 4;
/// Largest admissible `log2m`.
pub const MAX_LOG2M: u32 = 24;
/// Default register width in bits.
pub const DEFAULT_REGISTER_WIDTH: u32 = 5;

const BLOB_MAGIC: &[u8; 4] = b"HLLA";
const BLOB_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum HllError {
    #[error("log2m must be in {MIN_LOG2M}..={MAX_LOG2M}, got {0}")]
    InvalidLog2m(u32),
    #[error("register width must be in 1..=8, got {0}")]
    InvalidRegisterWidth(u32),
    #[error("at least 16 registers are required, got {0}")]
    TooFewRegisters(usize),
    #[error("counter parameters differ: {0:?} vs {1:?}")]
    ParamsMismatch(CounterParams, CounterParams),
    #[error("malformed counter blob: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Shape and hash seed shared by all counters of an array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CounterParams {
    log2m: u32,
    register_width: u32,
    seed: u64,
}

impl CounterParams {
    pub fn new(log2m: u32, register_width: u32, seed: u64) -> Result<Self, HllError> {
        if !(MIN_LOG2M..=MAX_LOG2M).contains(&log2m) {
            return Err(HllError::InvalidLog2m(log2m));
        }
        if !(1..=8).contains(&register_width) {
            return Err(HllError::InvalidRegisterWidth(register_width));
        }
        Ok(Self {
            log2m,
            register_width,
            seed,
        })
    }

    /// `b`, the base-2 logarithm of the register count.
    pub fn log2m(&self) -> u32 {
        self.log2m
    }

    /// `p = 2^b`.
    pub fn num_registers(&self) -> usize {
        1 << self.log2m
    }

    pub fn register_width(&self) -> u32 {
        self.register_width
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Largest value a register can hold.
    pub fn max_register(&self) -> u32 {
        (1 << self.register_width) - 1
    }

    /// Same shape, different hash function.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The 64-bit hash of an item: replica `replica` of node `node` under a
/// seeded hash function. Unweighted nodes use replica 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HashedItem(u64);

impl HashedItem {
    pub fn new(node: u64, replica: u64, seed: u64) -> Self {
        let keyed = mix64(node.wrapping_add(mix64(seed)));
        Self(mix64(keyed ^ replica.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
    }

    pub fn of_node(node: u64, seed: u64) -> Self {
        Self::new(node, 0, seed)
    }

    /// Wraps an already-hashed value.
    pub fn from_raw(value: u64) -> Self {
        Self(value)
    }

    pub fn value(&self) -> u64 {
        self.0
    }
}

/// Number of leading zeros of `word` (read from its most significant bit)
/// plus one, capped at `max_value`.
#[inline]
pub fn rho_plus(word: u64, max_value: u32) -> u32 {
    (word.leading_zeros() + 1).min(max_value)
}

/// Ceiling on the relative standard deviation of a counter with `p`
/// registers: `1.06 / sqrt(p)`.
pub fn standard_deviation_bound(p: usize) -> Result<f64, HllError> {
    if p < 16 {
        return Err(HllError::TooFewRegisters(p));
    }
    Ok(1.06 / (p as f64).sqrt())
}

fn alpha(p: usize) -> f64 {
    match p {
        16 => 0.673,
        32 => 0.697,
        64 => 0.709,
        _ => 0.7213 / (1.0 + 1.079 / p as f64),
    }
}

/// Register arithmetic for one counter shape: add, estimate, and
/// broadword union over the word run of a single counter.
#[derive(Debug, Clone)]
pub struct HyperLogLog {
    params: CounterParams,
    words_per_counter: usize,
    /// Most significant bit of every register field.
    msb: Vec<u64>,
    alpha_mm: f64,
    inv_pow: [f64; 256],
}

impl HyperLogLog {
    pub fn new(params: CounterParams) -> Self {
        let p = params.num_registers();
        let w = params.register_width as usize;
        let words_per_counter = (p * w).div_ceil(64);
        let mut msb = vec![0u64; words_per_counter];
        for j in 0..p {
            let bit = j * w + w - 1;
            msb[bit / 64] |= 1 << (bit % 64);
        }
        let mut inv_pow = [0.0; 256];
        for (r, slot) in inv_pow.iter_mut().enumerate() {
            *slot = (-(r as f64)).exp2();
        }
        Self {
            params,
            words_per_counter,
            msb,
            alpha_mm: alpha(p) * (p as f64) * (p as f64),
            inv_pow,
        }
    }

    pub fn params(&self) -> &CounterParams {
        &self.params
    }

    pub fn words_per_counter(&self) -> usize {
        self.words_per_counter
    }

    /// Words of scratch space needed by [`merge`](Self::merge).
    pub fn scratch_words(&self) -> usize {
        2 * self.words_per_counter
    }

    #[inline]
    pub fn register(&self, counter: &[u64], j: usize) -> u32 {
        let w = self.params.register_width as usize;
        let bit = j * w;
        let (word, off) = (bit / 64, bit % 64);
        let mut v = counter[word] >> off;
        if off + w > 64 {
            v |= counter[word + 1] << (64 - off);
        }
        (v & ((1 << w) - 1)) as u32
    }

    #[inline]
    pub fn set_register(&self, counter: &mut [u64], j: usize, value: u32) {
        let w = self.params.register_width as usize;
        let mask = (1u64 << w) - 1;
        let value = value as u64 & mask;
        let bit = j * w;
        let (word, off) = (bit / 64, bit % 64);
        counter[word] = (counter[word] & !(mask << off)) | (value << off);
        if off + w > 64 {
            let spill = off + w - 64;
            let hi_mask = (1u64 << spill) - 1;
            counter[word + 1] = (counter[word + 1] & !hi_mask) | (value >> (64 - off));
        }
    }

    /// Feeds one item; returns whether a register changed.
    pub fn add(&self, counter: &mut [u64], item: HashedItem) -> bool {
        let b = self.params.log2m;
        let h = item.value();
        let j = (h & ((1 << b) - 1)) as usize;
        let rho = rho_plus(h & !((1u64 << b) - 1), 65 - b).min(self.params.max_register());
        if rho > self.register(counter, j) {
            self.set_register(counter, j, rho);
            true
        } else {
            false
        }
    }

    /// Cardinality estimate, switching to linear counting for small
    /// cardinalities.
    pub fn estimate(&self, counter: &[u64]) -> f64 {
        let p = self.params.num_registers();
        let w = self.params.register_width as usize;
        let mask = (1u64 << w) - 1;
        let mut sum = 0.0;
        let mut zeros = 0usize;
        let mut bit = 0usize;
        for _ in 0..p {
            let (word, off) = (bit / 64, bit % 64);
            let mut v = counter[word] >> off;
            if off + w > 64 {
                v |= counter[word + 1] << (64 - off);
            }
            let r = (v & mask) as usize;
            zeros += (r == 0) as usize;
            sum += self.inv_pow[r];
            bit += w;
        }
        let raw = self.alpha_mm / sum;
        let p = p as f64;
        if raw <= 2.5 * p && zeros > 0 {
            p * (p / zeros as f64).ln()
        } else {
            raw
        }
    }

    /// Register-wise maximum of `target` and `source`, stored in `target`.
    /// Returns whether `target` changed. `scratch` must hold at least
    /// [`scratch_words`](Self::scratch_words) words.
    pub fn merge(&self, target: &mut [u64], source: &[u64], scratch: &mut [u64]) -> bool {
        let k = self.words_per_counter;
        let w = self.params.register_width;
        let msb = &self.msb[..];
        let (diff, ge) = scratch[..2 * k].split_at_mut(k);

        // Per field, (x | top) - (y & !top) never borrows out of the field;
        // its top bit tells whether the low bits of x are >= those of y.
        let mut borrow = false;
        for i in 0..k {
            let a = target[i] | msb[i];
            let b = source[i] & !msb[i];
            let (d, o1) = a.overflowing_sub(b);
            let (d, o2) = d.overflowing_sub(borrow as u64);
            diff[i] = d;
            borrow = o1 | o2;
        }
        for i in 0..k {
            let (x, y) = (target[i], source[i]);
            ge[i] = ((x & !y) | (!(x ^ y) & diff[i])) & msb[i];
        }

        // Spread each top-bit flag over its whole field:
        // mask = (ge - (ge >> (w - 1))) | ge.
        let shift = w - 1;
        let mut changed = false;
        let mut borrow = false;
        for i in 0..k {
            let g = ge[i];
            let mask = if shift == 0 {
                g
            } else {
                let mut low = g >> shift;
                if i + 1 < k {
                    low |= ge[i + 1] << (64 - shift);
                }
                let (d, o1) = g.overflowing_sub(low);
                let (d, o2) = d.overflowing_sub(borrow as u64);
                borrow = o1 | o2;
                d | g
            };
            let x = target[i];
            let merged = (x & mask) | (source[i] & !mask);
            changed |= merged != x;
            target[i] = merged;
        }
        changed
    }
}

/// `n` HyperLogLog counters sharing one [`CounterParams`].
#[derive(Debug, Clone)]
pub struct CounterArray {
    logic: HyperLogLog,
    n: usize,
    words: Vec<u64>,
}

impl PartialEq for CounterArray {
    fn eq(&self, other: &Self) -> bool {
        self.logic.params == other.logic.params && self.n == other.n && self.words == other.words
    }
}

impl CounterArray {
    /// `n` empty counters.
    pub fn new(params: CounterParams, n: usize) -> Self {
        let logic = HyperLogLog::new(params);
        let words = vec![0; n * logic.words_per_counter];
        Self { logic, n, words }
    }

    /// Wraps raw words laid out as produced by [`into_words`](Self::into_words).
    pub fn from_words(params: CounterParams, n: usize, words: Vec<u64>) -> Result<Self, HllError> {
        let logic = HyperLogLog::new(params);
        if words.len() != n * logic.words_per_counter {
            return Err(HllError::Format(format!(
                "expected {} words for {n} counters, got {}",
                n * logic.words_per_counter,
                words.len()
            )));
        }
        Ok(Self { logic, n, words })
    }

    pub fn into_words(self) -> Vec<u64> {
        self.words
    }

    pub fn params(&self) -> &CounterParams {
        &self.logic.params
    }

    pub fn logic(&self) -> &HyperLogLog {
        &self.logic
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn counter(&self, slot: usize) -> &[u64] {
        let k = self.logic.words_per_counter;
        &self.words[slot * k..(slot + 1) * k]
    }

    pub fn register(&self, slot: usize, j: usize) -> u32 {
        self.logic.register(self.counter(slot), j)
    }

    /// All registers of a counter, unpacked.
    pub fn registers(&self, slot: usize) -> Vec<u32> {
        let c = self.counter(slot);
        (0..self.logic.params.num_registers())
            .map(|j| self.logic.register(c, j))
            .collect()
    }

    pub fn add(&mut self, slot: usize, item: HashedItem) -> bool {
        let k = self.logic.words_per_counter;
        self.logic
            .add(&mut self.words[slot * k..(slot + 1) * k], item)
    }

    pub fn estimate_size(&self, slot: usize) -> f64 {
        self.logic.estimate(self.counter(slot))
    }

    /// Merges counter `source_slot` of `source` into counter `target_slot`.
    pub fn union_into(
        &mut self,
        target_slot: usize,
        source: &CounterArray,
        source_slot: usize,
    ) -> Result<bool, HllError> {
        if self.logic.params != source.logic.params {
            return Err(HllError::ParamsMismatch(
                self.logic.params,
                source.logic.params,
            ));
        }
        let mut scratch = vec![0; self.logic.scratch_words()];
        let k = self.logic.words_per_counter;
        let src = &source.words[source_slot * k..(source_slot + 1) * k];
        let dst = &mut self.words[target_slot * k..(target_slot + 1) * k];
        Ok(self.logic.merge(dst, src, &mut scratch))
    }

    /// Merges one counter of this array into another.
    pub fn union_slots(&mut self, target_slot: usize, source_slot: usize) -> bool {
        let src = self.counter(source_slot).to_vec();
        let mut scratch = vec![0; self.logic.scratch_words()];
        let k = self.logic.words_per_counter;
        let dst = &mut self.words[target_slot * k..(target_slot + 1) * k];
        self.logic.merge(dst, &src, &mut scratch)
    }

    /// Bytes of register storage held in core.
    pub fn memory_bytes(&self) -> usize {
        self.words.len() * std::mem::size_of::<u64>()
    }

    /// Serializes as `HLLA` blob: little-endian header followed by all
    /// registers packed densely, padded to a byte boundary.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), HllError> {
        let params = &self.logic.params;
        out.write_all(BLOB_MAGIC)?;
        out.write_all(&BLOB_VERSION.to_le_bytes())?;
        out.write_all(&[params.log2m as u8, params.register_width as u8])?;
        out.write_all(&(self.n as u64).to_le_bytes())?;
        out.write_all(&params.seed.to_le_bytes())?;

        let w = params.register_width;
        let p = params.num_registers();
        let mut bytes = Vec::with_capacity((self.n * p * w as usize).div_ceil(8));
        let (mut acc, mut filled) = (0u64, 0u32);
        for slot in 0..self.n {
            let c = self.counter(slot);
            for j in 0..p {
                acc |= (self.logic.register(c, j) as u64) << filled;
                filled += w;
                while filled >= 8 {
                    bytes.push(acc as u8);
                    acc >>= 8;
                    filled -= 8;
                }
            }
        }
        if filled > 0 {
            bytes.push(acc as u8);
        }
        out.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, HllError> {
        let mut header = [0u8; 24];
        input.read_exact(&mut header).map_err(truncated)?;
        if &header[0..4] != BLOB_MAGIC {
            return Err(HllError::Format("bad magic".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != BLOB_VERSION {
            return Err(HllError::Format(format!("unsupported version {version}")));
        }
        let params = CounterParams::new(header[6] as u32, header[7] as u32, {
            u64::from_le_bytes(header[16..24].try_into().unwrap())
        })?;
        let n = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
        let p = params.num_registers();
        let w = params.register_width;
        let len = n
            .checked_mul(p * w as usize)
            .ok_or_else(|| HllError::Format("counter count overflows".into()))?
            .div_ceil(8);
        let mut bytes = vec![0u8; len];
        input.read_exact(&mut bytes).map_err(truncated)?;

        let mut array = CounterArray::new(params, n);
        let k = array.logic.words_per_counter;
        let mask = (1u64 << w) - 1;
        let (mut acc, mut filled, mut pos) = (0u64, 0u32, 0usize);
        for slot in 0..n {
            let (logic, words) = (&array.logic, &mut array.words);
            let c = &mut words[slot * k..(slot + 1) * k];
            for j in 0..p {
                while filled < w {
                    acc |= (bytes[pos] as u64) << filled;
                    pos += 1;
                    filled += 8;
                }
                logic.set_register(c, j, (acc & mask) as u32);
                acc >>= w;
                filled -= w;
            }
        }
        Ok(array)
    }
}

fn truncated(e: std::io::Error) -> HllError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        HllError::Format("truncated blob".into())
    } else {
        HllError::Io(e)
    }
}
