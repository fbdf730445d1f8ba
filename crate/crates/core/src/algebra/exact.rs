//! Order-independent summation of `f64` values.
//!
//! Every finite double is an integer multiple of 2^-1074, so a wide enough
//! fixed-point accumulator adds them without rounding. The running total is
//! kept in 32-bit limbs stored in `i64` slots, which leaves headroom for
//! 2^30 unnormalised additions. Because the exact total does not depend on
//! the order of the additions, a global sum assembled from per-rank partials
//! is the same for every decomposition and every executor width.

use std::ops::Add;

const LIMB_BITS: u32 = 32;
const LIMB_MASK: u128 = (1 << LIMB_BITS) - 1;
/// Limbs needed for bit positions 0..=2045 plus an 84-bit shifted mantissa.
pub const LIMBS: usize = 66;
const NORMALIZE_AFTER: u32 = 1 << 30;

/// Exact running sum of doubles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSum {
    limbs: [i64; LIMBS],
    pending: u32,
    /// Plain sum of non-finite inputs, which poison the result.
    special: f64,
}

impl Default for ExactSum {
    fn default() -> Self {
        Self::new()
    }
}

fn pow2(k: i32) -> f64 {
    if k >= -1022 {
        f64::from_bits(((k + 1023) as u64) << 52)
    } else {
        f64::from_bits(1u64 << (k + 1074))
    }
}

impl ExactSum {
    /// Length of [`ExactSum::to_wire`] output.
    pub const WIRE_LEN: usize = LIMBS + 1;

    pub const fn new() -> Self {
        Self {
            limbs: [0; LIMBS],
            pending: 0,
            special: 0.0,
        }
    }

    pub fn push(&mut self, x: f64) {
        let bits = x.to_bits();
        let biased = ((bits >> 52) & 0x7ff) as u32;
        if biased == 0x7ff {
            self.special += x;
            return;
        }
        let frac = bits & ((1u64 << 52) - 1);
        let (mantissa, pos) = if biased == 0 { (frac, 0) } else { (frac | (1u64 << 52), biased - 1) };
        if mantissa == 0 {
            return;
        }
        let idx = (pos / LIMB_BITS) as usize;
        let v = (mantissa as u128) << (pos % LIMB_BITS);
        let parts = [v & LIMB_MASK, (v >> LIMB_BITS) & LIMB_MASK, v >> (2 * LIMB_BITS)];
        let negative = bits >> 63 == 1;
        for (k, p) in parts.into_iter().enumerate() {
            let p = p as i64;
            self.limbs[idx + k] += if negative { -p } else { p };
        }
        self.bump(1);
    }

    fn bump(&mut self, n: u32) {
        self.pending += n;
        if self.pending >= NORMALIZE_AFTER {
            self.normalize();
        }
    }

    /// Propagates carries so that every limb but the top one lies in
    /// `[0, 2^32)`. The normalised form of a value is unique.
    fn normalize(&mut self) {
        for i in 0..LIMBS - 1 {
            let carry = self.limbs[i] >> LIMB_BITS;
            self.limbs[i] -= carry << LIMB_BITS;
            self.limbs[i + 1] += carry;
        }
        self.pending = 0;
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for (a, b) in self.limbs.iter_mut().zip(&other.limbs) {
            *a += b;
        }
        self.special += other.special;
        self.bump(other.pending.max(1));
    }

    /// The exact total rounded to a double.
    pub fn value(&self) -> f64 {
        if self.special != 0.0 || self.special.is_nan() {
            return self.special;
        }
        let mut n = *self;
        n.normalize();
        let negative = n.limbs[LIMBS - 1] < 0;
        if negative {
            for l in n.limbs.iter_mut() {
                *l = -*l;
            }
            n.normalize();
        }
        let mut acc = 0.0;
        for i in (0..LIMBS).rev() {
            if n.limbs[i] != 0 {
                acc += n.limbs[i] as f64 * pow2(LIMB_BITS as i32 * i as i32 - 1074);
            }
        }
        if negative {
            -acc
        } else {
            acc
        }
    }

    /// Normalised limbs followed by the non-finite sum. Every entry is exactly
    /// representable, and adding the wire vectors of up to 2^20 ranks
    /// elementwise in `f64` is still exact.
    pub fn to_wire(&self) -> Vec<f64> {
        let mut n = *self;
        n.normalize();
        let mut out: Vec<f64> = n.limbs.iter().map(|&l| l as f64).collect();
        out.push(n.special);
        out
    }

    pub fn from_wire(wire: &[f64]) -> Self {
        assert_eq!(wire.len(), Self::WIRE_LEN, "exact-sum wire length");
        let mut s = Self::new();
        for (l, &w) in s.limbs.iter_mut().zip(wire) {
            *l = w as i64;
        }
        s.special = wire[LIMBS];
        s.pending = 1;
        s
    }
}

impl Add for ExactSum {
    type Output = ExactSum;

    fn add(mut self, rhs: ExactSum) -> ExactSum {
        self.merge(&rhs);
        self
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        iter.into_iter().for_each(|x| s.push(x));
        s
    }
}
