//! Wide-exponent software floating point.
//!
//! Values are `sign · (sig/2^128) · 2^exp` with a 64-bit exponent and a
//! 128-bit significand that is rounded to a configurable mantissa width after
//! every operation. The point is the enormous exponent range: Laguerre
//! recurrences at photon numbers ~10^6 pass through magnitudes far beyond
//! what IEEE doubles can represent, while the needed mantissa stays modest
//! (~60–70 bits). A sign/log-magnitude representation is no alternative here
//! because the recurrence subtracts nearly equal terms.

/// Minimal supported mantissa width (f64 precision).
pub const MIN_BITS: u32 = 53;
/// Maximal supported mantissa width.
pub const MAX_BITS: u32 = 120;

const EXP_LIMIT: i64 = 1 << 62;

#[derive(Debug, Clone, Copy)]
pub struct WideFloat {
    sig: u128, // top bit set unless the value is zero
    exp: i64,
    neg: bool,
}

impl WideFloat {
    pub const ZERO: WideFloat = WideFloat {
        sig: 0,
        exp: 0,
        neg: false,
    };

    pub fn is_zero(&self) -> bool {
        self.sig == 0
    }

    /// Exponent saturated: the value left the representable range.
    pub fn is_overflow(&self) -> bool {
        self.exp >= EXP_LIMIT
    }

    pub fn neg(mut self) -> Self {
        if !self.is_zero() {
            self.neg = !self.neg;
        }
        self
    }

    fn saturate() -> Self {
        WideFloat {
            sig: 1 << 127,
            exp: EXP_LIMIT,
            neg: false,
        }
    }

    /// Exact conversion from f64 (bits ≥ 53 keeps all mantissa bits).
    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            return Self::ZERO;
        }
        debug_assert!(x.is_finite());
        let bits = x.to_bits();
        let neg = bits >> 63 == 1;
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if raw_exp == 0 {
            // subnormal: value = frac · 2^(−1074); shift the top bit to 52
            let shift = frac.leading_zeros() as i64 - 11;
            (frac << shift as u32, -1022 - shift)
        } else {
            (frac | (1 << 52), raw_exp - 1023)
        };
        // mant has its top bit at position 52; value = mant·2^(e−52)
        WideFloat {
            sig: (mant as u128) << 75,
            exp: e + 1,
            neg,
        }
    }

    /// Rounds to nearest (ties to even) at 53 significant bits and converts,
    /// saturating to ±inf and flushing below the subnormal range to ±0.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return if self.neg { -0.0 } else { 0.0 };
        }
        let drop = 128 - 53;
        let mut base = self.sig >> drop;
        let rem = self.sig & ((1u128 << drop) - 1);
        let half = 1u128 << (drop - 1);
        let mut exp = self.exp;
        if rem > half || (rem == half && base & 1 == 1) {
            base += 1;
            if base == 1 << 53 {
                base >>= 1;
                exp += 1;
            }
        }
        // value = base · 2^(exp − 53), base ∈ [2^52, 2^53)
        let m = base as f64;
        let e2 = exp - 53;
        let sign = if self.neg { -1.0 } else { 1.0 };
        if e2 > 1023 {
            return sign * f64::INFINITY;
        }
        if e2 < -1130 {
            return sign * 0.0;
        }
        if e2 >= -1074 {
            sign * m * pow2(e2 as i32)
        } else {
            // land in the subnormal range with a single rounding multiply
            let lift = m * pow2(-537); // exact: result is normal
            sign * lift * pow2((e2 + 537) as i32)
        }
    }

    /// Rounds the significand to `bits` bits, ties to even.
    fn round(mut self, bits: u32) -> Self {
        if self.is_zero() {
            return self;
        }
        if self.is_overflow() {
            return Self::saturate();
        }
        debug_assert!((MIN_BITS..=MAX_BITS).contains(&bits));
        let drop = 128 - bits;
        let mask = (1u128 << drop) - 1;
        let rem = self.sig & mask;
        if rem == 0 {
            return self;
        }
        let half = 1u128 << (drop - 1);
        let mut base = self.sig >> drop;
        if rem > half || (rem == half && base & 1 == 1) {
            base += 1;
            if base >> bits != 0 {
                base >>= 1;
                self.exp += 1;
            }
        }
        self.sig = base << drop;
        self
    }

    pub fn add(self, other: Self, bits: u32) -> Self {
        if self.is_zero() {
            return other.round(bits);
        }
        if other.is_zero() {
            return self.round(bits);
        }
        if self.is_overflow() || other.is_overflow() {
            return Self::saturate();
        }
        // order by magnitude
        let (big, small) = if self.exp > other.exp
            || (self.exp == other.exp && self.sig >= other.sig)
        {
            (self, other)
        } else {
            (other, self)
        };
        let diff = big.exp - small.exp;
        if diff > 140 {
            return big.round(bits);
        }
        let shifted = if diff >= 128 { 0 } else { small.sig >> diff };
        if big.neg == small.neg {
            let (sum, carry) = big.sig.overflowing_add(shifted);
            let out = if carry {
                WideFloat {
                    sig: (sum >> 1) | (1 << 127),
                    exp: big.exp.saturating_add(1),
                    neg: big.neg,
                }
            } else {
                WideFloat {
                    sig: sum,
                    exp: big.exp,
                    neg: big.neg,
                }
            };
            out.round(bits)
        } else {
            let sub = big.sig - shifted;
            if sub == 0 {
                return Self::ZERO;
            }
            let lz = sub.leading_zeros();
            WideFloat {
                sig: sub << lz,
                exp: big.exp - lz as i64,
                neg: big.neg,
            }
            .round(bits)
        }
    }

    pub fn sub(self, other: Self, bits: u32) -> Self {
        self.add(other.neg(), bits)
    }

    pub fn mul(self, other: Self, bits: u32) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::ZERO;
        }
        if self.is_overflow() || other.is_overflow() {
            return Self::saturate();
        }
        let high = mul_high(self.sig, other.sig);
        let exp = self.exp.saturating_add(other.exp);
        let out = if high >> 127 == 1 {
            WideFloat {
                sig: high,
                exp,
                neg: self.neg != other.neg,
            }
        } else {
            WideFloat {
                sig: high << 1,
                exp: exp - 1,
                neg: self.neg != other.neg,
            }
        };
        if out.exp >= EXP_LIMIT || out.exp <= -EXP_LIMIT {
            return Self::saturate();
        }
        out.round(bits)
    }

    pub fn mul_f64(self, x: f64, bits: u32) -> Self {
        self.mul(Self::from_f64(x), bits)
    }

    /// `2^y` for finite `y`: integer part into the exponent, fractional part
    /// through the f64 `exp2`.
    pub fn from_exp2(y: f64, _bits: u32) -> Self {
        debug_assert!(y.is_finite());
        let yi = y.floor();
        let frac = y - yi;
        let mut out = Self::from_f64(frac.exp2());
        if yi.abs() >= EXP_LIMIT as f64 {
            return Self::saturate();
        }
        out.exp = out.exp.saturating_add(yi as i64);
        out
    }
}

/// Top 128 bits of the 256-bit product of two u128 values.
fn mul_high(a: u128, b: u128) -> u128 {
    let (ah, al) = (a >> 64, a & 0xffff_ffff_ffff_ffff);
    let (bh, bl) = (b >> 64, b & 0xffff_ffff_ffff_ffff);
    let hh = ah * bh;
    let hl = ah * bl;
    let lh = al * bh;
    let ll = al * bl;
    let (mid, mid_carry) = hl.overflowing_add(lh);
    let (_, low_carry) = ll.overflowing_add(mid << 64);
    hh + (mid >> 64) + ((mid_carry as u128) << 64) + low_carry as u128
}

/// Exact f64 power of two for −1074 ≤ e ≤ 1023.
fn pow2(e: i32) -> f64 {
    debug_assert!((-1074..=1023).contains(&e));
    if e >= -1022 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else {
        f64::from_bits(1u64 << (52 - (-1022 - e) as u32))
    }
}

/// Double-double reciprocal of a positive integer: `hi + lo ≈ 1/k` to about
/// 2^−104. Multiplying by the pair replaces a true wide division in the
/// Laguerre recurrence.
pub fn reciprocal_dd(k: u64) -> (f64, f64) {
    let kf = k as f64;
    let hi = 1.0 / kf;
    let err = 1.0 - hi * kf;
    (hi, hi * err)
}

/// `v / k` through the double-double reciprocal.
pub fn div_u64(v: WideFloat, k: u64, bits: u32) -> WideFloat {
    let (hi, lo) = reciprocal_dd(k);
    v.mul_f64(hi, bits).add(v.mul_f64(lo, bits), bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn f64_round_trip_is_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let x: f64 = rng.gen_range(-1.0..1.0) * 2f64.powi(rng.gen_range(-1000..1000));
            let w = WideFloat::from_f64(x);
            assert_eq!(w.to_f64().to_bits(), x.to_bits(), "{x}");
        }
        assert_eq!(WideFloat::from_f64(0.0).to_f64(), 0.0);
        // subnormals round trip too
        let tiny = f64::from_bits(3);
        assert_eq!(WideFloat::from_f64(tiny).to_f64().to_bits(), tiny.to_bits());
    }

    #[test]
    fn exact_arithmetic_on_short_mantissas() {
        let bits = 96;
        let a = WideFloat::from_f64(1.5);
        let b = WideFloat::from_f64(0.25);
        assert_eq!(a.add(b, bits).to_f64(), 1.75);
        assert_eq!(a.sub(b, bits).to_f64(), 1.25);
        assert_eq!(a.mul(b, bits).to_f64(), 0.375);
        assert_eq!(a.neg().to_f64(), -1.5);
        assert_eq!(b.sub(a, bits).to_f64(), -1.25);
    }

    #[test]
    fn addition_matches_f64_within_one_ulp() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let bits = 113;
        for _ in 0..2000 {
            let a: f64 = rng.gen_range(-1e3..1e3);
            let b: f64 = rng.gen_range(-1e3..1e3);
            let w = WideFloat::from_f64(a).add(WideFloat::from_f64(b), bits);
            let exact = a + b;
            let got = w.to_f64();
            assert!(
                (got - exact).abs() <= exact.abs() * 2.3e-16,
                "{a} + {b}: {got} vs {exact}"
            );
        }
    }

    #[test]
    fn cancellation_is_exact() {
        let bits = 64;
        let a = WideFloat::from_f64(1.0 + 2f64.powi(-40));
        let b = WideFloat::from_f64(1.0);
        let d = a.sub(b, bits);
        assert_eq!(d.to_f64(), 2f64.powi(-40));
    }

    #[test]
    fn exponents_far_beyond_f64_survive() {
        let bits = 64;
        // (2^10)^(2^8) = 2^2560 by repeated squaring
        let mut w = WideFloat::from_f64(1024.0);
        for _ in 0..8 {
            w = w.mul(w, bits);
        }
        assert!(w.to_f64().is_infinite());
        let inv = WideFloat::from_exp2(-2560.0, bits);
        let unit = w.mul(inv, bits);
        assert_eq!(unit.to_f64(), 1.0);
        let tiny = WideFloat::from_exp2(-2560.0, bits);
        assert_eq!(tiny.to_f64(), 0.0);
    }

    #[test]
    fn from_exp2_hits_exact_powers() {
        let bits = 80;
        assert_eq!(WideFloat::from_exp2(0.0, bits).to_f64(), 1.0);
        assert_eq!(WideFloat::from_exp2(-3.0, bits).to_f64(), 0.125);
        let w = WideFloat::from_exp2(0.5, bits);
        assert!((w.to_f64() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn division_by_integers_is_accurate() {
        let bits = 110;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let v: f64 = rng.gen_range(0.5..2.0);
            let k = rng.gen_range(1u64..1_000_000);
            let w = div_u64(WideFloat::from_f64(v), k, bits);
            let expect = v / k as f64;
            let got = w.to_f64();
            assert!(
                (got - expect).abs() <= expect.abs() * 2.3e-16,
                "{v}/{k}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn rounding_respects_the_requested_width() {
        // 1 + 2^-60 at 53 bits collapses to 1, at 80 bits survives
        let one = WideFloat::from_f64(1.0);
        let eps = WideFloat::from_exp2(-60.0, 80);
        let at53 = one.add(eps, 53);
        let at80 = one.add(eps, 80);
        assert_eq!(at53.to_f64(), 1.0);
        assert_eq!(at80.sub(one, 80).to_f64(), 2f64.powi(-60));
    }
}
