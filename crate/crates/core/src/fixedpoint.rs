//! Binary fixed-point reals: `mantissa / 2^frac_bits`.
//!
//! Every quantity in the reduction pipeline lives in a known magnitude
//! range, so a plain scaled integer is enough. Results that cannot be
//! represented exactly are truncated toward zero and carry an error of
//! at most one unit in the last place (ulp) of the requested precision.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Guard bits added by the public evaluation functions.
pub const DEFAULT_GUARD_BITS: u64 = 64;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FixedPoint {
    mantissa: BigInt,
    frac_bits: u64,
}

/// `m >> k` rounding toward zero.
pub(crate) fn shr_trunc(m: &BigInt, k: u64) -> BigInt {
    if k == 0 {
        return m.clone();
    }
    let mag = m.magnitude() >> k;
    BigInt::from_biguint(m.sign(), mag)
}

impl FixedPoint {
    pub fn new(mantissa: BigInt, frac_bits: u64) -> Self {
        FixedPoint {
            mantissa,
            frac_bits,
        }
    }

    pub fn zero(frac_bits: u64) -> Self {
        FixedPoint::new(BigInt::zero(), frac_bits)
    }

    pub fn one(frac_bits: u64) -> Self {
        FixedPoint::new(BigInt::one() << frac_bits, frac_bits)
    }

    pub fn from_int<T: Into<BigInt>>(n: T, frac_bits: u64) -> Self {
        FixedPoint::new(n.into() << frac_bits, frac_bits)
    }

    /// `num / den` truncated to `frac_bits`.
    pub fn from_ratio(num: &BigInt, den: &BigInt, frac_bits: u64) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(FixedPoint::new((num << frac_bits) / den, frac_bits))
    }

    /// Exact conversion of a finite double, then truncation to `frac_bits`.
    pub fn from_f64(x: f64, frac_bits: u64) -> Self {
        assert!(x.is_finite(), "non-finite input");
        if x == 0.0 {
            return FixedPoint::zero(frac_bits);
        }
        let bits = x.abs().to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e) = if exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), exp - 1075)
        };
        let mut mant = BigInt::from(m);
        if x < 0.0 {
            mant = -mant;
        }
        // value = mant * 2^e
        let shift = e + frac_bits as i64;
        let mantissa = if shift >= 0 {
            mant << shift as u64
        } else {
            shr_trunc(&mant, (-shift) as u64)
        };
        FixedPoint::new(mantissa, frac_bits)
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn frac_bits(&self) -> u64 {
        self.frac_bits
    }

    pub fn into_mantissa(self) -> BigInt {
        self.mantissa
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    pub fn signum(&self) -> i32 {
        match self.mantissa.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    pub fn abs(&self) -> Self {
        FixedPoint::new(self.mantissa.abs(), self.frac_bits)
    }

    /// Rescale to `frac_bits`; exact when widening, truncating when narrowing.
    pub fn with_frac_bits(&self, frac_bits: u64) -> Self {
        match frac_bits.cmp(&self.frac_bits) {
            Ordering::Equal => self.clone(),
            Ordering::Greater => {
                FixedPoint::new(&self.mantissa << (frac_bits - self.frac_bits), frac_bits)
            }
            Ordering::Less => FixedPoint::new(
                shr_trunc(&self.mantissa, self.frac_bits - frac_bits),
                frac_bits,
            ),
        }
    }

    /// Rescale to `frac_bits`, rounding to nearest (ties up) when narrowing.
    pub fn round_frac_bits(&self, frac_bits: u64) -> Self {
        if frac_bits >= self.frac_bits {
            return self.with_frac_bits(frac_bits);
        }
        let k = self.frac_bits - frac_bits;
        let half = BigInt::one() << (k - 1);
        FixedPoint::new((&self.mantissa + half) >> k, frac_bits)
    }

    fn aligned(a: &FixedPoint, b: &FixedPoint) -> (BigInt, BigInt, u64) {
        let f = a.frac_bits.max(b.frac_bits);
        (
            &a.mantissa << (f - a.frac_bits),
            &b.mantissa << (f - b.frac_bits),
            f,
        )
    }

    pub fn add(&self, other: &FixedPoint) -> FixedPoint {
        let (a, b, f) = FixedPoint::aligned(self, other);
        FixedPoint::new(a + b, f)
    }

    pub fn sub(&self, other: &FixedPoint) -> FixedPoint {
        let (a, b, f) = FixedPoint::aligned(self, other);
        FixedPoint::new(a - b, f)
    }

    pub fn mul(&self, other: &FixedPoint, out_frac_bits: u64) -> FixedPoint {
        let prod = &self.mantissa * &other.mantissa;
        FixedPoint::new(prod, self.frac_bits + other.frac_bits).with_frac_bits(out_frac_bits)
    }

    pub fn square(&self, out_frac_bits: u64) -> FixedPoint {
        self.mul(self, out_frac_bits)
    }

    /// Exact product with an integer.
    pub fn mul_int<T: Into<BigInt>>(&self, k: T) -> FixedPoint {
        FixedPoint::new(&self.mantissa * k.into(), self.frac_bits)
    }

    pub fn mul_bigint(&self, k: &BigInt) -> FixedPoint {
        FixedPoint::new(&self.mantissa * k, self.frac_bits)
    }

    /// Truncated quotient by a nonzero integer, same `frac_bits`.
    pub fn div_int(&self, k: i64) -> FixedPoint {
        assert!(k != 0, "division by zero");
        FixedPoint::new(&self.mantissa / k, self.frac_bits)
    }

    pub fn div_bigint(&self, k: &BigInt) -> Result<FixedPoint> {
        if k.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(FixedPoint::new(&self.mantissa / k, self.frac_bits))
    }

    /// Multiply by `2^k`; exact whenever the result keeps `frac_bits >= 0`.
    pub fn mul_pow2(&self, k: i64) -> FixedPoint {
        if k >= 0 {
            let k = k as u64;
            if k <= self.frac_bits {
                FixedPoint::new(self.mantissa.clone(), self.frac_bits - k)
            } else {
                FixedPoint::new(&self.mantissa << (k - self.frac_bits), 0)
            }
        } else {
            FixedPoint::new(self.mantissa.clone(), self.frac_bits + (-k) as u64)
        }
    }

    pub fn div(&self, other: &FixedPoint, out_frac_bits: u64) -> Result<FixedPoint> {
        if other.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let e = out_frac_bits as i64 + other.frac_bits as i64 - self.frac_bits as i64;
        let q = if e >= 0 {
            (&self.mantissa << e as u64) / &other.mantissa
        } else {
            &self.mantissa / (&other.mantissa << (-e) as u64)
        };
        Ok(FixedPoint::new(q, out_frac_bits))
    }

    /// Square root, truncated: the result is `floor(sqrt(a) * 2^out) / 2^out`.
    pub fn sqrt(&self, out_frac_bits: u64) -> Result<FixedPoint> {
        if self.is_negative() {
            return Err(Error::NegativeSqrt);
        }
        let work = out_frac_bits.max(self.frac_bits.div_ceil(2));
        let n = self.mantissa.magnitude() << (2 * work - self.frac_bits);
        let s = isqrt(&n) >> (work - out_frac_bits);
        Ok(FixedPoint::new(BigInt::from(s), out_frac_bits))
    }

    /// `floor(x / e + 1/2)`, computed exactly on the scaled integers.
    pub fn nearest_int_quotient(x: &FixedPoint, e: &FixedPoint) -> Result<BigInt> {
        if e.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let (xm, em, _) = FixedPoint::aligned(x, e);
        let num: BigInt = (xm << 1u32) + &em;
        let den: BigInt = em << 1u32;
        Ok(num.div_floor(&den))
    }

    /// Nearest integer to the value (ties away from zero).
    pub fn round_to_int(&self) -> BigInt {
        if self.frac_bits == 0 {
            return self.mantissa.clone();
        }
        let half = BigInt::one() << (self.frac_bits - 1);
        let mag = (self.mantissa.magnitude() + half.magnitude()) >> self.frac_bits;
        BigInt::from_biguint(self.mantissa.sign(), mag)
    }

    /// Approximate value as a double (0 on underflow, ±inf on overflow).
    pub fn to_f64(&self) -> f64 {
        if self.mantissa.is_zero() {
            return 0.0;
        }
        let bits = self.mantissa.bits();
        let shift = bits.saturating_sub(64);
        let top = (self.mantissa.magnitude() >> shift).to_u64().unwrap() as f64;
        let v = ldexp(top, shift as i64 - self.frac_bits as i64);
        if self.is_negative() {
            -v
        } else {
            v
        }
    }

    /// Approximate `log2 |x|`; `-inf` for zero. Valid far outside the f64 range.
    pub fn log2_abs(&self) -> f64 {
        if self.mantissa.is_zero() {
            return f64::NEG_INFINITY;
        }
        let bits = self.mantissa.bits();
        let shift = bits.saturating_sub(64);
        let top = (self.mantissa.magnitude() >> shift).to_u64().unwrap() as f64;
        top.log2() + shift as f64 - self.frac_bits as f64
    }

    /// Decimal string with exactly `digits` fractional digits, rounded to
    /// nearest. An exact zero prints as `"0"`.
    pub fn to_decimal(&self, digits: usize) -> String {
        if self.mantissa.is_zero() {
            return "0".to_string();
        }
        let scale = BigUint::from(10u32).pow(digits as u32);
        let scaled = self.mantissa.magnitude() * scale;
        let q = if self.frac_bits == 0 {
            scaled
        } else {
            (scaled + (BigUint::one() << (self.frac_bits - 1))) >> self.frac_bits
        };
        let s = q.to_str_radix(10);
        let s = if s.len() <= digits {
            format!("{}{}", "0".repeat(digits + 1 - s.len()), s)
        } else {
            s
        };
        let (int_part, frac_part) = s.split_at(s.len() - digits);
        let sign = if self.is_negative() { "-" } else { "" };
        if digits == 0 {
            format!("{sign}{int_part}")
        } else {
            format!("{sign}{int_part}.{frac_part}")
        }
    }

    /// Scientific notation with `sig` significant digits, rounded to nearest,
    /// e.g. `-1.4227e-31`.
    pub fn to_sci(&self, sig: usize) -> String {
        if self.mantissa.is_zero() {
            return "0".to_string();
        }
        let sig = sig.max(1);
        let mag = self.mantissa.magnitude();
        let ten = BigUint::from(10u32);
        let mut e = (self.log2_abs() * std::f64::consts::LOG10_2).floor() as i64;
        let digits = loop {
            let k = sig as i64 - 1 - e;
            let (num, den) = if k >= 0 {
                (mag * ten.pow(k as u32), BigUint::one() << self.frac_bits)
            } else {
                (
                    mag.clone(),
                    (BigUint::one() << self.frac_bits) * ten.pow((-k) as u32),
                )
            };
            let q = ((num << 1u32) + &den) / (den << 1u32);
            let s = q.to_str_radix(10);
            match s.len().cmp(&sig) {
                Ordering::Greater => e += 1,
                Ordering::Less => e -= 1,
                Ordering::Equal => break s,
            }
        };
        let sign = if self.is_negative() { "-" } else { "" };
        let (lead, rest) = digits.split_at(1);
        if rest.is_empty() {
            format!("{sign}{lead}e{e}")
        } else {
            format!("{sign}{lead}.{rest}e{e}")
        }
    }

    /// Parse `[-+]digits[.digits][e[-+]digits]`, rounding to nearest at
    /// `frac_bits`.
    pub fn from_decimal(text: &str, frac_bits: u64) -> Result<FixedPoint> {
        let t = text.trim();
        let bad = || Error::Parse(format!("invalid decimal literal {text:?}"));
        let (neg, rest) = match t.as_bytes().first() {
            Some(b'-') => (true, &t[1..]),
            Some(b'+') => (false, &t[1..]),
            _ => (false, t),
        };
        let (body, exp) = match rest.find(['e', 'E']) {
            Some(i) => (&rest[..i], rest[i + 1..].parse::<i64>().map_err(|_| bad())?),
            None => (rest, 0),
        };
        let (ip, fp) = match body.find('.') {
            Some(i) => (&body[..i], &body[i + 1..]),
            None => (body, ""),
        };
        if ip.is_empty() && fp.is_empty() {
            return Err(bad());
        }
        if !ip.bytes().chain(fp.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{ip}{fp}");
        let mut num: BigUint = if digits.is_empty() {
            BigUint::zero()
        } else {
            digits.parse().map_err(|_| bad())?
        };
        let dec_exp = exp - fp.len() as i64;
        let mut den = BigUint::one();
        if dec_exp >= 0 {
            num *= BigUint::from(10u32).pow(dec_exp as u32);
        } else {
            den = BigUint::from(10u32).pow((-dec_exp) as u32);
        }
        let scaled = (num << frac_bits) + (&den >> 1u32);
        let mag = scaled / den;
        let sign = if neg { Sign::Minus } else { Sign::Plus };
        Ok(FixedPoint::new(BigInt::from_biguint(sign, mag), frac_bits))
    }

    /// Golden-file dump: `<sign><hex mantissa> <frac_bits>`, e.g. `+16a09e667 32`.
    pub fn to_hex_dump(&self) -> String {
        let sign = if self.is_negative() { '-' } else { '+' };
        format!(
            "{sign}{} {}",
            self.mantissa.magnitude().to_str_radix(16),
            self.frac_bits
        )
    }

    pub fn from_hex_dump(text: &str) -> Result<FixedPoint> {
        let bad = || Error::Parse(format!("invalid hex dump {text:?}"));
        let mut parts = text.split_whitespace();
        let m = parts.next().ok_or_else(bad)?;
        let f: u64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if parts.next().is_some() || m.len() < 2 {
            return Err(bad());
        }
        let sign = match &m[..1] {
            "+" => Sign::Plus,
            "-" => Sign::Minus,
            _ => return Err(bad()),
        };
        let mag = BigUint::parse_bytes(m[1..].as_bytes(), 16).ok_or_else(bad)?;
        Ok(FixedPoint::new(BigInt::from_biguint(sign, mag), f))
    }

    /// Exact comparison of values.
    pub fn cmp_value(&self, other: &FixedPoint) -> Ordering {
        let (a, b, _) = FixedPoint::aligned(self, other);
        a.cmp(&b)
    }

    /// `|self - other|` measured in ulps of `frac_bits`, saturating at `u64::MAX`.
    pub fn ulps_from(&self, other: &FixedPoint, frac_bits: u64) -> u64 {
        let d = self.sub(other).abs().with_frac_bits(frac_bits);
        d.mantissa.to_u64().unwrap_or(u64::MAX)
    }

    /// True when `|self - other| <= 2^log2_tol`.
    pub fn close_to(&self, other: &FixedPoint, log2_tol: i64) -> bool {
        let d = self.sub(other).abs();
        // |d| <= 2^t  <=>  mantissa <= 2^(t + frac)
        let e = log2_tol + d.frac_bits as i64;
        if e < 0 {
            return d.mantissa.is_zero();
        }
        d.mantissa <= (BigInt::one() << e as u64)
    }
}

impl Add for &FixedPoint {
    type Output = FixedPoint;
    fn add(self, rhs: &FixedPoint) -> FixedPoint {
        FixedPoint::add(self, rhs)
    }
}

impl Sub for &FixedPoint {
    type Output = FixedPoint;
    fn sub(self, rhs: &FixedPoint) -> FixedPoint {
        FixedPoint::sub(self, rhs)
    }
}

impl Neg for &FixedPoint {
    type Output = FixedPoint;
    fn neg(self) -> FixedPoint {
        FixedPoint::new(-&self.mantissa, self.frac_bits)
    }
}

impl Neg for FixedPoint {
    type Output = FixedPoint;
    fn neg(self) -> FixedPoint {
        FixedPoint::new(-self.mantissa, self.frac_bits)
    }
}

impl fmt::Display for FixedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or_else(|| {
            ((self.frac_bits as f64 * std::f64::consts::LOG10_2) as usize).min(30)
        });
        f.write_str(&self.to_decimal(digits))
    }
}

/// `x * 2^e` without intermediate overflow.
pub(crate) fn ldexp(x: f64, e: i64) -> f64 {
    let mut v = x;
    let mut e = e;
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
        if v.is_infinite() {
            return v;
        }
    }
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
        if v == 0.0 {
            return v;
        }
    }
    v * 2f64.powi(e as i32)
}

fn isqrt_u128(n: u128) -> u128 {
    let mut s = (n as f64).sqrt() as u128;
    while s * s > n {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= n {
        s += 1;
    }
    s
}

const LEAF_HALF_BITS: u64 = 60;

/// `floor(sqrt(n))` by the recursive square-root/remainder scheme: each level
/// halves the width and spends one half-size division.
pub fn isqrt(n: &BigUint) -> BigUint {
    let bits = n.bits();
    if bits <= 2 * LEAF_HALF_BITS {
        return BigUint::from(isqrt_u128(n.to_u128().unwrap()));
    }
    // width 2*h with h = h0 * 2^j and h0 <= LEAF_HALF_BITS keeps every split even
    let mut levels = 0u32;
    while 2 * LEAF_HALF_BITS * (1u64 << levels) < bits {
        levels += 1;
    }
    let h0 = bits.div_ceil(2 << levels);
    let h = h0 << levels;
    let shift = (2 * h - bits) / 2;
    let normalized = n << (2 * shift);
    let (s, _) = sqrt_rem_normalized(&normalized, h);
    s >> shift
}

/// Requires `2^(2h-2) <= n < 2^(2h)`.
fn sqrt_rem_normalized(n: &BigUint, h: u64) -> (BigUint, BigInt) {
    if h <= LEAF_HALF_BITS {
        let v = n.to_u128().unwrap();
        let s = isqrt_u128(v);
        return (BigUint::from(s), BigInt::from(v - s * s));
    }
    let k = h / 2;
    let mask = (BigUint::one() << k) - 1u32;
    let a0 = n & &mask;
    let a1 = (n >> k) & &mask;
    let hi = n >> (2 * k);
    let (s1, r1) = sqrt_rem_normalized(&hi, k);
    let num: BigInt = (r1 << k) + BigInt::from(a1);
    let den = BigInt::from(&s1 << 1u32);
    let (q, u) = num.div_rem(&den);
    let mut s = BigInt::from(s1 << k) + &q;
    let mut r = (u << k) + BigInt::from(a0) - &q * &q;
    if r.is_negative() {
        r += (&s << 1u32) - 1;
        s -= 1;
    }
    (s.to_biguint().unwrap(), r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn fp(num: i64, den: i64, bits: u64) -> FixedPoint {
        FixedPoint::from_ratio(&BigInt::from(num), &BigInt::from(den), bits).unwrap()
    }

    fn as_rational(x: &FixedPoint) -> BigRational {
        BigRational::new(x.mantissa().clone(), BigInt::one() << x.frac_bits())
    }

    /// |x - exact| in ulps of x's precision, as a rational.
    fn ulp_error(x: &FixedPoint, exact: &BigRational) -> BigRational {
        let d = (as_rational(x) - exact).abs();
        d * BigRational::from_integer(BigInt::one() << x.frac_bits())
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn add_examples() {
        assert_eq!(fp(1, 2, 8).add(&fp(1, 4, 8)), fp(3, 4, 8));
        let x = fp(5, 7, 40);
        assert_eq!(x.add(&FixedPoint::zero(40)), x);
        let third = fp(1, 3, 64);
        let sum = third.add(&third);
        assert!(ulp_error(&sum, &rat(2, 3)) <= rat(2, 1));
        // truncation error of each third is below 1 ulp, and the sum is exact
        assert!(ulp_error(&sum, &rat(2, 3)) < rat(2, 1));
    }

    #[test]
    fn mul_examples() {
        assert_eq!(fp(3, 4, 8).mul(&fp(1, 2, 8), 8), fp(3, 8, 8));
        let x = fp(-11, 13, 50);
        assert_eq!(x.mul(&FixedPoint::one(50), 50), x);
        let p = fp(1, 3, 192).mul(&fp(1, 5, 192), 128);
        assert!(ulp_error(&p, &rat(1, 15)) <= rat(1, 1));
    }

    #[test]
    fn div_examples() {
        let one = FixedPoint::one(32);
        assert_eq!(
            one.div(&FixedPoint::from_int(2, 32), 32).unwrap(),
            fp(1, 2, 32)
        );
        let x = fp(17, 19, 70);
        let q = x.div(&x, 70).unwrap();
        assert!(q.ulps_from(&FixedPoint::one(70), 70) <= 1);
        let third = one.div(&FixedPoint::from_int(3, 0), 64).unwrap();
        assert!(ulp_error(&third, &rat(1, 3)) <= rat(1, 1));
        assert_eq!(
            one.div(&FixedPoint::zero(3), 10),
            Err(Error::DivisionByZero)
        );
    }

    #[test]
    fn sqrt_examples() {
        assert_eq!(
            FixedPoint::from_int(4, 10).sqrt(10).unwrap(),
            FixedPoint::from_int(2, 10)
        );
        assert!(FixedPoint::zero(10).sqrt(20).unwrap().is_zero());
        let r2 = FixedPoint::from_int(2, 0).sqrt(256).unwrap();
        let sq = r2.square(256);
        assert!(sq.ulps_from(&FixedPoint::from_int(2, 256), 256) <= 3);
        assert_eq!(
            FixedPoint::from_int(-1, 4).sqrt(8),
            Err(Error::NegativeSqrt)
        );
    }

    #[test]
    fn nearest_int_quotient_examples() {
        let d = |s: &str| FixedPoint::from_decimal(s, 80).unwrap();
        assert_eq!(
            FixedPoint::nearest_int_quotient(&d("0.16"), &d("0.167")).unwrap(),
            BigInt::from(1)
        );
        assert!(FixedPoint::nearest_int_quotient(&d("0"), &d("0.3"))
            .unwrap()
            .is_zero());
        // -0.5004 / 0.167 = -2.9964..., floor(-2.4964...) = -3
        assert_eq!(
            FixedPoint::nearest_int_quotient(&d("-0.5004"), &d("0.167")).unwrap(),
            BigInt::from(-3)
        );
        assert_eq!(
            FixedPoint::nearest_int_quotient(&d("1"), &d("0")),
            Err(Error::DivisionByZero)
        );
    }

    #[test]
    fn decimal_output() {
        assert_eq!(fp(1, 2, 8).to_decimal(1), "0.5");
        assert_eq!(FixedPoint::zero(8).to_decimal(5), "0");
        assert_eq!(FixedPoint::one(8).to_decimal(3), "1.000");
        assert_eq!(fp(-1, 4, 8).to_decimal(3), "-0.250");
        let r2 = FixedPoint::from_int(2, 0).sqrt(260).unwrap();
        assert_eq!(
            r2.to_decimal(64),
            "1.4142135623730950488016887242096980785696718753769480731766797380"
        );
    }

    #[test]
    fn decimal_parse() {
        assert_eq!(FixedPoint::from_decimal("0.5", 4).unwrap(), fp(1, 2, 4));
        assert_eq!(
            FixedPoint::from_decimal("-2.5e-1", 8).unwrap(),
            fp(-1, 4, 8)
        );
        assert_eq!(
            FixedPoint::from_decimal("3", 2).unwrap(),
            FixedPoint::from_int(3, 2)
        );
        assert!(FixedPoint::from_decimal("abc", 8).is_err());
        assert!(FixedPoint::from_decimal(".", 8).is_err());
        assert!(FixedPoint::from_decimal("1.2.3", 8).is_err());
    }

    #[test]
    fn hex_dump_roundtrip() {
        let x = fp(-22, 7, 100);
        let s = x.to_hex_dump();
        assert!(s.starts_with('-') && s.ends_with(" 100"));
        assert_eq!(FixedPoint::from_hex_dump(&s).unwrap(), x);
        assert!(FixedPoint::from_hex_dump("12 3").is_err());
    }

    #[test]
    fn f64_conversions() {
        assert_eq!(FixedPoint::from_f64(0.375, 8), fp(3, 8, 8));
        assert_eq!(FixedPoint::from_f64(-1.5, 1), fp(-3, 2, 1));
        assert!((fp(1, 3, 200).to_f64() - 1.0 / 3.0).abs() < 1e-16);
        let tiny = FixedPoint::new(BigInt::one(), 3000);
        assert!((tiny.log2_abs() + 3000.0).abs() < 1e-9);
    }

    #[test]
    fn isqrt_matches_reference_on_edge_values() {
        for bits in [1u64, 60, 119, 120, 121, 200, 1000, 4097] {
            for delta in [-1i64, 0, 1] {
                let base = BigUint::one() << bits;
                let n = if delta < 0 {
                    &base - 1u32
                } else {
                    &base + delta as u32
                };
                assert_eq!(isqrt(&n), n.sqrt(), "bits {bits} delta {delta}");
                let sq = &n * &n;
                assert_eq!(isqrt(&sq), n);
                assert_eq!(isqrt(&(&sq - 1u32)), &n - 1u32);
            }
        }
    }

    fn big_from_limbs(limbs: &[u32], neg: bool) -> BigInt {
        let mag = BigUint::new(limbs.to_vec());
        BigInt::from_biguint(if neg { Sign::Minus } else { Sign::Plus }, mag)
    }

    proptest! {
        #[test]
        fn isqrt_agrees_with_num_bigint(limbs in prop::collection::vec(any::<u32>(), 1..80)) {
            let n = BigUint::new(limbs);
            prop_assert_eq!(isqrt(&n), n.sqrt());
        }

        #[test]
        fn ring_identities(a in prop::collection::vec(any::<u32>(), 1..10), an in any::<bool>(),
                           b in prop::collection::vec(any::<u32>(), 1..10), bn in any::<bool>(),
                           c in prop::collection::vec(any::<u32>(), 1..10)) {
            let a = FixedPoint::new(big_from_limbs(&a, an), 256);
            let b = FixedPoint::new(big_from_limbs(&b, bn), 256);
            let c = FixedPoint::new(big_from_limbs(&c, false), 256);
            prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
            prop_assert_eq!(a.mul(&FixedPoint::one(256), 256), a.clone());
            prop_assert!(a.sub(&a).is_zero());
        }

        #[test]
        fn mul_div_sqrt_against_rational_oracle(
            a in prop::collection::vec(any::<u32>(), 1..12), an in any::<bool>(),
            b in prop::collection::vec(any::<u32>(), 1..12), bn in any::<bool>())
        {
            let a = FixedPoint::new(big_from_limbs(&a, an), 256);
            let b = FixedPoint::new(big_from_limbs(&b, bn), 256);
            let one_ulp = BigRational::one();
            let p = a.mul(&b, 256);
            prop_assert!(ulp_error(&p, &(as_rational(&a) * as_rational(&b))) < one_ulp);
            if !b.is_zero() {
                let q = a.div(&b, 256).unwrap();
                prop_assert!(ulp_error(&q, &(as_rational(&a) / as_rational(&b))) < one_ulp);
            }
            let s = a.abs().sqrt(256).unwrap();
            // floor property: s^2 <= a < (s + ulp)^2
            let sr = as_rational(&s);
            let ulp = BigRational::new(BigInt::one(), BigInt::one() << 256u32);
            let ar = as_rational(&a.abs());
            prop_assert!(&sr * &sr <= ar);
            prop_assert!((&sr + &ulp) * (&sr + &ulp) > ar);
        }

        #[test]
        fn nearest_quotient_bound(x in -10_000_000i64..10_000_000, e in 1i64..1_000_000, neg in any::<bool>()) {
            let x = FixedPoint::new(BigInt::from(x), 20);
            let e = FixedPoint::new(BigInt::from(if neg { -e } else { e }), 20);
            let m = FixedPoint::nearest_int_quotient(&x, &e).unwrap();
            let r = x.sub(&e.mul_bigint(&m));
            // |x - m e| <= |e|/2
            prop_assert!(r.abs().mul_int(2).cmp_value(&e.abs()) != Ordering::Greater);
        }

        #[test]
        fn decimal_print_parse(m in prop::collection::vec(any::<u32>(), 1..6), neg in any::<bool>(), digits in 1usize..40) {
            let bits = 160u64;
            let x = FixedPoint::new(big_from_limbs(&m, neg), bits);
            let s = x.to_decimal(digits);
            let y = FixedPoint::from_decimal(&s, bits).unwrap();
            if !y.is_zero() {
                prop_assert_eq!(y.to_decimal(digits), s);
            }
        }
    }

    #[test]
    fn scientific_format() {
        let x = FixedPoint::from_decimal("-1.42273e-31", 200).unwrap();
        assert_eq!(x.to_sci(5), "-1.4227e-31");
        assert_eq!(FixedPoint::from_int(1, 10).to_sci(3), "1.00e0");
        let y = FixedPoint::from_decimal("9.9996", 60).unwrap();
        assert_eq!(y.to_sci(4), "1.000e1");
        assert_eq!(FixedPoint::from_int(123, 0).to_sci(1), "1e2");
        let z = FixedPoint::from_decimal("0.16705", 80).unwrap();
        let back = FixedPoint::from_decimal(&z.to_sci(20), 80).unwrap();
        assert!(back.close_to(&z, -60));
    }
}
