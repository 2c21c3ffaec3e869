//! Exact power products over rational primes and Gaussian primes.
//!
//! Numerator and denominator are built from disjoint prime sets, so they are
//! coprime without any GCD work.

use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Signed, Zero};

use crate::error::Result;
use crate::fixedpoint::FixedPoint;

/// Exact fraction `num / den` with `den > 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BigRational {
    pub num: BigInt,
    pub den: BigInt,
}

impl BigRational {
    pub fn one() -> Self {
        BigRational {
            num: BigInt::one(),
            den: BigInt::one(),
        }
    }

    /// Value as a fixed-point number with `bits` fractional bits.
    pub fn to_fixed(&self, bits: u64) -> Result<FixedPoint> {
        FixedPoint::from_ratio(&self.num, &self.den, bits)
    }
}

impl fmt::Display for BigRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Gaussian integer `re + im i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GaussianInt {
    pub re: BigInt,
    pub im: BigInt,
}

impl GaussianInt {
    pub fn new<A: Into<BigInt>, B: Into<BigInt>>(re: A, im: B) -> Self {
        GaussianInt {
            re: re.into(),
            im: im.into(),
        }
    }

    pub fn one() -> Self {
        GaussianInt::new(1, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        GaussianInt {
            re: self.re.clone(),
            im: -&self.im,
        }
    }

    pub fn norm(&self) -> BigInt {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn mul(&self, o: &GaussianInt) -> GaussianInt {
        // three real multiplications
        let k1 = &o.re * (&self.re + &self.im);
        let k2 = &self.re * (&o.im - &o.re);
        let k3 = &self.im * (&o.re + &o.im);
        GaussianInt {
            re: &k1 - &k3,
            im: k1 + k2,
        }
    }

    pub fn square(&self) -> GaussianInt {
        let re = (&self.re + &self.im) * (&self.re - &self.im);
        let im: BigInt = (&self.re * &self.im) << 1u32;
        GaussianInt { re, im }
    }

    pub fn pow(&self, mut e: u64) -> GaussianInt {
        let mut base = self.clone();
        let mut acc = GaussianInt::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.square();
            }
        }
        acc
    }

    /// Multiply by `i^k`.
    pub fn mul_i_pow(&self, k: i64) -> GaussianInt {
        match k.rem_euclid(4) {
            0 => self.clone(),
            1 => GaussianInt {
                re: -&self.im,
                im: self.re.clone(),
            },
            2 => GaussianInt {
                re: -&self.re,
                im: -&self.im,
            },
            _ => GaussianInt {
                re: self.im.clone(),
                im: -&self.re,
            },
        }
    }
}

impl fmt::Display for GaussianInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_negative() {
            write!(f, "{}-{}i", self.re, self.im.abs())
        } else {
            write!(f, "{}+{}i", self.re, self.im)
        }
    }
}

/// Quotient `num / den` of Gaussian integers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaussianRational {
    pub num: GaussianInt,
    pub den: GaussianInt,
}

impl GaussianRational {
    pub fn one() -> Self {
        GaussianRational {
            num: GaussianInt::one(),
            den: GaussianInt::one(),
        }
    }

    /// Rewrite as `n / d` with a positive rational integer `d`.
    pub fn normalized(&self) -> (GaussianInt, BigInt) {
        (self.num.mul(&self.den.conj()), self.den.norm())
    }

    /// Real and imaginary parts at `bits` fractional bits.
    pub fn to_fixed(&self, bits: u64) -> Result<(FixedPoint, FixedPoint)> {
        let (n, d) = self.normalized();
        Ok((
            FixedPoint::from_ratio(&n.re, &d, bits)?,
            FixedPoint::from_ratio(&n.im, &d, bits)?,
        ))
    }
}

impl fmt::Display for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})/({})", self.num, self.den)
    }
}

fn split_product(factors: &[(BigUint, u64)]) -> BigUint {
    match factors.len() {
        0 => BigUint::one(),
        1 => factors[0].0.pow(factors[0].1 as u32),
        n => {
            let (l, r) = factors.split_at(n / 2);
            split_product(l) * split_product(r)
        }
    }
}

fn split_product_gaussian(factors: &[(GaussianInt, u64)]) -> GaussianInt {
    match factors.len() {
        0 => GaussianInt::one(),
        1 => factors[0].0.pow(factors[0].1),
        n => {
            let (l, r) = factors.split_at(n / 2);
            split_product_gaussian(l).mul(&split_product_gaussian(r))
        }
    }
}

/// Exact `prod p_j^{e_j}` as a fraction; the exponent of 2 is applied as a shift.
pub fn pow_product(primes: &[u64], exps: &[i64]) -> BigRational {
    assert_eq!(
        primes.len(),
        exps.len(),
        "primes and exponents differ in length"
    );
    let mut up = Vec::new();
    let mut down = Vec::new();
    let mut two: i64 = 0;
    for (&p, &e) in primes.iter().zip(exps) {
        if e == 0 {
            continue;
        }
        if p == 2 {
            two += e;
            continue;
        }
        let f = (BigUint::from(p), e.unsigned_abs());
        if e > 0 {
            up.push(f);
        } else {
            down.push(f);
        }
    }
    let mut num = split_product(&up);
    let mut den = split_product(&down);
    if two > 0 {
        num <<= two as u64;
    } else {
        den <<= two.unsigned_abs();
    }
    BigRational {
        num: BigInt::from_biguint(Sign::Plus, num),
        den: BigInt::from_biguint(Sign::Plus, den),
    }
}

/// `prod (a_j + b_j i)^{c_j} / prod (a_j - b_j i)^{c_j}`.
///
/// Only the numerator is multiplied out; the denominator is its conjugate.
/// A factor `(1, 1)` contributes `i^{c}` and is applied by rotation.
pub fn pow_product_gaussian(gprimes: &[(i64, i64)], exps: &[i64]) -> GaussianRational {
    assert_eq!(
        gprimes.len(),
        exps.len(),
        "primes and exponents differ in length"
    );
    let mut factors = Vec::new();
    let mut rotation = 0i64;
    for (&(a, b), &e) in gprimes.iter().zip(exps) {
        if e == 0 {
            continue;
        }
        if (a, b) == (1, 1) {
            rotation += e;
            continue;
        }
        // a negative exponent swaps the roles of the prime and its conjugate
        let g = if e > 0 {
            GaussianInt::new(a, b)
        } else {
            GaussianInt::new(a, -b)
        };
        factors.push((g, e.unsigned_abs()));
    }
    let num = split_product_gaussian(&factors);
    let den = num.conj();
    apply_i_power(&GaussianRational { num, den }, rotation)
}

/// Multiply `z` by `i^c`.
pub fn apply_i_power(z: &GaussianRational, c: i64) -> GaussianRational {
    GaussianRational {
        num: z.num.mul_i_pow(c),
        den: z.den.clone(),
    }
}
