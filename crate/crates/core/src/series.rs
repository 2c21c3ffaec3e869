//! Taylor series kernels.
//!
//! `atan_recip` sums atan(1/x) or atanh(1/x) exactly by binary splitting.
//! The remaining kernels evaluate short hypergeometric series at a
//! fixed-point argument by rectangular splitting: about `2 sqrt(N)` full
//! multiplications, everything else is multiplication or division by
//! machine-sized integers.

use num_bigint::BigInt;
use num_traits::One;

use crate::error::{Error, Result};
use crate::fixedpoint::FixedPoint;

/// Partial sum over a term range in product form.
///
/// For terms `a_k / b_k * prod_{j <= k} p_j / q_j` over `[lo, hi)`, the state
/// holds `P = prod p`, `Q = prod q`, `B = prod b` and `T` with
/// `sum = T / (B Q)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BSplitState {
    pub p: BigInt,
    pub q: BigInt,
    pub b: BigInt,
    pub t: BigInt,
}

impl BSplitState {
    /// Single term with ratio `p/q`, weight `1/b`.
    pub fn leaf(p: BigInt, q: BigInt, b: BigInt) -> Self {
        BSplitState {
            t: p.clone(),
            p,
            q,
            b,
        }
    }

    /// Concatenate the range of `self` with the range immediately after it.
    pub fn combine(&self, right: &BSplitState) -> BSplitState {
        let t = &right.b * &right.q * &self.t + &self.b * &self.p * &right.t;
        BSplitState {
            p: &self.p * &right.p,
            q: &self.q * &right.q,
            b: &self.b * &right.b,
            t,
        }
    }

    /// The represented sum at `bits` fractional bits (truncated).
    pub fn value(&self, bits: u64) -> FixedPoint {
        let den = &self.b * &self.q;
        FixedPoint::new((&self.t << bits) / den, bits)
    }
}

/// Leaf `k` of the atan/atanh(1/x) series.
fn atan_leaf(k: u64, x: &BigInt, x2: &BigInt, hyperbolic: bool) -> BSplitState {
    let b = BigInt::from(2 * k + 1);
    if k == 0 {
        BSplitState::leaf(BigInt::one(), x.clone(), b)
    } else if hyperbolic {
        BSplitState::leaf(BigInt::one(), x2.clone(), b)
    } else {
        BSplitState::leaf(-BigInt::one(), x2.clone(), b)
    }
}

fn atan_range(lo: u64, hi: u64, x: &BigInt, x2: &BigInt, hyperbolic: bool) -> BSplitState {
    if hi - lo == 1 {
        return atan_leaf(lo, x, x2, hyperbolic);
    }
    let mid = lo + (hi - lo) / 2;
    atan_range(lo, mid, x, x2, hyperbolic).combine(&atan_range(mid, hi, x, x2, hyperbolic))
}

/// Number of terms summed by [`atan_recip`].
pub fn atan_recip_terms(x: u128, bits: u64) -> u64 {
    let per_term = 2.0 * (x as f64).log2();
    (bits as f64 / per_term).ceil() as u64 + 2
}

/// Binary-splitting state for the first `terms` terms of atan(1/x) or atanh(1/x).
pub fn atan_recip_state(x: u128, terms: u64, hyperbolic: bool) -> BSplitState {
    let xb = BigInt::from(x);
    let x2 = &xb * &xb;
    atan_range(0, terms.max(1), &xb, &x2, hyperbolic)
}

/// atan(1/x), or atanh(1/x) when `hyperbolic`, within `2^-bits`.
pub fn atan_recip(x: u128, bits: u64, hyperbolic: bool) -> FixedPoint {
    assert!(x >= 2, "atan_recip needs x >= 2");
    let state = atan_recip_state(x, atan_recip_terms(x, bits), hyperbolic);
    state.value(bits + 8).round_frac_bits(bits)
}

/// Sum `sum_{k < n} c_k y^k` with `c_0 = 1`, `c_k = c_{k-1} a_k / b_k`.
///
/// `ratio(k)` returns `(a_k, b_k)`. Rectangular splitting with blocks of
/// `ceil(sqrt(n))` powers; evaluation runs at `bits` fractional bits and
/// loses about `n + 2 sqrt(n)` ulps.
pub fn hypergeometric_sum<F>(y: &FixedPoint, n: usize, bits: u64, ratio: F) -> FixedPoint
where
    F: Fn(usize) -> (i64, i64),
{
    if n == 0 {
        return FixedPoint::zero(bits);
    }
    let y = y.with_frac_bits(bits);
    let m = (n as f64).sqrt().ceil() as usize;
    let m = m.max(1);
    // pows[j] = y^j for j = 0..=m
    let mut pows = Vec::with_capacity(m + 1);
    pows.push(FixedPoint::one(bits));
    for j in 1..=m {
        let next = if j == 1 {
            y.clone()
        } else {
            pows[j - 1].mul(&y, bits)
        };
        pows.push(next);
    }
    let blocks = n.div_ceil(m);
    let mut acc: Option<FixedPoint> = None;
    for blk in (0..blocks).rev() {
        let start = blk * m;
        let (mut u, top) = match acc {
            None => {
                let len = n - start;
                (pows[len - 1].clone(), len - 1)
            }
            Some(prev) => (pows[m].mul(&prev, bits), m),
        };
        for i in (1..=top).rev() {
            let (a, b) = ratio(start + i);
            u = u.mul_int(a).div_int(b).add(&pows[i - 1]);
        }
        acc = Some(u);
    }
    acc.unwrap()
}

fn guard_for(n: usize) -> u64 {
    8 + 2 * (64 - (n as u64 + 1).leading_zeros() as u64)
}

/// Smallest `N` with `|t|^(2N+1) / (2N+1)! < 2^(-bits-2)`, given `log2|t|`.
pub fn sinh_term_count(log2_t: f64, bits: u64) -> usize {
    let target = -(bits as f64) - 2.0;
    let mut n = 0usize;
    // log2(|t|^(2n+1) / (2n+1)!)
    let mut log_term = log2_t;
    while log_term >= target {
        n += 1;
        let k = (2 * n) as f64;
        log_term += 2.0 * log2_t - k.log2() - (k + 1.0).log2();
    }
    n
}

fn odd_series(t: &FixedPoint, bits: u64, sign: i64) -> FixedPoint {
    if t.is_zero() {
        return FixedPoint::zero(bits + 8);
    }
    let n = sinh_term_count(t.log2_abs(), bits);
    let wp = bits + guard_for(n);
    let tw = t.with_frac_bits(wp);
    let y = tw.square(wp);
    let s = hypergeometric_sum(&y, n, wp, |k| {
        let k = k as i64;
        (sign, (2 * k) * (2 * k + 1))
    });
    s.mul(&tw, wp).round_frac_bits(bits + 8)
}

/// sinh(t) within `2^(-bits-2)`, returned with `bits + 8` fractional bits.
pub fn sinh_reduced(t: &FixedPoint, bits: u64) -> FixedPoint {
    odd_series(t, bits, 1)
}

/// (sin t, cos t), each within `2^(-bits-2)`, with `bits + 8` fractional bits.
///
/// The cosine is recovered as `sqrt(1 - sin^2)`, so `|t| < pi/2` is assumed.
pub fn sin_cos_reduced(t: &FixedPoint, bits: u64) -> (FixedPoint, FixedPoint) {
    let out = bits + 8;
    let s = odd_series(t, bits + 4, -1);
    let wp = out + 8;
    let c2 = FixedPoint::one(wp).sub(&s.square(wp));
    let c = c2
        .sqrt(wp)
        .expect("cos^2 is positive for a reduced argument");
    (s.round_frac_bits(out), c.round_frac_bits(out))
}

fn check_short_argument(delta: &FixedPoint, m: usize, bits: u64) -> Result<()> {
    if delta.is_zero() {
        return Ok(());
    }
    let limit = -(bits as f64) / m as f64 + 4.0;
    if delta.log2_abs() > limit {
        return Err(Error::SeriesArgument { order: m });
    }
    Ok(())
}

/// `sum_{k=1}^{m-1} (-1)^(k+1) delta^k / k`, the order-`m` truncation of log(1+delta).
pub fn log1p_short(delta: &FixedPoint, m: usize, bits: u64) -> Result<FixedPoint> {
    check_short_argument(delta, m, bits)?;
    let out = bits + 8;
    if delta.is_zero() || m < 2 {
        return Ok(FixedPoint::zero(out));
    }
    let n = m - 1;
    let wp = bits + guard_for(n);
    let d = delta.with_frac_bits(wp);
    // delta * sum_{k<n} (-delta)^k / (k+1)
    let s = hypergeometric_sum(&d, n, wp, |k| (-(k as i64), k as i64 + 1));
    Ok(s.mul(&d, wp).round_frac_bits(out))
}

/// `sum_{2k+1 <= m} (-1)^k delta^(2k+1) / (2k+1)`, the truncated atan series.
pub fn atan_short(delta: &FixedPoint, m: usize, bits: u64) -> Result<FixedPoint> {
    check_short_argument(delta, m, bits)?;
    let out = bits + 8;
    if delta.is_zero() || m < 1 {
        return Ok(FixedPoint::zero(out));
    }
    let n = m.div_ceil(2);
    let wp = bits + guard_for(n);
    let d = delta.with_frac_bits(wp);
    let y = d.square(wp);
    let s = hypergeometric_sum(&y, n, wp, |k| {
        let k = k as i64;
        (-(2 * k - 1), 2 * k + 1)
    });
    Ok(s.mul(&d, wp).round_frac_bits(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;
    use proptest::prelude::*;

    const PI_320: &str = "3.1415926535897932384626433832795028841971693993751058209749445923078164062862089986280348253421170679821480865132823066470938446095505822317253594081284811174502841027019385211055596446229489549303819644288109756659334461284756482337867831652712019091456485669234603486104543266482133936072602491412737245870066063155882";
    const LOG2_320: &str = "0.69314718055994530941723212145817656807550013436025525412068000949339362196969471560586332699641868754200148102057068573368552023575813055703267075163507596193072757082837143519030703862389167347112335011536449795523912047517268157493206515552473413952588295045300709532636664265410423915781495204374043038550080194417064";

    fn fp(x: f64, bits: u64) -> FixedPoint {
        FixedPoint::from_f64(x, bits)
    }

    type Q = num_rational::BigRational;

    /// Exact rational partial sum `sum_{k < terms} coeff(k) x^k`.
    fn naive_series(x: &Q, terms: usize, bits: u64, coeff: impl Fn(usize) -> Q) -> FixedPoint {
        let mut pow = Q::one();
        let mut acc = Q::zero();
        for k in 0..terms {
            acc += coeff(k) * &pow;
            pow *= x;
        }
        FixedPoint::from_ratio(acc.numer(), acc.denom(), bits + 64).unwrap()
    }

    fn factorial(k: usize) -> BigInt {
        (1..=k).fold(BigInt::one(), |f, j| f * j)
    }

    /// Taylor coefficients of sinh/cosh (`sign = 1`) or sin/cos (`sign = -1`).
    fn trig_coeff(k: usize, sign: i64, even: bool) -> Q {
        if (k % 2 == 0) != even {
            return Q::zero();
        }
        let s = if sign < 0 && (k / 2) % 2 == 1 { -1 } else { 1 };
        Q::new(BigInt::from(s), factorial(k))
    }

    fn q(num: i64, den: i64) -> Q {
        Q::new(num.into(), den.into())
    }

    #[test]
    fn atan_recip_gives_log2_and_pi() {
        let bits = 1000;
        let l = atan_recip(7, bits, true)
            .mul_int(4)
            .add(&atan_recip(17, bits, true).mul_int(2));
        let log2 = FixedPoint::from_decimal(LOG2_320, bits + 64).unwrap();
        assert!(l.close_to(&log2, -(bits as i64) + 3));
        let pi = atan_recip(5, bits, false)
            .mul_int(4)
            .sub(&atan_recip(239, bits, false))
            .mul_int(4);
        let want = FixedPoint::from_decimal(PI_320, bits + 64).unwrap();
        assert!(pi.close_to(&want, -(bits as i64) + 5));
    }

    #[test]
    fn atan_recip_large_argument() {
        let got = atan_recip(1_000_000, 64, false);
        let x = FixedPoint::from_ratio(&1.into(), &1_000_000.into(), 192).unwrap();
        let want = x.sub(&x.mul(&x, 192).mul(&x, 192).div_int(3));
        assert!(got.ulps_from(&want, 64) <= 1);
    }

    #[test]
    fn atan_recip_term_counts() {
        assert_eq!(
            atan_recip_terms(7, 1000),
            (1000.0 / (2.0 * 7f64.log2())).ceil() as u64 + 2
        );
    }

    #[test]
    fn atan_recip_precision_extension_agrees() {
        for &x in &[2u128, 3, 18, 57, 239, 1_000_003, 19182937474703818751] {
            for h in [false, true] {
                let a = atan_recip(x, 700, h);
                let b = atan_recip(x, 764, h);
                assert!(a.close_to(&b, -700), "x = {x}");
            }
        }
    }

    #[test]
    fn bsplit_ranges_combine_exactly() {
        let x = BigInt::from(11);
        let x2 = &x * &x;
        for (a, b, c) in [(0, 1, 2), (0, 5, 9), (3, 4, 17), (2, 10, 11)] {
            for h in [false, true] {
                let l = atan_range(a, b, &x, &x2, h);
                let r = atan_range(b, c, &x, &x2, h);
                assert_eq!(l.combine(&r), atan_range(a, c, &x, &x2, h));
            }
        }
    }

    #[test]
    fn sinh_examples() {
        assert!(sinh_reduced(&FixedPoint::zero(100), 100).is_zero());
        let t = FixedPoint::new(BigInt::one(), 20);
        let bits = 1000;
        let got = sinh_reduced(&t, bits);
        let want = naive_series(&q(1, 1 << 20), 80, bits, |k| trig_coeff(k, 1, false));
        assert!(got.close_to(&want, -(bits as i64) - 2));
    }

    #[test]
    fn sinh_term_count_matches_example() {
        let log2_t = (1.5711e-32f64).log2();
        assert_eq!(sinh_term_count(log2_t, 33220), 148);
    }

    #[test]
    fn sin_cos_examples() {
        let (s, c) = sin_cos_reduced(&FixedPoint::zero(64), 64);
        assert!(s.is_zero());
        assert_eq!(c, FixedPoint::one(72));
        let bits = 500;
        let t = FixedPoint::from_decimal("1e-10", bits + 64).unwrap();
        let (s, c) = sin_cos_reduced(&t, bits);
        let x = q(1, 10_000_000_000);
        let ws = naive_series(&x, 30, bits, |k| trig_coeff(k, -1, false));
        let wc = naive_series(&x, 30, bits, |k| trig_coeff(k, -1, true));
        assert!(s.close_to(&ws, -(bits as i64) - 2));
        assert!(c.close_to(&wc, -(bits as i64) - 2));
        // sin(pi/6 - tiny) check through pi from the Machin series
        let pi = atan_recip(5, 600, false)
            .mul_int(16)
            .sub(&atan_recip(239, 600, false).mul_int(4));
        let (s6, _) = sin_cos_reduced(&pi.div_int(6), 400);
        assert!(s6.close_to(
            &FixedPoint::from_ratio(&1.into(), &2.into(), 400).unwrap(),
            -398
        ));
    }

    #[test]
    fn short_series_examples() {
        let z = FixedPoint::zero(64);
        assert!(log1p_short(&z, 8, 500).unwrap().is_zero());
        assert!(atan_short(&z, 8, 500).unwrap().is_zero());

        let d = FixedPoint::new(BigInt::from(12345), 80);
        assert_eq!(log1p_short(&d, 2, 100).unwrap(), d.with_frac_bits(108));
        let want3 = d.sub(&d.mul(&d, 400).mul(&d, 400).div_int(3));
        assert!(atan_short(&d, 3, 100).unwrap().close_to(&want3, -108));

        let d = FixedPoint::new(BigInt::one(), 200);
        let got = log1p_short(&d, 10, 1900).unwrap();
        let x = Q::new(BigInt::one(), BigInt::one() << 200u32);
        let want = naive_series(&x, 12, 1900, |k| match k {
            0 => Q::zero(),
            k if k % 2 == 1 => q(1, k as i64),
            k => q(-1, k as i64),
        });
        assert!(got.close_to(&want, -1902));

        let d = FixedPoint::new(BigInt::one(), 100);
        let got = atan_short(&d, 8, 780).unwrap();
        let x = Q::new(BigInt::one(), BigInt::one() << 100u32);
        let want = naive_series(&x, 12, 780, |k| match k {
            k if k % 2 == 0 => Q::zero(),
            k if (k / 2) % 2 == 0 => q(1, k as i64),
            k => q(-1, k as i64),
        });
        assert!(got.close_to(&want, -782));
    }

    #[test]
    fn short_series_rejects_large_arguments() {
        let d = FixedPoint::from_f64(0.01, 64);
        assert_eq!(
            log1p_short(&d, 4, 1000),
            Err(Error::SeriesArgument { order: 4 })
        );
        assert_eq!(
            atan_short(&d, 4, 1000),
            Err(Error::SeriesArgument { order: 4 })
        );
    }

    fn horner(
        y: &FixedPoint,
        n: usize,
        bits: u64,
        ratio: impl Fn(usize) -> (i64, i64),
    ) -> FixedPoint {
        // coefficients first, then Horner from the top
        let mut coeffs = vec![FixedPoint::one(bits)];
        for k in 1..n {
            let (a, b) = ratio(k);
            let c = coeffs[k - 1].mul_int(a).div_int(b);
            coeffs.push(c);
        }
        let mut acc = FixedPoint::zero(bits);
        for c in coeffs.iter().rev() {
            acc = acc.mul(y, bits).add(c);
        }
        acc
    }

    proptest! {
        #[test]
        fn rectangular_matches_horner(x in -0.5f64..0.5, n in 1usize..60) {
            let y = fp(x, 256);
            let ratio = |k: usize| (-(k as i64), (k as i64 + 3) * (k as i64 + 1));
            let r = hypergeometric_sum(&y, n, 320, ratio).round_frac_bits(256);
            let h = horner(&y, n, 320, ratio).round_frac_bits(256);
            prop_assert!(r.ulps_from(&h, 256) <= 1);
        }

        #[test]
        fn sin_cos_pythagoras(x in -0.0039f64..0.0039, bits in 64u64..2000) {
            let t = fp(x, bits + 64);
            let (s, c) = sin_cos_reduced(&t, bits);
            let one = s.square(bits + 16).add(&c.square(bits + 16));
            prop_assert!(one.close_to(&FixedPoint::one(bits), -(bits as i64) + 2));
        }

        #[test]
        fn sinh_term_count_is_minimal(e in 8.0f64..200.0, bits in 64u64..40000) {
            let log2_t = -e;
            let n = sinh_term_count(log2_t, bits);
            let log_term = |n: usize| -> f64 {
                let k = 2 * n + 1;
                let lf: f64 = (2..=k).map(|j| (j as f64).log2()).sum();
                k as f64 * log2_t - lf
            };
            let target = -(bits as f64) - 2.0;
            prop_assert!(log_term(n) < target);
            if n > 0 {
                prop_assert!(log_term(n - 1) >= target);
            }
        }
    }
}
