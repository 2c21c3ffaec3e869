//! Elementary functions with multi-prime argument reduction.
//!
//! `exp` and `cos + i sin` reduce `x` against a table of relations among
//! `log p` (or Gaussian-prime angles), evaluate the exact power product and
//! finish with a short series. `log` and `atan` are Newton inverses of these.
//! The `reference_*` functions use classical halving and serve both as the
//! base case at low precision and as an independent oracle.

use std::sync::Mutex;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::fixedpoint::FixedPoint;
use crate::machin;
use crate::powerprod::{pow_product, pow_product_gaussian};
use crate::relations::{
    generate_table_with, reduce, table_precision, Basis, BasisKind, RelationTable, TableOptions,
    DEFAULT_COEFF_LIMIT,
};
use crate::series;

pub const EXP_CROSSOVER: u64 = 2240;
pub const TRIG_CROSSOVER: u64 = 3400;
pub const DEFAULT_N: usize = 13;
pub const DEFAULT_NEWTON_ORDER: usize = 8;
pub const DEFAULT_C: f64 = 10.0;
/// Depth requested when a table has to be generated for a context.
pub const TABLE_DEPTH: u64 = 256;
/// Extra bits kept on cached basis values beyond `B_max`.
const CACHE_GUARD: u64 = 128;
/// Largest `|x|` accepted by `exp` and `cos_sin`.
const MAX_ARG_LOG2: f64 = 60.0;

const LOG13_TABLE: &str = include_str!("../data/log13_c10.table");
const ATAN13_TABLE: &str = include_str!("../data/atan13_c10.table");

static LN2: Mutex<Option<FixedPoint>> = Mutex::new(None);
static PI: Mutex<Option<FixedPoint>> = Mutex::new(None);

fn cached(cell: &Mutex<Option<FixedPoint>>, bits: u64, make: fn(u64) -> FixedPoint) -> FixedPoint {
    let mut slot = cell.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(v) = slot.as_ref() {
        if v.frac_bits() >= bits {
            return v.with_frac_bits(bits);
        }
    }
    let v = make(bits + 32);
    *slot = Some(v.clone());
    v.with_frac_bits(bits)
}

/// `log 2 = 2 atanh(1/3)`, within `2^-bits`.
pub fn ln2(bits: u64) -> FixedPoint {
    cached(&LN2, bits, |b| {
        series::atan_recip(3, b + 2, true)
            .mul_int(2)
            .with_frac_bits(b)
    })
}

/// `pi = 16 atan(1/5) - 4 atan(1/239)`, within `2^-bits`.
pub fn pi(bits: u64) -> FixedPoint {
    cached(&PI, bits, |b| {
        let a = series::atan_recip(5, b + 6, false).mul_int(16);
        let c = series::atan_recip(239, b + 6, false).mul_int(4);
        a.sub(&c).with_frac_bits(b)
    })
}

/// `floor(n / d + 1/2)` for `d > 0`.
fn div_round(n: BigInt, d: &BigInt) -> BigInt {
    ((n << 1u32) + d).div_floor(&(d << 1u32))
}

fn magnitude_bits(x: &FixedPoint) -> u64 {
    x.log2_abs().max(0.0).ceil() as u64
}

fn check_range(x: &FixedPoint) -> Result<()> {
    if x.log2_abs() > MAX_ARG_LOG2 {
        return Err(Error::Domain(format!("|x| exceeds 2^{MAX_ARG_LOG2}")));
    }
    Ok(())
}

/// Fractional bits of an `exp` result: `bits` plus room for `2^k` with `k < 0`,
/// so the error is relative.
fn exp_frac_bits(bits: u64, k: i64) -> u64 {
    bits + 1 + (-k).max(0) as u64
}

/// `round(u * num / den * 2^shift)` with `out` fractional bits.
fn scale_ratio(u: &FixedPoint, num: &BigInt, den: &BigInt, shift: i64, out: u64) -> FixedPoint {
    let e = out as i64 + shift - u.frac_bits() as i64;
    let mut n = u.mantissa() * num;
    let mut d = den.clone();
    if e >= 0 {
        n <<= e as u64;
    } else {
        d <<= (-e) as u64;
    }
    FixedPoint::new(div_round(n, &d), out)
}

/// Squarings chosen by [`reference_exp_full`]: minimizes `r + 2 sqrt(N(r))`,
/// with `N(r)` the sinh terms needed for `|t| = 2^-r`.
pub fn default_halvings(bits: u64) -> u32 {
    let top = (4.0 * (bits as f64).sqrt()) as u32 + 4;
    (0..=top)
        .min_by(|&a, &b| {
            let cost = |r: u32| {
                r as f64
                    + 2.0 * (series::sinh_term_count(-(r as f64), bits + r as u64) as f64).sqrt()
            };
            cost(a).total_cmp(&cost(b))
        })
        .unwrap_or(0)
}

/// `exp(x)` for `|x| < 1` as `(exp(x / 2^r))^(2^r)`, the inner value from the
/// sinh series. Absolute error at most `2^-bits`.
pub fn reference_exp(x: &FixedPoint, bits: u64, r: u32) -> FixedPoint {
    debug_assert!(x.log2_abs() < 1.0, "reference_exp expects |x| < 1");
    if x.is_zero() {
        return FixedPoint::one(bits);
    }
    let wp = bits + r as u64 + 16;
    let t = x.mul_pow2(-(r as i64));
    let s = series::sinh_reduced(&t, wp);
    let f = s.frac_bits();
    let root = s
        .square(f)
        .add(&FixedPoint::one(f))
        .sqrt(f)
        .expect("1 + s^2 > 0");
    let mut u = s.add(&root);
    for _ in 0..r {
        u = u.square(f);
    }
    u.round_frac_bits(bits)
}

/// `exp(x)` for any `|x| <= 2^60` by removing multiples of `log 2` and calling
/// [`reference_exp`] with [`default_halvings`]. Relative error at most `2^-bits`.
pub fn reference_exp_full(x: &FixedPoint, bits: u64) -> Result<FixedPoint> {
    check_range(x)?;
    if x.is_zero() {
        return Ok(FixedPoint::one(bits));
    }
    let wp = bits + 32 + magnitude_bits(x);
    let l2 = ln2(wp);
    let xw = x.round_frac_bits(wp);
    let k = FixedPoint::nearest_int_quotient(&xw, &l2)?
        .to_i64()
        .expect("|x| is bounded");
    let x1 = xw.sub(&l2.mul_int(k));
    let u = reference_exp(&x1, wp, default_halvings(bits));
    let one = BigInt::one();
    Ok(scale_ratio(&u, &one, &one, k, exp_frac_bits(bits, k)))
}

/// `log(x)` for `x > 0`: `e log 2 + 2^(k+1) atanh(z)` with the mantissa
/// square-rooted `k` times. Absolute error at most `2^-bits`.
pub fn reference_log(x: &FixedPoint, bits: u64) -> Result<FixedPoint> {
    if x.signum() <= 0 {
        return Err(Error::Domain("log of a nonpositive number".into()));
    }
    let e = x.log2_abs().round() as i64;
    let k = ((bits as f64).sqrt() / 2.0).ceil() as u64;
    let wp = bits + k + 16 + magnitude_bits(&FixedPoint::from_int(e, 0));
    let mut m = x.mul_pow2(-e).round_frac_bits(wp);
    for _ in 0..k {
        m = m.sqrt(wp)?;
    }
    let one = FixedPoint::one(wp);
    let z = m.sub(&one).div(&m.add(&one), wp)?;
    let lm = if z.is_zero() {
        FixedPoint::zero(wp)
    } else {
        let n = atanh_terms(z.log2_abs(), wp);
        let s = series::hypergeometric_sum(&z.square(wp), n, wp, |j| {
            let j = j as i64;
            (2 * j - 1, 2 * j + 1)
        });
        s.mul(&z, wp).mul_pow2(k as i64 + 1)
    };
    Ok(lm.add(&ln2(wp).mul_int(e)).round_frac_bits(bits))
}

/// Terms of `sum z^(2j) / (2j+1)` needed for `2^-bits`.
fn atanh_terms(log2_z: f64, bits: u64) -> usize {
    let per = -2.0 * log2_z;
    ((bits as f64 + 4.0) / per).ceil().max(1.0) as usize
}

/// `atan(x)` by argument halving `x -> x / (1 + sqrt(1 + x^2))` and the
/// Taylor series. Absolute error at most `2^-bits`.
pub fn reference_atan(x: &FixedPoint, bits: u64) -> Result<FixedPoint> {
    if x.is_zero() {
        return Ok(FixedPoint::zero(bits));
    }
    let wp = bits + 16;
    let ax = x.abs();
    let r = if ax.log2_abs() > 0.0 {
        let inv = FixedPoint::one(wp + 8).div(&ax, wp + 8)?;
        pi(wp).mul_pow2(-1).sub(&atan_unit_reference(&inv, wp)?)
    } else {
        atan_unit_reference(&ax.round_frac_bits(wp + 8), wp)?
    };
    let r = if x.is_negative() { -&r } else { r };
    Ok(r.round_frac_bits(bits))
}

fn atan_unit_reference(z: &FixedPoint, bits: u64) -> Result<FixedPoint> {
    if z.is_zero() {
        return Ok(FixedPoint::zero(bits));
    }
    let k = ((bits as f64).sqrt() / 3.0).ceil() as u64;
    let wp = bits + k + 16;
    let one = FixedPoint::one(wp);
    let mut y = z.round_frac_bits(wp);
    for _ in 0..k {
        let root = y.square(wp).add(&one).sqrt(wp)?;
        y = y.div(&one.add(&root), wp)?;
    }
    if y.is_zero() {
        return Ok(FixedPoint::zero(bits));
    }
    let n = atanh_terms(y.log2_abs(), wp);
    let s = series::hypergeometric_sum(&y.square(wp), n, wp, |j| {
        let j = j as i64;
        (-(2 * j - 1), 2 * j + 1)
    });
    Ok(s.mul(&y, wp).mul_pow2(k as i64).round_frac_bits(bits))
}

/// `(cos x, sin x)` from the series at `x / 2^r` followed by `r` complex
/// squarings, after removing multiples of `pi/2`. Absolute error at most `2^-bits`.
pub fn reference_cos_sin(x: &FixedPoint, bits: u64) -> Result<(FixedPoint, FixedPoint)> {
    check_range(x)?;
    if x.is_zero() {
        return Ok((FixedPoint::one(bits), FixedPoint::zero(bits)));
    }
    let r = default_halvings(bits);
    let wp = bits + r as u64 + 16;
    let mag = magnitude_bits(x);
    let half_pi = pi(wp + mag + 8).mul_pow2(-1);
    let xw = x.round_frac_bits(wp + mag + 8);
    let q = FixedPoint::nearest_int_quotient(&xw, &half_pi)?;
    let x1 = xw.sub(&half_pi.mul_bigint(&q)).round_frac_bits(wp);
    let (mut s, mut c) = series::sin_cos_reduced(&x1.mul_pow2(-(r as i64)), wp);
    let f = s.frac_bits();
    for _ in 0..r {
        let c2 = c.sub(&s).mul(&c.add(&s), f);
        s = s.mul(&c, f).mul_int(2);
        c = c2;
    }
    let q = q.mod_floor(&BigInt::from(4)).to_u8().unwrap_or(0);
    Ok(rotate_quarter(
        c.round_frac_bits(bits),
        s.round_frac_bits(bits),
        q,
    ))
}

/// Multiply `c + i s` by `i^q`.
fn rotate_quarter(c: FixedPoint, s: FixedPoint, q: u8) -> (FixedPoint, FixedPoint) {
    match q % 4 {
        0 => (c, s),
        1 => (-&s, c),
        2 => (-&c, -&s),
        _ => (s, -&c),
    }
}

/// What one table-driven evaluation did.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionTrace {
    /// Multiple of `log 2` (or `pi/2`) removed before the table.
    pub k: i64,
    /// Full exponent vector, `k` included in the first entry.
    pub coeffs: Vec<i64>,
    pub norm: f64,
    pub r_target: u64,
    pub achieved_r: f64,
    pub residual: f64,
    pub num_bits: u64,
    pub den_bits: u64,
    pub series_terms: usize,
}

#[derive(Clone, Debug)]
struct Part {
    basis: Basis,
    values: Vec<FixedPoint>,
    table: RelationTable,
}

impl Part {
    fn build(kind: BasisKind, n: usize, b_max: u64, table: Option<RelationTable>) -> Result<Part> {
        let basis = Basis::first(kind, n);
        let prec = (b_max + CACHE_GUARD).max(table_precision(DEFAULT_C, TABLE_DEPTH));
        let values = machin::basis_values(&basis, prec)?;
        spot_check(&basis, &values, b_max)?;
        let table = match table {
            Some(t) => {
                if t.basis != basis {
                    return Err(Error::Domain(
                        "table basis does not match the context".into(),
                    ));
                }
                t.with_values(values.clone())?
            }
            None => match (kind, n) {
                (BasisKind::Log, 13) => {
                    RelationTable::from_text_with_values(LOG13_TABLE, &basis, values.clone())?
                }
                (BasisKind::Atan, 13) => {
                    RelationTable::from_text_with_values(ATAN13_TABLE, &basis, values.clone())?
                }
                _ => {
                    let tp = table_precision(DEFAULT_C, TABLE_DEPTH);
                    let coarse: Vec<FixedPoint> = if tp <= prec {
                        values.iter().map(|v| v.with_frac_bits(tp)).collect()
                    } else {
                        machin::basis_values(&basis, tp)?
                    };
                    let opts = TableOptions::default();
                    generate_table_with(
                        &basis,
                        &coarse,
                        DEFAULT_C,
                        TABLE_DEPTH,
                        DEFAULT_COEFF_LIMIT,
                        &opts,
                    )?
                    .with_values(values.clone())?
                }
            },
        };
        Ok(Part {
            basis,
            values,
            table,
        })
    }
}

/// Compare three cached values with the reference evaluators at `bits`.
fn spot_check(basis: &Basis, values: &[FixedPoint], bits: u64) -> Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(basis.len() as u64 ^ bits);
    for _ in 0..3.min(values.len()) {
        let i = rng.gen_range(0..values.len());
        let expect = match basis.kind() {
            BasisKind::Log => reference_log(&FixedPoint::from_int(basis.primes()[i], 0), bits + 8)?,
            BasisKind::Atan => {
                let (a, b) = basis.gaussian()[i];
                let q = FixedPoint::from_int(b, bits + 16).div_int(a as i64);
                reference_atan(&q, bits + 8)?.mul_int(2)
            }
        };
        if !values[i].close_to(&expect, -(bits as i64) + 4) {
            return Err(Error::Verification(format!(
                "cached {} value #{i} disagrees with the reference evaluation",
                basis.kind()
            )));
        }
    }
    Ok(())
}

/// Precomputed basis values and relation tables for one prime count and a
/// maximum precision. Immutable once built; share it freely across threads.
#[derive(Clone, Debug)]
pub struct EvalContext {
    n: usize,
    b_max: u64,
    log: Option<Part>,
    atan: Option<Part>,
    /// Order `m` of the Newton correction series for `log` and `atan`.
    pub newton_order: usize,
    pub exp_crossover: u64,
    pub trig_crossover: u64,
    /// Reductions keep `nu <= norm_factor * B`.
    pub norm_factor: f64,
}

impl EvalContext {
    /// Context for one basis kind with the first `n` primes.
    pub fn new(kind: BasisKind, n: usize, b_max: u64) -> Result<EvalContext> {
        EvalContext::build(&[kind], n, b_max)
    }

    /// Context with both the log and the atan basis.
    pub fn with_both(n: usize, b_max: u64) -> Result<EvalContext> {
        EvalContext::build(&[BasisKind::Log, BasisKind::Atan], n, b_max)
    }

    fn build(kinds: &[BasisKind], n: usize, b_max: u64) -> Result<EvalContext> {
        if n < 2 {
            return Err(Error::Domain("a context needs at least two primes".into()));
        }
        let mut ctx = EvalContext {
            n,
            b_max,
            log: None,
            atan: None,
            newton_order: DEFAULT_NEWTON_ORDER,
            exp_crossover: EXP_CROSSOVER,
            trig_crossover: TRIG_CROSSOVER,
            norm_factor: 1.0,
        };
        for &k in kinds {
            let part = Part::build(k, n, b_max, None)?;
            match k {
                BasisKind::Log => ctx.log = Some(part),
                BasisKind::Atan => ctx.atan = Some(part),
            }
        }
        Ok(ctx)
    }

    /// Replace the relation table of one basis (same primes, any `C`).
    pub fn set_table(&mut self, table: RelationTable) -> Result<()> {
        let kind = table.basis.kind();
        let part = self.part_mut(kind)?;
        if table.basis != part.basis {
            return Err(Error::Domain(
                "table basis does not match the context".into(),
            ));
        }
        part.table = table.with_values(part.values.clone())?;
        Ok(())
    }

    /// Always take the table-driven path, whatever the precision.
    pub fn without_crossovers(mut self) -> EvalContext {
        self.exp_crossover = 0;
        self.trig_crossover = 0;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn b_max(&self) -> u64 {
        self.b_max
    }

    pub fn has(&self, kind: BasisKind) -> bool {
        self.part(kind).is_ok()
    }

    /// Cached basis values (`B_max + 128` bits).
    pub fn values(&self, kind: BasisKind) -> Result<&[FixedPoint]> {
        Ok(&self.part(kind)?.values)
    }

    pub fn table(&self, kind: BasisKind) -> Result<&RelationTable> {
        Ok(&self.part(kind)?.table)
    }

    /// Bytes held by the cached basis values.
    pub fn storage_bytes(&self) -> usize {
        [&self.log, &self.atan]
            .into_iter()
            .flatten()
            .flat_map(|p| p.values.iter())
            .map(|v| v.mantissa().bits().div_ceil(8) as usize)
            .sum()
    }

    fn part(&self, kind: BasisKind) -> Result<&Part> {
        match kind {
            BasisKind::Log => self.log.as_ref(),
            BasisKind::Atan => self.atan.as_ref(),
        }
        .ok_or(Error::MissingBasis(kind.name()))
    }

    fn part_mut(&mut self, kind: BasisKind) -> Result<&mut Part> {
        match kind {
            BasisKind::Log => self.log.as_mut(),
            BasisKind::Atan => self.atan.as_mut(),
        }
        .ok_or(Error::MissingBasis(kind.name()))
    }

    fn capacity(&self, bits: u64) -> Result<()> {
        if bits > self.b_max {
            return Err(Error::ContextTooSmall {
                requested: bits,
                capacity: self.b_max,
            });
        }
        Ok(())
    }

    fn r_target(&self, table: &RelationTable, bits: u64) -> u64 {
        (table.depth_bits().floor() as u64).min(bits.div_ceil(40) + 64)
    }

    /// Remove `k alpha_1`, reduce against the table and return
    /// `(k, reduction, working precision)`.
    fn reduce_arg(
        &self,
        part: &Part,
        x: &FixedPoint,
        bits: u64,
    ) -> Result<(i64, crate::relations::ReductionResult, u64, u64)> {
        let wp = bits + 32 + magnitude_bits(x);
        let a1 = part.values[0].with_frac_bits(wp + 8);
        let xw = x.round_frac_bits(wp + 8);
        let k = FixedPoint::nearest_int_quotient(&xw, &a1)?
            .to_i64()
            .expect("|x| is bounded");
        let x1 = xw.sub(&a1.mul_int(k));
        let r_target = self.r_target(&part.table, bits);
        let red = reduce(&x1, &part.table, r_target, self.norm_factor * bits as f64);
        Ok((k, red, wp, r_target))
    }

    /// `exp(x)` with relative error at most `2^-bits`; the result carries
    /// `bits + max(0, -k)` fractional bits where `2^k ~ exp(x)`.
    pub fn exp(&self, x: &FixedPoint, bits: u64) -> Result<FixedPoint> {
        Ok(self.exp_traced(x, bits)?.0)
    }

    /// [`EvalContext::exp`] plus the reduction it used (`None` below the crossover).
    pub fn exp_traced(
        &self,
        x: &FixedPoint,
        bits: u64,
    ) -> Result<(FixedPoint, Option<ReductionTrace>)> {
        self.capacity(bits)?;
        check_range(x)?;
        if x.is_zero() {
            return Ok((FixedPoint::one(bits), None));
        }
        if bits < self.exp_crossover {
            return Ok((reference_exp_full(x, bits)?, None));
        }
        self.exp_inner(x, bits).map(|(v, t)| (v, Some(t)))
    }

    fn exp_inner(&self, x: &FixedPoint, bits: u64) -> Result<(FixedPoint, ReductionTrace)> {
        let part = self.part(BasisKind::Log)?;
        let (k, red, wp, r_target) = self.reduce_arg(part, x, bits)?;
        let mut coeffs = red.coeffs.clone();
        coeffs[0] += k;
        let mut odd = coeffs.clone();
        odd[0] = 0;
        let pp = pow_product(part.basis.primes(), &odd);
        let t = red.residual.round_frac_bits(wp);
        let s = series::sinh_reduced(&t, wp);
        let f = s.frac_bits();
        let root = s.square(f).add(&FixedPoint::one(f)).sqrt(f)?;
        let u = s.add(&root);
        let value = scale_ratio(&u, &pp.num, &pp.den, coeffs[0], exp_frac_bits(bits, k));
        let trace = ReductionTrace {
            k,
            norm: red.norm,
            r_target,
            achieved_r: red.achieved_r,
            residual: t.to_f64(),
            num_bits: pp.num.bits() + coeffs[0].max(0) as u64,
            den_bits: pp.den.bits() + (-coeffs[0]).max(0) as u64,
            series_terms: if t.is_zero() {
                0
            } else {
                series::sinh_term_count(t.log2_abs(), wp)
            },
            coeffs,
        };
        Ok((value, trace))
    }

    /// `(cos x, sin x)`, each within `2^-bits`.
    pub fn cos_sin(&self, x: &FixedPoint, bits: u64) -> Result<(FixedPoint, FixedPoint)> {
        Ok(self.cos_sin_traced(x, bits)?.0)
    }

    pub fn cos_sin_traced(
        &self,
        x: &FixedPoint,
        bits: u64,
    ) -> Result<((FixedPoint, FixedPoint), Option<ReductionTrace>)> {
        self.capacity(bits)?;
        check_range(x)?;
        if x.is_zero() {
            return Ok(((FixedPoint::one(bits), FixedPoint::zero(bits)), None));
        }
        if bits < self.trig_crossover {
            return Ok((reference_cos_sin(x, bits)?, None));
        }
        self.cos_sin_inner(x, bits).map(|(v, t)| (v, Some(t)))
    }

    fn cos_sin_inner(
        &self,
        x: &FixedPoint,
        bits: u64,
    ) -> Result<((FixedPoint, FixedPoint), ReductionTrace)> {
        let part = self.part(BasisKind::Atan)?;
        let (k, red, wp, r_target) = self.reduce_arg(part, x, bits)?;
        let mut coeffs = red.coeffs.clone();
        coeffs[0] += k;
        let gs: Vec<(i64, i64)> = part
            .basis
            .gaussian()
            .iter()
            .map(|&(a, b)| (a as i64, b as i64))
            .collect();
        let g = pow_product_gaussian(&gs, &coeffs);
        let (z, norm2) = g.normalized();
        let t = red.residual.round_frac_bits(wp);
        let (s, c) = series::sin_cos_reduced(&t, wp);
        // (c + i s)(re + i im) / norm2
        let re = FixedPoint::new(c.mantissa() * &z.re - s.mantissa() * &z.im, c.frac_bits());
        let im = FixedPoint::new(c.mantissa() * &z.im + s.mantissa() * &z.re, c.frac_bits());
        let one = BigInt::one();
        let cos = scale_ratio(&re, &one, &norm2, 0, bits);
        let sin = scale_ratio(&im, &one, &norm2, 0, bits);
        let trace = ReductionTrace {
            k,
            norm: red.norm,
            r_target,
            achieved_r: red.achieved_r,
            residual: t.to_f64(),
            num_bits: g.num.re.bits().max(g.num.im.bits()),
            den_bits: g.den.re.bits().max(g.den.im.bits()),
            series_terms: if t.is_zero() {
                0
            } else {
                series::sinh_term_count(t.log2_abs(), wp)
            },
            coeffs,
        };
        Ok(((cos, sin), trace))
    }

    /// `sin x / cos x`; fails with [`Error::NearPole`] when `|cos x| < 2^(-bits/2)`.
    pub fn tan(&self, x: &FixedPoint, bits: u64) -> Result<FixedPoint> {
        self.capacity(bits)?;
        if x.is_zero() {
            return Ok(FixedPoint::zero(bits));
        }
        let wp = bits + 8;
        let (c, s) = if wp <= self.b_max {
            self.cos_sin(x, wp)?
        } else {
            reference_cos_sin(x, wp)?
        };
        if c.log2_abs() < -((bits / 2) as f64) {
            return Err(Error::NearPole);
        }
        s.div(&c, bits)
    }

    /// `log(x)` for `x > 0`, within `2^-bits`.
    pub fn log(&self, x: &FixedPoint, bits: u64) -> Result<FixedPoint> {
        self.capacity(bits)?;
        if x.signum() <= 0 {
            return Err(Error::Domain("log of a nonpositive number".into()));
        }
        if x.cmp_value(&FixedPoint::one(0)).is_eq() {
            return Ok(FixedPoint::zero(bits));
        }
        let e = x.log2_abs().round() as i64;
        let wp = bits + 16 + magnitude_bits(&FixedPoint::from_int(e, 0));
        let m = x.mul_pow2(-e);
        let l2 = match &self.log {
            Some(p) => p.values[0].with_frac_bits(wp),
            None => ln2(wp),
        };
        let lm = self.log_newton(&m, wp)?;
        Ok(lm.add(&l2.mul_int(e)).round_frac_bits(bits))
    }

    /// `log(m)` for `m` near 1: `y + log1p(m exp(-y) - 1)` with `y` from a
    /// recursive call at `bits / order`.
    fn log_newton(&self, m: &FixedPoint, bits: u64) -> Result<FixedPoint> {
        if bits < TRIG_CROSSOVER || self.log.is_none() {
            return reference_log(m, bits);
        }
        let order = self.newton_order;
        let y = self.log_newton(m, bits.div_ceil(order as u64) + 16)?;
        let w = bits + 16;
        let ey = if w < self.exp_crossover {
            reference_exp_full(&-&y, w)?
        } else {
            self.exp_inner(&-&y, w)?.0
        };
        let delta = m.mul(&ey, w).sub(&FixedPoint::one(w));
        let corr = series::log1p_short(&delta, order, w)?;
        Ok(y.add(&corr).round_frac_bits(bits))
    }

    /// `atan(x)` within `2^-bits`.
    pub fn atan(&self, x: &FixedPoint, bits: u64) -> Result<FixedPoint> {
        self.capacity(bits)?;
        if x.is_zero() {
            return Ok(FixedPoint::zero(bits));
        }
        let wp = bits + 16;
        let ax = x.abs();
        let r = if ax.cmp_value(&FixedPoint::one(0)).is_gt() {
            let inv = FixedPoint::one(wp + 8).div(&ax, wp + 8)?;
            let half_pi = match &self.atan {
                Some(p) => p.values[0].with_frac_bits(wp),
                None => pi(wp).mul_pow2(-1),
            };
            half_pi.sub(&self.atan_newton(&inv, wp)?)
        } else {
            self.atan_newton(&ax.round_frac_bits(wp + 8), wp)?
        };
        let r = if x.is_negative() { -&r } else { r };
        Ok(r.round_frac_bits(bits))
    }

    /// `atan(z)` for `0 <= z <= 1`: `y + atan((c z - s)/(c + s z))` with
    /// `(c, s) = (cos y, sin y)` and `y` from a recursive call.
    fn atan_newton(&self, z: &FixedPoint, bits: u64) -> Result<FixedPoint> {
        if bits < TRIG_CROSSOVER || self.atan.is_none() {
            return reference_atan(z, bits);
        }
        let order = self.newton_order;
        let y = self.atan_newton(z, bits.div_ceil(order as u64) + 16)?;
        let w = bits + 16;
        let (c, s) = if w < self.trig_crossover {
            reference_cos_sin(&y, w)?
        } else {
            self.cos_sin_inner(&y, w)?.0
        };
        let num = c.mul(z, w).sub(&s);
        let den = c.add(&s.mul(z, w));
        let delta = num.div(&den, w)?;
        let corr = series::atan_short(&delta, order, w)?;
        Ok(y.add(&corr).round_frac_bits(bits))
    }
}

/// Context for `kind` with the first `n` primes, usable up to `b_max` bits.
pub fn context_create(kind: BasisKind, n: usize, b_max: u64) -> Result<EvalContext> {
    EvalContext::new(kind, n, b_max)
}

pub fn exp_full(x: &FixedPoint, bits: u64, ctx: &EvalContext) -> Result<FixedPoint> {
    ctx.exp(x, bits)
}

pub fn cos_sin_full(
    x: &FixedPoint,
    bits: u64,
    ctx: &EvalContext,
) -> Result<(FixedPoint, FixedPoint)> {
    ctx.cos_sin(x, bits)
}

pub fn log_full(x: &FixedPoint, bits: u64, ctx: &EvalContext) -> Result<FixedPoint> {
    ctx.log(x, bits)
}

pub fn atan_full(x: &FixedPoint, bits: u64, ctx: &EvalContext) -> Result<FixedPoint> {
    ctx.atan(x, bits)
}

pub fn tan_full(x: &FixedPoint, bits: u64, ctx: &EvalContext) -> Result<FixedPoint> {
    ctx.tan(x, bits)
}
