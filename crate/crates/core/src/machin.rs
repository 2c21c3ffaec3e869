//! Simultaneous Machin-like formulas.
//!
//! A formula for a basis of `n` primes is a set `X` of `n` integers whose
//! factorizations give an invertible integer matrix `R` with
//! `R * basis = series`, where the series are `2 atanh(1/x)` (log kind) or
//! `atan(1/x)` (atan kind). The basis values are then `M * series` with
//! `M = R^-1`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::fixedpoint::FixedPoint;
use crate::lattice::IntMatrix;
use crate::relations::{first_primes, Basis, BasisKind};
use crate::series::atan_recip;

pub type RationalMatrix = Vec<Vec<BigRational>>;

const TABLES: &str = include_str!("../data/machin_tables.txt");

/// A row of the built-in formula tables.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub kind: BasisKind,
    pub n: usize,
    /// Lehmer measure as printed, `f64::INFINITY` for the one-term atan(1) formula.
    pub printed_mu: f64,
    pub x: Vec<u128>,
}

/// All built-in rows: 25 log formulas followed by 22 atan formulas.
pub fn table_rows() -> &'static [TableRow] {
    static ROWS: OnceLock<Vec<TableRow>> = OnceLock::new();
    ROWS.get_or_init(|| {
        TABLES
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|l| {
                let f: Vec<&str> = l.split_whitespace().collect();
                TableRow {
                    kind: f[0].parse().expect("table kind"),
                    n: f[1].parse().expect("table n"),
                    printed_mu: if f[2] == "inf" {
                        f64::INFINITY
                    } else {
                        f[2].parse().expect("mu")
                    },
                    x: f[3]
                        .split(',')
                        .map(|s| s.parse().expect("table x"))
                        .collect(),
                }
            })
            .collect()
    })
}

pub fn table_row(kind: BasisKind, n: usize) -> Option<&'static TableRow> {
    table_rows().iter().find(|r| r.kind == kind && r.n == n)
}

/// Largest `n` with a built-in formula of this kind.
pub fn max_builtin_n(kind: BasisKind) -> usize {
    table_rows()
        .iter()
        .filter(|r| r.kind == kind)
        .map(|r| r.n)
        .max()
        .unwrap_or(0)
}

/// An `x` with a smooth factorization and its exponent vector over the basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmoothCandidate {
    pub x: u128,
    pub exps: Vec<i64>,
}

impl SmoothCandidate {
    /// Recheck the factorization behind `exps` by exact multiplication.
    pub fn verify(&self, basis: &Basis) -> bool {
        if self.exps.len() != basis.len() {
            return false;
        }
        match basis.kind() {
            BasisKind::Log => {
                // (x + 1) * prod_{e<0} p^-e == (x - 1) * prod_{e>0} p^e
                let mut lhs = BigInt::from(self.x) + 1;
                let mut rhs = BigInt::from(self.x) - 1;
                for (&p, &e) in basis.primes().iter().zip(&self.exps) {
                    let f = BigInt::from(p).pow(e.unsigned_abs() as u32);
                    if e < 0 {
                        lhs *= f;
                    } else {
                        rhs *= f;
                    }
                }
                lhs == rhs
            }
            BasisKind::Atan => {
                // x^2 + 1 = 2^k prod_{j>=2} N_j^|e_j| with k <= 1
                let mut rest: BigInt = BigInt::from(self.x).pow(2u32) + 1u32;
                if rest.is_even() {
                    rest /= 2;
                }
                let mut prod = BigInt::one();
                for (&(a, b), &e) in basis.gaussian().iter().zip(&self.exps).skip(1) {
                    prod *= BigInt::from(a * a + b * b).pow(e.unsigned_abs() as u32);
                }
                let angles = basis.values_f64();
                let sum: f64 = angles
                    .iter()
                    .zip(&self.exps)
                    .map(|(a, &e)| a * e as f64 / 2.0)
                    .sum();
                rest == prod && (sum - (1.0 / self.x as f64).atan()).abs() < 1e-9
            }
        }
    }
}

fn factor_over(mut v: u128, primes: &[u64]) -> Option<Vec<i64>> {
    let mut exps = vec![0i64; primes.len()];
    for (e, &p) in exps.iter_mut().zip(primes) {
        let p = p as u128;
        while v % p == 0 {
            v /= p;
            *e += 1;
        }
    }
    (v == 1).then_some(exps)
}

/// Exponents of `(x+1)/(x-1)` over the primes, if both are smooth.
pub fn factor_log(x: u128, primes: &[u64]) -> Option<Vec<i64>> {
    if x < 2 {
        return None;
    }
    let up = factor_over(x + 1, primes)?;
    let down = factor_over(x - 1, primes)?;
    Some(up.iter().zip(&down).map(|(u, d)| u - d).collect())
}

/// Signed exponents expressing `atan(1/x)` in the angles `atan(b_j/a_j)`.
///
/// A factor `a+bi` of `x+i` counts `+1`, its conjugate `-1`; the unit left
/// over (and any multiple of `2 pi`) is folded into the `1+i` exponent.
pub fn factor_atan(x: u128, gaussian: &[(u64, u64)]) -> Option<Vec<i64>> {
    if x == 0 || gaussian.first() != Some(&(1, 1)) {
        return None;
    }
    let (mut re, mut im) = (x as i128, 1i128);
    let mut exps = vec![0i64; gaussian.len()];
    for (e, &(a, b)) in exps.iter_mut().zip(gaussian) {
        let (a, b) = (a as i128, b as i128);
        let n = a * a + b * b;
        loop {
            // divide by a+bi: (re + im i)(a - bi) / n
            let (r1, i1) = (re * a + im * b, im * a - re * b);
            if r1 % n == 0 && i1 % n == 0 {
                re = r1 / n;
                im = i1 / n;
                *e += 1;
                continue;
            }
            // divide by a-bi
            let (r2, i2) = (re * a - im * b, im * a + re * b);
            if r2 % n == 0 && i2 % n == 0 {
                re = r2 / n;
                im = i2 / n;
                *e -= 1;
                continue;
            }
            break;
        }
    }
    if re * re + im * im != 1 {
        return None;
    }
    let quarter_pi = std::f64::consts::FRAC_PI_4;
    let sum: f64 = gaussian
        .iter()
        .zip(&exps)
        .map(|(&(a, b), &e)| e as f64 * (b as f64).atan2(a as f64))
        .sum();
    let diff = (1.0 / x as f64).atan() - sum;
    exps[0] += (diff / quarter_pi).round() as i64;
    Some(exps)
}

fn candidate_exps(x: u128, basis: &Basis) -> Option<Vec<i64>> {
    match basis.kind() {
        BasisKind::Log => factor_log(x, basis.primes()),
        BasisKind::Atan => factor_atan(x, basis.gaussian()),
    }
}

/// Integer matrix `R` whose rows are the exponent vectors of `xs`.
pub fn relation_matrix(xs: &[u128], basis: &Basis) -> Result<IntMatrix> {
    let rows = xs
        .iter()
        .map(|&x| candidate_exps(x, basis).ok_or_else(|| Error::NotSmooth(x.to_string())))
        .collect::<Result<Vec<_>>>()?;
    Ok(IntMatrix::from_rows(&rows))
}

/// `det R` with the rows taken in greedy selection order (largest `x` first).
///
/// Reversing the rows multiplies the determinant by `(-1)^(n(n-1)/2)`.
pub fn relation_determinant(xs: &[u128], basis: &Basis) -> Result<BigInt> {
    let mut desc = xs.to_vec();
    desc.sort_unstable_by(|a, b| b.cmp(a));
    Ok(relation_matrix(&desc, basis)?.determinant())
}

/// Exact inverse of a square rational matrix by Gauss–Jordan elimination.
pub fn invert(m: &RationalMatrix) -> Result<RationalMatrix> {
    let n = m.len();
    let mut a: RationalMatrix = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| {
                if i == j {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .ok_or(Error::SingularMatrix)?;
        a.swap(col, piv);
        let inv = a[col][col].recip();
        for x in a[col].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r == col || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for (x, p) in row.iter_mut().zip(&pivot_row) {
                *x -= &f * p;
            }
        }
    }
    Ok(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn to_rational(m: &IntMatrix) -> RationalMatrix {
    (0..m.rows())
        .map(|i| {
            m.row(i)
                .iter()
                .map(|x| BigRational::from_integer(x.clone()))
                .collect()
        })
        .collect()
}

/// `M = R^-1` for the arguments `xs`.
pub fn recover_matrix(xs: &[u128], basis: &Basis) -> Result<RationalMatrix> {
    if xs.len() != basis.len() {
        return Err(Error::InsufficientRank {
            rank: xs.len(),
            needed: basis.len(),
        });
    }
    let r = relation_matrix(xs, basis)?;
    invert(&to_rational(&r))
}

/// An `n`-term formula computing every basis value from `n` series.
#[derive(Clone, Debug, PartialEq)]
pub struct MachinFormula {
    pub basis: Basis,
    pub x: Vec<u128>,
    pub m: RationalMatrix,
}

impl MachinFormula {
    pub fn new(basis: Basis, x: Vec<u128>) -> Result<MachinFormula> {
        let m = recover_matrix(&x, &basis)?;
        Ok(MachinFormula { basis, x, m })
    }

    pub fn kind(&self) -> BasisKind {
        self.basis.kind()
    }

    pub fn lehmer_measure(&self) -> f64 {
        lehmer_measure(&self.x)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("machin v1; kind={}; n={}\n", self.kind(), self.x.len());
        let xs: Vec<String> = self.x.iter().map(u128::to_string).collect();
        writeln!(s, "X={}", xs.join(",")).unwrap();
        for row in &self.m {
            let r: Vec<String> = row.iter().map(|q| q.to_string()).collect();
            writeln!(s, "M={}", r.join(",")).unwrap();
        }
        s
    }

    /// Parse the text form; the basis is the first `n` primes of the kind.
    pub fn from_text(text: &str) -> Result<MachinFormula> {
        let bad = |what: &str| Error::Parse(format!("machin formula: {what}"));
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| bad("empty input"))?;
        let mut fields = header.split(';').map(str::trim);
        if fields.next() != Some("machin v1") {
            return Err(bad("missing 'machin v1' header"));
        }
        let mut kind = None;
        let mut n = None;
        for f in fields {
            match f.split_once('=') {
                Some(("kind", v)) => kind = Some(v.parse::<BasisKind>()?),
                Some(("n", v)) => n = Some(v.parse::<usize>().map_err(|_| bad("bad n"))?),
                _ => return Err(bad("unknown header field")),
            }
        }
        let (kind, n) = (
            kind.ok_or_else(|| bad("no kind"))?,
            n.ok_or_else(|| bad("no n"))?,
        );
        let xline = lines
            .next()
            .and_then(|l| l.strip_prefix("X="))
            .ok_or_else(|| bad("no X line"))?;
        let x = xline
            .split(',')
            .map(|s| s.trim().parse::<u128>().map_err(|_| bad("bad X entry")))
            .collect::<Result<Vec<_>>>()?;
        let m = lines
            .map(|l| {
                let row = l.strip_prefix("M=").ok_or_else(|| bad("expected M row"))?;
                row.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<BigRational>()
                            .map_err(|_| bad("bad M entry"))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<RationalMatrix>>()?;
        if x.len() != n || m.len() != n || m.iter().any(|r| r.len() != n) {
            return Err(bad("dimension mismatch"));
        }
        Ok(MachinFormula {
            basis: Basis::first(kind, n),
            x,
            m,
        })
    }
}

/// Built-in formula from the tables, with `M` recovered and memoized.
pub fn builtin_formula(kind: BasisKind, n: usize) -> Result<Arc<MachinFormula>> {
    static CACHE: OnceLock<Mutex<HashMap<(BasisKind, usize), Arc<MachinFormula>>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(f) = cache.lock().unwrap().get(&(kind, n)) {
        return Ok(f.clone());
    }
    let row = table_row(kind, n).ok_or(Error::UnsupportedN {
        kind: kind.name(),
        n,
    })?;
    let f = Arc::new(MachinFormula::new(Basis::first(kind, n), row.x.clone())?);
    cache.lock().unwrap().insert((kind, n), f.clone());
    Ok(f)
}

/// `sum 1/log10 x`; infinite if any `x <= 1`.
pub fn lehmer_measure(xs: &[u128]) -> f64 {
    xs.iter()
        .map(|&x| {
            if x <= 1 {
                f64::INFINITY
            } else {
                1.0 / (x as f64).log10()
            }
        })
        .sum()
}

/// `atan(1/x)` or `2 atanh(1/x)` for one formula argument.
fn series_value(kind: BasisKind, x: u128, bits: u64) -> FixedPoint {
    match (kind, x) {
        (BasisKind::Atan, 1) => {
            // atan(1) = 4 atan(1/5) - atan(1/239)
            let a = atan_recip(5, bits + 4, false).mul_int(4);
            a.sub(&atan_recip(239, bits + 4, false))
                .round_frac_bits(bits)
        }
        (BasisKind::Atan, _) => atan_recip(x, bits, false),
        (BasisKind::Log, _) => atan_recip(x, bits, true).mul_pow2(1),
    }
}

fn evaluate_series(kind: BasisKind, xs: &[u128], bits: u64) -> Vec<FixedPoint> {
    if xs.len() == 1 || bits < 20_000 {
        return xs.iter().map(|&x| series_value(kind, x, bits)).collect();
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = xs
            .iter()
            .map(|&x| s.spawn(move || series_value(kind, x, bits)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("series thread"))
            .collect()
    })
}

/// Values of `M * series` within `2^-bits`: `log p_i` or `atan(b_j / a_j)`.
pub fn eval_basis(formula: &MachinFormula, bits: u64) -> Vec<FixedPoint> {
    let weight: f64 = formula
        .m
        .iter()
        .map(|row| {
            row.iter()
                .map(|q| q.abs().to_f64().unwrap_or(f64::MAX))
                .sum::<f64>()
        })
        .fold(1.0, f64::max);
    let wp = bits + weight.log2().ceil().max(0.0) as u64 + 12;
    let series = evaluate_series(formula.kind(), &formula.x, wp);
    formula
        .m
        .iter()
        .map(|row| {
            let den = row.iter().fold(BigInt::one(), |l, q| l.lcm(q.denom()));
            let mut acc = FixedPoint::zero(wp);
            for (q, s) in row.iter().zip(&series) {
                if !q.is_zero() {
                    let k = q.numer() * (&den / q.denom());
                    acc = acc.add(&s.mul_bigint(&k));
                }
            }
            let v = if den.is_one() {
                acc
            } else {
                acc.div_bigint(&den).expect("nonzero lcm")
            };
            v.round_frac_bits(bits)
        })
        .collect()
}

/// `log p = log 2 + (log((p-1)/2) + log((p+1)/2)) / 2 + atanh(1/(2p^2 - 1))`.
///
/// `known` must hold `log q` for 2 and every prime `q` dividing `(p-1)/2` or `(p+1)/2`.
pub fn log_prime_incremental(
    p: u64,
    known: &BTreeMap<u64, FixedPoint>,
    bits: u64,
) -> Result<FixedPoint> {
    if p < 3 || p % 2 == 0 {
        return Err(Error::Domain(format!("{p} is not an odd prime")));
    }
    let wp = bits + 8;
    let log_of = |mut v: u64| -> Result<FixedPoint> {
        let mut acc = FixedPoint::zero(wp);
        let mut q = 2;
        while v > 1 {
            while v % q == 0 {
                let l = known.get(&q).ok_or(Error::MissingDependency(q))?;
                acc = acc.add(&l.with_frac_bits(wp));
                v /= q;
            }
            q += 1;
        }
        Ok(acc)
    };
    let log2 = known
        .get(&2)
        .ok_or(Error::MissingDependency(2))?
        .with_frac_bits(wp);
    let halves = log_of((p - 1) / 2)?.add(&log_of((p + 1) / 2)?);
    let tail = atan_recip(2 * (p as u128) * (p as u128) - 1, wp, true);
    let v = log2.add(&halves.mul_pow2(-1).with_frac_bits(wp)).add(&tail);
    Ok(v.round_frac_bits(bits))
}

/// All `x <= x_max` whose `x^2 - 1` (log) or `x^2 + 1` (atan) is smooth over the basis.
pub fn find_candidates(basis: &Basis, x_max: u128) -> Vec<SmoothCandidate> {
    let mut out = Vec::new();
    match basis.kind() {
        BasisKind::Log => {
            // x - 1 runs over the P-smooth numbers, then x + 1 is trial divided
            let primes: Vec<u128> = basis.primes().iter().map(|&p| p as u128).collect();
            let mut smooth = vec![1u128];
            for &p in &primes {
                let mut extra = Vec::new();
                for &s in &smooth {
                    let mut v = s * p;
                    while v < x_max {
                        extra.push(v);
                        v = match v.checked_mul(p) {
                            Some(v) => v,
                            None => break,
                        };
                    }
                }
                smooth.extend(extra);
            }
            smooth.sort_unstable();
            for s in smooth {
                let x = s + 1;
                if x <= x_max {
                    if let Some(exps) = factor_log(x, basis.primes()) {
                        out.push(SmoothCandidate { x, exps });
                    }
                }
            }
        }
        BasisKind::Atan => {
            let norms: Vec<u128> = basis.norms().iter().map(|&q| q as u128).collect();
            for x in 1..=x_max {
                let mut v = x * x + 1;
                for &q in &norms {
                    while v % q == 0 {
                        v /= q;
                    }
                }
                if v == 1 {
                    if let Some(exps) = factor_atan(x, basis.gaussian()) {
                        out.push(SmoothCandidate { x, exps });
                    }
                }
            }
        }
    }
    out
}

/// Greedy choice from the largest candidate down, keeping each exponent
/// vector that is independent of those already chosen.
pub fn find_formula(basis: &Basis, candidates: &[SmoothCandidate]) -> Result<MachinFormula> {
    let n = basis.len();
    let mut sorted: Vec<&SmoothCandidate> = candidates.iter().collect();
    sorted.sort_by(|a, b| b.x.cmp(&a.x));
    // echelon rows with their pivot columns
    let mut echelon: Vec<(usize, Vec<BigRational>)> = Vec::new();
    let mut chosen = Vec::new();
    for c in sorted {
        if chosen.len() == n {
            break;
        }
        let mut v: Vec<BigRational> = c
            .exps
            .iter()
            .map(|&e| BigRational::from_integer(e.into()))
            .collect();
        for (piv, row) in &echelon {
            if !v[*piv].is_zero() {
                let f = &v[*piv] / &row[*piv];
                for (x, r) in v.iter_mut().zip(row) {
                    *x -= &f * r;
                }
            }
        }
        if let Some(piv) = v.iter().position(|x| !x.is_zero()) {
            echelon.push((piv, v));
            chosen.push(c.x);
        }
    }
    if chosen.len() < n {
        return Err(Error::InsufficientRank {
            rank: chosen.len(),
            needed: n,
        });
    }
    chosen.sort_unstable();
    MachinFormula::new(basis.clone(), chosen)
}

/// Basis values `alpha_i` within `2^-bits`: `log p_i`, or `2 atan(b_j / a_j)`.
pub fn basis_values(basis: &Basis, bits: u64) -> Result<Vec<FixedPoint>> {
    match basis.kind() {
        BasisKind::Atan => {
            let values = if basis.is_standard() && basis.len() <= max_builtin_n(BasisKind::Atan) {
                eval_basis(
                    builtin_formula(BasisKind::Atan, basis.len())?.as_ref(),
                    bits + 1,
                )
            } else {
                let f = find_formula(basis, &find_candidates(basis, 1_000_000))?;
                eval_basis(&f, bits + 1)
            };
            Ok(values.into_iter().map(|v| v.mul_pow2(1)).collect())
        }
        BasisKind::Log => {
            let top = *basis
                .primes()
                .last()
                .ok_or(Error::Domain("empty basis".into()))?;
            let all = first_primes(top as usize + 1);
            let all: Vec<u64> = all.into_iter().filter(|&p| p <= top).collect();
            let k = all.len().min(max_builtin_n(BasisKind::Log));
            let f = builtin_formula(BasisKind::Log, k)?;
            let mut known: BTreeMap<u64, FixedPoint> = all[..k]
                .iter()
                .copied()
                .zip(eval_basis(&f, bits + 4))
                .collect();
            for &p in &all[k..] {
                let v = log_prime_incremental(p, &known, bits + 4)?;
                known.insert(p, v);
            }
            Ok(basis
                .primes()
                .iter()
                .map(|p| known[p].round_frac_bits(bits))
                .collect())
        }
    }
}
