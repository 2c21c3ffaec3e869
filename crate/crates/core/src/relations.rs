//! Approximate integer relations among basis values and argument reduction.
//!
//! Phase 1 ([`generate_table`]) finds relations `eps_i = sum_j d_ij alpha_j`
//! with `|eps_i|` shrinking by about a factor `C` per step, using LLL on a
//! scaled identity-plus-column lattice. Phase 2 ([`reduce`]) writes
//! `x = sum_i c_i alpha_i + t` by subtracting nearest multiples of each
//! `eps_i` in turn.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::machin;

use crate::error::{Error, Result};
use crate::fixedpoint::FixedPoint;
use crate::lattice::{lll_reduce, lll_reduce_unsorted, Delta, IntMatrix};

/// Which family of constants a basis holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasisKind {
    /// `alpha_i = log p_i` for rational primes.
    Log,
    /// `alpha_j = 2 atan(b_j / a_j)` for Gaussian primes `a_j + b_j i`.
    Atan,
}

impl BasisKind {
    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Log => "log",
            BasisKind::Atan => "atan",
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasisKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "log" => Ok(BasisKind::Log),
            "atan" => Ok(BasisKind::Atan),
            other => Err(Error::Parse(format!("unknown basis kind '{other}'"))),
        }
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// The first `n` rational primes.
pub fn first_primes(n: usize) -> Vec<u64> {
    (2..).filter(|&p| is_prime(p)).take(n).collect()
}

/// The first `n` Gaussian primes up to units and conjugation, ordered by
/// norm, as first-quadrant representatives `(a, b)` with `a >= b > 0`.
pub fn first_gaussian_primes(n: usize) -> Vec<(u64, u64)> {
    let mut out = Vec::with_capacity(n);
    let mut q = 2u64;
    while out.len() < n {
        if is_prime(q) && (q == 2 || q % 4 == 1) {
            let mut b = 1;
            while 2 * b * b <= q {
                let a2 = q - b * b;
                let a = (a2 as f64).sqrt().round() as u64;
                if a * a == a2 {
                    out.push((a, b));
                    break;
                }
                b += 1;
            }
        }
        q += 1;
    }
    out
}

/// An ordered set of primes whose logarithms or angles are the basis values.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Basis {
    kind: BasisKind,
    primes: Vec<u64>,
    gaussian: Vec<(u64, u64)>,
}

impl Basis {
    /// Logarithms of an increasing list of primes starting with 2.
    pub fn log(primes: Vec<u64>) -> Result<Basis> {
        if primes.first() != Some(&2) {
            return Err(Error::Domain("a log basis must start with 2".into()));
        }
        if !primes.windows(2).all(|w| w[0] < w[1]) || !primes.iter().all(|&p| is_prime(p)) {
            return Err(Error::Domain(
                "basis primes must be increasing primes".into(),
            ));
        }
        Ok(Basis {
            kind: BasisKind::Log,
            primes,
            gaussian: vec![],
        })
    }

    /// Angles of distinct Gaussian primes `(a, b)`, `a >= b > 0`, starting with `(1, 1)`.
    pub fn atan(gaussian: Vec<(u64, u64)>) -> Result<Basis> {
        if gaussian.first() != Some(&(1, 1)) {
            return Err(Error::Domain("an atan basis must start with 1+i".into()));
        }
        for &(a, b) in &gaussian {
            if b == 0 || a < b || !is_prime(a * a + b * b) {
                return Err(Error::Domain(format!(
                    "{a}+{b}i is not a first-quadrant Gaussian prime"
                )));
            }
        }
        let norms: Vec<u64> = gaussian.iter().map(|&(a, b)| a * a + b * b).collect();
        if !norms.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Domain(
                "Gaussian primes must have increasing norms".into(),
            ));
        }
        Ok(Basis {
            kind: BasisKind::Atan,
            primes: vec![],
            gaussian,
        })
    }

    pub fn first(kind: BasisKind, n: usize) -> Basis {
        match kind {
            BasisKind::Log => Basis {
                kind,
                primes: first_primes(n),
                gaussian: vec![],
            },
            BasisKind::Atan => Basis {
                kind,
                primes: vec![],
                gaussian: first_gaussian_primes(n),
            },
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        match self.kind {
            BasisKind::Log => self.primes.len(),
            BasisKind::Atan => self.gaussian.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rational primes of a log basis (empty for atan).
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// Gaussian primes of an atan basis (empty for log).
    pub fn gaussian(&self) -> &[(u64, u64)] {
        &self.gaussian
    }

    /// `p_i` for log, `a_j^2 + b_j^2` for atan.
    pub fn norms(&self) -> Vec<u64> {
        match self.kind {
            BasisKind::Log => self.primes.clone(),
            BasisKind::Atan => self.gaussian.iter().map(|&(a, b)| a * a + b * b).collect(),
        }
    }

    /// True when this is the basis of the first `len()` primes of its kind.
    pub fn is_standard(&self) -> bool {
        *self == Basis::first(self.kind, self.len())
    }

    /// Approximate basis values in double precision.
    pub fn values_f64(&self) -> Vec<f64> {
        match self.kind {
            BasisKind::Log => self.primes.iter().map(|&p| (p as f64).ln()).collect(),
            BasisKind::Atan => self
                .gaussian
                .iter()
                .map(|&(a, b)| 2.0 * (b as f64).atan2(a as f64))
                .collect(),
        }
    }

    /// One-line description: `primes=2,3,5` or `gaussian=1+1i,2+1i`.
    pub fn describe(&self) -> String {
        match self.kind {
            BasisKind::Log => format!(
                "primes={}",
                self.primes
                    .iter()
                    .map(u64::to_string)
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            BasisKind::Atan => format!(
                "gaussian={}",
                self.gaussian
                    .iter()
                    .map(|(a, b)| format!("{a}+{b}i"))
                    .collect::<Vec<_>>()
                    .join(",")
            ),
        }
    }

    fn parse_description(kind: BasisKind, line: &str) -> Result<Basis> {
        let bad = || Error::Parse(format!("bad basis line '{line}'"));
        let (key, list) = line.trim().split_once('=').ok_or_else(bad)?;
        match (kind, key) {
            (BasisKind::Log, "primes") => {
                let primes = list
                    .split(',')
                    .map(|s| s.trim().parse::<u64>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?;
                Basis::log(primes)
            }
            (BasisKind::Atan, "gaussian") => {
                let gs = list
                    .split(',')
                    .map(|s| {
                        let s = s.trim().strip_suffix('i').ok_or_else(bad)?;
                        let (a, b) = s.split_once('+').ok_or_else(bad)?;
                        Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Basis::atan(gs)
            }
            _ => Err(bad()),
        }
    }
}

/// `sum |c_i| log2(norm_i)`, skipping the free first element (2 or 1+i).
pub fn weighted_norm(coeffs: &[i64], basis: &Basis) -> f64 {
    basis
        .norms()
        .iter()
        .zip(coeffs)
        .skip(1)
        .map(|(&q, &c)| c.unsigned_abs() as f64 * (q as f64).log2())
        .sum()
}

/// Expected coefficient size after reducing to `r` bits:
/// `C^(1/n+1) / (C^(1/n) - 1) * (2^(r/n) - 1)`.
pub fn coeff_growth_estimate(c: f64, n: usize, r: f64) -> f64 {
    let n = n as f64;
    c.powf(1.0 / n + 1.0) / (c.powf(1.0 / n) - 1.0) * ((r / n).exp2() - 1.0)
}

/// How the basis column of the lattice is scaled at step `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scaling {
    /// `round(C^i alpha_j)`.
    Decimal,
    /// `trunc(2^floor(i log2 C) alpha_j)`.
    Binary,
}

/// Which reduced lattice row becomes the relation of a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    /// The first reduced vector; the step is skipped if it does not improve.
    /// When it undershoots the previous error by more than `C^steps`, the
    /// smallest row above that floor is taken instead, if there is one.
    FirstVector,
    /// The smallest `|eps|` below the previous one, preferring rows that do
    /// not undershoot `C^-(i+1)`.
    SmallestEpsilon,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TableOptions {
    pub scaling: Scaling,
    pub selection: Selection,
    pub delta: Delta,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions {
            scaling: Scaling::Binary,
            selection: Selection::FirstVector,
            delta: Delta::DEFAULT,
        }
    }
}

pub const DEFAULT_C: f64 = 10.0;
pub const DEFAULT_COEFF_LIMIT: i64 = 1 << 15;

#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    /// LLL step that produced the relation.
    pub step: usize,
    pub coeffs: Vec<i64>,
    pub epsilon: f64,
    pub epsilon_exact: FixedPoint,
}

impl Relation {
    fn new(step: usize, coeffs: Vec<i64>, values: &[FixedPoint]) -> Relation {
        let epsilon_exact = combine(&coeffs, values);
        Relation {
            step,
            epsilon: epsilon_exact.to_f64(),
            coeffs,
            epsilon_exact,
        }
    }
}

/// `sum c_j alpha_j`, exact at the precision of `values`.
pub fn combine(coeffs: &[i64], values: &[FixedPoint]) -> FixedPoint {
    let bits = values.first().map_or(0, FixedPoint::frac_bits);
    coeffs
        .iter()
        .zip(values)
        .filter(|(&c, _)| c != 0)
        .fold(FixedPoint::zero(bits), |acc, (&c, v)| {
            acc.add(&v.mul_int(c))
        })
}

#[derive(Clone, Debug)]
pub struct RelationTable {
    pub basis: Basis,
    pub c: f64,
    pub coeff_limit: i64,
    pub relations: Vec<Relation>,
    /// Generation hit `coeff_limit` before reaching its target.
    pub truncated: bool,
    values: Vec<FixedPoint>,
}

impl RelationTable {
    /// Basis values at table precision.
    pub fn values(&self) -> &[FixedPoint] {
        &self.values
    }

    pub fn precision(&self) -> u64 {
        self.values.first().map_or(0, FixedPoint::frac_bits)
    }

    /// `-log2 |eps|` of the last relation: the depth a reduction can reach.
    pub fn depth_bits(&self) -> f64 {
        self.relations
            .last()
            .map_or(0.0, |r| -r.epsilon_exact.log2_abs())
    }

    /// The same relations with `eps` recomputed from `values`, typically at a
    /// higher precision than the table was built or loaded with.
    pub fn with_values(&self, values: Vec<FixedPoint>) -> Result<RelationTable> {
        if values.len() != self.basis.len() {
            return Err(Error::Domain(format!(
                "{} values for a basis of {}",
                values.len(),
                self.basis.len()
            )));
        }
        let mut relations = Vec::with_capacity(self.relations.len());
        for r in &self.relations {
            let rel = Relation::new(r.step, r.coeffs.clone(), &values);
            if (rel.epsilon - r.epsilon).abs() > 1e-9 * r.epsilon.abs() {
                return Err(Error::Verification(format!(
                    "relation i={} disagrees with the new basis values",
                    r.step
                )));
            }
            relations.push(rel);
        }
        Ok(RelationTable {
            relations,
            values,
            ..self.clone()
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "relation-table v1; kind={}; n={}; C={}; coeff_limit={}\n{}\n",
            self.basis.kind(),
            self.basis.len(),
            self.c,
            self.coeff_limit,
            self.basis.describe()
        );
        for r in &self.relations {
            let d: Vec<String> = r.coeffs.iter().map(i64::to_string).collect();
            out.push_str(&format!(
                "i={} eps={} d={}\n",
                r.step,
                r.epsilon_exact.to_sci(20),
                d.join(",")
            ));
        }
        out
    }

    /// Parse a table and recompute every `eps` from basis values at `bits`.
    /// Printed `eps` values must agree with the recomputed ones.
    pub fn from_text(text: &str, bits: u64) -> Result<RelationTable> {
        RelationTable::parse(text, |b| machin::basis_values(b, bits))
    }

    /// Parse a table against already computed basis values.
    pub fn from_text_with_values(
        text: &str,
        basis: &Basis,
        values: Vec<FixedPoint>,
    ) -> Result<RelationTable> {
        RelationTable::parse(text, |b| {
            if b != basis {
                return Err(Error::Parse(format!(
                    "table basis {} differs from {}",
                    b.describe(),
                    basis.describe()
                )));
            }
            if values.len() != b.len() {
                return Err(Error::Domain(format!(
                    "{} values for a basis of {}",
                    values.len(),
                    b.len()
                )));
            }
            Ok(values.clone())
        })
    }

    fn parse<F>(text: &str, values_for: F) -> Result<RelationTable>
    where
        F: FnOnce(&Basis) -> Result<Vec<FixedPoint>>,
    {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty relation table".into()))?;
        let mut fields = header.split(';').map(str::trim);
        if fields.next() != Some("relation-table v1") {
            return Err(Error::Parse(format!("bad table header '{header}'")));
        }
        let (mut kind, mut n, mut c, mut limit) = (None, None, None, None);
        for f in fields {
            let (k, v) = f
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad field '{f}'")))?;
            let bad = || Error::Parse(format!("bad value in '{f}'"));
            match k {
                "kind" => kind = Some(v.parse::<BasisKind>()?),
                "n" => n = Some(v.parse::<usize>().map_err(|_| bad())?),
                "C" => c = Some(v.parse::<f64>().map_err(|_| bad())?),
                "coeff_limit" => limit = Some(v.parse::<i64>().map_err(|_| bad())?),
                _ => return Err(Error::Parse(format!("unknown field '{k}'"))),
            }
        }
        let missing = |k: &str| Error::Parse(format!("table header lacks {k}"));
        let kind = kind.ok_or_else(|| missing("kind"))?;
        let n = n.ok_or_else(|| missing("n"))?;
        let c = c.ok_or_else(|| missing("C"))?;
        let coeff_limit = limit.ok_or_else(|| missing("coeff_limit"))?;
        let basis_line = lines.next().ok_or_else(|| missing("a basis line"))?;
        let basis = Basis::parse_description(kind, basis_line)?;
        if basis.len() != n {
            return Err(Error::Parse(format!(
                "basis has {} primes, header says {n}",
                basis.len()
            )));
        }
        let values = values_for(&basis)?;
        let mut relations = Vec::new();
        for line in lines {
            let bad = || Error::Parse(format!("bad relation line '{line}'"));
            let mut step = None;
            let mut eps = None;
            let mut coeffs = None;
            for part in line.split_whitespace() {
                let (k, v) = part.split_once('=').ok_or_else(bad)?;
                match k {
                    "i" => step = Some(v.parse::<usize>().map_err(|_| bad())?),
                    "eps" => eps = Some(v.parse::<f64>().map_err(|_| bad())?),
                    "d" => {
                        coeffs = Some(
                            v.split(',')
                                .map(|x| x.parse::<i64>().map_err(|_| bad()))
                                .collect::<Result<Vec<_>>>()?,
                        )
                    }
                    _ => return Err(bad()),
                }
            }
            let (step, eps, coeffs) = (
                step.ok_or_else(bad)?,
                eps.ok_or_else(bad)?,
                coeffs.ok_or_else(bad)?,
            );
            if coeffs.len() != n || coeffs.iter().all(|&d| d == 0) {
                return Err(bad());
            }
            let rel = Relation::new(step, coeffs, &values);
            if (rel.epsilon - eps).abs() > 1e-9 * eps.abs() {
                return Err(Error::Parse(format!(
                    "relation i={step}: printed eps {eps:e} but coefficients give {:e}",
                    rel.epsilon
                )));
            }
            relations.push(rel);
        }
        if !relations
            .windows(2)
            .all(|w| w[1].epsilon.abs() < w[0].epsilon.abs())
        {
            return Err(Error::Parse(
                "relation errors must strictly decrease".into(),
            ));
        }
        Ok(RelationTable {
            basis,
            c,
            coeff_limit,
            relations,
            truncated: false,
            values,
        })
    }

    /// Build a table from explicit coefficient vectors, dropping any row whose
    /// `|eps|` does not improve on the previous kept row.
    pub fn from_coeffs(
        basis: Basis,
        c: f64,
        rows: &[Vec<i64>],
        bits: u64,
    ) -> Result<RelationTable> {
        let values = machin::basis_values(&basis, bits)?;
        let mut relations: Vec<Relation> = Vec::new();
        for (k, d) in rows.iter().enumerate() {
            if d.len() != basis.len() {
                return Err(Error::Domain(format!(
                    "row {} has {} coefficients",
                    k + 1,
                    d.len()
                )));
            }
            let rel = Relation::new(k + 1, d.clone(), &values);
            if rel.epsilon_exact.is_zero() {
                continue;
            }
            if let Some(prev) = relations.last() {
                if rel
                    .epsilon_exact
                    .abs()
                    .cmp_value(&prev.epsilon_exact.abs())
                    .is_ge()
                {
                    continue;
                }
            }
            relations.push(rel);
        }
        let coeff_limit = rows.iter().flatten().map(|d| d.abs()).max().unwrap_or(0);
        Ok(RelationTable {
            basis,
            c,
            coeff_limit,
            relations,
            truncated: false,
            values,
        })
    }
}

/// Bits of basis-value precision [`generate_table`] uses for a target depth.
pub fn table_precision(c: f64, r_target: u64) -> u64 {
    r_target + 64 + 8 * c.log2().ceil() as u64
}

/// Phase 1 with default options, computing basis values itself.
pub fn generate_table(
    basis: &Basis,
    c: f64,
    r_target: u64,
    coeff_limit: i64,
) -> Result<RelationTable> {
    let values = machin::basis_values(basis, table_precision(c, r_target))?;
    generate_table_with(
        basis,
        &values,
        c,
        r_target,
        coeff_limit,
        &TableOptions::default(),
    )
}

/// Phase 1: for `i = 1, 2, ...` LLL-reduce the rows `(e_j, scale_i(alpha_j))`
/// and keep one relation per step until `|eps| < 2^-r_target`.
pub fn generate_table_with(
    basis: &Basis,
    values: &[FixedPoint],
    c: f64,
    r_target: u64,
    coeff_limit: i64,
    opts: &TableOptions,
) -> Result<RelationTable> {
    let n = basis.len();
    if !(c > 1.0) || !c.is_finite() {
        return Err(Error::Domain(format!(
            "convergence factor C = {c} must exceed 1"
        )));
    }
    if n < 2 {
        return Err(Error::Domain(
            "a relation table needs at least two basis values".into(),
        ));
    }
    if values.len() != n {
        return Err(Error::Domain(format!(
            "{} values for a basis of {n}",
            values.len()
        )));
    }
    let prec = values[0].frac_bits();
    let values: Vec<FixedPoint> = values.iter().map(|v| v.with_frac_bits(prec)).collect();
    let target = FixedPoint::new(BigInt::from(1) << prec.saturating_sub(r_target), prec);
    let log2c = c.log2();
    let exact_c = (c.fract() == 0.0 && c < 9.0e15).then(|| BigInt::from(c as u64));
    let c_fixed = FixedPoint::from_f64(c, prec);
    let mut c_pow = FixedPoint::one(prec);
    let mut relations: Vec<Relation> = Vec::new();
    let mut truncated = false;
    let max_steps = ((r_target as f64 + 64.0) / log2c).ceil() as usize * 2 + 8;
    for i in 1..=max_steps {
        let scale_bits = (i as f64 * log2c).ceil() as u64;
        if prec < scale_bits + 32 {
            return Err(Error::PrecisionExhausted {
                required: scale_bits + 32,
                available: prec,
            });
        }
        c_pow = c_pow.mul(&c_fixed, prec);
        let column: Vec<BigInt> = match opts.scaling {
            Scaling::Decimal => match &exact_c {
                Some(ci) => {
                    let p = num_traits::pow(ci.clone(), i);
                    values
                        .iter()
                        .map(|v| v.mul_bigint(&p).round_to_int())
                        .collect()
                }
                None => values
                    .iter()
                    .map(|v| v.mul(&c_pow, prec).round_to_int())
                    .collect(),
            },
            Scaling::Binary => {
                let s = (i as f64 * log2c).floor() as u64;
                values
                    .iter()
                    .map(|v| v.mul_pow2(s as i64).with_frac_bits(0).into_mantissa())
                    .collect()
            }
        };
        let mut m = IntMatrix::zeros(n, n + 1);
        for j in 0..n {
            m[(j, j)] = BigInt::from(1);
            m[(j, n)] = column[j].clone();
        }
        let reduced = match opts.selection {
            Selection::FirstVector => lll_reduce_unsorted(&m, opts.delta)?,
            Selection::SmallestEpsilon => lll_reduce(&m, opts.delta)?,
        };
        let prev = relations.last().map(|r| r.epsilon_exact.abs());
        let improves = |e: &FixedPoint| {
            !e.is_zero() && prev.as_ref().is_none_or(|p| e.abs().cmp_value(p).is_lt())
        };
        let mut candidates: Vec<Candidate> = Vec::new();
        for row in reduced.row_vecs() {
            let d: Option<Vec<i64>> = row[..n].iter().map(|x| x.to_i64()).collect();
            let Some(d) = d else {
                candidates.push((vec![], FixedPoint::zero(prec), false));
                continue;
            };
            if d.iter().all(|&x| x == 0) {
                continue;
            }
            let within = d.iter().all(|x| x.abs() <= coeff_limit);
            let eps = combine(&d, &values);
            candidates.push((d, eps, within));
        }
        let chosen = match opts.selection {
            Selection::FirstVector => match candidates.first() {
                None => None,
                Some((_, _, false)) => {
                    truncated = true;
                    break;
                }
                Some((d, e, true)) if improves(e) => {
                    let floor = relations.last().map(|r| {
                        let gap = c.powi((i - r.step) as i32);
                        FixedPoint::from_f64(r.epsilon.abs() / gap, prec)
                    });
                    let alternative =
                        floor
                            .filter(|f| e.abs().cmp_value(f).is_lt())
                            .and_then(|f| {
                                candidates[1..]
                                    .iter()
                                    .filter(|(d, a, ok)| {
                                        *ok && !d.is_empty()
                                            && improves(a)
                                            && a.abs().cmp_value(&f).is_ge()
                                    })
                                    .min_by(|a, b| a.1.abs().cmp_value(&b.1.abs()))
                            });
                    Some(alternative.map_or((d.clone(), e.clone()), |a| (a.0.clone(), a.1.clone())))
                }
                Some(_) => None,
            },
            Selection::SmallestEpsilon => {
                let better: Vec<&Candidate> = candidates
                    .iter()
                    .filter(|(d, e, _)| !d.is_empty() && improves(e))
                    .collect();
                let ok: Vec<&Candidate> = better.iter().copied().filter(|c| c.2).collect();
                if !better.is_empty() && ok.is_empty() {
                    truncated = true;
                    break;
                }
                let floor = FixedPoint::from_f64(c.powi(-(i as i32) - 1), prec);
                let (inside, below): (Vec<&Candidate>, Vec<&Candidate>) = ok
                    .into_iter()
                    .partition(|c| c.1.abs().cmp_value(&floor).is_ge());
                let by_size = |a: &&Candidate, b: &&Candidate| a.1.abs().cmp_value(&b.1.abs());
                let pick = if inside.is_empty() {
                    below.into_iter().max_by(by_size)
                } else {
                    inside.into_iter().min_by(by_size)
                };
                pick.map(|c| (c.0.clone(), c.1.clone()))
            }
        };
        if let Some((mut d, mut e)) = chosen {
            if e.is_negative() {
                d.iter_mut().for_each(|x| *x = -*x);
                e = -&e;
            }
            let done = e.cmp_value(&target).is_lt();
            relations.push(Relation {
                step: i,
                epsilon: e.to_f64(),
                coeffs: d,
                epsilon_exact: e,
            });
            if done {
                return Ok(RelationTable {
                    basis: basis.clone(),
                    c,
                    coeff_limit,
                    relations,
                    truncated,
                    values,
                });
            }
        }
        if i == max_steps {
            truncated = true;
        }
    }
    Ok(RelationTable {
        basis: basis.clone(),
        c,
        coeff_limit,
        relations,
        truncated,
        values,
    })
}

type Candidate = (Vec<i64>, FixedPoint, bool);

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionResult {
    pub coeffs: Vec<i64>,
    pub residual: FixedPoint,
    /// `-log2 |t|`, infinite for an exact zero.
    pub achieved_r: f64,
    pub norm: f64,
    /// The norm limit stopped the reduction before `2^-r_target` was reached.
    pub norm_limited: bool,
    /// `(relation index, multiple)` for every nonzero step taken.
    pub steps: Vec<(usize, i64)>,
}

/// Phase 2: subtract `round(x / eps_i) * eps_i` for each relation in turn.
///
/// The running residual is tracked in double precision and recomputed exactly
/// whenever the accumulated rounding error could exceed `2^-40` of its size.
pub fn reduce(
    x: &FixedPoint,
    table: &RelationTable,
    r_target: u64,
    norm_limit: f64,
) -> ReductionResult {
    let n = table.basis.len();
    let prec = table.precision().max(x.frac_bits());
    let mut exact = x.with_frac_bits(prec);
    let mut coeffs = vec![0i64; n];
    let mut shadow = exact.to_f64();
    let mut err = 0.0f64;
    let mut pending: Vec<(usize, i64)> = Vec::new();
    let mut steps = Vec::new();
    let mut norm = 0.0;
    let mut norm_limited = false;
    let goal = (-(r_target as f64)).exp2();
    let refresh = |exact: &mut FixedPoint, pending: &mut Vec<(usize, i64)>| {
        for (k, m) in pending.drain(..) {
            *exact = exact.sub(&table.relations[k].epsilon_exact.mul_int(m));
        }
        exact.to_f64()
    };
    for (k, rel) in table.relations.iter().enumerate() {
        if shadow.abs() < goal {
            shadow = refresh(&mut exact, &mut pending);
            err = 0.0;
            if exact.log2_abs() < -(r_target as f64) {
                break;
            }
        }
        let m = (shadow / rel.epsilon).round();
        if m == 0.0 || !m.is_finite() {
            continue;
        }
        let m = m as i64;
        let next: Vec<i64> = coeffs
            .iter()
            .zip(&rel.coeffs)
            .map(|(c, d)| c + m * d)
            .collect();
        let next_norm = weighted_norm(&next, &table.basis);
        if next_norm > norm_limit {
            norm_limited = true;
            break;
        }
        coeffs = next;
        norm = next_norm;
        let step = m as f64 * rel.epsilon;
        err += step.abs() * f64::EPSILON + shadow.abs() * f64::EPSILON;
        shadow -= step;
        pending.push((k, m));
        steps.push((k, m));
        if err > shadow.abs().max(goal) * (-40f64).exp2() {
            shadow = refresh(&mut exact, &mut pending);
            err = 0.0;
        }
    }
    refresh(&mut exact, &mut pending);
    let achieved_r = -exact.log2_abs();
    ReductionResult {
        coeffs,
        residual: exact,
        achieved_r,
        norm,
        norm_limited,
        steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn log13() -> &'static RelationTable {
        static T: OnceLock<RelationTable> = OnceLock::new();
        T.get_or_init(|| {
            generate_table(
                &Basis::first(BasisKind::Log, 13),
                10.0,
                100,
                DEFAULT_COEFF_LIMIT,
            )
            .unwrap()
        })
    }

    fn same_up_to_sign(a: &[i64], b: &[i64]) -> bool {
        a == b || a.iter().zip(b).all(|(x, y)| *x == -*y)
    }

    #[test]
    fn basis_construction() {
        assert_eq!(first_primes(6), vec![2, 3, 5, 7, 11, 13]);
        assert_eq!(
            first_gaussian_primes(5),
            vec![(1, 1), (2, 1), (3, 2), (4, 1), (5, 2)]
        );
        assert!(Basis::log(vec![3, 5]).is_err());
        assert!(Basis::log(vec![2, 5, 3]).is_err());
        assert!(Basis::log(vec![2, 9]).is_err());
        assert!(Basis::atan(vec![(2, 1)]).is_err());
        assert!(Basis::atan(vec![(1, 1), (1, 2)]).is_err());
        assert!(Basis::atan(vec![(1, 1), (3, 2), (2, 1)]).is_err());
        let b = Basis::first(BasisKind::Atan, 3);
        assert_eq!(b.describe(), "gaussian=1+1i,2+1i,3+2i");
        assert_eq!(
            Basis::parse_description(BasisKind::Atan, &b.describe()).unwrap(),
            b
        );
        assert!((b.values_f64()[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn weighted_norm_examples() {
        let b = Basis::first(BasisKind::Log, 2);
        assert_eq!(weighted_norm(&[0, 0], &b), 0.0);
        assert!((weighted_norm(&[100, 2], &b) - 3.169925).abs() < 1e-6);
        let b13 = Basis::first(BasisKind::Log, 13);
        let c = [
            -274, -414, -187, -314, -211, 651, -392, 463, -36, -369, -231, 634, 0,
        ];
        let nu = weighted_norm(&c, &b13);
        assert!((nu - 15082.54).abs() < 0.01, "{nu}");
        // the free power of two still lands in the product: 7679 + 7678 bits
        let p = crate::powerprod::pow_product(b13.primes(), &c);
        let bits = (p.num.bits() + p.den.bits()) as f64;
        assert_eq!(bits, 15357.0);
        assert!((nu + 274.0 - bits).abs() <= 13.0);
    }

    #[test]
    fn growth_estimate_examples() {
        assert_eq!(coeff_growth_estimate(10.0, 13, 0.0), 0.0);
        let e = std::f64::consts::E;
        let direct = e * e / (e - 1.0) * 1023.0;
        assert!((coeff_growth_estimate(e, 1, 10.0) - direct).abs() < 1e-9);
        assert!((direct - 4398.7).abs() < 0.5);
    }

    #[test]
    fn growth_estimate_against_reductions() {
        let t = log13();
        let est = coeff_growth_estimate(10.0, 13, 100.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        use rand::{Rng, SeedableRng};
        let mut worst = 0i64;
        for _ in 0..100 {
            let x = FixedPoint::from_f64(rng.gen_range(-0.35..0.35), 256);
            let r = reduce(&x, t, 100, f64::INFINITY);
            worst = worst.max(r.coeffs.iter().map(|c| c.abs()).max().unwrap());
        }
        let ratio = est / worst as f64;
        assert!(
            (0.1..=10.0).contains(&ratio),
            "estimate {est}, observed {worst}"
        );
    }

    #[test]
    fn log13_table_examples() {
        let t = log13();
        let first = &t.relations[0];
        assert_eq!(first.step, 1);
        assert!(same_up_to_sign(
            &first.coeffs,
            &[0, 0, 0, 0, -1, 1, 0, 0, 0, 0, 0, 0, 0]
        ));
        assert!((first.epsilon - 0.16705).abs() < 1e-4);
        let seventh = &t.relations[6];
        assert!(same_up_to_sign(
            &seventh.coeffs,
            &[1, -1, 0, 1, 1, 2, -1, 0, -2, 1, -1, -1, 1]
        ));
        assert!((seventh.epsilon / 3.2315e-8 - 1.0).abs() < 1e-4);
        assert!(t.relations.len() <= 32);
        assert!(t.depth_bits() > 100.0);
        assert!(!t.truncated);
    }

    #[test]
    fn table_invariants() {
        for t in [
            log13().clone(),
            generate_table(
                &Basis::first(BasisKind::Atan, 6),
                10.0,
                80,
                DEFAULT_COEFF_LIMIT,
            )
            .unwrap(),
        ] {
            assert!(t
                .relations
                .windows(2)
                .all(|w| w[1].epsilon.abs() < w[0].epsilon.abs()));
            assert!(t.relations.iter().all(|r| r.coeffs.iter().any(|&d| d != 0)));
            assert!(t
                .relations
                .iter()
                .all(|r| r.coeffs.iter().all(|d| d.abs() <= t.coeff_limit)));
            // against values computed independently at a higher precision
            let p = t.precision();
            let fine = machin::basis_values(&t.basis, p + 64).unwrap();
            for r in &t.relations {
                let d = combine(&r.coeffs, &fine).sub(&r.epsilon_exact);
                let slack = r.coeffs.iter().map(|c| c.unsigned_abs()).sum::<u64>() + 1;
                assert!(
                    d.log2_abs() <= (slack as f64).log2() - p as f64,
                    "i={}",
                    r.step
                );
            }
        }
    }

    #[test]
    fn two_prime_table_near_optimal() {
        let b = Basis::first(BasisKind::Log, 2);
        let t = generate_table(&b, 2.0, 40, DEFAULT_COEFF_LIMIT).unwrap();
        let (l2, l3) = (2f64.ln(), 3f64.ln());
        assert!(t.relations.len() >= 4);
        for r in &t.relations {
            let bound = r.coeffs.iter().map(|d| d.abs()).max().unwrap();
            let mut best = f64::INFINITY;
            for d1 in -bound..=bound {
                // only d2 near the line d1 l2 + d2 l3 = 0 matters
                let center = (-(d1 as f64) * l2 / l3).round() as i64;
                for d2 in (center - 1).max(-bound)..=(center + 1).min(bound) {
                    if (d1, d2) != (0, 0) {
                        best = best.min((d1 as f64 * l2 + d2 as f64 * l3).abs());
                    }
                }
            }
            assert!(
                r.epsilon.abs() <= 4.0 * best,
                "i={} eps={:e} best={best:e}",
                r.step,
                r.epsilon
            );
        }
    }

    #[test]
    fn selection_variants_meet_target() {
        let b = Basis::first(BasisKind::Log, 8);
        let v = machin::basis_values(&b, table_precision(10.0, 60)).unwrap();
        for scaling in [Scaling::Decimal, Scaling::Binary] {
            for selection in [Selection::FirstVector, Selection::SmallestEpsilon] {
                let opts = TableOptions {
                    scaling,
                    selection,
                    delta: Delta::DEFAULT,
                };
                let t = generate_table_with(&b, &v, 10.0, 60, DEFAULT_COEFF_LIMIT, &opts).unwrap();
                assert!(t.depth_bits() > 60.0, "{scaling:?} {selection:?}");
                assert!(t
                    .relations
                    .windows(2)
                    .all(|w| w[1].epsilon.abs() < w[0].epsilon.abs()));
            }
        }
        let e = 1.5f64;
        let t = generate_table_with(&b, &v, e, 30, DEFAULT_COEFF_LIMIT, &TableOptions::default())
            .unwrap();
        assert!(t.depth_bits() > 30.0);
    }

    #[test]
    fn generation_errors() {
        let b = Basis::first(BasisKind::Log, 5);
        let coarse = machin::basis_values(&b, 64).unwrap();
        let opts = TableOptions::default();
        assert!(matches!(
            generate_table_with(&b, &coarse, 10.0, 100, DEFAULT_COEFF_LIMIT, &opts),
            Err(Error::PrecisionExhausted { .. })
        ));
        assert!(generate_table_with(&b, &coarse, 1.0, 10, 100, &opts).is_err());
        let one = Basis::first(BasisKind::Log, 1);
        assert!(generate_table(&one, 10.0, 10, 100).is_err());
        let t = generate_table(&b, 10.0, 200, 8).unwrap();
        assert!(t.truncated);
        assert!(t
            .relations
            .iter()
            .all(|r| r.coeffs.iter().all(|d| d.abs() <= 8)));
    }

    #[test]
    fn text_round_trip() {
        let t = log13();
        let text = t.to_text();
        assert!(text.starts_with(
            "relation-table v1; kind=log; n=13; C=10; coeff_limit=32768\nprimes=2,3,5,"
        ));
        let back = RelationTable::from_text(&text, t.precision()).unwrap();
        assert_eq!(back.relations, t.relations);
        assert_eq!(back.to_text(), text);
        let bad = text.replace("eps=1.67", "eps=1.68");
        assert!(matches!(
            RelationTable::from_text(&bad, 200),
            Err(Error::Parse(_))
        ));
        assert!(RelationTable::from_text("relation-table v2; kind=log", 200).is_err());
        let finer = t
            .with_values(machin::basis_values(&t.basis, 600).unwrap())
            .unwrap();
        assert_eq!(finer.precision(), 600);
        assert_eq!(finer.relations[3].coeffs, t.relations[3].coeffs);
    }

    #[test]
    fn reduce_examples() {
        let t = log13();
        let z = reduce(&FixedPoint::zero(200), t, 100, f64::INFINITY);
        assert!(z.coeffs.iter().all(|&c| c == 0) && z.residual.is_zero());
        assert!(z.achieved_r.is_infinite());
        let log3 = t.values()[1].clone();
        let r = reduce(&log3.sub(&t.values()[0]), t, 100, f64::INFINITY);
        assert!(r.achieved_r > 100.0);
        let mut c = r.coeffs.clone();
        c[0] += 1;
        let sum = combine(&c, t.values()).add(&r.residual);
        assert_eq!(sum.cmp_value(&log3), std::cmp::Ordering::Equal);
    }

    #[test]
    fn norm_limit_stops_early() {
        let t = log13();
        let x = FixedPoint::from_f64(0.3, 200);
        let free = reduce(&x, t, 100, f64::INFINITY);
        let capped = reduce(&x, t, 100, free.norm / 2.0);
        assert!(capped.norm_limited);
        assert!(capped.norm <= free.norm / 2.0);
        assert!(capped.achieved_r < free.achieved_r);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn reduction_identity_and_progress(v in -0.999f64..0.999) {
            let t = log13();
            let x = FixedPoint::from_f64(v, 300);
            let r = reduce(&x, t, 100, f64::INFINITY);
            // exact against the table's own values
            let back = combine(&r.coeffs, t.values()).add(&r.residual);
            prop_assert_eq!(back.cmp_value(&x), std::cmp::Ordering::Equal);
            prop_assert!(r.achieved_r >= 100.0);
            prop_assert_eq!(r.norm, weighted_norm(&r.coeffs, &t.basis));
            // replay: no step grows the residual by more than eps/2
            let mut cur = x.clone();
            for &(k, m) in &r.steps {
                let e = &t.relations[k].epsilon_exact;
                let next = cur.sub(&e.mul_int(m));
                let half = e.abs().div_int(2);
                prop_assert!(next.abs().cmp_value(&cur.abs().add(&half)).is_le());
                prop_assert!(next.abs().cmp_value(&half.add(&FixedPoint::new(BigInt::from(1), 300))).is_le());
                cur = next;
            }
            prop_assert_eq!(cur, r.residual);
        }
    }
}
