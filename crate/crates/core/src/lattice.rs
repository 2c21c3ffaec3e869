//! Exact integer lattice reduction for the small relation-finding bases.
//!
//! The reduction keeps every Gram–Schmidt quantity as an integer
//! (Gram determinants `d_i` and scaled coefficients `lambda_ij = d_j mu_ij`),
//! so no floating point is involved and all divisions are exact.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Dense row-major integer matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<BigInt>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<BigInt>) -> Self {
        assert_eq!(
            entries.len(),
            rows * cols,
            "entry count must be rows * cols"
        );
        IntMatrix {
            rows,
            cols,
            entries,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix::new(rows, cols, vec![BigInt::zero(); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    pub fn from_rows<T: Into<BigInt> + Clone>(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            entries.extend(r.iter().cloned().map(Into::into));
        }
        IntMatrix::new(rows.len(), cols, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Determinant of a square matrix by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> BigInt {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        let mut a = self.row_vecs();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n {
            if a[k][k].is_zero() {
                match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                    Some(i) => {
                        a.swap(i, k);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                    a[i][j] = v / &prev;
                }
            }
            prev = a[k][k].clone();
        }
        sign * &a[n - 1][n - 1]
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = BigInt;
    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.entries[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.entries[i * self.cols + j]
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Lovász parameter as a fraction `num/den` in (1/4, 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Delta {
    pub num: u32,
    pub den: u32,
}

impl Delta {
    pub const DEFAULT: Delta = Delta { num: 99, den: 100 };

    pub fn new(num: u32, den: u32) -> Self {
        assert!(
            4 * num > den && num < den,
            "delta must lie strictly between 1/4 and 1"
        );
        Delta { num, den }
    }
}

impl Default for Delta {
    fn default() -> Self {
        Delta::DEFAULT
    }
}

fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[BigInt]) -> BigInt {
    dot(a, a)
}

/// Nearest integer to `a / b` for `b > 0`, ties rounded up.
fn round_div(a: &BigInt, b: &BigInt) -> BigInt {
    let two_a: BigInt = a << 1u32;
    (two_a + b).div_floor(&(b << 1u32))
}

struct Reducer {
    b: Vec<Vec<BigInt>>,
    // lambda[k][j] for j < k, 0-based
    lambda: Vec<Vec<BigInt>>,
    // d[0] = 1, d[i + 1] = Gram determinant of the first i + 1 rows
    d: Vec<BigInt>,
    delta: Delta,
}

impl Reducer {
    fn size_reduce(&mut self, k: usize, l: usize) {
        let dl = &self.d[l + 1];
        let twice: BigInt = self.lambda[k][l].abs() << 1u32;
        if &twice <= dl {
            return;
        }
        let q = round_div(&self.lambda[k][l], dl);
        let bl = self.b[l].clone();
        for (x, y) in self.b[k].iter_mut().zip(&bl) {
            *x -= &q * y;
        }
        let t = &q * dl;
        self.lambda[k][l] -= t;
        for i in 0..l {
            let t = &q * &self.lambda[l][i];
            self.lambda[k][i] -= t;
        }
    }

    fn swap(&mut self, k: usize, k_max: usize) {
        self.b.swap(k, k - 1);
        for j in 0..k - 1 {
            let t = std::mem::take(&mut self.lambda[k][j]);
            self.lambda[k][j] = std::mem::replace(&mut self.lambda[k - 1][j], t);
        }
        let lam = self.lambda[k][k - 1].clone();
        // d indices are shifted by one: d_k in the textbook is self.d[k + 1]
        let dk = self.d[k + 1].clone();
        let dk1 = self.d[k].clone();
        let dk2 = self.d[k - 1].clone();
        let big_b = (&dk2 * &dk + &lam * &lam) / &dk1;
        for i in k + 1..=k_max {
            let t = self.lambda[i][k].clone();
            let new_ik = (&dk * &self.lambda[i][k - 1] - &lam * &t) / &dk1;
            let new_ik1 = (&big_b * &t + &lam * &new_ik) / &dk;
            self.lambda[i][k] = new_ik;
            self.lambda[i][k - 1] = new_ik1;
        }
        self.d[k] = big_b;
    }

    fn lovasz_fails(&self, k: usize) -> bool {
        let lam = &self.lambda[k][k - 1];
        let lhs = BigInt::from(self.delta.den) * (&self.d[k + 1] * &self.d[k - 1] + lam * lam);
        let rhs = BigInt::from(self.delta.num) * &self.d[k] * &self.d[k];
        lhs < rhs
    }

    fn gram_schmidt_row(&mut self, k: usize) -> Result<()> {
        for j in 0..=k {
            let mut u = dot(&self.b[k], &self.b[j]);
            for i in 0..j {
                u = (&self.d[i + 1] * u - &self.lambda[k][i] * &self.lambda[j][i]) / &self.d[i];
            }
            if j < k {
                self.lambda[k][j] = u;
            } else {
                if u.is_zero() {
                    return Err(Error::RankDeficient);
                }
                self.d[k + 1] = u;
            }
        }
        Ok(())
    }

    fn run(&mut self) -> Result<()> {
        let n = self.b.len();
        if n == 0 {
            return Ok(());
        }
        self.d[1] = norm2(&self.b[0]);
        if self.d[1].is_zero() {
            return Err(Error::RankDeficient);
        }
        let mut k = 1;
        let mut k_max = 0;
        while k < n {
            if k > k_max {
                k_max = k;
                self.gram_schmidt_row(k)?;
            }
            loop {
                self.size_reduce(k, k - 1);
                if self.lovasz_fails(k) {
                    self.swap(k, k_max);
                    k = (k - 1).max(1);
                } else {
                    for l in (0..k.saturating_sub(1)).rev() {
                        self.size_reduce(k, l);
                    }
                    k += 1;
                    break;
                }
            }
        }
        Ok(())
    }
}

fn cmp_rows(a: &[BigInt], b: &[BigInt]) -> Ordering {
    norm2(a).cmp(&norm2(b)).then_with(|| b.cmp(a))
}

/// LLL-reduce the rows of `m` with Lovász parameter `delta`.
///
/// The reduced rows are returned sorted by Euclidean length, ties broken by
/// descending lexicographic order of the entries (so the identity is fixed).
pub fn lll_reduce(m: &IntMatrix, delta: Delta) -> Result<IntMatrix> {
    let mut rows = reduce_rows(m, delta)?;
    rows.sort_by(|a, b| cmp_rows(a, b));
    Ok(IntMatrix::from_rows(&rows))
}

/// LLL reduction without the final sort: rows come out in the order the
/// algorithm leaves them, so row 0 is its first basis vector.
pub fn lll_reduce_unsorted(m: &IntMatrix, delta: Delta) -> Result<IntMatrix> {
    Ok(IntMatrix::from_rows(&reduce_rows(m, delta)?))
}

fn reduce_rows(m: &IntMatrix, delta: Delta) -> Result<Vec<Vec<BigInt>>> {
    let n = m.rows();
    if n > m.cols() {
        return Err(Error::RankDeficient);
    }
    let mut r = Reducer {
        b: m.row_vecs(),
        lambda: (0..n).map(|k| vec![BigInt::zero(); k]).collect(),
        d: {
            let mut d = vec![BigInt::zero(); n + 1];
            d[0] = BigInt::one();
            d
        },
        delta,
    };
    r.run()?;
    Ok(r.b)
}
