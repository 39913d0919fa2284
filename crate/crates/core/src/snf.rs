//! Smith normal form over the integers, and diagonalization over `Z_m`.
//!
//! The integer form uses arbitrary precision: transform entries can outgrow any
//! fixed width even for small inputs. The simulator itself only needs the
//! word-sized modular variant.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::arith::ext_gcd;

pub type IntMatrix = Vec<Vec<BigInt>>;
pub type ModMatrix = Vec<Vec<u64>>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SnfError {
    #[error("matrix rows have inconsistent lengths")]
    Ragged,
}

/// `A = U · S · V` with `U`, `V` unimodular and `S` diagonal with `S_ii | S_{i+1,i+1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnfResult {
    pub u: IntMatrix,
    pub s: IntMatrix,
    pub v: IntMatrix,
}

impl SnfResult {
    /// Diagonal entries of `S` (length `min(rows, cols)`).
    pub fn invariant_factors(&self) -> Vec<BigInt> {
        let k = self.s.len().min(self.s.first().map_or(0, |r| r.len()));
        (0..k).map(|i| self.s[i][i].clone()).collect()
    }

    /// All three factors reduced into `[0, m)`.
    pub fn reduce_mod(&self, m: u64) -> SnfResult {
        let m = BigInt::from(m);
        let red = |x: &IntMatrix| x.iter().map(|r| r.iter().map(|v| v.mod_floor(&m)).collect()).collect();
        SnfResult { u: red(&self.u), s: red(&self.s), v: red(&self.v) }
    }
}

pub fn to_int_matrix(a: &[Vec<i64>]) -> IntMatrix {
    a.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect()
}

fn identity(k: usize) -> IntMatrix {
    (0..k).map(|i| (0..k).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect()).collect()
}

/// `q` minimizing `|a - q·p|`.
fn nearest_quotient(a: &BigInt, p: &BigInt) -> BigInt {
    let (q, r) = a.div_mod_floor(p);
    if BigInt::from(2) * r.abs() > p.abs() {
        q + 1
    } else {
        q
    }
}

struct Work {
    s: IntMatrix,
    u: IntMatrix,
    v: IntMatrix,
}

impl Work {
    // row_i -= q row_t on S; U gains col_t += q col_i.
    fn row_sub(&mut self, i: usize, t: usize, q: &BigInt) {
        let src = self.s[t].clone();
        for (d, s) in self.s[i].iter_mut().zip(&src) {
            *d -= q * s;
        }
        for r in self.u.iter_mut() {
            let ui = r[i].clone();
            r[t] += q * ui;
        }
    }

    // col_j -= q col_t on S; V gains row_t += q row_j.
    fn col_sub(&mut self, j: usize, t: usize, q: &BigInt) {
        for r in self.s.iter_mut() {
            let st = r[t].clone();
            r[j] -= q * st;
        }
        let src = self.v[j].clone();
        for (d, s) in self.v[t].iter_mut().zip(&src) {
            *d += q * s;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            self.s.swap(a, b);
            for r in self.u.iter_mut() {
                r.swap(a, b);
            }
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for r in self.s.iter_mut() {
                r.swap(a, b);
            }
            self.v.swap(a, b);
        }
    }

    fn negate_row(&mut self, i: usize) {
        for v in self.s[i].iter_mut() {
            *v = -&*v;
        }
        for r in self.u.iter_mut() {
            r[i] = -&r[i];
        }
    }
}

/// Integer Smith normal form by Euclidean pivoting. The first pivot of each step is
/// the smallest-magnitude entry of the remaining block (ties: lowest row, then
/// lowest column); later rounds only look at the pivot row and column remainders.
pub fn smith_normal_form(a: &[Vec<i64>]) -> Result<SnfResult, SnfError> {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    if a.iter().any(|r| r.len() != cols) {
        return Err(SnfError::Ragged);
    }
    let mut w = Work { s: to_int_matrix(a), u: identity(rows), v: identity(cols) };
    for t in 0..rows.min(cols) {
        let mut whole_block = true;
        loop {
            let mut best: Option<(BigInt, usize, usize)> = None;
            for i in t..rows {
                for j in t..cols {
                    if !whole_block && i != t && j != t {
                        continue;
                    }
                    let m = w.s[i][j].abs();
                    if !m.is_zero() && best.as_ref().is_none_or(|(b, _, _)| m < *b) {
                        best = Some((m, i, j));
                    }
                }
            }
            whole_block = false;
            let Some((_, pi, pj)) = best else {
                return Ok(SnfResult { u: w.u, s: w.s, v: w.v });
            };
            w.swap_rows(t, pi);
            w.swap_cols(t, pj);
            let p = w.s[t][t].clone();
            let mut clean = true;
            for i in (t + 1)..rows {
                let q = nearest_quotient(&w.s[i][t], &p);
                if !q.is_zero() {
                    w.row_sub(i, t, &q);
                }
                clean &= w.s[i][t].is_zero();
            }
            for j in (t + 1)..cols {
                let q = nearest_quotient(&w.s[t][j], &p);
                if !q.is_zero() {
                    w.col_sub(j, t, &q);
                }
                clean &= w.s[t][j].is_zero();
            }
            if !clean {
                continue;
            }
            // Divisibility: fold an offending row into the pivot row and retry.
            let bad = (t + 1..rows).find(|&i| (t + 1..cols).any(|j| !w.s[i][j].is_multiple_of(&p)));
            if let Some(i) = bad {
                w.row_sub(t, i, &BigInt::from(-1));
                whole_block = true;
                continue;
            }
            if p.is_negative() {
                w.negate_row(t);
            }
            break;
        }
    }
    Ok(SnfResult { u: w.u, s: w.s, v: w.v })
}

/// Diagonalization over `Z_m`: returns `(L, D, R)` with `L · A · R ≡ D (mod m)`,
/// `L` and `R` invertible mod `m`, and `D` diagonal. No divisibility chain is
/// enforced; callers only use `gcd(D_ii, m)`.
pub fn diagonalize_mod(a: &[Vec<u64>], m: u64) -> (ModMatrix, ModMatrix, ModMatrix) {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mi = m as i128;
    let red = |v: i128| v.rem_euclid(mi) as u64;
    let mut d: Vec<Vec<u64>> = a.iter().map(|r| r.iter().map(|&v| v % m).collect()).collect();
    let mut l: Vec<Vec<u64>> = (0..rows).map(|i| (0..rows).map(|j| u64::from(i == j)).collect()).collect();
    let mut rr: Vec<Vec<u64>> = (0..cols).map(|i| (0..cols).map(|j| u64::from(i == j)).collect()).collect();

    // Replace (x, y) by (s x + u y, -b/g x + a/g y) where a, b are pivot and target.
    let combine = |x: &mut Vec<u64>, y: &mut Vec<u64>, c: [i128; 4]| {
        for k in 0..x.len() {
            let (xv, yv) = (x[k] as i128, y[k] as i128);
            x[k] = red(c[0] * xv + c[1] * yv);
            y[k] = red(c[2] * xv + c[3] * yv);
        }
    };
    let bezout = |p: u64, v: u64| {
        if v.is_multiple_of(p) {
            return [1, 0, -((v / p) as i128), 1];
        }
        let (g, s, u) = ext_gcd(p as i128, v as i128);
        [s, u, -(v as i128) / g, (p as i128) / g]
    };

    for t in 0..rows.min(cols) {
        loop {
            let mut best: Option<(u64, usize, usize)> = None;
            for i in t..rows {
                for j in t..cols {
                    let v = d[i][j];
                    if v != 0 && best.is_none_or(|(b, _, _)| v < b) {
                        best = Some((v, i, j));
                    }
                }
            }
            let Some((_, pi, pj)) = best else {
                return (l, d, rr);
            };
            if pi != t {
                d.swap(t, pi);
                l.swap(t, pi);
            }
            if pj != t {
                for r in d.iter_mut() {
                    r.swap(t, pj);
                }
                for r in rr.iter_mut() {
                    r.swap(t, pj);
                }
            }
            for i in (t + 1)..rows {
                if d[i][t] == 0 {
                    continue;
                }
                let c = bezout(d[t][t], d[i][t]);
                let (top, rest) = d.split_at_mut(i);
                combine(&mut top[t], &mut rest[0], c);
                let (top, rest) = l.split_at_mut(i);
                combine(&mut top[t], &mut rest[0], c);
            }
            let mut dirty = false;
            for j in (t + 1)..cols {
                if d[t][j] == 0 {
                    continue;
                }
                let c = bezout(d[t][t], d[t][j]);
                let mut ct: Vec<u64> = d.iter().map(|r| r[t]).collect();
                let mut cj: Vec<u64> = d.iter().map(|r| r[j]).collect();
                combine(&mut ct, &mut cj, c);
                for (r, (a, b)) in d.iter_mut().zip(ct.iter().zip(&cj)) {
                    r[t] = *a;
                    r[j] = *b;
                }
                let mut ct: Vec<u64> = rr.iter().map(|r| r[t]).collect();
                let mut cj: Vec<u64> = rr.iter().map(|r| r[j]).collect();
                combine(&mut ct, &mut cj, c);
                for (r, (a, b)) in rr.iter_mut().zip(ct.iter().zip(&cj)) {
                    r[t] = *a;
                    r[j] = *b;
                }
            }
            for i in (t + 1)..rows {
                dirty |= d[i][t] != 0;
            }
            if !dirty {
                break;
            }
        }
    }
    (l, d, rr)
}

/// Integer determinant by fraction-free (Bareiss) elimination.
pub fn determinant(a: &IntMatrix) -> Result<BigInt, SnfError> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) {
        return Err(SnfError::Ragged);
    }
    if n == 0 {
        return Ok(BigInt::one());
    }
    let mut m = a.clone();
    let mut negate = false;
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            let Some(sw) = (k + 1..n).find(|&i| !m[i][k].is_zero()) else {
                return Ok(BigInt::zero());
            };
            m.swap(k, sw);
            negate = !negate;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = num / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    let det = m[n - 1][n - 1].clone();
    Ok(if negate { -det } else { det })
}

pub fn mat_mul(a: &IntMatrix, b: &IntMatrix) -> IntMatrix {
    let inner = b.len();
    let cols = b.first().map_or(0, |r| r.len());
    let mut out = vec![vec![BigInt::zero(); cols]; a.len()];
    for (i, row) in a.iter().enumerate() {
        for (k, v) in row.iter().enumerate().take(inner) {
            if v.is_zero() {
                continue;
            }
            for j in 0..cols {
                out[i][j] += v * &b[k][j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[i64]) -> Vec<Vec<i64>> {
        (0..v.len()).map(|i| (0..v.len()).map(|j| if i == j { v[i] } else { 0 }).collect()).collect()
    }

    #[test]
    fn nearest_quotient_any_sign() {
        for a in -20i64..=20 {
            for p in [-7i64, -4, -1, 1, 4, 7] {
                let q = nearest_quotient(&BigInt::from(a), &BigInt::from(p));
                let r = BigInt::from(a) - q * p;
                assert!(BigInt::from(2) * r.abs() <= BigInt::from(p.abs()), "{a} {p}");
            }
        }
    }

    fn big(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn identity_is_fixed() {
        let r = smith_normal_form(&diag(&[1, 1, 1])).unwrap();
        assert_eq!(r.u, identity(3));
        assert_eq!(r.s, identity(3));
        assert_eq!(r.v, identity(3));
    }

    #[test]
    fn invariant_factor_examples() {
        assert_eq!(smith_normal_form(&diag(&[4, 6])).unwrap().invariant_factors(), big(&[2, 12]));
        assert_eq!(smith_normal_form(&diag(&[2, 4])).unwrap().invariant_factors(), big(&[2, 4]));
        let a = vec![vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]];
        let r = smith_normal_form(&a).unwrap();
        assert_eq!(r.invariant_factors(), big(&[2, 6, 12]));
        assert_eq!(mat_mul(&mat_mul(&r.u, &r.s), &r.v), to_int_matrix(&a));
        assert_eq!(r.reduce_mod(8).invariant_factors(), big(&[2, 6, 4]));
    }

    #[test]
    fn modular_diagonalization_reconstructs() {
        let a = vec![vec![2u64, 3, 1], vec![0, 2, 2]];
        let (l, d, r) = diagonalize_mod(&a, 4);
        let to_i =
            |m: &Vec<Vec<u64>>| m.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect::<IntMatrix>();
        let lar = mat_mul(&mat_mul(&to_i(&l), &to_i(&a)), &to_i(&r));
        let four = BigInt::from(4);
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(lar[i][j].mod_floor(&four), BigInt::from(d[i][j]));
                if i != j {
                    assert_eq!(d[i][j], 0);
                }
            }
        }
        assert!(determinant(&to_i(&l)).unwrap().is_odd());
    }

    #[test]
    fn ragged_input_is_rejected() {
        assert_eq!(smith_normal_form(&[vec![1, 2], vec![3]]), Err(SnfError::Ragged));
        assert_eq!(determinant(&to_int_matrix(&[vec![2, 1], vec![1, 1]])), Ok(BigInt::one()));
        assert_eq!(determinant(&to_int_matrix(&[vec![0, 1], vec![1, 0]])), Ok(BigInt::from(-1)));
    }
}
