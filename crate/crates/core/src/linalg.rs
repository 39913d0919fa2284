//! Dense linear algebra over the prime field F_p.
//!
//! Matrices are row-major `Vec<Vec<u32>>` with entries already reduced mod p.

use crate::arith::mod_inverse;

pub type Matrix = Vec<Vec<u32>>;

fn inv(a: u32, p: u32) -> u32 {
    mod_inverse(a, p).expect("nonzero element of a prime field is invertible")
}

/// Row-reduces `m` in place to reduced row echelon form; returns the pivot columns.
pub fn rref(m: &mut Matrix, p: u32) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let pm = p as u64;
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == rows {
            break;
        }
        let Some(sel) = (row..rows).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(row, sel);
        let s = inv(m[row][col], p) as u64;
        for v in m[row].iter_mut() {
            *v = (*v as u64 * s % pm) as u32;
        }
        for r in 0..rows {
            if r == row || m[r][col] == 0 {
                continue;
            }
            let f = pm - m[r][col] as u64;
            let (src, dst) = if r < row {
                let (a, b) = m.split_at_mut(row);
                (&b[0], &mut a[r])
            } else {
                let (a, b) = m.split_at_mut(r);
                (&a[row], &mut b[0])
            };
            for (d, &s) in dst.iter_mut().zip(src.iter()) {
                *d = ((*d as u64 + f * s as u64) % pm) as u32;
            }
        }
        pivots.push(col);
        row += 1;
    }
    pivots
}

pub fn rank(m: &Matrix, p: u32) -> usize {
    let mut w = m.clone();
    rref(&mut w, p).len()
}

/// Solves `a · y = b`, returning one solution if the system is consistent.
pub fn solve(a: &Matrix, b: &[u32], p: u32) -> Option<Vec<u32>> {
    let rows = a.len();
    assert_eq!(rows, b.len(), "right-hand side length must match row count");
    let cols = a.first().map_or(0, |r| r.len());
    let mut aug: Matrix = a
        .iter()
        .zip(b)
        .map(|(r, &v)| {
            let mut row = r.clone();
            row.push(v);
            row
        })
        .collect();
    let pivots = rref(&mut aug, p);
    if pivots.last() == Some(&cols) {
        return None;
    }
    let mut y = vec![0u32; cols];
    for (i, &c) in pivots.iter().enumerate() {
        y[c] = aug[i][cols];
    }
    Some(y)
}

/// Basis of the right nullspace `{v : m · v = 0}`.
pub fn nullspace(m: &Matrix, p: u32) -> Vec<Vec<u32>> {
    let cols = m.first().map_or(0, |r| r.len());
    let mut w = m.clone();
    let pivots = rref(&mut w, p);
    let mut basis = Vec::new();
    for free in (0..cols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![0u32; cols];
        v[free] = 1;
        for (i, &c) in pivots.iter().enumerate() {
            v[c] = (p - w[i][free]) % p;
        }
        basis.push(v);
    }
    basis
}

pub fn mat_vec(m: &Matrix, v: &[u32], p: u32) -> Vec<u32> {
    m.iter().map(|row| (row.iter().zip(v).map(|(&a, &b)| a as u64 * b as u64).sum::<u64>() % p as u64) as u32).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn solve_small_system() {
        // x + y = 1, x + 2y = 0 over F_3 gives y = 2, x = 2.
        let a = vec![vec![1, 1], vec![1, 2]];
        assert_eq!(solve(&a, &[1, 0], 3), Some(vec![2, 2]));
        let singular = vec![vec![1, 1], vec![2, 2]];
        assert_eq!(solve(&singular, &[1, 1], 3), None);
        assert_eq!(rank(&singular, 3), 1);
    }

    proptest! {
        #[test]
        fn nullspace_vectors_are_annihilated(
            p in prop::sample::select(vec![3u32, 5, 7]),
            raw in prop::collection::vec(prop::collection::vec(0u32..7, 6), 1..6),
            cols in 1usize..7,
            rhs in prop::collection::vec(0u32..7, 6),
        ) {
            let m: Matrix = raw.iter().map(|r| r[..cols].iter().map(|v| v % p).collect()).collect();
            let ns = nullspace(&m, p);
            prop_assert_eq!(ns.len() + rank(&m, p), cols);
            for v in &ns {
                prop_assert!(mat_vec(&m, v, p).iter().all(|&e| e == 0));
            }
            let b: Vec<u32> = rhs[..m.len()].iter().map(|v| v % p).collect();
            if let Some(y) = solve(&m, &b, p) {
                prop_assert_eq!(mat_vec(&m, &y, p), b);
            }
        }
    }
}
