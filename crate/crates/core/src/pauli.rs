//! Qudit Pauli strings in symplectic block form.
//!
//! A [`PauliString`] on `n` qudits stores the operator
//! `ω^r (X^{x_0} Z^{z_0}) ⊗ … ⊗ (X^{x_{n-1}} Z^{z_{n-1}})` with
//! `ω = exp(2πi/d)`. Each tensor slot is ordered X-then-Z, so multiplying two
//! strings picks up the reordering phase `Σ_j z_p[j]·x_q[j]` from `ZX = ωXZ`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{binom2_mod, is_prime, reduce};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PauliError {
    #[error("dimension must be between 2 and 32768, got {0}")]
    InvalidDimension(u32),
    #[error("qudit count mismatch: {left} vs {right}")]
    ShapeMismatch { left: usize, right: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: u32, right: u32 },
    #[error("entry {index} = {value} is out of range for modulus {modulus}")]
    OutOfRange { index: usize, value: i64, modulus: u32 },
    #[error("block row of length {len} cannot encode a Pauli string (expected 2n + 1)")]
    BadRowLength { len: usize },
}

/// Local dimension of a qudit register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Dimension {
    d: u32,
    prime: bool,
}

impl Dimension {
    /// Largest supported dimension; keeps `d²` and exponent products inside `u32`/`u64`.
    pub const MAX: u32 = 1 << 15;

    pub fn new(d: u32) -> Result<Self, PauliError> {
        if !(2..=Self::MAX).contains(&d) {
            return Err(PauliError::InvalidDimension(d));
        }
        Ok(Self { d, prime: is_prime(d) })
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.d
    }

    pub fn is_prime(self) -> bool {
        self.prime
    }

    pub fn is_odd_prime(self) -> bool {
        self.prime && self.d != 2
    }

    /// Working modulus of the Weyl representation: `d` for odd `d`, `2d` for even `d`.
    pub fn d_prime(self) -> u32 {
        if self.d.is_multiple_of(2) {
            2 * self.d
        } else {
            self.d
        }
    }
}

impl TryFrom<u32> for Dimension {
    type Error = PauliError;
    fn try_from(d: u32) -> Result<Self, Self::Error> {
        Dimension::new(d)
    }
}

impl From<Dimension> for u32 {
    fn from(d: Dimension) -> u32 {
        d.d
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.d)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    d: u32,
    pub(crate) x: Vec<u32>,
    pub(crate) z: Vec<u32>,
    pub(crate) r: u32,
}

impl PauliString {
    pub fn identity(n: usize, d: Dimension) -> Self {
        Self { d: d.get(), x: vec![0; n], z: vec![0; n], r: 0 }
    }

    /// Builds a string from signed exponents; all entries are reduced mod `d`.
    pub fn from_exponents(d: Dimension, x: &[i64], z: &[i64], r: i64) -> Result<Self, PauliError> {
        if x.len() != z.len() {
            return Err(PauliError::ShapeMismatch { left: x.len(), right: z.len() });
        }
        let m = d.get();
        Ok(Self {
            d: m,
            x: x.iter().map(|&v| reduce(v, m)).collect(),
            z: z.iter().map(|&v| reduce(v, m)).collect(),
            r: reduce(r, m),
        })
    }

    /// `X^power` on qudit `q` of an `n`-qudit register.
    pub fn single_x(n: usize, d: Dimension, q: usize, power: i64) -> Self {
        let mut p = Self::identity(n, d);
        p.x[q] = reduce(power, d.get());
        p
    }

    /// `Z^power` on qudit `q` of an `n`-qudit register.
    pub fn single_z(n: usize, d: Dimension, q: usize, power: i64) -> Self {
        let mut p = Self::identity(n, d);
        p.z[q] = reduce(power, d.get());
        p
    }

    pub fn num_qudits(&self) -> usize {
        self.x.len()
    }

    pub fn dim(&self) -> u32 {
        self.d
    }

    pub fn x(&self) -> &[u32] {
        &self.x
    }

    pub fn z(&self) -> &[u32] {
        &self.z
    }

    /// Phase exponent `r` of the global factor `ω^r`.
    pub fn phase(&self) -> u32 {
        self.r
    }

    pub fn with_phase(mut self, r: i64) -> Self {
        self.r = reduce(r, self.d);
        self
    }

    pub fn is_identity(&self) -> bool {
        self.r == 0 && self.x.iter().all(|&v| v == 0) && self.z.iter().all(|&v| v == 0)
    }

    /// True when the X and Z blocks are zero (phase ignored).
    pub fn is_scalar(&self) -> bool {
        self.x.iter().all(|&v| v == 0) && self.z.iter().all(|&v| v == 0)
    }

    fn check_compatible(&self, other: &Self) -> Result<(), PauliError> {
        if self.d != other.d {
            return Err(PauliError::DimensionMismatch { left: self.d, right: other.d });
        }
        if self.x.len() != other.x.len() {
            return Err(PauliError::ShapeMismatch { left: self.x.len(), right: other.x.len() });
        }
        Ok(())
    }

    /// Phase-tracked product `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self, PauliError> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.mul_assign_unchecked(other);
        Ok(out)
    }

    /// `self ← self · other` without shape checks.
    pub(crate) fn mul_assign_unchecked(&mut self, other: &Self) {
        let d = self.d as u64;
        let mut cross = 0u64;
        for j in 0..self.x.len() {
            cross += self.z[j] as u64 * other.x[j] as u64;
            self.x[j] = ((self.x[j] + other.x[j]) as u64 % d) as u32;
            self.z[j] = ((self.z[j] + other.z[j]) as u64 % d) as u32;
        }
        self.r = ((self.r as u64 + other.r as u64 + cross) % d) as u32;
    }

    /// `self ← self · other^k`, computed in closed form (cost independent of `k`).
    pub(crate) fn mul_pow_assign_unchecked(&mut self, other: &Self, k: u32) {
        if k == 0 {
            return;
        }
        let powered = other.pow(k as u64);
        self.mul_assign_unchecked(&powered);
    }

    /// `self^k`. Uses `(X^x Z^z)^k = ω^{C(k,2)·z·x} X^{kx} Z^{kz}` summed over slots.
    pub fn pow(&self, k: u64) -> Self {
        let d = self.d as u64;
        let km = k % d;
        let mut self_cross = 0u64;
        for j in 0..self.x.len() {
            self_cross += self.z[j] as u64 * self.x[j] as u64 % d;
        }
        let r = (km * self.r as u64 + binom2_mod(k, self.d) * (self_cross % d)) % d;
        Self {
            d: self.d,
            x: self.x.iter().map(|&v| (v as u64 * km % d) as u32).collect(),
            z: self.z.iter().map(|&v| (v as u64 * km % d) as u32).collect(),
            r: r as u32,
        }
    }

    /// Returns `c` with `self · other = ω^c other · self`.
    pub fn commutation_exponent(&self, other: &Self) -> Result<u32, PauliError> {
        self.check_compatible(other)?;
        Ok(self.commutation_unchecked(other))
    }

    pub(crate) fn commutation_unchecked(&self, other: &Self) -> u32 {
        let d = self.d as i64;
        let mut c = 0i64;
        for j in 0..self.x.len() {
            c += self.z[j] as i64 * other.x[j] as i64 - self.x[j] as i64 * other.z[j] as i64;
            c %= d;
        }
        reduce(c, self.d)
    }

    pub fn commutes_with(&self, other: &Self) -> Result<bool, PauliError> {
        Ok(self.commutation_exponent(other)? == 0)
    }

    /// Inverse with `self · inverse(self) = I` (phase 0).
    pub fn inverse(&self) -> Self {
        let d = self.d as i64;
        let neg: Vec<u32> = self.x.iter().map(|&v| reduce(-(v as i64), self.d)).collect();
        let negz: Vec<u32> = self.z.iter().map(|&v| reduce(-(v as i64), self.d)).collect();
        let mut inv = Self { d: self.d, x: neg, z: negz, r: 0 };
        // r_p + r_inv + Σ z_p·x_inv = 0
        let mut cross = 0i64;
        for j in 0..self.x.len() {
            cross += self.z[j] as i64 * inv.x[j] as i64 % d;
        }
        inv.r = reduce(-(self.r as i64) - cross, self.d);
        inv
    }

    /// Flat row `[x_0 .. x_{n-1} | z_0 .. z_{n-1} | r]`.
    pub fn encode_block(&self) -> Vec<u32> {
        let mut row = Vec::with_capacity(2 * self.x.len() + 1);
        row.extend_from_slice(&self.x);
        row.extend_from_slice(&self.z);
        row.push(self.r);
        row
    }

    pub fn decode_block(row: &[u32], d: Dimension) -> Result<Self, PauliError> {
        if row.is_empty() || row.len().is_multiple_of(2) {
            return Err(PauliError::BadRowLength { len: row.len() });
        }
        let m = d.get();
        if let Some((index, &value)) = row.iter().enumerate().find(|(_, &v)| v >= m) {
            return Err(PauliError::OutOfRange { index, value: value as i64, modulus: m });
        }
        let n = (row.len() - 1) / 2;
        Ok(Self { d: m, x: row[..n].to_vec(), z: row[n..2 * n].to_vec(), r: row[2 * n] })
    }

    /// Space-separated block row, e.g. `2 2 | 0 0 | 0`.
    pub fn block_row_string(&self) -> String {
        let join = |v: &[u32]| v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" ");
        format!("{} | {} | {}", join(&self.x), join(&self.z), self.r)
    }
}

impl fmt::Display for PauliString {
    /// Renders `w^r X^a Z^b ⊗ …`, one factor per qudit.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w^{}", self.r)?;
        for j in 0..self.x.len() {
            let sep = if j == 0 { " " } else { " ⊗ " };
            write!(f, "{sep}X^{} Z^{}", self.x[j], self.z[j])?;
        }
        Ok(())
    }
}
