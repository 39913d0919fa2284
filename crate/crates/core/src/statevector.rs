//! Dense state-vector simulation for small registers.
//!
//! Basis index convention: qudit 0 is the most significant base-`d` digit, so
//! `|j_0 j_1 … j_{n-1}⟩` sits at index `Σ j_q d^{n-1-q}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::arith::reduce;
use crate::gate::GateKind;
use crate::pauli::{Dimension, PauliString};
use crate::weyl::WeylOp;

/// Default amplitude cap (2^24 complex numbers, 256 MiB).
pub const DEFAULT_MAX_AMPLITUDES: usize = 1 << 24;

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DenseError {
    #[error("{d}^{n} amplitudes exceed the cap of {cap}")]
    TooLarge { d: u32, n: usize, cap: usize },
    #[error("qudit {index} out of range for {n} qudits")]
    QuditOutOfRange { index: usize, n: usize },
    #[error("operator acts on {got} qudits, state has {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("conjugated operator is not a Pauli string")]
    NoPauliMatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    d: u32,
    n: usize,
    amps: Vec<Complex64>,
}

fn omega_pow(k: i64, d: u32) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * reduce(k, d) as f64 / d as f64)
}

/// `τ^k` with `τ = exp(iπ(d²+1)/d)`.
pub fn tau_pow(k: i64, d: u32) -> Complex64 {
    let dp = Dimension::new(d).expect("d >= 2").d_prime();
    let e = (reduce(k, dp) as u64 * ((d as u64 * d as u64 + 1) % (2 * d as u64))) % (2 * d as u64);
    Complex64::from_polar(1.0, PI * e as f64 / d as f64)
}

/// Diagonal phase of the quadratic phase gate on basis state `j`.
///
/// Odd `d` uses `ω^{j(j-1)/2}`; even `d` uses `τ^{j²}`, which is well defined
/// on `Z_d` and conjugates `X` to a Weyl operator without a residual phase.
pub fn phase_gate_diag(j: u32, d: u32) -> Complex64 {
    let jj = j as i64;
    if d % 2 == 1 {
        omega_pow(jj * (jj - 1) / 2, d)
    } else {
        tau_pow(jj * jj, d)
    }
}

impl DenseState {
    pub fn zero(n: usize, d: u32) -> Result<Self, DenseError> {
        Self::zero_with_cap(n, d, DEFAULT_MAX_AMPLITUDES)
    }

    pub fn zero_with_cap(n: usize, d: u32, cap: usize) -> Result<Self, DenseError> {
        let size = (d as usize).checked_pow(n as u32).filter(|&s| s <= cap);
        let size = size.ok_or(DenseError::TooLarge { d, n, cap })?;
        let mut amps = vec![Complex64::new(0.0, 0.0); size];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { d, n, amps })
    }

    /// Computational basis state `|digits⟩`.
    pub fn basis(d: u32, digits: &[u32]) -> Result<Self, DenseError> {
        let mut s = Self::zero(digits.len(), d)?;
        s.amps[0] = Complex64::new(0.0, 0.0);
        let idx = digits.iter().fold(0usize, |acc, &v| acc * d as usize + (v % d) as usize);
        s.amps[idx] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn from_amplitudes(d: u32, n: usize, amps: Vec<Complex64>) -> Self {
        assert_eq!(amps.len(), (d as usize).pow(n as u32));
        Self { d, n, amps }
    }

    pub fn dim(&self) -> u32 {
        self.d
    }

    pub fn num_qudits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn stride(&self, q: usize) -> usize {
        (self.d as usize).pow((self.n - 1 - q) as u32)
    }

    fn digit(&self, idx: usize, q: usize) -> u32 {
        ((idx / self.stride(q)) % self.d as usize) as u32
    }

    fn check(&self, q: usize) -> Result<(), DenseError> {
        if q >= self.n {
            Err(DenseError::QuditOutOfRange { index: q, n: self.n })
        } else {
            Ok(())
        }
    }

    /// Applies a `d × d` matrix `u[row][col]` to qudit `q`.
    fn apply_single(&mut self, q: usize, u: &[Vec<Complex64>]) {
        let d = self.d as usize;
        let stride = self.stride(q);
        let mut buf = vec![Complex64::new(0.0, 0.0); d];
        for base in 0..self.amps.len() {
            if !(base / stride).is_multiple_of(d) {
                continue;
            }
            for (k, b) in buf.iter_mut().enumerate() {
                *b = self.amps[base + k * stride];
            }
            for (r, row) in u.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (c, &v) in row.iter().enumerate() {
                    acc += v * buf[c];
                }
                self.amps[base + r * stride] = acc;
            }
        }
    }

    fn permute(&mut self, f: impl Fn(usize) -> usize) {
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (i, &a) in self.amps.iter().enumerate() {
            out[f(i)] = a;
        }
        self.amps = out;
    }

    fn shift(&mut self, q: usize, k: i64) {
        let d = self.d as usize;
        let stride = self.stride(q);
        let k = reduce(k, self.d) as usize;
        if k == 0 {
            return;
        }
        self.permute(|i| {
            let j = (i / stride) % d;
            i - j * stride + ((j + k) % d) * stride
        });
    }

    fn diag(&mut self, q: usize, phase: impl Fn(u32) -> Complex64) {
        let table: Vec<Complex64> = (0..self.d).map(phase).collect();
        for i in 0..self.amps.len() {
            let j = self.digit(i, q) as usize;
            self.amps[i] *= table[j];
        }
    }

    fn fourier(&mut self, q: usize, inverse: bool) {
        let d = self.d;
        let s = 1.0 / (d as f64).sqrt();
        let sign = if inverse { -1 } else { 1 };
        let u: Vec<Vec<Complex64>> =
            (0..d).map(|k| (0..d).map(|j| omega_pow(sign * (j as i64) * (k as i64), d) * s).collect()).collect();
        self.apply_single(q, &u);
    }

    fn sum(&mut self, c: usize, t: usize, sign: i64) {
        let d = self.d as usize;
        let (sc, st) = (self.stride(c), self.stride(t));
        self.permute(|i| {
            let jc = (i / sc) % d;
            let jt = (i / st) % d;
            let nt = reduce(jt as i64 + sign * jc as i64, d as u32) as usize;
            i - jt * st + nt * st
        });
    }

    pub fn apply_gate(&mut self, g: GateKind) -> Result<(), DenseError> {
        let (qs, k) = g.qudits();
        for &q in &qs[..k] {
            self.check(q)?;
        }
        let d = self.d;
        match g {
            GateKind::X(q) => self.shift(q, 1),
            GateKind::XInv(q) => self.shift(q, -1),
            GateKind::Z(q) => self.diag(q, |j| omega_pow(j as i64, d)),
            GateKind::ZInv(q) => self.diag(q, |j| omega_pow(-(j as i64), d)),
            GateKind::F(q) => self.fourier(q, false),
            GateKind::FInv(q) => self.fourier(q, true),
            GateKind::P(q) => self.diag(q, |j| phase_gate_diag(j, d)),
            GateKind::PInv(q) => self.diag(q, |j| phase_gate_diag(j, d).conj()),
            GateKind::Sum { control, target } => self.sum(control, target, 1),
            GateKind::SumInv { control, target } => self.sum(control, target, -1),
        }
        Ok(())
    }

    /// Applies `ω^r ⊗_j X^{x_j} Z^{z_j}`.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<(), DenseError> {
        if p.num_qudits() != self.n {
            return Err(DenseError::ShapeMismatch { expected: self.n, got: p.num_qudits() });
        }
        let d = self.d;
        for q in 0..self.n {
            let z = p.z()[q] as i64;
            if z != 0 {
                self.diag(q, |j| omega_pow(z * j as i64, d));
            }
            self.shift(q, p.x()[q] as i64);
        }
        let ph = omega_pow(p.phase() as i64, d);
        self.amps.iter_mut().for_each(|a| *a *= ph);
        Ok(())
    }

    /// Applies `τ^c W_{a,b} = τ^{c - a·b} Z^a X^b`.
    pub fn apply_weyl(&mut self, w: &WeylOp) -> Result<(), DenseError> {
        if w.num_qudits() != self.n {
            return Err(DenseError::ShapeMismatch { expected: self.n, got: w.num_qudits() });
        }
        let d = self.d;
        let mut ab = 0i64;
        for q in 0..self.n {
            let (a, b) = (w.a()[q] as i64, w.b()[q] as i64);
            ab += a * b;
            self.shift(q, b);
            if a != 0 {
                self.diag(q, |j| omega_pow(a * j as i64, d));
            }
        }
        let ph = tau_pow(w.phase() as i64 - ab, d);
        self.amps.iter_mut().for_each(|a| *a *= ph);
        Ok(())
    }

    pub fn outcome_distribution(&self, j: usize) -> Result<Vec<f64>, DenseError> {
        self.check(j)?;
        let mut probs = vec![0.0; self.d as usize];
        for (i, a) in self.amps.iter().enumerate() {
            probs[self.digit(i, j) as usize] += a.norm_sqr();
        }
        Ok(probs)
    }

    /// Full joint distribution over all basis states.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Projects qudit `j` onto `|k⟩` and renormalizes; returns the prior probability.
    pub fn project(&mut self, j: usize, k: u32) -> Result<f64, DenseError> {
        self.check(j)?;
        let mut mass = 0.0;
        for i in 0..self.amps.len() {
            if self.digit(i, j) == k {
                mass += self.amps[i].norm_sqr();
            } else {
                self.amps[i] = Complex64::new(0.0, 0.0);
            }
        }
        if mass > 0.0 {
            let s = 1.0 / mass.sqrt();
            self.amps.iter_mut().for_each(|a| *a *= s);
        }
        Ok(mass)
    }

    /// Born-rule measurement of qudit `j`; returns the outcome and whether it was certain.
    pub fn measure<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> Result<(u32, bool), DenseError> {
        let probs = self.outcome_distribution(j)?;
        let deterministic = probs.iter().any(|&p| p > 1.0 - TOL);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut outcome = (probs.len() - 1) as u32;
        for (k, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                outcome = k as u32;
                break;
            }
        }
        // Guard against landing on a zero-probability tail through rounding.
        if probs[outcome as usize] < TOL {
            outcome = probs.iter().rposition(|&p| p >= TOL).unwrap_or(0) as u32;
        }
        self.project(j, outcome)?;
        Ok((outcome, deterministic))
    }

    /// Measures `j` and rotates it back to `|0⟩`.
    pub fn reset<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> Result<u32, DenseError> {
        let (k, _) = self.measure(j, rng)?;
        self.shift(j, -(k as i64));
        Ok(k)
    }

    /// Largest entrywise amplitude difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn is_stabilized_by_pauli(&self, p: &PauliString) -> Result<bool, DenseError> {
        let mut w = self.clone();
        w.apply_pauli(p)?;
        Ok(w.max_abs_diff(self) <= TOL)
    }

    pub fn is_stabilized_by_weyl(&self, op: &WeylOp) -> Result<bool, DenseError> {
        let mut w = self.clone();
        w.apply_weyl(op)?;
        Ok(w.max_abs_diff(self) <= TOL)
    }
}

/// Dense matrix of a sequence of actions on `n` qudits, columns = images of basis states.
fn operator_matrix(
    n: usize,
    d: u32,
    act: impl Fn(&mut DenseState) -> Result<(), DenseError>,
) -> Result<Vec<DenseState>, DenseError> {
    let size = (d as usize).pow(n as u32);
    let mut cols = Vec::with_capacity(size);
    for idx in 0..size {
        let mut amps = vec![Complex64::new(0.0, 0.0); size];
        amps[idx] = Complex64::new(1.0, 0.0);
        let mut s = DenseState::from_amplitudes(d, n, amps);
        act(&mut s)?;
        cols.push(s);
    }
    Ok(cols)
}

fn unit_phase(c: Complex64) -> Option<f64> {
    if (c.norm() - 1.0).abs() > TOL {
        return None;
    }
    Some(c.arg())
}

fn locate(s: &DenseState) -> Option<(usize, Complex64)> {
    let (idx, amp) = s.amps.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))?;
    Some((idx, *amp))
}

fn digits(idx: usize, n: usize, d: u32) -> Vec<u32> {
    let mut out = vec![0u32; n];
    let mut i = idx;
    for q in (0..n).rev() {
        out[q] = (i % d as usize) as u32;
        i /= d as usize;
    }
    out
}

fn nearest_power(angle: f64, steps: u32) -> Option<u32> {
    let t = angle / (2.0 * PI) * steps as f64;
    let k = t.round();
    if (t - k).abs() > 1e-6 {
        return None;
    }
    Some(reduce(k as i64, steps))
}

fn conjugate_columns(
    g: GateKind,
    n: usize,
    d: u32,
    apply_op: &dyn Fn(&mut DenseState) -> Result<(), DenseError>,
) -> Result<Vec<DenseState>, DenseError> {
    // Columns of C·P·C†.
    operator_matrix(n, d, |s| {
        s.apply_gate(g.inverse())?;
        apply_op(s)?;
        s.apply_gate(g)
    })
}

/// Computes `C P C†` densely and reads it back as a Pauli string.
pub fn conjugate_pauli(g: GateKind, p: &PauliString) -> Result<PauliString, DenseError> {
    let n = p.num_qudits();
    let d = p.dim();
    let dim = Dimension::new(d).expect("valid dimension");
    let cols = conjugate_columns(g, n, d, &|s| s.apply_pauli(p))?;
    // X^x Z^z ω^r |0⟩ = ω^r |x⟩.
    let (i0, a0) = locate(&cols[0]).ok_or(DenseError::NoPauliMatch)?;
    let x = digits(i0, n, d);
    let r = nearest_power(unit_phase(a0).ok_or(DenseError::NoPauliMatch)?, d).ok_or(DenseError::NoPauliMatch)?;
    let mut z = vec![0u32; n];
    for q in 0..n {
        // X^x Z^z |e_q⟩ = ω^{r + z_q} |x + e_q⟩.
        let col = (d as usize).pow((n - 1 - q) as u32);
        let (_, a) = locate(&cols[col]).ok_or(DenseError::NoPauliMatch)?;
        let ratio = a / a0;
        z[q] = nearest_power(unit_phase(ratio).ok_or(DenseError::NoPauliMatch)?, d).ok_or(DenseError::NoPauliMatch)?;
    }
    let to_i64 = |v: &[u32]| v.iter().map(|&e| e as i64).collect::<Vec<_>>();
    let cand = PauliString::from_exponents(dim, &to_i64(&x), &to_i64(&z), r as i64).expect("shape");
    let check = operator_matrix(n, d, |s| s.apply_pauli(&cand))?;
    if cols.iter().zip(&check).all(|(a, b)| a.max_abs_diff(b) <= TOL) {
        Ok(cand)
    } else {
        Err(DenseError::NoPauliMatch)
    }
}

/// Computes `C W C†` densely and reads it back as a phased Weyl operator.
pub fn conjugate_weyl(g: GateKind, w: &WeylOp) -> Result<WeylOp, DenseError> {
    let n = w.num_qudits();
    let d = w.dim();
    let dim = Dimension::new(d).expect("valid dimension");
    let cols = conjugate_columns(g, n, d, &|s| s.apply_weyl(w))?;
    // τ^{c - a·b} Z^a X^b |0⟩ = τ^{c - a·b} ω^{a·b} |b⟩ = τ^{c + a·b} |b⟩.
    let (i0, a0) = locate(&cols[0]).ok_or(DenseError::NoPauliMatch)?;
    let b = digits(i0, n, d);
    let mut a = vec![0u32; n];
    for q in 0..n {
        // column e_q lands on |b + e_q⟩ with an extra ω^{a_q} relative to column 0.
        let col = (d as usize).pow((n - 1 - q) as u32);
        let (_, amp) = locate(&cols[col]).ok_or(DenseError::NoPauliMatch)?;
        let ratio = amp / a0;
        a[q] = nearest_power(unit_phase(ratio).ok_or(DenseError::NoPauliMatch)?, d).ok_or(DenseError::NoPauliMatch)?;
    }
    let dp = dim.d_prime();
    let ab: i64 = a.iter().zip(&b).map(|(&x, &y)| x as i64 * y as i64).sum();
    // Recover τ-exponent e of a0 = τ^e: a0 = exp(iπ e (d²+1)/d).
    let angle = unit_phase(a0).ok_or(DenseError::NoPauliMatch)?;
    let mut found = None;
    for e in 0..dp as i64 {
        if (tau_pow(e, d) - Complex64::from_polar(1.0, angle)).norm() < 1e-6 {
            found = Some(e);
            break;
        }
    }
    let e = found.ok_or(DenseError::NoPauliMatch)?;
    let to_i64 = |v: &[u32]| v.iter().map(|&x| x as i64).collect::<Vec<_>>();
    let cand = WeylOp::from_exponents(dim, &to_i64(&a), &to_i64(&b), e - ab).expect("shape");
    let check = operator_matrix(n, d, |s| s.apply_weyl(&cand))?;
    if cols.iter().zip(&check).all(|(x, y)| x.max_abs_diff(y) <= TOL) {
        Ok(cand)
    } else {
        Err(DenseError::NoPauliMatch)
    }
}
