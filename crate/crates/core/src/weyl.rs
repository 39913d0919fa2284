//! Weyl-operator stabilizer simulation for any dimension `d ≥ 2`.
//!
//! A generator is `τ^c W_{a,b}` with `W_{a,b} = τ^{-a·b} Z^a X^b`,
//! `τ = exp(iπ(d²+1)/d)` and `c` taken mod `d'` (`d` for odd `d`, `2d` for even).
//! Exponent vectors `a`, `b` are kept canonical in `[0, d)`; for even `d`
//! reducing an exponent by `d` flips a sign (`τ^d = -1`), which the
//! normalization folds into `c`.
//!
//! Measurement follows the module structure of the stabilizer group: the
//! generator matrix is diagonalized over `Z_d`, which yields the least `g`
//! with `Z_j^g` in the group up to phase. The outcome is then uniform over a
//! coset of `(d/g) Z_d`.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::arith::{gcd, lcm, reduce, solve_linear_congruence};
use crate::circuit::MeasurementRecord;
use crate::gate::GateKind;
use crate::pauli::{Dimension, PauliError};
use crate::snf::diagonalize_mod;
use crate::statevector::{DenseError, DenseState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WeylError {
    #[error("a tableau needs at least one qudit")]
    EmptyRegister,
    #[error("qudit {index} out of range for {n} qudits")]
    QuditOutOfRange { index: usize, n: usize },
    #[error("SUM needs distinct control and target, got {0} twice")]
    RepeatedQudit(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeylOp {
    d: u32,
    dp: u32,
    a: Vec<u32>,
    b: Vec<u32>,
    c: u32,
}

impl WeylOp {
    pub fn identity(n: usize, dim: Dimension) -> Self {
        Self { d: dim.get(), dp: dim.d_prime(), a: vec![0; n], b: vec![0; n], c: 0 }
    }

    /// `τ^c W_{a,b}` from arbitrary integer exponents, normalized.
    pub fn from_exponents(dim: Dimension, a: &[i64], b: &[i64], c: i64) -> Result<Self, PauliError> {
        if a.len() != b.len() {
            return Err(PauliError::ShapeMismatch { left: a.len(), right: b.len() });
        }
        let mut op = Self::identity(a.len(), dim);
        let mut c = c;
        for k in 0..a.len() {
            let (na, nb) = op.fold_slot(a[k], b[k], &mut c);
            op.a[k] = na;
            op.b[k] = nb;
        }
        op.c = reduce(c, op.dp);
        Ok(op)
    }

    pub fn single_z(n: usize, dim: Dimension, q: usize, power: i64) -> Self {
        let mut a = vec![0i64; n];
        a[q] = power;
        Self::from_exponents(dim, &a, &vec![0; n], 0).expect("shape")
    }

    pub fn single_x(n: usize, dim: Dimension, q: usize, power: i64) -> Self {
        let mut b = vec![0i64; n];
        b[q] = power;
        Self::from_exponents(dim, &vec![0; n], &b, 0).expect("shape")
    }

    pub fn num_qudits(&self) -> usize {
        self.a.len()
    }

    pub fn dim(&self) -> u32 {
        self.d
    }

    /// Z-power vector.
    pub fn a(&self) -> &[u32] {
        &self.a
    }

    /// X-power vector.
    pub fn b(&self) -> &[u32] {
        &self.b
    }

    /// τ-exponent `c` in `[0, d')`.
    pub fn phase(&self) -> u32 {
        self.c
    }

    pub fn with_phase(mut self, c: i64) -> Self {
        self.c = reduce(c, self.dp);
        self
    }

    pub fn is_identity(&self) -> bool {
        self.c == 0 && self.is_scalar()
    }

    pub fn is_scalar(&self) -> bool {
        self.a.iter().all(|&v| v == 0) && self.b.iter().all(|&v| v == 0)
    }

    /// Reduces one slot `(a, b)` into `[0, d)²`, adjusting `c` for `W_{a+md, b} = τ^{-mdb} W_{a,b}`.
    fn fold_slot(&self, a: i64, b: i64, c: &mut i64) -> (u32, u32) {
        let d = self.d as i64;
        let dp = self.dp as i64;
        let ma = a.div_euclid(d);
        let ra = a - ma * d;
        *c = (*c - (ma % dp) * d % dp * (b.rem_euclid(dp)) % dp).rem_euclid(dp);
        let mb = b.div_euclid(d);
        let rb = b - mb * d;
        *c = (*c - (mb % dp) * d % dp * ra % dp).rem_euclid(dp);
        (ra as u32, rb as u32)
    }

    fn set_slot(&mut self, k: usize, a: i64, b: i64, dc: i64) {
        let mut c = self.c as i64 + dc;
        let (na, nb) = self.fold_slot(a, b, &mut c);
        self.a[k] = na;
        self.b[k] = nb;
        self.c = reduce(c, self.dp);
    }

    /// `self ← self · other`, using `W_{a1,b1} W_{a2,b2} = τ^{a1·b2 − a2·b1} W_{a1+a2, b1+b2}`.
    pub fn mul_assign(&mut self, other: &WeylOp) {
        let mut c = (self.c + other.c) as i64;
        let mut cross = 0i64;
        for k in 0..self.a.len() {
            cross += self.a[k] as i64 * other.b[k] as i64 - other.a[k] as i64 * self.b[k] as i64;
        }
        c += cross;
        for k in 0..self.a.len() {
            let (na, nb) =
                self.fold_slot(self.a[k] as i64 + other.a[k] as i64, self.b[k] as i64 + other.b[k] as i64, &mut c);
            self.a[k] = na;
            self.b[k] = nb;
        }
        self.c = reduce(c, self.dp);
    }

    pub fn mul(&self, other: &WeylOp) -> WeylOp {
        let mut out = self.clone();
        out.mul_assign(other);
        out
    }

    /// `(τ^c W_{a,b})^k = τ^{kc} W_{ka,kb}`.
    pub fn pow(&self, k: u64) -> WeylOp {
        let k = k as i64;
        let mut out = Self::identity(self.a.len(), Dimension::new(self.d).expect("valid"));
        let mut c = (self.c as i64 * (k % self.dp as i64)) % self.dp as i64;
        for q in 0..self.a.len() {
            // Reduce k·a first so intermediate values stay small.
            let (ka, kb) = (self.a[q] as i64 * k, self.b[q] as i64 * k);
            let (na, nb) = self.fold_slot(ka, kb, &mut c);
            out.a[q] = na;
            out.b[q] = nb;
        }
        out.c = reduce(c, self.dp);
        out
    }

    /// `e` with `self · other = ω^e · other · self`.
    pub fn commutation_exponent(&self, other: &WeylOp) -> u32 {
        let mut e = 0i64;
        for k in 0..self.a.len() {
            e += self.a[k] as i64 * other.b[k] as i64 - other.a[k] as i64 * self.b[k] as i64;
        }
        reduce(e, self.d)
    }

    /// Conjugation `g · self · g†`.
    pub fn conjugate_by(&mut self, g: GateKind) {
        let odd = self.d % 2 == 1;
        let ai = |s: &Self, q: usize| s.a[q] as i64;
        let bi = |s: &Self, q: usize| s.b[q] as i64;
        match g {
            GateKind::X(q) => self.set_slot(q, ai(self, q), bi(self, q), -2 * ai(self, q)),
            GateKind::XInv(q) => self.set_slot(q, ai(self, q), bi(self, q), 2 * ai(self, q)),
            GateKind::Z(q) => self.set_slot(q, ai(self, q), bi(self, q), 2 * bi(self, q)),
            GateKind::ZInv(q) => self.set_slot(q, ai(self, q), bi(self, q), -2 * bi(self, q)),
            GateKind::F(q) => {
                let (a, b) = (ai(self, q), bi(self, q));
                self.set_slot(q, b, -a, 0);
            }
            GateKind::FInv(q) => {
                let (a, b) = (ai(self, q), bi(self, q));
                self.set_slot(q, -b, a, 0);
            }
            GateKind::P(q) => {
                let (a, b) = (ai(self, q), bi(self, q));
                self.set_slot(q, a + b, b, if odd { -b } else { 0 });
            }
            GateKind::PInv(q) => {
                let (a, b) = (ai(self, q), bi(self, q));
                self.set_slot(q, a - b, b, if odd { b } else { 0 });
            }
            GateKind::Sum { control, target } => {
                let (ac, bc) = (ai(self, control), bi(self, control));
                let (at, bt) = (ai(self, target), bi(self, target));
                self.set_slot(control, ac - at, bc, 0);
                self.set_slot(target, at, bt + bc, 0);
            }
            GateKind::SumInv { control, target } => {
                let (ac, bc) = (ai(self, control), bi(self, control));
                let (at, bt) = (ai(self, target), bi(self, target));
                self.set_slot(control, ac + at, bc, 0);
                self.set_slot(target, at, bt - bc, 0);
            }
        }
    }
}

impl fmt::Display for WeylOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t^{} W(", self.c)?;
        let join = |v: &[u32]| v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" ");
        write!(f, "{} | {})", join(&self.a), join(&self.b))
    }
}

/// Stabilizer generators for an `n`-qudit state; `2n` slots, unused ones are identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeylTableau {
    n: usize,
    dim: Dimension,
    gens: Vec<WeylOp>,
    measured: usize,
}

impl WeylTableau {
    pub fn new(n: usize, dim: Dimension) -> Result<Self, WeylError> {
        if n == 0 {
            return Err(WeylError::EmptyRegister);
        }
        let mut gens: Vec<WeylOp> = (0..n).map(|j| WeylOp::single_z(n, dim, j, 1)).collect();
        gens.extend((0..n).map(|_| WeylOp::identity(n, dim)));
        Ok(Self { n, dim, gens, measured: 0 })
    }

    pub fn num_qudits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn generators(&self) -> &[WeylOp] {
        &self.gens
    }

    fn check_qudit(&self, q: usize) -> Result<(), WeylError> {
        if q >= self.n {
            Err(WeylError::QuditOutOfRange { index: q, n: self.n })
        } else {
            Ok(())
        }
    }

    pub fn apply_gate(&mut self, g: GateKind) -> Result<(), WeylError> {
        let (qs, k) = g.qudits();
        for &q in &qs[..k] {
            self.check_qudit(q)?;
        }
        if k == 2 && qs[0] == qs[1] {
            return Err(WeylError::RepeatedQudit(qs[0]));
        }
        for op in &mut self.gens {
            op.conjugate_by(g);
        }
        Ok(())
    }

    /// Applies `X^a Z^b` to qudit `q`.
    pub fn apply_local_pauli(&mut self, q: usize, a: u32, b: u32) {
        for op in &mut self.gens {
            for _ in 0..b {
                op.conjugate_by(GateKind::Z(q));
            }
            for _ in 0..a {
                op.conjugate_by(GateKind::X(q));
            }
        }
    }

    fn generator_matrix(ops: &[WeylOp], n: usize) -> Vec<Vec<u64>> {
        ops.iter().map(|g| g.a.iter().chain(g.b.iter()).map(|&v| v as u64).take(2 * n).collect()).collect()
    }

    fn product(&self, ops: &[WeylOp], powers: &[u64]) -> WeylOp {
        let mut acc = WeylOp::identity(self.n, self.dim);
        for (op, &y) in ops.iter().zip(powers) {
            if y % self.dim.get() as u64 != 0 {
                acc.mul_assign(&op.pow(y % self.dim.get() as u64));
            }
        }
        acc
    }

    /// Least `g | d` with `Z_j^g` in the group up to phase, and that group element.
    fn z_power_in_group(&self, j: usize) -> (u64, WeylOp) {
        let d = self.dim.get() as u64;
        let n = self.n;
        let g_mat = Self::generator_matrix(&self.gens, n);
        let (l, diag, r) = diagonalize_mod(&g_mat, d);
        let m = self.gens.len();
        let k = m.min(2 * n);
        let s: Vec<u64> = (0..2 * n).map(|i| if i < k { diag[i][i] } else { 0 }).collect();
        // Target t = g e_{a_j}; need w S = g (e_{a_j} R).
        let q = &r[j];
        let mut g = 1u64;
        for i in 0..2 * n {
            let e = gcd(s[i], d);
            g = lcm(g, e / gcd(q[i], e));
        }
        let mut w = vec![0u64; m];
        for i in 0..k {
            if s[i] != 0 {
                let (sol, _) = solve_linear_congruence(s[i], g * q[i] % d, d).expect("solvable by choice of g");
                w[i] = sol;
            }
        }
        let y: Vec<u64> = (0..m).map(|c| (0..m).map(|i| w[i] * l[i][c] % d).sum::<u64>() % d).collect();
        let prod = self.product(&self.gens, &y);
        debug_assert!(prod.b.iter().all(|&v| v == 0));
        debug_assert!((0..n).all(|q| prod.a[q] as u64 == if q == j { g % d } else { 0 }));
        (g, prod)
    }

    /// Outcome support: `(g, k0)` where outcomes are `k0 + (d/g) t mod d`, `t ∈ 0..g`.
    pub fn outcome_support(&self, j: usize) -> Result<(u64, u64), WeylError> {
        self.check_qudit(j)?;
        let (g, prod) = self.z_power_in_group(j);
        Ok((g, self.base_outcome(g, &prod)))
    }

    fn base_outcome(&self, g: u64, prod: &WeylOp) -> u64 {
        let d = self.dim.get() as u64;
        let dp = self.dim.d_prime() as u64;
        // τ^c Z_j^g fixes the state: τ^{c + 2gk} = 1 on the support.
        let target = (dp - prod.c as u64 % dp) % dp;
        let (k0, _) = solve_linear_congruence(2 * g % dp, target, dp).expect("stabilizer phase is consistent");
        k0 % d
    }

    /// Measures `Z_j`; outcome `k` leaves qudit `j` in `|k⟩`.
    pub fn measure_z<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> Result<MeasurementRecord, WeylError> {
        self.check_qudit(j)?;
        let d = self.dim.get() as u64;
        let (g, prod) = self.z_power_in_group(j);
        let k0 = self.base_outcome(g, &prod);
        let seq = self.measured;
        self.measured += 1;
        if g == 1 {
            return Ok(MeasurementRecord { qudit: j, seq, deterministic: true, outcome: k0 as u32 });
        }
        let t = rng.random_range(0..g);
        let outcome = (k0 + (d / g) * t) % d;
        self.collapse(j, outcome);
        Ok(MeasurementRecord { qudit: j, seq, deterministic: false, outcome: outcome as u32 })
    }

    /// Replaces the group by its commutant with `Z_j`, plus `ω^{-k} Z_j`.
    fn collapse(&mut self, j: usize, k: u64) {
        let d = self.dim.get() as u64;
        let n = self.n;
        let m = self.gens.len();
        let col: Vec<Vec<u64>> = self.gens.iter().map(|g| vec![g.b[j] as u64]).collect();
        let (l, diag, _) = diagonalize_mod(&col, d);
        let e = gcd(diag[0][0], d);
        let mut kept: Vec<WeylOp> = Vec::with_capacity(m + 1);
        let row0: Vec<u64> = l[0].iter().map(|&v| v * (d / e) % d).collect();
        kept.push(self.product(&self.gens, &row0));
        for row in l.iter().skip(1) {
            kept.push(self.product(&self.gens, row));
        }
        kept.push(WeylOp::single_z(n, self.dim, j, 1).with_phase(-2 * k as i64));
        self.gens = self.prune(kept);
    }

    /// Re-derives at most `2n` generators for the group spanned by `ops`.
    fn prune(&self, ops: Vec<WeylOp>) -> Vec<WeylOp> {
        let d = self.dim.get() as u64;
        let n = self.n;
        let mat = Self::generator_matrix(&ops, n);
        let (l, diag, _) = diagonalize_mod(&mat, d);
        let k = ops.len().min(2 * n);
        let mut out: Vec<WeylOp> = (0..k).filter(|&i| diag[i][i] != 0).map(|i| self.product(&ops, &l[i])).collect();
        out.resize(2 * n, WeylOp::identity(n, self.dim));
        out
    }

    /// Measures `Z_j` and rotates the qudit back to `|0⟩`.
    pub fn reset<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> Result<u32, WeylError> {
        let rec = self.measure_z(j, rng)?;
        let d = self.dim.get();
        if rec.outcome != 0 {
            self.apply_local_pauli(j, d - rec.outcome, 0);
        }
        Ok(rec.outcome)
    }

    pub fn stabilizer_check(&self, psi: &DenseState) -> Result<bool, DenseError> {
        if psi.num_qudits() != self.n || psi.dim() != self.dim.get() {
            return Err(DenseError::ShapeMismatch { expected: self.n, got: psi.num_qudits() });
        }
        for g in &self.gens {
            if !psi.is_stabilized_by_weyl(g)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl fmt::Display for WeylTableau {
    /// One column per generator; phase row, then Z rows, then X rows.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let line = |f: &mut fmt::Formatter<'_>, vals: Vec<u32>| {
            writeln!(f, "[{}]", vals.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))
        };
        line(f, self.gens.iter().map(|g| g.c).collect())?;
        for q in 0..self.n {
            line(f, self.gens.iter().map(|g| g.a[q]).collect())?;
        }
        for q in 0..self.n {
            line(f, self.gens.iter().map(|g| g.b[q]).collect())?;
        }
        Ok(())
    }
}
