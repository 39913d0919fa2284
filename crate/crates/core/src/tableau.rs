//! Destabilizer/stabilizer tableau for odd prime dimensions.
//!
//! Rows `0..n` are destabilizers and rows `n..2n` stabilizers. Each row is a
//! [`PauliString`] in `X^x Z^z ω^r` form. Destabilizer `i` pairs with
//! stabilizer `i`: the commutation exponent between them is a nonzero scale
//! `c_i` (it starts at `c(X, Z) = -1`), and every other destab/stab, destab/destab
//! and stab/stab pair commutes.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::arith::{mod_inverse, reduce};
use crate::circuit::MeasurementRecord;
use crate::gate::GateKind;
use crate::linalg;
use crate::pauli::{Dimension, PauliString};
use crate::statevector::{DenseError, DenseState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableauError {
    #[error("the prime tableau needs an odd prime dimension, got {0}; use the Weyl tableau instead")]
    UnsupportedDimension(u32),
    #[error("a tableau needs at least one qudit")]
    EmptyRegister,
    #[error("qudit {index} out of range for {n} qudits")]
    QuditOutOfRange { index: usize, n: usize },
    #[error("SUM needs distinct control and target, got {0} twice")]
    RepeatedQudit(usize),
}

/// Elementary-operation tallies; each unit is one row slot touched.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub gates: u64,
    pub gate_ops: u64,
    pub measurements: u64,
    pub measure_ops: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tableau {
    n: usize,
    dim: Dimension,
    rows: Vec<PauliString>,
    pair_scale: Vec<u32>,
    measured: usize,
    counters: OpCounters,
}

impl Tableau {
    pub fn new(n: usize, dim: Dimension) -> Result<Self, TableauError> {
        if !dim.is_odd_prime() {
            return Err(TableauError::UnsupportedDimension(dim.get()));
        }
        if n == 0 {
            return Err(TableauError::EmptyRegister);
        }
        let mut rows = Vec::with_capacity(2 * n);
        rows.extend((0..n).map(|j| PauliString::single_x(n, dim, j, 1)));
        rows.extend((0..n).map(|j| PauliString::single_z(n, dim, j, 1)));
        Ok(Self { n, dim, rows, pair_scale: vec![dim.get() - 1; n], measured: 0, counters: OpCounters::default() })
    }

    /// Builds a tableau from explicit rows. `rows` must hold `2n` strings that
    /// satisfy the pairing invariant; this is checked.
    pub fn from_rows(dim: Dimension, rows: Vec<PauliString>) -> Option<Self> {
        if !dim.is_odd_prime() || rows.is_empty() || !rows.len().is_multiple_of(2) {
            return None;
        }
        let n = rows.len() / 2;
        if rows.iter().any(|r| r.num_qudits() != n || r.dim() != dim.get()) {
            return None;
        }
        let pair_scale = (0..n).map(|i| rows[i].commutation_unchecked(&rows[n + i])).collect();
        let t = Self { n, dim, rows, pair_scale, measured: 0, counters: OpCounters::default() };
        t.pairing_holds().then_some(t)
    }

    pub fn num_qudits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn rows(&self) -> &[PauliString] {
        &self.rows
    }

    pub fn destabilizer(&self, i: usize) -> &PauliString {
        &self.rows[i]
    }

    pub fn stabilizer(&self, i: usize) -> &PauliString {
        &self.rows[self.n + i]
    }

    pub fn stabilizers(&self) -> &[PauliString] {
        &self.rows[self.n..]
    }

    pub fn counters(&self) -> OpCounters {
        self.counters
    }

    pub fn reset_counters(&mut self) {
        self.counters = OpCounters::default();
    }

    /// Block-form rows, flattened per row as `[x | z | r]`.
    pub fn to_block_rows(&self) -> Vec<Vec<u32>> {
        self.rows.iter().map(|r| r.encode_block()).collect()
    }

    /// True when destab/stab pairs have nonzero commutation and every other pair commutes.
    pub fn pairing_holds(&self) -> bool {
        let n = self.n;
        for i in 0..2 * n {
            for k in (i + 1)..2 * n {
                let c = self.rows[i].commutation_unchecked(&self.rows[k]);
                let paired = i < n && k == i + n;
                if paired != (c != 0) {
                    return false;
                }
                if paired && c != self.pair_scale[i] {
                    return false;
                }
            }
        }
        true
    }

    fn check_qudit(&self, q: usize) -> Result<(), TableauError> {
        if q >= self.n {
            Err(TableauError::QuditOutOfRange { index: q, n: self.n })
        } else {
            Ok(())
        }
    }

    pub fn apply_gate(&mut self, g: GateKind) -> Result<(), TableauError> {
        let (qs, k) = g.qudits();
        for &q in &qs[..k] {
            self.check_qudit(q)?;
        }
        if k == 2 && qs[0] == qs[1] {
            return Err(TableauError::RepeatedQudit(qs[0]));
        }
        let d = self.dim.get();
        let dd = d as u64;
        self.counters.gates += 1;
        self.counters.gate_ops += 2 * self.n as u64;
        for row in &mut self.rows {
            apply_rule(row, g, d, dd);
        }
        Ok(())
    }

    /// Conjugates the state by a Pauli string: every row picks up `ω^{c(P, row)}`.
    pub fn apply_pauli(&mut self, p: &PauliString) {
        for row in &mut self.rows {
            let c = p.commutation_unchecked(row);
            row.r = (row.r + c) % self.dim.get();
        }
    }

    /// `X^a Z^b` on a single qudit.
    pub fn apply_local_pauli(&mut self, q: usize, a: u32, b: u32) {
        let d = self.dim.get() as i64;
        for row in &mut self.rows {
            // c(X^a Z^b, row) at slot q = b·x − a·z
            let c = b as i64 * row.x[q] as i64 - a as i64 * row.z[q] as i64;
            row.r = reduce(row.r as i64 + c, d as u32);
        }
    }

    fn first_random_row(&self, j: usize) -> Option<usize> {
        (self.n..2 * self.n).find(|&i| self.rows[i].x[j] != 0)
    }

    /// Multipliers `y_i` with `Π stab_i^{y_i} = ω^s Z_j` when `j` is determined.
    fn deterministic_powers(&self, j: usize) -> Vec<u32> {
        let d = self.dim.get() as u64;
        (0..self.n)
            .map(|i| {
                let x = self.rows[i].x[j] as u64;
                let inv = mod_inverse(self.pair_scale[i], self.dim.get()).expect("pair scale is a unit") as u64;
                ((d - x % d) % d * inv % d) as u32
            })
            .collect()
    }

    fn product_phase(&self, powers: &[u32]) -> u32 {
        let mut acc = PauliString::identity(self.n, self.dim);
        for (i, &y) in powers.iter().enumerate() {
            if y != 0 {
                acc.mul_pow_assign_unchecked(&self.rows[self.n + i], y);
            }
        }
        acc.r
    }

    /// Outcome of measuring `Z_j` if it is determined, without changing the tableau.
    pub fn peek_deterministic(&self, j: usize) -> Result<Option<u32>, TableauError> {
        self.check_qudit(j)?;
        if self.first_random_row(j).is_some() {
            return Ok(None);
        }
        let s = self.product_phase(&self.deterministic_powers(j));
        Ok(Some((self.dim.get() - s) % self.dim.get()))
    }

    /// Linear-time phase sum over the paired stabilizers, ignoring reordering phases.
    pub fn deterministic_phase_sum(&self, j: usize) -> Result<Option<u32>, TableauError> {
        self.check_qudit(j)?;
        if self.first_random_row(j).is_some() {
            return Ok(None);
        }
        let d = self.dim.get() as u64;
        let s = self
            .deterministic_powers(j)
            .iter()
            .enumerate()
            .map(|(i, &y)| y as u64 * self.rows[self.n + i].r as u64 % d)
            .sum::<u64>()
            % d;
        Ok(Some(((d - s) % d) as u32))
    }

    /// Measures `Z_j`. Outcome `k` collapses qudit `j` to `|k⟩`, whose
    /// stabilizer is `ω^{-k} Z_j`.
    pub fn measure_z<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> Result<MeasurementRecord, TableauError> {
        self.check_qudit(j)?;
        let n = self.n;
        let d = self.dim.get();
        let row_cost = 2 * n as u64 + 1;
        self.counters.measurements += 1;
        self.counters.measure_ops += 2 * n as u64;
        let seq = self.measured;
        self.measured += 1;

        let Some(p) = self.first_random_row(j) else {
            let powers = self.deterministic_powers(j);
            let mults = powers.iter().filter(|&&y| y != 0).count() as u64;
            self.counters.measure_ops += mults * row_cost;
            let s = self.product_phase(&powers);
            return Ok(MeasurementRecord { qudit: j, seq, deterministic: true, outcome: (d - s) % d });
        };

        let pivot = self.rows[p].clone();
        let inv = mod_inverse(pivot.x[j], d).expect("nonzero in a prime field") as u64;
        let dd = d as u64;
        for k in 0..2 * n {
            if k == p || k == p - n || self.rows[k].x[j] == 0 {
                continue;
            }
            let h = ((dd - self.rows[k].x[j] as u64) * inv % dd) as u32;
            self.rows[k].mul_pow_assign_unchecked(&pivot, h);
            self.counters.measure_ops += row_cost;
        }
        self.pair_scale[p - n] = (d - pivot.x[j]) % d;
        self.rows[p - n] = pivot;
        let alpha: u32 = rng.random_range(0..d);
        self.rows[p] = PauliString::single_z(n, self.dim, j, 1).with_phase(-(alpha as i64));
        self.counters.measure_ops += row_cost;
        Ok(MeasurementRecord { qudit: j, seq, deterministic: false, outcome: alpha })
    }

    /// Measures `Z_j` and rotates the qudit back to `|0⟩`.
    pub fn reset<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> Result<u32, TableauError> {
        let rec = self.measure_z(j, rng)?;
        if rec.outcome != 0 {
            self.apply_local_pauli(j, self.dim.get() - rec.outcome, 0);
        }
        Ok(rec.outcome)
    }

    /// Independent check of `Z_j` determinism: solves `Aᵀ y = e_{Z_j}` over F_d
    /// on the stabilizer block and multiplies out `Π g_i^{y_i}`.
    pub fn deterministic_outcome_gaussian(&self, j: usize) -> Result<(bool, Option<u32>), TableauError> {
        self.check_qudit(j)?;
        let n = self.n;
        let d = self.dim.get();
        // Columns are generators; each of the 2n rows is one x- or z-coordinate.
        let mut at: linalg::Matrix = vec![vec![0u32; n]; 2 * n];
        for (i, g) in self.stabilizers().iter().enumerate() {
            for q in 0..n {
                at[q][i] = g.x[q];
                at[n + q][i] = g.z[q];
            }
        }
        let mut target = vec![0u32; 2 * n];
        target[n + j] = 1;
        let Some(y) = linalg::solve(&at, &target, d) else {
            return Ok((false, None));
        };
        let mut acc = PauliString::identity(n, self.dim);
        for (i, &yi) in y.iter().enumerate() {
            for _ in 0..yi {
                acc.mul_assign_unchecked(&self.rows[n + i]);
            }
        }
        debug_assert!(acc.x.iter().all(|&v| v == 0));
        Ok((true, Some((d - acc.r) % d)))
    }

    /// True when every stabilizer row fixes `psi` to within 1e-9 per amplitude.
    pub fn stabilizer_check(&self, psi: &DenseState) -> Result<bool, DenseError> {
        if psi.num_qudits() != self.n || psi.dim() != self.dim.get() {
            return Err(DenseError::ShapeMismatch { expected: self.n, got: psi.num_qudits() });
        }
        for g in self.stabilizers() {
            if !psi.is_stabilized_by_pauli(g)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl PauliString {
    /// `self ← g · self · g†`; the exponent rules assume an odd prime dimension.
    pub fn conjugate_by(&mut self, g: GateKind) {
        let d = self.dim();
        apply_rule(self, g, d, d as u64);
    }
}

/// Conjugation rule for one row; `row ← g · row · g†`.
pub(crate) fn apply_rule(row: &mut PauliString, g: GateKind, d: u32, dd: u64) {
    let neg = |v: u32| if v == 0 { 0 } else { d - v };
    let add = |a: u32, b: u32| ((a as u64 + b as u64) % dd) as u32;
    let mulm = |a: u32, b: u32| (a as u64 * b as u64 % dd) as u32;
    let tri = |x: u32| (x as u64 * (x as u64).saturating_sub(1) / 2 % dd) as u32;
    match g {
        GateKind::X(q) => row.r = add(row.r, neg(row.z[q])),
        GateKind::XInv(q) => row.r = add(row.r, row.z[q]),
        GateKind::Z(q) => row.r = add(row.r, row.x[q]),
        GateKind::ZInv(q) => row.r = add(row.r, neg(row.x[q])),
        GateKind::F(q) => {
            let (x, z) = (row.x[q], row.z[q]);
            row.r = add(row.r, neg(mulm(x, z)));
            row.x[q] = neg(z);
            row.z[q] = x;
        }
        GateKind::FInv(q) => {
            let (x, z) = (row.x[q], row.z[q]);
            row.r = add(row.r, neg(mulm(x, z)));
            row.x[q] = z;
            row.z[q] = neg(x);
        }
        GateKind::P(q) => {
            let x = row.x[q];
            row.r = add(row.r, tri(x));
            row.z[q] = add(row.z[q], x);
        }
        GateKind::PInv(q) => {
            let x = row.x[q];
            row.r = add(row.r, neg(tri(x)));
            row.z[q] = add(row.z[q], neg(x));
        }
        GateKind::Sum { control, target } => {
            row.x[target] = add(row.x[target], row.x[control]);
            row.z[control] = add(row.z[control], neg(row.z[target]));
        }
        GateKind::SumInv { control, target } => {
            row.x[target] = add(row.x[target], neg(row.x[control]));
            row.z[control] = add(row.z[control], row.z[target]);
        }
    }
}

impl fmt::Display for Tableau {
    /// Bracketed integer layout: destabilizers, a rule, stabilizers; phase column last.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.rows.iter().enumerate() {
            if i == self.n {
                writeln!(f, "{}", "-".repeat(row.block_row_string().len()))?;
            }
            writeln!(f, "[{}]", row.block_row_string())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dim(d: u32) -> Dimension {
        Dimension::new(d).unwrap()
    }

    #[test]
    fn init_layout_and_errors() {
        let t = Tableau::new(2, dim(3)).unwrap();
        assert_eq!(
            t.to_block_rows(),
            vec![vec![1, 0, 0, 0, 0], vec![0, 1, 0, 0, 0], vec![0, 0, 1, 0, 0], vec![0, 0, 0, 1, 0]]
        );
        assert!(t.pairing_holds());
        let t5 = Tableau::new(1, dim(5)).unwrap();
        assert_eq!(t5.destabilizer(0), &PauliString::single_x(1, dim(5), 0, 1));
        assert_eq!(t5.stabilizer(0), &PauliString::single_z(1, dim(5), 0, 1));
        assert_eq!(Tableau::new(0, dim(3)), Err(TableauError::EmptyRegister));
        assert_eq!(Tableau::new(2, dim(4)), Err(TableauError::UnsupportedDimension(4)));
        assert_eq!(Tableau::new(2, dim(2)), Err(TableauError::UnsupportedDimension(2)));
    }

    #[test]
    fn gate_then_inverse_restores() {
        let mut t = Tableau::new(3, dim(5)).unwrap();
        for g in [GateKind::F(0), GateKind::Sum { control: 0, target: 2 }, GateKind::P(1)] {
            t.apply_gate(g).unwrap();
        }
        let before = t.clone();
        let gates =
            [GateKind::X(0), GateKind::Z(1), GateKind::F(2), GateKind::P(0), GateKind::Sum { control: 2, target: 1 }];
        for g in gates {
            t.apply_gate(g).unwrap();
            t.apply_gate(g.inverse()).unwrap();
            assert_eq!(t.rows(), before.rows());
        }
        assert!(t.apply_gate(GateKind::X(3)).is_err());
        assert!(t.apply_gate(GateKind::Sum { control: 1, target: 1 }).is_err());
    }

    #[test]
    fn repeated_measurement_is_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = Tableau::new(2, dim(7)).unwrap();
        t.apply_gate(GateKind::F(0)).unwrap();
        t.apply_gate(GateKind::Sum { control: 0, target: 1 }).unwrap();
        let a = t.measure_z(0, &mut rng).unwrap();
        assert!(!a.deterministic);
        let b = t.measure_z(0, &mut rng).unwrap();
        assert!(b.deterministic);
        assert_eq!(a.outcome, b.outcome);
        assert_eq!((a.seq, b.seq), (0, 1));
        assert!(t.pairing_holds());
    }

    #[test]
    fn gaussian_oracle_examples() {
        let t = Tableau::new(2, dim(3)).unwrap();
        assert_eq!(t.deterministic_outcome_gaussian(0).unwrap(), (true, Some(0)));
        let mut h = Tableau::new(1, dim(3)).unwrap();
        h.apply_gate(GateKind::F(0)).unwrap();
        assert_eq!(h.deterministic_outcome_gaussian(0).unwrap(), (false, None));
    }

    #[test]
    fn reset_returns_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let mut t = Tableau::new(1, dim(5)).unwrap();
            t.apply_gate(GateKind::F(0)).unwrap();
            t.reset(0, &mut rng).unwrap();
            assert_eq!(t.peek_deterministic(0).unwrap(), Some(0));
        }
    }

    #[test]
    fn local_pauli_matches_gates() {
        let mut a = Tableau::new(2, dim(5)).unwrap();
        a.apply_gate(GateKind::F(0)).unwrap();
        a.apply_gate(GateKind::Sum { control: 0, target: 1 }).unwrap();
        let mut b = a.clone();
        a.apply_local_pauli(1, 2, 3);
        for _ in 0..3 {
            b.apply_gate(GateKind::Z(1)).unwrap();
        }
        for _ in 0..2 {
            b.apply_gate(GateKind::X(1)).unwrap();
        }
        assert_eq!(a.rows(), b.rows());
    }
}
