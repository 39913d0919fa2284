//! The elementary Clifford gate set shared by every backend.

use std::fmt;

use serde::{Deserialize, Serialize};

/// One elementary Clifford gate with its qudit operands.
///
/// `F` is the discrete Fourier transform, `P` the quadratic phase gate and
/// `Sum` the qudit CNOT `|c, t⟩ ↦ |c, t + c⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    X(usize),
    XInv(usize),
    Z(usize),
    ZInv(usize),
    F(usize),
    FInv(usize),
    P(usize),
    PInv(usize),
    Sum { control: usize, target: usize },
    SumInv { control: usize, target: usize },
}

impl GateKind {
    /// Every single-qudit generator, in a fixed order.
    pub const SINGLE_QUDIT_KINDS: [fn(usize) -> GateKind; 8] = [
        GateKind::X,
        GateKind::XInv,
        GateKind::Z,
        GateKind::ZInv,
        GateKind::F,
        GateKind::FInv,
        GateKind::P,
        GateKind::PInv,
    ];

    pub fn inverse(self) -> GateKind {
        use GateKind::*;
        match self {
            X(q) => XInv(q),
            XInv(q) => X(q),
            Z(q) => ZInv(q),
            ZInv(q) => Z(q),
            F(q) => FInv(q),
            FInv(q) => F(q),
            P(q) => PInv(q),
            PInv(q) => P(q),
            Sum { control, target } => SumInv { control, target },
            SumInv { control, target } => Sum { control, target },
        }
    }

    /// Qudit operands; the control comes first for two-qudit gates.
    pub fn qudits(&self) -> ([usize; 2], usize) {
        use GateKind::*;
        match *self {
            X(q) | XInv(q) | Z(q) | ZInv(q) | F(q) | FInv(q) | P(q) | PInv(q) => ([q, q], 1),
            Sum { control, target } | SumInv { control, target } => ([control, target], 2),
        }
    }

    pub fn max_qudit(&self) -> usize {
        let (qs, k) = self.qudits();
        qs[..k].iter().copied().max().unwrap_or(0)
    }

    /// Canonical (qudit-style) name used by the text format.
    pub fn name(&self) -> &'static str {
        use GateKind::*;
        match self {
            X(_) => "X",
            XInv(_) => "X_INV",
            Z(_) => "Z",
            ZInv(_) => "Z_INV",
            F(_) => "F",
            FInv(_) => "F_INV",
            P(_) => "P",
            PInv(_) => "P_INV",
            Sum { .. } => "SUM",
            SumInv { .. } => "SUM_INV",
        }
    }

    /// Same gate acting on relabelled qudits.
    pub fn remap(self, f: impl Fn(usize) -> usize) -> GateKind {
        use GateKind::*;
        match self {
            X(q) => X(f(q)),
            XInv(q) => XInv(f(q)),
            Z(q) => Z(f(q)),
            ZInv(q) => ZInv(f(q)),
            F(q) => F(f(q)),
            FInv(q) => FInv(f(q)),
            P(q) => P(f(q)),
            PInv(q) => PInv(f(q)),
            Sum { control, target } => Sum { control: f(control), target: f(target) },
            SumInv { control, target } => SumInv { control: f(control), target: f(target) },
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (qs, k) = self.qudits();
        if k == 1 {
            write!(f, "{} {}", self.name(), qs[0])
        } else {
            write!(f, "{} {} {}", self.name(), qs[0], qs[1])
        }
    }
}

/// Inverse of a gate sequence: reversed order, each gate inverted.
pub fn inverse_sequence(gates: &[GateKind]) -> Vec<GateKind> {
    gates.iter().rev().map(|g| g.inverse()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_is_involution() {
        let gates = [GateKind::X(0), GateKind::F(1), GateKind::PInv(2), GateKind::Sum { control: 0, target: 3 }];
        for g in gates {
            assert_eq!(g.inverse().inverse(), g);
            assert_ne!(g.inverse(), g);
        }
    }

    #[test]
    fn display_and_operands() {
        assert_eq!(GateKind::Sum { control: 2, target: 0 }.to_string(), "SUM 2 0");
        assert_eq!(GateKind::FInv(4).to_string(), "F_INV 4");
        assert_eq!(GateKind::Sum { control: 2, target: 5 }.max_qudit(), 5);
        let seq = [GateKind::F(0), GateKind::P(0)];
        assert_eq!(inverse_sequence(&seq), vec![GateKind::PInv(0), GateKind::FInv(0)]);
    }
}
