//! Circuit representation, the SDIM text format, and circuit builders.
//!
//! ```text
//! DIM 3
//! QUDITS 2
//! H 0          # F on qudit 0
//! CNOT 0 1     # SUM, control first
//! N1 1 d 0.01  # depolarizing event
//! M 1
//! RESET 0
//! ```

use std::fmt;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gate::GateKind;
use crate::noise::{NoiseChannel, NoiseKind};
use crate::pauli::Dimension;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Instruction {
    Gate(GateKind),
    Measure(usize),
    Reset(usize),
    Noise { qudit: usize, channel: NoiseChannel },
}

impl Instruction {
    fn qudits(&self) -> ([usize; 2], usize) {
        match *self {
            Instruction::Gate(g) => g.qudits(),
            Instruction::Measure(q) | Instruction::Reset(q) => ([q, q], 1),
            Instruction::Noise { qudit, .. } => ([qudit, qudit], 1),
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Gate(g) => write!(f, "{g}"),
            Instruction::Measure(q) => write!(f, "M {q}"),
            Instruction::Reset(q) => write!(f, "RESET {q}"),
            Instruction::Noise { qudit, channel } => write!(f, "N1 {qudit} {} {}", channel.kind, channel.prob),
        }
    }
}

/// One measurement outcome. `seq` is the global index of the measurement in program order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub qudit: usize,
    pub seq: usize,
    pub deterministic: bool,
    pub outcome: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("qudit {index} out of range for {n} qudits")]
    QuditOutOfRange { index: usize, n: usize },
    #[error("two-qudit gate uses qudit {0} twice")]
    RepeatedQudit(usize),
    #[error("a circuit needs at least one qudit")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n: usize,
    dim: Dimension,
    instructions: Vec<Instruction>,
}

impl Circuit {
    pub fn new(n: usize, dim: Dimension) -> Result<Self, CircuitError> {
        if n == 0 {
            return Err(CircuitError::Empty);
        }
        Ok(Self { n, dim, instructions: Vec::new() })
    }

    pub fn num_qudits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn num_measurements(&self) -> usize {
        self.instructions.iter().filter(|i| matches!(i, Instruction::Measure(_))).count()
    }

    pub fn has_noise(&self) -> bool {
        self.instructions.iter().any(|i| matches!(i, Instruction::Noise { .. }))
    }

    pub fn push(&mut self, instr: Instruction) -> Result<&mut Self, CircuitError> {
        let (qs, k) = instr.qudits();
        for &q in &qs[..k] {
            if q >= self.n {
                return Err(CircuitError::QuditOutOfRange { index: q, n: self.n });
            }
        }
        if k == 2 && qs[0] == qs[1] {
            return Err(CircuitError::RepeatedQudit(qs[0]));
        }
        self.instructions.push(instr);
        Ok(self)
    }

    pub fn gate(&mut self, g: GateKind) -> Result<&mut Self, CircuitError> {
        self.push(Instruction::Gate(g))
    }

    pub fn measure(&mut self, q: usize) -> Result<&mut Self, CircuitError> {
        self.push(Instruction::Measure(q))
    }

    pub fn reset(&mut self, q: usize) -> Result<&mut Self, CircuitError> {
        self.push(Instruction::Reset(q))
    }

    pub fn noise(&mut self, q: usize, channel: NoiseChannel) -> Result<&mut Self, CircuitError> {
        self.push(Instruction::Noise { qudit: q, channel })
    }

    pub fn measure_all(&mut self) -> &mut Self {
        for q in 0..self.n {
            self.instructions.push(Instruction::Measure(q));
        }
        self
    }

    /// Appends `other`'s instructions; panics if `other` is wider than `self`.
    pub fn extend_from(&mut self, other: &Circuit) -> &mut Self {
        assert!(other.n <= self.n && other.dim == self.dim);
        self.instructions.extend_from_slice(&other.instructions);
        self
    }

    pub fn to_sdim(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DIM {}", self.dim)?;
        writeln!(f, "QUDITS {}", self.n)?;
        for i in &self.instructions {
            writeln!(f, "{i}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

struct Token<'a> {
    text: &'a str,
    col: usize,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError { line, column, message: message.into() }
}

fn tokenize(body: &str, line: usize) -> Result<Vec<Token<'_>>, ParseError> {
    let mut out = Vec::new();
    let mut col = 1;
    for part in body.split(' ') {
        if part.is_empty() {
            return Err(err(line, col, "tokens must be separated by a single space"));
        }
        if let Some(pos) = part.find(|c: char| c.is_whitespace()) {
            return Err(err(line, col + body_chars(&part[..pos]), "unexpected whitespace character"));
        }
        out.push(Token { text: part, col });
        col += body_chars(part) + 1;
    }
    Ok(out)
}

fn body_chars(s: &str) -> usize {
    s.chars().count()
}

fn parse_index(t: &Token<'_>, line: usize, n: usize) -> Result<usize, ParseError> {
    let q: usize =
        t.text.parse().map_err(|_| err(line, t.col, format!("expected a qudit index, found '{}'", t.text)))?;
    if q >= n {
        return Err(err(line, t.col, format!("qudit {q} out of range for {n} qudits")));
    }
    Ok(q)
}

fn expect_arity(tokens: &[Token<'_>], want: usize, line: usize, body: &str) -> Result<(), ParseError> {
    if tokens.len() < want + 1 {
        let col = body_chars(body) + 1;
        return Err(err(line, col, format!("'{}' expects {want} operand(s)", tokens[0].text)));
    }
    if tokens.len() > want + 1 {
        let t = &tokens[want + 1];
        return Err(err(line, t.col, format!("unexpected extra operand '{}'", t.text)));
    }
    Ok(())
}

fn single_gate(name: &str) -> Option<fn(usize) -> GateKind> {
    Some(match name {
        "X" => GateKind::X,
        "X_INV" => GateKind::XInv,
        "Z" => GateKind::Z,
        "Z_INV" => GateKind::ZInv,
        "F" | "H" => GateKind::F,
        "F_INV" | "H_INV" => GateKind::FInv,
        "P" => GateKind::P,
        "P_INV" => GateKind::PInv,
        _ => return None,
    })
}

/// Parses SDIM text into a circuit.
pub fn parse_circuit(text: &str) -> Result<Circuit, ParseError> {
    let mut dim: Option<Dimension> = None;
    let mut circuit: Option<Circuit> = None;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let body = raw.split('#').next().unwrap_or("").trim_end();
        if body.is_empty() {
            continue;
        }
        let tokens = tokenize(body, line)?;
        let head = tokens[0].text;
        let Some(d) = dim else {
            if head != "DIM" {
                return Err(err(line, 1, "expected header 'DIM <d>'"));
            }
            expect_arity(&tokens, 1, line, body)?;
            let t = &tokens[1];
            let v: u32 = t.text.parse().map_err(|_| err(line, t.col, format!("invalid dimension '{}'", t.text)))?;
            dim = Some(Dimension::new(v).map_err(|e| err(line, t.col, e.to_string()))?);
            continue;
        };
        let Some(c) = circuit.as_mut() else {
            if head != "QUDITS" {
                return Err(err(line, 1, "expected header 'QUDITS <n>'"));
            }
            expect_arity(&tokens, 1, line, body)?;
            let t = &tokens[1];
            let n: usize = t.text.parse().map_err(|_| err(line, t.col, format!("invalid qudit count '{}'", t.text)))?;
            circuit = Some(Circuit::new(n, d).map_err(|e| err(line, t.col, e.to_string()))?);
            continue;
        };
        let n = c.num_qudits();
        let instr = if let Some(ctor) = single_gate(head) {
            expect_arity(&tokens, 1, line, body)?;
            Instruction::Gate(ctor(parse_index(&tokens[1], line, n)?))
        } else {
            match head {
                "SUM" | "CNOT" | "SUM_INV" | "CNOT_INV" => {
                    expect_arity(&tokens, 2, line, body)?;
                    let control = parse_index(&tokens[1], line, n)?;
                    let target = parse_index(&tokens[2], line, n)?;
                    if control == target {
                        return Err(err(line, tokens[2].col, "control and target must differ"));
                    }
                    if head.ends_with("_INV") {
                        Instruction::Gate(GateKind::SumInv { control, target })
                    } else {
                        Instruction::Gate(GateKind::Sum { control, target })
                    }
                }
                "M" => {
                    expect_arity(&tokens, 1, line, body)?;
                    Instruction::Measure(parse_index(&tokens[1], line, n)?)
                }
                "RESET" => {
                    expect_arity(&tokens, 1, line, body)?;
                    Instruction::Reset(parse_index(&tokens[1], line, n)?)
                }
                "N1" => {
                    expect_arity(&tokens, 3, line, body)?;
                    let qudit = parse_index(&tokens[1], line, n)?;
                    let kind = NoiseKind::from_letter(tokens[2].text)
                        .ok_or_else(|| err(line, tokens[2].col, format!("unknown noise type '{}'", tokens[2].text)))?;
                    let t = &tokens[3];
                    let prob: f64 =
                        t.text.parse().map_err(|_| err(line, t.col, format!("invalid probability '{}'", t.text)))?;
                    let channel = NoiseChannel::new(kind, prob).map_err(|e| err(line, t.col, e.to_string()))?;
                    Instruction::Noise { qudit, channel }
                }
                "DIM" | "QUDITS" => return Err(err(line, 1, format!("duplicate header '{head}'"))),
                _ => return Err(err(line, 1, format!("unknown instruction '{head}'"))),
            }
        };
        c.push(instr).map_err(|e| err(line, 1, e.to_string()))?;
    }
    match (dim, circuit) {
        (_, Some(c)) => Ok(c),
        (None, None) => Err(err(last_line.max(1), 1, "missing header 'DIM <d>'")),
        (Some(_), None) => Err(err(last_line.max(1), 1, "missing header 'QUDITS <n>'")),
    }
}

pub fn serialize_circuit(c: &Circuit) -> String {
    c.to_string()
}

/// Oracle choice for the restricted Deutsch-Jozsa circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DjOracle {
    /// `f(x) = j`: the oracle is `X^j` on the ancilla.
    Constant(u32),
    /// `f(x) = x`: the oracle is one SUM from input to ancilla.
    Identity,
}

/// Two-qudit Deutsch-Jozsa: measures `0` for a constant oracle and `d - 1` for the identity.
pub fn build_deutsch_jozsa(dim: Dimension, oracle: DjOracle) -> Circuit {
    let mut c = Circuit::new(2, dim).expect("two qudits");
    c.gate(GateKind::F(0)).unwrap();
    c.gate(GateKind::X(1)).unwrap();
    c.gate(GateKind::F(1)).unwrap();
    match oracle {
        DjOracle::Constant(j) => {
            for _ in 0..j % dim.get() {
                c.gate(GateKind::X(1)).unwrap();
            }
        }
        DjOracle::Identity => {
            c.gate(GateKind::Sum { control: 0, target: 1 }).unwrap();
        }
    }
    c.gate(GateKind::FInv(0)).unwrap();
    c.measure(0).unwrap();
    c
}

/// Bernstein-Vazirani for `f(x) = x·s`: data qudits `0..n`, ancilla `n`.
/// Measuring the data register returns `s`.
pub fn build_bernstein_vazirani(dim: Dimension, secret: &[u32]) -> Circuit {
    let n = secret.len();
    let anc = n;
    let mut c = Circuit::new(n + 1, dim).expect("nonempty");
    for q in 0..n {
        c.gate(GateKind::F(q)).unwrap();
    }
    // F|d-1⟩ turns each SUM into the phase kickback ω^{x_i}.
    c.gate(GateKind::XInv(anc)).unwrap();
    c.gate(GateKind::F(anc)).unwrap();
    for (q, &s) in secret.iter().enumerate() {
        for _ in 0..s % dim.get() {
            c.gate(GateKind::Sum { control: q, target: anc }).unwrap();
        }
    }
    for q in 0..n {
        c.gate(GateKind::FInv(q)).unwrap();
    }
    for q in 0..n {
        c.measure(q).unwrap();
    }
    c
}

pub fn random_single_qudit_gate<R: Rng + ?Sized>(q: usize, rng: &mut R) -> GateKind {
    GateKind::SINGLE_QUDIT_KINDS.choose(rng).expect("nonempty")(q)
}

/// `depth` random single-qudit gates on each of 7 qudits, a CNOT chain, then all measured.
pub fn build_local_gate_test<R: Rng + ?Sized>(dim: Dimension, depth: usize, rng: &mut R) -> Circuit {
    const N: usize = 7;
    let mut c = Circuit::new(N, dim).expect("nonempty");
    for _ in 0..depth {
        for q in 0..N {
            c.gate(random_single_qudit_gate(q, rng)).unwrap();
        }
    }
    for q in 0..N - 1 {
        c.gate(GateKind::Sum { control: q, target: q + 1 }).unwrap();
    }
    c.measure_all();
    c
}

/// `H 0` followed by a CNOT chain; no measurements.
pub fn build_ghz_chain(n: usize, dim: Dimension) -> Circuit {
    let mut c = Circuit::new(n, dim).expect("nonempty");
    c.gate(GateKind::F(0)).unwrap();
    for q in 0..n.saturating_sub(1) {
        c.gate(GateKind::Sum { control: q, target: q + 1 }).unwrap();
    }
    c
}

/// Probability that a random-circuit slot is a SUM gate.
pub const RANDOM_SUM_PROBABILITY: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomCircuitConfig {
    pub n: usize,
    pub depth: usize,
    pub sum_probability: f64,
    pub measure_all: bool,
}

impl RandomCircuitConfig {
    pub fn new(n: usize, depth: usize) -> Self {
        Self { n, depth, sum_probability: RANDOM_SUM_PROBABILITY, measure_all: true }
    }
}

/// Each slot is a SUM on a uniformly random ordered pair with probability
/// `sum_probability`, otherwise a uniform single-qudit generator on a uniform qudit.
pub fn build_random_clifford_circuit<R: Rng + ?Sized>(
    dim: Dimension,
    cfg: &RandomCircuitConfig,
    rng: &mut R,
) -> Circuit {
    let n = cfg.n;
    let mut c = Circuit::new(n, dim).expect("nonempty");
    for _ in 0..cfg.depth {
        c.gate(random_gate(n, cfg.sum_probability, rng)).unwrap();
    }
    if cfg.measure_all {
        c.measure_all();
    }
    c
}

pub fn random_gate<R: Rng + ?Sized>(n: usize, sum_probability: f64, rng: &mut R) -> GateKind {
    if n >= 2 && rng.random_bool(sum_probability) {
        let control = rng.random_range(0..n);
        let mut target = rng.random_range(0..n - 1);
        if target >= control {
            target += 1;
        }
        GateKind::Sum { control, target }
    } else {
        let q = rng.random_range(0..n);
        random_single_qudit_gate(q, rng)
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
    fn parses_deutsch_jozsa_program() {
        let c = parse_circuit("DIM 3\nQUDITS 2\nH 0\nX 1\nH 1\nCNOT 0 1\nH_INV 0\nM 0\n").unwrap();
        assert_eq!(c, build_deutsch_jozsa(dim(3), DjOracle::Identity));
        assert_eq!(c.to_sdim(), "DIM 3\nQUDITS 2\nF 0\nX 1\nF 1\nSUM 0 1\nF_INV 0\nM 0\n");
    }

    #[test]
    fn parses_noise_line() {
        let c = parse_circuit("DIM 3\nQUDITS 1\nN1 0 d 0.01\nM 0\n").unwrap();
        let ch = NoiseChannel::new(NoiseKind::Depolarizing, 0.01).unwrap();
        assert_eq!(c.instructions(), &[Instruction::Noise { qudit: 0, channel: ch }, Instruction::Measure(0)]);
    }

    #[test]
    fn diagnostics_carry_positions() {
        let e = parse_circuit("DIM 1\nQUDITS 1\n").unwrap_err();
        assert_eq!((e.line, e.column), (1, 5));
        let e = parse_circuit("DIM 3\nQUDITS 2\nH 0\nFOO 1\n").unwrap_err();
        assert_eq!((e.line, e.column), (4, 1));
        let e = parse_circuit("DIM 3\nQUDITS 2\nCNOT 0  1\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 8));
        let e = parse_circuit("DIM 3\nQUDITS 2\nM 2\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 3));
        let e = parse_circuit("DIM 3\nQUDITS 2\nCNOT 1\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 7));
        let e = parse_circuit("DIM 3\nQUDITS 2\nCNOT 1 1\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse_circuit("# nothing\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_circuit("QUDITS 2\n").unwrap_err();
        assert_eq!((e.line, e.column), (1, 1));
        let e = parse_circuit("DIM 3\nQUDITS 1\nN1 0 d 1.5\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 8));
    }

    #[test]
    fn comments_and_trailing_space() {
        let c = parse_circuit("# header\nDIM 5 \nQUDITS 1 # one\n\nP 0\nRESET 0").unwrap();
        assert_eq!(c.instructions(), &[Instruction::Gate(GateKind::P(0)), Instruction::Reset(0)]);
    }

    #[test]
    fn builders() {
        let dj = build_deutsch_jozsa(dim(3), DjOracle::Constant(0));
        assert_eq!(dj.to_sdim(), "DIM 3\nQUDITS 2\nF 0\nX 1\nF 1\nF_INV 0\nM 0\n");
        let ghz = build_ghz_chain(2, dim(3));
        assert_eq!(
            ghz.instructions(),
            &[Instruction::Gate(GateKind::F(0)), Instruction::Gate(GateKind::Sum { control: 0, target: 1 })]
        );
        let bv = build_bernstein_vazirani(dim(2), &[1, 0, 0]);
        let sums: Vec<_> = bv
            .instructions()
            .iter()
            .filter_map(|i| match i {
                Instruction::Gate(GateKind::Sum { control, .. }) => Some(*control),
                _ => None,
            })
            .collect();
        assert_eq!(sums, vec![0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let local = build_local_gate_test(dim(3), 0, &mut rng);
        assert_eq!(local.instructions().len(), 6 + 7);
        let cfg = RandomCircuitConfig::new(4, 50);
        let a = build_random_clifford_circuit(dim(5), &cfg, &mut ChaCha8Rng::seed_from_u64(9));
        let b = build_random_clifford_circuit(dim(5), &cfg, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert_eq!(parse_circuit(&a.to_sdim()).unwrap(), a);
    }
}
