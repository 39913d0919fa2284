//! Pauli-frame sampling: one noiseless tableau reference run, then cheap
//! per-shot Pauli frames that track how each shot deviates from it.
//!
//! Frames carry no phase. A measurement outcome is the reference outcome
//! shifted by the frame's X power; afterwards the frame picks up a uniform
//! `Z^k`, which stands in for the randomness of the collapse.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::circuit::{Circuit, Instruction, MeasurementRecord};
use crate::gate::GateKind;
use crate::tableau::{Tableau, TableauError};

/// Shots per independently seeded block.
pub const BLOCK_SHOTS: usize = 1024;

const REFERENCE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("frame sampling needs an odd prime dimension, got {0}")]
    UnsupportedDimension(u32),
    #[error("shot count must be at least 1")]
    NoShots,
    #[error(transparent)]
    Tableau(#[from] TableauError),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReferenceTrace {
    pub records: Vec<MeasurementRecord>,
}

/// Runs `c` on the prime tableau with every noise instruction skipped.
pub fn reference_run<R: Rng + ?Sized>(c: &Circuit, rng: &mut R) -> Result<ReferenceTrace, FrameError> {
    let dim = c.dim();
    if !dim.is_odd_prime() {
        return Err(FrameError::UnsupportedDimension(dim.get()));
    }
    let mut t = Tableau::new(c.num_qudits(), dim)?;
    let mut records = Vec::with_capacity(c.num_measurements());
    for instr in c.instructions() {
        match *instr {
            Instruction::Gate(g) => t.apply_gate(g)?,
            Instruction::Measure(q) => records.push(t.measure_z(q, rng)?),
            Instruction::Reset(q) => {
                t.reset(q, rng)?;
            }
            Instruction::Noise { .. } => {}
        }
    }
    Ok(ReferenceTrace { records })
}

/// Frames for a block of shots, stored qudit-major: slot `(q, s)` is `q * shots + s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameBatch {
    d: u32,
    n: usize,
    shots: usize,
    x: Vec<u32>,
    z: Vec<u32>,
    ops: u64,
}

impl FrameBatch {
    pub fn new(n: usize, d: u32, shots: usize) -> Self {
        Self { d, n, shots, x: vec![0; n * shots], z: vec![0; n * shots], ops: 0 }
    }

    pub fn shots(&self) -> usize {
        self.shots
    }

    pub fn x(&self, q: usize, s: usize) -> u32 {
        self.x[q * self.shots + s]
    }

    pub fn z(&self, q: usize, s: usize) -> u32 {
        self.z[q * self.shots + s]
    }

    pub fn set(&mut self, q: usize, s: usize, x: u32, z: u32) {
        self.x[q * self.shots + s] = x % self.d;
        self.z[q * self.shots + s] = z % self.d;
    }

    /// Slot updates performed so far.
    pub fn ops(&self) -> u64 {
        self.ops
    }

    /// Multiplies a uniform `Z^k` into every frame on every qudit. `|0⟩^n` is
    /// invariant under these, so this only seeds the randomness that later
    /// basis changes turn into X components.
    pub fn randomize_z<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for q in 0..self.n {
            for s in 0..self.shots {
                let k = rng.random_range(0..self.d);
                let i = q * self.shots + s;
                self.z[i] = (self.z[i] + k) % self.d;
            }
        }
    }

    fn range(&self, q: usize) -> std::ops::Range<usize> {
        q * self.shots..(q + 1) * self.shots
    }

    pub fn apply_gate(&mut self, g: GateKind) {
        let d = self.d;
        let neg = |v: u32| if v == 0 { 0 } else { d - v };
        let add = |a: u32, b: u32| {
            let s = a + b;
            if s >= d {
                s - d
            } else {
                s
            }
        };
        self.ops += self.shots as u64;
        match g {
            GateKind::X(_) | GateKind::XInv(_) | GateKind::Z(_) | GateKind::ZInv(_) => {}
            GateKind::F(q) => {
                for i in self.range(q) {
                    let (x, z) = (self.x[i], self.z[i]);
                    self.x[i] = neg(z);
                    self.z[i] = x;
                }
            }
            GateKind::FInv(q) => {
                for i in self.range(q) {
                    let (x, z) = (self.x[i], self.z[i]);
                    self.x[i] = z;
                    self.z[i] = neg(x);
                }
            }
            GateKind::P(q) => {
                for i in self.range(q) {
                    self.z[i] = add(self.z[i], self.x[i]);
                }
            }
            GateKind::PInv(q) => {
                for i in self.range(q) {
                    self.z[i] = add(self.z[i], neg(self.x[i]));
                }
            }
            GateKind::Sum { control, target } | GateKind::SumInv { control, target } => {
                let inverse = matches!(g, GateKind::SumInv { .. });
                let (c0, t0) = (control * self.shots, target * self.shots);
                for s in 0..self.shots {
                    let (xc, zt) = (self.x[c0 + s], self.z[t0 + s]);
                    if inverse {
                        self.x[t0 + s] = add(self.x[t0 + s], neg(xc));
                        self.z[c0 + s] = add(self.z[c0 + s], zt);
                    } else {
                        self.x[t0 + s] = add(self.x[t0 + s], xc);
                        self.z[c0 + s] = add(self.z[c0 + s], neg(zt));
                    }
                }
            }
        }
    }

    /// Per-shot outcomes of measuring `q`, given the reference outcome.
    pub fn measure<R: Rng + ?Sized>(&mut self, q: usize, reference: u32, rng: &mut R, out: &mut Vec<u32>) {
        self.ops += self.shots as u64;
        out.clear();
        for i in self.range(q) {
            out.push((reference + self.x[i]) % self.d);
            let k = rng.random_range(0..self.d);
            self.z[i] = (self.z[i] + k) % self.d;
        }
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) {
        self.ops += self.shots as u64;
        for i in self.range(q) {
            self.x[i] = 0;
            self.z[i] = rng.random_range(0..self.d);
        }
    }

    pub fn apply_noise<R: Rng + ?Sized>(&mut self, q: usize, channel: &crate::noise::NoiseChannel, rng: &mut R) {
        self.ops += self.shots as u64;
        for i in self.range(q) {
            let (a, b) = channel.sample(self.d, rng);
            self.x[i] = (self.x[i] + a) % self.d;
            self.z[i] = (self.z[i] + b) % self.d;
        }
    }
}

fn block_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs one block of `shots` frames against the reference; returns per-shot records and slot ops.
fn run_block(
    c: &Circuit,
    reference: &ReferenceTrace,
    shots: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<MeasurementRecord>>, u64) {
    let d = c.dim().get();
    let mut batch = FrameBatch::new(c.num_qudits(), d, shots);
    batch.randomize_z(rng);
    let m = reference.records.len();
    let mut out: Vec<Vec<MeasurementRecord>> = (0..shots).map(|_| Vec::with_capacity(m)).collect();
    let mut buf = Vec::with_capacity(shots);
    let mut k = 0;
    for instr in c.instructions() {
        match *instr {
            Instruction::Gate(g) => batch.apply_gate(g),
            Instruction::Measure(q) => {
                let rec = reference.records[k];
                batch.measure(q, rec.outcome, rng, &mut buf);
                for (s, &o) in buf.iter().enumerate() {
                    out[s].push(MeasurementRecord { outcome: o, ..rec });
                }
                k += 1;
            }
            Instruction::Reset(q) => batch.reset(q, rng),
            Instruction::Noise { qudit, channel } => batch.apply_noise(qudit, &channel, rng),
        }
    }
    (out, batch.ops())
}

/// Frame-sampled records for `shots` shots; independent of the rayon pool size.
pub fn sample_frames(c: &Circuit, shots: usize, seed: u64) -> Result<Vec<Vec<MeasurementRecord>>, FrameError> {
    sample_frames_counted(c, shots, seed).map(|(r, _)| r)
}

/// As [`sample_frames`], also returning the total number of frame slot updates.
pub fn sample_frames_counted(
    c: &Circuit,
    shots: usize,
    seed: u64,
) -> Result<(Vec<Vec<MeasurementRecord>>, u64), FrameError> {
    if shots == 0 {
        return Err(FrameError::NoShots);
    }
    let reference = reference_run(c, &mut block_rng(seed, REFERENCE_STREAM))?;
    let blocks = shots.div_ceil(BLOCK_SHOTS);
    let parts: Vec<(Vec<Vec<MeasurementRecord>>, u64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let size = BLOCK_SHOTS.min(shots - b * BLOCK_SHOTS);
            run_block(c, &reference, size, &mut block_rng(seed, b as u64))
        })
        .collect();
    let mut records = Vec::with_capacity(shots);
    let mut ops = 0;
    for (r, o) in parts {
        records.extend(r);
        ops += o;
    }
    Ok((records, ops))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_deutsch_jozsa, build_ghz_chain, DjOracle};
    use crate::pauli::Dimension;

    fn dim(d: u32) -> Dimension {
        Dimension::new(d).unwrap()
    }

    #[test]
    fn reference_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dj = build_deutsch_jozsa(dim(3), DjOracle::Identity);
        let r = reference_run(&dj, &mut rng).unwrap();
        assert_eq!(r.records, vec![MeasurementRecord { qudit: 0, seq: 0, deterministic: true, outcome: 2 }]);
        let ghz = build_ghz_chain(2, dim(3));
        assert!(reference_run(&ghz, &mut rng).unwrap().records.is_empty());
        let mut pair = ghz.clone();
        pair.measure(1).unwrap().measure(0).unwrap();
        let r = reference_run(&pair, &mut rng).unwrap();
        assert!(!r.records[0].deterministic && r.records[1].deterministic);
        assert_eq!(r.records[0].outcome, r.records[1].outcome);
        assert!(matches!(
            reference_run(&Circuit::new(1, dim(4)).unwrap(), &mut rng),
            Err(FrameError::UnsupportedDimension(4))
        ));
    }

    #[test]
    fn frame_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut b = FrameBatch::new(2, 3, 1);
        b.set(0, 0, 1, 0);
        let mut out = Vec::new();
        b.clone().measure(0, 0, &mut rng, &mut out);
        assert_eq!(out, vec![1]);
        b.apply_gate(GateKind::Sum { control: 0, target: 1 });
        assert_eq!((b.x(0, 0), b.x(1, 0), b.z(0, 0), b.z(1, 0)), (1, 1, 0, 0));
    }

    #[test]
    fn gate_then_inverse_is_identity_on_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut b = FrameBatch::new(3, 5, 64);
        b.randomize_z(&mut rng);
        for s in 0..64 {
            b.set(s % 3, s, s as u32, 2 * s as u32);
        }
        let before = b.clone();
        for g in [GateKind::F(0), GateKind::P(1), GateKind::Sum { control: 2, target: 0 }, GateKind::FInv(2)] {
            b.apply_gate(g);
            b.apply_gate(g.inverse());
        }
        assert_eq!(b.x, before.x);
        assert_eq!(b.z, before.z);
    }

    #[test]
    fn noiseless_deterministic_circuit_replicates_reference() {
        let dj = build_deutsch_jozsa(dim(5), DjOracle::Identity);
        let (shots, ops) = sample_frames_counted(&dj, 3000, 7).unwrap();
        assert_eq!(shots.len(), 3000);
        assert!(shots.iter().all(|s| s.len() == 1 && s[0].outcome == 4 && s[0].deterministic));
        assert_eq!(ops, 3000 * dj.instructions().len() as u64);
    }
}
