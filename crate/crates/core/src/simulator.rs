//! Shot sampling across the three backends.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, Instruction, MeasurementRecord};
use crate::frames::{self, FrameError};
use crate::statevector::{DenseError, DenseState};
use crate::tableau::{Tableau, TableauError};
use crate::weyl::{WeylError, WeylTableau};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// One independent stabilizer run per shot (prime tableau, or Weyl for other `d`).
    Tableau,
    /// Reference run plus Pauli frames; odd prime `d` only.
    Frames,
    /// Dense state vector.
    Statevector,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Tableau => "tableau",
            Method::Frames => "frames",
            Method::Statevector => "statevector",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tableau" => Ok(Method::Tableau),
            "frames" => Ok(Method::Frames),
            "statevector" => Ok(Method::Statevector),
            other => Err(format!("unknown method '{other}' (expected tableau, frames or statevector)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("{0}")]
    Unsupported(String),
    #[error("shot count must be at least 1")]
    NoShots,
    #[error(transparent)]
    Tableau(#[from] TableauError),
    #[error(transparent)]
    Weyl(#[from] WeylError),
    #[error(transparent)]
    Dense(#[from] DenseError),
}

impl From<FrameError> for SimError {
    fn from(e: FrameError) -> Self {
        match e {
            FrameError::UnsupportedDimension(d) => {
                SimError::Unsupported(format!("frame sampling needs an odd prime dimension, got {d}"))
            }
            FrameError::NoShots => SimError::NoShots,
            FrameError::Tableau(t) => SimError::Tableau(t),
        }
    }
}

impl From<crate::circuit::CircuitError> for SimError {
    fn from(e: crate::circuit::CircuitError) -> Self {
        SimError::Unsupported(e.to_string())
    }
}

/// Seeded stream for shot `index` of a run.
pub fn shot_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

enum Stab {
    Prime(Tableau),
    Weyl(WeylTableau),
}

/// One shot on the stabilizer backend appropriate for the circuit's dimension.
pub fn run_stabilizer_shot<R: Rng + ?Sized>(c: &Circuit, rng: &mut R) -> Result<Vec<MeasurementRecord>, SimError> {
    let dim = c.dim();
    let n = c.num_qudits();
    let mut st =
        if dim.is_odd_prime() { Stab::Prime(Tableau::new(n, dim)?) } else { Stab::Weyl(WeylTableau::new(n, dim)?) };
    let mut out = Vec::with_capacity(c.num_measurements());
    for instr in c.instructions() {
        match (&mut st, *instr) {
            (Stab::Prime(t), Instruction::Gate(g)) => t.apply_gate(g)?,
            (Stab::Weyl(t), Instruction::Gate(g)) => t.apply_gate(g)?,
            (Stab::Prime(t), Instruction::Measure(q)) => out.push(t.measure_z(q, rng)?),
            (Stab::Weyl(t), Instruction::Measure(q)) => out.push(t.measure_z(q, rng)?),
            (Stab::Prime(t), Instruction::Reset(q)) => {
                t.reset(q, rng)?;
            }
            (Stab::Weyl(t), Instruction::Reset(q)) => {
                t.reset(q, rng)?;
            }
            (Stab::Prime(t), Instruction::Noise { qudit, channel }) => {
                let (a, b) = channel.sample(dim.get(), rng);
                t.apply_local_pauli(qudit, a, b);
            }
            (Stab::Weyl(t), Instruction::Noise { qudit, channel }) => {
                let (a, b) = channel.sample(dim.get(), rng);
                t.apply_local_pauli(qudit, a, b);
            }
        }
    }
    Ok(out)
}

/// Independent stabilizer runs, shot `s` seeded from stream `s`.
pub fn sample_naive(c: &Circuit, shots: usize, seed: u64) -> Result<Vec<Vec<MeasurementRecord>>, SimError> {
    if shots == 0 {
        return Err(SimError::NoShots);
    }
    (0..shots).into_par_iter().map(|s| run_stabilizer_shot(c, &mut shot_rng(seed, s as u64))).collect()
}

fn run_dense_tail<R: Rng + ?Sized>(
    c: &Circuit,
    state: &mut DenseState,
    from: usize,
    rng: &mut R,
) -> Result<Vec<MeasurementRecord>, SimError> {
    let d = c.dim().get();
    let mut out = Vec::new();
    let mut seq = 0;
    for instr in &c.instructions()[from..] {
        match *instr {
            Instruction::Gate(g) => state.apply_gate(g)?,
            Instruction::Measure(q) => {
                let (outcome, deterministic) = state.measure(q, rng)?;
                out.push(MeasurementRecord { qudit: q, seq, deterministic, outcome });
                seq += 1;
            }
            Instruction::Reset(q) => {
                state.reset(q, rng)?;
            }
            Instruction::Noise { qudit, channel } => {
                let (a, b) = channel.sample(d, rng);
                let mut p = crate::pauli::PauliString::identity(c.num_qudits(), c.dim());
                p.x[qudit] = a;
                p.z[qudit] = b;
                state.apply_pauli(&p)?;
            }
        }
    }
    Ok(out)
}

/// Dense simulation. The leading gate-only prefix is evolved once and shared
/// by all shots; everything from the first measurement, reset or noise event
/// on is replayed per shot.
pub fn sample_statevector(c: &Circuit, shots: usize, seed: u64) -> Result<Vec<Vec<MeasurementRecord>>, SimError> {
    if shots == 0 {
        return Err(SimError::NoShots);
    }
    let prefix =
        c.instructions().iter().position(|i| !matches!(i, Instruction::Gate(_))).unwrap_or(c.instructions().len());
    let mut base = DenseState::zero(c.num_qudits(), c.dim().get())?;
    for instr in &c.instructions()[..prefix] {
        if let Instruction::Gate(g) = instr {
            base.apply_gate(*g)?;
        }
    }
    (0..shots)
        .into_par_iter()
        .map(|s| {
            let mut st = base.clone();
            run_dense_tail(c, &mut st, prefix, &mut shot_rng(seed, s as u64))
        })
        .collect()
}

/// Samples `shots` shots of `c` with the chosen backend.
pub fn sample(c: &Circuit, shots: usize, seed: u64, method: Method) -> Result<Vec<Vec<MeasurementRecord>>, SimError> {
    match method {
        Method::Tableau => sample_naive(c, shots, seed),
        Method::Frames => Ok(frames::sample_frames(c, shots, seed)?),
        Method::Statevector => sample_statevector(c, shots, seed),
    }
}
