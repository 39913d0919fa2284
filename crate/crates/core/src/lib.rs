//! Stabilizer simulation for qudits of arbitrary dimension.
//!
//! Prime dimensions use a destabilizer/stabilizer tableau ([`tableau`]);
//! composite dimensions and `d = 2` use Weyl operators with Smith-normal-form
//! measurement ([`weyl`]). Multi-shot noisy runs go through Pauli frames
//! ([`frames`]), and [`statevector`] is a small dense simulator used as the
//! ground truth in tests.

#![allow(clippy::needless_range_loop)]

pub mod arith;
pub mod circuit;
pub mod experiments;
pub mod frames;
pub mod gate;
pub mod linalg;
pub mod noise;
pub mod pauli;
pub mod simulator;
pub mod snf;
pub mod statevector;
pub mod tableau;
pub mod weyl;

pub use circuit::{Circuit, Instruction, MeasurementRecord, ParseError};
pub use gate::GateKind;
pub use noise::{NoiseChannel, NoiseKind};
pub use pauli::{Dimension, PauliError, PauliString};
pub use simulator::{sample, Method, SimError};
pub use tableau::Tableau;
pub use weyl::{WeylOp, WeylTableau};
