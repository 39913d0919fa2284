//! Single-qudit probabilistic Pauli channels.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pauli::{Dimension, PauliString};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// `X^a`, `a` uniform in `1..d`.
    Flip,
    /// `Z^a`, `a` uniform in `1..d`.
    Phase,
    /// `X^a Z^b`, uniform over the `d² - 1` non-identity pairs.
    Depolarizing,
}

impl NoiseKind {
    pub fn letter(self) -> char {
        match self {
            NoiseKind::Flip => 'f',
            NoiseKind::Phase => 'p',
            NoiseKind::Depolarizing => 'd',
        }
    }

    pub fn from_letter(c: &str) -> Option<Self> {
        match c {
            "f" => Some(NoiseKind::Flip),
            "p" => Some(NoiseKind::Phase),
            "d" => Some(NoiseKind::Depolarizing),
            _ => None,
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("noise probability {0} is outside [0, 1]")]
pub struct BadProbability(pub f64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseChannel {
    pub kind: NoiseKind,
    pub prob: f64,
}

impl NoiseChannel {
    pub fn new(kind: NoiseKind, prob: f64) -> Result<Self, BadProbability> {
        if !(0.0..=1.0).contains(&prob) {
            return Err(BadProbability(prob));
        }
        Ok(Self { kind, prob })
    }

    /// Draws the `(x, z)` exponents of one error `X^x Z^z`.
    ///
    /// Every call consumes exactly one `f64` and one integer draw, so the
    /// stream position after `k` events does not depend on which branch fired.
    pub fn sample<R: Rng + ?Sized>(&self, d: u32, rng: &mut R) -> (u32, u32) {
        let u: f64 = rng.random();
        let span = match self.kind {
            NoiseKind::Flip | NoiseKind::Phase => d - 1,
            NoiseKind::Depolarizing => d * d - 1,
        };
        let idx = rng.random_range(0..span);
        if u >= self.prob {
            return (0, 0);
        }
        match self.kind {
            NoiseKind::Flip => (idx + 1, 0),
            NoiseKind::Phase => (0, idx + 1),
            NoiseKind::Depolarizing => ((idx + 1) / d, (idx + 1) % d),
        }
    }
}

/// One error event as a single-qudit Pauli string.
pub fn sample_error<R: Rng + ?Sized>(ch: &NoiseChannel, dim: Dimension, rng: &mut R) -> PauliString {
    let (x, z) = ch.sample(dim.get(), rng);
    PauliString::from_exponents(dim, &[x as i64], &[z as i64], 0).expect("single slot")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_probability_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for kind in [NoiseKind::Flip, NoiseKind::Phase, NoiseKind::Depolarizing] {
            let ch = NoiseChannel::new(kind, 0.0).unwrap();
            assert!((0..1000).all(|_| ch.sample(3, &mut rng) == (0, 0)));
        }
        assert!(NoiseChannel::new(NoiseKind::Flip, 1.5).is_err());
    }

    #[test]
    fn certain_flip_splits_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ch = NoiseChannel::new(NoiseKind::Flip, 1.0).unwrap();
        let mut counts = [0usize; 3];
        for _ in 0..10_000 {
            let (x, z) = ch.sample(3, &mut rng);
            assert_eq!(z, 0);
            counts[x as usize] += 1;
        }
        assert_eq!(counts[0], 0);
        assert!((counts[1] as f64 / 1e4 - 0.5).abs() < 0.02);
    }

    #[test]
    fn depolarizing_never_identity_when_firing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ch = NoiseChannel::new(NoiseKind::Depolarizing, 1.0).unwrap();
        for _ in 0..5000 {
            assert_ne!(ch.sample(5, &mut rng), (0, 0));
        }
    }
}
