//! Validation and benchmarking drivers: distance checks between backends,
//! channel statistics, randomized benchmarking and its detection-code variant.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{build_random_clifford_circuit, Circuit, MeasurementRecord, RandomCircuitConfig};
use crate::gate::GateKind;
use crate::linalg::{nullspace, rank, rref, Matrix};
use crate::noise::{NoiseChannel, NoiseKind};
use crate::pauli::{Dimension, PauliString};
use crate::simulator::{sample, Method, SimError};
use crate::tableau::apply_rule;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("distributions are not comparable: {0}")]
    Mismatch(String),
    #[error("invalid distribution: {0}")]
    BadDistribution(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported operator: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn config_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Outcome values of each shot, in program order.
pub fn outcomes(shots: &[Vec<MeasurementRecord>]) -> Vec<Vec<u32>> {
    shots.iter().map(|s| s.iter().map(|r| r.outcome).collect()).collect()
}

/// Probabilities over outcome tuples of fixed length.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    d: u32,
    len: usize,
    probs: BTreeMap<Vec<u32>, f64>,
}

impl OutcomeDistribution {
    pub fn new(d: u32, probs: BTreeMap<Vec<u32>, f64>) -> Result<Self, ExperimentError> {
        let len = probs.keys().next().map_or(0, |k| k.len());
        let mut total = 0.0;
        for (k, &p) in &probs {
            if k.len() != len {
                return Err(ExperimentError::BadDistribution("labels of different lengths".into()));
            }
            if k.iter().any(|&v| v >= d) {
                return Err(ExperimentError::BadDistribution(format!("label {k:?} has a digit >= {d}")));
            }
            if p.is_nan() || p < 0.0 {
                return Err(ExperimentError::BadDistribution(format!("negative probability {p}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(ExperimentError::BadDistribution(format!("probabilities sum to {total}")));
        }
        Ok(Self { d, len, probs })
    }

    /// Single-outcome distribution from `probs[j] = P(j)`.
    pub fn single(d: u32, probs: &[f64]) -> Result<Self, ExperimentError> {
        if probs.len() != d as usize {
            return Err(ExperimentError::BadDistribution(format!("expected {d} probabilities, got {}", probs.len())));
        }
        let map = probs.iter().enumerate().filter(|(_, &p)| p != 0.0).map(|(j, &p)| (vec![j as u32], p)).collect();
        Self::new(d, map)
    }

    pub fn point_mass(d: u32, label: Vec<u32>) -> Result<Self, ExperimentError> {
        Self::new(d, BTreeMap::from([(label, 1.0)]))
    }

    pub fn from_samples(d: u32, samples: &[Vec<u32>]) -> Result<Self, ExperimentError> {
        if samples.is_empty() {
            return Err(ExperimentError::BadDistribution("no samples".into()));
        }
        let mut counts: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
        for s in samples {
            *counts.entry(s.clone()).or_default() += 1;
        }
        let n = samples.len() as f64;
        Self::new(d, counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect())
    }

    pub fn from_shots(d: u32, shots: &[Vec<MeasurementRecord>]) -> Result<Self, ExperimentError> {
        Self::from_samples(d, &outcomes(shots))
    }

    pub fn dim(&self) -> u32 {
        self.d
    }

    pub fn label_len(&self) -> usize {
        self.len
    }

    pub fn prob(&self, label: &[u32]) -> f64 {
        self.probs.get(label).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<u32>, f64)> {
        self.probs.iter().map(|(k, &p)| (k, p))
    }

    /// Distribution of position `i` of the label as a dense vector.
    pub fn marginal(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.d as usize];
        for (k, &p) in &self.probs {
            out[k[i] as usize] += p;
        }
        out
    }
}

/// Total variation distance `½ Σ |P − Q|`.
pub fn tvd(p: &OutcomeDistribution, q: &OutcomeDistribution) -> Result<f64, ExperimentError> {
    if p.d != q.d || p.len != q.len {
        return Err(ExperimentError::Mismatch(format!(
            "(d={}, length {}) vs (d={}, length {})",
            p.d, p.len, q.d, q.len
        )));
    }
    let mut sum = 0.0;
    for (k, &a) in &p.probs {
        sum += (a - q.prob(k)).abs();
    }
    for (k, &b) in &q.probs {
        if !p.probs.contains_key(k) {
            sum += b;
        }
    }
    Ok((0.5 * sum).min(1.0))
}

fn dense_tvd(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn histogram(d: u32, values: impl Iterator<Item = u32>) -> Vec<f64> {
    let mut h = vec![0.0; d as usize];
    let mut n = 0usize;
    for v in values {
        h[v as usize] += 1.0;
        n += 1;
    }
    h.iter_mut().for_each(|x| *x /= n.max(1) as f64);
    h
}

/// Largest distance over low-order projections of two samples of outcome tuples:
/// each single-record marginal and the distribution of `o[i+1] − o[i] mod d`
/// for consecutive records. Joint histograms over `d^m` labels are too sparse to
/// compare at practical shot counts.
pub fn projected_tvd(d: u32, a: &[Vec<u32>], b: &[Vec<u32>]) -> Result<f64, ExperimentError> {
    if a.is_empty() || b.is_empty() {
        return Err(ExperimentError::BadDistribution("no samples".into()));
    }
    let m = a[0].len();
    if a.iter().chain(b).any(|s| s.len() != m) {
        return Err(ExperimentError::Mismatch("shots with different record counts".into()));
    }
    let mut worst = 0.0f64;
    for i in 0..m {
        let ha = histogram(d, a.iter().map(|s| s[i]));
        let hb = histogram(d, b.iter().map(|s| s[i]));
        worst = worst.max(dense_tvd(&ha, &hb));
    }
    for i in 1..m {
        let diff = |s: &Vec<u32>| (s[i] + d - s[i - 1]) % d;
        let ha = histogram(d, a.iter().map(diff));
        let hb = histogram(d, b.iter().map(diff));
        worst = worst.max(dense_tvd(&ha, &hb));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub first: Method,
    pub second: Method,
    pub circuits: usize,
    pub dims: Vec<u32>,
    pub max_qudits: usize,
    pub max_depth: usize,
    pub shots_first: usize,
    pub shots_second: usize,
    pub threshold: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub index: usize,
    pub dimension: u32,
    pub qudits: usize,
    pub depth: usize,
    pub tvd: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn max_tvd(&self) -> f64 {
        self.rows.iter().map(|r| r.tvd).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,dimension,qudits,depth,tvd,pass\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{:.6},{}", r.index, r.dimension, r.qudits, r.depth, r.tvd, r.pass);
        }
        s
    }
}

/// The `index`-th random circuit of a validation corpus, with its two sampling seeds.
pub fn corpus_circuit(cfg: &ValidationConfig, index: usize) -> Result<(Circuit, u64, u64), ExperimentError> {
    let mut rng = config_rng(cfg.seed, index as u64);
    let d = cfg.dims[rng.random_range(0..cfg.dims.len())];
    let dim = Dimension::new(d).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
    let n = rng.random_range(1..=cfg.max_qudits);
    let depth = rng.random_range(0..=cfg.max_depth);
    let c = build_random_clifford_circuit(dim, &RandomCircuitConfig::new(n, depth), &mut rng);
    Ok((c, rng.random(), rng.random()))
}

/// Samples every corpus circuit on both backends and compares the results.
pub fn validate_backend_pair(cfg: &ValidationConfig) -> Result<ValidationReport, ExperimentError> {
    if cfg.dims.is_empty() || cfg.max_qudits == 0 {
        return Err(ExperimentError::InvalidConfig("need at least one dimension and one qudit".into()));
    }
    let rows = (0..cfg.circuits)
        .into_par_iter()
        .map(|index| {
            let (c, s1, s2) = corpus_circuit(cfg, index)?;
            let a = outcomes(&sample(&c, cfg.shots_first, s1, cfg.first)?);
            let b = outcomes(&sample(&c, cfg.shots_second, s2, cfg.second)?);
            let t = projected_tvd(c.dim().get(), &a, &b)?;
            Ok(ValidationRow {
                index,
                dimension: c.dim().get(),
                qudits: c.num_qudits(),
                depth: c.instructions().len() - c.num_measurements(),
                tvd: t,
                pass: t < cfg.threshold,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(ValidationReport { rows })
}

/// Closed-form outcome distribution of one channel event read out in the error's own basis.
pub fn expected_channel_distribution(kind: NoiseKind, d: u32, p: f64) -> Vec<f64> {
    let df = d as f64;
    let (zero, other) = match kind {
        NoiseKind::Flip | NoiseKind::Phase => (1.0 - p, p / (df - 1.0)),
        NoiseKind::Depolarizing => (1.0 - p + p * (df - 1.0) / (df * df - 1.0), p * df / (df * df - 1.0)),
    };
    let mut q = vec![other; d as usize];
    q[0] = zero;
    q
}

/// One-event test circuit: flip and depolarizing errors are read in Z, phase
/// errors are sandwiched by `F` and `F†` so they show up in the same readout.
pub fn channel_test_circuit(kind: NoiseKind, dim: Dimension, p: f64) -> Result<Circuit, ExperimentError> {
    let ch = NoiseChannel::new(kind, p).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
    let mut c = Circuit::new(1, dim).expect("one qudit");
    if kind == NoiseKind::Phase {
        c.gate(GateKind::F(0)).unwrap();
    }
    c.noise(0, ch).unwrap();
    if kind == NoiseKind::Phase {
        c.gate(GateKind::FInv(0)).unwrap();
    }
    c.measure(0).unwrap();
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub kind: NoiseKind,
    pub dimension: u32,
    pub p: f64,
    pub shots: usize,
    pub expected: Vec<f64>,
    pub empirical: Vec<f64>,
    pub tvd: f64,
}

pub fn channel_distribution_test(
    kind: NoiseKind,
    d: u32,
    p: f64,
    shots: usize,
    seed: u64,
) -> Result<ChannelReport, ExperimentError> {
    let dim = Dimension::new(d).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
    let c = channel_test_circuit(kind, dim, p)?;
    let method = if dim.is_odd_prime() { Method::Frames } else { Method::Tableau };
    let res = sample(&c, shots, seed, method)?;
    let empirical = histogram(d, res.iter().map(|s| s[0].outcome));
    let expected = expected_channel_distribution(kind, d, p);
    let t = dense_tvd(&empirical, &expected);
    Ok(ChannelReport { kind, dimension: d, p, shots, expected, empirical, tvd: t })
}

/// `|Σ_j P(j) ω^j|` for a single-outcome distribution given densely.
pub fn rb_fidelity(probs: &[f64]) -> f64 {
    let d = probs.len() as f64;
    let s: Complex64 = probs
        .iter()
        .enumerate()
        .map(|(j, &p)| Complex64::from_polar(p, 2.0 * std::f64::consts::PI * j as f64 / d))
        .sum();
    s.norm().min(1.0)
}

/// Every single-qudit Clifford (up to global phase) as a shortest word in
/// `F, P, X, Z`, found by breadth-first search on the conjugation action.
#[derive(Debug, Clone)]
pub struct CliffordTable {
    dim: Dimension,
    words: Vec<Vec<GateKind>>,
}

impl CliffordTable {
    pub fn new(dim: Dimension) -> Result<Self, ExperimentError> {
        if !dim.is_odd_prime() {
            return Err(ExperimentError::InvalidConfig(format!(
                "Clifford table needs an odd prime dimension, got {}",
                dim.get()
            )));
        }
        let d = dim.get();
        let key = |rows: &[PauliString; 2]| -> [u32; 6] {
            [rows[0].x[0], rows[0].z[0], rows[0].r, rows[1].x[0], rows[1].z[0], rows[1].r]
        };
        let start = [PauliString::single_x(1, dim, 0, 1), PauliString::single_z(1, dim, 0, 1)];
        let gens = [GateKind::F(0), GateKind::P(0), GateKind::X(0), GateKind::Z(0)];
        let mut seen: HashMap<[u32; 6], usize> = HashMap::new();
        let mut words = vec![Vec::new()];
        seen.insert(key(&start), 0);
        let mut queue = VecDeque::from([(start, 0usize)]);
        while let Some((rows, idx)) = queue.pop_front() {
            for g in gens {
                let mut next = rows.clone();
                for r in next.iter_mut() {
                    apply_rule(r, g, d, d as u64);
                }
                let k = key(&next);
                if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(k) {
                    let mut w = words[idx].clone();
                    w.push(g);
                    e.insert(words.len());
                    words.push(w);
                    queue.push_back((next, words.len() - 1));
                }
            }
        }
        Ok(Self { dim, words })
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Gate word of element `i` acting on qudit 0, in time order.
    pub fn word(&self, i: usize) -> &[GateKind] {
        &self.words[i]
    }

    pub fn random_word<R: Rng + ?Sized>(&self, rng: &mut R) -> &[GateKind] {
        &self.words[rng.random_range(0..self.words.len())]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbConfig {
    pub d: u32,
    pub depths: Vec<usize>,
    pub circuits: usize,
    pub shots: usize,
    pub p: f64,
    pub seed: u64,
}

impl RbConfig {
    fn check(&self) -> Result<(Dimension, NoiseChannel), ExperimentError> {
        let dim = Dimension::new(self.d).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        if self.shots == 0 || self.circuits == 0 || self.depths.is_empty() {
            return Err(ExperimentError::InvalidConfig("shots, circuits and depths must be nonempty".into()));
        }
        let ch = NoiseChannel::new(NoiseKind::Depolarizing, self.p)
            .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        Ok((dim, ch))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub alpha: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbPoint {
    pub depth: usize,
    pub mean_fidelity: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbReport {
    pub points: Vec<RbPoint>,
    pub fit: Option<DecayFit>,
}

impl RbReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("depth,mean_fidelity,stderr,survivor_fraction\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{:.6},{:.6},1", p.depth, p.mean_fidelity, p.stderr);
        }
        s
    }
}

/// Fit `f(D) = B·α^D` by least squares on `ln f`, using points with `f > 1e-3`.
pub fn fit_decay(points: &[(usize, f64)]) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(_, f)| *f > 1e-3).map(|&(d, f)| (d as f64, f.ln())).collect();
    if pts.is_empty() {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(DecayFit { alpha: slope.exp(), b: (my - slope * mx).exp() })
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One RB sequence: `depth` random Cliffords each followed by a depolarizing
/// event, the reversed inverse word, one more event, then a Z measurement.
pub fn build_rb_circuit<R: Rng + ?Sized>(
    table: &CliffordTable,
    depth: usize,
    ch: NoiseChannel,
    rng: &mut R,
) -> Circuit {
    let mut c = Circuit::new(1, table.dim()).expect("one qudit");
    let mut gates = Vec::new();
    for _ in 0..depth {
        for &g in table.random_word(rng) {
            c.gate(g).unwrap();
            gates.push(g);
        }
        c.noise(0, ch).unwrap();
    }
    for g in crate::gate::inverse_sequence(&gates) {
        c.gate(g).unwrap();
    }
    c.noise(0, ch).unwrap();
    c.measure(0).unwrap();
    c
}

pub fn run_rb(cfg: &RbConfig) -> Result<RbReport, ExperimentError> {
    let (dim, ch) = cfg.check()?;
    let table = CliffordTable::new(dim)?;
    let d = dim.get();
    let mut points = Vec::new();
    for (di, &depth) in cfg.depths.iter().enumerate() {
        let fids = (0..cfg.circuits)
            .into_par_iter()
            .map(|k| {
                let mut rng = config_rng(cfg.seed, (di * cfg.circuits + k) as u64);
                let c = build_rb_circuit(&table, depth, ch, &mut rng);
                let shots = sample(&c, cfg.shots, rng.random(), Method::Frames)?;
                Ok(rb_fidelity(&histogram(d, shots.iter().map(|s| s[0].outcome))))
            })
            .collect::<Result<Vec<f64>, ExperimentError>>()?;
        let (mean, se) = mean_stderr(&fids);
        points.push(RbPoint { depth, mean_fidelity: mean, stderr: se });
    }
    let fit = fit_decay(&points.iter().map(|p| (p.depth, p.mean_fidelity)).collect::<Vec<_>>());
    Ok(RbReport { points, fit })
}

/// A CSS stabilizer code over a prime dimension with one logical qudit.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionCode {
    dim: Dimension,
    stabilizers: Vec<PauliString>,
    logical_x: PauliString,
    logical_z: PauliString,
}

fn in_span(rows: &Matrix, v: &[u32], p: u32) -> bool {
    let mut m = rows.clone();
    m.push(v.to_vec());
    rank(&m, p) == rank(rows, p)
}

fn dot(a: &[u32], b: &[u32], p: u32) -> u32 {
    (a.iter().zip(b).map(|(&x, &y)| x as u64 * y as u64).sum::<u64>() % p as u64) as u32
}

impl DetectionCode {
    /// The five-qudit ternary detection code, qudits numbered from 0.
    pub fn five_qudit() -> Self {
        let dim = Dimension::new(3).unwrap();
        let z = |v: [i64; 5]| PauliString::from_exponents(dim, &[0; 5], &v, 0).unwrap();
        let x = |v: [i64; 5]| PauliString::from_exponents(dim, &v, &[0; 5], 0).unwrap();
        let stabs = vec![z([1, -1, 0, -1, 0]), z([0, 1, 1, 0, -1]), x([1, 1, -1, 0, 0]), x([0, -1, 0, 1, -1])];
        Self::from_stabilizers(dim, stabs).expect("valid code")
    }

    /// Checks commutation and independence, then derives a logical pair by
    /// elimination in canonical column order.
    pub fn from_stabilizers(dim: Dimension, stabilizers: Vec<PauliString>) -> Result<Self, ExperimentError> {
        let p = dim.get();
        if !dim.is_prime() {
            return Err(ExperimentError::InvalidConfig("code dimension must be prime".into()));
        }
        let n = stabilizers.first().map_or(0, |s| s.num_qudits());
        if n == 0 || stabilizers.len() + 1 != n {
            return Err(ExperimentError::InvalidConfig("need n - 1 stabilizers on n qudits".into()));
        }
        for (i, a) in stabilizers.iter().enumerate() {
            if a.num_qudits() != n || a.dim() != p {
                return Err(ExperimentError::InvalidConfig("stabilizers of different shapes".into()));
            }
            for b in &stabilizers[i + 1..] {
                if a.commutation_unchecked(b) != 0 {
                    return Err(ExperimentError::InvalidConfig(format!("stabilizers {a} and {b} do not commute")));
                }
            }
        }
        let blocks: Matrix = stabilizers.iter().map(|s| s.encode_block()[..2 * n].to_vec()).collect();
        if rank(&blocks, p) != stabilizers.len() {
            return Err(ExperimentError::InvalidConfig("stabilizers are not independent".into()));
        }
        let is_x = |s: &PauliString| s.z().iter().all(|&v| v == 0);
        let is_z = |s: &PauliString| s.x().iter().all(|&v| v == 0);
        if !stabilizers.iter().all(|s| is_x(s) || is_z(s)) {
            return Err(ExperimentError::InvalidConfig("only CSS codes are supported".into()));
        }
        let hx: Matrix = stabilizers.iter().filter(|s| is_x(s) && !s.is_identity()).map(|s| s.x().to_vec()).collect();
        let hz: Matrix = stabilizers.iter().filter(|s| is_z(s) && !s.is_identity()).map(|s| s.z().to_vec()).collect();
        let pick = |h_other: &Matrix, h_same: &Matrix| -> Vec<Vec<u32>> {
            let ns = if h_other.is_empty() {
                (0..n).map(|i| (0..n).map(|j| (i == j) as u32).collect()).collect()
            } else {
                nullspace(h_other, p)
            };
            ns.into_iter().filter(|v| h_same.is_empty() || !in_span(h_same, v, p)).collect()
        };
        let lz_cands = pick(&hx, &hz);
        let lx_cands = pick(&hz, &hx);
        let lz = lz_cands.first().ok_or_else(|| ExperimentError::InvalidConfig("no logical Z".into()))?.clone();
        let lx = lx_cands
            .iter()
            .find(|v| dot(v, &lz, p) != 0)
            .ok_or_else(|| ExperimentError::InvalidConfig("no logical X".into()))?;
        // Scale X_L so that X_L and Z_L commute like a single X and Z.
        let s = crate::arith::mod_inverse(dot(lx, &lz, p), p).unwrap();
        let lx: Vec<i64> = lx.iter().map(|&v| (v as u64 * s as u64 % p as u64) as i64).collect();
        let lz: Vec<i64> = lz.iter().map(|&v| v as i64).collect();
        let zeros = vec![0i64; n];
        let logical_x = PauliString::from_exponents(dim, &lx, &zeros, 0).unwrap();
        let logical_z = PauliString::from_exponents(dim, &zeros, &lz, 0).unwrap();
        Ok(Self { dim, stabilizers, logical_x, logical_z })
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn num_qudits(&self) -> usize {
        self.logical_x.num_qudits()
    }

    pub fn stabilizers(&self) -> &[PauliString] {
        &self.stabilizers
    }

    /// Indices of the X-type generators.
    pub fn x_type(&self) -> Vec<usize> {
        (0..self.stabilizers.len()).filter(|&i| self.stabilizers[i].z().iter().all(|&v| v == 0)).collect()
    }

    pub fn logical_x(&self) -> &PauliString {
        &self.logical_x
    }

    pub fn logical_z(&self) -> &PauliString {
        &self.logical_z
    }

    /// Prepares `|0_L⟩` on qudits `0..n` from `|0…0⟩`: `F` on the pivot qudits of
    /// the reduced X-check matrix, then SUMs spreading each pivot along its row.
    pub fn encode_zero(&self, c: &mut Circuit) -> Result<(), ExperimentError> {
        let p = self.dim.get();
        let mut hx: Matrix = self.x_type().iter().map(|&i| self.stabilizers[i].x().to_vec()).collect();
        let pivots = rref(&mut hx, p);
        for (row, &pc) in hx.iter().zip(&pivots) {
            c.gate(GateKind::F(pc)).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
            for (t, &e) in row.iter().enumerate() {
                if t != pc {
                    for _ in 0..e {
                        c.gate(GateKind::Sum { control: pc, target: t }).unwrap();
                    }
                }
            }
        }
        Ok(())
    }
}

/// Appends `X^x Z^z` gate powers for each qudit of `p`; the phase is dropped.
pub fn append_pauli_gates(c: &mut Circuit, p: &PauliString) -> Result<(), ExperimentError> {
    for q in 0..p.num_qudits() {
        for _ in 0..p.z()[q] {
            c.gate(GateKind::Z(q)).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        }
        for _ in 0..p.x()[q] {
            c.gate(GateKind::X(q)).unwrap();
        }
    }
    Ok(())
}

/// Non-destructive measurement of `p` into `ancilla`, which must start in `|0⟩`.
///
/// The ancilla is put in superposition by `F`, controls `p^j` through SUM gates
/// (conjugated by `F` on qudits carrying Z powers), and is read after `F†`. A state
/// with `p|ψ⟩ = ω^k|ψ⟩` gives outcome `k`.
pub fn build_syndrome_gadget(c: &mut Circuit, p: &PauliString, ancilla: usize) -> Result<(), ExperimentError> {
    let d = c.dim().get();
    if p.dim() != d || p.num_qudits() > c.num_qudits() {
        return Err(ExperimentError::Unsupported(format!("{p} does not fit the register")));
    }
    if ancilla < p.num_qudits() && (p.x()[ancilla] != 0 || p.z()[ancilla] != 0) {
        return Err(ExperimentError::Unsupported("operator acts on the ancilla".into()));
    }
    let mut mixed = 0u64;
    for q in 0..p.num_qudits() {
        mixed += p.x()[q] as u64 * p.z()[q] as u64;
    }
    if !mixed.is_multiple_of(d as u64) && !c.dim().is_odd_prime() {
        return Err(ExperimentError::Unsupported("factors X^a Z^b with ab != 0 need an odd prime dimension".into()));
    }
    let err = |e: crate::circuit::CircuitError| ExperimentError::Unsupported(e.to_string());
    c.gate(GateKind::F(ancilla)).map_err(err)?;
    // (X^x Z^z)^j = ω^{xz·j(j−1)/2} X^{xj} Z^{zj}; the scalar is a diagonal phase on the ancilla.
    for _ in 0..(mixed % d as u64) {
        c.gate(GateKind::P(ancilla)).unwrap();
    }
    for _ in 0..p.phase() {
        c.gate(GateKind::Z(ancilla)).unwrap();
    }
    for q in 0..p.num_qudits() {
        let (x, z) = (p.x()[q], p.z()[q]);
        if z != 0 {
            c.gate(GateKind::FInv(q)).unwrap();
            for _ in 0..z {
                c.gate(GateKind::Sum { control: ancilla, target: q }).unwrap();
            }
            c.gate(GateKind::F(q)).unwrap();
        }
        for _ in 0..x {
            c.gate(GateKind::Sum { control: ancilla, target: q }).unwrap();
        }
    }
    c.gate(GateKind::FInv(ancilla)).unwrap();
    c.measure(ancilla).unwrap();
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Postselect {
    XOnly,
    All,
}

impl Postselect {
    pub fn name(self) -> &'static str {
        match self {
            Postselect::XOnly => "x-only",
            Postselect::All => "all",
        }
    }
}

impl std::str::FromStr for Postselect {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x-only" => Ok(Postselect::XOnly),
            "all" => Ok(Postselect::All),
            other => Err(format!("unknown postselection '{other}' (expected x-only or all)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrbdConfig {
    pub depths: Vec<usize>,
    pub circuits: usize,
    pub shots: usize,
    pub p: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrbdPoint {
    pub postselect: Postselect,
    pub depth: usize,
    /// `None` when no shot survived at this depth.
    pub mean_fidelity: Option<f64>,
    pub stderr: f64,
    pub survivor_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrbdReport {
    pub points: Vec<LrbdPoint>,
}

impl LrbdReport {
    pub fn curve(&self, which: Postselect) -> Vec<&LrbdPoint> {
        self.points.iter().filter(|p| p.postselect == which).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("postselect,depth,mean_fidelity,stderr,survivor_fraction\n");
        for p in &self.points {
            let f = p.mean_fidelity.map_or(String::new(), |f| format!("{f:.6}"));
            let _ = writeln!(s, "{},{},{},{:.6},{:.6}", p.postselect.name(), p.depth, f, p.stderr, p.survivor_fraction);
        }
        s
    }
}

/// Encoded sequence on `n` data qudits plus one ancilla per stabilizer and one
/// for the logical readout. Each layer is a random logical Pauli followed by
/// depolarizing noise on every data qudit; the net logical Pauli is undone
/// noiselessly before the syndromes and then `Z_L` are measured.
pub fn build_lrbd_circuit<R: Rng + ?Sized>(
    code: &DetectionCode,
    depth: usize,
    ch: NoiseChannel,
    rng: &mut R,
) -> Result<Circuit, ExperimentError> {
    let n = code.num_qudits();
    let m = code.stabilizers().len();
    let total = n + m + 1;
    let d = code.dim().get();
    let mut c = Circuit::new(total, code.dim()).expect("nonempty");
    code.encode_zero(&mut c)?;
    let widen = |p: &PauliString| {
        let mut x: Vec<i64> = p.x().iter().map(|&v| v as i64).collect();
        let mut z: Vec<i64> = p.z().iter().map(|&v| v as i64).collect();
        x.resize(total, 0);
        z.resize(total, 0);
        PauliString::from_exponents(code.dim(), &x, &z, p.phase() as i64).unwrap()
    };
    let (lx, lz) = (widen(code.logical_x()), widen(code.logical_z()));
    let mut net = PauliString::identity(total, code.dim());
    for _ in 0..depth {
        let layer = lx.pow(rng.random_range(0..d) as u64).mul(&lz.pow(rng.random_range(0..d) as u64)).unwrap();
        append_pauli_gates(&mut c, &layer)?;
        net = layer.mul(&net).unwrap();
        for q in 0..n {
            c.noise(q, ch).unwrap();
        }
    }
    append_pauli_gates(&mut c, &net.inverse())?;
    for (i, s) in code.stabilizers().iter().enumerate() {
        build_syndrome_gadget(&mut c, &widen(s), n + i)?;
    }
    build_syndrome_gadget(&mut c, &lz, n + m)?;
    Ok(c)
}

pub fn run_lrb_d(cfg: &LrbdConfig, code: &DetectionCode) -> Result<LrbdReport, ExperimentError> {
    if cfg.shots == 0 || cfg.circuits == 0 || cfg.depths.is_empty() {
        return Err(ExperimentError::InvalidConfig("shots, circuits and depths must be nonempty".into()));
    }
    let ch =
        NoiseChannel::new(NoiseKind::Depolarizing, cfg.p).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
    let d = code.dim().get();
    let m = code.stabilizers().len();
    let x_rows = code.x_type();
    let all_rows: Vec<usize> = (0..m).collect();
    let mut points = Vec::new();
    for (di, &depth) in cfg.depths.iter().enumerate() {
        // Per circuit and postselection: (fidelity on survivors, survivor count).
        let per_circuit = (0..cfg.circuits)
            .into_par_iter()
            .map(|k| {
                let mut rng = config_rng(cfg.seed, (di * cfg.circuits + k) as u64);
                let c = build_lrbd_circuit(code, depth, ch, &mut rng)?;
                let method = if code.dim().is_odd_prime() { Method::Frames } else { Method::Tableau };
                let shots = outcomes(&sample(&c, cfg.shots, rng.random(), method)?);
                let eval = |rows: &[usize]| {
                    let kept: Vec<u32> =
                        shots.iter().filter(|s| rows.iter().all(|&r| s[r] == 0)).map(|s| s[m]).collect();
                    let f = (!kept.is_empty()).then(|| rb_fidelity(&histogram(d, kept.iter().copied())));
                    (f, kept.len())
                };
                Ok([eval(&x_rows), eval(&all_rows)])
            })
            .collect::<Result<Vec<_>, ExperimentError>>()?;
        for (slot, which) in [Postselect::XOnly, Postselect::All].into_iter().enumerate() {
            let fids: Vec<f64> = per_circuit.iter().filter_map(|r| r[slot].0).collect();
            let kept: usize = per_circuit.iter().map(|r| r[slot].1).sum();
            let (mean, se) = if fids.is_empty() {
                (None, 0.0)
            } else {
                let (a, b) = mean_stderr(&fids);
                (Some(a), b)
            };
            points.push(LrbdPoint {
                postselect: which,
                depth,
                mean_fidelity: mean,
                stderr: se,
                survivor_fraction: kept as f64 / (cfg.shots * cfg.circuits) as f64,
            });
        }
    }
    Ok(LrbdReport { points })
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a, T: Serialize> {
    pub experiment: &'a str,
    pub version: &'a str,
    pub config: &'a T,
}

/// Run manifest with the full configuration, seeds included.
pub fn manifest_json<T: Serialize>(experiment: &str, config: &T) -> String {
    let m = Manifest { experiment, version: env!("CARGO_PKG_VERSION"), config };
    serde_json::to_string_pretty(&m).expect("serializable config")
}
