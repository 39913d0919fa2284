use std::collections::BTreeMap;

use qudit_stab::circuit::{build_random_clifford_circuit, random_gate, RandomCircuitConfig};
use qudit_stab::experiments::{outcomes, projected_tvd, tvd, OutcomeDistribution};
use qudit_stab::frames::{sample_frames, sample_frames_counted};
use qudit_stab::noise::sample_error;
use qudit_stab::statevector::DenseState;
use qudit_stab::{sample, Circuit, Dimension, GateKind, Instruction, Method, NoiseChannel, NoiseKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dim(d: u32) -> Dimension {
    Dimension::new(d).unwrap()
}

/// Random Clifford circuit with noise events, resets and mid-circuit measurements mixed in.
fn noisy_circuit(d: u32, n: usize, depth: usize, rng: &mut ChaCha8Rng) -> Circuit {
    let mut c = Circuit::new(n, dim(d)).unwrap();
    let kinds = [NoiseKind::Flip, NoiseKind::Phase, NoiseKind::Depolarizing];
    for _ in 0..depth {
        let q = rng.random_range(0..n);
        let instr = match rng.random_range(0..20) {
            0 | 1 => Instruction::Noise {
                qudit: q,
                channel: NoiseChannel::new(kinds[rng.random_range(0..3)], rng.random_range(0.0..0.3)).unwrap(),
            },
            2 => Instruction::Measure(q),
            3 => Instruction::Reset(q),
            _ => Instruction::Gate(random_gate(n, 0.2, rng)),
        };
        c.push(instr).unwrap();
    }
    c.measure_all();
    c
}

#[test]
fn noise_labels_match_their_definition() {
    for d in [3u32, 5] {
        for p in [0.1, 0.5] {
            for kind in [NoiseKind::Flip, NoiseKind::Phase, NoiseKind::Depolarizing] {
                let ch = NoiseChannel::new(kind, p).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(u64::from(d) * 100 + (p * 10.0) as u64);
                let draws = 100_000;
                let mut hist: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
                for _ in 0..draws {
                    let e = sample_error(&ch, dim(d), &mut rng);
                    *hist.entry(vec![e.x()[0], e.z()[0]]).or_default() += 1.0 / draws as f64;
                }
                let mut want = BTreeMap::new();
                let nontrivial: Vec<(u32, u32)> = match kind {
                    NoiseKind::Flip => (1..d).map(|a| (a, 0)).collect(),
                    NoiseKind::Phase => (1..d).map(|b| (0, b)).collect(),
                    NoiseKind::Depolarizing => (0..d * d).skip(1).map(|i| (i / d, i % d)).collect(),
                };
                for a in 0..d {
                    for b in 0..d {
                        want.insert(vec![a, b], 0.0);
                        hist.entry(vec![a, b]).or_insert(0.0);
                    }
                }
                want.insert(vec![0, 0], 1.0 - p);
                for &(a, b) in &nontrivial {
                    want.insert(vec![a, b], p / nontrivial.len() as f64);
                }
                let total: f64 = hist.values().sum();
                hist.values_mut().for_each(|v| *v /= total);
                let got = OutcomeDistribution::new(
                    d * d,
                    hist.into_iter().map(|(k, v)| (vec![k[0] * d + k[1]], v)).collect(),
                )
                .unwrap();
                let want = OutcomeDistribution::new(
                    d * d,
                    want.into_iter().map(|(k, v)| (vec![k[0] * d + k[1]], v)).collect(),
                )
                .unwrap();
                let t = tvd(&got, &want).unwrap();
                assert!(t < 0.02, "{kind:?} d={d} p={p}: TVD {t}");
            }
        }
    }
}

#[test]
fn frames_match_naive_runs_on_noisy_circuits() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    for i in 0..8 {
        let d = if i % 2 == 0 { 3 } else { 5 };
        let n = rng.random_range(1..=6);
        let depth = rng.random_range(0..=200);
        let c = noisy_circuit(d, n, depth, &mut rng);
        let frames = outcomes(&sample_frames(&c, 10_000, rng.random()).unwrap());
        let naive = outcomes(&sample(&c, 100_000, rng.random(), Method::Tableau).unwrap());
        let t = projected_tvd(d, &frames, &naive).unwrap();
        assert!(t < 0.02, "circuit {i} (d={d}, n={n}, depth={depth}): TVD {t}");
    }
}

#[test]
fn single_shot_frames_are_distributed_like_naive_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let c = noisy_circuit(3, 3, 40, &mut rng);
    let one_shot: Vec<Vec<u32>> =
        (0..20_000u64).map(|s| outcomes(&sample_frames(&c, 1, s).unwrap()).remove(0)).collect();
    let naive = outcomes(&sample(&c, 20_000, 99, Method::Tableau).unwrap());
    let t = projected_tvd(3, &one_shot, &naive).unwrap();
    assert!(t < 0.03, "TVD {t}");
}

#[test]
fn frame_results_do_not_depend_on_worker_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let c = noisy_circuit(5, 4, 120, &mut rng);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| sample_frames(&c, 5_000, 77).unwrap())
    };
    let base = run(1);
    assert_eq!(base, run(3));
    assert_eq!(base, run(8));
    for m in [Method::Tableau, Method::Statevector] {
        let one =
            rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| sample(&c, 300, 5, m).unwrap());
        let many =
            rayon::ThreadPoolBuilder::new().num_threads(6).build().unwrap().install(|| sample(&c, 300, 5, m).unwrap());
        assert_eq!(one, many, "{m}");
    }
}

#[test]
fn frame_cost_is_linear_in_shots_and_instructions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ratios = Vec::new();
    for (n, depth, shots) in [(2, 50, 1_000), (4, 200, 4_000), (8, 800, 2_000), (8, 100, 16_000)] {
        let c = noisy_circuit(3, n, depth, &mut rng);
        let (_, ops) = sample_frames_counted(&c, shots, 1).unwrap();
        ratios.push(ops as f64 / (shots * c.instructions().len()) as f64);
    }
    assert!(ratios.iter().all(|&r| r > 0.0 && r <= 4.0), "{ratios:?}");
}

#[test]
fn noiseless_frames_replicate_a_deterministic_reference() {
    let mut c = Circuit::new(3, dim(7)).unwrap();
    for g in [GateKind::X(0), GateKind::Sum { control: 0, target: 1 }, GateKind::P(2), GateKind::Z(1)] {
        c.gate(g).unwrap();
    }
    c.measure_all();
    let shots = sample_frames(&c, 2_500, 4).unwrap();
    assert!(shots.iter().all(|s| s == &shots[0]));
    assert_eq!(shots[0].iter().map(|r| r.outcome).collect::<Vec<_>>(), [1, 1, 0]);
    assert!(shots[0].iter().all(|r| r.deterministic));
}

fn dense_joint(c: &Circuit) -> Vec<f64> {
    let mut psi = DenseState::zero(c.num_qudits(), c.dim().get()).unwrap();
    for i in c.instructions() {
        if let Instruction::Gate(g) = i {
            psi.apply_gate(*g).unwrap();
        }
    }
    psi.probabilities()
}

#[test]
fn weyl_path_matches_dense_distribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD4);
    for i in 0..24 {
        let d = [2u32, 4, 6, 8, 9, 10][i % 6];
        // Joint supports above ~100 outcomes need far more shots for a tight TVD.
        let max_n = (1..=3).rev().find(|&k| d.pow(k) <= 100).unwrap() as usize;
        let n = rng.random_range(1..=max_n);
        let depth = rng.random_range(0..=60);
        let mut cfg = RandomCircuitConfig::new(n, depth);
        cfg.measure_all = true;
        let c = build_random_clifford_circuit(dim(d), &cfg, &mut rng);
        let shots = outcomes(&sample(&c, 20_000, rng.random(), Method::Tableau).unwrap());
        // measure_all reads qudits 0..n in order; dense probabilities index qudit 0 as the leading digit.
        let exact = dense_joint(&c);
        let mut probs = BTreeMap::new();
        for (idx, &p) in exact.iter().enumerate() {
            let mut label = vec![0u32; n];
            let mut rest = idx;
            for q in (0..n).rev() {
                label[q] = (rest % d as usize) as u32;
                rest /= d as usize;
            }
            probs.insert(label, p);
        }
        let want = OutcomeDistribution::new(d, probs).unwrap();
        let got = OutcomeDistribution::from_samples(d, &shots).unwrap();
        for label in got.iter().map(|(k, _)| k.clone()) {
            assert!(want.prob(&label) > 1e-9, "d={d}: sampled impossible outcome {label:?}");
        }
        let mut full: BTreeMap<Vec<u32>, f64> = want.iter().map(|(k, _)| (k.clone(), 0.0)).collect();
        for (k, p) in got.iter() {
            full.insert(k.clone(), p);
        }
        let t = tvd(&OutcomeDistribution::new(d, full).unwrap(), &want).unwrap();
        assert!(t < 0.05, "circuit {i} (d={d}, n={n}, depth={depth}): TVD {t}");
    }
}

#[test]
fn weyl_and_dense_agree_with_mid_circuit_measurements() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xE7);
    for i in 0..12 {
        let d = [4u32, 6, 2][i % 3];
        let n = rng.random_range(1..=3);
        let mut c = Circuit::new(n, dim(d)).unwrap();
        for _ in 0..rng.random_range(5..40) {
            let q = rng.random_range(0..n);
            match rng.random_range(0..8) {
                0 => c.measure(q).unwrap(),
                1 => c.reset(q).unwrap(),
                _ => c.gate(random_gate(n, 0.3, &mut rng)).unwrap(),
            };
        }
        c.measure_all();
        let a = outcomes(&sample(&c, 20_000, 1, Method::Tableau).unwrap());
        let b = outcomes(&sample(&c, 20_000, 2, Method::Statevector).unwrap());
        let t = projected_tvd(d, &a, &b).unwrap();
        assert!(t < 0.04, "circuit {i} (d={d}): TVD {t}");
    }
}

#[test]
fn frames_refuse_non_prime_dimensions() {
    for d in [2u32, 4, 6, 9] {
        let mut c = Circuit::new(1, dim(d)).unwrap();
        c.measure(0).unwrap();
        assert!(sample_frames(&c, 5, 0).is_err(), "d={d}");
    }
}
