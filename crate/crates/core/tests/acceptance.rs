//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use qudit_stab::circuit::{build_bernstein_vazirani, build_deutsch_jozsa, build_ghz_chain, random_gate, DjOracle};
use qudit_stab::experiments::{
    channel_distribution_test, run_lrb_d, run_rb, validate_backend_pair, DetectionCode, LrbdConfig, Postselect,
    RbConfig, ValidationConfig,
};
use qudit_stab::snf::{determinant, mat_mul, smith_normal_form, to_int_matrix};
use qudit_stab::statevector::DenseState;
use qudit_stab::{sample, Circuit, Dimension, GateKind, Method, NoiseKind, PauliString, Tableau};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn dim(d: u32) -> Dimension {
    Dimension::new(d).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rows(t: &Tableau) -> Vec<Vec<u32>> {
    t.to_block_rows()
}

fn golden_walkthrough() -> Outcome {
    let expected: [[[u32; 5]; 4]; 4] = [
        [[1, 0, 0, 0, 0], [0, 1, 0, 0, 0], [0, 0, 1, 0, 0], [0, 0, 0, 1, 0]],
        [[0, 0, 1, 0, 0], [0, 1, 0, 0, 0], [2, 0, 0, 0, 0], [0, 0, 0, 1, 0]],
        [[0, 0, 1, 0, 0], [0, 1, 0, 0, 0], [2, 0, 0, 0, 0], [0, 0, 0, 1, 2]],
        [[0, 0, 1, 0, 0], [0, 0, 0, 1, 0], [2, 0, 0, 0, 0], [0, 2, 0, 0, 2]],
    ];
    let mut t = Tableau::new(2, dim(3)).unwrap();
    let gates = [GateKind::F(0), GateKind::X(1), GateKind::F(1)];
    for (step, exp) in expected.iter().enumerate() {
        if step > 0 {
            t.apply_gate(gates[step - 1]).unwrap();
        }
        let got = rows(&t);
        let want: Vec<Vec<u32>> = exp.iter().map(|r| r.to_vec()).collect();
        ensure(got == want, || format!("checkpoint {step}: got {got:?}"))?;
    }
    Ok("4/4 checkpoints exact".into())
}

fn measurement_example() -> Outcome {
    let d3 = dim(3);
    let golden_before = vec![vec![0, 0, 1, 0, 0], vec![0, 1, 0, 0, 0], vec![2, 2, 0, 0, 0], vec![0, 0, 2, 1, 0]];
    let mut base = Tableau::new(2, d3).unwrap();
    base.apply_gate(GateKind::F(0)).unwrap();
    base.apply_gate(GateKind::Sum { control: 0, target: 1 }).unwrap();
    ensure(rows(&base) == golden_before, || format!("before: {:?}", rows(&base)))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut t = base.clone();
    let first = t.measure_z(1, &mut rng).unwrap();
    ensure(!first.deterministic, || "M 1 reported deterministic".into())?;
    let after = rows(&t);
    let r = after[2][4];
    // The inserted stabilizer fixes the collapsed state, so its phase is minus the outcome.
    ensure(r == (3 - first.outcome) % 3, || format!("phase {r} for outcome {}", first.outcome))?;
    ensure(after[0] == golden_before[2], || format!("destabilizer 0 is not the old pivot: {:?}", after[0]))?;
    ensure(after[2] == vec![0, 0, 0, 1, r], || format!("inserted row {:?}", after[2]))?;
    ensure(after[3] == golden_before[3], || format!("stabilizer 1 changed: {:?}", after[3]))?;
    // The golden destabilizer row 1 is X_1, which fails to commute with the new
    // stabilizer Z_1; the pivot has to be folded into it, giving X_1 · X_0² X_1².
    let golden_row1 = PauliString::decode_block(&[0, 1, 0, 0, 0], d3).unwrap();
    let pivot = PauliString::decode_block(&golden_before[2], d3).unwrap();
    let new_stab = PauliString::decode_block(&after[2], d3).unwrap();
    ensure(!golden_row1.commutes_with(&new_stab).unwrap(), || "golden row 1 unexpectedly commutes".into())?;
    let fixed = golden_row1.mul(&pivot).unwrap();
    ensure(after[1] == fixed.encode_block(), || format!("destabilizer 1 {:?}", after[1]))?;
    ensure(t.pairing_holds(), || "pairing broken".into())?;

    let pairs = (0..10_000u64)
        .filter(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut t = base.clone();
            let a = t.measure_z(1, &mut rng).unwrap();
            let b = t.measure_z(0, &mut rng).unwrap();
            b.deterministic && a.outcome == b.outcome
        })
        .count();
    ensure(pairs == 10_000, || format!("{pairs}/10000 follow-up measurements agreed"))?;
    Ok(format!(
        "before/after rows exact; destabilizer row 1 = {:?} (golden {:?} breaks pairing); 10000/10000 follow-ups agree",
        after[1], [0, 1, 0, 0, 0]
    ))
}

fn cross_backend() -> Outcome {
    let cfg = ValidationConfig {
        first: Method::Tableau,
        second: Method::Statevector,
        circuits: 100,
        dims: vec![3, 5, 7],
        max_qudits: 5,
        max_depth: 100,
        shots_first: 800,
        shots_second: 800,
        threshold: 0.2,
        seed: 0xA11CE,
    };
    let rep = validate_backend_pair(&cfg).map_err(|e| e.to_string())?;
    ensure(rep.rows.len() == 100 && rep.all_pass(), || format!("max TVD {:.4}", rep.max_tvd()))?;
    Ok(format!("100/100 circuits below 0.2, max TVD {:.4}", rep.max_tvd()))
}

fn frame_validation() -> Outcome {
    let cfg = ValidationConfig {
        first: Method::Frames,
        second: Method::Tableau,
        circuits: 20,
        dims: vec![3, 5],
        max_qudits: 6,
        max_depth: 200,
        shots_first: 10_000,
        shots_second: 100_000,
        threshold: 0.02,
        seed: 0xF4A3E,
    };
    let rep = validate_backend_pair(&cfg).map_err(|e| e.to_string())?;
    ensure(rep.rows.len() == 20 && rep.all_pass(), || format!("max TVD {:.4}", rep.max_tvd()))?;
    Ok(format!("20/20 circuits below 0.02, max TVD {:.4}", rep.max_tvd()))
}

fn channels() -> Outcome {
    let mut parts = Vec::new();
    for (kind, p) in [(NoiseKind::Depolarizing, 0.1), (NoiseKind::Flip, 0.3), (NoiseKind::Phase, 0.3)] {
        let rep = channel_distribution_test(kind, 3, p, 100_000, 77).map_err(|e| e.to_string())?;
        ensure(rep.tvd < 0.02, || format!("{kind:?}: TVD {:.4} vs {:?}", rep.tvd, rep.expected))?;
        parts.push(format!("{kind:?} {:.4}", rep.tvd));
    }
    Ok(format!("TVD {}", parts.join(", ")))
}

fn deterministic_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut det, mut rand_count) = (0, 0);
    for inst in 0..500 {
        let d = if inst % 2 == 0 { 3 } else { 5 };
        let n = rng.random_range(1..=4);
        let mut t = Tableau::new(n, dim(d)).unwrap();
        let mut psi = DenseState::zero(n, d).unwrap();
        for _ in 0..rng.random_range(0..=20) {
            if rng.random_bool(0.1) {
                let q = rng.random_range(0..n);
                let rec = t.measure_z(q, &mut rng).unwrap();
                let p = psi.project(q, rec.outcome).unwrap();
                ensure(p > 1e-9, || format!("instance {inst}: tableau outcome has zero probability"))?;
            } else {
                let g = random_gate(n, 0.3, &mut rng);
                t.apply_gate(g).unwrap();
                psi.apply_gate(g).unwrap();
            }
        }
        let j = rng.random_range(0..n);
        let fast = t.peek_deterministic(j).unwrap();
        let (gauss_det, gauss) = t.deterministic_outcome_gaussian(j).unwrap();
        let dist = psi.outcome_distribution(j).unwrap();
        let point = dist.iter().position(|&p| (p - 1.0).abs() < 1e-9).map(|k| k as u32);
        ensure(fast == gauss && gauss_det == fast.is_some() && fast == point, || {
            format!("instance {inst}: tableau {fast:?}, elimination {gauss:?}, dense {point:?}")
        })?;
        if fast.is_some() {
            det += 1;
        } else {
            rand_count += 1;
        }
    }
    Ok(format!("500/500 agree ({det} deterministic, {rand_count} random)"))
}

fn algorithms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut circuits = 0;
    for d in [2u32, 3, 5] {
        let method = if d == 2 { Method::Tableau } else { Method::Frames };
        for j in 0..d {
            let shots = sample(&build_deutsch_jozsa(dim(d), DjOracle::Constant(j)), 100, j as u64, method)
                .map_err(|e| e.to_string())?;
            ensure(shots.iter().all(|s| s[0].outcome == 0 && s[0].deterministic), || format!("DJ constant d={d}"))?;
            circuits += 1;
        }
        let shots =
            sample(&build_deutsch_jozsa(dim(d), DjOracle::Identity), 100, 1, method).map_err(|e| e.to_string())?;
        ensure(shots.iter().all(|s| s[0].outcome == d - 1 && s[0].deterministic), || format!("DJ identity d={d}"))?;
        circuits += 1;
        for _ in 0..10 {
            let len = rng.random_range(1..=9);
            let secret: Vec<u32> = (0..len).map(|_| rng.random_range(0..d)).collect();
            let c = build_bernstein_vazirani(dim(d), &secret);
            let shots = sample(&c, 100, rng.random(), method).map_err(|e| e.to_string())?;
            ensure(
                shots.iter().all(|s| {
                    s.iter().map(|r| r.outcome).collect::<Vec<_>>() == secret && s.iter().all(|r| r.deterministic)
                }),
                || format!("BV d={d} secret {secret:?}"),
            )?;
            circuits += 1;
        }
    }
    Ok(format!("{circuits} circuits, every shot exact and deterministic"))
}

fn check_snf(a: &[Vec<i64>]) -> Result<(), String> {
    let res = smith_normal_form(a).map_err(|e| e.to_string())?;
    ensure(mat_mul(&mat_mul(&res.u, &res.s), &res.v) == to_int_matrix(a), || format!("USV != A for {a:?}"))?;
    for m in [&res.u, &res.v] {
        let det = determinant(m).map_err(|e| e.to_string())?;
        ensure(det.abs().is_one(), || format!("det {det} for {a:?}"))?;
    }
    for (i, row) in res.s.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            ensure(i == j || v.is_zero(), || format!("off-diagonal entry in S for {a:?}"))?;
        }
    }
    let f = res.invariant_factors();
    for w in f.windows(2) {
        let ok = !w[0].is_negative()
            && !w[1].is_negative()
            && (w[1].is_zero() || (!w[0].is_zero() && w[1].is_multiple_of(&w[0])));
        ensure(ok, || format!("divisibility chain {f:?} for {a:?}"))?;
    }
    Ok(())
}

fn nonprime_path() -> Outcome {
    let d4 = dim(4);
    let mut c = Circuit::new(2, d4).unwrap();
    c.gate(GateKind::F(0)).unwrap();
    c.gate(GateKind::Sum { control: 0, target: 1 }).unwrap();
    c.gate(GateKind::Sum { control: 0, target: 1 }).unwrap();
    c.measure(1).unwrap();
    let shots = sample(&c, 10_000, 44, Method::Tableau).map_err(|e| e.to_string())?;
    let mut counts = [0usize; 4];
    for s in &shots {
        counts[s[0].outcome as usize] += 1;
    }
    let mut psi = DenseState::zero(2, 4).unwrap();
    for g in [GateKind::F(0), GateKind::Sum { control: 0, target: 1 }, GateKind::Sum { control: 0, target: 1 }] {
        psi.apply_gate(g).unwrap();
    }
    let oracle = psi.outcome_distribution(1).unwrap();
    for k in 0..4 {
        let emp = counts[k] as f64 / 1e4;
        ensure((emp - oracle[k]).abs() <= 0.02, || format!("outcome {k}: {emp} vs oracle {}", oracle[k]))?;
    }
    ensure(counts[1] == 0 && counts[3] == 0, || format!("support outside {{0, 2}}: {counts:?}"))?;
    ensure((oracle[0] - 0.5).abs() < 1e-12 && (oracle[2] - 0.5).abs() < 1e-12, || format!("oracle {oracle:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let (r, k) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let a: Vec<Vec<i64>> = (0..r).map(|_| (0..k).map(|_| rng.random_range(-9..=9)).collect()).collect();
        check_snf(&a)?;
    }
    Ok(format!("counts {counts:?} at 10^4 shots; 1000/1000 SNF factorizations valid"))
}

fn scaling() -> Outcome {
    let mut worst_gate = 0.0f64;
    let mut worst_meas = 0.0f64;
    for n in [4usize, 8, 16, 32, 64] {
        let mut per_dim = Vec::new();
        for d in [3u32, 5, 7] {
            let mut t = Tableau::new(n, dim(d)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let c = build_ghz_chain(n, dim(d));
            for i in c.instructions() {
                if let qudit_stab::Instruction::Gate(g) = i {
                    t.apply_gate(*g).unwrap();
                }
            }
            let secret: Vec<u32> = (0..n - 1).map(|i| (i % 2) as u32).collect();
            for i in build_bernstein_vazirani(dim(d), &secret).instructions() {
                if let qudit_stab::Instruction::Gate(g) = i {
                    t.apply_gate(*g).unwrap();
                }
            }
            for q in 0..n {
                t.measure_z(q, &mut rng).unwrap();
            }
            let k = t.counters();
            worst_gate = worst_gate.max(k.gate_ops as f64 / (k.gates as f64 * n as f64));
            worst_meas = worst_meas.max(k.measure_ops as f64 / (k.measurements as f64 * (n * n) as f64));
            per_dim.push(k);
        }
        ensure(per_dim.windows(2).all(|w| w[0] == w[1]), || format!("n={n}: counters differ across d: {per_dim:?}"))?;
    }
    // Two rows touched per qudit per gate; a scan plus at most 2n row products of width 2n+1 per measurement.
    ensure(worst_gate <= 2.0 && worst_meas <= 6.0, || {
        format!("gate {worst_gate:.2}·n, measurement {worst_meas:.2}·n²")
    })?;
    Ok(format!("gate ops <= {worst_gate:.2}·n, measurement ops <= {worst_meas:.2}·n², identical for d in {{3,5,7}}"))
}

fn benchmarking() -> Outcome {
    let depths = vec![0, 4, 8, 12, 16, 20];
    let clean = run_rb(&RbConfig { d: 3, depths: depths.clone(), circuits: 5, shots: 1000, p: 0.0, seed: 10 })
        .map_err(|e| e.to_string())?;
    let alpha = clean.fit.map(|f| f.alpha).ok_or("no fit at p = 0")?;
    ensure((alpha - 1.0).abs() <= 1e-6, || format!("alpha {alpha} at p = 0"))?;
    let code = DetectionCode::five_qudit();
    let clean_l = run_lrb_d(&LrbdConfig { depths: depths.clone(), circuits: 5, shots: 1000, p: 0.0, seed: 11 }, &code)
        .map_err(|e| e.to_string())?;
    ensure(clean_l.points.iter().all(|p| p.survivor_fraction == 1.0), || "survivor fraction below 1 at p = 0".into())?;

    let noisy = run_rb(&RbConfig { d: 3, depths: depths.clone(), circuits: 30, shots: 10_000, p: 0.05, seed: 12 })
        .map_err(|e| e.to_string())?;
    let means: Vec<f64> = noisy.points.iter().map(|p| p.mean_fidelity).collect();
    ensure(means.windows(2).all(|w| w[1] <= w[0]), || format!("RB means not monotone: {means:?}"))?;

    let lr = run_lrb_d(&LrbdConfig { depths, circuits: 30, shots: 10_000, p: 0.05, seed: 13 }, &code)
        .map_err(|e| e.to_string())?;
    let (xo, all) = (lr.curve(Postselect::XOnly), lr.curve(Postselect::All));
    let mut summary = Vec::new();
    for (a, x) in all.iter().zip(&xo) {
        let (fa, fx) = (a.mean_fidelity.ok_or("no survivors")?, x.mean_fidelity.ok_or("no survivors")?);
        let tol = 2.0 * (a.stderr.powi(2) + x.stderr.powi(2)).sqrt();
        ensure(fa + tol >= fx, || format!("depth {}: all {fa:.4} < x-only {fx:.4} - {tol:.4}", a.depth))?;
        summary.push(format!("{}:{fa:.3}/{fx:.3}", a.depth));
    }
    let fit = noisy.fit.map_or("none".to_string(), |f| format!("{:.4}", f.alpha));
    Ok(format!(
        "p=0 alpha {alpha}; RB means {:?}, alpha {fit}; LRB-D all/x-only {}",
        means.iter().map(|m| (m * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        summary.join(" ")
    ))
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 10] = [
        ("golden tableau walkthrough", golden_walkthrough, Duration::from_secs(1)),
        ("measurement example", measurement_example, Duration::from_secs(10)),
        ("tableau vs statevector", cross_backend, Duration::from_secs(600)),
        ("frames vs naive repetition", frame_validation, Duration::from_secs(600)),
        ("channel distributions", channels, Duration::from_secs(60)),
        ("deterministic measurement oracles", deterministic_oracles, Duration::from_secs(300)),
        ("Deutsch-Jozsa and Bernstein-Vazirani", algorithms, Duration::from_secs(60)),
        ("non-prime path and SNF", nonprime_path, Duration::from_secs(300)),
        ("operation-count scaling", scaling, Duration::from_secs(120)),
        ("RB and LRB-D", benchmarking, Duration::from_secs(1800)),
    ];
    let mut failed = 0;
    for (i, (name, f, bound)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let el = start.elapsed();
        let res =
            res.and_then(
                |msg| {
                    if el < *bound {
                        Ok(msg)
                    } else {
                        Err(format!("{msg}; took {el:.2?}, limit {bound:?}"))
                    }
                },
            );
        match res {
            Ok(msg) => println!("criterion {:>2} PASS  {name} ({el:.2?}): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({el:.2?}): {msg}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 10 acceptance criteria passed");
}
