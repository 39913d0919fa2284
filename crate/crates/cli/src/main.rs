//! `qstab`: sample SDIM circuits, generate builder circuits, and run the
//! validation and benchmarking experiments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qudit_stab::circuit::{
    build_bernstein_vazirani, build_deutsch_jozsa, build_ghz_chain, build_local_gate_test,
    build_random_clifford_circuit, parse_circuit, DjOracle, RandomCircuitConfig,
};
use qudit_stab::experiments::{
    manifest_json, run_lrb_d, run_rb, validate_backend_pair, DetectionCode, ExperimentError, LrbdConfig, LrbdReport,
    Postselect, RbConfig, ValidationConfig,
};
use qudit_stab::statevector::DenseError;
use qudit_stab::{sample, Circuit, Dimension, MeasurementRecord, Method, SimError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const EXIT_IO: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_UNSUPPORTED: u8 = 3;
const EXIT_INVALID: u8 = 4;
const EXIT_EXPERIMENT: u8 = 5;
const EXIT_THRESHOLD: u8 = 6;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "qstab", version, about = "Qudit stabilizer circuit simulator")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SDIM_THREADS")]
    threads: Option<usize>,
    /// Print wall-clock time to stderr.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a circuit file.
    Run(RunArgs),
    /// Print a generated circuit in SDIM format.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Compare two backends on a random circuit corpus.
    Validate(ValidateArgs),
    /// Unencoded randomized benchmarking.
    Rb(RbArgs),
    /// Logical randomized benchmarking with the five-qudit detection code.
    Lrbd(LrbdArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RunFormat {
    Json,
    Counts,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    /// SDIM circuit file.
    file: PathBuf,
    #[arg(long, default_value_t = 1)]
    shots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "tableau")]
    method: Method,
    #[arg(long = "out", value_enum, default_value = "json")]
    out: RunFormat,
}

#[derive(Subcommand)]
enum GenKind {
    /// Two-qudit Deutsch-Jozsa.
    Dj {
        #[arg(long)]
        d: u32,
        /// `identity` or `constant`.
        #[arg(long, default_value = "identity")]
        oracle: String,
        /// Constant value for `--oracle constant`.
        #[arg(long, default_value_t = 0)]
        value: u32,
    },
    /// Bernstein-Vazirani; the secret is a digit string (dash-separated when d > 10).
    Bv {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        secret: String,
    },
    /// `H 0` and a CNOT chain.
    Ghz {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: u32,
    },
    /// Random single-qudit layers on 7 qudits, a CNOT chain, then measurements.
    Local {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Random Clifford circuit, all qudits measured.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: u32,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Args)]
struct ReportOut {
    #[arg(long = "out", value_enum, default_value = "csv")]
    out: ReportFormat,
    /// Write the run manifest (config and seeds) here.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Two backends, comma separated.
    #[arg(long, default_value = "tableau,statevector")]
    pairs: String,
    #[arg(long, default_value_t = 100)]
    circuits: usize,
    #[arg(long, value_delimiter = ',', default_value = "3,5,7")]
    dims: Vec<u32>,
    #[arg(long, default_value_t = 5)]
    max_qudits: usize,
    #[arg(long, default_value_t = 100)]
    max_depth: usize,
    /// Shots on the first backend.
    #[arg(long, default_value_t = 800)]
    shots: usize,
    /// Shots on the second backend (default: same as --shots).
    #[arg(long)]
    shots_second: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    threshold: f64,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    report: ReportOut,
}

#[derive(Args)]
struct RbArgs {
    #[arg(long, default_value_t = 3)]
    d: u32,
    #[arg(long, value_delimiter = ',', default_value = "0,4,8,12,16,20")]
    depths: Vec<usize>,
    #[arg(long, default_value_t = 30)]
    circuits: usize,
    #[arg(long, default_value_t = 10_000)]
    shots: usize,
    #[arg(long, default_value_t = 0.05)]
    p: f64,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    report: ReportOut,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum PostselectArg {
    XOnly,
    All,
    Both,
}

#[derive(Args)]
struct LrbdArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,4,8,12,16,20")]
    depths: Vec<usize>,
    #[arg(long, default_value_t = 30)]
    circuits: usize,
    #[arg(long, default_value_t = 10_000)]
    shots: usize,
    #[arg(long, default_value_t = 0.05)]
    p: f64,
    #[arg(long, value_enum, default_value = "both")]
    postselect: PostselectArg,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    report: ReportOut,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = match e {
            SimError::Unsupported(_) | SimError::Dense(DenseError::TooLarge { .. }) => EXIT_UNSUPPORTED,
            SimError::NoShots => EXIT_INVALID,
            _ => EXIT_EXPERIMENT,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Sim(s) => s.into(),
            ExperimentError::InvalidConfig(m) => Failure::new(EXIT_INVALID, m),
            other => Failure::new(EXIT_EXPERIMENT, other.to_string()),
        }
    }
}

fn dimension(d: u32) -> Result<Dimension, Failure> {
    Dimension::new(d).map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))
}

/// Counts key: base-d digits for `d <= 10`, dash-separated decimals otherwise.
fn outcome_key(d: u32, shot: &[MeasurementRecord]) -> String {
    if d <= 10 {
        shot.iter().map(|r| char::from_digit(r.outcome, 10).expect("digit")).collect()
    } else {
        shot.iter().map(|r| r.outcome.to_string()).collect::<Vec<_>>().join("-")
    }
}

#[derive(Serialize)]
struct RunOutput<'a> {
    dimension: u32,
    qudits: usize,
    shots: usize,
    seed: u64,
    method: Method,
    records: &'a [Vec<MeasurementRecord>],
    counts: &'a BTreeMap<String, u64>,
}

fn cmd_run(args: &RunArgs) -> Result<String, Failure> {
    let text = std::fs::read_to_string(&args.file)
        .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", args.file.display())))?;
    let c = parse_circuit(&text).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", args.file.display())))?;
    if args.shots == 0 {
        return Err(Failure::new(EXIT_INVALID, "--shots must be at least 1"));
    }
    let shots = sample(&c, args.shots, args.seed, args.method)?;
    let d = c.dim().get();
    let mut counts = BTreeMap::new();
    for s in &shots {
        *counts.entry(outcome_key(d, s)).or_insert(0u64) += 1;
    }
    Ok(match args.out {
        RunFormat::Json => {
            let out = RunOutput {
                dimension: d,
                qudits: c.num_qudits(),
                shots: args.shots,
                seed: args.seed,
                method: args.method,
                records: &shots,
                counts: &counts,
            };
            serde_json::to_string_pretty(&out).expect("serializable") + "\n"
        }
        RunFormat::Counts => serde_json::to_string_pretty(&counts).expect("serializable") + "\n",
        RunFormat::Csv => {
            let mut s = String::from("shot,seq,qudit,deterministic,outcome\n");
            for (i, shot) in shots.iter().enumerate() {
                for r in shot {
                    let _ = writeln!(s, "{i},{},{},{},{}", r.seq, r.qudit, r.deterministic, r.outcome);
                }
            }
            s
        }
    })
}

fn parse_secret(d: u32, s: &str) -> Result<Vec<u32>, Failure> {
    let bad = || Failure::new(EXIT_INVALID, format!("invalid secret '{s}' for dimension {d}"));
    let digits: Vec<u32> = if d > 10 {
        s.split('-').map(|t| t.parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    } else {
        s.chars().map(|ch| ch.to_digit(10).ok_or_else(bad)).collect::<Result<_, _>>()?
    };
    if digits.is_empty() || digits.iter().any(|&v| v >= d) {
        return Err(bad());
    }
    Ok(digits)
}

fn cmd_gen(kind: &GenKind) -> Result<String, Failure> {
    let c: Circuit = match *kind {
        GenKind::Dj { d, ref oracle, value } => {
            let oracle = match oracle.as_str() {
                "identity" => DjOracle::Identity,
                "constant" if value < d => DjOracle::Constant(value),
                "constant" => return Err(Failure::new(EXIT_INVALID, format!("--value must be below {d}"))),
                other => {
                    return Err(Failure::new(
                        EXIT_INVALID,
                        format!("unknown oracle '{other}' (expected identity or constant)"),
                    ))
                }
            };
            build_deutsch_jozsa(dimension(d)?, oracle)
        }
        GenKind::Bv { d, ref secret } => build_bernstein_vazirani(dimension(d)?, &parse_secret(d, secret)?),
        GenKind::Ghz { n, d } => {
            if n == 0 {
                return Err(Failure::new(EXIT_INVALID, "--n must be at least 1"));
            }
            build_ghz_chain(n, dimension(d)?)
        }
        GenKind::Local { d, depth, seed } => {
            build_local_gate_test(dimension(d)?, depth, &mut ChaCha8Rng::seed_from_u64(seed))
        }
        GenKind::Random { n, d, depth, seed } => {
            if n == 0 {
                return Err(Failure::new(EXIT_INVALID, "--n must be at least 1"));
            }
            let cfg = RandomCircuitConfig::new(n, depth);
            build_random_clifford_circuit(dimension(d)?, &cfg, &mut ChaCha8Rng::seed_from_u64(seed))
        }
    };
    Ok(c.to_sdim())
}

fn write_manifest<T: Serialize>(path: &Option<PathBuf>, experiment: &str, config: &T) -> Result<(), Failure> {
    if let Some(p) = path {
        std::fs::write(p, manifest_json(experiment, config) + "\n")
            .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn json_report<T: Serialize, R: Serialize>(experiment: &str, config: &T, report: &R) -> String {
    #[derive(Serialize)]
    struct Out<'a, T, R> {
        experiment: &'a str,
        config: &'a T,
        report: &'a R,
    }
    serde_json::to_string_pretty(&Out { experiment, config, report }).expect("serializable") + "\n"
}

fn cmd_validate(args: &ValidateArgs) -> Result<(String, bool), Failure> {
    let methods: Vec<&str> = args.pairs.split(',').collect();
    let [a, b] = methods[..] else {
        return Err(Failure::new(EXIT_INVALID, format!("--pairs needs two methods, got '{}'", args.pairs)));
    };
    let parse = |m: &str| m.trim().parse::<Method>().map_err(|e| Failure::new(EXIT_INVALID, e));
    if args.circuits == 0 || args.shots == 0 || args.shots_second == Some(0) {
        return Err(Failure::new(EXIT_INVALID, "--circuits and shot counts must be at least 1"));
    }
    let cfg = ValidationConfig {
        first: parse(a)?,
        second: parse(b)?,
        circuits: args.circuits,
        dims: args.dims.clone(),
        max_qudits: args.max_qudits,
        max_depth: args.max_depth,
        shots_first: args.shots,
        shots_second: args.shots_second.unwrap_or(args.shots),
        threshold: args.threshold,
        seed: args.seed,
    };
    for &d in &cfg.dims {
        dimension(d)?;
    }
    write_manifest(&args.report.manifest, "validate", &cfg)?;
    let rep = validate_backend_pair(&cfg)?;
    let text = match args.report.out {
        ReportFormat::Csv => rep.to_csv(),
        ReportFormat::Json => json_report("validate", &cfg, &rep),
    };
    Ok((text, rep.all_pass()))
}

fn cmd_rb(args: &RbArgs) -> Result<String, Failure> {
    let cfg = RbConfig {
        d: args.d,
        depths: args.depths.clone(),
        circuits: args.circuits,
        shots: args.shots,
        p: args.p,
        seed: args.seed,
    };
    write_manifest(&args.report.manifest, "rb", &cfg)?;
    let rep = run_rb(&cfg)?;
    Ok(match args.report.out {
        ReportFormat::Csv => {
            let mut s = rep.to_csv();
            match rep.fit {
                Some(f) => {
                    let _ = writeln!(s, "# alpha={:.6} b={:.6}", f.alpha, f.b);
                }
                None => s.push_str("# alpha=none\n"),
            }
            s
        }
        ReportFormat::Json => json_report("rb", &cfg, &rep),
    })
}

fn cmd_lrbd(args: &LrbdArgs) -> Result<String, Failure> {
    #[derive(Serialize)]
    struct Config<'a> {
        #[serde(flatten)]
        run: &'a LrbdConfig,
        postselect: &'a str,
        code: Vec<String>,
    }
    let run = LrbdConfig {
        depths: args.depths.clone(),
        circuits: args.circuits,
        shots: args.shots,
        p: args.p,
        seed: args.seed,
    };
    let code = DetectionCode::five_qudit();
    let which = match args.postselect {
        PostselectArg::XOnly => "x-only",
        PostselectArg::All => "all",
        PostselectArg::Both => "both",
    };
    let cfg = Config { run: &run, postselect: which, code: code.stabilizers().iter().map(|s| s.to_string()).collect() };
    write_manifest(&args.report.manifest, "lrbd", &cfg)?;
    let mut rep = run_lrb_d(&run, &code)?;
    if args.postselect != PostselectArg::Both {
        let keep: Postselect = which.parse().expect("known name");
        rep = LrbdReport { points: rep.points.into_iter().filter(|p| p.postselect == keep).collect() };
    }
    Ok(match args.report.out {
        ReportFormat::Csv => rep.to_csv(),
        ReportFormat::Json => json_report("lrbd", &cfg, &rep),
    })
}

fn dispatch(cli: &Cli) -> Result<(String, u8), Failure> {
    Ok(match &cli.command {
        Command::Run(a) => (cmd_run(a)?, 0),
        Command::Gen { kind } => (cmd_gen(kind)?, 0),
        Command::Validate(a) => {
            let (text, pass) = cmd_validate(a)?;
            (text, if pass { 0 } else { EXIT_THRESHOLD })
        }
        Command::Rb(a) => (cmd_rb(a)?, 0),
        Command::Lrbd(a) => (cmd_lrbd(a)?, 0),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_INVALID);
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let start = Instant::now();
    let result = dispatch(&cli);
    if cli.timing {
        eprintln!("elapsed_ms={:.3}", start.elapsed().as_secs_f64() * 1e3);
    }
    match result {
        Ok((text, code)) => {
            print!("{text}");
            if code == EXIT_THRESHOLD {
                eprintln!("error: at least one circuit exceeded the TVD threshold");
            }
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
