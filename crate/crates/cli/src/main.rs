//! `ccnn`: trace sampling patterns, run the invariant suites, train the toy
//! CNN/CCNN pair and print the complexity tables.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ccnn::analysis::{complexity_profile, measured_factors, ChannelRule, Scheme};
use ccnn::image::{trace_colors, trace_mask, write_pgm, write_ppm};
use ccnn::sampler::SamplerBank;
use ccnn::trace::{
    coverage_stats, lattice_sequence, random_sequence, stride3_reference_sequence, SamplerSequence,
    TraceState,
};
use ccnn::train::{compare, TrainConfig};
use ccnn::verify::{self, Suite};
use ccnn::Error;

#[derive(Parser)]
#[command(name = "ccnn", version, about = "Checkered subsampling toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace a sampler sequence and render the sampled positions.
    Trace(TraceArgs),
    /// Run invariant suites on seeded random instances.
    Verify(VerifyArgs),
    /// Train the toy network as a CNN and as a CCNN.
    Train(TrainArgs),
    /// Print the memory/compute tables with counted ratios.
    Complexity(ComplexityArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SeqKind {
    /// Sampler 0 on every submap.
    Fixed,
    /// The built-in low-discrepancy sequence.
    Lattice,
    /// Uniform random sampler ids.
    Random,
}

#[derive(Args)]
struct TraceArgs {
    /// Image side length.
    #[arg(long, default_value_t = 32)]
    size: usize,
    /// Subsampling steps (defaults to every line of --seq-file).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_enum, default_value_t = SeqKind::Lattice)]
    seq: SeqKind,
    #[arg(long, env = "CCNN_SEED", default_value_t = 0)]
    seed: u64,
    /// Read the sequence from a file instead (one line per step).
    #[arg(long)]
    seq_file: Option<PathBuf>,
    /// Window size: 2 (checkered pair) or 3 (stride-3 set).
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// PGM output path; stats go next to it with a .json extension.
    #[arg(long)]
    out: PathBuf,
    /// Also write a PPM coloured by submap (.ppm extension).
    #[arg(long)]
    color: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_parser = parse_suite)]
    suite: Suite,
    #[arg(long, env = "CCNN_SEED", default_value_t = 0)]
    seed: u64,
    /// Write the JSON summary here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, env = "CCNN_SEED", default_value_t = 0)]
    seed: u64,
    /// Write the JSON log here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.02)]
    lr: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long)]
    nesterov: bool,
    #[arg(long, default_value_t = 256)]
    train_size: usize,
    #[arg(long, default_value_t = 128)]
    test_size: usize,
}

#[derive(Args)]
struct ComplexityArgs {
    #[arg(long, default_value_t = 6)]
    max_steps: u32,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse()
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn sequence(args: &TraceArgs) -> Result<SamplerSequence, Failure> {
    if let Some(path) = &args.seq_file {
        let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
        let seq: SamplerSequence = text
            .parse()
            .map_err(|e: Error| Failure::usage(format!("{}: {e}", path.display())))?;
        return match args.steps {
            Some(s) if s > seq.steps() => Err(Failure::usage(format!(
                "{} has {} lines, {s} steps requested",
                path.display(),
                seq.steps()
            ))),
            Some(s) => Ok(seq.truncated(s)),
            None => Ok(seq),
        };
    }
    let steps = args
        .steps
        .ok_or_else(|| Failure::usage("--steps is required without --seq-file"))?;
    if steps == 0 {
        return Ok(SamplerSequence::default());
    }
    Ok(match (args.seq, args.k) {
        (SeqKind::Fixed, k) => SamplerSequence::constant(k, steps, 0),
        (SeqKind::Random, k) => random_sequence(k, steps, args.seed),
        (SeqKind::Lattice, 2) => lattice_sequence(steps)?,
        (SeqKind::Lattice, _) => {
            let seq = stride3_reference_sequence();
            if steps > seq.steps() {
                return Err(Failure::usage(format!(
                    "the stride-3 sequence has {} steps",
                    seq.steps()
                )));
            }
            seq.truncated(steps)
        }
    })
}

fn cmd_trace(args: TraceArgs) -> Result<ExitCode, Failure> {
    if !(2..=3).contains(&args.k) {
        return Err(Failure::usage("--k must be 2 or 3"));
    }
    if args.size == 0 {
        return Err(Failure::usage("--size must be positive"));
    }
    let seq = sequence(&args)?;
    let bank = SamplerBank::standard(args.k)?;
    let state = TraceState::new(args.size, args.size, args.k)?.apply_sequence(&bank, &seq)?;
    let stats = coverage_stats(&state);

    let mut pgm = Vec::new();
    write_pgm(&mut pgm, args.size, args.size, &trace_mask(&state))?;
    fs::write(&args.out, pgm).map_err(|e| io_failure(&args.out, e))?;
    if args.color {
        let path = args.out.with_extension("ppm");
        let mut ppm = Vec::new();
        write_ppm(&mut ppm, args.size, args.size, &trace_colors(&state))?;
        fs::write(&path, ppm).map_err(|e| io_failure(&path, e))?;
    }
    let json = stats.to_json();
    write_text(&args.out.with_extension("json"), &json)?;
    println!("{json}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, Failure> {
    let summary = verify::run(args.suite, args.seed);
    for suite in &summary.suites {
        for c in &suite.checks {
            eprintln!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
    }
    emit(args.out.as_deref(), &summary.to_json())?;
    Ok(if summary.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_train(args: TrainArgs) -> Result<ExitCode, Failure> {
    if args.batch_size == 0 || args.train_size == 0 {
        return Err(Failure::usage("--batch-size and --train-size must be positive"));
    }
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.lr,
        nesterov: args.nesterov,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let result = compare(&cfg, args.train_size, args.test_size)?;
    eprintln!("parameters: cnn {} ccnn {}", result.cnn_params, result.ccnn_params);
    if let Some(shape) = result.ccnn_final_map {
        eprintln!("ccnn map before the classifier: {shape:?}");
    }
    for (name, log) in [("cnn", &result.cnn), ("ccnn", &result.ccnn)] {
        for e in &log.epochs {
            eprintln!(
                "{name:>4} epoch {:>3}  loss {:.4}  train {:.3}  test {:.3}",
                e.epoch, e.loss, e.train_accuracy, e.test_accuracy
            );
        }
        if log.diverged {
            eprintln!("{name}: loss became non-finite");
        }
    }
    emit(args.out.as_deref(), &result.to_json())?;
    let ok = !result.cnn.diverged && !result.ccnn.diverged && result.cnn_params == result.ccnn_params;
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_complexity(args: ComplexityArgs) -> Result<ExitCode, Failure> {
    let size = 1usize
        .checked_shl(args.max_steps)
        .filter(|&s| s <= 1 << 12)
        .ok_or_else(|| Failure::usage("--max-steps must be at most 12"))?;
    let titles = [
        (ChannelRule::Double, "channels doubled at every subsampling step"),
        (ChannelRule::Constant, "channels held constant"),
        (ChannelRule::Sqrt2, "channels multiplied by sqrt(2) (checkered only)"),
    ];
    for (rule, title) in titles {
        println!("== {title} ==");
        println!(
            "{:>2}  {:<12}{:>12}{:>12}{:>14}{:>14}",
            "s", "scheme", "memory", "compute", "counted mem", "counted mac"
        );
        for s in 0..=args.max_steps {
            for scheme in Scheme::ALL {
                let Ok(p) = complexity_profile(scheme, rule, s) else {
                    continue;
                };
                let (mm, mc) = match measured_factors(scheme, rule, s, args.max_steps, size) {
                    Ok((m, c)) => (
                        m.map_or("n/a".into(), |f| f.to_string()),
                        c.map_or("n/a".into(), |f| f.to_string()),
                    ),
                    Err(_) => ("-".to_string(), "-".to_string()),
                };
                println!(
                    "{s:>2}  {:<12}{:>12}{:>12}{mm:>14}{mc:>14}",
                    scheme.to_string(),
                    p.memory_factor.to_string(),
                    p.compute_factor.to_string()
                );
            }
        }
        println!();
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Trace(a) => cmd_trace(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Train(a) => cmd_train(a),
        Command::Complexity(a) => cmd_complexity(a),
    };
    result.unwrap_or_else(|f| {
        eprintln!("error: {}", f.message);
        ExitCode::from(f.code)
    })
}
