use std::path::PathBuf;
use std::process::ExitCode;

use affinepr_core::ensemble::ModelRegistry;
use affinepr_core::lab::{self, ExperimentKind, ExperimentResult, ExperimentSpec};
use affinepr_core::newton::{self, Mode, SolverConfig, StopReason};
use affinepr_core::oracle::checks::{CheckParams, CheckRegistry};
use affinepr_core::{Error, ModelKind};
use clap::{ArgGroup, Parser, Subcommand, ValueEnum};

const EXIT_INVALID: u8 = 2;
const EXIT_BREAKDOWN: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "affinepr", version, about = "Newton's method for affine phase retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover one random signal and print the iteration trace.
    Solve(SolveArgs),
    /// Run a configured experiment and write CSV/JSON/.dat results.
    Experiment {
        kind: KindArg,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an oracle suite; exits 4 on violation.
    Check {
        name: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Gaussian,
    Cdp,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Fullbatch,
    Resampled,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Convergence,
    SuccessRate,
}

#[derive(clap::Args)]
#[command(group(ArgGroup::new("size").args(["m", "m_over_n", "patterns"])))]
struct SolveArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    m_over_n: Option<f64>,
    #[arg(long = "L", id = "patterns")]
    patterns: Option<usize>,
    #[arg(long)]
    b_mag: f64,
    #[arg(long, default_value_t = 0.0)]
    b_phase: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    max_iters: usize,
    #[arg(long)]
    tol: f64,
    #[arg(long, value_enum, default_value = "fullbatch")]
    mode: ModeArg,
    #[arg(long = "T", requires = "mode")]
    blocks: Option<usize>,
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) => EXIT_INVALID,
        Error::SolverBreakdown { .. } => EXIT_BREAKDOWN,
        Error::ConditionViolated(_) => EXIT_CHECK_FAILED,
        Error::Io { .. } | Error::Json { .. } | Error::Csv { .. } => 1,
    }
}

fn solve(args: SolveArgs) -> Result<u8, Error> {
    let model_kind = match args.model {
        ModelArg::Gaussian => ModelKind::Gaussian,
        ModelArg::Cdp => ModelKind::Cdp,
    };
    let registry = ModelRegistry::builtin();
    let model = registry.for_kind(model_kind)?;
    let size = match (model_kind, args.m, args.m_over_n, args.patterns) {
        (ModelKind::Gaussian, Some(m), None, None) => m,
        (ModelKind::Gaussian, None, Some(r), None) => model.size_for(args.n, r)?,
        (ModelKind::Cdp, None, None, Some(l)) => l,
        (ModelKind::Gaussian, ..) => {
            return Err(Error::InvalidArgument("gaussian needs --m or --m-over-n".into()))
        }
        (ModelKind::Cdp, ..) => return Err(Error::InvalidArgument("cdp needs --L".into())),
    };
    let mode = match args.mode {
        ModeArg::Fullbatch => Mode::FullBatch,
        ModeArg::Resampled => Mode::Resampled,
    };
    if mode == Mode::Resampled && args.blocks.is_none() {
        return Err(Error::InvalidArgument("resampled mode needs --T".into()));
    }
    let cfg = SolverConfig {
        mode,
        max_iters: args.max_iters,
        blocks: args.blocks.unwrap_or(1),
        tol: args.tol,
        b_magnitude: args.b_mag,
        b_phase: args.b_phase,
        seed: args.seed,
        ..SolverConfig::default()
    };
    cfg.validate()?;
    let inputs = lab::trial_inputs(model, args.n, size, cfg.offset(), args.seed)?;
    let trace = newton::run(&inputs.ensemble, &inputs.observations, &cfg, Some(&inputs.x))?;

    println!("iter rel_err f grad_norm");
    for r in &trace.records {
        println!(
            "{} {} {} {}",
            r.iter,
            r.rel_err.map(lab::format_number).unwrap_or_default(),
            lab::format_number(r.f),
            lab::format_number(r.grad_norm)
        );
    }
    println!("stop: {:?}", trace.stop);

    if let Some(path) = &args.trace {
        let outcome = lab::TrialOutcome {
            trial: 0,
            param: size as f64,
            seed: args.seed,
            records: trace.records.clone(),
            stop: Some(trace.stop),
            breakdown: trace.breakdown.clone(),
            final_abs_err: None,
            wall_secs: 0.0,
        };
        lab::write_trace_csv(&[outcome], path)?;
    }
    if trace.stop == StopReason::Breakdown {
        eprintln!("solver breakdown: {}", trace.breakdown.unwrap_or_default());
        return Ok(EXIT_BREAKDOWN);
    }
    Ok(0)
}

fn experiment(kind: KindArg, config: PathBuf, out: PathBuf) -> Result<u8, Error> {
    let spec = ExperimentSpec::load(&config).map_err(|e| match e {
        Error::Io { .. } | Error::Json { .. } => Error::InvalidArgument(e.to_string()),
        other => other,
    })?;
    let expected = match kind {
        KindArg::Convergence => ExperimentKind::Convergence,
        KindArg::SuccessRate => ExperimentKind::SuccessRate,
    };
    if spec.kind != expected {
        return Err(Error::InvalidArgument(format!(
            "config kind {:?} does not match subcommand",
            spec.kind
        )));
    }
    let result = lab::run_experiment(&spec)?;
    match &result {
        ExperimentResult::Convergence(r) => {
            let s = &r.summary;
            println!(
                "trials {} reached {} breakdowns {} fitted_order {} max_contraction {} beta {}",
                s.trials,
                s.reached,
                s.breakdowns,
                s.fitted_order.map_or("-".into(), |v| format!("{v:.4}")),
                s.max_contraction.map_or("-".into(), |v| format!("{v:.4e}")),
                format_args!("{:.4e}", s.beta_bound),
            );
        }
        ExperimentResult::SuccessRate(r) => {
            println!("param rate ci95 mean_iters");
            for p in &r.points {
                println!(
                    "{} {:.3} {:.3} {}",
                    p.param,
                    p.rate,
                    p.ci95_half_width,
                    p.mean_iters.map_or("-".into(), |v| format!("{v:.2}"))
                );
            }
        }
    }
    for path in lab::write_results(&result, &out, &spec.formats)? {
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn check(name: &str, n: Option<usize>, seed: u64) -> Result<u8, Error> {
    let registry = CheckRegistry::builtin();
    let check = registry.get(name)?;
    let report = check.run(&CheckParams { n, seed })?;
    print!("{report}");
    Ok(if report.passed() { 0 } else { EXIT_CHECK_FAILED })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(args) => solve(args),
        Command::Experiment { kind, config, out } => experiment(kind, config, out),
        Command::Check { name, n, seed } => check(&name, n, seed),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
