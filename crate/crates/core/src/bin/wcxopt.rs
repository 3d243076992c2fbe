use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wcxopt::error::{Error, Result};
use wcxopt::harness::config::{preset, RunConfig, PRESET_NAMES};
use wcxopt::harness::rate;
use wcxopt::harness::run::execute;
use wcxopt::harness::verify::{parse_fault, verify};
use wcxopt::optimizers::Variant;

/// Benchmark and verification harness for adaptive projected subgradient
/// methods on weakly convex problems.
#[derive(Parser)]
#[command(name = "wcxopt", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a multi-seed run and write trajectory artifacts.
    Run(RunArgs),
    /// Run the verification suite; exit nonzero if any check fails.
    Verify(VerifyArgs),
    /// Sweep horizons and fit the convergence-rate slope.
    Rate(RateArgs),
}

#[derive(Args)]
struct CommonConfig {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset name used when no config file is given.
    #[arg(long)]
    problem: Option<String>,
    /// Optimizer variant: amsgrad, rmsprop, momentum-sgd, scalar-adagrad.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long = "T")]
    horizon: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Comma-separated checkpoint steps.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<usize>>,
    /// Output directory; defaults to $WCXOPT_OUT or ./wcxopt-out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker-pool size; defaults to the number of cores.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonConfig,
}

#[derive(Args)]
struct VerifyArgs {
    /// Fault injection for mutation-sensitivity demos:
    /// none, skip-vhat-max, unweighted-projection.
    #[arg(long, default_value = "none")]
    fault: String,
    /// Reduced trial counts (skips the theorem protocols).
    #[arg(long)]
    quick: bool,
    /// Also write the JSON report to this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct RateArgs {
    #[command(flatten)]
    common: CommonConfig,
    /// Comma-separated horizon list (>= 4 values).
    #[arg(long = "T-list", value_delimiter = ',', default_value = "100,1000,10000,100000")]
    horizons: Vec<usize>,
    /// Bypass the optimizer and feed an exact t^{-1/2} curve through the
    /// aggregation path.
    #[arg(long)]
    synthetic: bool,
}

fn parse_variant(name: &str) -> Result<Variant> {
    match name {
        "amsgrad" => Ok(Variant::AmsGrad),
        "rmsprop" => Ok(Variant::RmsPropVariant),
        "momentum-sgd" => Ok(Variant::MomentumSgd),
        "scalar-adagrad" => Ok(Variant::ScalarAdaGrad),
        other => Err(Error::invalid(format!(
            "unknown optimizer '{other}' (amsgrad, rmsprop, momentum-sgd, scalar-adagrad)"
        ))),
    }
}

fn resolve_config(common: &CommonConfig) -> Result<RunConfig> {
    let mut cfg = match (&common.config, &common.problem) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str::<RunConfig>(&text)?
        }
        (None, Some(name)) => preset(name)?,
        (None, None) => {
            return Err(Error::invalid(format!(
                "pass --config or --problem (presets: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    if let Some(name) = &common.optimizer {
        let variant = parse_variant(name)?;
        cfg.optimizer.variant = variant;
        if variant == Variant::RmsPropVariant {
            cfg.optimizer.beta1 = 0.0;
        }
    }
    if let Some(t) = common.horizon {
        cfg.horizon = t;
        cfg.checkpoints.clear();
    }
    if let Some(a) = common.alpha {
        cfg.optimizer.alpha = a;
    }
    if let Some(b) = common.beta1 {
        cfg.optimizer.beta1 = b;
    }
    if let Some(b) = common.beta2 {
        cfg.optimizer.beta2 = b;
    }
    if let Some(d) = common.delta {
        cfg.optimizer.delta = d;
    }
    if let Some(seeds) = &common.seeds {
        cfg.seeds = seeds.clone();
    }
    if let Some(cps) = &common.checkpoints {
        cfg.checkpoints = cps.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_root(flag: &Option<PathBuf>, cfg_dir: Option<&PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| cfg_dir.cloned())
        .or_else(|| std::env::var_os("WCXOPT_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("wcxopt-out"))
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run(args) => {
            let cfg = resolve_config(&args.common)?;
            let dir = out_root(&args.common.out, cfg.out_dir.as_ref());
            execute(&cfg, &dir, args.common.workers)?;
            println!("{}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify(args) => {
            let fault = parse_fault(&args.fault)?;
            let report = verify(fault, args.workers, args.quick)?;
            let text = serde_json::to_string_pretty(&report)?;
            println!("{text}");
            if let Some(dir) = &args.out {
                fs::create_dir_all(dir)?;
                fs::write(dir.join("verify_report.json"), format!("{text}\n"))?;
            }
            Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Cmd::Rate(args) => {
            let summary = if args.synthetic {
                rate::synthetic_sweep(&args.horizons)?
            } else {
                let cfg = resolve_config(&args.common)?;
                rate::sweep(&cfg, &args.horizons, args.common.workers)?
            };
            let dir = out_root(&args.common.out, None);
            rate::write_artifacts(&summary, &dir)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(if summary.pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
