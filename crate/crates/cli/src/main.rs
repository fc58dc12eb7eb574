//! `cptsim`: spectra, sweeps, lineshapes, relaxation-ratio fits and the
//! validation suite from a TOML run configuration.

mod commands;
mod config;
mod error;
mod output;
mod presets;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Writer;

#[derive(Parser)]
#[command(name = "cptsim", version, about = "Cs D1 coherent population trapping simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for scans (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Scan the Raman detuning: spectrum.csv and peaks.json.
    Spectrum(RunArgs),
    /// Intensity or trap-population sweep: sweep.csv and sweep.json.
    Sweep(RunArgs),
    /// Numeric against closed-form lineshape of one resonance.
    Lineshape(RunArgs),
    /// Fit the relaxation ratio r to a reference spectrum.
    FitR(RunArgs),
    /// Run the oracle and invariant suite; exit 4 on any failure.
    Validate(ValidateArgs),
    /// List the bundled presets.
    Presets,
}

#[derive(Args)]
struct Source {
    /// TOML run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled configuration (see `cptsim presets`).
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory (default: [output] dir, else ./cptsim-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    source: Source,
    /// Also write validation.json here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplies every bound; values below 1 tighten the suite.
    #[arg(long)]
    tolerance_scale: Option<f64>,
    /// Fault injection: shift one cached Clebsch–Gordan entry.
    #[arg(long, hide = true, allow_negative_numbers = true)]
    perturb_cg: Option<f64>,
}

fn load(source: &Source) -> Result<Option<RunConfig>, CliError> {
    let text = match (&source.config, &source.preset) {
        (Some(path), _) => std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        (None, Some(name)) => presets::get(name)
            .ok_or_else(|| CliError::Config(format!("unknown preset {name:?}; available: {}", presets::names().join(", "))))?
            .to_string(),
        (None, None) => return Ok(None),
    };
    config::parse(&text, std::env::vars()).map(Some)
}

fn require(source: &Source) -> Result<RunConfig, CliError> {
    load(source)?.ok_or_else(|| CliError::Config("pass --config PATH or --preset NAME".into()))
}

fn run_data(name: &str, args: &RunArgs, body: fn(&RunConfig, &Writer) -> Result<String, CliError>) -> Result<(), CliError> {
    let mut cfg = require(&args.source)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let resolved = cfg.scan_config()?;
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("cptsim-out"));
    let manifest = json!({
        "tool": "cptsim",
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "seed": cfg.seed,
        "config": cfg,
        "resolved_scan": resolved,
    });
    let writer = Writer::create(&dir, manifest)?;
    let summary = body(&cfg, &writer)?;
    println!("{name}: {summary}; wrote {} (manifest {})", dir.display(), &writer.hash()[..12]);
    Ok(())
}

fn run_validate(args: &ValidateArgs) -> Result<(), CliError> {
    let cfg = load(&args.source)?;
    let options = validate::Options {
        seed: args.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0),
        tolerance_scale: args
            .tolerance_scale
            .or(cfg.as_ref().map(|c| c.validate.tolerance_scale))
            .unwrap_or(1.0),
        perturb_cg: args.perturb_cg,
    };
    let checks = validate::run(options)?;
    for c in &checks {
        println!(
            "{} {:<32} residual {:.3e} bound {:.3e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.residual,
            c.bound
        );
    }
    if let Some(dir) = &args.out {
        let manifest = json!({
            "tool": "cptsim",
            "version": env!("CARGO_PKG_VERSION"),
            "command": "validate",
            "seed": options.seed,
            "tolerance_scale": options.tolerance_scale,
            "perturb_cg": options.perturb_cg,
        });
        Writer::create(dir, manifest)?.json("validation.json", &json!({ "checks": checks }))?;
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(failed.join(", ")))
    }
}

fn configure_workers(workers: Option<usize>) -> Result<(), CliError> {
    let Some(n) = workers else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_workers(cli.workers).and_then(|()| match &cli.command {
        Command::Spectrum(a) => run_data("spectrum", a, commands::spectrum),
        Command::Sweep(a) => run_data("sweep", a, commands::sweep),
        Command::Lineshape(a) => run_data("lineshape", a, commands::lineshape),
        Command::FitR(a) => run_data("fit-r", a, commands::fit_r),
        Command::Validate(a) => run_validate(a),
        Command::Presets => {
            for name in presets::names() {
                println!("{name}");
            }
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cptsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

