//! `asyncnet`: theory predictions, Monte Carlo simulation, and
//! theory-vs-simulation comparison for adaptation over networks.
//!
//! Exit codes: 0 success, 1 IO error, 2 configuration error, 3 violated math
//! precondition, 4 runtime divergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use asyncnet::config::ExperimentConfig;
use asyncnet::demos::{run_demo, DEMO_NAMES};
use asyncnet::predict::theory_output;
use asyncnet::report::{
    comparison_table, write_curves, write_json, write_svg, SimulationArtifacts,
};
use asyncnet::runner::run_with_threads;
use asyncnet::AppError;
use asyncnet_core::sim::compare_theory;
use clap::{Args, Parser, Subcommand};

/// Seed fallback read when neither `--seed` nor the config provides one.
const SEED_ENV: &str = "ASYNCNET_SEED";

#[derive(Parser)]
#[command(
    name = "asyncnet",
    about = "Distributed adaptation over networks: closed-form performance theory and Monte Carlo verification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; stdout only when omitted (theory) or required
    /// (simulate/compare).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Seed override (wins over config and environment).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo runs (default: all cores). Output is
    /// independent of this setting.
    #[arg(long)]
    threads: Option<usize>,
    /// Also render the learning curves as an SVG plot.
    #[arg(long)]
    svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form performance predictions for a configuration.
    Theory {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the Monte Carlo experiment and write curves and the report.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run theory and simulation and compare them at the configured
    /// tolerances.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run a bundled scenario and print its pass/fail summary.
    Demo {
        /// One of: nfold, consensus-instability, async-vs-sync, equalization.
        name: String,
        /// Worker threads for Monte Carlo runs.
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn env_seed() -> Option<u64> {
    std::env::var(SEED_ENV).ok().and_then(|v| v.parse().ok())
}

fn load_config(path: &Path) -> Result<ExperimentConfig, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Io(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text).map_err(|e| AppError::Config(e.to_string()))
}

fn cmd_theory(common: &CommonArgs) -> Result<(), AppError> {
    let config = load_config(&common.config)?;
    let resolved = config.resolve(common.seed.or_else(env_seed))?;
    let output = theory_output(&resolved)?;
    let text = serde_json::to_string_pretty(&output).expect("report serializes");
    match &common.output {
        Some(dir) => {
            write_json(&dir.join("theory.json"), &output)?;
            println!("wrote {}", dir.join("theory.json").display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_simulate(common: &CommonArgs) -> Result<(), AppError> {
    let config = load_config(&common.config)?;
    let resolved = config.resolve(common.seed.or_else(env_seed))?;
    let (curve, report) = run_with_threads(&resolved.spec, common.threads)?;
    let dir = common
        .output
        .as_ref()
        .ok_or_else(|| AppError::Config("simulate requires --output".into()))?;
    write_json(&dir.join("report.json"), &report)?;
    write_curves(&dir.join("curves.csv"), &curve)?;
    if common.svg {
        write_svg(&dir.join("curves.svg"), &curve)?;
    }
    println!("wrote {}", dir.join("report.json").display());
    if let Some(info) = report.diverged {
        return Err(AppError::Divergence(format!(
            "simulation diverged at iteration {} (agent {})",
            info.iteration, info.agent
        )));
    }
    println!(
        "network MSD {:.6e} ± {:.1e} over {} runs",
        report.network_msd, report.network_msd_std_error, report.runs
    );
    Ok(())
}

fn cmd_compare(common: &CommonArgs) -> Result<(), AppError> {
    let config = load_config(&common.config)?;
    let resolved = config.resolve(common.seed.or_else(env_seed))?;
    let theory = theory_output(&resolved)?;
    let (curve, report) = run_with_threads(&resolved.spec, common.threads)?;
    let comparison = compare_theory(&report, &theory.record(), &resolved.tolerances)?;

    if let Some(dir) = &common.output {
        write_json(&dir.join("theory.json"), &theory)?;
        write_json(&dir.join("report.json"), &report)?;
        write_curves(&dir.join("curves.csv"), &curve)?;
        write_json(&dir.join("comparison.json"), &comparison)?;
        write_json(
            &dir.join("summary.json"),
            &SimulationArtifacts {
                report: &report,
                theory: Some(&theory),
                comparison: Some(&comparison),
            },
        )?;
        if common.svg {
            write_svg(&dir.join("curves.svg"), &curve)?;
        }
    }
    print!("{}", comparison_table(&comparison));
    if let Some(info) = report.diverged {
        return Err(AppError::Divergence(format!(
            "simulation diverged at iteration {} (agent {})",
            info.iteration, info.agent
        )));
    }
    if !comparison.all_pass() {
        // A failed tolerance is a finding, not a crash; report it through
        // the exit status without an error class.
        std::process::exit(1);
    }
    Ok(())
}

fn cmd_demo(name: &str, threads: Option<usize>) -> Result<bool, AppError> {
    let runner = || match run_demo(name) {
        None => Err(AppError::Config(format!(
            "unknown demo `{name}`; available: {}",
            DEMO_NAMES.join(", ")
        ))),
        Some(result) => result.map_err(AppError::from),
    };
    let demo = match threads {
        None => runner()?,
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .expect("thread pool");
            pool.install(runner)?
        }
    };
    println!("demo {}:", demo.name);
    for line in &demo.lines {
        println!("{line}");
    }
    println!("overall: {}", if demo.pass { "PASS" } else { "FAIL" });
    Ok(demo.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<bool, AppError> = match &cli.command {
        Command::Theory { common } => cmd_theory(common).map(|_| true),
        Command::Simulate { common } => cmd_simulate(common).map(|_| true),
        Command::Compare { common } => cmd_compare(common).map(|_| true),
        Command::Demo { name, threads } => cmd_demo(name, *threads),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
