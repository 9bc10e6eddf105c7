use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaswitch::harness::trace::{load_trace, LoadedTrace};
use adaswitch::harness::{evaluate_monitors, export_trace, load_config, run_scenario, MonitorReport, Trace, TraceFormat};
use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "adaswitch", version, about = "Adaptive switching control over a hybrid TT/ET bus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario, write its trace and monitor report, and judge it.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Validate a scenario config without running it.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-run the monitors on a saved trace. CSV traces need `--config`.
    Analyze {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

enum Outcome {
    Pass,
    MonitorFailure,
}

fn print_report(report: &MonitorReport) -> Outcome {
    for v in &report.verdicts {
        println!("{v}");
    }
    if report.passed() {
        println!("all {} monitors passed", report.verdicts.len());
        Outcome::Pass
    } else {
        let failed = report.verdicts.iter().filter(|v| !v.passed).count();
        println!("{failed} of {} monitors failed", report.verdicts.len());
        Outcome::MonitorFailure
    }
}

fn write_report(report: &MonitorReport, path: &Path) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(config: &Path, out: &Path, seed: Option<u64>, format: Format) -> anyhow::Result<Outcome> {
    let mut cfg = load_config(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let trace = run_scenario(&cfg)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let format = match format {
        Format::Csv => TraceFormat::Csv,
        Format::Json => TraceFormat::Json,
    };
    let trace_path = out.join(format!("trace.{}", format.extension()));
    export_trace(&trace, &trace_path, format)?;
    let report = evaluate_monitors(&trace, &cfg);
    write_report(&report, &out.join("report.json"))?;
    println!("wrote {}", trace_path.display());
    let outcome = print_report(&report);
    if let Some(why) = &trace.summary.aborted {
        bail!("run aborted: {why}");
    }
    Ok(outcome)
}

fn check(config: &Path) -> anyhow::Result<Outcome> {
    let cfg = load_config(config)?;
    println!(
        "ok: {} ({} plant(s), horizon {}, d2 = {}, policy {:?})",
        if cfg.name.is_empty() { "unnamed" } else { &cfg.name },
        cfg.n_apps(),
        cfg.horizon,
        cfg.bus.d2,
        cfg.policy
    );
    Ok(Outcome::Pass)
}

fn analyze(trace: &Path, config: Option<&Path>) -> anyhow::Result<Outcome> {
    let trace: Trace = match load_trace(trace)? {
        LoadedTrace::Full(t) => match config {
            Some(path) => Trace {
                config: load_config(path)?,
                ..*t
            },
            None => *t,
        },
        LoadedTrace::Rows(rows) => {
            let Some(path) = config else {
                bail!("a CSV trace carries no config; pass --config");
            };
            Trace::from_rows(load_config(path)?, rows)?
        }
    };
    Ok(print_report(&evaluate_monitors(&trace, &trace.config)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            config,
            out,
            seed,
            format,
        } => run(config, out, *seed, *format),
        Command::Check { config } => check(config),
        Command::Analyze { trace, config } => analyze(trace, config.as_deref()),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::MonitorFailure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
