use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vcse_cli::{aggregate_dirs, run_experiment, run_suite, summary_csv, CliError, ExperimentConfig, Preset, RunOptions};

/// Train and compare exploration bonuses on gridworlds.
///
/// `VCSE_OUT_DIR` and `VCSE_THREADS` set the output directory and worker
/// count when the corresponding flag is absent.
#[derive(Debug, Parser)]
#[command(name = "vcse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Overrides {
    /// Replace the config's seeds, e.g. `0,1,2` or `0..8`.
    #[arg(long)]
    seeds: Option<String>,
    /// Replace the config's step budget.
    #[arg(long)]
    budget: Option<u64>,
    /// Worker threads for parallel seeds.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment config.
    Run {
        config: PathBuf,
        /// Parent directory of the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Summarize finished run directories of one task.
    Aggregate {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Write summary.json and summary.csv here as well as printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every condition of a preset.
    Preset {
        name: Preset,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Config { field: Some("--seeds".into()), message: format!("cannot parse seeds {text:?}") };
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        return if a < b { Ok((a..b).collect()) } else { Err(bad()) };
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn env_path(name: &str) -> Option<PathBuf> {
    std::env::var_os(name).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("VCSE_THREADS") {
        Ok(v) if !v.is_empty() => v
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config { field: Some("VCSE_THREADS".into()), message: format!("not a count: {v:?}") }),
        _ => Ok(None),
    }
}

fn apply(cfg: &mut ExperimentConfig, o: &Overrides) -> Result<(), CliError> {
    if let Some(s) = &o.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if let Some(b) = o.budget {
        cfg.budget_steps = b;
    }
    Ok(())
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

fn write(path: PathBuf, contents: String) -> Result<(), CliError> {
    std::fs::write(&path, contents).map_err(|e| CliError::io(path, e))
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, overrides } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            apply(&mut cfg, &overrides)?;
            let out_dir = out.or_else(|| env_path("VCSE_OUT_DIR")).or_else(|| cfg.out_dir.clone());
            if out_dir.is_none() {
                return Err(CliError::Config {
                    field: Some("out_dir".into()),
                    message: "no output directory: pass --out, set VCSE_OUT_DIR or out_dir".into(),
                });
            }
            let opts = RunOptions { out_dir, threads: threads(overrides.threads)?, verbose: true };
            let outcome = run_experiment(&cfg, &opts)?;
            print_json(&outcome.summary);
        }
        Command::Aggregate { dirs, out } => {
            let rows = aggregate_dirs(&dirs)?;
            if let Some(out) = out {
                std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
                write(out.join("summary.json"), serde_json::to_string_pretty(&rows).expect("summary serializes"))?;
                write(out.join("summary.csv"), summary_csv(&rows))?;
            }
            print_json(&rows);
        }
        Command::Preset { name, out, overrides } => {
            let mut conditions = name.conditions();
            for c in &mut conditions {
                apply(c, &overrides)?;
            }
            let opts = RunOptions { out_dir: Some(out), threads: threads(overrides.threads)?, verbose: true };
            let outcomes = run_suite(&conditions, &opts)?;
            print_json(&outcomes.iter().map(|o| &o.summary).collect::<Vec<_>>());
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.validate()?;
            print_json(&serde_json::json!({ "valid": true, "name": cfg.name, "seeds": cfg.seeds.len() }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.report()).expect("report serializes"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
