mod cache;
mod commands;
mod config;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use sidonor::stark::Component;

use crate::commands::{ConvergenceError, Ctx};
use crate::config::{parse_coord, ConfigError, RawConfig, RunConfig};
use crate::output::RunLock;

#[derive(Parser, Debug)]
#[command(name = "sidonor", version, about = "Donor hyperfine Stark shifts in silicon")]
struct Cli {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides solver.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List shells and field-split orbits.
    Shells,
    /// Find U0 reproducing the target binding energy.
    Calibrate,
    /// Field sweep, Stark fits and reports.
    Sweep,
    /// Predicted shift from a Table-1-style CSV.
    Predict {
        /// Site as x,y,z in units of a0/4.
        #[arg(long, allow_hyphen_values = true)]
        site: String,
        /// beta, B_xx, ..., B_yz
        #[arg(long, default_value = "beta")]
        component: String,
        /// Field, MV/m.
        #[arg(long, allow_hyphen_values = true)]
        field: f64,
        /// Field uncertainty, MV/m.
        #[arg(long, default_value_t = 0.0)]
        delta_e: f64,
        /// Zero-field value in kHz, for rows that have none.
        #[arg(long, allow_hyphen_values = true)]
        alpha0: Option<f64>,
        /// Table CSV; the shipped reference table by default.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Field scan of a donor below an interface.
    Interface,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Shells => "shells",
            Command::Calibrate => "calibrate",
            Command::Sweep => "sweep",
            Command::Predict { .. } => "predict",
            Command::Interface => "interface",
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?,
        None => String::new(),
    };
    let mut raw = RawConfig::parse(&text)?;
    raw.apply_env(std::env::vars())?;
    if let Some(seed) = cli.seed {
        raw.set_flag("solver.seed", &seed.to_string());
    }
    Ok(RunConfig::from_raw(&raw)?)
}

fn run_predict(cmd: &Command) -> Result<()> {
    let Command::Predict {
        site,
        component,
        field,
        delta_e,
        alpha0,
        table,
    } = cmd
    else {
        unreachable!()
    };
    let site = parse_coord(site).map_err(|e| ConfigError(format!("--site: {e}")))?;
    let comp = Component::parse(component).ok_or_else(|| ConfigError(format!("--component: unknown `{component}`")))?;
    if *delta_e < 0.0 {
        return Err(ConfigError("--delta-e must be >= 0".into()).into());
    }
    let text = commands::read_table(table.as_deref())?;
    let p = commands::predict(&text, site, comp, *field, *delta_e, *alpha0)?;
    println!("{:.6}", p.shift_khz);
    if *delta_e > 0.0 {
        println!("uncertainty {:.6}", p.uncertainty_khz);
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError(format!("--threads: {e}")))?;
    }
    if let Command::Predict { .. } = cli.command {
        return run_predict(&cli.command);
    }
    let cfg = load_config(cli)?;
    let _lock = RunLock::acquire(&cli.out)?;
    let mut ctx = Ctx::new(cfg, cli.out.clone(), cli.command.name());
    let result = match cli.command {
        Command::Shells => commands::cmd_shells(&mut ctx),
        Command::Calibrate => commands::cmd_calibrate(&mut ctx),
        Command::Sweep => commands::cmd_sweep(&mut ctx),
        Command::Interface => commands::cmd_interface(&mut ctx),
        Command::Predict { .. } => unreachable!(),
    };
    match &result {
        Ok(()) => ctx.manifest.status = "ok".into(),
        Err(e) => {
            ctx.manifest.status = "failed".into();
            ctx.manifest.error = Some(format!("{e:#}"));
        }
    }
    let written = ctx.manifest.write(&ctx.out);
    result?;
    written
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if cause.is::<ConvergenceError>() {
            return 3;
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() {
            return 4;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

