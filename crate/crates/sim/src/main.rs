use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use jpcomp_core::scenario::run_scenario;
use jpcomp_sim::{load_config, parse_config, run_sweep, write_csv};

#[derive(Parser)]
#[command(name = "jpcomp", version, about = "JP-CoMP weighted sum-rate scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed of the configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the scenario for every value of one configuration key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated values for the axis.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        /// Directory for one CSV per value.
        #[arg(long, default_value = "sweep_out")]
        out_dir: PathBuf,
    },
}

fn run(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = load_config(&config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let output = run_scenario(&cfg).map_err(|e| anyhow!("{e}"))?;
    match &out {
        Some(path) => write_csv(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?), &output.rows)?,
        None => write_csv(io::stdout().lock(), &output.rows)?,
    }
    let s = &output.summary;
    let line = format!(
        "algorithm={} seed={} frames={} final_sum_rate={} mean_effective_rate={} backhaul_scalars={}",
        s.algorithm, s.seed, s.frames_completed, s.final_sum_rate, s.mean_effective_rate, s.backhaul_total
    );
    if out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
    if let Some(fe) = &s.error {
        return Err(anyhow!("solver failure in frame {}: {}", fe.frame, fe.error));
    }
    Ok(())
}

fn sweep(config: PathBuf, axis: String, values: Vec<String>, seeds: usize, out_dir: PathBuf) -> Result<()> {
    let text = fs::read_to_string(&config).with_context(|| format!("cannot read {}", config.display()))?;
    parse_config(&text).with_context(|| format!("in {}", config.display()))?;
    let report = run_sweep(&text, &axis, &values, seeds, Some(&out_dir))?;
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{axis},mean_final_sum_rate,mean_effective_rate,completed,failed,file")?;
    for s in &report.summaries {
        let file = s.output.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        writeln!(stdout, "{},{},{},{},{},{}", s.value, s.mean_final_sum_rate, s.mean_effective_rate, s.completed, s.failed, file)?;
    }
    for e in &report.errors {
        eprintln!("error: {e}");
    }
    if report.errors.is_empty() {
        Ok(())
    } else {
        Err(anyhow!("{} sweep cell(s) failed", report.errors.len()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out } => run(config, seed, out),
        Command::Sweep { config, axis, values, seeds, out_dir } => sweep(config, axis, values, seeds, out_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
