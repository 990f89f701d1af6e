use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Result};
use jpcomp_core::scenario::{run_scenario, MetricsRow, ScenarioConfig};
use rayon::prelude::*;

use crate::config::with_override;
use crate::output::write_rows;

/// Outcome of one (value, seed) cell.
#[derive(Debug)]
pub struct SweepCell {
    pub value: String,
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub final_sum_rate: Option<f64>,
    pub error: Option<String>,
}

/// Seed-averaged result of one axis value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub value: String,
    pub mean_final_sum_rate: f64,
    pub mean_effective_rate: f64,
    pub completed: usize,
    pub failed: usize,
    pub output: Option<PathBuf>,
}

#[derive(Debug)]
pub struct SweepReport {
    pub summaries: Vec<SweepSummary>,
    pub errors: Vec<String>,
}

fn run_cell(base: &str, axis: &str, value: &str, offset: u64) -> (SweepCell, f64) {
    let mut cell =
        SweepCell { value: value.to_string(), seed: 0, rows: Vec::new(), final_sum_rate: None, error: None };
    let cfg: ScenarioConfig = match with_override(base, axis, value) {
        Ok(mut c) => {
            c.seed = c.seed.wrapping_add(offset);
            c
        }
        Err(e) => {
            cell.error = Some(format!("{e:#}"));
            return (cell, 0.0);
        }
    };
    cell.seed = cfg.seed;
    match run_scenario(&cfg) {
        Ok(out) => {
            cell.rows = out.rows;
            if let Some(fe) = out.summary.error {
                cell.error = Some(format!("seed {}: frame {}: {}", cfg.seed, fe.frame, fe.error));
                (cell, 0.0)
            } else {
                cell.final_sum_rate = Some(out.summary.final_sum_rate);
                (cell, out.summary.mean_effective_rate)
            }
        }
        Err(e) => {
            cell.error = Some(format!("seed {}: {e}", cfg.seed));
            (cell, 0.0)
        }
    }
}

fn file_name(axis: &str, value: &str) -> String {
    let clean: String = value.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect();
    format!("{axis}_{clean}.csv")
}

/// Runs every (value, seed) cell concurrently. Seeds are the configured
/// seed plus `0..seeds`. With `out_dir`, writes one CSV per value. Failing
/// cells are reported and skipped.
pub fn run_sweep(base: &str, axis: &str, values: &[String], seeds: usize, out_dir: Option<&Path>) -> Result<SweepReport> {
    if values.is_empty() || seeds == 0 {
        return Err(anyhow!("a sweep needs at least one value and one seed"));
    }
    let jobs: Vec<(usize, u64)> =
        (0..values.len()).flat_map(|v| (0..seeds as u64).map(move |s| (v, s))).collect();
    let cells: Vec<(SweepCell, f64)> = jobs.par_iter().map(|&(v, s)| run_cell(base, axis, &values[v], s)).collect();
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }
    let mut summaries = Vec::new();
    let mut errors = Vec::new();
    for value in values {
        let group: Vec<&(SweepCell, f64)> = cells.iter().filter(|(c, _)| c.value == *value).collect();
        let mut output = None;
        if let Some(dir) = out_dir {
            let path = dir.join(file_name(axis, value));
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
            w.write_record(MetricsRow::COLUMNS)?;
            for (c, _) in &group {
                write_rows(&mut w, &c.rows)?;
            }
            w.flush()?;
            output = Some(path);
        }
        let ok: Vec<&(SweepCell, f64)> = group.iter().copied().filter(|(c, _)| c.error.is_none()).collect();
        errors.extend(group.iter().filter_map(|(c, _)| c.error.as_ref().map(|e| format!("{axis} = {value}: {e}"))));
        let n = ok.len().max(1) as f64;
        summaries.push(SweepSummary {
            value: value.clone(),
            mean_final_sum_rate: ok.iter().map(|(c, _)| c.final_sum_rate.unwrap_or(0.0)).sum::<f64>() / n,
            mean_effective_rate: ok.iter().map(|(_, e)| e).sum::<f64>() / n,
            completed: ok.len(),
            failed: group.len() - ok.len(),
            output,
        });
    }
    Ok(SweepReport { summaries, errors })
}
