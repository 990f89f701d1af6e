use std::io::Write;

use anyhow::Result;
use jpcomp_core::scenario::MetricsRow;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Appends rows (no header) to an open CSV writer.
pub fn write_rows<W: Write>(w: &mut csv::Writer<W>, rows: &[MetricsRow]) -> Result<()> {
    for r in rows {
        let powers: Vec<String> = r.per_bs_power.iter().map(|p| p.to_string()).collect();
        w.write_record([
            r.frame.to_string(),
            r.inner_iteration.to_string(),
            r.algorithm.to_string(),
            r.seed.to_string(),
            r.sum_rate.to_string(),
            r.effective_rate.to_string(),
            powers.join(";"),
            opt(r.consensus_residual),
            opt(r.gradient_norm),
            r.active_streams.to_string(),
            r.backhaul_scalars.to_string(),
            r.quantizer_saturation_events.to_string(),
        ])?;
    }
    Ok(())
}

/// Header plus one record per row. `per_bs_power` is `;`-separated and
/// missing diagnostics are empty fields.
pub fn write_csv<W: Write>(out: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MetricsRow::COLUMNS)?;
    write_rows(&mut w, rows)?;
    w.flush()?;
    Ok(())
}
