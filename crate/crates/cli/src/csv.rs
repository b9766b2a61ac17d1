//! CSV report serialization.
//!
//! Layout: `# key=value` metadata lines, then the header
//! `h,h_prime,statistic,value,std_err`, then one row per statistic.  Floats
//! are written with 17 significant digits (`{:.16e}`), empty fields encode
//! absent values, and nothing time- or machine-dependent is included, so a
//! rerun with the same config and seed is byte-identical.

use std::io::Write;

use hurst_sense_core::ExperimentReport;

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// Writes the report; metadata order is experiment, seed, config hash, then
/// the report's own metadata in insertion order.
pub fn write_report(
    out: &mut impl Write,
    report: &ExperimentReport<f64>,
    seed: u64,
    config_hash: &str,
) -> std::io::Result<()> {
    writeln!(out, "# experiment={}", report.experiment)?;
    writeln!(out, "# seed={seed}")?;
    writeln!(out, "# config_hash={config_hash}")?;
    for (key, value) in &report.metadata {
        writeln!(out, "# {key}={value}")?;
    }
    writeln!(out, "h,h_prime,statistic,value,std_err")?;
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_opt(row.h),
            fmt_opt(row.h_prime),
            row.statistic,
            format_args!("{:.16e}", row.value),
            fmt_opt(row.std_err),
        )?;
    }
    Ok(())
}
