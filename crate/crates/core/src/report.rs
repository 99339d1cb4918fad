//! Result emission: sweep outcomes to CSV or JSON, deterministically.
//!
//! The CSV header is a fixed contract — downstream plotting scripts match
//! columns by name — and every float prints as the shortest decimal that
//! parses back to the identical bit pattern (Rust's default float
//! formatting), so emitted files are byte-identical across runs, operating
//! systems, and scheduler interleavings. Failed sweep points cannot be
//! represented in the fixed-column CSV and are omitted there (callers
//! report them separately); the JSON stream carries them inline as objects
//! with an `error` field alongside the echoed inputs.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::pipeline::{ResultRow, SweepOutcome};
use crate::{Error, Result};

/// The exact CSV column contract, in emission order.
pub const CSV_HEADER: &str = "distance_km,weather,aperture_m,elevation_deg,ao,kappa,sigma_R2,\
                              regime,lambda_eff,r2_eff,sigma_drift2_m2,eta_eff,eta_total,Q_Z,E_Z,\
                              e_X11,skr_bits_per_pulse,skr_decoy_bits_per_pulse";

/// Supported emission formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidInput(format!(
                "unknown output format `{other}`; available: csv, json"
            ))),
        }
    }
}

impl std::fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

/// One CSV line for a finished row, columns in [`CSV_HEADER`] order.
fn csv_line(row: &ResultRow) -> String {
    let mut line = String::new();
    // Floats use the default formatter: shortest decimal that round-trips.
    let _ = write!(
        line,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},",
        row.distance_km,
        row.weather,
        row.aperture_m,
        row.elevation_deg,
        row.ao,
        row.kappa,
        row.sigma_r2,
        row.regime,
        row.lambda_eff,
        row.r2_eff,
        row.sigma_drift2_m2,
        row.eta_eff,
        row.eta_total,
        row.q_z,
        row.e_z,
        row.e_x11,
        row.skr_bits_per_pulse,
    );
    if let Some(skr_decoy) = row.skr_decoy_bits_per_pulse {
        let _ = write!(line, "{skr_decoy}");
    }
    line
}

/// Renders the header plus one line per finished row. Failed points are
/// omitted; a run with zero finished rows yields a header-only file.
pub fn csv_string(outcomes: &[SweepOutcome]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in outcomes.iter().filter_map(SweepOutcome::as_row) {
        out.push_str(&csv_line(row));
        out.push('\n');
    }
    out
}

/// Renders every outcome — finished rows and failures alike — as a JSON
/// array. Row objects mirror the CSV columns by name; failures carry their
/// echoed inputs plus an `error` string.
pub fn json_string(outcomes: &[SweepOutcome]) -> Result<String> {
    let mut out = serde_json::to_string_pretty(outcomes)
        .map_err(|e| Error::InvalidInput(format!("JSON serialization failed: {e}")))?;
    out.push('\n');
    Ok(out)
}

/// Renders the outcomes in the requested format.
pub fn render(outcomes: &[SweepOutcome], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => Ok(csv_string(outcomes)),
        OutputFormat::Json => json_string(outcomes),
    }
}

/// Writes the rendered outcomes to any writer.
pub fn emit<W: Write>(outcomes: &[SweepOutcome], format: OutputFormat, writer: &mut W) -> Result<()> {
    let text = render(outcomes, format)?;
    writer.write_all(text.as_bytes())?;
    Ok(())
}

/// Writes the rendered outcomes to a file path.
pub fn write_file(outcomes: &[SweepOutcome], format: OutputFormat, path: &Path) -> Result<()> {
    let text = render(outcomes, format)?;
    std::fs::write(path, text)?;
    Ok(())
}
