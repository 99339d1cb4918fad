//! Command-line surface of the link model: single-point evaluation, grid
//! sweeps, decoy-state analysis, Monte Carlo validation, and preset
//! listing.
//!
//! Configuration comes from an optional TOML file (sections `[geometry]`,
//! `[turbulence]`, `[channel]`, `[receiver]`, `[security]`, `[decoy]`,
//! every field optional) with command-line flags overriding file values.
//! Results leave as CSV with a fixed header or as JSON mirroring the same
//! columns. Exit codes: 0 success, 1 input error (bad flags, unknown
//! presets, unreadable files), 2 numerical failure, 3 validation failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use turbulink::decoy::{DecoySettings, INTENSITY_LABELS};
use turbulink::pipeline::{
    run_point, run_sweep, run_validation, LinkConfig, PointResult, SweepOutcome, SweepSpec,
    ValidationRun,
};
use turbulink::presets::{
    ao_preset, weather_preset, AO_PRESETS, DETECTOR_EFFICIENCY, RECEIVER_OPTICS_TRANSMISSION,
    WEATHER_PRESETS,
};
use turbulink::report::{render, OutputFormat};
use turbulink::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "turbulink",
    version,
    about = "Free-space MDI-QKD link budget: turbulence, polarization, detection, key rate",
    after_help = "Exit codes: 0 success, 1 input error, 2 numerical failure, 3 validation failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate one configuration and emit its result row.
    Point(PointArgs),
    /// Evaluate a grid of configurations and emit one row per point.
    Sweep(SweepArgs),
    /// Evaluate the decoy-state bounds for one configuration.
    Decoy(DecoyArgs),
    /// Cross-check the closed forms against the Monte Carlo sampler.
    Validate(ValidateArgs),
    /// List the built-in weather, adaptive-optics, and decoy presets.
    Presets,
}

/// Scalar configuration overrides shared by the single-point subcommands.
#[derive(Args, Debug, Clone)]
struct OverrideArgs {
    /// TOML configuration file; flags below override its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Weather preset (clear, overcast, hazy, vacuum).
    #[arg(long)]
    weather: Option<String>,
    /// Adaptive-optics preset (off, mild, medium, strong).
    #[arg(long)]
    ao: Option<String>,
    /// Receiver aperture radius (m).
    #[arg(long, value_name = "M")]
    aperture_m: Option<f64>,
    /// Link distance (km).
    #[arg(long, value_name = "KM")]
    distance_km: Option<f64>,
    /// Elevation angle above the horizon (deg).
    #[arg(long, value_name = "DEG")]
    elevation_deg: Option<f64>,
    /// Rotation-axis concentration κ.
    #[arg(long)]
    kappa: Option<f64>,
    /// Enable the decoy-state stage.
    #[arg(long)]
    decoy: bool,
}

#[derive(Args, Debug)]
struct PointArgs {
    #[command(flatten)]
    overrides: OverrideArgs,
    /// Output format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Write the output to this file instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// TOML configuration file providing the base point of the sweep.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Distance grid (km): comma list, each entry a number or start:stop:count.
    #[arg(long, value_name = "GRID")]
    distance_km: Option<String>,
    /// Weather presets, comma-separated.
    #[arg(long, value_name = "LIST")]
    weather: Option<String>,
    /// Aperture radius grid (m): comma list, each entry a number or start:stop:count.
    #[arg(long, value_name = "GRID")]
    aperture_m: Option<String>,
    /// Elevation grid (deg): comma list, each entry a number or start:stop:count.
    #[arg(long, value_name = "GRID")]
    elevation_deg: Option<String>,
    /// Adaptive-optics presets, comma-separated.
    #[arg(long, value_name = "LIST")]
    ao: Option<String>,
    /// Rotation-axis concentration κ for every point.
    #[arg(long)]
    kappa: Option<f64>,
    /// Enable the decoy-state stage for every point.
    #[arg(long)]
    decoy: bool,
    /// Seed echoed into the sweep record (the closed-form sweep itself is
    /// deterministic).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Write the output to this file instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DecoyArgs {
    #[command(flatten)]
    overrides: OverrideArgs,
    /// Output format: text, csv, or json.
    #[arg(long, default_value = "text")]
    format: String,
    /// Write the output to this file instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    overrides: OverrideArgs,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    /// Monte Carlo seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output format: text or json.
    #[arg(long, default_value = "text")]
    format: String,
    /// Write the output to this file instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(error) => {
            // Help and version requests are successes; everything else is
            // a usage problem and therefore an input error.
            let code = match error.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = error.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code(&error))
        }
    }
}

/// Maps an error to the documented exit code: numerical failures are 2,
/// everything else (bad input, unknown presets, I/O) is 1.
fn exit_code(error: &Error) -> u8 {
    match error.root() {
        Error::Quadrature { .. } => 2,
        _ => 1,
    }
}

/// Exit code of a validation run: 0 when every quantity passes, 3 otherwise.
fn validation_exit(all_pass: bool) -> u8 {
    if all_pass {
        0
    } else {
        3
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Point(args) => cmd_point(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Decoy(args) => cmd_decoy(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Presets => cmd_presets(),
    }
}

/// Loads the TOML configuration file, or the built-in defaults without one.
fn load_config(path: Option<&Path>) -> Result<LinkConfig> {
    match path {
        None => Ok(LinkConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str(&text).map_err(|e| {
                Error::InvalidInput(format!("config file {}: {e}", path.display()))
            })
        }
    }
}

/// File first, then flags on top.
fn build_config(args: &OverrideArgs) -> Result<LinkConfig> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(weather) = &args.weather {
        config.turbulence.weather = weather.clone();
    }
    if let Some(ao) = &args.ao {
        config.channel.ao = ao.clone();
    }
    if let Some(aperture_m) = args.aperture_m {
        config.geometry.aperture_m = aperture_m;
    }
    if let Some(distance_km) = args.distance_km {
        config.geometry.distance_km = distance_km;
    }
    if let Some(elevation_deg) = args.elevation_deg {
        config.geometry.elevation_deg = elevation_deg;
    }
    if let Some(kappa) = args.kappa {
        config.channel.kappa = kappa;
    }
    if args.decoy {
        config.decoy.enabled = true;
    }
    Ok(config)
}

/// Parses a float grid: comma-separated entries, each either a plain number
/// or an inclusive `start:stop:count` range.
fn parse_float_grid(text: &str, name: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for entry in text.split(',') {
        let entry = entry.trim();
        if entry.is_empty() {
            continue;
        }
        if let Some((range, count)) = entry.rsplit_once(':') {
            let (start, stop) = range.split_once(':').ok_or_else(|| {
                Error::InvalidInput(format!(
                    "{name} entry `{entry}` is not a number or start:stop:count range"
                ))
            })?;
            let start: f64 = start.trim().parse().map_err(|_| {
                Error::InvalidInput(format!("{name} range start `{start}` is not a number"))
            })?;
            let stop: f64 = stop.trim().parse().map_err(|_| {
                Error::InvalidInput(format!("{name} range stop `{stop}` is not a number"))
            })?;
            let count: usize = count.trim().parse().map_err(|_| {
                Error::InvalidInput(format!("{name} range count `{count}` is not an integer"))
            })?;
            match count {
                0 => {
                    return Err(Error::InvalidInput(format!(
                        "{name} range `{entry}` has zero points"
                    )))
                }
                1 => values.push(start),
                _ => {
                    let step = (stop - start) / (count - 1) as f64;
                    for i in 0..count {
                        values.push(start + step * i as f64);
                    }
                }
            }
        } else {
            let value: f64 = entry.parse().map_err(|_| {
                Error::InvalidInput(format!("{name} entry `{entry}` is not a number"))
            })?;
            values.push(value);
        }
    }
    if values.is_empty() {
        return Err(Error::InvalidInput(format!("{name} grid is empty")));
    }
    Ok(values)
}

/// Parses a comma-separated list of preset labels.
fn parse_label_grid(text: &str, name: &str) -> Result<Vec<String>> {
    let labels: Vec<String> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    if labels.is_empty() {
        return Err(Error::InvalidInput(format!("{name} list is empty")));
    }
    Ok(labels)
}

/// Writes rendered text to the output file or stdout.
fn write_output(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_point(args: PointArgs) -> Result<u8> {
    let config = build_config(&args.overrides)?;
    let format = OutputFormat::from_str(&args.format)?;
    let point = run_point(&config)?;
    let text = render(&[SweepOutcome::Row(point.row)], format)?;
    write_output(&text, args.out.as_deref())?;
    Ok(0)
}

fn cmd_sweep(args: SweepArgs) -> Result<u8> {
    let base = load_config(args.config.as_deref())?;
    let mut base = base;
    if let Some(kappa) = args.kappa {
        base.channel.kappa = kappa;
    }
    if args.decoy {
        base.decoy.enabled = true;
    }
    let spec = SweepSpec {
        distances_km: match &args.distance_km {
            Some(text) => parse_float_grid(text, "distance")?,
            None => vec![base.geometry.distance_km],
        },
        weathers: match &args.weather {
            Some(text) => parse_label_grid(text, "weather")?,
            None => vec![base.turbulence.weather.clone()],
        },
        apertures_m: match &args.aperture_m {
            Some(text) => parse_float_grid(text, "aperture")?,
            None => vec![base.geometry.aperture_m],
        },
        elevations_deg: match &args.elevation_deg {
            Some(text) => parse_float_grid(text, "elevation")?,
            None => vec![base.geometry.elevation_deg],
        },
        ao_profiles: match &args.ao {
            Some(text) => parse_label_grid(text, "adaptive-optics")?,
            None => vec![base.channel.ao.clone()],
        },
        seed: args.seed,
        base,
    };
    let format = OutputFormat::from_str(&args.format)?;
    let outcomes = run_sweep(&spec)?;
    let failed: Vec<_> = outcomes.iter().filter_map(SweepOutcome::as_failed).collect();
    for failure in &failed {
        eprintln!(
            "sweep point failed: weather={} z={} km a={} m elevation={}° ao={}: {}",
            failure.weather,
            failure.distance_km,
            failure.aperture_m,
            failure.elevation_deg,
            failure.ao,
            failure.error
        );
    }
    if !failed.is_empty() {
        eprintln!(
            "{} of {} sweep points failed (kept in JSON output, omitted from CSV)",
            failed.len(),
            outcomes.len()
        );
    }
    let text = render(&outcomes, format)?;
    write_output(&text, args.out.as_deref())?;
    Ok(0)
}

fn decoy_text(point: &PointResult) -> String {
    use std::fmt::Write as _;
    let decoy = point.decoy.as_ref().expect("decoy stage ran");
    let row = &point.row;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "decoy analysis: weather={} z={} km a={} m elevation={}° ao={}",
        row.weather, row.distance_km, row.aperture_m, row.elevation_deg, row.ao
    );
    let _ = writeln!(
        out,
        "channel: lambda_eff={} r2_eff={} eta_total={}",
        row.lambda_eff, row.r2_eff, row.eta_total
    );
    let _ = writeln!(out, "gains Q^Z (rows mu_A, columns mu_B):");
    for (i, label) in INTENSITY_LABELS.iter().enumerate() {
        let _ = writeln!(
            out,
            "  {label:>2} | {:.6e} {:.6e} {:.6e}",
            decoy.q_z[i][0], decoy.q_z[i][1], decoy.q_z[i][2]
        );
    }
    let _ = writeln!(out, "errors E^Z:");
    for (i, label) in INTENSITY_LABELS.iter().enumerate() {
        let _ = writeln!(
            out,
            "  {label:>2} | {:.6} {:.6} {:.6}",
            decoy.e_z[i][0], decoy.e_z[i][1], decoy.e_z[i][2]
        );
    }
    let _ = writeln!(out, "Y11 lower bound: {}", decoy.y11_lower);
    let _ = writeln!(
        out,
        "e11^X upper bound: {}{}",
        decoy.e11_x_upper,
        if decoy.pessimistic_e11 {
            " (pessimistic fallback)"
        } else {
            ""
        }
    );
    let _ = writeln!(out, "skr (single-photon model): {}", row.skr_bits_per_pulse);
    let _ = writeln!(out, "skr (decoy bound): {}", decoy.skr_decoy);
    out
}

fn cmd_decoy(args: DecoyArgs) -> Result<u8> {
    let mut config = build_config(&args.overrides)?;
    config.decoy.enabled = true;
    let point = run_point(&config)?;
    let text = match args.format.as_str() {
        "text" => decoy_text(&point),
        other => {
            let format = OutputFormat::from_str(other)?;
            match format {
                OutputFormat::Csv => render(&[SweepOutcome::Row(point.row)], format)?,
                OutputFormat::Json => {
                    let value = serde_json::json!({
                        "row": point.row,
                        "decoy": point.decoy,
                    });
                    let mut text = serde_json::to_string_pretty(&value).map_err(|e| {
                        Error::InvalidInput(format!("JSON serialization failed: {e}"))
                    })?;
                    text.push('\n');
                    text
                }
            }
        }
    };
    write_output(&text, args.out.as_deref())?;
    Ok(0)
}

fn validation_text(run: &ValidationRun) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for entry in &run.report.entries {
        let _ = writeln!(
            out,
            "{:>10}: closed {:.6e}  estimate {:.6e} ± {:.2e}  |delta| {:.2e}  z {:.2}  {}",
            entry.quantity,
            entry.closed,
            entry.estimate,
            entry.stderr,
            entry.delta.abs(),
            entry.z,
            if entry.pass { "pass" } else { "FAIL" }
        );
    }
    let _ = writeln!(
        out,
        "samples {}  accepted {}  seed {}",
        run.estimate.n_samples, run.estimate.n_accepted, run.estimate.seed
    );
    let _ = writeln!(
        out,
        "validation: {}",
        if run.report.all_pass { "pass" } else { "fail" }
    );
    out
}

fn cmd_validate(args: ValidateArgs) -> Result<u8> {
    let config = build_config(&args.overrides)?;
    let run = run_validation(&config, args.samples, args.seed)?;
    let text = match args.format.as_str() {
        "text" => validation_text(&run),
        "json" => {
            let mut text = serde_json::to_string_pretty(&run)
                .map_err(|e| Error::InvalidInput(format!("JSON serialization failed: {e}")))?;
            text.push('\n');
            text
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown output format `{other}`; available: text, json"
            )))
        }
    };
    write_output(&text, args.out.as_deref())?;
    Ok(validation_exit(run.report.all_pass))
}

fn cmd_presets() -> Result<u8> {
    println!("weather presets:");
    for name in WEATHER_PRESETS {
        let profile = weather_preset(name)?;
        println!(
            "  {name:<9} ground_cn2={:e} m^-2/3  wind={} m/s  attenuation={} /km  cn2_scale={}",
            profile.ground_cn2,
            profile.wind_speed_mps,
            profile.attenuation_per_km,
            profile.cn2_scale
        );
    }
    println!("adaptive-optics presets:");
    for name in AO_PRESETS {
        let ao = ao_preset(name)?;
        println!(
            "  {name:<9} rho_trk={}  kappa_w={}  kappa_phi={}",
            ao.rho_trk, ao.kappa_w, ao.kappa_phi
        );
    }
    let decoy = DecoySettings::default();
    println!("decoy defaults:");
    println!(
        "  mu={}  nu={}  p_mu={}  p_nu={}  p_0={}  p_z={}  p_x={}  y0={:e}  f={}",
        decoy.mu,
        decoy.nu,
        decoy.p_mu,
        decoy.p_nu,
        decoy.p_0,
        decoy.p_z,
        decoy.p_x,
        decoy.y0,
        decoy.error_correction_f
    );
    println!("receiver defaults:");
    println!(
        "  detector_efficiency={DETECTOR_EFFICIENCY}  optics_transmission={RECEIVER_OPTICS_TRANSMISSION}"
    );
    Ok(0)
}
