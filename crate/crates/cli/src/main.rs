mod commands;
mod config;
mod output;
mod svg;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Payload, Report};
use config::{ConfigError, Format, RunConfig};

/// Two-photon phase, QBER and DWDM channel planning for Franson analyzers.
#[derive(Debug, Parser)]
#[command(name = "franson-dwdm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the table here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Phase plot (sweep and plan only).
    #[arg(long, global = true)]
    svg: Option<PathBuf>,
    /// Omit the `# generated_at=` line from CSV output.
    #[arg(long, global = true)]
    no_header_timestamp: bool,
    /// Overrides `simulation.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Phase and QBER across the source band at a fixed wavelength step.
    Sweep,
    /// Channel pairs with their worst-case phase and pass/fail verdict.
    Plan,
    /// Detuning scan for the maximum number of passing pairs.
    Optimize,
    /// Monte Carlo coincidence counts per channel pair.
    Simulate,
    /// Index, derivatives and group quantities of the fiber model.
    Dispersion {
        #[arg(long, default_value_t = 1450.0)]
        min_nm: f64,
        #[arg(long, default_value_t = 1650.0)]
        max_nm: f64,
        #[arg(long, default_value_t = 1.0)]
        step_nm: f64,
    },
}

enum Failure {
    Config(ConfigError),
    Numerical(franson_dwdm::Error),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<franson_dwdm::Error> for Failure {
    fn from(e: franson_dwdm::Error) -> Self {
        Failure::Numerical(e)
    }
}

fn load(cli: &Cli, required: bool) -> Result<RunConfig, Failure> {
    match &cli.config {
        Some(path) => Ok(RunConfig::load(path)?),
        None if required => Err(ConfigError {
            key: None,
            message: "--config <path> is required for this command".into(),
        }
        .into()),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let is_plot_command = matches!(cli.command, Command::Sweep | Command::Plan);
    if cli.svg.is_some() && !is_plot_command {
        return Err(ConfigError {
            key: Some("--svg".into()),
            message: "only supported by sweep and plan".into(),
        }
        .into());
    }
    let cfg = load(cli, !matches!(cli.command, Command::Dispersion { .. }))?;
    let resolved = cfg.resolve()?;
    let out = cli.out.clone().or_else(|| resolved.output.out.clone());
    let svg_path = if is_plot_command {
        cli.svg.clone().or_else(|| resolved.output.svg.clone())
    } else {
        None
    };
    let format = cli.format.unwrap_or(resolved.output.format);
    let timestamp = (!cli.no_header_timestamp && resolved.output.header_timestamp)
        .then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));

    let report = match &cli.command {
        Command::Sweep => commands::sweep(&resolved, svg_path.is_some())?,
        Command::Plan => commands::plan(&resolved, svg_path.is_some())?,
        Command::Optimize => commands::optimize(&resolved)?,
        Command::Simulate => commands::simulate_channels(&resolved, cli.seed.unwrap_or(resolved.simulation.seed))?,
        &Command::Dispersion { min_nm, max_nm, step_nm } => {
            if !(min_nm.is_finite() && max_nm.is_finite() && min_nm <= max_nm) {
                return Err(ConfigError {
                    key: Some("--min-nm".into()),
                    message: format!("need min ≤ max, got [{min_nm}, {max_nm}]"),
                }
                .into());
            }
            if !(step_nm.is_finite() && step_nm > 0.0) {
                return Err(ConfigError {
                    key: Some("--step-nm".into()),
                    message: "must be > 0".into(),
                }
                .into());
            }
            commands::dispersion(&resolved.problem.fiber, (min_nm, max_nm), step_nm)?
        }
    };
    emit(&report, format, timestamp.as_deref(), out.as_ref(), svg_path.as_ref())
}

fn emit(
    report: &Report,
    format: Format,
    timestamp: Option<&str>,
    out: Option<&PathBuf>,
    svg: Option<&PathBuf>,
) -> Result<(), Failure> {
    let text = match (&report.payload, format) {
        (Payload::Table(t), Format::Csv) | (Payload::Document { table: t, .. }, Format::Csv) => t.to_csv(timestamp),
        (Payload::Table(t), Format::Json) => output::to_json_text(&t.to_json_value()),
        (Payload::Document { json, .. }, Format::Json) => output::to_json_text(json),
    };
    let write = |path: &PathBuf, body: &str| {
        std::fs::write(path, body).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
    };
    if let (Some(path), Some(doc)) = (svg, &report.svg) {
        write(path, doc)?;
    }
    match out {
        Some(path) => {
            write(path, &text)?;
            let mut so = std::io::stdout().lock();
            for line in &report.summary {
                let _ = writeln!(so, "{line}");
            }
        }
        None => {
            // Keep stdout a clean table; summaries go to stderr.
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(|e| Failure::Io(e.to_string()))?;
            let mut se = std::io::stderr().lock();
            for line in &report.summary {
                let _ = writeln!(se, "{line}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
