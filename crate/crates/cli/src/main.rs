use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cm_cli::config::{ExperimentConfig, Format, Kind};
use cm_cli::{run, run_preset, CliError, RunOutput};

/// Channels' matching experiments: presets, configured runs, random trials
/// and R(G) sweeps.
#[derive(Debug, Parser)]
#[command(name = "cmatch", version)]
struct Cli {
    /// Output directory for the trace and summary files.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Convergence threshold on H(Q||P), in bits.
    #[arg(long, global = true, value_name = "BITS")]
    tol: Option<f64>,
    /// Base seed for random trials.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a named scenario and check it against its expected results.
    Preset { name: String },
    /// Run any configuration file.
    Run { config: PathBuf },
    /// Run a `kind = "trials"` configuration.
    Trials { config: PathBuf },
    /// Run a `kind = "rg_curve"` configuration.
    Rg { config: PathBuf },
}

fn load(cli: &Cli, path: &Path, expected: Option<Kind>) -> Result<ExperimentConfig, CliError> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(kind) = expected {
        if config.kind != kind {
            return Err(CliError::Usage(format!(
                "{} has kind = \"{}\", expected \"{}\"",
                path.display(),
                config.kind.as_str(),
                kind.as_str()
            )));
        }
    }
    if let Some(tol) = cli.tol {
        config.tol = tol;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn execute(cli: &Cli) -> Result<RunOutput, CliError> {
    let format_arg = cli.format.map(|f| match f {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    });
    let (output, format, dir) = match &cli.command {
        Command::Preset { name } => {
            let format = format_arg.unwrap_or_default();
            let output = run_preset(name, format, cli.tol)?;
            (output, format, PathBuf::from("out").join(name))
        }
        Command::Run { config } | Command::Trials { config } | Command::Rg { config } => {
            let expected = match cli.command {
                Command::Trials { .. } => Some(Kind::Trials),
                Command::Rg { .. } => Some(Kind::RgCurve),
                _ => None,
            };
            let config = load(cli, config, expected)?;
            let format = format_arg.unwrap_or(config.output.format);
            let dir = config.output.dir.clone().map_or_else(|| PathBuf::from("out"), PathBuf::from);
            (run(&config, format)?, format, dir)
        }
    };
    let dir = cli.out.clone().unwrap_or(dir);
    output.write(&dir, format)?;
    Ok(output)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(output) => {
            print!("{}", output.report.to_text());
            if output.report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
