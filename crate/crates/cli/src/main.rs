//! `dlcz`: wavepackets, trajectory ensembles, superradiant enhancement and fits
//! for the read-out of a cold-atom quantum memory.

mod commands;
mod config;
mod csv;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RawConfig, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "dlcz", version, about = "Superradiant read-out of a cold-atom quantum memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration, one `key = value` per line.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override a configuration key; may be repeated and wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<(RawConfig, RunConfig), CliError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::load(path)?,
            None => RawConfig::default(),
        };
        for s in &self.set {
            raw.set(s)?;
        }
        let cfg = RunConfig::from_raw(&raw)?;
        Ok((raw, cfg))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the photon densities on a time grid.
    Wavepacket {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output CSV (stdout if omitted).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Sample detection times and histogram them.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Directory for records.csv and histogram_<statistic>.csv.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Compute the superradiant enhancement χ.
    Chi {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Report file (stdout if omitted).
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Also write the far-field intensity over the emission cap.
        #[arg(long, value_name = "FILE")]
        phi_map: Option<PathBuf>,
    },
    /// Fit (χ, Ω₀) to binned detection counts.
    Fit {
        /// CSV with `t_s` and `counts` columns.
        data: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Report file (stdout if omitted).
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Per-bin model and residual CSV.
        #[arg(long, value_name = "FILE")]
        residuals: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Wavepacket { cfg, out } => {
            let (raw, cfg) = cfg.load()?;
            commands::wavepacket(&raw, &cfg, out.as_deref())
        }
        Command::Simulate { cfg, out_dir } => {
            let (raw, cfg) = cfg.load()?;
            commands::simulate(&raw, &cfg, &out_dir)
        }
        Command::Chi { cfg, out, phi_map } => {
            let (raw, cfg) = cfg.load()?;
            commands::chi(&raw, &cfg, out.as_deref(), phi_map.as_deref())
        }
        Command::Fit {
            data,
            cfg,
            out,
            residuals,
        } => {
            let (raw, cfg) = cfg.load()?;
            commands::fit(&raw, &cfg, &data, out.as_deref(), residuals.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dlcz: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
