use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use sdr_cli::{cmd_fit, cmd_msd, cmd_predict, cmd_simulate, cmd_spectrum, predict_cpmg, with_workers, RunConfig};
use sdr_core::SpectrumMode;

#[derive(Parser)]
#[command(
    name = "sdr",
    version,
    about = "SDR decay prediction, random-walk simulation and pore-size fitting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides walk.seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides fit.spectrum_mode: single or multi:<K>
    #[arg(long, global = true)]
    spectrum_mode: Option<SpectrumMode>,
}

#[derive(Subcommand)]
enum Command {
    /// Gaussian-phase decay curve
    Predict {
        /// Print the CPMG magnetization at N, TE instead of writing a curve
        #[arg(long)]
        cpmg: bool,
    },
    /// Monte Carlo ensemble signal
    Simulate,
    /// Fit the pore diameter to an `x_delay_s,signal` CSV
    Fit { data: PathBuf },
    /// Monte Carlo mean-square displacement
    Msd {
        /// Report MSD in units of l_c²
        #[arg(long)]
        normalize: bool,
    },
    /// Spectral density of the configured geometry
    Spectrum,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let Some(path) = cli.config.as_deref() else {
        anyhow::bail!("--config <file> is required");
    };
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.walk.seed = seed;
    }
    if let Some(mode) = cli.spectrum_mode {
        cfg.fit.spectrum_mode = mode.to_string();
    }
    let out = |default: &str| cli.out.clone().unwrap_or_else(|| PathBuf::from(default));
    with_workers(cli.workers, || -> Result<()> {
        match &cli.command {
            Command::Predict { cpmg: true } => println!("{}", predict_cpmg(&cfg)?),
            Command::Predict { cpmg: false } => {
                let path = out("predict.csv");
                let c = cmd_predict(&cfg, &path)?;
                eprintln!("wrote {} points to {}", c.x.len(), path.display());
            }
            Command::Simulate => {
                let path = out("simulate.csv");
                let c = cmd_simulate(&cfg, &path)?;
                eprintln!("wrote {} points to {}", c.x.len(), path.display());
            }
            Command::Fit { data } => {
                let path = out("fit.json");
                let r = cmd_fit(&cfg, data, &path)?;
                eprintln!(
                    "d = {:.4} um, A = {:.4}, rms = {:.3e}, converged = {} ({})",
                    r.diameter_um,
                    r.amplitude,
                    r.residual_rms,
                    r.converged,
                    path.display()
                );
            }
            Command::Msd { normalize } => {
                let path = out("msd.csv");
                let c = cmd_msd(&cfg, &path, *normalize)?;
                eprintln!("wrote {} points to {}", c.x.len(), path.display());
            }
            Command::Spectrum => {
                let path = out("spectrum.csv");
                let c = cmd_spectrum(&cfg, &path)?;
                eprintln!("wrote {} points to {}", c.x.len(), path.display());
            }
        }
        Ok(())
    })?
}
