use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use tryon_core::commands::{self, GoldenOutcome};
use tryon_core::{Mode, RunConfig};

#[derive(Parser)]
#[command(
    name = "tryon",
    version,
    about = "Try-on preprocessing, composition and sampling toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Selects the bilateral range sigma.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Sampling steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Denoising strength in [0, 1].
    #[arg(long)]
    strength: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Torso extraction, erosion and bilateral filtering of a warped garment.
    Preprocess(Overrides),
    /// Builds the composed input image and masks.
    Compose(Overrides),
    /// Samples the analytic Gaussian model and reports latent statistics.
    DemoSample(Overrides),
    /// Prints the SSIM between two RGB images.
    Ssim { a: PathBuf, b: PathBuf },
    /// Checks preprocess + compose outputs against stored goldens.
    Golden {
        #[command(flatten)]
        overrides: Overrides,
        /// Rewrite the goldens instead of checking them.
        #[arg(long)]
        bless: bool,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: tryon_core::Error| e.to_string())
}

fn load_config(o: &Overrides) -> Result<RunConfig> {
    let mut cfg = match &o.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(m) = o.mode {
        cfg.preprocess.mode = m;
    }
    if let Some(s) = o.steps {
        cfg.diffusion.steps = s;
    }
    if let Some(s) = o.strength {
        cfg.diffusion.strength = s;
    }
    if let Some(s) = o.seed {
        cfg.diffusion.seed = s;
    }
    if let Some(out) = &o.out {
        cfg.paths.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Preprocess(o) => {
            for f in commands::cmd_preprocess(&load_config(&o)?)? {
                println!("wrote {}", f.display());
            }
        }
        Command::Compose(o) => {
            for f in commands::cmd_compose(&load_config(&o)?)? {
                println!("wrote {}", f.display());
            }
        }
        Command::DemoSample(o) => {
            let (report, files) = commands::cmd_demo_sample(&load_config(&o)?)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            println!(
                "t_start {} | max |mean - target| {:.4} | max rel variance error {:.4} | within tolerance: {}",
                report.t_start,
                report.max_abs_mean_error,
                report.max_rel_variance_error,
                report.within_tolerance
            );
        }
        Command::Ssim { a, b } => {
            println!("{:.6}", commands::cmd_ssim(&a, &b)?);
        }
        Command::Golden { overrides, bless } => {
            match commands::cmd_golden(&load_config(&overrides)?, bless)? {
                GoldenOutcome::Pass { checked } => println!("golden: {checked} artifacts match"),
                GoldenOutcome::Blessed { written } => println!("golden: wrote {written} artifacts"),
                GoldenOutcome::Mismatch { artifact, detail } => {
                    eprintln!("golden mismatch: {}: {detail}", artifact.display());
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
