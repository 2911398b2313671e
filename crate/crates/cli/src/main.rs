//! `textline` — multilingual text-line detection toolbox.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use textline_cli::{
    cmd_detect, cmd_eval, cmd_fit, cmd_synth, cmd_train, CliError, Config, DetectArgs, EvalArgs,
    FitArgs, Overrides, SynthArgs, TrainArgs,
};

#[derive(Parser)]
#[command(name = "textline", version, about = "Detect, fit, and score multilingual text lines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect and group text lines in a PGM image.
    Detect {
        /// Input image (binary 8-bit PGM).
        image: PathBuf,
        /// Trained classifier model JSON; omit to group on geometry alone.
        model: Option<PathBuf>,
        /// Config JSON; falls back to $TEXTLINE_MDL_CONFIG, then defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the optimizer RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the maximum assign/refit sweeps.
        #[arg(long)]
        max_iters: Option<u32>,
        /// Also write an SVG overlay of boxes and fitted lines.
        #[arg(long)]
        svg: bool,
    },
    /// Group pre-extracted blobs (JSON array or scene file) into lines.
    Fit {
        /// Blob JSON array or a generated scene file.
        blobs: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_iters: Option<u32>,
        #[arg(long)]
        svg: bool,
    },
    /// Generate a synthetic labeled scene from a spec file.
    Synth {
        /// Scene spec JSON.
        spec: PathBuf,
        /// Generator seed; the same spec and seed reproduce the scene exactly.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also render the scene to a PGM image.
        #[arg(long)]
        render: bool,
    },
    /// Score detected lines against ground-truth scenes.
    Eval {
        /// Directory with <stem>.lines.json and <stem>.labeling.json files.
        detected: PathBuf,
        /// Directory with <stem>.scene.json ground-truth files.
        gt: PathBuf,
        /// Minimum inlier-set overlap for a detected/truth line match.
        #[arg(long, default_value_t = 0.5)]
        overlap_min: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Train the blob classifier from a labeled-box manifest.
    Train {
        /// CSV manifest: pgm_path,left,top,right,bottom,category.
        manifest: PathBuf,
        /// Boosting rounds.
        #[arg(long, default_value_t = 60)]
        rounds: u32,
        /// Maximum decision-tree depth.
        #[arg(long, default_value_t = 3)]
        depth: u32,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    match cli.command {
        Command::Detect { image, model, config, out, seed, max_iters, svg } => {
            let mut cfg = Config::load(config.as_deref())?;
            cfg.apply(Overrides { seed, max_iters })?;
            cmd_detect(&DetectArgs {
                image: &image,
                model: model.as_deref(),
                out_dir: &out,
                config: cfg,
                svg,
            })
        }
        Command::Fit { blobs, config, out, seed, max_iters, svg } => {
            let mut cfg = Config::load(config.as_deref())?;
            cfg.apply(Overrides { seed, max_iters })?;
            cmd_fit(&FitArgs { input: &blobs, out_dir: &out, config: cfg, svg })
        }
        Command::Synth { spec, seed, out, render } => {
            cmd_synth(&SynthArgs { spec: &spec, out_dir: &out, seed, render })
        }
        Command::Eval { detected, gt, overlap_min, out } => {
            cmd_eval(&EvalArgs { detected_dir: &detected, gt_dir: &gt, out_dir: &out, overlap_min })
        }
        Command::Train { manifest, rounds, depth, out } => {
            cmd_train(&TrainArgs { manifest: &manifest, out_dir: &out, rounds, depth })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(written) => {
            for path in written {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            // Clamped to u8 by construction (codes are 2 and 3).
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
