//! Experiment driver CLI.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fmstct::config::{Algorithm, ExperimentConfig};
use fmstct::container;
use fmstct::error::Error;
use fmstct::metrics;
use fmstct::phantom::{ImageGrid, PhantomSpec};
use fmstct::pipeline;
use fmstct::projector::forward_project;
use fmstct::redundancy::build_weight_map;

#[derive(Parser)]
#[command(name = "fmstct", about = "F-mSTCT simulation and reconstruction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration file (flat key = value).
    #[arg(long)]
    config: PathBuf,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the reconstruction algorithm (fd-bpf, fs-bpf, fw-fbp).
    #[arg(long)]
    algo: Option<String>,
    /// Override the W-Line angle in degrees.
    #[arg(long)]
    phi_deg: Option<f64>,
    /// Override the reconstruction grid size.
    #[arg(long)]
    grid: Option<usize>,
    /// Quicklook display window as lo:hi.
    #[arg(long, default_value = "0:3")]
    window: String,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize the phantom onto the reconstruction grid.
    Phantom(Common),
    /// Forward-project the phantom into a sinogram container.
    Project(Common),
    /// Build the redundancy weight map.
    Weights(Common),
    /// Reconstruct and write all artifacts (alias of `pipeline`).
    Recon(Common),
    /// Evaluate an existing reconstruction against its ground truth.
    Metrics(Common),
    /// Emit the central-row profile CSV of an existing reconstruction.
    Profile(Common),
    /// Run the full experiment: project, weight, reconstruct, evaluate.
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Print the derived geometry and exit.
        #[arg(long)]
        dry_run: bool,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Error> {
    if !common.config.exists() {
        return Err(Error::config(
            "config",
            format!("configuration file {:?} does not exist", common.config),
        ));
    }
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(algo) = &common.algo {
        cfg.algorithm = Algorithm::parse(algo)?;
    }
    if let Some(phi) = common.phi_deg {
        cfg.phi_deg = phi;
    }
    if let Some(grid) = common.grid {
        cfg.grid = grid;
    }
    if !cfg.phantom.exists() {
        return Err(Error::config(
            "phantom",
            format!("phantom file {:?} does not exist", cfg.phantom),
        ));
    }
    Ok(cfg)
}

fn parse_window(s: &str) -> Result<(f64, f64), Error> {
    let parts: Vec<&str> = s.split(':').collect();
    let err = || Error::Argument(format!("window must be lo:hi, got `{s}`"));
    if parts.len() != 2 {
        return Err(err());
    }
    let lo: f64 = parts[0].parse().map_err(|_| err())?;
    let hi: f64 = parts[1].parse().map_err(|_| err())?;
    if !(hi > lo) {
        return Err(err());
    }
    Ok((lo, hi))
}

fn read_pair(cfg: &ExperimentConfig) -> Result<(ImageGrid, ImageGrid), Error> {
    let (recon, _) = container::read_image(&cfg.out_dir.join("recon.fm"))?;
    let (truth, _) = container::read_image(&cfg.out_dir.join("truth.fm"))?;
    Ok((recon, truth))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Phantom(common) => {
            let cfg = load_config(&common)?;
            let window = parse_window(&common.window)?;
            let scan = cfg.scan()?;
            let spec = PhantomSpec::load(&cfg.phantom)?;
            let grid = ImageGrid::covering(cfg.grid, scan.fov_radius())?;
            let truth = pipeline::rasterize_truth(&spec, &grid)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            container::write_image(&cfg.out_dir.join("truth.fm"), &truth, "truth", &cfg.echo())?;
            container::write_pgm(&cfg.out_dir.join("truth.pgm"), &truth, window.0, window.1)?;
            println!("wrote {:?}", cfg.out_dir.join("truth.fm"));
        }
        Command::Project(common) => {
            let cfg = load_config(&common)?;
            let scan = cfg.scan()?;
            let spec = PhantomSpec::load(&cfg.phantom)?;
            let (sino, exceeds) = forward_project(&spec, &scan);
            if exceeds {
                eprintln!("note: phantom extends beyond the FOV radius; data complete only inside R");
            }
            std::fs::create_dir_all(&cfg.out_dir)?;
            container::write_sinogram(&cfg.out_dir.join("sinogram.fm"), &sino, &cfg.echo())?;
            println!("wrote {:?}", cfg.out_dir.join("sinogram.fm"));
        }
        Command::Weights(common) => {
            let cfg = load_config(&common)?;
            let scan = cfg.scan()?;
            let weights = build_weight_map(&scan, cfg.phi());
            std::fs::create_dir_all(&cfg.out_dir)?;
            container::write_weight_map(&cfg.out_dir.join("weights.fm"), &weights, &cfg.echo())?;
            println!("wrote {:?}", cfg.out_dir.join("weights.fm"));
        }
        Command::Recon(common) => {
            let cfg = load_config(&common)?;
            let window = parse_window(&common.window)?;
            let report = pipeline::run_experiment(&cfg, window)?;
            print!("{}", report.to_text());
        }
        Command::Metrics(common) => {
            let cfg = load_config(&common)?;
            let scan = cfg.scan()?;
            let (recon, truth) = read_pair(&cfg)?;
            let report = pipeline::evaluate(&recon, &truth, &scan, cfg.algorithm)?;
            std::fs::write(cfg.out_dir.join("report.txt"), report.to_text())?;
            print!("{}", report.to_text());
        }
        Command::Profile(common) => {
            let cfg = load_config(&common)?;
            let (recon, truth) = read_pair(&cfg)?;
            let row = recon.height / 2;
            let series = metrics::profile(&recon, row, 0..recon.width)?;
            let truth_series = metrics::profile(&truth, row, 0..truth.width)?;
            let mut csv = String::from("col,recon,truth\n");
            for ((c, v), (_, t)) in series.iter().zip(&truth_series) {
                csv.push_str(&format!("{c},{v:.6},{t:.6}\n"));
            }
            std::fs::write(cfg.out_dir.join("profile.csv"), &csv)?;
            print!("{csv}");
        }
        Command::Pipeline { common, dry_run } => {
            let cfg = load_config(&common)?;
            let scan = cfg.scan()?;
            if dry_run {
                print!("{}", pipeline::describe(&scan));
                return Ok(());
            }
            let window = parse_window(&common.window)?;
            let report = pipeline::run_experiment(&cfg, window)?;
            print!("{}", report.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
