//! `netpen` command-line interface.
//!
//! Subcommands: `simulate` (scenario -> dataset), `run` (dataset ->
//! estimates, maps, report), `evaluate` (report -> metrics + plot CSVs),
//! `export-map` (re-export a run's occupancy map). Log verbosity comes from
//! the `RUST_LOG` environment variable.
//!
//! Exit codes: 0 success, 2 configuration error, 3 dataset error,
//! 4 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use netpen_cli::evaluate::metrics_table;
use netpen_cli::{evaluate, run_pipeline, PipelineConfig, PipelineError};
use netpen_core::mapping::{export_map, import_map, map_to_cloud, write_ply, PlyFormat};
use netpen_core::simpen::{generate_dataset, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "netpen",
    about = "Vision-based localization and mapping for net-pen inspection vehicles, with a built-in synthetic simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a scenario file.
    Simulate {
        /// Scenario TOML file.
        scenario: PathBuf,
        /// Output dataset directory.
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the full pipeline over a dataset.
    Run {
        /// Dataset directory produced by `simulate`.
        dataset: PathBuf,
        /// Pipeline configuration TOML file.
        config: PathBuf,
        /// Output directory for estimates, maps, and the report.
        out: PathBuf,
        /// Disable occupancy mapping.
        #[arg(long)]
        no_map: bool,
        /// Skip map insertion and cloud stacking on degraded frames.
        #[arg(long)]
        exclude_degraded: bool,
        /// Override the evaluation smoothing window (odd).
        #[arg(long)]
        smoothing_window: Option<usize>,
    },
    /// Compute metrics and plot-ready CSVs from a finished run.
    Evaluate {
        /// Run output directory (contains report.json).
        out: PathBuf,
        /// Smoothing window for the distance/orientation series (odd).
        #[arg(long, default_value_t = 11)]
        smoothing_window: usize,
    },
    /// Re-export the occupancy map of a finished run.
    ExportMap {
        /// Run output directory (contains map.bin).
        out: PathBuf,
        /// Export format.
        #[arg(long, value_enum)]
        format: MapFormat,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MapFormat {
    Ply,
    Dump,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Simulate { scenario, out, seed } => {
            let mut cfg = ScenarioConfig::load(&scenario)
                .map_err(|e| PipelineError::Config(e.to_string()))?;
            if let Some(seed) = seed {
                cfg.sim.seed = seed;
            }
            let dataset = generate_dataset(&cfg, &out)
                .map_err(|e| PipelineError::Runtime(e.to_string()))?;
            println!(
                "wrote {} frames to {}",
                dataset.frames.len(),
                out.display()
            );
            Ok(())
        }
        Command::Run {
            dataset,
            config,
            out,
            no_map,
            exclude_degraded,
            smoothing_window,
        } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if no_map {
                cfg.map.enabled = false;
            }
            if exclude_degraded {
                cfg.exclude_degraded = true;
            }
            if let Some(w) = smoothing_window {
                cfg.eval.smoothing_window = w;
            }
            let report = run_pipeline(&dataset, &cfg, &out)?;
            println!(
                "processed {} frames ({} degraded), median {:.1} ms/frame; report at {}",
                report.summary.frame_count,
                report.summary.degraded_frames,
                report.summary.timing.total.p50_ms,
                out.join("report.json").display()
            );
            Ok(())
        }
        Command::Evaluate {
            out,
            smoothing_window,
        } => {
            let metrics = evaluate(&out, smoothing_window)?;
            print!("{}", metrics_table(&metrics));
            Ok(())
        }
        Command::ExportMap { out, format } => {
            let map_path = out.join("map.bin");
            let map = import_map::<f64>(&map_path)
                .map_err(|e| PipelineError::Runtime(e.to_string()))?;
            match format {
                MapFormat::Ply => {
                    let path = out.join("map_export.ply");
                    let cloud = map_to_cloud(&map, 1, (0.0, 20.0));
                    write_ply(&cloud, &path, PlyFormat::BinaryLittleEndian)
                        .map_err(|e| PipelineError::Runtime(e.to_string()))?;
                    println!("wrote {} occupied leaves to {}", cloud.len(), path.display());
                }
                MapFormat::Dump => {
                    let path = out.join("map_export.bin");
                    export_map(&map, &path)
                        .map_err(|e| PipelineError::Runtime(e.to_string()))?;
                    println!("wrote map dump to {}", path.display());
                }
            }
            Ok(())
        }
    }
}
