use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hfedf::dataset::export_dataset;
use hfedf::{run_to_dir, ExperimentConfig, RunManifest};
use hfedf_core::data::gen_synthetic_domains;
use hfedf_core::federation::StreamLabels;
use hfedf_core::math::RngStream;

/// Hypernetwork-based federated fusion simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (algorithm, seed, target domain) cell of a config.
    Run {
        config: PathBuf,
        /// Output directory; defaults to the config's `output_dir`, then
        /// `$HFEDF_OUT_ROOT/<config name>`, then `runs/<config name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for grid cells.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed_override: Option<u64>,
        #[arg(long, env = "HFEDF_OUT_ROOT", hide_env_values = true)]
        out_root: Option<PathBuf>,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
    /// Re-run an experiment from its manifest.
    Resume {
        manifest: PathBuf,
        /// Output directory; defaults to the manifest's directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Write a config's synthetic domains for one seed as JSON lines.
    ExportData {
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

const EXIT_ERROR: u8 = 1;
const EXIT_ABORTED_CELLS: u8 = 3;

fn default_out(cfg: &ExperimentConfig, config: &Path, root: Option<PathBuf>) -> PathBuf {
    if let Some(dir) = &cfg.output_dir {
        return dir.clone();
    }
    let stem = config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".to_string());
    root.unwrap_or_else(|| PathBuf::from("runs")).join(stem)
}

fn report(manifest: &RunManifest, dir: &Path) -> ExitCode {
    let aborted: Vec<_> = manifest.aborted().collect();
    println!(
        "{} cells written to {}",
        manifest.cells.len(),
        dir.display()
    );
    if aborted.is_empty() {
        return ExitCode::SUCCESS;
    }
    for c in &aborted {
        eprintln!(
            "aborted: {} seed {} target {}: {}",
            c.algorithm,
            c.seed,
            c.target_domain,
            c.reason.as_deref().unwrap_or("unknown")
        );
    }
    ExitCode::from(EXIT_ABORTED_CELLS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: hfedf::Result<ExitCode> = (|| match cli.command {
        Command::Run {
            config,
            out,
            jobs,
            seed_override,
            out_root,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed_override {
                cfg.seeds = vec![seed];
            }
            let dir = out.unwrap_or_else(|| default_out(&cfg, &config, out_root));
            let manifest = run_to_dir(&cfg, &dir, jobs)?;
            Ok(report(&manifest, &dir))
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let plan = cfg.plan();
            println!(
                "ok: {} algorithms x {} seeds x {} target domains, {} clients, d = {}",
                cfg.algorithms.len(),
                cfg.seeds.len(),
                plan.data.n_domains,
                plan.n_clients,
                plan.domains_per_client
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Resume {
            manifest,
            out,
            jobs,
        } => {
            let m = RunManifest::load(&manifest)?;
            let dir = out.unwrap_or_else(|| {
                manifest
                    .parent()
                    .map(Path::to_path_buf)
                    .unwrap_or_else(|| PathBuf::from("."))
            });
            let written = run_to_dir(&m.config, &dir, jobs)?;
            Ok(report(&written, &dir))
        }
        Command::ExportData { config, seed, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let domains =
                gen_synthetic_domains(&cfg.data, &mut RngStream::new(seed, StreamLabels::DATA))?;
            let file = std::fs::File::create(&out).map_err(|e| hfedf::Error::io(&out, e))?;
            export_dataset(BufWriter::new(file), &domains)?;
            Ok(ExitCode::SUCCESS)
        }
    })();
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
