//! Command-line front end: `gen-cloud`, `cv`, `run` and `compare`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{self, ComparisonReport, SnapshotTable, DEFAULT_MATCH_TOLERANCE};
use crate::solver::advance;

#[derive(Debug, Parser)]
#[command(name = "ncdmm", version, about = "Meshless two-phase reservoir simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the configured point cloud and its boundary loops.
    GenCloud {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve for node control volumes.
    Cv {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the configured simulation.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// RMS pressure and saturation differences between two snapshots.
    Compare {
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MATCH_TOLERANCE)]
        tolerance: f64,
    },
}

fn writer(path: &Path) -> Result<BufWriter<fs::File>> {
    io::create(path)
}

pub fn gen_cloud(config: &Path, out: &Path) -> Result<()> {
    let cfg = RunConfig::from_file(config)?;
    let cloud = cfg.augmented_cloud()?;
    let loops = io::save_cloud(out, &cloud)?;
    info!(
        "wrote {} nodes ({} virtual) to {} and loops to {}",
        cloud.nodes.len(),
        cloud.virtual_nodes().len(),
        out.display(),
        loops.display()
    );
    Ok(())
}

pub fn control_volumes(config: &Path, out_dir: &Path) -> Result<()> {
    let cfg = RunConfig::from_file(config)?;
    let prep = cfg.prepare()?;
    let mesh = prep
        .meshless
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("control volumes need a meshless connectivity method".into()))?;
    fs::create_dir_all(out_dir).map_err(|e| Error::file(out_dir, e))?;
    let mut w = writer(&out_dir.join("control_volumes.txt"))?;
    io::write_control_volumes(&mut w, &mesh.cv)?;
    w.flush()?;
    let mut w = writer(&out_dir.join("cv_report.txt"))?;
    let total: f64 = mesh.cv.effective.iter().sum();
    writeln!(w, "domain_area {:e}", mesh.cloud.domain_area())?;
    writeln!(w, "sum_v_bar {total:e}")?;
    writeln!(w, "constraint_error {:e}", mesh.cv.constraint_error)?;
    writeln!(w, "residual_norm {:e}", mesh.cv.residual_norm)?;
    writeln!(w, "method {:?}", mesh.cv.method)?;
    writeln!(w, "iterations {}", mesh.cv.iterations)?;
    w.flush()?;
    let mut w = writer(&out_dir.join("stencils.txt"))?;
    io::write_stencils(&mut w, &mesh.stencils, &mesh.cloud)?;
    w.flush()?;
    let mut w = writer(&out_dir.join("transmissibility.txt"))?;
    io::write_transmissibilities(&mut w, &prep.disc.trans)?;
    w.flush()?;
    info!(
        "control volumes for {} nodes, constraint error {:.3e}",
        mesh.cv.volume.len(),
        mesh.cv.constraint_error
    );
    Ok(())
}

/// File name of the snapshot written at `time`.
pub fn snapshot_name(time: f64) -> String {
    format!("snapshot_t{time}.txt")
}

pub fn run(config: &Path, out_dir: &Path) -> Result<()> {
    let cfg = RunConfig::from_file(config)?;
    let prep = cfg.prepare()?;
    let model = cfg.model(&prep)?;
    let initial = cfg.initial_state(&model);
    let result = advance(&model, &initial, &cfg.schedule(), &cfg.newton)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::file(out_dir, e))?;
    for snap in &result.snapshots {
        let table = SnapshotTable::new(&model.disc.coords, &snap.state.p, &snap.state.sw);
        io::save_snapshot(&out_dir.join(snapshot_name(snap.time)), &table)?;
    }
    let mut w = writer(&out_dir.join("wells.txt"))?;
    io::write_well_report(&mut w, &result.steps)?;
    w.flush()?;
    let mut w = writer(&out_dir.join("summary.txt"))?;
    let worst = result.steps.iter().map(|s| s.mass_balance_error).fold(0.0, f64::max);
    writeln!(w, "steps {}", result.steps.len())?;
    writeln!(w, "newton_iterations {}", result.total_iterations())?;
    writeln!(w, "step_cuts {}", result.cuts)?;
    writeln!(w, "max_mass_balance_error {worst:e}")?;
    w.flush()?;
    info!("run finished: {} steps, {} Newton iterations", result.steps.len(), result.total_iterations());
    Ok(())
}

pub fn compare_files(candidate: &Path, reference: &Path, tolerance: f64) -> Result<ComparisonReport> {
    io::compare(&io::read_snapshot(candidate)?, &io::read_snapshot(reference)?, tolerance)
}

/// Runs one parsed command; the report of `compare` goes to `out`.
pub fn execute<W: Write>(cli: &Cli, out: &mut W) -> Result<()> {
    match &cli.command {
        Command::GenCloud { config, out: path } => gen_cloud(config, path),
        Command::Cv { config, out_dir } => control_volumes(config, out_dir),
        Command::Run { config, out_dir } => run(config, out_dir),
        Command::Compare {
            candidate,
            reference,
            tolerance,
        } => {
            let report = compare_files(candidate, reference, *tolerance)?;
            writeln!(out, "{report}")?;
            Ok(())
        }
    }
}

/// Single-line, machine-parsable error description.
pub fn error_line(err: &Error) -> String {
    let msg = err.to_string().replace('\n', " ");
    format!("error[{}]: {msg}", err.kind())
}
