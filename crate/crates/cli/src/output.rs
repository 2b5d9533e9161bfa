//! Run directories: atomic file writes and the manifest.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

/// Writes through `<path>.tmp` and renames into place.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        fill(&mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

/// Writes a CSV table of floats.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
    write_atomic(path, |w| {
        writeln!(w, "{}", header.join(","))?;
        for r in rows {
            let line: Vec<String> = r.iter().map(f64::to_string).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    })
}

/// Traceability record written into every run directory.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub solver: Option<String>,
    pub version: String,
    pub config_hash: String,
    pub coupling: f64,
    pub tolerances: Vec<(String, f64)>,
    pub files: Vec<String>,
    pub snapshots: Vec<(f64, String)>,
}

impl Manifest {
    pub fn new(command: &str, solver: Option<&str>, config: &RunConfig) -> Self {
        let d = &config.dynamics;
        Self {
            command: command.into(),
            solver: solver.map(Into::into),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config.raw.hash(),
            coupling: config.constants.coupling(),
            tolerances: vec![
                ("dynamics.fixed_point_tol".into(), d.fixed_point_tol),
                ("dynamics.dt".into(), d.dt),
                ("grid.dt".into(), config.grid.dt),
                ("diagnostics.residual_ratio".into(), config.diagnostics.residual_ratio),
                ("diagnostics.tail_fraction".into(), config.diagnostics.tail_fraction),
            ],
            files: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(dir.join(MANIFEST))
            .map_err(|e| CliError::Input(format!("{}: no readable manifest ({e})", dir.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_COPY: &str = "config.cfg";
pub const TRAJECTORY: &str = "trajectory.csv";

/// Creates the output directory and stores the effective configuration.
pub fn prepare_run_dir(dir: &Path, config: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let text = config.raw.canonical();
    write_atomic(&dir.join(CONFIG_COPY), |w| Ok(w.write_all(text.as_bytes())?))
}

pub fn finish_run_dir(dir: &Path, mut manifest: Manifest) -> Result<(), CliError> {
    manifest.files.sort();
    write_json(&dir.join(MANIFEST), &manifest)
}
