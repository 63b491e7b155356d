//! Artifact files: CSV series, JSON reports, and the checksum manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mfgbelief_core::{DensityPath, TimeGrid, TorusGrid, ValuePath};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::LabError;

/// Floats in CSV files carry 17 significant digits.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Artifacts {
    dir: PathBuf,
    written: Vec<(String, String)>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self, LabError> {
        fs::create_dir_all(dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Artifacts { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), LabError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        self.written.push((name.to_string(), hex::encode(Sha256::digest(bytes))));
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), LabError> {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json` with the resolved config and the checksums of
    /// everything written so far.
    pub fn finish(mut self, command: &str, config: &RunConfig, exit_code: u8) -> Result<(), LabError> {
        let artifacts: serde_json::Map<String, serde_json::Value> =
            self.written.iter().map(|(name, sum)| (name.clone(), json!({ "sha256": sum }))).collect();
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "exit_code": exit_code,
            "config": config,
            "artifacts": artifacts,
        });
        self.write_json("manifest.json", &manifest)?;
        self.written.pop();
        Ok(())
    }
}

fn coordinate_header(grid: &TorusGrid) -> &'static str {
    if grid.dim() == 1 {
        "t,x"
    } else {
        "t,x,y"
    }
}

fn push_row(out: &mut String, t: f64, coords: [f64; 2], dim: usize, value: f64) {
    let _ = write!(out, "{},{}", float(t), float(coords[0]));
    if dim == 2 {
        let _ = write!(out, ",{}", float(coords[1]));
    }
    let _ = writeln!(out, ",{}", float(value));
}

fn field_csv(grid: &TorusGrid, time: &TimeGrid, name: &str, slices: &[&[f64]]) -> String {
    let mut out = format!("{},{name}\n", coordinate_header(grid));
    for (k, values) in slices.iter().enumerate() {
        let t = time.time(k);
        for (node, &v) in values.iter().enumerate() {
            push_row(&mut out, t, grid.coords(node), grid.dim(), v);
        }
    }
    out
}

/// Long-format `t,x[,y],u`.
pub fn value_csv(value: &ValuePath) -> String {
    let grid = *value.slices[0].grid();
    let slices: Vec<&[f64]> = value.slices.iter().map(|s| s.values()).collect();
    field_csv(&grid, &value.time, "u", &slices)
}

/// Long-format `t,x[,y],m`.
pub fn density_csv(path: &DensityPath) -> String {
    let grid = *path.slices[0].grid();
    let slices: Vec<&[f64]> = path.slices.iter().map(|s| s.values()).collect();
    field_csv(&grid, &path.time, "m", &slices)
}

/// Long-format `t,x[,y],m` of precomputed slices.
pub fn slices_csv(grid: &TorusGrid, time: &TimeGrid, slices: &[Vec<f64>]) -> String {
    let refs: Vec<&[f64]> = slices.iter().map(Vec::as_slice).collect();
    field_csv(grid, time, "m", &refs)
}
