//! CSV series and JSON reports. Floats are written with Rust's shortest
//! round-trip formatting, so files are exact and byte-reproducible.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::analysis::ResponseSpectrum;
use crate::error::Result;
use crate::grid::{Grid, WaveFunction};
use crate::observables::ObservableRecord;

fn num(out: &mut String, v: f64) {
    write!(out, "{v:e}").expect("writing to a String");
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            num(&mut out, *v);
        }
        out.push('\n');
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn observables_csv(path: &Path, records: &[ObservableRecord]) -> Result<()> {
    let n = records.first().map_or(0, |r| r.position.len());
    let mut header: Vec<String> = vec!["t".into(), "norm".into(), "dipole".into()];
    header.extend((0..n).map(|l| format!("position_{l}")));
    header.extend((0..n).map(|l| format!("mech_momentum_{l}")));
    header.extend(
        [
            "kinetic_energy",
            "total_energy_gauge_dependent",
            "dipole_acceleration",
            "edge_density",
        ]
        .map(String::from),
    );
    write_rows(
        path,
        &header,
        records.iter().map(|r| {
            let mut row = vec![r.time, r.norm, r.dipole];
            row.extend(&r.position);
            row.extend(&r.mech_momentum);
            row.extend([
                r.kinetic_energy,
                r.total_energy_gauge_dependent,
                r.dipole_acceleration,
                r.edge_density,
            ]);
            row
        }),
    )
}

/// `x,value` for one snapshot of a one-body array. Arrays one entry shorter
/// than the grid live on links and are written at link midpoints.
pub fn array_csv(path: &Path, grid: &Grid, values: &[f64]) -> Result<()> {
    let xs = grid.coordinates();
    let at_links = values.len() + 1 == xs.len();
    write_rows(
        path,
        &["x".into(), "value".into()],
        values.iter().enumerate().map(|(i, v)| {
            let x = if at_links { xs[i] + 0.5 * grid.dx() } else { xs[i] };
            vec![x, *v]
        }),
    )
}

pub fn state_csv(path: &Path, psi: &WaveFunction) -> Result<()> {
    let g = psi.grid;
    let mut header: Vec<String> = (0..g.n_particles()).map(|l| format!("x_{l}")).collect();
    header.extend(["re".into(), "im".into()]);
    write_rows(
        path,
        &header,
        psi.amplitudes.iter().enumerate().map(|(k, z)| {
            let idx = g.unflatten(k);
            let mut row: Vec<f64> = (0..g.n_particles()).map(|l| g.coordinate(idx[l])).collect();
            row.extend([z.re, z.im]);
            row
        }),
    )
}

pub fn spectrum_csv(path: &Path, spectrum: &ResponseSpectrum) -> Result<()> {
    write_rows(
        path,
        &["omega".into(), "re".into(), "im".into()],
        spectrum
            .frequencies
            .iter()
            .zip(&spectrum.values)
            .map(|(w, z)| vec![*w, z.re, z.im]),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub scenario_sha256: String,
    pub version: String,
    pub parameters: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub subcommand: String,
    pub scenario: String,
    pub pass: bool,
    /// Machine-readable failure cause.
    pub cause: Option<String>,
    pub message: Option<String>,
    pub result: serde_json::Value,
    pub provenance: Provenance,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| crate::error::Error::Scenario(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
