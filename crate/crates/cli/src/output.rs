//! File formats written by the commands, each with a reader for round-trip checks.

use anyhow::{bail, ensure, Context};
use cdt_core::fem2d::{DensityField, Mesh2D};
use cdt_core::knapsack::BinarySelection;
use serde::{Deserialize, Serialize};

/// Binary PGM (P5): one pixel per element, row `ey` from the top, column `ex`,
/// 0 = void and 255 = solid.
pub fn write_pgm(z: &DensityField) -> Vec<u8> {
    let mesh = z.mesh();
    let mut out = format!("P5\n{} {}\n255\n", mesh.nelx, mesh.nely).into_bytes();
    for ey in 0..mesh.nely {
        for ex in 0..mesh.nelx {
            out.push(if z.at(ex, ey) { 255 } else { 0 });
        }
    }
    out
}

/// Header fields and the offset of the first raster byte.
fn parse_header(bytes: &[u8], magic: &str) -> anyhow::Result<(usize, usize, usize)> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        ensure!(pos > start, "truncated header");
        fields.push(std::str::from_utf8(&bytes[start..pos])?.to_owned());
    }
    ensure!(fields[0] == magic, "expected {magic}, found {}", fields[0]);
    let w: usize = fields[1].parse().context("width")?;
    let h: usize = fields[2].parse().context("height")?;
    ensure!(fields[3] == "255", "maxval must be 255");
    // Exactly one whitespace byte separates the header from the raster.
    Ok((w, h, pos + 1))
}

pub fn read_pgm(bytes: &[u8]) -> anyhow::Result<DensityField> {
    let (w, h, start) = parse_header(bytes, "P5")?;
    let raster = &bytes[start.min(bytes.len())..];
    ensure!(raster.len() == w * h, "raster has {} bytes, expected {}", raster.len(), w * h);
    let mesh = Mesh2D::new(w, h)?;
    let mut z = BinarySelection::zeros(mesh.n_elements());
    for (k, &p) in raster.iter().enumerate() {
        let (ey, ex) = (k / w, k % w);
        match p {
            0 => {}
            255 => z.set(mesh.element(ex, ey), true),
            _ => bail!("pixel ({ex}, {ey}) is {p}, expected 0 or 255"),
        }
    }
    Ok(DensityField::new(mesh, z)?)
}

/// Binary PPM (P6) heat map of `values` on a blue-to-red linear ramp normalized by
/// the largest value.
pub fn write_heat_ppm(mesh: Mesh2D, values: &[f64]) -> Vec<u8> {
    let max = values.iter().copied().fold(0.0, f64::max);
    let mut out = format!("P6\n{} {}\n255\n", mesh.nelx, mesh.nely).into_bytes();
    for ey in 0..mesh.nely {
        for ex in 0..mesh.nelx {
            let v = values[mesh.element(ex, ey)];
            let t = if max > 0.0 { (v / max).clamp(0.0, 1.0) } else { 0.0 };
            let r = (255.0 * t).round() as u8;
            out.extend_from_slice(&[r, 0, 255 - r]);
        }
    }
    out
}

/// `(width, height, rgb raster)` of a P6 file.
pub fn read_ppm(bytes: &[u8]) -> anyhow::Result<(usize, usize, Vec<u8>)> {
    let (w, h, start) = parse_header(bytes, "P6")?;
    let raster = &bytes[start.min(bytes.len())..];
    ensure!(raster.len() == 3 * w * h, "raster has {} bytes, expected {}", raster.len(), 3 * w * h);
    Ok((w, h, raster.to_vec()))
}

/// One row of the per-element energy table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub element: usize,
    pub ex: usize,
    pub ey: usize,
    pub solid: u8,
    /// `½x_eᵀK_e x_e`, the energy if solid.
    pub energy: f64,
    /// `(ε_min + (1 − ε_min)z_e)·energy`, the energy actually stored.
    pub stored: f64,
}

pub fn energy_rows(z: &DensityField, c: &[f64], eps_min: f64) -> Vec<EnergyRow> {
    let mesh = z.mesh();
    (0..mesh.n_elements())
        .map(|e| {
            let (ex, ey) = mesh.element_coords(e);
            let solid = z.is_solid(e);
            let w = if solid { 1.0 } else { eps_min };
            EnergyRow {
                element: e,
                ex,
                ey,
                solid: solid as u8,
                energy: c[e],
                stored: w * c[e],
            }
        })
        .collect()
}

const CSV_HEADER: &str = "element,ex,ey,solid,energy,stored";

pub fn write_energy_csv(rows: &[EnergyRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{:e},{:e}\n",
            r.element, r.ex, r.ey, r.solid, r.energy, r.stored
        ));
    }
    s
}

pub fn read_energy_csv(text: &str) -> anyhow::Result<Vec<EnergyRow>> {
    let mut lines = text.lines();
    ensure!(lines.next() == Some(CSV_HEADER), "missing header `{CSV_HEADER}`");
    lines
        .enumerate()
        .map(|(k, line)| {
            let f: Vec<&str> = line.split(',').collect();
            ensure!(f.len() == 6, "line {}: expected 6 fields", k + 2);
            let ctx = || format!("line {}", k + 2);
            Ok(EnergyRow {
                element: f[0].parse().with_context(ctx)?,
                ex: f[1].parse().with_context(ctx)?,
                ey: f[2].parse().with_context(ctx)?,
                solid: f[3].parse().with_context(ctx)?,
                energy: f[4].parse().with_context(ctx)?,
                stored: f[5].parse().with_context(ctx)?,
            })
        })
        .collect()
}

/// Deterministic run summary; wall times go to [`Timings`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoSummary {
    pub nelx: usize,
    pub nely: usize,
    pub v_c: f64,
    pub mu: f64,
    pub omega: f64,
    pub seed: u64,
    pub compliance: f64,
    pub volume: f64,
    pub iterations: usize,
    pub schedule_length: usize,
    pub converged: bool,
    pub perturbed_iterations: usize,
    pub tie_broken_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub fem_seconds: f64,
    pub knapsack_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub family: String,
    pub solver: String,
    pub count: usize,
    pub n: usize,
    pub seed: u64,
    pub unique: usize,
    pub degenerate: usize,
    pub dual_boundary_failure: usize,
    pub capacity_slack: usize,
    /// Unique or slack reports whose value differs from the brute-force optimum.
    pub mismatches: usize,
    pub mismatch_indices: Vec<usize>,
    /// Degenerate linear reports re-solved after a 1e-9 profit perturbation.
    pub perturbed_resolves: usize,
    /// Re-solves whose value is off by more than 1e-5 relative.
    pub perturbed_mismatches: usize,
    /// Degenerate reports where brute force found a single optimum.
    pub degenerate_with_unique_optimum: usize,
    /// Unique reports where brute force found several optima.
    pub unique_with_multiple_optima: usize,
    /// Largest `|primal − dual|/(1 + |primal|)` over unique reports.
    pub max_relative_gap: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_layout_and_round_trip() {
        let mesh = Mesh2D::new(3, 2).unwrap();
        let mut z = BinarySelection::zeros(6);
        z.set(mesh.element(2, 0), true);
        z.set(mesh.element(0, 1), true);
        let field = DensityField::new(mesh, z).unwrap();
        let bytes = write_pgm(&field);
        assert_eq!(&bytes[..11], b"P5\n3 2\n255\n");
        assert_eq!(&bytes[11..], &[0, 0, 255, 255, 0, 0]);
        assert_eq!(read_pgm(&bytes).unwrap(), field);
        assert!(read_pgm(b"P5\n3 2\n255\n\x00\x01\x00\x00\x00\x00").is_err());
        assert!(read_pgm(b"P5\n3 2\n255\n\x00").is_err());
    }

    #[test]
    fn ppm_ramp() {
        let mesh = Mesh2D::new(2, 1).unwrap();
        let bytes = write_heat_ppm(mesh, &[0.0, 4.0]);
        let (w, h, rgb) = read_ppm(&bytes).unwrap();
        assert_eq!((w, h), (2, 1));
        assert_eq!(rgb, vec![0, 0, 255, 255, 0, 0]);
    }

    #[test]
    fn csv_round_trip() {
        let mesh = Mesh2D::new(2, 1).unwrap();
        let field = DensityField::new(mesh, BinarySelection::from_bools([true, false])).unwrap();
        let rows = energy_rows(&field, &[0.1 + 0.2, 1e-300], 1e-9);
        let back = read_energy_csv(&write_energy_csv(&rows)).unwrap();
        assert_eq!(back, rows);
        assert!(read_energy_csv("a,b\n").is_err());
    }
}
