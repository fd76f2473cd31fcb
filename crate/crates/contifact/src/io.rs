//! File formats for densities, factors, and plot data.
//!
//! One container holds any square matrix function on a grid. Two encodings
//! carry the same payload: a single JSON file, and a raw little-endian f64
//! binary next to a JSON sidecar header. The extension picks the encoding:
//! `.bin` selects binary, anything else JSON. Writes go through a temp file
//! and a rename, so readers never observe partial files.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Domain, Grid, SampledFunction};
use crate::pipeline::{MatrixFunction, SpectralDensity};

/// Version stamp written into every header.
pub const FORMAT_VERSION: u32 = 1;

/// Grid and shape metadata of a stored matrix function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityHeader {
    pub version: u32,
    pub r: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub n: usize,
}

#[derive(Serialize, Deserialize)]
struct JsonContainer {
    version: u32,
    r: usize,
    t_min: f64,
    t_max: f64,
    n: usize,
    /// Row-major (re, im) pairs per grid point; length n * r * r * 2.
    payload: Vec<f64>,
}

fn header_of(m: &MatrixFunction) -> DensityHeader {
    let grid = m.grid();
    DensityHeader {
        version: FORMAT_VERSION,
        r: m.r(),
        t_min: grid.t_min(),
        t_max: grid.t_max(),
        n: grid.len(),
    }
}

fn payload_of(m: &MatrixFunction) -> Vec<f64> {
    let r = m.r();
    let mut out = Vec::with_capacity(m.grid().len() * r * r * 2);
    for v in m.values() {
        for i in 0..r {
            for j in 0..r {
                let c = v[(i, j)];
                out.push(c.re);
                out.push(c.im);
            }
        }
    }
    out
}

fn matrix_from_parts(header: &DensityHeader, payload: &[f64]) -> Result<MatrixFunction> {
    if header.version != FORMAT_VERSION {
        return Err(Error::Validation(format!(
            "unsupported format version {}, expected {FORMAT_VERSION}",
            header.version
        )));
    }
    let expected = header.n * header.r * header.r * 2;
    if payload.len() != expected {
        return Err(Error::Validation(format!(
            "payload holds {} values but the header declares {expected}; the file is truncated or inconsistent",
            payload.len()
        )));
    }
    let grid = Grid::new(header.t_min, header.t_max, header.n)?;
    let r = header.r;
    let mut values = Vec::with_capacity(header.n);
    let mut pos = 0;
    for _ in 0..header.n {
        let mut v = DMatrix::zeros(r, r);
        for i in 0..r {
            for j in 0..r {
                v[(i, j)] = Complex64::new(payload[pos], payload[pos + 1]);
                pos += 2;
            }
        }
        values.push(v);
    }
    MatrixFunction::new(grid, r, values)
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Validation(format!("path {} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!("{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

/// Header path next to a binary payload: `x.bin` pairs with `x.bin.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(".json");
    path.with_file_name(name)
}

/// Writes a matrix function in the encoding selected by the extension.
pub fn write_matrix(path: &Path, m: &MatrixFunction) -> Result<()> {
    let header = header_of(m);
    let payload = payload_of(m);
    if is_binary(path) {
        let mut bytes = Vec::with_capacity(payload.len() * 8);
        for v in &payload {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        atomic_write(path, &bytes)?;
        atomic_write(&sidecar_path(path), serde_json::to_string_pretty(&header)?.as_bytes())
    } else {
        let container = JsonContainer {
            version: header.version,
            r: header.r,
            t_min: header.t_min,
            t_max: header.t_max,
            n: header.n,
            payload,
        };
        atomic_write(path, serde_json::to_string(&container)?.as_bytes())
    }
}

/// Reads a matrix function written by `write_matrix`.
pub fn read_matrix(path: &Path) -> Result<MatrixFunction> {
    if is_binary(path) {
        let header: DensityHeader = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
        let bytes = fs::read(path)?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Validation(format!(
                "binary payload length {} is not a multiple of 8",
                bytes.len()
            )));
        }
        let payload: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        matrix_from_parts(&header, &payload)
    } else {
        let container: JsonContainer = serde_json::from_slice(&fs::read(path)?)?;
        let header = DensityHeader {
            version: container.version,
            r: container.r,
            t_min: container.t_min,
            t_max: container.t_max,
            n: container.n,
        };
        matrix_from_parts(&header, &container.payload)
    }
}

/// Writes a density through the matrix container.
pub fn write_density(path: &Path, s: &SpectralDensity) -> Result<()> {
    let m = MatrixFunction::new(s.grid(), s.r(), s.values().to_vec())?;
    write_matrix(path, &m)
}

/// Reads a density, revalidating Hermiticity and the definiteness flag.
pub fn read_density(path: &Path) -> Result<SpectralDensity> {
    let m = read_matrix(path)?;
    SpectralDensity::new(m.grid(), m.values().to_vec())
}

/// Atomic text write for reports and tables.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    atomic_write(path, text.as_bytes())
}

/// Plot-data export: one row per grid point with the real and imaginary
/// parts of every entry.
pub fn export_matrix_csv(path: &Path, m: &MatrixFunction) -> Result<()> {
    let r = m.r();
    let grid = m.grid();
    let mut out = String::from("t");
    for i in 0..r {
        for j in 0..r {
            out.push_str(&format!(",re_{i}_{j},im_{i}_{j}"));
        }
    }
    out.push('\n');
    for k in 0..grid.len() {
        out.push_str(&format!("{:.17e}", grid.time_at(k)));
        let v = m.value(k);
        for i in 0..r {
            for j in 0..r {
                out.push_str(&format!(",{:.17e},{:.17e}", v[(i, j)].re, v[(i, j)].im));
            }
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Plot-data export of a scalar sampled function with its own coordinate.
pub fn export_samples_csv(path: &Path, f: &SampledFunction) -> Result<()> {
    let grid = f.grid();
    let coord_name = match f.domain() {
        Domain::Time => "t",
        Domain::Frequency => "xi",
    };
    let mut out = format!("{coord_name},re,im\n");
    for (k, v) in f.values().iter().enumerate() {
        let x = match f.domain() {
            Domain::Time => grid.time_at(k),
            Domain::Frequency => grid.freq_at(k),
        };
        out.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", x, v.re, v.im));
    }
    atomic_write(path, out.as_bytes())
}
