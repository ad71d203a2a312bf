//! Field snapshot files: little-endian binary with a 32-byte header
//! (magic "ANNF", version u32, nr u32, ntheta u32, a f64, b f64) followed by
//! nr x ntheta f64 values row-major in r, plus a JSON metadata sidecar.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::field::ScalarField;
use super::grid::AnnulusGrid;

pub const MAGIC: &[u8; 4] = b"ANNF";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub field: String,
    pub time: f64,
    pub step: u64,
    pub nr: u32,
    pub ntheta: u32,
    pub a: f64,
    pub b: f64,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

pub fn write_field(path: &Path, field: &ScalarField, meta: &SnapshotMeta) -> Result<()> {
    let g = &field.grid;
    let mut buf = Vec::with_capacity(32 + 8 * field.values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(g.nr as u32).to_le_bytes());
    buf.extend_from_slice(&(g.ntheta as u32).to_le_bytes());
    buf.extend_from_slice(&g.a.to_le_bytes());
    buf.extend_from_slice(&g.b.to_le_bytes());
    debug_assert_eq!(buf.len(), 32);
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    let sidecar = serde_json::to_string_pretty(meta)?;
    fs::write(sidecar_path(path), sidecar)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<(ScalarField, SnapshotMeta)> {
    let mut f = fs::File::open(path)?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    if buf.len() < 32 || &buf[0..4] != MAGIC {
        return Err(Error::Parse { line: 0, message: format!("{}: not an ANNF snapshot", path.display()) });
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Parse {
            line: 0,
            message: format!("unsupported snapshot version {version}"),
        });
    }
    let nr = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
    let ntheta = u32::from_le_bytes(buf[12..16].try_into().unwrap()) as usize;
    let a = f64::from_le_bytes(buf[16..24].try_into().unwrap());
    let b = f64::from_le_bytes(buf[24..32].try_into().unwrap());
    let expected = 32 + 8 * nr * ntheta;
    if buf.len() != expected {
        return Err(Error::Parse {
            line: 0,
            message: format!("snapshot payload is {} bytes, expected {expected}", buf.len()),
        });
    }
    let grid = AnnulusGrid::new(a, b, nr, ntheta)?;
    let mut field = ScalarField::zeros(&grid);
    for (i, v) in field.values.iter_mut().enumerate() {
        let o = 32 + 8 * i;
        *v = f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    }
    let meta_text = fs::read_to_string(sidecar_path(path))?;
    let meta: SnapshotMeta = serde_json::from_str(&meta_text)?;
    Ok((field, meta))
}

/// Read a field onto an existing grid, checking geometry agreement.
pub fn read_field_on(path: &Path, grid: &Arc<AnnulusGrid>) -> Result<(ScalarField, SnapshotMeta)> {
    let (field, meta) = read_field(path)?;
    if *field.grid != **grid {
        return Err(Error::Shape(format!(
            "snapshot grid ({}, {}, {}, {}) does not match run grid ({}, {}, {}, {})",
            field.grid.a, field.grid.b, field.grid.nr, field.grid.ntheta, grid.a, grid.b, grid.nr, grid.ntheta
        )));
    }
    Ok((ScalarField { grid: grid.clone(), values: field.values }, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = AnnulusGrid::new(1.0, 2.0, 9, 8).unwrap();
        let f = ScalarField::from_fn(&g, |r, t| (r * 17.0).sin() * (3.0 * t).cos() + 1.0 / 3.0);
        let meta = SnapshotMeta {
            field: "omega".into(),
            time: 0.125,
            step: 42,
            nr: 9,
            ntheta: 8,
            a: 1.0,
            b: 2.0,
        };
        let path = dir.path().join("omega.annf");
        write_field(&path, &f, &meta).unwrap();
        let (back, meta2) = read_field(&path).unwrap();
        assert_eq!(f.values, back.values, "payload must round-trip bit-exactly");
        assert_eq!(meta2.step, 42);
        assert_eq!(meta2.field, "omega");
    }

    #[test]
    fn rejects_corrupt_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.annf");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(read_field(&path).is_err());
    }
}
