//! Sparse voxel grid files: a little-endian binary form and a CSV form.
//!
//! Binary layout: magic `VXGR`, `u32` version, `u32` level, `u8` kind code,
//! `u32` dimension `d`, `u64` record count, then per record `u32 i, j, k`
//! followed by `d` `f64` values.

use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureValue};
use crate::util::write_atomic;
use crate::voxelize::{VoxelGrid, VoxelKey, MAX_LEVEL};

const MAGIC: &[u8; 4] = b"VXGR";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFormat {
    Binary,
    Csv,
}

impl GridFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => GridFormat::Csv,
            _ => GridFormat::Binary,
        }
    }
}

pub fn write_grid_binary<W: Write>(grid: &VoxelGrid<FeatureValue>, kind: FeatureKind, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(grid.level())?;
    w.write_u8(kind.code())?;
    w.write_u32::<LittleEndian>(kind.dimension() as u32)?;
    w.write_u64::<LittleEndian>(grid.len() as u64)?;
    for (key, value) in grid.iter() {
        for c in key.coords() {
            w.write_u32::<LittleEndian>(c)?;
        }
        for &x in value.components() {
            w.write_f64::<LittleEndian>(x)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_binary(bytes: &[u8]) -> Result<(FeatureKind, VoxelGrid<FeatureValue>)> {
    let eof = |e: std::io::Error| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::VersionMismatch("grid file is truncated".into())
        } else {
            Error::Io(e)
        }
    };
    let mut r = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(eof)?;
    if &magic != MAGIC {
        return Err(Error::VersionMismatch("not a voxel grid file".into()));
    }
    let version = r.read_u32::<LittleEndian>().map_err(eof)?;
    if version != VERSION {
        return Err(Error::VersionMismatch(format!(
            "grid version {version}, expected {VERSION}"
        )));
    }
    let level = r.read_u32::<LittleEndian>().map_err(eof)?;
    if level > MAX_LEVEL {
        return Err(Error::ResolutionTooHigh(level));
    }
    let code = r.read_u8().map_err(eof)?;
    let kind =
        FeatureKind::from_code(code).ok_or_else(|| Error::VersionMismatch(format!("unknown kind code {code}")))?;
    let dim = r.read_u32::<LittleEndian>().map_err(eof)? as usize;
    if dim != kind.dimension() {
        return Err(Error::VersionMismatch(format!(
            "{kind} has dimension {}, file says {dim}",
            kind.dimension()
        )));
    }
    let count = r.read_u64::<LittleEndian>().map_err(eof)? as usize;
    let record = 12 + 8 * dim;
    if (bytes.len() - r.position() as usize) != count.saturating_mul(record) {
        return Err(Error::VersionMismatch(
            "grid record section has the wrong length".into(),
        ));
    }
    let n = 1u32 << level;
    let mut grid = VoxelGrid::new(level);
    let mut data = [0.0; 6];
    for _ in 0..count {
        let [i, j, k] = [(); 3].map(|_| r.read_u32::<LittleEndian>());
        let (i, j, k) = (i?, j?, k?);
        if i >= n || j >= n || k >= n {
            return Err(Error::VersionMismatch(format!(
                "voxel ({i}, {j}, {k}) outside level {level}"
            )));
        }
        for x in data.iter_mut().take(dim) {
            *x = r.read_f64::<LittleEndian>()?;
        }
        grid.insert(VoxelKey::new(level, i, j, k), FeatureValue::new(kind, &data[..dim]));
    }
    Ok((kind, grid))
}

/// `level,i,j,k,<component columns>` with 17 significant digits.
pub fn write_grid_csv<W: Write>(grid: &VoxelGrid<FeatureValue>, kind: FeatureKind, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["level", "i", "j", "k"].map(String::from).to_vec();
    if kind.dimension() == 1 {
        header.push(kind.name().to_string());
    } else {
        header.extend((0..kind.dimension()).map(|c| format!("{kind}[{c}]")));
    }
    out.write_record(&header)?;
    for (key, value) in grid.iter() {
        let mut record = vec![grid.level().to_string()];
        record.extend(key.coords().iter().map(|c| c.to_string()));
        record.extend(value.components().iter().map(|x| format!("{x:.16e}")));
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_grid(path: &Path, grid: &VoxelGrid<FeatureValue>, kind: FeatureKind, format: GridFormat) -> Result<()> {
    write_atomic(path, |w| match format {
        GridFormat::Binary => write_grid_binary(grid, kind, w),
        GridFormat::Csv => write_grid_csv(grid, kind, w),
    })
}

pub fn load_grid(path: &Path) -> Result<(FeatureKind, VoxelGrid<FeatureValue>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    read_grid_binary(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::compute_grid;
    use crate::mesh::primitives;

    #[test]
    fn binary_round_trip() {
        let grids = compute_grid(&primitives::unit_cube(), 2, &[FeatureKind::QF, FeatureKind::SA]).unwrap();
        for (&kind, grid) in &grids {
            let mut buf = Vec::new();
            write_grid_binary(grid, kind, &mut buf).unwrap();
            let (k, back) = read_grid_binary(&buf).unwrap();
            assert_eq!(k, kind);
            assert_eq!(&back, grid);
            assert!(read_grid_binary(&buf[..buf.len() - 3]).is_err());
        }
    }

    #[test]
    fn csv_layout() {
        let grids = compute_grid(&primitives::unit_cube(), 1, &[FeatureKind::SA]).unwrap();
        let mut buf = Vec::new();
        write_grid_csv(&grids[&FeatureKind::SA], FeatureKind::SA, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "level,i,j,k,SA");
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[1], "1,0,0,0,7.5000000000000000e-1");
    }
}
