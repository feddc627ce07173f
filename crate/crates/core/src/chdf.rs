//! CHDF, a flat little-endian binary container for gridded fields.
//!
//! ```text
//! offset  size  content
//! 0       4     magic "CHDF"
//! 4       4     u32 format version (1)
//! 8       4     u32 dimension d
//! 12      4     u32 points per axis N
//! 16      8     f64 side length S
//! 24      4     u32 component count c
//! 28      ...   c arrays of N^d f64, row-major, last axis fastest
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::GridSpec;

pub const MAGIC: &[u8; 4] = b"CHDF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;

/// Writes `components` (all on `grid`) to `w`.
pub fn write<W: Write>(mut w: W, grid: &GridSpec, components: &[&ScalarField]) -> Result<()> {
    for c in components {
        grid.ensure_same(c.grid())?;
    }
    let as_u32 =
        |v: usize, what: &str| u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")));
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&as_u32(grid.dim, "dimension")?.to_le_bytes())?;
    w.write_all(&as_u32(grid.points, "points")?.to_le_bytes())?;
    w.write_all(&grid.side.to_le_bytes())?;
    w.write_all(&as_u32(components.len(), "component count")?.to_le_bytes())?;
    for c in components {
        let mut buf = Vec::with_capacity(8 * grid.len());
        for v in c.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads a container. The file does not record a dealias fraction, so the
/// caller supplies the one the returned grid should carry.
pub fn read<R: Read>(mut r: R, dealias_fraction: f64) -> Result<(GridSpec, Vec<ScalarField>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, not a CHDF file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported CHDF version {version}")));
    }
    let dim = read_u32(&mut r)? as usize;
    let points = read_u32(&mut r)? as usize;
    let mut side = [0u8; 8];
    r.read_exact(&mut side)?;
    let side = f64::from_le_bytes(side);
    let count = read_u32(&mut r)? as usize;
    let grid = GridSpec::with_dealias(dim, points, side, dealias_fraction)
        .map_err(|e| Error::Format(format!("invalid header: {e}")))?;
    let mut components = Vec::with_capacity(count);
    let mut buf = vec![0u8; 8 * grid.len()];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        let values = buf.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        components.push(ScalarField::from_values(grid, values)?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after last component".into()));
    }
    Ok((grid, components))
}

pub fn write_file(path: impl AsRef<Path>, grid: &GridSpec, components: &[&ScalarField]) -> Result<()> {
    write(BufWriter::new(File::create(path)?), grid, components)
}

pub fn read_file(path: impl AsRef<Path>, dealias_fraction: f64) -> Result<(GridSpec, Vec<ScalarField>)> {
    read(BufReader::new(File::open(path)?), dealias_fraction)
}
