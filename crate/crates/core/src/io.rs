//! Field dumps and CSV export.
//!
//! Dump layout, little-endian: `b"CMBO"`, version `u32`, group tag `u8`, then
//! per axis `origin f64, extent f64, count u64`, then the values as `f64` in
//! row-major order. The boundary mode is not stored; readers supply it.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::{Axis, Boundary, Grid, GridFunction};
use crate::group::{GroupDescriptor, GroupKind};

pub const MAGIC: &[u8; 4] = b"CMBO";
pub const VERSION: u32 = 1;

pub fn write_dump<W: Write>(mut w: W, f: &GridFunction) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[f.grid.group.kind.tag()])?;
    for a in &f.grid.axes {
        w.write_all(&a.origin.to_le_bytes())?;
        w.write_all(&a.extent.to_le_bytes())?;
        w.write_all(&(a.count as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(8 * f.values.len());
    for v in &f.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    Ok(b)
}

pub fn read_dump<R: Read>(mut r: R, boundary: Boundary) -> Result<GridFunction> {
    let magic: [u8; 4] = read_array(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let [tag] = read_array::<1, _>(&mut r)?;
    let kind = GroupKind::from_tag(tag)?;
    let group = GroupDescriptor::from_kind(kind)?;
    let mut axes = Vec::with_capacity(group.n);
    for _ in 0..group.n {
        let origin = f64::from_le_bytes(read_array(&mut r)?);
        let extent = f64::from_le_bytes(read_array(&mut r)?);
        let count = u64::from_le_bytes(read_array(&mut r)?);
        if count > (1 << 32) {
            return Err(Error::Format(format!("implausible axis count {count}")));
        }
        axes.push(Axis::new(origin, extent, count as usize));
    }
    let grid = Grid::new(group, axes, boundary)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * grid.len() {
        return Err(Error::Format(format!(
            "expected {} value bytes, found {}",
            8 * grid.len(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    GridFunction::new(grid, values)
}

/// One row per node: index columns `i0, i1, …`, `value`, then `manifest`
/// (an opaque tag identifying the run that produced the field).
pub fn write_csv<W: Write>(mut w: W, f: &GridFunction, manifest: &str) -> Result<()> {
    let d = f.grid.dim();
    let header: Vec<String> = (0..d)
        .map(|k| format!("i{k}"))
        .chain(["value".into(), "manifest".into()])
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (flat, v) in f.values.iter().enumerate() {
        let idx = f.grid.multi_index(flat);
        for i in idx {
            write!(w, "{i},")?;
        }
        writeln!(w, "{v:e},{manifest}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip() {
        let g = Grid::heisenberg(0.25, 2, 1, 5).unwrap();
        let f = GridFunction::from_fn(&g, |p| p[0] - 2.0 * p[1] + p[2]);
        let mut buf = Vec::new();
        write_dump(&mut buf, &f).unwrap();
        assert_eq!(&buf[..4], b"CMBO");
        assert_eq!(buf.len(), 4 + 4 + 1 + 3 * 24 + 8 * g.len());
        let back = read_dump(&buf[..], Boundary::ExtendConstant).unwrap();
        assert_eq!(back, f);
        assert!(read_dump(&buf[..buf.len() - 1], Boundary::ExtendConstant).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_dump(&bad[..], Boundary::ExtendConstant), Err(Error::Format(_))));
    }

    #[test]
    fn csv_rows() {
        let g = Grid::euclidean2(Axis::new(0.0, 1.0, 2), Axis::new(0.0, 1.0, 3), Boundary::Torus).unwrap();
        let f = GridFunction::constant(&g, 1.5);
        let mut buf = Vec::new();
        write_csv(&mut buf, &f, "r1").unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "i0,i1,value,manifest");
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[6], "1,2,1.5e0,r1");
    }
}
