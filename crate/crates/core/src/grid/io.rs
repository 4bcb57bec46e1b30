//! Snapshot persistence.
//!
//! Binary layout, little endian: `dim: u64`, `points: u64`, `half_width: f64`,
//! `time: f64`, then `points^dim` values as `f64`.

use std::io::{Read, Write};
use std::path::Path;

use super::{Field, Grid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub field: Field,
}

pub fn write_snapshot(path: &Path, field: &Field, time: f64) -> Result<()> {
    let g = field.grid();
    let mut buf = Vec::with_capacity(32 + 8 * g.len());
    buf.extend_from_slice(&(g.dim() as u64).to_le_bytes());
    buf.extend_from_slice(&(g.points() as u64).to_le_bytes());
    buf.extend_from_slice(&g.half_width().to_le_bytes());
    buf.extend_from_slice(&time.to_le_bytes());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 32 {
        return Err(Error::Parse("snapshot header truncated".into()));
    }
    let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().unwrap() };
    let dim = u64::from_le_bytes(word(0)) as usize;
    let points = u64::from_le_bytes(word(1)) as usize;
    let half_width = f64::from_le_bytes(word(2));
    let time = f64::from_le_bytes(word(3));
    let grid = Grid::new(dim, points, half_width)?;
    if bytes.len() != 32 + 8 * grid.len() {
        return Err(Error::Parse(format!(
            "snapshot holds {} bytes, expected {}",
            bytes.len(),
            32 + 8 * grid.len()
        )));
    }
    let values = (0..grid.len()).map(|k| f64::from_le_bytes(word(4 + k))).collect();
    Ok(Snapshot {
        time,
        field: Field::from_vec(grid, values)?,
    })
}

/// Writes `x,u` (1D) or `x,y,u` (2D) rows.
pub fn write_csv(path: &Path, field: &Field) -> Result<()> {
    let g = field.grid();
    let mut out = String::new();
    out.push_str(if g.dim() == 1 { "x,u\n" } else { "x,y,u\n" });
    for (i, v) in field.values().iter().enumerate() {
        let [x, y] = g.position(i);
        if g.dim() == 1 {
            out.push_str(&format!("{x},{v}\n"));
        } else {
            out.push_str(&format!("{x},{y},{v}\n"));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip() {
        let dir = std::env::temp_dir().join(format!("fujita-snap-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("u.bin");
        let grid = Grid::new(2, 8, 3.0).unwrap();
        let f = grid.sample(|x| x[0] - 2.0 * x[1]).unwrap();
        write_snapshot(&path, &f, 1.25).unwrap();
        let s = read_snapshot(&path).unwrap();
        assert_eq!(s.time, 1.25);
        assert_eq!(s.field, f);
        std::fs::write(&path, [0u8; 10]).unwrap();
        assert!(matches!(read_snapshot(&path), Err(Error::Parse(_))));
        let csv = dir.join("u.csv");
        write_csv(&csv, &f).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().count(), 65);
        std::fs::remove_dir_all(&dir).ok();
    }
}
