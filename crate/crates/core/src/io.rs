//! Binary field files.
//!
//! A record is a 33-byte little-endian header followed by the coefficients:
//!
//! | offset | size | content                              |
//! |--------|------|--------------------------------------|
//! | 0      | 5    | ASCII magic `SFPE1`                  |
//! | 5      | 4    | `u32` dimension d                    |
//! | 9      | 4    | `u32` modes per axis N               |
//! | 13     | 8    | `f64` period L                       |
//! | 21     | 4    | `u32` component count                |
//! | 25     | 8    | `f64` time tag                       |
//! | 33     | ...  | `f64` pairs (re, im)                 |
//!
//! Coefficients are written component by component, each in natural wavenumber
//! order `k = -N/2, ..., N/2 - 1` per axis with the last axis varying fastest.
//! A time-dependent field is a plain concatenation of records, one per node.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Result, SfpeError};
use crate::field::{Grid, SpectralField, TimeField};

pub const MAGIC: &[u8; 5] = b"SFPE1";
pub const HEADER_LEN: usize = 33;

fn natural_order(grid: &Grid) -> Vec<usize> {
    let h = (grid.n() / 2) as i64;
    let ks: Vec<i64> = (-h..h).collect();
    match grid.dim() {
        1 => ks.iter().map(|&k| grid.index_of([k, 0]).unwrap()).collect(),
        _ => ks
            .iter()
            .flat_map(|&a| ks.iter().map(move |&b| [a, b]))
            .map(|k| grid.index_of(k).unwrap())
            .collect(),
    }
}

pub fn write_field<W: Write>(w: &mut W, field: &SpectralField, time: f64) -> Result<()> {
    let g = field.grid();
    let mut buf = Vec::with_capacity(HEADER_LEN + 16 * g.points() * field.components());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(g.n() as u32).to_le_bytes());
    buf.extend_from_slice(&g.length().to_le_bytes());
    buf.extend_from_slice(&(field.components() as u32).to_le_bytes());
    buf.extend_from_slice(&time.to_le_bytes());
    let order = natural_order(g);
    for c in 0..field.components() {
        let coeffs = field.component(c);
        for &i in &order {
            buf.extend_from_slice(&coeffs[i].re.to_le_bytes());
            buf.extend_from_slice(&coeffs[i].im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn u32_at(b: &[u8], o: usize) -> u32 {
    u32::from_le_bytes(b[o..o + 4].try_into().unwrap())
}

fn f64_at(b: &[u8], o: usize) -> f64 {
    f64::from_le_bytes(b[o..o + 8].try_into().unwrap())
}

/// Reads one record; `Ok(None)` at a clean end of stream.
pub fn read_field<R: Read>(r: &mut R) -> Result<Option<(SpectralField, f64)>> {
    let mut header = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        let k = r.read(&mut header[got..])?;
        if k == 0 {
            break;
        }
        got += k;
    }
    if got == 0 {
        return Ok(None);
    }
    if got < HEADER_LEN {
        return Err(SfpeError::Format(format!("truncated header ({got} bytes)")));
    }
    if &header[..5] != MAGIC {
        return Err(SfpeError::Format("bad magic".into()));
    }
    let dim = u32_at(&header, 5) as usize;
    let n = u32_at(&header, 9) as usize;
    let length = f64_at(&header, 13);
    let comps = u32_at(&header, 21) as usize;
    let time = f64_at(&header, 25);
    let grid = Grid::new(dim, n, length)?;
    if comps == 0 || comps > 2 {
        return Err(SfpeError::Format(format!("component count {comps}")));
    }
    let mut body = vec![0u8; 16 * grid.points() * comps];
    r.read_exact(&mut body)
        .map_err(|e| SfpeError::Format(format!("truncated body: {e}")))?;
    let order = natural_order(&grid);
    let mut data = vec![vec![Complex64::new(0.0, 0.0); grid.points()]; comps];
    let mut o = 0;
    for comp in data.iter_mut() {
        for &i in &order {
            comp[i] = Complex64::new(f64_at(&body, o), f64_at(&body, o + 8));
            o += 16;
        }
    }
    Ok(Some((SpectralField::from_coeffs(grid, data)?, time)))
}

pub fn write_time_field<W: Write>(w: &mut W, field: &TimeField) -> Result<()> {
    for (t, s) in field.times().iter().zip(field.snapshots()) {
        write_field(w, s, *t)?;
    }
    Ok(())
}

pub fn read_time_field<R: Read>(r: &mut R) -> Result<TimeField> {
    let mut times = Vec::new();
    let mut snaps = Vec::new();
    while let Some((f, t)) = read_field(r)? {
        times.push(t);
        snaps.push(f);
    }
    TimeField::new(times, snaps)
}

pub fn save_field(path: &Path, field: &SpectralField, time: f64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, field, time)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<(SpectralField, f64)> {
    let mut r = BufReader::new(File::open(path)?);
    read_field(&mut r)?.ok_or_else(|| SfpeError::Format("empty file".into()))
}

pub fn save_time_field(path: &Path, field: &TimeField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_time_field(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_time_field(path: &Path) -> Result<TimeField> {
    let mut r = BufReader::new(File::open(path)?);
    read_time_field(&mut r)
}

/// Every `(field, time)` record of a file, without requiring a time grid.
pub fn load_records(path: &Path) -> Result<Vec<(SpectralField, f64)>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    while let Some(rec) = read_field(&mut r)? {
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let g = Grid::new(1, 4, 2.0).unwrap();
        let mut f = SpectralField::zeros(g, 1);
        f.component_mut(0)[1] = Complex64::new(1.5, -2.0);
        let mut buf = Vec::new();
        write_field(&mut buf, &f, 0.25).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 4 * 16);
        assert_eq!(&buf[..5], b"SFPE1");
        assert_eq!(u32_at(&buf, 5), 1);
        assert_eq!(u32_at(&buf, 9), 4);
        assert_eq!(f64_at(&buf, 13), 2.0);
        assert_eq!(u32_at(&buf, 21), 1);
        assert_eq!(f64_at(&buf, 25), 0.25);
        // natural order -2, -1, 0, 1: k = 1 is the fourth pair
        assert_eq!(f64_at(&buf, HEADER_LEN + 3 * 16), 1.5);
        assert_eq!(f64_at(&buf, HEADER_LEN + 3 * 16 + 8), -2.0);
    }

    #[test]
    fn time_field_round_trip() {
        let g = Grid::new(2, 8, 3.0).unwrap();
        let mut a = SpectralField::zeros(g, 2);
        for (i, z) in a.component_mut(1).iter_mut().enumerate() {
            *z = Complex64::new(i as f64, -(i as f64) * 0.5);
        }
        let tf = TimeField::new(vec![0.0, 0.5], vec![a.clone(), a.scale(2.0)]).unwrap();
        let mut buf = Vec::new();
        write_time_field(&mut buf, &tf).unwrap();
        let back = read_time_field(&mut buf.as_slice()).unwrap();
        assert_eq!(back, tf);
    }

    #[test]
    fn rejects_garbage() {
        let mut bad: &[u8] = b"NOPE1aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa";
        assert!(matches!(read_field(&mut bad), Err(SfpeError::Format(_))));
        let mut short: &[u8] = b"SFPE1";
        assert!(read_field(&mut short).is_err());
    }
}
