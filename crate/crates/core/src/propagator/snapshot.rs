//! Binary grid snapshots.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `ABRSNAP\0` |
//! | 4     | format version (`u32`, currently 1) |
//! | 4     | representation (`u32`: 0 physical, 1 spectral) |
//! | 8     | resolution `N` (`u64`) |
//! | 8     | box length `L` (`f64`) |
//! | 8     | time (`f64`) |
//!
//! followed by the `E` block and then the `B` block. Each block lists the `N³`
//! lattice entries in x-fastest order with the three components interleaved.
//! Physical entries are one `f64` per component; spectral entries are a
//! `(re, im)` pair per component.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;

use super::{FieldGrid, GridGeometry, Representation};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"ABRSNAP\0";
pub const VERSION: u32 = 1;

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub fn write_to(grid: &FieldGrid, out: &mut impl Write) -> Result<()> {
    let g = grid.geometry();
    out.write_all(&MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    let repr: u32 = match grid.representation() {
        Representation::Physical => 0,
        Representation::Spectral => 1,
    };
    out.write_all(&repr.to_le_bytes())?;
    out.write_all(&(g.resolution() as u64).to_le_bytes())?;
    out.write_all(&g.length().to_le_bytes())?;
    out.write_all(&grid.time().to_le_bytes())?;
    let spectral = repr == 1;
    for block in [grid.e(), grid.b()] {
        for i in 0..g.points() {
            for comp in block {
                out.write_all(&comp[i].re.to_le_bytes())?;
                if spectral {
                    out.write_all(&comp[i].im.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

fn read_array<const N: usize>(input: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input
        .read_exact(&mut buf)
        .map_err(|e| format_err(format!("truncated snapshot: {e}")))?;
    Ok(buf)
}

fn read_f64(input: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(input)?))
}

pub fn read_from(input: &mut impl Read) -> Result<FieldGrid> {
    if read_array::<8>(input)? != MAGIC {
        return Err(format_err("not a grid snapshot"));
    }
    let version = u32::from_le_bytes(read_array(input)?);
    if version != VERSION {
        return Err(format_err(format!("unsupported snapshot version {version}")));
    }
    let representation = match u32::from_le_bytes(read_array(input)?) {
        0 => Representation::Physical,
        1 => Representation::Spectral,
        other => return Err(format_err(format!("unknown representation tag {other}"))),
    };
    let n = u64::from_le_bytes(read_array(input)?);
    let length = read_f64(input)?;
    let n = usize::try_from(n).map_err(|_| format_err("resolution out of range"))?;
    if n > 4096 {
        return Err(format_err(format!("implausible resolution {n}")));
    }
    let geometry = GridGeometry::new(length, n).map_err(|e| format_err(e.to_string()))?;
    let time = read_f64(input)?;
    let mut grid = FieldGrid::zeros(geometry, representation);
    grid.set_time(time);
    let spectral = representation == Representation::Spectral;
    let points = grid.geometry().points();
    for block in 0..2 {
        for i in 0..points {
            let mut v = [Complex64::default(); 3];
            for c in v.iter_mut() {
                c.re = read_f64(input)?;
                if spectral {
                    c.im = read_f64(input)?;
                }
            }
            let (mut e, mut b) = grid.mode(i);
            if block == 0 {
                e = v;
            } else {
                b = v;
            }
            grid.set_mode(i, e, b);
        }
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(format_err("trailing bytes after snapshot data"));
    }
    Ok(grid)
}

/// Writes atomically through a sibling temporary file.
pub fn write(grid: &FieldGrid, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        write_to(grid, &mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read(path: &Path) -> Result<FieldGrid> {
    read_from(&mut BufReader::new(fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn sample_grid() -> FieldGrid {
        let g = GridGeometry::new(4.0, 8).unwrap();
        let mut grid = FieldGrid::from_fn(g, |x| (Vector3::new(x.x.sin(), x.y, 1.0), x * 0.25));
        grid.set_time(1.5);
        grid
    }

    #[test]
    fn physical_and_spectral_round_trip() {
        for spectral in [false, true] {
            let mut grid = sample_grid();
            if spectral {
                grid.to_spectral();
            }
            let mut buf = Vec::new();
            write_to(&grid, &mut buf).unwrap();
            let per = if spectral { 16 } else { 8 };
            assert_eq!(buf.len(), 40 + 2 * 3 * per * 512);
            let back = read_from(&mut buf.as_slice()).unwrap();
            assert_eq!(back, grid);
        }
    }

    #[test]
    fn corrupted_headers_are_rejected() {
        let mut buf = Vec::new();
        write_to(&sample_grid(), &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_from(&mut bad.as_slice()), Err(Error::Format(_))));
        let short = &buf[..buf.len() - 3];
        assert!(matches!(read_from(&mut &short[..]), Err(Error::Format(_))));
        let mut v2 = buf.clone();
        v2[8] = 2;
        assert!(matches!(read_from(&mut v2.as_slice()), Err(Error::Format(_))));
    }
}
