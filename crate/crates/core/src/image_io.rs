//! Image and signal file formats: 8-bit binary PGM (P5) for byte images and
//! the raw little-endian float32 container ("FSIG") for intermediate
//! signals.
//!
//! FSIG layout: a 16-byte header — magic `FSIG`, `u32` rank, `u32` dim0,
//! `u32` dim1 (dim1 = 1 for rank-1 signals) — followed by row-major f32
//! samples.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::{Shape, Signal};

/// Writes a 2D signal as binary PGM, rounding and clamping values to 0..255.
pub fn write_pgm(path: &Path, image: &Signal) -> Result<()> {
    let (rows, cols) = match image.shape() {
        Shape::Two(r, c) => (r, c),
        Shape::One(_) => return Err(Error::Shape("PGM images are two-dimensional".into())),
    };
    let mut file = std::fs::File::create(path)?;
    write!(file, "P5\n{} {}\n255\n", cols, rows)?;
    let bytes: Vec<u8> = image
        .values()
        .iter()
        .map(|&v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    file.write_all(&bytes)?;
    Ok(())
}

/// Reads a binary PGM (maxval <= 255) into a 2D signal with values 0..255.
pub fn read_pgm(path: &Path) -> Result<Signal> {
    let data = std::fs::read(path)?;
    let mut pos = 0usize;
    let mut token = |data: &[u8]| -> Result<String> {
        // skip whitespace and '#' comment lines
        loop {
            while pos < data.len() && data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < data.len() && data[pos] == b'#' {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&data[start..pos]).into_owned())
    };
    if token(&data)? != "P5" {
        return Err(Error::Parse("not a binary PGM (P5) file".into()));
    }
    let cols: usize = token(&data)?.parse().map_err(|_| Error::Parse("bad PGM width".into()))?;
    let rows: usize = token(&data)?.parse().map_err(|_| Error::Parse("bad PGM height".into()))?;
    let maxval: usize =
        token(&data)?.parse().map_err(|_| Error::Parse("bad PGM maxval".into()))?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse(format!("unsupported PGM maxval {}", maxval)));
    }
    pos += 1; // single whitespace byte after maxval
    if data.len() < pos + rows * cols {
        return Err(Error::Parse("PGM pixel data truncated".into()));
    }
    let values = data[pos..pos + rows * cols].iter().map(|&b| b as f64).collect();
    Signal::new_2d(rows, cols, values)
}

const FSIG_MAGIC: &[u8; 4] = b"FSIG";

/// Writes a signal in the FSIG float32 container.
pub fn write_fsig(path: &Path, signal: &Signal) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    let (rank, d0, d1) = match signal.shape() {
        Shape::One(n) => (1u32, n as u32, 1u32),
        Shape::Two(r, c) => (2u32, r as u32, c as u32),
    };
    file.write_all(FSIG_MAGIC)?;
    file.write_all(&rank.to_le_bytes())?;
    file.write_all(&d0.to_le_bytes())?;
    file.write_all(&d1.to_le_bytes())?;
    let mut buf = Vec::with_capacity(signal.len() * 4);
    for &v in signal.values() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    file.write_all(&buf)?;
    Ok(())
}

/// Reads an FSIG container back into a signal.
pub fn read_fsig(path: &Path) -> Result<Signal> {
    let mut file = std::fs::File::open(path)?;
    let mut header = [0u8; 16];
    file.read_exact(&mut header)?;
    if &header[0..4] != FSIG_MAGIC {
        return Err(Error::Parse("missing FSIG magic".into()));
    }
    let rank = u32::from_le_bytes(header[4..8].try_into().unwrap());
    let d0 = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let d1 = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let shape = match rank {
        1 => {
            if d1 != 1 {
                return Err(Error::Parse("rank-1 FSIG must carry dim1 = 1".into()));
            }
            Shape::One(d0)
        }
        2 => Shape::Two(d0, d1),
        other => return Err(Error::Parse(format!("unsupported FSIG rank {}", other))),
    };
    let mut raw = Vec::new();
    file.read_to_end(&mut raw)?;
    if raw.len() != shape.len() * 4 {
        return Err(Error::Parse(format!(
            "FSIG payload holds {} bytes, shape needs {}",
            raw.len(),
            shape.len() * 4
        )));
    }
    let values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Signal::from_shape(shape, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::lcg_signal_2d;

    #[test]
    fn pgm_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let img = Signal::new_2d(3, 4, (0..12).map(|i| (i * 20) as f64).collect()).unwrap();
        let path = dir.path().join("t.pgm");
        write_pgm(&path, &img).unwrap();
        let back = read_pgm(&path).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn pgm_clamps_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let img = Signal::new_2d(1, 3, vec![-5.0, 100.2, 300.0]).unwrap();
        let path = dir.path().join("c.pgm");
        write_pgm(&path, &img).unwrap();
        let back = read_pgm(&path).unwrap();
        assert_eq!(back.values(), &[0.0, 100.0, 255.0]);
    }

    #[test]
    fn fsig_roundtrip_2d() {
        let dir = tempfile::tempdir().unwrap();
        let sig = lcg_signal_2d(5, 7, 33);
        let path = dir.path().join("t.fsig");
        write_fsig(&path, &sig).unwrap();
        let back = read_fsig(&path).unwrap();
        assert_eq!(back.shape(), sig.shape());
        for (a, b) in back.values().iter().zip(sig.values()) {
            assert_eq!(*a, *b as f32 as f64);
        }
    }

    #[test]
    fn fsig_roundtrip_1d() {
        let dir = tempfile::tempdir().unwrap();
        let sig = Signal::new_1d(vec![1.5, -2.25, 0.0]);
        let path = dir.path().join("s.fsig");
        write_fsig(&path, &sig).unwrap();
        assert_eq!(read_fsig(&path).unwrap(), sig);
    }

    #[test]
    fn fsig_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.fsig");
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00\x01\x00\x00\x00\x01\x00\x00\x00").unwrap();
        assert!(read_fsig(&path).is_err());
    }
}
