//! 16-bit binary portable graymap (P5, maxval 65535, big-endian samples).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAXVAL: f64 = 65535.0;

/// Writes `pixels` (row-major, values clamped to [0, `scale`]) quantized to 16 bits.
pub fn write_pgm16(path: &Path, pixels: &[f64], height: usize, width: usize, scale: f64) -> Result<()> {
    if pixels.len() != height * width {
        return Err(Error::shape(format!("{} pixels do not form {height}×{width}", pixels.len())));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!("PGM scale must be positive, got {scale}")));
    }
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for &p in pixels {
        let q = ((p / scale).clamp(0.0, 1.0) * MAXVAL).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a P5 file with maxval 65535 into values in [0, `scale`].
pub fn read_pgm16(path: &Path, scale: f64) -> Result<(Vec<f64>, usize, usize)> {
    let bytes = fs::read(path)?;
    let bad = || Error::Format(format!("{}: not a 16-bit P5 graymap", path.display()));
    // Header: four whitespace-separated tokens, then a single whitespace byte.
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < 4 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(bad());
        }
        tokens.push(std::str::from_utf8(&bytes[start..i]).map_err(|_| bad())?);
    }
    let body = &bytes[i + 1..];
    let width: usize = tokens[1].parse().map_err(|_| bad())?;
    let height: usize = tokens[2].parse().map_err(|_| bad())?;
    if tokens[0] != "P5" || tokens[3] != "65535" || body.len() != 2 * width * height {
        return Err(bad());
    }
    let pixels = body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / MAXVAL * scale).collect();
    Ok((pixels, height, width))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let px: Vec<f64> = (0..12).map(|i| i as f64 / 11.0 * 2.0).collect();
        write_pgm16(&path, &px, 3, 4, 2.0).unwrap();
        let (back, h, w) = read_pgm16(&path, 2.0).unwrap();
        assert_eq!((h, w), (3, 4));
        for (a, b) in px.iter().zip(&back) {
            assert!((a - b).abs() <= 2.0 / 65535.0);
        }
    }

    #[test]
    fn rejects_other_formats() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        fs::write(&path, b"P5\n2 1\n255\n\x00\x01").unwrap();
        assert!(read_pgm16(&path, 1.0).is_err());
    }
}
