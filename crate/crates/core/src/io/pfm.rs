//! Grayscale PFM ("Pf") float images. Written little-endian (negative scale);
//! rows are stored bottom to top as the format requires.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub fn encode_pfm(img: &Array2<f64>) -> Vec<u8> {
    let (h, w) = img.dim();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    for r in (0..h).rev() {
        for c in 0..w {
            out.extend_from_slice(&(img[[r, c]] as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Array2<f32>> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("PFM header truncated".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "Pf" {
        return Err(Error::Format(format!(
            "unsupported PFM type {:?} (only grayscale \"Pf\")",
            fields[0]
        )));
    }
    let dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PFM dimension {s:?}")))
    };
    let (w, h) = (dim(&fields[1])?, dim(&fields[2])?);
    let scale: f64 = fields[3]
        .parse()
        .map_err(|_| Error::Format(format!("bad PFM scale {:?}", fields[3])))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Format("PFM scale must be nonzero".into()));
    }
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() != w * h * 4 {
        return Err(Error::Format(format!(
            "PFM raster is {} bytes; expected {}",
            raster.len(),
            w * h * 4
        )));
    }
    let little = scale < 0.0;
    let mut img = Array2::zeros((h, w));
    for (i, c) in raster.chunks_exact(4).enumerate() {
        let b = [c[0], c[1], c[2], c[3]];
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        img[[h - 1 - i / w, i % w]] = v;
    }
    Ok(img)
}

pub fn write_pfm(path: impl AsRef<Path>, img: &Array2<f64>) -> Result<()> {
    fs::write(path, encode_pfm(img))?;
    Ok(())
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<Array2<f32>> {
    decode_pfm(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_row_order() {
        let img = Array2::from_shape_fn((3, 4), |(r, c)| r as f64 * 10.0 + c as f64 + 0.25);
        let b = encode_pfm(&img);
        let header = b"Pf\n4 3\n-1.0\n".len();
        // First stored row is the bottom one.
        assert_eq!(f32::from_le_bytes(b[header..header + 4].try_into().unwrap()), 20.25);
        let back = decode_pfm(&b).unwrap();
        assert_eq!(back, img.mapv(|v| v as f32));
    }

    #[test]
    fn big_endian_input() {
        let mut b = b"Pf\n1 1\n1.0\n".to_vec();
        b.extend_from_slice(&2.5f32.to_be_bytes());
        assert_eq!(decode_pfm(&b).unwrap()[[0, 0]], 2.5);
        assert!(decode_pfm(b"PF\n1 1\n-1.0\n").is_err());
    }
}
