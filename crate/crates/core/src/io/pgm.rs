//! Binary (P5) PGM images, 8 or 16 bits per sample.
//!
//! Values are clamped to `[0, 1]` and quantized as `round(v·maxval)`;
//! 16-bit samples are big-endian.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn maxval(self) -> u16 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

pub fn quantize(v: f64, depth: BitDepth) -> u16 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * depth.maxval() as f64).round() as u16
}

pub fn encode_pgm(img: &Array2<f64>, depth: BitDepth) -> Vec<u8> {
    let (h, w) = img.dim();
    let mut out = format!("P5\n{w} {h}\n{}\n", depth.maxval()).into_bytes();
    for &v in img.iter() {
        let q = quantize(v, depth);
        match depth {
            BitDepth::Eight => out.push(q as u8),
            BitDepth::Sixteen => out.extend_from_slice(&q.to_be_bytes()),
        }
    }
    out
}

/// Raw samples and their maxval.
pub fn decode_pgm(bytes: &[u8]) -> Result<(Array2<u16>, u16)> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("PGM header truncated".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1; // single whitespace byte before the raster
    if fields[0] != "P5" {
        return Err(Error::Format(format!("unsupported PGM magic {:?}", fields[0])));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PGM header value {s:?}")))
    };
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM maxval {maxval} out of range")));
    }
    let bps = if maxval < 256 { 1 } else { 2 };
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() != w * h * bps {
        return Err(Error::Format(format!(
            "PGM raster is {} bytes; expected {}",
            raster.len(),
            w * h * bps
        )));
    }
    let samples: Vec<u16> = if bps == 1 {
        raster.iter().map(|&b| b as u16).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    let img = Array2::from_shape_vec((h, w), samples).map_err(|e| Error::Format(e.to_string()))?;
    Ok((img, maxval as u16))
}

pub fn write_pgm(path: impl AsRef<Path>, img: &Array2<f64>, depth: BitDepth) -> Result<()> {
    fs::write(path, encode_pgm(img, depth))?;
    Ok(())
}

/// Read a PGM and scale samples back to `[0, 1]`.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let (img, maxval) = decode_pgm(&fs::read(path)?)?;
    Ok(img.mapv(|q| q as f64 / maxval as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_bit_round_trip_within_half_step() {
        let img = Array2::from_shape_fn((5, 7), |(r, c)| (r * 7 + c) as f64 / 40.0 + 0.001);
        let (q, maxval) = decode_pgm(&encode_pgm(&img, BitDepth::Sixteen)).unwrap();
        assert_eq!(maxval, 65535);
        for (a, b) in q.iter().zip(img.iter()) {
            assert!((*a as f64 / 65535.0 - b.clamp(0.0, 1.0)).abs() <= 0.5 / 65535.0 + 1e-15);
        }
    }

    #[test]
    fn eight_bit_layout_and_clamp() {
        let img = Array2::from_shape_vec((1, 3), vec![-0.2, 0.5, 1.7]).unwrap();
        let b = encode_pgm(&img, BitDepth::Eight);
        assert_eq!(&b[..], b"P5\n3 1\n255\n\x00\x80\xff");
    }

    #[test]
    fn header_comments() {
        let (q, m) = decode_pgm(b"P5\n# made by hand\n2 1\n255\n\x01\x02").unwrap();
        assert_eq!(m, 255);
        assert_eq!(q.into_raw_vec_and_offset().0, vec![1, 2]);
        assert!(decode_pgm(b"P2\n1 1\n255\n1").is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n\x01").is_err());
    }
}
