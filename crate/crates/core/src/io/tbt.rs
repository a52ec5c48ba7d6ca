//! TBT tensor container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "TBT1"          4 bytes
//! dtype           u32   1 = f32, 2 = f64
//! ndim            u32
//! dims            u64 × ndim
//! payload         row-major, product(dims) × dtype size
//! crc32           u32   over every preceding byte
//! ```

use std::fs;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TBT1";
pub const DTYPE_F32: u32 = 1;
pub const DTYPE_F64: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum TbtArray {
    F32(ArrayD<f32>),
    F64(ArrayD<f64>),
}

impl TbtArray {
    pub fn shape(&self) -> &[usize] {
        match self {
            TbtArray::F32(a) => a.shape(),
            TbtArray::F64(a) => a.shape(),
        }
    }

    pub fn dtype_code(&self) -> u32 {
        match self {
            TbtArray::F32(_) => DTYPE_F32,
            TbtArray::F64(_) => DTYPE_F64,
        }
    }

    /// Widen to f64 (lossless for both dtypes).
    pub fn into_f64(self) -> ArrayD<f64> {
        match self {
            TbtArray::F32(a) => a.mapv(f64::from),
            TbtArray::F64(a) => a,
        }
    }
}

impl From<ArrayD<f64>> for TbtArray {
    fn from(a: ArrayD<f64>) -> Self {
        TbtArray::F64(a)
    }
}

impl From<ArrayD<f32>> for TbtArray {
    fn from(a: ArrayD<f32>) -> Self {
        TbtArray::F32(a)
    }
}

pub fn encode(array: &TbtArray) -> Vec<u8> {
    let shape = array.shape();
    let n: usize = shape.iter().product();
    let size = if array.dtype_code() == DTYPE_F32 { 4 } else { 8 };
    let mut out = Vec::with_capacity(12 + 8 * shape.len() + n * size + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&array.dtype_code().to_le_bytes());
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    // `iter()` walks logical row-major order whatever the memory layout.
    match array {
        TbtArray::F32(a) => a.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        TbtArray::F64(a) => a.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format(format!("TBT truncated while reading {what}"))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<TbtArray> {
    if bytes.len() < 16 {
        return Err(Error::Format(format!("TBT too short ({} bytes)", bytes.len())));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(Error::Format(format!(
            "TBT CRC mismatch: stored {stored:08x}, computed {actual:08x}"
        )));
    }
    let mut cur = Cursor { bytes: body, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(Error::Format("not a TBT file (bad magic)".into()));
    }
    let dtype = cur.u32("dtype")?;
    let size = match dtype {
        DTYPE_F32 => 4,
        DTYPE_F64 => 8,
        other => return Err(Error::Format(format!("unknown TBT dtype code {other}"))),
    };
    let ndim = cur.u32("ndim")? as usize;
    let mut dims = Vec::with_capacity(ndim.min(64));
    for _ in 0..ndim {
        let d = cur.u64("dims")?;
        dims.push(usize::try_from(d).map_err(|_| Error::Format(format!("dimension {d} too large")))?);
    }
    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(size))
        .ok_or_else(|| Error::Format("TBT payload size overflows".into()))?;
    let remaining = body.len() - cur.pos;
    if remaining != n {
        return Err(Error::Format(format!(
            "TBT payload is {remaining} bytes; dims declare {n}"
        )));
    }
    let payload = cur.take(n, "payload")?;
    let shape = IxDyn(&dims);
    let array = match dtype {
        DTYPE_F32 => {
            let v = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            TbtArray::F32(ArrayD::from_shape_vec(shape, v).map_err(|e| Error::Format(e.to_string()))?)
        }
        _ => {
            let v = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            TbtArray::F64(ArrayD::from_shape_vec(shape, v).map_err(|e| Error::Format(e.to_string()))?)
        }
    };
    Ok(array)
}

pub fn write_tbt(path: impl AsRef<Path>, array: &TbtArray) -> Result<()> {
    fs::write(path, encode(array))?;
    Ok(())
}

pub fn read_tbt(path: impl AsRef<Path>) -> Result<TbtArray> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let a = TbtArray::F64(ArrayD::from_shape_vec(IxDyn(&[2, 3]), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let b = encode(&a);
        assert_eq!(&b[..4], b"TBT1");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(b[12..20].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(b[20..28].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(b[28..36].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(b[68..76].try_into().unwrap()), 6.0);
        assert_eq!(b.len(), 28 + 48 + 4);
        assert_eq!(
            u32::from_le_bytes(b[76..].try_into().unwrap()),
            crc32fast::hash(&b[..76])
        );
    }

    #[test]
    fn corruption_detected() {
        let a = TbtArray::F32(ArrayD::from_elem(IxDyn(&[4]), 1.5f32));
        let mut b = encode(&a);
        b[20] ^= 0x01;
        assert!(decode(&b).unwrap_err().to_string().contains("CRC"));
        let mut b = encode(&a);
        b.truncate(b.len() - 1);
        assert!(decode(&b).is_err());
    }

    #[test]
    fn bad_header_fields() {
        let fix = |mut body: Vec<u8>| {
            let crc = crc32fast::hash(&body);
            body.extend_from_slice(&crc.to_le_bytes());
            body
        };
        let mut body = b"TBT1".to_vec();
        body.extend_from_slice(&7u32.to_le_bytes());
        body.extend_from_slice(&0u32.to_le_bytes());
        assert!(decode(&fix(body)).unwrap_err().to_string().contains("dtype"));
        let mut body = b"TBT1".to_vec();
        body.extend_from_slice(&2u32.to_le_bytes());
        body.extend_from_slice(&1u32.to_le_bytes());
        body.extend_from_slice(&3u64.to_le_bytes());
        body.extend_from_slice(&1.0f64.to_le_bytes());
        assert!(decode(&fix(body)).unwrap_err().to_string().contains("declare"));
    }

    proptest! {
        #[test]
        fn round_trip_bit_exact(dims in prop::collection::vec(1usize..5, 0..4), seed in any::<u64>(), f32_type in any::<bool>()) {
            let n: usize = dims.iter().product();
            let vals: Vec<f64> = (0..n).map(|i| f64::from_bits(crate::rng::mix64(seed ^ i as u64))).collect();
            let a = if f32_type {
                TbtArray::F32(ArrayD::from_shape_vec(IxDyn(&dims), vals.iter().map(|&v| f32::from_bits(v.to_bits() as u32)).collect()).unwrap())
            } else {
                TbtArray::F64(ArrayD::from_shape_vec(IxDyn(&dims), vals).unwrap())
            };
            let b = encode(&a);
            let back = decode(&b).unwrap();
            prop_assert_eq!(encode(&back), b);
        }
    }
}
