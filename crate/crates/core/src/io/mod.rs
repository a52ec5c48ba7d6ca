//! On-disk formats: TBT tensors, PGM/PFM images, field file sets.

mod pfm;
mod pgm;
mod tbt;

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3, Ix2, Ix3};

pub use pfm::{decode_pfm, encode_pfm, read_pfm, write_pfm};
pub use pgm::{decode_pgm, encode_pgm, quantize, read_pgm, write_pgm, BitDepth};
pub use tbt::{decode, encode, read_tbt, write_tbt, TbtArray, DTYPE_F32, DTYPE_F64, MAGIC};

use crate::error::{Error, Result};
use crate::fields::{FieldMetadata, TurbulenceField};
use crate::sequence::FrameSequence;

pub fn write_grid(path: impl AsRef<Path>, grid: &Array2<f64>) -> Result<()> {
    write_tbt(path, &TbtArray::F64(grid.clone().into_dyn()))
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    read_tbt(path)?
        .into_f64()
        .into_dimensionality::<Ix2>()
        .map_err(|_| Error::Format("expected a 2-D tensor".into()))
}

pub fn write_sequence(path: impl AsRef<Path>, seq: &FrameSequence) -> Result<()> {
    write_tbt(path, &TbtArray::F64(seq.frames.clone().into_dyn()))
}

pub fn read_sequence(path: impl AsRef<Path>) -> Result<FrameSequence> {
    let frames: Array3<f64> = read_tbt(path)?
        .into_f64()
        .into_dimensionality::<Ix3>()
        .map_err(|_| Error::Format("expected a 3-D (frames, height, width) tensor".into()))?;
    FrameSequence::new(frames)
}

/// Paths of the files making up a stored field.
pub fn field_paths(dir: &Path, stem: &str) -> [PathBuf; 4] {
    [
        dir.join(format!("{stem}_cn2.tbt")),
        dir.join(format!("{stem}_ct2.tbt")),
        dir.join(format!("{stem}_temp.tbt")),
        dir.join(format!("{stem}.json")),
    ]
}

/// Write a field as three TBT grids plus a JSON metadata sidecar.
pub fn write_field(dir: &Path, stem: &str, field: &TurbulenceField) -> Result<()> {
    let [cn2, ct2, temp, meta] = field_paths(dir, stem);
    write_grid(cn2, &field.cn2)?;
    write_grid(ct2, &field.ct2)?;
    write_grid(temp, &field.temp)?;
    fs::write(meta, serde_json::to_string_pretty(&field.metadata())?)?;
    Ok(())
}

pub fn read_field(dir: &Path, stem: &str) -> Result<TurbulenceField> {
    let [cn2, ct2, temp, meta] = field_paths(dir, stem);
    let meta: FieldMetadata = serde_json::from_str(&fs::read_to_string(meta)?)?;
    let mut field = TurbulenceField::new(
        read_grid(cn2)?,
        read_grid(ct2)?,
        read_grid(temp)?,
        meta.block_size_px,
        meta.pressure_hpa,
        meta.plate_scale_m_per_px,
    )?;
    field.seed = meta.seed;
    Ok(field)
}
