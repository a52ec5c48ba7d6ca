use ndarray::{Array3, Array4, ArrayView3, Axis};

use crate::error::{Error, Result};
use crate::sequence::FrameSequence;

/// `(frames, channels, height, width)` activations in f32.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub data: Array4<f32>,
}

impl Tensor4 {
    pub fn new(data: Array4<f32>) -> Result<Self> {
        if data.shape().contains(&0) {
            return Err(Error::invalid(
                "tensor",
                format!("dimensions {:?} must all be positive", data.shape()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("tensor", "entries must be finite"));
        }
        Ok(Tensor4 { data })
    }

    pub fn from_frame(frame: Array3<f32>) -> Result<Self> {
        Tensor4::new(frame.insert_axis(Axis(0)))
    }

    pub fn from_frames(frames: &[Array3<f32>]) -> Result<Self> {
        let views: Vec<ArrayView3<'_, f32>> = frames.iter().map(|f| f.view()).collect();
        let data = ndarray::stack(Axis(0), &views).map_err(|e| Error::invalid("frames", e.to_string()))?;
        Tensor4::new(data)
    }

    /// One channel per frame.
    pub fn from_sequence(seq: &FrameSequence) -> Result<Self> {
        Tensor4::new(seq.frames.mapv(|v| v as f32).insert_axis(Axis(1)))
    }

    /// `(frames, channels, height, width)`
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        self.data.dim()
    }

    pub fn frames(&self) -> usize {
        self.data.len_of(Axis(0))
    }

    pub fn channels(&self) -> usize {
        self.data.len_of(Axis(1))
    }

    pub fn frame(&self, i: usize) -> ArrayView3<'_, f32> {
        self.data.index_axis(Axis(0), i)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
