//! Time-ordered stacks of single-channel float frames.

use ndarray::{s, Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::radiometry::SensorModel;

/// A stack of grayscale frames indexed `(frame, row, col)`.
///
/// Values are nominally in `[0, 1]`; simulation noise may push individual
/// pixels slightly outside, and nothing here clamps them.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub frames: Array3<f64>,
    /// Sensor calibration that maps grayscale back to temperature, when known.
    pub sensor: Option<SensorModel>,
}

impl FrameSequence {
    pub fn new(frames: Array3<f64>) -> Result<Self> {
        let (t, h, w) = frames.dim();
        if t == 0 || h == 0 || w == 0 {
            return Err(Error::invalid("frame sequence", "dimensions must be nonzero"));
        }
        Ok(FrameSequence { frames, sensor: None })
    }

    pub fn with_sensor(mut self, sensor: SensorModel) -> Self {
        self.sensor = Some(sensor);
        self
    }

    pub fn from_frames(frames: &[Array2<f64>]) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("frame sequence", "no frames"))?;
        let (h, w) = first.dim();
        let mut data = Array3::zeros((frames.len(), h, w));
        for (i, f) in frames.iter().enumerate() {
            if f.dim() != (h, w) {
                return Err(Error::mismatch("frame", &[h, w], &[f.nrows(), f.ncols()]));
            }
            data.index_axis_mut(Axis(0), i).assign(f);
        }
        FrameSequence::new(data)
    }

    pub fn len(&self) -> usize {
        self.frames.dim().0
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(height, width)` of each frame.
    pub fn frame_dims(&self) -> (usize, usize) {
        let (_, h, w) = self.frames.dim();
        (h, w)
    }

    pub fn frame(&self, i: usize) -> ArrayView2<'_, f64> {
        self.frames.index_axis(Axis(0), i)
    }

    /// Contiguous frame range `[start, end)` as a new sequence.
    pub fn slice_frames(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::invalid(
                "frame range",
                format!("{start}..{end} outside 0..{}", self.len()),
            ));
        }
        Ok(FrameSequence {
            frames: self.frames.slice(s![start..end, .., ..]).to_owned(),
            sensor: self.sensor,
        })
    }

    /// Per-pixel mean over time (the channel-average-pooled frame).
    pub fn temporal_mean(&self) -> Array2<f64> {
        let (h, w) = self.frame_dims();
        let mut acc = Array2::<f64>::zeros((h, w));
        for f in self.frames.outer_iter() {
            acc += &f;
        }
        acc / self.len() as f64
    }

    pub fn ensure_same_dims(&self, other: &FrameSequence, context: &'static str) -> Result<()> {
        if self.frames.dim() != other.frames.dim() {
            let (a, b, c) = self.frames.dim();
            let (x, y, z) = other.frames.dim();
            return Err(Error::mismatch(context, &[a, b, c], &[x, y, z]));
        }
        Ok(())
    }

    /// Like [`ensure_same_dims`](Self::ensure_same_dims) but ignores the frame count.
    pub fn ensure_same_frame_dims(&self, other: &FrameSequence, context: &'static str) -> Result<()> {
        if self.frame_dims() != other.frame_dims() {
            let (a, b) = self.frame_dims();
            let (x, y) = other.frame_dims();
            return Err(Error::mismatch(context, &[a, b], &[x, y]));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn temporal_mean_of_ramp() {
        let data = Array3::from_shape_fn((4, 2, 3), |(t, _, _)| t as f64);
        let seq = FrameSequence::new(data).unwrap();
        assert!(seq.temporal_mean().iter().all(|&v| (v - 1.5).abs() < 1e-15));
    }

    #[test]
    fn rejects_empty() {
        assert!(FrameSequence::new(Array3::zeros((0, 2, 2))).is_err());
        assert!(FrameSequence::from_frames(&[]).is_err());
    }

    #[test]
    fn slice_bounds() {
        let seq = FrameSequence::new(Array3::zeros((15, 2, 2))).unwrap();
        assert_eq!(seq.slice_frames(2, 13).unwrap().len(), 11);
        assert!(seq.slice_frames(3, 3).is_err());
        assert!(seq.slice_frames(0, 16).is_err());
    }
}
