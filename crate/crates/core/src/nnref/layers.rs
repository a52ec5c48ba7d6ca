//! Primitive layers on single frames shaped `(channels, height, width)`.

use ndarray::{Array1, Array2, Array3, Array4, Array5, Axis, Dimension, IntoDimension};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::util::reflect_index;

/// Uniform in `[−1/√fan_in, 1/√fan_in]`.
pub(crate) fn uniform<D: Dimension, Sh: IntoDimension<Dim = D>>(
    shape: Sh,
    fan_in: usize,
    rng: &mut ChaCha8Rng,
) -> ndarray::Array<f32, D> {
    let b = 1.0 / (fan_in.max(1) as f32).sqrt();
    ndarray::Array::from_shape_simple_fn(shape, || rng.random_range(-b..=b))
}

/// Exact GELU, `x·Φ(x)`.
pub fn gelu(x: f32) -> f32 {
    let x = x as f64;
    (0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))) as f32
}

/// Point-wise convolution: a channel-mixing matrix applied at every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1x1 {
    /// `(out, in)`
    pub weight: Array2<f32>,
    pub bias: Option<Array1<f32>>,
}

impl Conv1x1 {
    pub fn zeros(out: usize, input: usize, bias: bool) -> Self {
        Conv1x1 {
            weight: Array2::zeros((out, input)),
            bias: bias.then(|| Array1::zeros(out)),
        }
    }

    pub fn random(out: usize, input: usize, bias: bool, rng: &mut ChaCha8Rng) -> Self {
        Conv1x1 {
            weight: uniform((out, input), input, rng),
            bias: bias.then(|| uniform(out, input, rng)),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_channels(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: &Array3<f32>) -> Result<Array3<f32>> {
        let (c, h, w) = x.dim();
        if c != self.in_channels() {
            return Err(Error::mismatch("1x1 conv input channels", &[self.in_channels()], &[c]));
        }
        let flat = x
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((c, h * w))
            .expect("contiguous");
        let mut y = self.weight.dot(&flat);
        if let Some(b) = &self.bias {
            y += &b.view().insert_axis(Axis(1));
        }
        Ok(y.into_shape_with_order((self.out_channels(), h, w))
            .expect("contiguous"))
    }
}

/// Per-channel 3×3 convolution with mirrored borders, same-size output.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthwiseConv3 {
    /// `(channels, 3, 3)`
    pub weight: Array3<f32>,
}

impl DepthwiseConv3 {
    pub fn zeros(channels: usize) -> Self {
        DepthwiseConv3 {
            weight: Array3::zeros((channels, 3, 3)),
        }
    }

    pub fn random(channels: usize, rng: &mut ChaCha8Rng) -> Self {
        DepthwiseConv3 {
            weight: uniform((channels, 3, 3), 9, rng),
        }
    }

    pub fn channels(&self) -> usize {
        self.weight.len_of(Axis(0))
    }

    pub fn forward(&self, x: &Array3<f32>) -> Result<Array3<f32>> {
        let (c, h, w) = x.dim();
        if c != self.channels() {
            return Err(Error::mismatch("depth-wise conv channels", &[self.channels()], &[c]));
        }
        let mut out = Array3::zeros((c, h, w));
        for ch in 0..c {
            let k = self.weight.index_axis(Axis(0), ch);
            let src = x.index_axis(Axis(0), ch);
            let mut dst = out.index_axis_mut(Axis(0), ch);
            for r in 0..h {
                let rows = [-1isize, 0, 1].map(|o| reflect_index(r as isize + o, h));
                for col in 0..w {
                    let cols = [-1isize, 0, 1].map(|o| reflect_index(col as isize + o, w));
                    let mut acc = 0.0f32;
                    for (i, &rr) in rows.iter().enumerate() {
                        for (j, &cc) in cols.iter().enumerate() {
                            acc += k[[i, j]] * src[[rr, cc]];
                        }
                    }
                    dst[[r, col]] = acc;
                }
            }
        }
        Ok(out)
    }
}

/// Normalizes across channels at each pixel, then applies a per-channel
/// scale and shift.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Array1<f32>,
    pub beta: Array1<f32>,
    pub eps: f32,
}

impl LayerNorm {
    pub const EPS: f32 = 1e-5;

    pub fn identity(channels: usize) -> Self {
        LayerNorm {
            gamma: Array1::ones(channels),
            beta: Array1::zeros(channels),
            eps: Self::EPS,
        }
    }

    pub fn zeros(channels: usize) -> Self {
        LayerNorm {
            gamma: Array1::zeros(channels),
            beta: Array1::zeros(channels),
            eps: Self::EPS,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward(&self, x: &Array3<f32>) -> Result<Array3<f32>> {
        let (c, h, w) = x.dim();
        if c != self.channels() {
            return Err(Error::mismatch("layer norm channels", &[self.channels()], &[c]));
        }
        let mut out = Array3::zeros((c, h, w));
        for r in 0..h {
            for col in 0..w {
                let px = x.slice(ndarray::s![.., r, col]);
                let mean = px.iter().map(|&v| v as f64).sum::<f64>() / c as f64;
                let var = px.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / c as f64;
                let inv = 1.0 / (var + self.eps as f64).sqrt();
                for ch in 0..c {
                    let n = ((px[ch] as f64 - mean) * inv) as f32;
                    out[[ch, r, col]] = n * self.gamma[ch] + self.beta[ch];
                }
            }
        }
        Ok(out)
    }
}

/// 3×3×3 convolution over `(frames, channels, height, width)`, stride 1 in
/// time and 2 in space, zero padding 1, followed by GELU.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3dDown {
    /// `(out, in, 3, 3, 3)` indexed `(o, i, dt, dy, dx)`.
    pub weight: Array5<f32>,
    pub bias: Array1<f32>,
}

impl Conv3dDown {
    pub fn zeros(out: usize, input: usize) -> Self {
        Conv3dDown {
            weight: Array5::zeros((out, input, 3, 3, 3)),
            bias: Array1::zeros(out),
        }
    }

    pub fn random(out: usize, input: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = input * 27;
        Conv3dDown {
            weight: uniform((out, input, 3, 3, 3), fan_in, rng),
            bias: uniform(out, fan_in, rng),
        }
    }

    pub fn out_size(n: usize) -> usize {
        (n - 1) / 2 + 1
    }

    pub fn forward(&self, x: &Array4<f32>) -> Result<Array4<f32>> {
        let (l, c, h, w) = x.dim();
        let (co, ci) = (self.weight.len_of(Axis(0)), self.weight.len_of(Axis(1)));
        if c != ci {
            return Err(Error::mismatch("3-D conv input channels", &[ci], &[c]));
        }
        let (oh, ow) = (Self::out_size(h), Self::out_size(w));
        let mut out = Array4::zeros((l, co, oh, ow));
        for t in 0..l {
            for o in 0..co {
                for r in 0..oh {
                    for col in 0..ow {
                        let mut acc = self.bias[o];
                        for dt in 0..3 {
                            let tt = t as isize + dt as isize - 1;
                            if tt < 0 || tt >= l as isize {
                                continue;
                            }
                            for i in 0..c {
                                for dy in 0..3 {
                                    let y = (2 * r) as isize + dy as isize - 1;
                                    if y < 0 || y >= h as isize {
                                        continue;
                                    }
                                    for dx in 0..3 {
                                        let xx = (2 * col) as isize + dx as isize - 1;
                                        if xx < 0 || xx >= w as isize {
                                            continue;
                                        }
                                        acc += self.weight[[o, i, dt, dy, dx]]
                                            * x[[tt as usize, i, y as usize, xx as usize]];
                                    }
                                }
                            }
                        }
                        out[[t, o, r, col]] = gelu(acc);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Nearest-neighbour spatial upsampling by an integer factor.
pub fn upsample_nearest(x: &Array3<f32>, factor: usize) -> Array3<f32> {
    let (c, h, w) = x.dim();
    Array3::from_shape_fn((c, h * factor, w * factor), |(ch, r, col)| {
        x[[ch, r / factor, col / factor]]
    })
}

/// Mean over non-overlapping `factor × factor` windows.
pub fn avg_pool(x: &Array3<f32>, factor: usize) -> Result<Array3<f32>> {
    let (c, h, w) = x.dim();
    if factor == 0 || h % factor != 0 || w % factor != 0 {
        return Err(Error::invalid(
            "pooling",
            format!("{h}×{w} is not divisible by {factor}"),
        ));
    }
    let n = (factor * factor) as f32;
    Ok(Array3::from_shape_fn((c, h / factor, w / factor), |(ch, r, col)| {
        x.slice(ndarray::s![
            ch,
            r * factor..(r + 1) * factor,
            col * factor..(col + 1) * factor
        ])
        .sum()
            / n
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn conv1x1_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conv = Conv1x1::random(3, 2, true, &mut rng);
        let x = uniform((2, 4, 5), 1, &mut rng);
        let y = conv.forward(&x).unwrap();
        for o in 0..3 {
            for r in 0..4 {
                for c in 0..5 {
                    let want = conv.bias.as_ref().unwrap()[o]
                        + (0..2).map(|i| conv.weight[[o, i]] * x[[i, r, c]]).sum::<f32>();
                    assert!((y[[o, r, c]] - want).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn depthwise_reflects_borders() {
        let mut dw = DepthwiseConv3::zeros(1);
        dw.weight[[0, 0, 1]] = 1.0; // picks the pixel above
        let x = Array3::from_shape_fn((1, 3, 2), |(_, r, c)| (r * 2 + c) as f32);
        let y = dw.forward(&x).unwrap();
        assert_eq!(y[[0, 0, 0]], x[[0, 1, 0]]);
        assert_eq!(y[[0, 2, 1]], x[[0, 1, 1]]);
    }

    #[test]
    fn layer_norm_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Array3<f32> = uniform((6, 3, 3), 1, &mut rng);
        let y = LayerNorm::identity(6).forward(&x).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let px = y.slice(ndarray::s![.., r, c]);
                let m = px.sum() / 6.0;
                let v = px.iter().map(|v| (v - m).powi(2)).sum::<f32>() / 6.0;
                assert!(m.abs() < 1e-5 && (v - 1.0).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn gelu_reference_points() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(1.0) - 0.841_344_7).abs() < 1e-6);
        assert!((gelu(-1.0) + 0.158_655_26).abs() < 1e-6);
    }

    #[test]
    fn conv3d_shapes_and_bias() {
        let mut conv = Conv3dDown::zeros(2, 1);
        conv.bias[1] = 1.0;
        let y = conv.forward(&Array4::ones((3, 1, 9, 8))).unwrap();
        assert_eq!(y.dim(), (3, 2, 5, 4));
        assert!(y.index_axis(Axis(1), 1).iter().all(|&v| (v - gelu(1.0)).abs() < 1e-7));
    }
}
