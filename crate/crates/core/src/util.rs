use ndarray::Array2;

use crate::spectral::gaussian_taps;

/// Mirror an out-of-range index back into `0..n` without repeating the edge
/// sample (`-1 → 1`, `n → n-2`).
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}

/// Separable Gaussian blur with mirrored borders; the kernel spans ±3σ.
pub fn gaussian_blur_reflect(img: &Array2<f64>, sigma: f64) -> Array2<f64> {
    if sigma <= 0.0 {
        return img.clone();
    }
    let half = (3.0 * sigma).ceil() as usize;
    let taps = gaussian_taps(2 * half + 1, sigma);
    let (h, w) = img.dim();
    let rows = Array2::from_shape_fn((h, w), |(r, c)| {
        taps.iter()
            .enumerate()
            .map(|(i, t)| t * img[[r, reflect_index(c as isize + i as isize - half as isize, w)]])
            .sum::<f64>()
    });
    Array2::from_shape_fn((h, w), |(r, c)| {
        taps.iter()
            .enumerate()
            .map(|(i, t)| t * rows[[reflect_index(r as isize + i as isize - half as isize, h), c]])
            .sum::<f64>()
    })
}
