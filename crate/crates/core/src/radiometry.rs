//! Temperature ↔ radiant exitance ↔ sensor grayscale.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::PhysicalConstants;

/// Linear thermal camera response: `gray = clamp(gain·T + offset)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorModel {
    pub emissivity: f64,
    /// Gray units per kelvin.
    pub gain: f64,
    pub offset: f64,
    pub gray_min: f64,
    pub gray_max: f64,
}

impl Default for SensorModel {
    /// 298.15 K maps to ≈0.045 and 320 K to 0.10, leaving headroom for
    /// warmer scene content.
    fn default() -> Self {
        SensorModel {
            emissivity: 1.0,
            gain: 1.0 / 400.0,
            offset: -0.7,
            gray_min: 0.0,
            gray_max: 1.0,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.emissivity > 0.0 && self.emissivity <= 1.0) {
            return Err(Error::invalid(
                "emissivity",
                format!("{} outside (0, 1]", self.emissivity),
            ));
        }
        if self.gain == 0.0 || !self.gain.is_finite() {
            return Err(Error::invalid("gain", "must be finite and nonzero"));
        }
        if !self.offset.is_finite() {
            return Err(Error::invalid("offset", "must be finite"));
        }
        if !(self.gray_min < self.gray_max) {
            return Err(Error::invalid("gray_min/gray_max", "gray_min must be below gray_max"));
        }
        Ok(())
    }

    /// Unclamped affine response.
    #[inline]
    pub fn gray_unclamped(&self, temp_k: f64) -> f64 {
        self.gain * temp_k + self.offset
    }

    #[inline]
    pub fn gray(&self, temp_k: f64) -> f64 {
        self.gray_unclamped(temp_k).clamp(self.gray_min, self.gray_max)
    }

    #[inline]
    pub fn temp(&self, gray: f64) -> f64 {
        (gray - self.offset) / self.gain
    }
}

/// Radiant exitance `M = ε·σ·T⁴`, W·m⁻².
pub fn radiance_from_temp(temp_k: f64, emissivity: f64) -> Result<f64> {
    if !(temp_k > 0.0) {
        return Err(Error::Domain(format!("temperature {temp_k} K is not positive")));
    }
    check_emissivity(emissivity)?;
    Ok(emissivity * PhysicalConstants::STEFAN_BOLTZMANN * temp_k.powi(4))
}

fn check_emissivity(emissivity: f64) -> Result<()> {
    if !(emissivity > 0.0 && emissivity <= 1.0) {
        return Err(Error::Domain(format!("emissivity {emissivity} outside (0, 1]")));
    }
    Ok(())
}

/// Result of inverting the Stefan-Boltzmann law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiometricTemperature {
    pub kelvin: f64,
    /// Set when the input radiance was zero, giving a nonphysical 0 K.
    pub nonphysical: bool,
}

/// `T = (M / (ε·σ))^(1/4)`.
pub fn temp_from_radiance(radiance: f64, emissivity: f64) -> Result<RadiometricTemperature> {
    if !(radiance >= 0.0) {
        return Err(Error::Domain(format!("radiance {radiance} is negative")));
    }
    check_emissivity(emissivity)?;
    let kelvin = (radiance / (emissivity * PhysicalConstants::STEFAN_BOLTZMANN)).powf(0.25);
    Ok(RadiometricTemperature {
        kelvin,
        nonphysical: radiance == 0.0,
    })
}

pub fn radiance_from_temp_grid(temp: &Array2<f64>, emissivity: f64) -> Result<Array2<f64>> {
    let mut out = Array2::zeros(temp.dim());
    for (o, &t) in out.iter_mut().zip(temp.iter()) {
        *o = radiance_from_temp(t, emissivity)?;
    }
    Ok(out)
}

pub fn temp_from_radiance_grid(radiance: &Array2<f64>, emissivity: f64) -> Result<Array2<f64>> {
    let mut out = Array2::zeros(radiance.dim());
    for (o, &m) in out.iter_mut().zip(radiance.iter()) {
        *o = temp_from_radiance(m, emissivity)?.kelvin;
    }
    Ok(out)
}

pub fn gray_from_temp(temp: &Array2<f64>, sensor: &SensorModel) -> Result<Array2<f64>> {
    sensor.validate()?;
    Ok(temp.mapv(|t| sensor.gray(t)))
}

/// Inverse of the affine response; exact only where [`gray_from_temp`] did not clamp.
pub fn temp_from_gray(gray: &Array2<f64>, sensor: &SensorModel) -> Result<Array2<f64>> {
    sensor.validate()?;
    Ok(gray.mapv(|g| sensor.temp(g)))
}

/// Fraction of blackbody exitance emitted between two wavelengths (m).
///
/// Optional correction for band-limited sensors such as 8–13 µm
/// microbolometers. Nothing in the pipeline applies it by default.
pub fn planck_band_fraction(temp_k: f64, lambda_lo: f64, lambda_hi: f64) -> Result<f64> {
    if !(temp_k > 0.0) {
        return Err(Error::Domain(format!("temperature {temp_k} K is not positive")));
    }
    if !(lambda_lo > 0.0 && lambda_hi > lambda_lo) {
        return Err(Error::Domain("band edges must satisfy 0 < lo < hi".into()));
    }
    const H: f64 = 6.626_070_15e-34;
    const C: f64 = 299_792_458.0;
    const KB: f64 = 1.380_649e-23;
    let exitance = |lambda: f64| {
        let a = 2.0 * std::f64::consts::PI * H * C * C / lambda.powi(5);
        a / ((H * C / (lambda * KB * temp_k)).exp_m1())
    };
    // composite Simpson
    let n = 2000;
    let step = (lambda_hi - lambda_lo) / n as f64;
    let mut sum = exitance(lambda_lo) + exitance(lambda_hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * exitance(lambda_lo + i as f64 * step);
    }
    let band = sum * step / 3.0;
    Ok(band / (PhysicalConstants::STEFAN_BOLTZMANN * temp_k.powi(4)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stefan_boltzmann_hand_value() {
        let m = radiance_from_temp(300.0, 1.0).unwrap();
        assert!((m - 459.300327939).abs() < 1e-6);
        let half = radiance_from_temp(300.0, 0.5).unwrap();
        assert!((half * 2.0 - m).abs() < 1e-12);
        assert!(radiance_from_temp(0.0, 1.0).is_err());
        assert!(radiance_from_temp(300.0, 0.0).is_err());
    }

    #[test]
    fn inverse_law() {
        let t = temp_from_radiance(459.300327939, 1.0).unwrap();
        assert!((t.kelvin - 300.0).abs() < 1e-6);
        assert!(!t.nonphysical);
        let zero = temp_from_radiance(0.0, 1.0).unwrap();
        assert_eq!(zero.kelvin, 0.0);
        assert!(zero.nonphysical);
        assert!(temp_from_radiance(-1.0, 1.0).is_err());
        let t2 = temp_from_radiance(2.0 * 459.300327939, 1.0).unwrap();
        assert!((t2.kelvin / t.kelvin - 2f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn radiance_round_trip_and_monotone() {
        let mut prev = 0.0;
        for i in 1..200 {
            let t = 150.0 + i as f64 * 1.7;
            let m = radiance_from_temp(t, 0.9).unwrap();
            assert!(m > prev);
            prev = m;
            let back = temp_from_radiance(m, 0.9).unwrap().kelvin;
            assert!((back - t).abs() / t < 1e-10);
        }
    }

    #[test]
    fn default_sensor_hand_values() {
        let s = SensorModel::default();
        let g = gray_from_temp(&Array2::from_shape_vec((1, 2), vec![300.0, 320.0]).unwrap(), &s).unwrap();
        assert!((g[[0, 0]] - 0.05).abs() < 1e-12);
        assert!((g[[0, 1]] - 0.10).abs() < 1e-12);
    }

    #[test]
    fn gray_round_trip_unclamped() {
        let s = SensorModel::default();
        let t = Array2::from_shape_fn((8, 8), |(r, c)| 290.0 + r as f64 * 3.1 + c as f64 * 0.7);
        let back = temp_from_gray(&gray_from_temp(&t, &s).unwrap(), &s).unwrap();
        for (a, b) in t.iter().zip(back.iter()) {
            assert!((a - b).abs() / a <= 1e-12);
        }
        let c = gray_from_temp(&Array2::from_elem((4, 4), 305.0), &s).unwrap();
        assert!(c.iter().all(|&v| v == c[[0, 0]]));
    }

    #[test]
    fn clamps_and_rejects_bad_sensor() {
        let s = SensorModel::default();
        assert_eq!(s.gray(10_000.0), 1.0);
        assert_eq!(s.gray(1.0), 0.0);
        let bad = SensorModel { gain: 0.0, ..s };
        assert!(gray_from_temp(&Array2::zeros((1, 1)), &bad).is_err());
        let bad = SensorModel {
            gray_min: 1.0,
            gray_max: 0.0,
            ..s
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn band_fraction_is_a_fraction() {
        let f = planck_band_fraction(300.0, 8e-6, 13e-6).unwrap();
        // roughly a third of a 300 K blackbody lands in 8–13 µm
        assert!(f > 0.3 && f < 0.4, "{f}");
        let all = planck_band_fraction(300.0, 0.5e-6, 1e-3).unwrap();
        assert!((all - 1.0).abs() < 1e-3, "{all}");
    }
}
