use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::TurbulenceField;

/// Whether a measurement had a clean reference sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// No reference; the temporal mean of the input stands in.
    Single,
    /// A reference sequence (e.g. a restoration) was supplied.
    Dual,
}

/// Anything carrying co-registered Cn², CT² and temperature grids.
pub trait FieldTriple {
    fn cn2(&self) -> &Array2<f64>;
    fn ct2(&self) -> &Array2<f64>;
    fn temp(&self) -> &Array2<f64>;
}

/// A measured turbulence-strength field triple at block resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct TsEstimate {
    pub cn2: Array2<f64>,
    pub ct2: Array2<f64>,
    pub temp: Array2<f64>,
    pub mode: InputMode,
    /// Identifier of the component that produced it.
    pub source: String,
}

impl TsEstimate {
    pub fn validate(&self) -> Result<()> {
        let d = self.cn2.dim();
        for (name, g) in [("ct2", &self.ct2), ("temp", &self.temp)] {
            if g.dim() != d {
                return Err(Error::mismatch(name, &[d.0, d.1], &[g.nrows(), g.ncols()]));
            }
        }
        if self
            .cn2
            .iter()
            .chain(self.ct2.iter())
            .any(|&v| !(v >= 0.0) || !v.is_finite())
        {
            return Err(Error::invalid(
                "estimate",
                "Cn² and CT² must be finite and non-negative",
            ));
        }
        if self.temp.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("estimate", "temperature must be finite and positive"));
        }
        Ok(())
    }

    pub fn dim(&self) -> (usize, usize) {
        self.cn2.dim()
    }
}

impl FieldTriple for TsEstimate {
    fn cn2(&self) -> &Array2<f64> {
        &self.cn2
    }
    fn ct2(&self) -> &Array2<f64> {
        &self.ct2
    }
    fn temp(&self) -> &Array2<f64> {
        &self.temp
    }
}

impl FieldTriple for TurbulenceField {
    fn cn2(&self) -> &Array2<f64> {
        &self.cn2
    }
    fn ct2(&self) -> &Array2<f64> {
        &self.ct2
    }
    fn temp(&self) -> &Array2<f64> {
        &self.temp
    }
}
