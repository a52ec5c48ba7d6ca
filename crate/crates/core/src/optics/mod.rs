//! Phase screens, wave-optics propagation, and the image-domain
//! tilt/blur/noise degradation used to build turbulent sequences.

mod degrade;
mod propagate;
mod screen;
mod thermal;

pub use degrade::{degrade_sequence, DegradationConfig};
pub use propagate::{point_source_psf, propagate, split_step, ComplexField};
pub use screen::{fried_parameter, kolmogorov_structure, make_phase_screen, structure_function, PhaseScreen};
pub use thermal::{add_thermal_fluctuations, thermal_fluctuations, ThermalSynth};
