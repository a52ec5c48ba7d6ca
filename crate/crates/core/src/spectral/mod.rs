//! Frequency-domain transforms, objective terms and evaluation metrics.

mod dft;
mod loss;
mod metrics;

pub use dft::{dft2, dft2_complex, idft2, Fft2, Spectrum};
pub use loss::{
    loss_cn2, loss_feature, loss_l1, loss_p, loss_physic, loss_physic_with, total_losses, FeatureExtractor,
    IdentityFeatures, LossBreakdown, LossInputs, LossWeights, PhysicMode,
};
pub use metrics::{
    gaussian_taps, metrics_field, metrics_image, mse, nrmse, psnr, ssim, ssim_map, FieldMetrics, ImageMetrics, SSIM_K1,
    SSIM_K2, SSIM_SIGMA, SSIM_WINDOW,
};
