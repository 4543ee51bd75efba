//! Blind image deblurring with class-adapted Gaussian mixture patch priors.
//!
//! A mixture trained on clean patches of an image class acts as an MMSE
//! denoiser inside an ADMM image step; a second ADMM run estimates a
//! nonnegative, support-limited blur kernel. The two alternate from the
//! observed image and an identity filter.
//!
//! All convolutions are cyclic.

pub mod engine;
pub mod error;
pub mod fft;
pub mod gmm;
pub mod image;
pub mod kernel;
pub mod metrics;
pub mod pgm;
pub mod synth;

pub use engine::{
    blind_deblur, blind_deblur_with, blur_step, image_step, image_step_with, nonblind_deblur,
    nonblind_deblur_with, DeblurConfig, DeblurResult, Denoiser, OuterRecord,
};
pub use error::{Error, Result};
pub use gmm::{em_fit, EmConfig, Gmm};
pub use image::{Image, NoiseSpec, PatchGrid};
pub use kernel::{BlurKernel, KernelSupport};
