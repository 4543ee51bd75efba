//! Alternating blind deconvolution. The outer loop alternates an image step
//! (ADMM with a plug-in denoiser for the prior) and a blur step (ADMM with
//! projection onto the kernel support set), each warm-started from the
//! previous outer iteration.

mod admm;
mod denoiser;
mod report;

use std::sync::Arc;
use std::time::{Duration, Instant};

use log::info;

pub use admm::AdmmState;
pub use report::{run_report, REPORT_FORMAT_VERSION};
pub use denoiser::{
    Denoiser, DenoiserContext, DenoiserFactory, DenoiserRegistry, GmmDenoiser, IdentityDenoiser,
};

use crate::error::{Error, Result};
use crate::fft::{embed_kernel, extract_kernel, Fft2, QuadSolver};
use crate::gmm::Gmm;
use crate::image::{Image, PatchGrid};
use crate::kernel::{project_support, BlurKernel, KernelSupport};

#[derive(Clone, Debug, PartialEq)]
pub struct DeblurConfig {
    /// Regularization weight. The denoiser runs at variance `lambda / mu_image`.
    pub lambda: f64,
    pub mu_image: f64,
    pub mu_blur: f64,
    pub inner_image_iters: usize,
    pub inner_blur_iters: usize,
    pub outer_iters: usize,
    /// Stop early once both relative iterate changes fall below this. Zero
    /// disables the test.
    pub outer_tol: f64,
    pub support: KernelSupport,
    pub grid: PatchGrid,
    /// Rescale the kernel to unit sum after every blur step of the blind
    /// loop. Off by default.
    pub kernel_unit_sum: bool,
    /// Shift the kernel by the rounded offset of its centroid after every
    /// blur step of the blind loop, rolling the image estimate the opposite
    /// way so that their convolution is unchanged. Off by default.
    pub kernel_recenter: bool,
}

impl DeblurConfig {
    /// Defaults: 20 image iterations, 2 blur iterations, `mu_blur = 0.01`,
    /// 50 outer iterations, tolerance 1e-4, full 15x15 support, 6x6 patches.
    pub fn new(lambda: f64, mu_image: f64) -> Self {
        Self {
            lambda,
            mu_image,
            mu_blur: 0.01,
            inner_image_iters: 20,
            inner_blur_iters: 2,
            outer_iters: 50,
            outer_tol: 1e-4,
            support: KernelSupport::full(15).expect("15 is odd"),
            grid: PatchGrid::default(),
            kernel_unit_sum: false,
            kernel_recenter: false,
        }
    }

    pub fn denoiser_variance(&self) -> f64 {
        self.lambda / self.mu_image
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("mu_image", self.mu_image),
            ("mu_blur", self.mu_blur),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.outer_tol >= 0.0) {
            return Err(Error::invalid("outer_tol must be nonnegative"));
        }
        Ok(())
    }
}

/// Relative iterate changes of one outer iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuterRecord {
    pub iteration: usize,
    pub image_change: f64,
    pub kernel_change: f64,
}

#[derive(Clone, Debug)]
pub struct DeblurResult {
    pub image: Image,
    pub kernel: BlurKernel,
    pub trace: Vec<OuterRecord>,
    pub wall_time: Duration,
}

fn check_sizes(y: &Image, support: usize) -> Result<()> {
    if support > y.height() || support > y.width() {
        return Err(Error::invalid(format!(
            "kernel support {support} does not fit a {}x{} image",
            y.height(),
            y.width()
        )));
    }
    Ok(())
}

fn diverged(stage: &'static str, inner: usize) -> Error {
    Error::Diverged {
        stage,
        outer: 0,
        inner,
        trace: Vec::new(),
    }
}

/// Image estimate with the kernel held fixed: ADMM on
/// `1/2 ||y - H x||^2 + lambda phi(x)`, with the proximity operator of
/// `phi` replaced by `denoiser` at variance `lambda / mu_image`. Returns the
/// last denoised iterate `v`.
pub fn image_step_with(
    y: &Image,
    kernel: &BlurKernel,
    init: &Image,
    denoiser: &dyn Denoiser,
    cfg: &DeblurConfig,
) -> Result<Image> {
    cfg.validate()?;
    if !init.same_dims(y) {
        return Err(Error::invalid("initial image and observation differ in size"));
    }
    let fft = Fft2::new(y.height(), y.width());
    let otf = fft.psf_to_otf(kernel)?;
    let solver = QuadSolver::new(fft, &otf, y, cfg.mu_image)?;
    let sigma2 = cfg.denoiser_variance();
    let mut st = AdmmState::new(init.clone(), cfg.mu_image);
    for it in 0..cfg.inner_image_iters {
        st.step(|w| Ok(solver.solve(w)), |u| denoiser.denoise(u, sigma2))?;
        if !st.is_finite() {
            return Err(diverged("image", it));
        }
    }
    Ok(st.v)
}

pub fn image_step(y: &Image, kernel: &BlurKernel, init: &Image, gmm: &Gmm, cfg: &DeblurConfig) -> Result<Image> {
    let denoiser = GmmDenoiser::new(Arc::new(gmm.clone()), cfg.grid)?;
    image_step_with(y, kernel, init, &denoiser, cfg)
}

/// Kernel estimate with the image held fixed: ADMM on
/// `1/2 ||y - X h||^2 + indicator_S(h)` where `X` is cyclic convolution by
/// `image` and `h` lives embedded at image size. The v-update projects the
/// support window onto `S`.
pub fn blur_step(y: &Image, image: &Image, init: &BlurKernel, cfg: &DeblurConfig) -> Result<BlurKernel> {
    cfg.validate()?;
    let support = &cfg.support;
    let k = support.size();
    if init.size() != k {
        return Err(Error::invalid(format!(
            "initial kernel size {} differs from support size {k}",
            init.size()
        )));
    }
    if !image.same_dims(y) {
        return Err(Error::invalid("image estimate and observation differ in size"));
    }
    check_sizes(y, k)?;
    let (h, w) = y.dims();
    let fft = Fft2::new(h, w);
    let otf = fft.otf_of_image(image);
    let solver = QuadSolver::new(fft, &otf, y, cfg.mu_blur)?;
    let v0 = Image::from_raw(h, w, embed_kernel(init.values(), k, h, w)?);
    let mut st = AdmmState::new(v0, cfg.mu_blur);
    let mut kernel = init.clone();
    for it in 0..cfg.inner_blur_iters {
        st.step(
            |v_plus_d| Ok(solver.solve(v_plus_d)),
            |u| {
                kernel = project_support(&extract_kernel(u.pixels(), k, h, w), support)?;
                Ok(Image::from_raw(h, w, embed_kernel(kernel.values(), k, h, w)?))
            },
        )?;
        if !st.is_finite() {
            return Err(diverged("blur", it));
        }
    }
    Ok(kernel)
}

/// Rounded offset of the kernel centroid from the window center, or `None`
/// for an all-zero kernel.
fn centroid_offset(kernel: &BlurKernel) -> Option<(i64, i64)> {
    let k = kernel.size();
    let c = kernel.center() as f64;
    let (mut m, mut mr, mut mc) = (0.0, 0.0, 0.0);
    for r in 0..k {
        for col in 0..k {
            let v = kernel.get(r, col);
            m += v;
            mr += v * r as f64;
            mc += v * col as f64;
        }
    }
    (m > 0.0).then(|| ((mr / m - c).round() as i64, (mc / m - c).round() as i64))
}

/// Moves kernel content by `-s` inside its window (mass leaving the window is
/// dropped) and rolls the image by `+s`, which leaves the cyclic convolution
/// of the two unchanged up to the dropped mass.
fn recenter(kernel: &BlurKernel, image: &Image, s: (i64, i64)) -> Result<(BlurKernel, Image)> {
    let k = kernel.size() as i64;
    let mut values = vec![0.0; (k * k) as usize];
    for r in 0..k {
        for c in 0..k {
            let (sr, sc) = (r + s.0, c + s.1);
            if (0..k).contains(&sr) && (0..k).contains(&sc) {
                values[(r * k + c) as usize] = kernel.get(sr as usize, sc as usize);
            }
        }
    }
    let (h, w) = (image.height() as i64, image.width() as i64);
    let rolled = Image::from_fn(image.height(), image.width(), |r, c| {
        image.get(
            (r as i64 - s.0).rem_euclid(h) as usize,
            (c as i64 - s.1).rem_euclid(w) as usize,
        )
    });
    Ok((BlurKernel::new(kernel.size(), values)?, rolled))
}

fn relative_change(new: &[f64], old: &[f64]) -> f64 {
    let diff: f64 = new.iter().zip(old).map(|(a, b)| (a - b) * (a - b)).sum();
    let base: f64 = old.iter().map(|a| a * a).sum();
    if base == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (diff / base).sqrt()
    }
}

/// Joint image and kernel estimate from a single observation, starting from
/// `x = y` and the identity filter. `lambda` is held fixed.
pub fn blind_deblur_with(y: &Image, denoiser: &dyn Denoiser, cfg: &DeblurConfig) -> Result<DeblurResult> {
    cfg.validate()?;
    let start = Instant::now();
    let k = cfg.support.size();
    check_sizes(y, k)?;
    let mut image = y.clone();
    let mut kernel = BlurKernel::delta(k)?;
    let mut trace = Vec::new();
    for outer in 0..cfg.outer_iters {
        let attach = |e: Error, trace: &Vec<OuterRecord>| match e {
            Error::Diverged { stage, inner, .. } => Error::Diverged {
                stage,
                outer,
                inner,
                trace: trace.clone(),
            },
            other => other,
        };
        let new_image =
            image_step_with(y, &kernel, &image, denoiser, cfg).map_err(|e| attach(e, &trace))?;
        let mut new_image = new_image;
        let mut new_kernel = blur_step(y, &new_image, &kernel, cfg).map_err(|e| attach(e, &trace))?;
        if cfg.kernel_recenter {
            if let Some(s) = centroid_offset(&new_kernel).filter(|&s| s != (0, 0)) {
                (new_kernel, new_image) = recenter(&new_kernel, &new_image, s)?;
            }
        }
        if cfg.kernel_unit_sum && new_kernel.sum() > 0.0 {
            new_kernel = new_kernel.normalized();
        }
        let rec = OuterRecord {
            iteration: outer,
            image_change: relative_change(new_image.pixels(), image.pixels()),
            kernel_change: relative_change(new_kernel.values(), kernel.values()),
        };
        info!(
            "outer {outer}: image change {:.3e}, kernel change {:.3e}",
            rec.image_change, rec.kernel_change
        );
        image = new_image;
        kernel = new_kernel;
        trace.push(rec);
        if cfg.outer_tol > 0.0 && rec.image_change < cfg.outer_tol && rec.kernel_change < cfg.outer_tol {
            break;
        }
    }
    Ok(DeblurResult {
        image,
        kernel,
        trace,
        wall_time: start.elapsed(),
    })
}

pub fn blind_deblur(y: &Image, gmm: &Gmm, cfg: &DeblurConfig) -> Result<DeblurResult> {
    let denoiser = GmmDenoiser::new(Arc::new(gmm.clone()), cfg.grid)?;
    blind_deblur_with(y, &denoiser, cfg)
}

/// Image step alone with a known kernel, initialized at `y`.
pub fn nonblind_deblur_with(
    y: &Image,
    kernel: &BlurKernel,
    denoiser: &dyn Denoiser,
    cfg: &DeblurConfig,
) -> Result<Image> {
    image_step_with(y, kernel, y, denoiser, cfg)
}

pub fn nonblind_deblur(y: &Image, kernel: &BlurKernel, gmm: &Gmm, cfg: &DeblurConfig) -> Result<Image> {
    image_step(y, kernel, y, gmm, cfg)
}
