//! End-to-end blind run on the synthetic text class.
//!
//! Parameters come from environment variables: LAMBDA, MU, MU_BLUR, OUTER,
//! INNER_BLUR, SUPPORT, BSNR, SIZE, STRIDE (training patches), DSTRIDE
//! (denoised patches), ANGLE, TEST_SEED, NOISE_SEED, UNIT_SUM, RECENTER.
//!
//! ```text
//! cargo run --release -p gmm-deblur --example text_demo
//! ```

use std::time::Instant;

use gmm_deblur::fft::cyclic_convolve;
use gmm_deblur::image::{add_noise, extract_patches, isnr, sigma_for_bsnr};
use gmm_deblur::kernel::{gen_motion_linear, KernelSupport};
use gmm_deblur::metrics::kernel_ncc;
use gmm_deblur::synth::text_image;
use gmm_deblur::{blind_deblur, em_fit, nonblind_deblur, DeblurConfig, EmConfig, NoiseSpec, PatchGrid};

fn env(name: &str, default: f64) -> f64 {
    std::env::var(name).map(|s| s.parse().unwrap()).unwrap_or(default)
}

fn main() {
    let size = env("SIZE", 64.0) as usize;
    let t = Instant::now();
    let train_grid = PatchGrid::new(6, env("STRIDE", 2.0) as usize).unwrap();
    let mut patches = Vec::new();
    for seed in 1..=9 {
        patches.extend(extract_patches(&text_image(size, size, seed), &train_grid).unwrap());
    }
    let fit = em_fit(&patches, &EmConfig { num_components: 20, max_iters: 50, seed: 1, ..EmConfig::default() }).unwrap();
    println!("trained on {} patches: {} iters ({:.1?})", patches.len(), fit.iterations(), t.elapsed());

    let clean = text_image(size, size, env("TEST_SEED", 100.0) as u64);
    let kernel = gen_motion_linear(9, 9.0, env("ANGLE", 0.0)).unwrap();
    let blurred = cyclic_convolve(&clean, &kernel).unwrap();
    let sigma = sigma_for_bsnr(&blurred, env("BSNR", 40.0)).unwrap();
    let y = add_noise(&blurred, &NoiseSpec::new(sigma, env("NOISE_SEED", 7.0) as u64).unwrap());

    let mut cfg = DeblurConfig::new(env("LAMBDA", 1e-3), env("MU", 0.05));
    cfg.outer_iters = env("OUTER", 50.0) as usize;
    cfg.inner_blur_iters = env("INNER_BLUR", 2.0) as usize;
    cfg.mu_blur = env("MU_BLUR", 3.0);
    cfg.support = KernelSupport::full(env("SUPPORT", 9.0) as usize).unwrap();
    cfg.grid = PatchGrid::new(6, env("DSTRIDE", 1.0) as usize).unwrap();
    cfg.kernel_unit_sum = env("UNIT_SUM", 1.0) > 0.0;
    cfg.kernel_recenter = env("RECENTER", 1.0) > 0.0;
    let t = Instant::now();
    let nb = nonblind_deblur(&y, &kernel, &fit.gmm, &cfg).unwrap();
    println!("nonblind ISNR {:.3} ({:.1?})", isnr(&clean, &y, &nb).unwrap(), t.elapsed());
    let t = Instant::now();
    let res = blind_deblur(&y, &fit.gmm, &cfg).unwrap();
    println!(
        "blind ISNR {:.3} ncc {:.3} sum {:.3} outer {} ({:.1?})",
        isnr(&clean, &y, &res.image).unwrap(),
        kernel_ncc(&kernel, &res.kernel).unwrap(),
        res.kernel.sum(),
        res.trace.len(),
        t.elapsed()
    );
}
