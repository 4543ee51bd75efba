use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use gmm_deblur::engine::{run_report, DenoiserContext, DenoiserRegistry};
use gmm_deblur::fft::cyclic_convolve;
use gmm_deblur::gmm::{load_gmm, save_gmm};
use gmm_deblur::image::{add_noise, extract_patches, isnr_cropped, measure_bsnr, sigma_for_bsnr};
use gmm_deblur::kernel::{load_kernel, save_kernel, KernelRegistry};
use gmm_deblur::metrics::{kernel_mse, kernel_ncc};
use gmm_deblur::pgm::{load_image, save_image};
use gmm_deblur::synth::ImageClass;
use gmm_deblur::{
    blind_deblur_with, em_fit, nonblind_deblur_with, BlurKernel, DeblurConfig, EmConfig, Error, Image,
    KernelSupport, NoiseSpec, PatchGrid,
};
use log::info;

use crate::{BlurArgs, DeblurArgs, EvalArgs, SynthArgs, TrainArgs};

pub const USAGE: u8 = 2;
pub const TRAINING: u8 = 3;
pub const DIVERGENCE: u8 = 4;

pub const SIDECAR_FORMAT_VERSION: u32 = 1;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(msg: impl Display) -> Self {
        Self { code: USAGE, message: msg.to_string() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Diverged { .. } => DIVERGENCE,
            _ => USAGE,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult = Result<(), CliError>;

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn pgm_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::usage(format!("cannot read {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    files.sort();
    Ok(files)
}

pub fn train(a: &TrainArgs) -> CliResult {
    let grid = PatchGrid::new(a.patch_size, a.stride)?;
    let files = pgm_files(&a.input_dir)?;
    if files.is_empty() {
        return Err(CliError::usage(format!("no .pgm images in {}", a.input_dir.display())));
    }
    let mut patches = Vec::new();
    for f in &files {
        patches.extend(extract_patches(&load_image(f)?, &grid)?);
    }
    info!("{} patches from {} images", patches.len(), files.len());
    let cfg = EmConfig {
        num_components: a.components,
        max_iters: a.max_iters,
        tol: a.tol,
        cov_floor: a.cov_floor,
        seed: a.seed,
    };
    cfg.validate()?;
    let fit = em_fit(&patches, &cfg).map_err(|e| CliError { code: TRAINING, message: e.to_string() })?;
    save_gmm(&fit.gmm, &a.out)?;
    println!(
        "final_log_likelihood={:.9} components={} dim={} iterations={} converged={} images={} patches={}",
        fit.final_log_likelihood(),
        fit.gmm.num_components(),
        fit.gmm.dim(),
        fit.iterations(),
        fit.converged,
        files.len(),
        patches.len()
    );
    Ok(())
}

fn parse_bsnr(text: &str) -> Result<f64, CliError> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::usage(format!("invalid --bsnr '{text}' (a number of dB or 'inf')"))),
    }
}

pub fn blur(a: &BlurArgs) -> CliResult {
    let bsnr = parse_bsnr(&a.bsnr)?;
    let (kernel, source) = match (&a.kernel_spec, &a.kernel_file) {
        (Some(spec), _) => (KernelRegistry::with_builtin().build_str(spec)?, ("kernel_spec", spec.clone())),
        (None, Some(path)) => (load_kernel(path)?, ("kernel_file", path.display().to_string())),
        (None, None) => return Err(CliError::usage("one of --kernel-spec or --kernel-file is required")),
    };
    let clean = load_image(&a.input)?;
    let blurred = cyclic_convolve(&clean, &kernel)?;
    let sigma = sigma_for_bsnr(&blurred, bsnr)?;
    let noisy = add_noise(&blurred, &NoiseSpec::new(sigma, a.seed)?);
    save_image(&noisy, &a.out)?;
    if let Some(path) = &a.out_kernel {
        save_kernel(&kernel, path)?;
    }
    let measured = if sigma > 0.0 { measure_bsnr(&blurred, &noisy)? } else { f64::INFINITY };
    let meta = [
        ("format_version", SIDECAR_FORMAT_VERSION.to_string()),
        ("input", a.input.display().to_string()),
        source,
        ("kernel_size", kernel.size().to_string()),
        ("bsnr_db", format!("{bsnr:?}")),
        ("bsnr_measured_db", format!("{measured:?}")),
        ("sigma", format!("{sigma:?}")),
        ("seed", a.seed.to_string()),
        ("out", a.out.display().to_string()),
        ("out_kernel", a.out_kernel.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
    ];
    let text: String = meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    write_text(&a.meta.clone().unwrap_or_else(|| with_suffix(&a.out, ".meta")), &text)?;
    println!("sigma={sigma:.9} bsnr_db={bsnr} kernel_size={}", kernel.size());
    Ok(())
}

pub fn deblur(a: &DeblurArgs) -> CliResult {
    let y = load_image(&a.input)?;
    let grid = PatchGrid::new(6, a.patch_stride)?;
    let gmm = match &a.model {
        Some(path) => {
            let gmm = load_gmm(path)?;
            let side = (gmm.dim() as f64).sqrt().round() as usize;
            if side * side != gmm.dim() {
                return Err(CliError::usage(format!("model dimension {} is not a square patch", gmm.dim())));
            }
            Some(Arc::new(gmm))
        }
        None => None,
    };
    let grid = match &gmm {
        Some(g) => PatchGrid::new((g.dim() as f64).sqrt().round() as usize, a.patch_stride)?,
        None => grid,
    };
    let denoiser = DenoiserRegistry::with_builtin().create(&a.denoiser, &DenoiserContext { gmm, grid: &grid })?;

    let mut cfg = DeblurConfig::new(a.lambda, a.mu_image);
    cfg.mu_blur = a.mu_blur;
    cfg.inner_image_iters = a.inner_image;
    cfg.inner_blur_iters = a.inner_blur;
    cfg.outer_iters = a.outer;
    cfg.outer_tol = a.outer_tol;
    cfg.support = KernelSupport::full(a.support)?;
    cfg.grid = grid;
    cfg.kernel_unit_sum = a.unit_sum_kernel;
    cfg.kernel_recenter = a.recenter_kernel;
    cfg.validate()?;

    let start = Instant::now();
    let mut extra = vec![
        ("input", a.input.display().to_string()),
        ("model", a.model.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
        ("denoiser", a.denoiser.clone()),
    ];
    let report = with_suffix(&a.out, ".report");
    let report = a.report.as_deref().unwrap_or(&report);
    let (image, kernel, trace) = match &a.known_kernel {
        Some(path) => {
            let kernel = load_kernel(path)?;
            extra.insert(0, ("mode", "nonblind".to_string()));
            extra.push(("known_kernel", path.display().to_string()));
            let image = nonblind_deblur_with(&y, &kernel, denoiser.as_ref(), &cfg).map_err(|e| {
                divergence_report(&e, &cfg, &extra, report);
                CliError::from(e)
            })?;
            (image, kernel, Vec::new())
        }
        None => {
            extra.insert(0, ("mode", "blind".to_string()));
            let res = blind_deblur_with(&y, denoiser.as_ref(), &cfg).map_err(|e| {
                divergence_report(&e, &cfg, &extra, report);
                CliError::from(e)
            })?;
            (res.image, res.kernel, res.trace)
        }
    };
    let kernel = if a.normalize_kernel { kernel.normalized() } else { kernel };
    extra.push(("normalize_kernel", a.normalize_kernel.to_string()));
    save_image(&image, &a.out)?;
    if let Some(path) = &a.out_kernel {
        save_kernel(&kernel, path)?;
    }
    write_text(report, &run_report(&cfg, &trace, &extra))?;
    eprintln!("wall_time_s={:.3}", start.elapsed().as_secs_f64());
    println!("outer_executed={} kernel_sum={:.9}", trace.len(), kernel.sum());
    Ok(())
}

/// On divergence, still writes the report with the partial trace.
fn divergence_report(e: &Error, cfg: &DeblurConfig, extra: &[(&str, String)], path: &Path) {
    if let Error::Diverged { stage, outer, inner, trace } = e {
        let mut extra = extra.to_vec();
        extra.push(("diverged", format!("{stage} outer={outer} inner={inner}")));
        let _ = fs::write(path, run_report(cfg, trace, &extra));
    }
}

fn same_size(a: &Image, b: &Image, what: &str) -> CliResult {
    if a.same_dims(b) {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "{what} is {}x{} but the clean image is {}x{}",
            b.height(),
            b.width(),
            a.height(),
            a.width()
        )))
    }
}

pub fn eval(a: &EvalArgs) -> CliResult {
    let clean = load_image(&a.clean)?;
    let degraded = load_image(&a.degraded)?;
    let restored = load_image(&a.restored)?;
    same_size(&clean, &degraded, "degraded image")?;
    same_size(&clean, &restored, "restored image")?;
    let isnr = isnr_cropped(&clean, &degraded, &restored, a.crop)?;
    let mut line = format!("isnr_db={isnr:.9}");
    if let (Some(t), Some(e)) = (&a.true_kernel, &a.est_kernel) {
        let (t, e): (BlurKernel, BlurKernel) = (load_kernel(t)?, load_kernel(e)?);
        line.push_str(&format!(" kernel_mse={:.9e} kernel_ncc={:.9}", kernel_mse(&t, &e)?, kernel_ncc(&t, &e)?));
    }
    println!("{line}");
    Ok(())
}

pub fn synth(a: &SynthArgs) -> CliResult {
    let class = ImageClass::parse(&a.class)?;
    if a.height == 0 || a.width == 0 {
        return Err(CliError::usage("image dimensions must be positive"));
    }
    fs::create_dir_all(&a.out_dir)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", a.out_dir.display())))?;
    for seed in a.seed..a.seed + a.count {
        let path = a.out_dir.join(format!("{}_{seed}.pgm", class.name()));
        save_image(&class.generate(a.height, a.width, seed), &path)?;
        println!("{}", path.display());
    }
    Ok(())
}
