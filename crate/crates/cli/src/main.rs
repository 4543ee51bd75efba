//! `gmm-deblur` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 training failure,
//! 4 divergence.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

const KERNEL_SPEC_HELP: &str = "\
Kernel specs have the form FAMILY[:key=value,...]. Every family accepts
k=<odd size> (default 15). Families:
  delta                   identity filter
  gaussian:sigma=S        isotropic Gaussian
  motion:len=L,angle=A    straight motion path, angle in degrees
  disk:radius=R           out-of-focus disk
  uniform:w=W             W x W box (default W = k)
  nonlinear:steps=N,seed=S  random smooth motion path
Example: motion:len=9,angle=45,k=11";

#[derive(Parser, Debug)]
#[command(name = "gmm-deblur", version, about = "Class-adapted blind deblurring with a GMM patch prior")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a GMM patch prior to a directory of PGM images.
    Train(TrainArgs),
    /// Blur an image with a kernel and add noise at a target BSNR.
    #[command(after_help = KERNEL_SPEC_HELP)]
    Blur(BlurArgs),
    /// Restore a blurred image, estimating the kernel unless one is given.
    Deblur(DeblurArgs),
    /// Score a restoration against the clean image.
    Eval(EvalArgs),
    /// Write procedural images of a synthetic class.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory of .pgm training images.
    #[arg(long)]
    pub input_dir: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub patch_size: usize,
    /// Spacing between extracted training patches.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value_t = 20)]
    pub components: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub cov_floor: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output model file (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BlurArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Kernel spec, see below.
    #[arg(long, conflicts_with = "kernel_file", required_unless_present = "kernel_file")]
    pub kernel_spec: Option<String>,
    /// Kernel text file.
    #[arg(long)]
    pub kernel_file: Option<PathBuf>,
    /// Target blurred-signal-to-noise ratio in dB, or "inf" for no noise.
    #[arg(long)]
    pub bsnr: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub out_kernel: Option<PathBuf>,
    /// Metadata sidecar (default: <out>.meta).
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DeblurArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Trained model file. Required by the gmm denoiser.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Denoiser used as the image prior.
    #[arg(long, default_value = "gmm")]
    pub denoiser: String,
    /// Kernel support size (odd).
    #[arg(long, default_value_t = 15)]
    pub support: usize,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub mu_image: f64,
    #[arg(long, default_value_t = 0.01)]
    pub mu_blur: f64,
    #[arg(long, default_value_t = 20)]
    pub inner_image: usize,
    #[arg(long, default_value_t = 2)]
    pub inner_blur: usize,
    #[arg(long, default_value_t = 50)]
    pub outer: usize,
    /// Early stop on relative iterate change; 0 disables.
    #[arg(long, default_value_t = 1e-4)]
    pub outer_tol: f64,
    /// Spacing between denoised patches.
    #[arg(long, default_value_t = 1)]
    pub patch_stride: usize,
    /// Rescale the kernel estimate to unit sum after every blur step.
    #[arg(long)]
    pub unit_sum_kernel: bool,
    /// Recenter the kernel estimate on its centroid after every blur step.
    #[arg(long)]
    pub recenter_kernel: bool,
    /// Normalize the written kernel to unit sum (output only).
    #[arg(long)]
    pub normalize_kernel: bool,
    /// Run non-blind with this kernel file instead of estimating one.
    #[arg(long)]
    pub known_kernel: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub out_kernel: Option<PathBuf>,
    /// Run report (default: <out>.report).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(long)]
    pub degraded: PathBuf,
    #[arg(long)]
    pub restored: PathBuf,
    #[arg(long, requires = "est_kernel")]
    pub true_kernel: Option<PathBuf>,
    #[arg(long, requires = "true_kernel")]
    pub est_kernel: Option<PathBuf>,
    /// Ignore this many border pixels on every side.
    #[arg(long, default_value_t = 0)]
    pub crop: usize,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Image class: text or ridge.
    #[arg(long, default_value = "text")]
    pub class: String,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    /// First seed; image i uses seed + i.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    /// Output directory; files are named <class>_<seed>.pgm.
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Blur(a) => commands::blur(&a),
        Command::Deblur(a) => commands::deblur(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Synth(a) => commands::synth(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gmm-deblur: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
