//! Plain-text run report: configuration echo plus the outer trace. Holds no
//! timing information, so identical runs give identical reports.

use std::fmt::Write;

use super::{DeblurConfig, OuterRecord};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// `key=value` lines. `extra` entries (input paths, mode, etc.) are written
/// after the format line in the order given. Floats use their shortest
/// round-trip representation.
pub fn run_report(cfg: &DeblurConfig, trace: &[OuterRecord], extra: &[(&str, String)]) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: &dyn std::fmt::Display| {
        writeln!(out, "{k}={v}").expect("writing to a String");
    };
    kv("format_version", &REPORT_FORMAT_VERSION);
    for (k, v) in extra {
        kv(k, v);
    }
    kv("lambda", &format!("{:?}", cfg.lambda));
    kv("mu_image", &format!("{:?}", cfg.mu_image));
    kv("mu_blur", &format!("{:?}", cfg.mu_blur));
    kv("denoiser_variance", &format!("{:?}", cfg.denoiser_variance()));
    kv("inner_image_iters", &cfg.inner_image_iters);
    kv("inner_blur_iters", &cfg.inner_blur_iters);
    kv("outer_iters", &cfg.outer_iters);
    kv("outer_tol", &format!("{:?}", cfg.outer_tol));
    kv("support_size", &cfg.support.size());
    kv("support_taps", &cfg.support.mask().iter().filter(|&&m| m).count());
    kv("patch_size", &cfg.grid.patch_size());
    kv("patch_stride", &cfg.grid.stride());
    kv("kernel_unit_sum", &cfg.kernel_unit_sum);
    kv("kernel_recenter", &cfg.kernel_recenter);
    kv("outer_executed", &trace.len());
    for rec in trace {
        kv(
            &format!("trace.{}", rec.iteration),
            &format!("{:?} {:?}", rec.image_change, rec.kernel_change),
        );
    }
    out
}
