//! Kernel comparison scores.

use crate::error::Result;
use crate::kernel::BlurKernel;

fn common_size(a: &BlurKernel, b: &BlurKernel) -> Result<(BlurKernel, BlurKernel)> {
    let n = a.size().max(b.size());
    Ok((a.resized(n)?, b.resized(n)?))
}

/// Mean squared difference, after zero-padding the smaller kernel around
/// its center.
pub fn kernel_mse(a: &BlurKernel, b: &BlurKernel) -> Result<f64> {
    let (a, b) = common_size(a, b)?;
    let n = a.values().len() as f64;
    Ok(a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
}

/// Normalized cross-correlation maximized over integer translations of `b`
/// relative to `a`: `max_s <a, b(. + s)> / (||a|| ||b||)`. Blind estimates
/// are only defined up to a shift, so this compares kernel shape. Returns 0
/// when either kernel is zero.
pub fn kernel_ncc(a: &BlurKernel, b: &BlurKernel) -> Result<f64> {
    let (a, b) = common_size(a, b)?;
    let norm = (a.norm_sq() * b.norm_sq()).sqrt();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let n = a.size() as isize;
    let mut best = f64::NEG_INFINITY;
    for dr in -(n - 1)..n {
        for dc in -(n - 1)..n {
            let mut s = 0.0;
            for r in 0..n {
                let rb = r + dr;
                if !(0..n).contains(&rb) {
                    continue;
                }
                for c in 0..n {
                    let cb = c + dc;
                    if (0..n).contains(&cb) {
                        s += a.get(r as usize, c as usize) * b.get(rb as usize, cb as usize);
                    }
                }
            }
            best = best.max(s);
        }
    }
    Ok(best / norm)
}

/// [`kernel_ncc`] without the translation search.
pub fn kernel_ncc_aligned(a: &BlurKernel, b: &BlurKernel) -> Result<f64> {
    let (a, b) = common_size(a, b)?;
    let norm = (a.norm_sq() * b.norm_sq()).sqrt();
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum::<f64>() / norm)
}
