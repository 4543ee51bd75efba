//! Blur kernels, the support constraint set and kernel text files.

mod generators;
mod registry;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub use generators::{gen_disk, gen_gaussian, gen_motion_linear, gen_nonlinear_motion, gen_uniform};
pub use registry::{KernelFamily, KernelParams, KernelRegistry, KernelSpec};

use crate::error::{Error, Result};

/// Square `size x size` filter with odd `size`, stored row-major. The center
/// element `(size / 2, size / 2)` is the origin of the filter.
#[derive(Clone, Debug, PartialEq)]
pub struct BlurKernel {
    size: usize,
    values: Vec<f64>,
}

impl BlurKernel {
    pub fn new(size: usize, values: Vec<f64>) -> Result<Self> {
        check_odd(size)?;
        if values.len() != size * size {
            return Err(Error::invalid(format!(
                "kernel of size {size} needs {} values, got {}",
                size * size,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("kernel values must be finite"));
        }
        Ok(Self { size, values })
    }

    pub(crate) fn from_raw(size: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), size * size);
        Self { size, values }
    }

    /// Identity filter: unit mass at the center.
    pub fn delta(size: usize) -> Result<Self> {
        check_odd(size)?;
        let mut values = vec![0.0; size * size];
        values[(size / 2) * size + size / 2] = 1.0;
        Ok(Self { size, values })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn center(&self) -> usize {
        self.size / 2
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size + col]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// Copy scaled to unit sum. Kernels with zero sum are returned unchanged.
    pub fn normalized(&self) -> BlurKernel {
        let s = self.sum();
        if s == 0.0 {
            return self.clone();
        }
        BlurKernel::from_raw(self.size, self.values.iter().map(|v| v / s).collect())
    }

    /// Zero-pads (or crops) around the center to `size`.
    pub fn resized(&self, size: usize) -> Result<BlurKernel> {
        check_odd(size)?;
        let mut out = vec![0.0; size * size];
        let (c_old, c_new) = (self.center() as isize, (size / 2) as isize);
        for r in 0..self.size {
            for c in 0..self.size {
                let nr = r as isize - c_old + c_new;
                let nc = c as isize - c_old + c_new;
                if (0..size as isize).contains(&nr) && (0..size as isize).contains(&nc) {
                    out[nr as usize * size + nc as usize] = self.get(r, c);
                }
            }
        }
        Ok(BlurKernel::from_raw(size, out))
    }
}

fn check_odd(size: usize) -> Result<()> {
    if size == 0 || size % 2 == 0 {
        return Err(Error::invalid(format!(
            "kernel size must be a positive odd integer, got {size}"
        )));
    }
    Ok(())
}

/// Mask of admissible filter taps: the set of nonnegative filters vanishing
/// outside the mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelSupport {
    size: usize,
    mask: Vec<bool>,
}

impl KernelSupport {
    pub fn full(size: usize) -> Result<Self> {
        check_odd(size)?;
        Ok(Self {
            size,
            mask: vec![true; size * size],
        })
    }

    pub fn from_mask(size: usize, mask: Vec<bool>) -> Result<Self> {
        check_odd(size)?;
        if mask.len() != size * size {
            return Err(Error::invalid("support mask has the wrong length"));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::invalid("support mask is empty"));
        }
        Ok(Self { size, mask })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains(&self, kernel: &BlurKernel) -> bool {
        kernel.size == self.size
            && kernel
                .values
                .iter()
                .zip(&self.mask)
                .all(|(&v, &m)| v >= 0.0 && (m || v == 0.0))
    }
}

/// Euclidean projection onto the support set: negative taps and taps outside
/// the mask are set to zero. No renormalization.
pub fn project_support(u: &[f64], support: &KernelSupport) -> Result<BlurKernel> {
    if u.len() != support.mask.len() {
        return Err(Error::invalid(format!(
            "projection input has {} values, support needs {}",
            u.len(),
            support.mask.len()
        )));
    }
    let values = u
        .iter()
        .zip(&support.mask)
        .map(|(&x, &m)| if m && x > 0.0 { x } else { 0.0 })
        .collect();
    Ok(BlurKernel::from_raw(support.size, values))
}

pub const KERNEL_FORMAT_VERSION: u32 = 1;

/// Text form: a `# format_version=1` comment, a line holding `k`, then `k`
/// rows of `k` whitespace-separated values. Values are written in shortest
/// round-trip form.
pub fn kernel_to_text(kernel: &BlurKernel) -> String {
    let mut out = format!("# format_version={KERNEL_FORMAT_VERSION}\n{}\n", kernel.size);
    for row in kernel.values.chunks(kernel.size) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    out
}

/// Parses the kernel text form. Lines starting with `#` are ignored; the
/// version comment is optional.
pub fn kernel_from_text(text: &str) -> Result<BlurKernel> {
    let what = "kernel file";
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let size: usize = lines
        .next()
        .ok_or_else(|| Error::parse(what, "missing size line"))?
        .parse()
        .map_err(|_| Error::parse(what, "size line is not an integer"))?;
    let mut values = Vec::with_capacity(size * size);
    for r in 0..size {
        let line = lines
            .next()
            .ok_or_else(|| Error::parse(what, format!("missing row {r}")))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(what, format!("bad value {t:?} in row {r}")))
            })
            .collect::<Result<_>>()?;
        if row.len() != size {
            return Err(Error::parse(
                what,
                format!("row {r} has {} values, expected {size}", row.len()),
            ));
        }
        values.extend(row);
    }
    if lines.next().is_some() {
        return Err(Error::parse(what, "trailing data after last row"));
    }
    BlurKernel::new(size, values).map_err(|e| Error::parse(what, e.to_string()))
}

pub fn save_kernel(kernel: &BlurKernel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, kernel_to_text(kernel)).map_err(|e| Error::io(path, e))
}

pub fn load_kernel(path: impl AsRef<Path>) -> Result<BlurKernel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    kernel_from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn project_small_example() {
        let k = project_support(&[-1.0, 2.0, 0.5, -3.0, 0.0, 0.0, 0.0, 0.0, 0.0], &KernelSupport::full(3).unwrap())
            .unwrap();
        assert_eq!(&k.values()[..4], &[0.0, 2.0, 0.5, 0.0]);
    }

    #[test]
    fn project_center_only_mask() {
        let mut mask = vec![false; 9];
        mask[4] = true;
        let s = KernelSupport::from_mask(3, mask).unwrap();
        let u: Vec<f64> = (0..9).map(|i| i as f64 - 2.0).collect();
        let k = project_support(&u, &s).unwrap();
        assert_eq!(k.values(), &[0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let neg: Vec<f64> = u.iter().map(|x| -x.abs() - 1.0).collect();
        assert!(project_support(&neg, &s).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn project_length_mismatch() {
        assert!(project_support(&[1.0; 4], &KernelSupport::full(3).unwrap()).is_err());
    }

    #[test]
    fn empty_mask_rejected() {
        assert!(KernelSupport::from_mask(3, vec![false; 9]).is_err());
        assert!(KernelSupport::full(4).is_err());
    }

    #[test]
    fn delta_is_centered() {
        let d = BlurKernel::delta(5).unwrap();
        assert_eq!(d.get(2, 2), 1.0);
        assert_eq!(d.sum(), 1.0);
    }

    #[test]
    fn resize_keeps_center() {
        let d = BlurKernel::delta(3).unwrap().resized(7).unwrap();
        assert_eq!(d, BlurKernel::delta(7).unwrap());
        let back = d.resized(3).unwrap();
        assert_eq!(back, BlurKernel::delta(3).unwrap());
    }

    #[test]
    fn text_accepts_scientific_and_plain() {
        let k = kernel_from_text("3\n0 1e-1 0\n0.2 4E-1 0\n0 1.0e-1  0.1\n").unwrap();
        assert_eq!(k.size(), 3);
        assert_eq!(k.get(1, 1), 0.4);
        assert_eq!(k.get(2, 2), 0.1);
    }

    #[test]
    fn text_errors() {
        assert!(kernel_from_text("").is_err());
        assert!(kernel_from_text("3\n1 2 3\n").is_err());
        assert!(kernel_from_text("1\n1 2\n").is_err());
        assert!(kernel_from_text("1\nabc\n").is_err());
        assert!(kernel_from_text("2\n1 2\n3 4\n").is_err());
        assert!(kernel_from_text("1\n1\n2\n").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip_exact(vals in proptest::collection::vec(-1e3f64..1e3, 25)) {
            let k = BlurKernel::new(5, vals).unwrap();
            prop_assert_eq!(kernel_from_text(&kernel_to_text(&k)).unwrap(), k);
        }
    }
}
