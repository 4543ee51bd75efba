//! Grayscale rasters, patch tiling, synthetic noise and the scalar quality
//! measures used throughout the pipeline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Row-major grayscale raster of finite `f64` intensities, nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if pixels.len() != height * width {
            return Err(Error::invalid(format!(
                "pixel count {} does not match {height}x{width}",
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("pixel {i} is not finite")));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    /// Builds an image without the finiteness scan. Used for intermediate
    /// iterates whose finiteness is checked by the caller.
    pub(crate) fn from_raw(height: usize, width: usize, pixels: Vec<f64>) -> Self {
        debug_assert_eq!(pixels.len(), height * width);
        Self {
            height,
            width,
            pixels,
        }
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be positive");
        Self::from_raw(height, width, vec![value; height * width])
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be positive");
        let mut pixels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self::from_raw(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.pixels[row * self.width + col] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.pixels.iter().all(|p| p.is_finite())
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.dims() == other.dims()
    }

    /// Elementwise combination of two equally sized images.
    pub fn zip_map(&self, other: &Image, f: impl Fn(f64, f64) -> f64) -> Image {
        assert!(self.same_dims(other), "image dimensions differ");
        let pixels = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Image::from_raw(self.height, self.width, pixels)
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Image {
        Image::from_raw(
            self.height,
            self.width,
            self.pixels.iter().map(|&p| f(p)).collect(),
        )
    }

    pub fn norm_sq(&self) -> f64 {
        self.pixels.iter().map(|p| p * p).sum()
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.len() as f64
    }

    /// Population variance (mean squared deviation from the mean).
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.pixels.iter().map(|p| (p - m) * (p - m)).sum::<f64>() / self.len() as f64
    }

    pub fn squared_distance(&self, other: &Image) -> f64 {
        assert!(self.same_dims(other), "image dimensions differ");
        self.pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Copies out the `rows x cols` window with top-left corner `(top, left)`,
    /// wrapping around the image borders.
    pub fn window_wrapped(&self, top: usize, left: usize, rows: usize, cols: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let rr = (top + r) % self.height;
            for c in 0..cols {
                out.push(self.pixels[rr * self.width + (left + c) % self.width]);
            }
        }
        out
    }
}

/// Additive white Gaussian noise parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "noise sigma must be finite and nonnegative, got {sigma}"
            )));
        }
        Ok(Self { sigma, seed })
    }
}

/// Square patch geometry used by the patch prior.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchGrid {
    patch_size: usize,
    stride: usize,
}

impl Default for PatchGrid {
    fn default() -> Self {
        Self {
            patch_size: 6,
            stride: 1,
        }
    }
}

impl PatchGrid {
    pub fn new(patch_size: usize, stride: usize) -> Result<Self> {
        if patch_size == 0 {
            return Err(Error::invalid("patch size must be positive"));
        }
        if stride == 0 || stride > patch_size {
            return Err(Error::invalid(format!(
                "stride must lie in 1..={patch_size}, got {stride}"
            )));
        }
        Ok(Self { patch_size, stride })
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Length of a vectorized patch.
    pub fn dim(&self) -> usize {
        self.patch_size * self.patch_size
    }

    fn check_fits(&self, height: usize, width: usize) -> Result<()> {
        if self.patch_size > height.min(width) {
            return Err(Error::invalid(format!(
                "patch size {} exceeds image {height}x{width}",
                self.patch_size
            )));
        }
        Ok(())
    }

    /// Top-left offsets along one axis of length `len`. The last window is
    /// clamped to touch the border so every pixel is covered.
    pub fn offsets(&self, len: usize) -> Vec<usize> {
        let last = len - self.patch_size;
        let mut out: Vec<usize> = (0..=last).step_by(self.stride).collect();
        if *out.last().unwrap() != last {
            out.push(last);
        }
        out
    }

    /// Top-left corners of every window, row-major over the window grid.
    pub fn positions(&self, height: usize, width: usize) -> Result<Vec<(usize, usize)>> {
        self.check_fits(height, width)?;
        let rows = self.offsets(height);
        let cols = self.offsets(width);
        Ok(rows
            .iter()
            .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
            .collect())
    }
}

/// All windows of `grid` over `img`, each vectorized row-major.
pub fn extract_patches(img: &Image, grid: &PatchGrid) -> Result<Vec<Vec<f64>>> {
    let p = grid.patch_size;
    let positions = grid.positions(img.height, img.width)?;
    Ok(positions
        .into_iter()
        .map(|(top, left)| {
            let mut patch = Vec::with_capacity(p * p);
            for r in top..top + p {
                let row = &img.pixels[r * img.width + left..r * img.width + left + p];
                patch.extend_from_slice(row);
            }
            patch
        })
        .collect())
}

/// Inverse of [`extract_patches`]: each pixel becomes the mean of every patch
/// value that covers it. Summation runs in patch order.
pub fn aggregate_patches(
    patches: &[Vec<f64>],
    grid: &PatchGrid,
    height: usize,
    width: usize,
) -> Result<Image> {
    let p = grid.patch_size;
    let positions = grid.positions(height, width)?;
    if positions.len() != patches.len() {
        return Err(Error::invalid(format!(
            "expected {} patches for a {height}x{width} image, got {}",
            positions.len(),
            patches.len()
        )));
    }
    let mut sum = vec![0.0; height * width];
    let mut count = vec![0u32; height * width];
    for ((top, left), patch) in positions.into_iter().zip(patches) {
        if patch.len() != p * p {
            return Err(Error::invalid(format!(
                "patch length {} does not match patch size {p}",
                patch.len()
            )));
        }
        for r in 0..p {
            let base = (top + r) * width + left;
            for c in 0..p {
                sum[base + c] += patch[r * p + c];
                count[base + c] += 1;
            }
        }
    }
    let pixels = sum
        .into_iter()
        .zip(count)
        .map(|(s, n)| s / n as f64)
        .collect();
    Ok(Image::from_raw(height, width, pixels))
}

/// Adds i.i.d. zero-mean Gaussian noise, reproducible from `spec.seed`.
pub fn add_noise(img: &Image, spec: &NoiseSpec) -> Image {
    if spec.sigma == 0.0 {
        return img.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    img.map(|p| {
        let n: f64 = StandardNormal.sample(&mut rng);
        p + spec.sigma * n
    })
}

/// Noise standard deviation giving `bsnr_db = 10 log10(var(blurred) / sigma^2)`.
/// An infinite BSNR yields zero noise.
pub fn sigma_for_bsnr(blurred: &Image, bsnr_db: f64) -> Result<f64> {
    if bsnr_db.is_nan() {
        return Err(Error::invalid("BSNR is NaN"));
    }
    if bsnr_db == f64::INFINITY {
        return Ok(0.0);
    }
    if bsnr_db == f64::NEG_INFINITY {
        return Err(Error::invalid("BSNR of -inf requests infinite noise"));
    }
    let var = blurred.variance();
    if var <= 0.0 {
        return Err(Error::DegenerateInput(
            "blurred image is constant; BSNR is undefined".into(),
        ));
    }
    Ok((var / 10f64.powf(bsnr_db / 10.0)).sqrt())
}

/// Empirical BSNR of `noisy` relative to its noiseless counterpart.
pub fn measure_bsnr(blurred: &Image, noisy: &Image) -> Result<f64> {
    check_same(blurred, noisy)?;
    let noise_power = blurred.squared_distance(noisy) / blurred.len() as f64;
    Ok(10.0 * (blurred.variance() / noise_power).log10())
}

fn check_same(a: &Image, b: &Image) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::invalid(format!(
            "image dimensions differ: {}x{} vs {}x{}",
            a.height, a.width, b.height, b.width
        )));
    }
    Ok(())
}

/// Improvement in SNR, in dB. Returns `+inf` when `restored` equals `clean`.
pub fn isnr(clean: &Image, degraded: &Image, restored: &Image) -> Result<f64> {
    isnr_cropped(clean, degraded, restored, 0)
}

/// [`isnr`] evaluated on the interior that remains after dropping `margin`
/// pixels from every border.
pub fn isnr_cropped(clean: &Image, degraded: &Image, restored: &Image, margin: usize) -> Result<f64> {
    check_same(clean, degraded)?;
    check_same(clean, restored)?;
    let (h, w) = clean.dims();
    if 2 * margin >= h || 2 * margin >= w {
        return Err(Error::invalid(format!(
            "crop margin {margin} leaves nothing of a {h}x{w} image"
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for r in margin..h - margin {
        for c in margin..w - margin {
            let x = clean.get(r, c);
            let e_deg = degraded.get(r, c) - x;
            let e_res = restored.get(r, c) - x;
            num += e_deg * e_deg;
            den += e_res * e_res;
        }
    }
    Ok(match (num == 0.0, den == 0.0) {
        (true, true) => 0.0,
        (false, true) => f64::INFINITY,
        _ => 10.0 * (num / den).log10(),
    })
}

pub fn psnr(reference: &Image, test: &Image) -> Result<f64> {
    check_same(reference, test)?;
    let mse = reference.squared_distance(test) / reference.len() as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, |r, c| (r * w + c) as f64)
    }

    #[test]
    fn single_window_is_whole_image() {
        let img = ramp(6, 6);
        let patches = extract_patches(&img, &PatchGrid::default()).unwrap();
        assert_eq!(patches.len(), 1);
        assert_eq!(patches[0], img.pixels());
    }

    #[test]
    fn stride_one_window_count() {
        let patches = extract_patches(&ramp(8, 8), &PatchGrid::default()).unwrap();
        assert_eq!(patches.len(), 9);
    }

    #[test]
    fn clamped_final_window() {
        let grid = PatchGrid::new(6, 2).unwrap();
        assert_eq!(grid.offsets(7), vec![0, 1]);
        let img = ramp(7, 7);
        let patches = extract_patches(&img, &grid).unwrap();
        assert_eq!(patches.len(), 4);
        // window at (1, 1) starts at pixel 8
        assert_eq!(patches[3][0], 8.0);
        assert_eq!(patches[3][35], 48.0);
    }

    #[test]
    fn patch_larger_than_image() {
        let err = extract_patches(&ramp(5, 8), &PatchGrid::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn bad_stride_rejected() {
        assert!(PatchGrid::new(6, 0).is_err());
        assert!(PatchGrid::new(6, 7).is_err());
    }

    #[test]
    fn aggregate_constant_patches() {
        let grid = PatchGrid::new(3, 2).unwrap();
        let n = grid.positions(9, 7).unwrap().len();
        let img = aggregate_patches(&vec![vec![0.25; 9]; n], &grid, 9, 7).unwrap();
        assert!(img.pixels().iter().all(|&p| p == 0.25));
    }

    #[test]
    fn aggregate_two_overlapping() {
        // 1x? images are too small for 2x2 patches, use 2x3 with stride 1
        let grid = PatchGrid::new(2, 1).unwrap();
        let img = aggregate_patches(&[vec![1.0; 4], vec![3.0; 4]], &grid, 2, 3).unwrap();
        assert_eq!(img.pixels(), &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn aggregate_count_mismatch() {
        let grid = PatchGrid::default();
        assert!(aggregate_patches(&[vec![0.0; 36]], &grid, 8, 8).is_err());
    }

    #[test]
    fn zero_sigma_noise_is_identity() {
        let img = ramp(4, 5);
        assert_eq!(add_noise(&img, &NoiseSpec::new(0.0, 3).unwrap()), img);
    }

    #[test]
    fn noise_is_seeded() {
        let img = ramp(16, 16);
        let spec = NoiseSpec::new(0.3, 11).unwrap();
        assert_eq!(add_noise(&img, &spec), add_noise(&img, &spec));
        let other = NoiseSpec::new(0.3, 12).unwrap();
        assert_ne!(add_noise(&img, &spec), add_noise(&img, &other));
    }

    #[test]
    fn noise_moment() {
        let img = Image::zeros(256, 256);
        let noisy = add_noise(&img, &NoiseSpec::new(0.1, 5).unwrap());
        let sd = noisy.variance().sqrt();
        assert!((sd - 0.1).abs() < 0.005, "sd = {sd}");
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(NoiseSpec::new(-0.1, 0).is_err());
    }

    /// Two-valued image with population variance exactly `var` (±sqrt(var) around 0).
    fn with_variance(var: f64) -> Image {
        let a = var.sqrt();
        Image::from_fn(4, 4, |r, c| if (r + c) % 2 == 0 { a } else { -a })
    }

    #[test]
    fn bsnr_sigma_values() {
        let img = with_variance(1.0);
        assert!((sigma_for_bsnr(&img, 20.0).unwrap() - 0.1).abs() < 1e-15);
        assert!((sigma_for_bsnr(&img, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let img = with_variance(0.04);
        let s = sigma_for_bsnr(&img, 30.0).unwrap();
        assert!((s - 0.2 / 1000f64.sqrt()).abs() < 1e-15);
        assert!((s - 0.0063246).abs() < 1e-7);
        assert_eq!(sigma_for_bsnr(&img, f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn bsnr_constant_image() {
        let err = sigma_for_bsnr(&Image::filled(4, 4, 0.5), 30.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
    }

    #[test]
    fn isnr_values() {
        let clean = Image::zeros(1, 4);
        let degraded = Image::new(1, 4, vec![5.0, 5.0, 5.0, 5.0]).unwrap(); // 100
        let restored = Image::new(1, 4, vec![10f64.sqrt(), 0.0, 0.0, 0.0]).unwrap(); // 10
        assert!((isnr(&clean, &degraded, &restored).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(isnr(&clean, &degraded, &degraded).unwrap(), 0.0);

        let degraded = Image::new(1, 4, vec![2.0, 0.0, 0.0, 0.0]).unwrap(); // 4
        let restored = Image::new(1, 4, vec![4.0, 0.0, 0.0, 0.0]).unwrap(); // 16
        let v = isnr(&clean, &degraded, &restored).unwrap();
        assert!((v - (-6.020599913279624)).abs() < 1e-12);
        assert_eq!(isnr(&clean, &degraded, &clean).unwrap(), f64::INFINITY);
    }

    #[test]
    fn isnr_dimension_mismatch() {
        let a = Image::zeros(2, 2);
        let b = Image::zeros(2, 3);
        assert!(isnr(&a, &a, &b).is_err());
    }

    #[test]
    fn isnr_crop() {
        let clean = Image::zeros(5, 5);
        let mut degraded = Image::filled(5, 5, 1.0);
        degraded.set(0, 0, 100.0);
        let restored = Image::filled(5, 5, 0.5);
        let v = isnr_cropped(&clean, &degraded, &restored, 1).unwrap();
        assert!((v - 10.0 * 4f64.log10()).abs() < 1e-12);
        assert!(isnr_cropped(&clean, &degraded, &restored, 3).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(Image::new(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(Image::new(0, 2, vec![]).is_err());
    }
}
