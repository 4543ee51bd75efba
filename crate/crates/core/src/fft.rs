//! Periodic convolution and DFT-domain solves of
//! `(A^T A + mu I) x = A^T y + mu w` for circulant `A`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::kernel::BlurKernel;

/// Frequency response of a circulant operator at image size.
#[derive(Clone, PartialEq)]
pub struct Otf {
    height: usize,
    width: usize,
    values: Vec<Complex64>,
}

impl fmt::Debug for Otf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Otf({}x{})", self.height, self.width)
    }
}

impl Otf {
    /// Operator of cyclic convolution with `img` itself, i.e. the DFT of the
    /// raster with no shift. Used when the unknown is the kernel.
    pub fn of_image(img: &Image) -> Otf {
        Fft2::new(img.height(), img.width()).otf_of_image(img)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.width + col]
    }
}

/// 2-D complex FFT plans for one raster size. Plans are immutable and shared
/// behind `Arc`, so an `Fft2` may be cloned across threads.
#[derive(Clone)]
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn transform(&self, buf: &mut [Complex64], rows: &dyn Fft<f64>, cols: &dyn Fft<f64>) {
        let (h, w) = (self.height, self.width);
        rows.process(buf);
        let mut t = vec![Complex64::new(0.0, 0.0); h * w];
        for r in 0..h {
            for c in 0..w {
                t[c * h + r] = buf[r * w + c];
            }
        }
        cols.process(&mut t);
        for c in 0..w {
            for r in 0..h {
                buf[r * w + c] = t[c * h + r];
            }
        }
    }

    pub fn forward(&self, real: &[f64]) -> Vec<Complex64> {
        assert_eq!(real.len(), self.height * self.width);
        let mut buf: Vec<Complex64> = real.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut buf, self.row_fwd.as_ref(), self.col_fwd.as_ref());
        buf
    }

    /// Normalized inverse transform, keeping the real part.
    pub fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        assert_eq!(spec.len(), self.height * self.width);
        self.transform(&mut spec, self.row_inv.as_ref(), self.col_inv.as_ref());
        let scale = 1.0 / (self.height * self.width) as f64;
        spec.into_iter().map(|z| z.re * scale).collect()
    }

    pub fn psf_to_otf(&self, kernel: &BlurKernel) -> Result<Otf> {
        let raster = embed_kernel(kernel.values(), kernel.size(), self.height, self.width)?;
        Ok(Otf {
            height: self.height,
            width: self.width,
            values: self.forward(&raster),
        })
    }

    pub fn otf_of_image(&self, img: &Image) -> Otf {
        assert_eq!(img.dims(), self.dims());
        Otf {
            height: self.height,
            width: self.width,
            values: self.forward(img.pixels()),
        }
    }

    /// Applies the circulant operator: `IDFT(otf * DFT(x))`.
    pub fn apply(&self, otf: &Otf, x: &[f64]) -> Vec<f64> {
        let mut s = self.forward(x);
        for (a, o) in s.iter_mut().zip(&otf.values) {
            *a *= o;
        }
        self.inverse_real(s)
    }

    /// Applies the adjoint operator: `IDFT(conj(otf) * DFT(x))`.
    pub fn apply_adjoint(&self, otf: &Otf, x: &[f64]) -> Vec<f64> {
        let mut s = self.forward(x);
        for (a, o) in s.iter_mut().zip(&otf.values) {
            *a *= o.conj();
        }
        self.inverse_real(s)
    }
}

/// Zero-pads a `size x size` kernel to `height x width` with its center tap
/// circularly shifted to index `(0, 0)`.
pub fn embed_kernel(values: &[f64], size: usize, height: usize, width: usize) -> Result<Vec<f64>> {
    if size > height || size > width {
        return Err(Error::invalid(format!(
            "kernel of size {size} does not fit a {height}x{width} image"
        )));
    }
    let c = size / 2;
    let mut out = vec![0.0; height * width];
    for r in 0..size {
        let rr = (r + height - c) % height;
        for col in 0..size {
            let cc = (col + width - c) % width;
            out[rr * width + cc] = values[r * size + col];
        }
    }
    Ok(out)
}

/// Reads back the `size x size` window around index `(0, 0)` of an embedded
/// kernel raster. Inverse of [`embed_kernel`] on its range.
pub fn extract_kernel(raster: &[f64], size: usize, height: usize, width: usize) -> Vec<f64> {
    let c = size / 2;
    let mut out = Vec::with_capacity(size * size);
    for r in 0..size {
        let rr = (r + height - c) % height;
        for col in 0..size {
            out.push(raster[rr * width + (col + width - c) % width]);
        }
    }
    out
}

pub fn psf_to_otf(kernel: &BlurKernel, height: usize, width: usize) -> Result<Otf> {
    Fft2::new(height, width).psf_to_otf(kernel)
}

pub fn cyclic_convolve(img: &Image, kernel: &BlurKernel) -> Result<Image> {
    let fft = Fft2::new(img.height(), img.width());
    let otf = fft.psf_to_otf(kernel)?;
    Ok(Image::from_raw(
        img.height(),
        img.width(),
        fft.apply(&otf, img.pixels()),
    ))
}

/// Closed-form solve of `min_x 1/2 ||y - A x||^2 + mu/2 ||x - w||^2` for a
/// fixed operator, observation and penalty. The right-hand side term
/// `conj(O) Y` and the denominator are computed once; each [`solve`] costs
/// one forward and one inverse FFT.
///
/// [`solve`]: QuadSolver::solve
#[derive(Clone)]
pub struct QuadSolver {
    fft: Fft2,
    mu: f64,
    rhs: Vec<Complex64>,
    denom: Vec<f64>,
}

impl QuadSolver {
    pub fn new(fft: Fft2, otf: &Otf, y: &Image, mu: f64) -> Result<Self> {
        if (otf.height, otf.width) != y.dims() || fft.dims() != y.dims() {
            return Err(Error::invalid("operator, FFT plan and observation sizes differ"));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("penalty mu must be finite and >= 0, got {mu}")));
        }
        let denom: Vec<f64> = otf.values.iter().map(|o| o.norm_sqr() + mu).collect();
        if mu == 0.0 {
            let peak = otf.values.iter().map(|o| o.norm_sqr()).fold(0.0, f64::max);
            if let Some(i) = denom.iter().position(|&d| d <= 1e-14 * peak || d == 0.0) {
                return Err(Error::SingularSystem(format!(
                    "operator has a null frequency at ({}, {}) and mu = 0",
                    i / otf.width,
                    i % otf.width
                )));
            }
        }
        let y_hat = fft.forward(y.pixels());
        let rhs = otf
            .values
            .iter()
            .zip(&y_hat)
            .map(|(o, yh)| o.conj() * yh)
            .collect();
        Ok(Self {
            fft,
            mu,
            rhs,
            denom,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn solve(&self, w: &Image) -> Image {
        let (h, wd) = self.fft.dims();
        assert_eq!(w.dims(), (h, wd));
        let mut s = self.fft.forward(w.pixels());
        for ((a, r), d) in s.iter_mut().zip(&self.rhs).zip(&self.denom) {
            *a = (r + *a * self.mu) / d;
        }
        Image::from_raw(h, wd, self.fft.inverse_real(s))
    }
}

/// `(A^T A + mu I)^{-1} (A^T y + mu w)` with `A` given by `otf`.
pub fn quad_solve(otf: &Otf, y: &Image, v_plus_d: &Image, mu: f64) -> Result<Image> {
    if v_plus_d.dims() != y.dims() {
        return Err(Error::invalid("quad_solve inputs differ in size"));
    }
    let solver = QuadSolver::new(Fft2::new(y.height(), y.width()), otf, y, mu)?;
    Ok(solver.solve(v_plus_d))
}
