//! Independent reference implementations shared by the integration tests.
//! None of these go through the FFT or the library solvers.

#![allow(dead_code)]

use gmm_deblur::gmm::GaussianComponent;
use gmm_deblur::kernel::{BlurKernel, KernelSupport};
use gmm_deblur::{Gmm, Image};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut impl Rng, h: usize, w: usize) -> Image {
    Image::from_fn(h, w, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_kernel(rng: &mut impl Rng, k: usize) -> BlurKernel {
    BlurKernel::new(k, (0..k * k).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_nonneg_kernel(rng: &mut impl Rng, k: usize) -> BlurKernel {
    BlurKernel::new(k, (0..k * k).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap().normalized()
}

/// `(x * h)(r, c) = sum_{i,j} h(i, j) x(r - (i - ck), c - (j - ck))` with
/// wrap-around indices.
pub fn direct_convolve(x: &Image, h: &BlurKernel) -> Image {
    let (hh, ww) = x.dims();
    let k = h.size() as i64;
    let ck = k / 2;
    Image::from_fn(hh, ww, |r, c| {
        let mut acc = 0.0;
        for i in 0..k {
            for j in 0..k {
                let rr = (r as i64 - (i - ck)).rem_euclid(hh as i64) as usize;
                let cc = (c as i64 - (j - ck)).rem_euclid(ww as i64) as usize;
                acc += h.get(i as usize, j as usize) * x.get(rr, cc);
            }
        }
        acc
    })
}

/// Dense matrix of cyclic convolution by `h` acting on row-major images.
pub fn conv_matrix(h: &BlurKernel, rows: usize, cols: usize) -> DMatrix<f64> {
    let n = rows * cols;
    let mut m = DMatrix::zeros(n, n);
    for p in 0..n {
        let mut e = Image::zeros(rows, cols);
        e.pixels_mut()[p] = 1.0;
        let col = direct_convolve(&e, h);
        for (q, v) in col.pixels().iter().enumerate() {
            m[(q, p)] = *v;
        }
    }
    m
}

/// Minimizer of `1/2 ||y - H x||^2 + mu/2 ||x - w||^2` via a dense LU solve
/// of `(H^T H + mu I) x = H^T y + mu w`.
pub fn dense_quad_solve(h: &BlurKernel, y: &Image, w: &Image, mu: f64) -> Image {
    let (rows, cols) = y.dims();
    let hm = conv_matrix(h, rows, cols);
    let n = rows * cols;
    let a = hm.transpose() * &hm + DMatrix::identity(n, n) * mu;
    let b = hm.transpose() * DVector::from_column_slice(y.pixels()) + DVector::from_column_slice(w.pixels()) * mu;
    let x = a.lu().solve(&b).expect("regular system");
    Image::new(rows, cols, x.as_slice().to_vec()).unwrap()
}

/// Minimum-norm least-squares solution of `H x = y`.
pub fn dense_lstsq(h: &BlurKernel, y: &Image) -> Image {
    let (rows, cols) = y.dims();
    let hm = conv_matrix(h, rows, cols);
    let svd = hm.svd(true, true);
    let x = svd.solve(&DVector::from_column_slice(y.pixels()), 1e-10).unwrap();
    Image::new(rows, cols, x.as_slice().to_vec()).unwrap()
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn gauss2(x: [f64; 2], mean: &[f64], cov: &[f64]) -> f64 {
    let det = cov[0] * cov[3] - cov[1] * cov[2];
    let (dx, dy) = (x[0] - mean[0], x[1] - mean[1]);
    let q = (cov[3] * dx * dx - (cov[1] + cov[2]) * dx * dy + cov[0] * dy * dy) / det;
    (-0.5 * q).exp() / (std::f64::consts::TAU * det.sqrt())
}

/// Posterior mean `E[x | y]` for `y = x + n`, `x ~ gmm`, `n ~ N(0, sigma2 I)`
/// in two dimensions, by midpoint quadrature on a grid fine enough to resolve
/// the narrowest posterior component.
pub fn posterior_mean_quadrature(gmm: &Gmm, y: &[f64], sigma2: f64) -> [f64; 2] {
    assert_eq!(gmm.dim(), 2);
    // Posterior component covariances are (S^-1 + I / sigma2)^-1; bound their
    // spread from the eigenvalues of S.
    let mut min_sd = f64::INFINITY;
    let mut max_sd: f64 = 0.0;
    let mut lo = [y[0], y[1]];
    let mut hi = [y[0], y[1]];
    for c in gmm.components() {
        let s = &c.covariance;
        let tr = s[0] + s[3];
        let det = s[0] * s[3] - s[1] * s[2];
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        for ev in [tr / 2.0 - disc, tr / 2.0 + disc] {
            let post = 1.0 / (1.0 / ev + 1.0 / sigma2);
            min_sd = min_sd.min(post.sqrt());
            max_sd = max_sd.max(post.sqrt());
        }
        for d in 0..2 {
            lo[d] = lo[d].min(c.mean[d]);
            hi[d] = hi[d].max(c.mean[d]);
        }
    }
    let step = min_sd / 6.0;
    let pad = 14.0 * max_sd;
    let n0 = ((hi[0] - lo[0] + 2.0 * pad) / step).ceil() as usize;
    let n1 = ((hi[1] - lo[1] + 2.0 * pad) / step).ceil() as usize;
    let noise = [sigma2, 0.0, 0.0, sigma2];
    let (mut z, mut m0, mut m1) = (0.0, 0.0, 0.0);
    for i in 0..n0 {
        let a = lo[0] - pad + (i as f64 + 0.5) * step;
        for j in 0..n1 {
            let b = lo[1] - pad + (j as f64 + 0.5) * step;
            let like = gauss2([y[0], y[1]], &[a, b], &noise);
            if like == 0.0 {
                continue;
            }
            let prior: f64 = gmm
                .components()
                .iter()
                .map(|c| c.weight * gauss2([a, b], &c.mean, &c.covariance))
                .sum();
            let p = prior * like;
            z += p;
            m0 += p * a;
            m1 += p * b;
        }
    }
    [m0 / z, m1 / z]
}

pub fn two_component_gmm() -> Gmm {
    Gmm::new(
        2,
        vec![
            GaussianComponent {
                weight: 0.35,
                mean: vec![-0.6, 0.4],
                covariance: vec![0.30, 0.12, 0.12, 0.20],
            },
            GaussianComponent {
                weight: 0.65,
                mean: vec![0.8, -0.3],
                covariance: vec![0.15, -0.05, -0.05, 0.25],
            },
        ],
    )
    .unwrap()
}

/// Columns of the operator `h -> x * h` restricted to a `k x k` window.
fn window_operator(x: &Image, k: usize) -> DMatrix<f64> {
    let n = x.len();
    let mut m = DMatrix::zeros(n, k * k);
    for p in 0..k * k {
        let mut e = vec![0.0; k * k];
        e[p] = 1.0;
        let col = direct_convolve(x, &BlurKernel::new(k, e).unwrap());
        for (q, v) in col.pixels().iter().enumerate() {
            m[(q, p)] = *v;
        }
    }
    m
}

/// Projected gradient on `1/2 ||y - X h||^2` over kernels in `support`,
/// run with step `1/L` until the iterate stops moving.
pub fn projected_lstsq_kernel(y: &Image, x: &Image, support: &KernelSupport) -> BlurKernel {
    let k = support.size();
    let a = window_operator(x, k);
    let ata = a.transpose() * &a;
    let aty = a.transpose() * DVector::from_column_slice(y.pixels());
    let lip = ata.clone().symmetric_eigen().eigenvalues.max();
    let project = |h: &DVector<f64>| {
        DVector::from_iterator(
            k * k,
            h.iter().zip(support.mask()).map(|(v, &m)| if m { v.max(0.0) } else { 0.0 }),
        )
    };
    let mut h = project(&DVector::from_element(k * k, 1.0 / (k * k) as f64));
    for _ in 0..200_000 {
        let grad = &ata * &h - &aty;
        let next = project(&(&h - grad / lip));
        let moved = (&next - &h).norm();
        h = next;
        if moved < 1e-15 {
            break;
        }
    }
    BlurKernel::new(k, h.as_slice().to_vec()).unwrap()
}
