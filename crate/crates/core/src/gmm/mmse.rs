use log::warn;

use super::linalg::Cholesky;
use super::Gmm;
use crate::error::{Error, Result};
use crate::image::{aggregate_patches, extract_patches, Image, PatchGrid};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Responsibilities below this do not contribute to the posterior mean.
const NEGLIGIBLE: f64 = 1e-18;

struct Prepared {
    mean: Vec<f64>,
    chol: Cholesky,
    /// `ln w - 1/2 ln|C| - d/2 ln 2 pi` with `C = Sigma + sigma2 I`.
    log_norm: f64,
}

/// Posterior-mean patch denoiser for a fixed mixture and noise variance. The
/// per-component factorizations of `Sigma_j + sigma2 I` are computed once.
///
/// For a noisy patch `y` the estimate is
/// `y - sigma2 * sum_j beta_j (Sigma_j + sigma2 I)^{-1} (y - mu_j)`,
/// which equals `sum_j beta_j (mu_j + Sigma_j (Sigma_j + sigma2 I)^{-1} (y - mu_j))`.
pub struct MmseDenoiser {
    dim: usize,
    sigma2: f64,
    comps: Vec<Prepared>,
}

/// Reusable per-call buffers.
pub(crate) struct Scratch {
    whitened: Vec<f64>,
    log_p: Vec<f64>,
    tmp: Vec<f64>,
}

impl MmseDenoiser {
    pub fn new(gmm: &Gmm, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid(format!(
                "noise variance must be finite and nonnegative, got {sigma2}"
            )));
        }
        let d = gmm.dim();
        let comps = gmm
            .components()
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let mut cov = c.covariance.clone();
                for i in 0..d {
                    cov[i * d + i] += sigma2;
                }
                let chol = Cholesky::new(&cov, d).ok_or_else(|| {
                    Error::SingularSystem(format!(
                        "component {j} covariance plus noise is not positive definite"
                    ))
                })?;
                Ok(Prepared {
                    mean: c.mean.clone(),
                    log_norm: c.weight.ln() - 0.5 * chol.log_det() - 0.5 * d as f64 * LN_2PI,
                    chol,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim: d, sigma2, comps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub(crate) fn scratch(&self) -> Scratch {
        Scratch {
            whitened: vec![0.0; self.dim * self.comps.len()],
            log_p: vec![0.0; self.comps.len()],
            tmp: vec![0.0; self.dim],
        }
    }

    /// Fills `scratch.log_p` with `ln w_j + ln N(x; mu_j, C_j)` and
    /// `scratch.whitened` with `L_j^{-1} (x - mu_j)`. Returns the index of the
    /// component with the smallest Mahalanobis distance.
    fn score(&self, x: &[f64], s: &mut Scratch) -> usize {
        let d = self.dim;
        let mut nearest = (f64::INFINITY, 0);
        for (j, c) in self.comps.iter().enumerate() {
            let u = &mut s.whitened[j * d..(j + 1) * d];
            for ((ui, xi), mi) in u.iter_mut().zip(x).zip(&c.mean) {
                *ui = xi - mi;
            }
            c.chol.solve_lower(u);
            let maha: f64 = u.iter().map(|v| v * v).sum();
            if maha < nearest.0 {
                nearest = (maha, j);
            }
            s.log_p[j] = c.log_norm - 0.5 * maha;
        }
        nearest.1
    }

    /// Converts `scratch.log_p` into normalized responsibilities in `resp`
    /// and returns the log evidence `ln p(x)`.
    fn normalize(&self, s: &Scratch, nearest: usize, resp: &mut [f64]) -> f64 {
        let max = s.log_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            warn!("all mixture likelihoods underflowed; using nearest component {nearest}");
            resp.fill(0.0);
            resp[nearest] = 1.0;
            return max;
        }
        let mut total = 0.0;
        for (r, lp) in resp.iter_mut().zip(&s.log_p) {
            *r = (lp - max).exp();
            total += *r;
        }
        for r in resp.iter_mut() {
            *r /= total;
        }
        max + total.ln()
    }

    /// Log evidence and responsibilities of `x`. With `sigma2 = 0` this is
    /// the E-step of EM.
    pub(crate) fn responsibilities(&self, x: &[f64], s: &mut Scratch, resp: &mut [f64]) -> f64 {
        let nearest = self.score(x, s);
        self.normalize(s, nearest, resp)
    }

    pub(crate) fn denoise_into(&self, noisy: &[f64], s: &mut Scratch, out: &mut [f64], resp: &mut [f64]) {
        let d = self.dim;
        let nearest = self.score(noisy, s);
        self.normalize(s, nearest, resp);
        out.copy_from_slice(noisy);
        if self.sigma2 == 0.0 {
            return;
        }
        for (j, c) in self.comps.iter().enumerate() {
            let b = resp[j];
            if b < NEGLIGIBLE {
                continue;
            }
            s.tmp.copy_from_slice(&s.whitened[j * d..(j + 1) * d]);
            c.chol.solve_upper_t(&mut s.tmp);
            let scale = self.sigma2 * b;
            for (o, t) in out.iter_mut().zip(&s.tmp) {
                *o -= scale * t;
            }
        }
    }

    /// Denoised patch and posterior component probabilities.
    pub fn denoise_patch(&self, noisy: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if noisy.len() != self.dim {
            return Err(Error::invalid(format!(
                "patch has length {}, mixture dimension is {}",
                noisy.len(),
                self.dim
            )));
        }
        let mut s = self.scratch();
        let mut out = vec![0.0; self.dim];
        let mut resp = vec![0.0; self.comps.len()];
        self.denoise_into(noisy, &mut s, &mut out, &mut resp);
        Ok((out, resp))
    }

    /// Denoises every patch of `img` and averages the overlaps.
    pub fn denoise_image(&self, img: &Image, grid: &PatchGrid) -> Result<Image> {
        if grid.dim() != self.dim {
            return Err(Error::invalid(format!(
                "patch size {} gives dimension {}, mixture dimension is {}",
                grid.patch_size(),
                grid.dim(),
                self.dim
            )));
        }
        let mut patches = extract_patches(img, grid)?;
        let mut s = self.scratch();
        let mut out = vec![0.0; self.dim];
        let mut resp = vec![0.0; self.comps.len()];
        for p in &mut patches {
            self.denoise_into(p, &mut s, &mut out, &mut resp);
            p.copy_from_slice(&out);
        }
        aggregate_patches(&patches, grid, img.height(), img.width())
    }
}

/// MMSE estimate of a clean patch under the mixture prior and white Gaussian
/// noise of variance `sigma2`, together with the posterior responsibilities.
pub fn patch_mmse(gmm: &Gmm, noisy: &[f64], sigma2: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    MmseDenoiser::new(gmm, sigma2)?.denoise_patch(noisy)
}

pub fn denoise_image(gmm: &Gmm, img: &Image, sigma2: f64, grid: &PatchGrid) -> Result<Image> {
    MmseDenoiser::new(gmm, sigma2)?.denoise_image(img, grid)
}

#[cfg(test)]
mod tests {
    use super::super::GaussianComponent;
    use super::*;

    fn two_component() -> Gmm {
        Gmm::new(
            2,
            vec![
                GaussianComponent {
                    weight: 0.3,
                    mean: vec![0.2, -0.1],
                    covariance: vec![0.5, 0.2, 0.2, 0.4],
                },
                GaussianComponent {
                    weight: 0.7,
                    mean: vec![-0.4, 0.6],
                    covariance: vec![0.1, -0.03, -0.03, 0.2],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let y = [0.37, -1.21];
        let (x, resp) = patch_mmse(&two_component(), &y, 0.0).unwrap();
        assert_eq!(x, y);
        assert!((resp.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_isotropic_component_is_wiener() {
        let s = 0.8;
        let g = Gmm::new(
            3,
            vec![GaussianComponent {
                weight: 1.0,
                mean: vec![0.0; 3],
                covariance: vec![s, 0.0, 0.0, 0.0, s, 0.0, 0.0, 0.0, s],
            }],
        )
        .unwrap();
        let y = [1.0, -2.0, 0.5];
        let sigma2 = 0.3;
        let (x, _) = patch_mmse(&g, &y, sigma2).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((xi - s / (s + sigma2) * yi).abs() < 1e-14);
        }
    }

    #[test]
    fn responsibilities_are_probabilities() {
        let g = two_component();
        for y in [[0.0, 0.0], [5.0, -3.0], [-40.0, 80.0]] {
            let (_, resp) = patch_mmse(&g, &y, 0.05).unwrap();
            assert!(resp.iter().all(|&r| r >= 0.0));
            assert!((resp.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn large_noise_tends_to_prior_mean() {
        let g = two_component();
        let (x, resp) = patch_mmse(&g, &[0.3, 0.9], 1e6).unwrap();
        let prior = g.prior_mean();
        for (a, b) in x.iter().zip(&prior) {
            assert!((a - b).abs() < 1e-3);
        }
        assert!((resp[0] - 0.3).abs() < 1e-3);
    }

    #[test]
    fn continuous_in_noise_variance() {
        let g = two_component();
        for y in [[0.1, 0.2], [-0.7, 1.4], [2.0, -1.0]] {
            for s2 in [0.01, 0.1, 1.0] {
                let (a, _) = patch_mmse(&g, &y, s2).unwrap();
                let (b, _) = patch_mmse(&g, &y, s2 + 1e-9).unwrap();
                let diff: f64 = a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
                assert!(diff <= 1e-6);
            }
        }
    }

    #[test]
    fn length_and_variance_checks() {
        let g = two_component();
        assert!(patch_mmse(&g, &[1.0], 0.1).is_err());
        assert!(patch_mmse(&g, &[1.0, 2.0], -0.1).is_err());
        assert!(denoise_image(&g, &Image::zeros(4, 4), 0.1, &PatchGrid::default()).is_err());
    }
}
