//! Gaussian mixture patch prior: EM training, closed-form MMSE denoising and
//! the model file format.

mod em;
mod io;
mod linalg;
mod mmse;

pub use em::{em_fit, EmConfig, EmFit};
pub use io::{gmm_from_json, gmm_to_json, load_gmm, save_gmm, GMM_FORMAT_VERSION};
pub use mmse::{denoise_image, patch_mmse, MmseDenoiser};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Row-major `dim x dim`.
    pub covariance: Vec<f64>,
}

/// Mixture over `dim`-dimensional vectors. Immutable once built; every
/// constructor checks the weight, symmetry and PSD invariants.
#[derive(Clone, Debug, PartialEq)]
pub struct Gmm {
    dim: usize,
    components: Vec<GaussianComponent>,
}

pub(crate) const WEIGHT_SUM_TOL: f64 = 1e-9;
pub(crate) const SYMMETRY_TOL: f64 = 1e-12;
pub(crate) const PSD_TOL: f64 = 1e-10;

impl Gmm {
    pub fn new(dim: usize, components: Vec<GaussianComponent>) -> Result<Self> {
        validate(dim, &components).map_err(Error::InvalidArgument)?;
        Ok(Self { dim, components })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    /// Mixture mean `sum_j w_j mu_j`.
    pub fn prior_mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for c in &self.components {
            for (o, m) in out.iter_mut().zip(&c.mean) {
                *o += c.weight * m;
            }
        }
        out
    }
}

/// Checks the mixture invariants, naming the offending field on failure.
pub(crate) fn validate(dim: usize, components: &[GaussianComponent]) -> std::result::Result<(), String> {
    if dim == 0 {
        return Err("dim must be positive".into());
    }
    if components.is_empty() {
        return Err("K must be at least 1".into());
    }
    let mut total = 0.0;
    for (j, c) in components.iter().enumerate() {
        if !(c.weight > 0.0 && c.weight <= 1.0) {
            return Err(format!("weights[{j}] = {} is outside (0, 1]", c.weight));
        }
        total += c.weight;
        if c.mean.len() != dim {
            return Err(format!("means[{j}] has length {}, expected {dim}", c.mean.len()));
        }
        if c.mean.iter().any(|v| !v.is_finite()) {
            return Err(format!("means[{j}] contains a non-finite value"));
        }
        if c.covariance.len() != dim * dim {
            return Err(format!(
                "covariances[{j}] has length {}, expected {}",
                c.covariance.len(),
                dim * dim
            ));
        }
        if c.covariance.iter().any(|v| !v.is_finite()) {
            return Err(format!("covariances[{j}] contains a non-finite value"));
        }
        for r in 0..dim {
            for s in r + 1..dim {
                if (c.covariance[r * dim + s] - c.covariance[s * dim + r]).abs() > SYMMETRY_TOL {
                    return Err(format!("covariances[{j}] is not symmetric at ({r}, {s})"));
                }
            }
        }
        let m = DMatrix::from_row_slice(dim, dim, &c.covariance);
        let min_eig = SymmetricEigen::new(m).eigenvalues.min();
        if min_eig < -PSD_TOL {
            return Err(format!(
                "covariances[{j}] is not positive semidefinite (eigenvalue {min_eig:e})"
            ));
        }
    }
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(format!("weights sum to {total}, expected 1"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comp(weight: f64, cov: Vec<f64>) -> GaussianComponent {
        GaussianComponent {
            weight,
            mean: vec![0.0, 0.0],
            covariance: cov,
        }
    }

    #[test]
    fn invariants_enforced() {
        let eye = vec![1.0, 0.0, 0.0, 1.0];
        assert!(Gmm::new(2, vec![comp(1.0, eye.clone())]).is_ok());
        assert!(Gmm::new(2, vec![]).is_err());
        assert!(Gmm::new(2, vec![comp(0.6, eye.clone()), comp(0.6, eye.clone())]).is_err());
        assert!(Gmm::new(2, vec![comp(1.0, vec![1.0, 0.1, 0.0, 1.0])]).is_err());
        assert!(Gmm::new(2, vec![comp(1.0, vec![1.0, 2.0, 2.0, 1.0])]).is_err());
        assert!(Gmm::new(3, vec![comp(1.0, eye)]).is_err());
    }

    #[test]
    fn prior_mean_is_weighted() {
        let eye = vec![1.0, 0.0, 0.0, 1.0];
        let g = Gmm::new(
            2,
            vec![
                GaussianComponent { weight: 0.25, mean: vec![4.0, 0.0], covariance: eye.clone() },
                GaussianComponent { weight: 0.75, mean: vec![0.0, 4.0], covariance: eye },
            ],
        )
        .unwrap();
        assert_eq!(g.prior_mean(), vec![1.0, 3.0]);
    }
}
