use std::collections::HashSet;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::linalg::Cholesky;
use super::mmse::MmseDenoiser;
use super::{GaussianComponent, Gmm};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EmConfig {
    pub num_components: usize,
    pub max_iters: usize,
    /// Stop once the relative gain in mean log-likelihood falls below this.
    pub tol: f64,
    /// Added to every covariance diagonal in each M-step.
    pub cov_floor: f64,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            num_components: 20,
            max_iters: 100,
            tol: 1e-6,
            cov_floor: 1e-6,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_components == 0 {
            return Err(Error::invalid("number of components must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("EM tolerance must be positive"));
        }
        if !(self.cov_floor > 0.0 && self.cov_floor.is_finite()) {
            return Err(Error::invalid("covariance floor must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EmFit {
    pub gmm: Gmm,
    /// Mean per-sample log-likelihood after initialization and after each
    /// accepted M-step. Nondecreasing.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

impl EmFit {
    pub fn iterations(&self) -> usize {
        self.log_likelihood.len() - 1
    }

    pub fn final_log_likelihood(&self) -> f64 {
        *self.log_likelihood.last().unwrap()
    }
}

/// Row-major sample matrix.
struct Samples<'a> {
    data: &'a [f64],
    n: usize,
    dim: usize,
}

impl Samples<'_> {
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Maximum-likelihood full-covariance mixture fit by EM.
///
/// Initialization is k-means++ seeding followed by one hard assignment; the
/// initial parameters are the M-step of those hard responsibilities. The run
/// stops at `max_iters` M-steps, when the relative log-likelihood gain drops
/// below `tol`, or when an M-step fails to increase the likelihood, in which
/// case the previous parameters are kept.
pub fn em_fit(patches: &[Vec<f64>], cfg: &EmConfig) -> Result<EmFit> {
    cfg.validate()?;
    let k = cfg.num_components;
    let dim = patches.first().map(Vec::len).unwrap_or(0);
    if dim == 0 {
        return Err(Error::invalid("no training vectors"));
    }
    if let Some(i) = patches.iter().position(|p| p.len() != dim) {
        return Err(Error::invalid(format!(
            "training vector {i} has length {}, expected {dim}",
            patches[i].len()
        )));
    }
    if patches.len() < k {
        return Err(Error::invalid(format!(
            "{} training vectors cannot fit {k} components",
            patches.len()
        )));
    }
    let flat: Vec<f64> = patches.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("training vectors contain non-finite values"));
    }
    let x = Samples {
        data: &flat,
        n: patches.len(),
        dim,
    };
    check_distinct(patches, k)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let global_cov = {
        let ones = vec![1.0; x.n];
        let mean = weighted_mean(&x, &ones, x.n as f64);
        weighted_scatter(&x, &ones, &mean, x.n as f64)
    };

    let mut resp = hard_assignments(&x, &kmeans_pp(&x, k, &mut rng), k);
    let mut gmm = m_step(&x, &resp, k, cfg.cov_floor, &global_cov, &mut rng)?;
    let mut ll = e_step(&x, &gmm, &mut resp)?;
    let mut trace = vec![ll];
    let mut converged = false;
    let mut next = vec![0.0; resp.len()];

    for it in 0..cfg.max_iters {
        let candidate = m_step(&x, &resp, k, cfg.cov_floor, &global_cov, &mut rng)?;
        let ll_new = e_step(&x, &candidate, &mut next)?;
        if !(ll_new >= ll) {
            debug!("EM iteration {it}: log-likelihood {ll_new} below {ll}, stopping");
            converged = true;
            break;
        }
        gmm = candidate;
        std::mem::swap(&mut resp, &mut next);
        trace.push(ll_new);
        let gain = (ll_new - ll) / ll.abs().max(f64::MIN_POSITIVE);
        debug!("EM iteration {it}: mean log-likelihood {ll_new}");
        ll = ll_new;
        if gain < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(EmFit {
        gmm,
        log_likelihood: trace,
        converged,
    })
}

fn check_distinct(patches: &[Vec<f64>], k: usize) -> Result<()> {
    let mut seen = HashSet::new();
    for p in patches {
        seen.insert(p.iter().map(|v| v.to_bits()).collect::<Vec<u64>>());
        if seen.len() >= k {
            return Ok(());
        }
    }
    Err(Error::invalid(format!(
        "only {} distinct training vectors for {k} components",
        seen.len()
    )))
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// D^2-weighted seeding. Indices of the chosen samples.
fn kmeans_pp(x: &Samples, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut centers = vec![rng.random_range(0..x.n)];
    let mut d2: Vec<f64> = (0..x.n).map(|i| dist2(x.row(i), x.row(centers[0]))).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = x.n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            if d2[chosen] == 0.0 {
                // rounding pushed us past the end; take the last positive
                chosen = d2.iter().rposition(|&d| d > 0.0).unwrap();
            }
            chosen
        } else {
            rng.random_range(0..x.n)
        };
        centers.push(pick);
        let c = x.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(dist2(x.row(i), &c));
        }
    }
    centers
}

/// One-hot responsibilities (row-major `n x k`) to the nearest center.
fn hard_assignments(x: &Samples, centers: &[usize], k: usize) -> Vec<f64> {
    let mut resp = vec![0.0; x.n * k];
    for i in 0..x.n {
        let mut best = (f64::INFINITY, 0);
        for (j, &c) in centers.iter().enumerate() {
            let d = dist2(x.row(i), x.row(c));
            if d < best.0 {
                best = (d, j);
            }
        }
        resp[i * k + best.1] = 1.0;
    }
    resp
}

fn weighted_mean(x: &Samples, w: &[f64], total: f64) -> Vec<f64> {
    let mut mean = vec![0.0; x.dim];
    for i in 0..x.n {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += wi * v;
        }
    }
    for m in &mut mean {
        *m /= total;
    }
    mean
}

/// `sum_i w_i (x_i - mean)(x_i - mean)^T / total`, symmetric by construction.
fn weighted_scatter(x: &Samples, w: &[f64], mean: &[f64], total: f64) -> Vec<f64> {
    let d = x.dim;
    let mut cov = vec![0.0; d * d];
    let mut r = vec![0.0; d];
    for i in 0..x.n {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        for ((ri, xi), mi) in r.iter_mut().zip(x.row(i)).zip(mean) {
            *ri = xi - mi;
        }
        for a in 0..d {
            let wa = wi * r[a];
            let row = &mut cov[a * d..a * d + d];
            for b in a..d {
                row[b] += wa * r[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] / total;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }
    cov
}

fn m_step(
    x: &Samples,
    resp: &[f64],
    k: usize,
    floor: f64,
    global_cov: &[f64],
    rng: &mut impl Rng,
) -> Result<Gmm> {
    let d = x.dim;
    let mut counts = Vec::with_capacity(k);
    let mut comps = Vec::with_capacity(k);
    let mut w = vec![0.0; x.n];
    for j in 0..k {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = resp[i * k + j];
        }
        let nj: f64 = w.iter().sum();
        let mut comp = None;
        if nj > 1e-8 {
            let mean = weighted_mean(x, &w, nj);
            let mut cov = weighted_scatter(x, &w, &mean, nj);
            for a in 0..d {
                cov[a * d + a] += floor;
            }
            if Cholesky::new(&cov, d).is_some() {
                comp = Some((nj, mean, cov));
            }
        }
        let (nj, mean, covariance) = comp.unwrap_or_else(|| {
            let i = rng.random_range(0..x.n);
            warn!("EM component {j} collapsed (mass {nj:e}); reinitialized from sample {i}");
            let mut cov = global_cov.to_vec();
            for a in 0..d {
                cov[a * d + a] += floor;
            }
            (1.0, x.row(i).to_vec(), cov)
        });
        counts.push(nj);
        comps.push(GaussianComponent {
            weight: 0.0,
            mean,
            covariance,
        });
    }
    let total: f64 = counts.iter().sum();
    for (c, n) in comps.iter_mut().zip(&counts) {
        c.weight = n / total;
    }
    Gmm::new(d, comps)
}

/// Fills `resp` and returns the mean log-likelihood.
fn e_step(x: &Samples, gmm: &Gmm, resp: &mut [f64]) -> Result<f64> {
    let k = gmm.num_components();
    let model = MmseDenoiser::new(gmm, 0.0)?;
    let mut s = model.scratch();
    let mut total = 0.0;
    for i in 0..x.n {
        total += model.responsibilities(x.row(i), &mut s, &mut resp[i * k..(i + 1) * k]);
    }
    Ok(total / x.n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_samples(n: usize, seed: u64, mean: &[f64], chol: &[f64]) -> Vec<Vec<f64>> {
        let d = mean.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                (0..d)
                    .map(|a| mean[a] + (0..=a).map(|b| chol[a * d + b] * z[b]).sum::<f64>())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn single_component_is_sample_moments() {
        let data = gaussian_samples(500, 1, &[1.0, -2.0, 0.5], &[1.0, 0.0, 0.0, 0.3, 0.8, 0.0, -0.2, 0.1, 0.5]);
        let cfg = EmConfig {
            num_components: 1,
            ..EmConfig::default()
        };
        let fit = em_fit(&data, &cfg).unwrap();
        let n = data.len() as f64;
        let mean: Vec<f64> = (0..3).map(|a| data.iter().map(|p| p[a]).sum::<f64>() / n).collect();
        let c = &fit.gmm.components()[0];
        assert_eq!(c.weight, 1.0);
        for a in 0..3 {
            assert!((c.mean[a] - mean[a]).abs() < 1e-10);
            for b in 0..3 {
                let s = data.iter().map(|p| (p[a] - mean[a]) * (p[b] - mean[b])).sum::<f64>() / n;
                let floor = if a == b { cfg.cov_floor } else { 0.0 };
                assert!((c.covariance[a * 3 + b] - (s + floor)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mean_recovery_within_standard_error() {
        let mu = [0.5, -1.0, 2.0, 0.0];
        let chol = [
            1.0, 0.0, 0.0, 0.0, //
            0.5, 0.7, 0.0, 0.0, //
            0.0, 0.2, 0.4, 0.0, //
            -0.3, 0.0, 0.1, 0.9,
        ];
        let data = gaussian_samples(5000, 7, &mu, &chol);
        let fit = em_fit(&data, &EmConfig { num_components: 1, ..EmConfig::default() }).unwrap();
        let c = &fit.gmm.components()[0];
        for a in 0..4 {
            let var: f64 = (0..=a).map(|b| chol[a * 4 + b].powi(2)).sum();
            let se = (var / 5000.0).sqrt();
            assert!((c.mean[a] - mu[a]).abs() < 3.0 * se, "coordinate {a}");
        }
    }

    #[test]
    fn log_likelihood_nondecreasing() {
        let mut data = gaussian_samples(300, 3, &[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]);
        data.extend(gaussian_samples(300, 4, &[4.0, 1.0], &[0.5, 0.0, 0.2, 0.3]));
        data.extend(gaussian_samples(300, 5, &[-3.0, 3.0], &[0.2, 0.0, -0.1, 0.6]));
        for seed in 0..5 {
            let fit = em_fit(
                &data,
                &EmConfig { num_components: 3, seed, max_iters: 200, tol: 1e-10, ..EmConfig::default() },
            )
            .unwrap();
            for w in fit.log_likelihood.windows(2) {
                assert!(w[1] >= w[0] - 1e-9);
            }
            assert!(fit.iterations() >= 1);
        }
    }

    #[test]
    fn same_seed_same_model() {
        let data = gaussian_samples(200, 9, &[0.0, 1.0], &[1.0, 0.0, 0.5, 0.5]);
        let cfg = EmConfig { num_components: 4, seed: 42, ..EmConfig::default() };
        assert_eq!(em_fit(&data, &cfg).unwrap().gmm, em_fit(&data, &cfg).unwrap().gmm);
    }

    #[test]
    fn argument_errors() {
        let cfg = EmConfig { num_components: 3, ..EmConfig::default() };
        assert!(em_fit(&[vec![0.0], vec![1.0]], &cfg).is_err());
        assert!(em_fit(&vec![vec![0.0]; 10], &cfg).is_err());
        assert!(em_fit(&[vec![0.0, 1.0], vec![1.0]], &EmConfig { num_components: 1, ..cfg.clone() }).is_err());
        assert!(em_fit(&[], &cfg).is_err());
        assert!(em_fit(&vec![vec![1.0]; 4], &EmConfig { tol: 0.0, ..cfg.clone() }).is_err());
        assert!(em_fit(&vec![vec![1.0]; 4], &EmConfig { cov_floor: 0.0, ..cfg }).is_err());
    }

    #[test]
    fn constant_data_single_component() {
        let fit = em_fit(&vec![vec![0.5; 4]; 20], &EmConfig { num_components: 1, ..EmConfig::default() }).unwrap();
        let c = &fit.gmm.components()[0];
        assert_eq!(c.mean, vec![0.5; 4]);
        assert!((c.covariance[0] - 1e-6).abs() < 1e-18);
    }
}
