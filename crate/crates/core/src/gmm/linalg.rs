//! Small dense kernels on row-major square matrices.

/// Lower Cholesky factor of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
    log_det: f64,
}

impl Cholesky {
    /// Returns `None` when the matrix is not numerically positive definite.
    pub fn new(a: &[f64], n: usize) -> Option<Self> {
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        let log_det = 2.0 * (0..n).map(|i| l[i * n + i].ln()).sum::<f64>();
        Some(Self { n, l, log_det })
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// In place `b <- L^{-1} b`.
    pub fn solve_lower(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(l, x)| l * x).sum();
            b[i] = (b[i] - s) / self.l[i * n + i];
        }
    }

    /// In place `b <- L^{-T} b`.
    pub fn solve_upper_t(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let xi = b[i] / self.l[i * n + i];
            b[i] = xi;
            let row = &self.l[i * n..i * n + i];
            for (bk, l) in b[..i].iter_mut().zip(row) {
                *bk -= l * xi;
            }
        }
    }
}
