//! Synthetic point spread functions. Every generator returns a nonnegative
//! `k x k` kernel with unit sum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{check_odd, BlurKernel};
use crate::error::{Error, Result};

/// Subsamples per pixel edge for disk coverage.
const DISK_SUPERSAMPLE: usize = 16;

fn normalize(size: usize, mut values: Vec<f64>) -> BlurKernel {
    let s: f64 = values.iter().sum();
    for v in &mut values {
        *v /= s;
    }
    BlurKernel::from_raw(size, values)
}

/// Bilinear splat of mass `w` at offset `(dr, dc)` from the center. Mass that
/// lands outside the support is dropped.
fn splat(values: &mut [f64], size: usize, dr: f64, dc: f64, w: f64) {
    let c = (size / 2) as f64;
    let (r, col) = (c + dr, c + dc);
    let (r0, c0) = (r.floor(), col.floor());
    let (fr, fc) = (r - r0, col - c0);
    for (ir, wr) in [(r0, 1.0 - fr), (r0 + 1.0, fr)] {
        for (ic, wc) in [(c0, 1.0 - fc), (c0 + 1.0, fc)] {
            let ww = w * wr * wc;
            if ww == 0.0 || ir < 0.0 || ic < 0.0 || ir >= size as f64 || ic >= size as f64 {
                continue;
            }
            values[ir as usize * size + ic as usize] += ww;
        }
    }
}

pub fn gen_gaussian(size: usize, sigma: f64) -> Result<BlurKernel> {
    check_odd(size)?;
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("gaussian sigma must be positive, got {sigma}")));
    }
    let c = (size / 2) as f64;
    let mut values = Vec::with_capacity(size * size);
    for r in 0..size {
        for col in 0..size {
            let (dr, dc) = (r as f64 - c, col as f64 - c);
            values.push((-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp());
        }
    }
    Ok(normalize(size, values))
}

/// Straight motion path of `length` taps through the center. `angle_deg` is
/// measured counterclockwise from the horizontal axis.
pub fn gen_motion_linear(size: usize, length: f64, angle_deg: f64) -> Result<BlurKernel> {
    check_odd(size)?;
    if !(length >= 1.0 && length <= size as f64) {
        return Err(Error::invalid(format!(
            "motion length must lie in [1, {size}], got {length}"
        )));
    }
    let n = length.ceil() as usize;
    let spacing = if n > 1 { (length - 1.0) / (n - 1) as f64 } else { 0.0 };
    let half = (length - 1.0) / 2.0;
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let mut values = vec![0.0; size * size];
    for i in 0..n {
        let t = -half + i as f64 * spacing;
        splat(&mut values, size, -t * sin, t * cos, 1.0 / n as f64);
    }
    Ok(normalize(size, values))
}

/// Out-of-focus blur: a disk with edge pixels weighted by area coverage.
pub fn gen_disk(size: usize, radius: f64) -> Result<BlurKernel> {
    check_odd(size)?;
    if !(radius > 0.0 && radius <= size as f64 / 2.0) {
        return Err(Error::invalid(format!(
            "disk radius must lie in (0, {}], got {radius}",
            size as f64 / 2.0
        )));
    }
    let c = (size / 2) as f64;
    let s = DISK_SUPERSAMPLE;
    let r2 = radius * radius;
    let mut values = Vec::with_capacity(size * size);
    for r in 0..size {
        for col in 0..size {
            let mut hits = 0usize;
            for i in 0..s {
                let dy = r as f64 - c - 0.5 + (i as f64 + 0.5) / s as f64;
                for j in 0..s {
                    let dx = col as f64 - c - 0.5 + (j as f64 + 0.5) / s as f64;
                    if dy * dy + dx * dx <= r2 {
                        hits += 1;
                    }
                }
            }
            values.push(hits as f64 / (s * s) as f64);
        }
    }
    Ok(normalize(size, values))
}

/// Centered `width x width` box inside a `size x size` support.
pub fn gen_uniform(width: usize, size: usize) -> Result<BlurKernel> {
    check_odd(size)?;
    if width == 0 || width % 2 == 0 || width > size {
        return Err(Error::invalid(format!(
            "uniform width must be odd and at most {size}, got {width}"
        )));
    }
    let lo = (size - width) / 2;
    let w = 1.0 / (width * width) as f64;
    let values = (0..size * size)
        .map(|i| {
            let (r, c) = (i / size, i % size);
            if (lo..lo + width).contains(&r) && (lo..lo + width).contains(&c) {
                w
            } else {
                0.0
            }
        })
        .collect();
    Ok(BlurKernel::from_raw(size, values))
}

/// Random smooth camera-shake path: half-pixel steps whose heading drifts by
/// Gaussian increments. The path is centered on its centroid and shrunk to
/// fit the support when needed.
pub fn gen_nonlinear_motion(size: usize, num_steps: usize, seed: u64) -> Result<BlurKernel> {
    check_odd(size)?;
    if num_steps == 0 {
        return Err(Error::invalid("nonlinear motion needs at least one step"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let turn = Normal::new(0.0, 0.6).unwrap();
    let mut heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let mut pos = (0.0f64, 0.0f64);
    let mut path = Vec::with_capacity(num_steps);
    path.push(pos);
    for _ in 1..num_steps {
        heading += turn.sample(&mut rng);
        pos.0 += 0.5 * heading.sin();
        pos.1 += 0.5 * heading.cos();
        path.push(pos);
    }
    let n = num_steps as f64;
    let mean_r = path.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_c = path.iter().map(|p| p.1).sum::<f64>() / n;
    let extent = path
        .iter()
        .map(|p| (p.0 - mean_r).abs().max((p.1 - mean_c).abs()))
        .fold(0.0, f64::max);
    let limit = (size / 2) as f64;
    let scale = if extent > limit { limit / extent } else { 1.0 };
    let mut values = vec![0.0; size * size];
    for p in &path {
        splat(
            &mut values,
            size,
            (p.0 - mean_r) * scale,
            (p.1 - mean_c) * scale,
            1.0 / n,
        );
    }
    Ok(normalize(size, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_valid(k: &BlurKernel) {
        assert!(k.is_nonnegative());
        assert!((k.sum() - 1.0).abs() < 1e-12, "sum {}", k.sum());
    }

    fn rot90(k: &BlurKernel) -> Vec<f64> {
        let n = k.size();
        (0..n * n).map(|i| k.get(n - 1 - i % n, i / n)).collect()
    }

    fn flip(k: &BlurKernel) -> Vec<f64> {
        let n = k.size();
        (0..n * n).map(|i| k.get(i / n, n - 1 - i % n)).collect()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn gaussian_tiny_sigma_is_delta() {
        let k = gen_gaussian(15, 1e-3).unwrap();
        assert_close(k.values(), BlurKernel::delta(15).unwrap().values(), 1e-12);
    }

    #[test]
    fn gaussian_symmetry() {
        let k = gen_gaussian(7, 1.7).unwrap();
        assert_valid(&k);
        assert_close(&rot90(&k), k.values(), 1e-15);
        assert_close(&flip(&k), k.values(), 1e-15);
    }

    #[test]
    fn gaussian_three_by_three_hand_values() {
        let e1 = (-0.5f64).exp();
        let e2 = (-1.0f64).exp();
        let z = 1.0 + 4.0 * e1 + 4.0 * e2;
        let k = gen_gaussian(3, 1.0).unwrap();
        assert!((k.get(1, 1) - 1.0 / z).abs() < 1e-15);
        assert!((k.get(0, 1) - e1 / z).abs() < 1e-15);
        assert!((k.get(0, 0) - e2 / z).abs() < 1e-15);
    }

    #[test]
    fn motion_unit_length_is_delta() {
        assert_eq!(gen_motion_linear(9, 1.0, 33.0).unwrap(), BlurKernel::delta(9).unwrap());
    }

    #[test]
    fn motion_horizontal() {
        let k = gen_motion_linear(9, 5.0, 0.0).unwrap();
        for c in 0..9 {
            let expect = if (2..7).contains(&c) { 0.2 } else { 0.0 };
            assert!((k.get(4, c) - expect).abs() < 1e-15);
        }
        assert!((k.sum() - 1.0).abs() < 1e-12);
        assert_eq!(k.values().iter().filter(|&&v| v != 0.0).count(), 5);
    }

    #[test]
    fn motion_opposite_angles_mirror() {
        let a = gen_motion_linear(9, 5.0, 45.0).unwrap();
        let b = gen_motion_linear(9, 5.0, 225.0).unwrap();
        let n = a.size();
        let mirrored: Vec<f64> = (0..n * n).map(|i| b.values()[n * n - 1 - i]).collect();
        assert_close(a.values(), &mirrored, 1e-12);
        assert_valid(&a);
    }

    #[test]
    fn motion_too_long() {
        assert!(gen_motion_linear(9, 10.0, 0.0).is_err());
        assert!(gen_motion_linear(9, 0.5, 0.0).is_err());
    }

    #[test]
    fn disk_small_radius_is_delta() {
        assert_eq!(gen_disk(7, 0.4).unwrap(), BlurKernel::delta(7).unwrap());
    }

    #[test]
    fn disk_rotational_symmetry() {
        let k = gen_disk(11, 3.7).unwrap();
        assert_valid(&k);
        assert_close(&rot90(&k), k.values(), 1e-15);
    }

    #[test]
    fn disk_matches_fine_grid_coverage() {
        // Independent coverage estimate: walk one global fine grid over the
        // support and bin each sample into its pixel.
        let (size, radius) = (7usize, 2.0f64);
        let fine = 16 * size;
        let mut area = vec![0.0; size * size];
        let half = size as f64 / 2.0;
        for i in 0..fine {
            for j in 0..fine {
                let y = (i as f64 + 0.5) / 16.0 - half;
                let x = (j as f64 + 0.5) / 16.0 - half;
                if x * x + y * y <= radius * radius {
                    area[(i / 16) * size + j / 16] += 1.0;
                }
            }
        }
        let total: f64 = area.iter().sum();
        let oracle: Vec<f64> = area.iter().map(|a| a / total).collect();
        let k = gen_disk(size, radius).unwrap();
        assert_close(k.values(), &oracle, 1e-14);
        // coverage of the full disk area, up to sampling error
        assert!((total / 256.0 - std::f64::consts::PI * 4.0).abs() < 0.05);
    }

    #[test]
    fn uniform_boxes() {
        assert_eq!(gen_uniform(1, 5).unwrap(), BlurKernel::delta(5).unwrap());
        let k = gen_uniform(3, 5).unwrap();
        assert_eq!(k.values().iter().filter(|&&v| v == 1.0 / 9.0).count(), 9);
        for w in [1, 3, 5, 7, 9, 11, 13, 15] {
            assert_valid(&gen_uniform(w, 15).unwrap());
        }
        assert!(gen_uniform(4, 15).is_err());
        assert!(gen_uniform(17, 15).is_err());
    }

    #[test]
    fn nonlinear_motion_properties() {
        assert_eq!(gen_nonlinear_motion(15, 1, 9).unwrap(), BlurKernel::delta(15).unwrap());
        let a = gen_nonlinear_motion(15, 60, 4).unwrap();
        assert_eq!(a, gen_nonlinear_motion(15, 60, 4).unwrap());
        assert_ne!(a, gen_nonlinear_motion(15, 60, 5).unwrap());
        assert_valid(&a);
        for steps in [2, 10, 200, 2000] {
            assert_valid(&gen_nonlinear_motion(11, steps, 1).unwrap());
        }
    }
}
