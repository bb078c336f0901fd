//! Comparison operators: the heat-kernel average, the Bernstein operator
//! and a two-pass density-corrected kernel estimate.

use std::f64::consts::PI;

use lockern::estimator::{estimate_batch, Dataset, EstimatorConfig};
use lockern::{Error, Result};
use statrs::function::factorial::ln_binomial;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `(1/(M(4πt)^{q/2})) Σ_j exp(-|x - y_j|²/t) F_j`.
pub fn heat_kernel_baseline(ds: &Dataset, t: f64, x: &[f64]) -> Result<f64> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::OutOfRange {
            what: "t",
            detail: format!("{t} must be positive"),
        });
    }
    if x.len() != ds.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.ambient_dim(),
            got: x.len(),
        });
    }
    let q = ds.manifold_dim() as f64;
    let norm = (4.0 * PI * t).powf(-0.5 * q) / ds.len() as f64;
    let s: f64 = ds
        .samples()
        .iter()
        .map(|s| (-sq_dist(x, &s.point) / t).exp() * s.value)
        .sum();
    Ok(norm * s)
}

/// The heat-kernel average divided by the same average of the constant 1.
pub fn heat_kernel_normalized(ds: &Dataset, t: f64, x: &[f64]) -> Result<f64> {
    let ones = ds.with_values(&vec![1.0; ds.len()])?;
    let den = heat_kernel_baseline(&ones, t, x)?;
    if den == 0.0 {
        return Err(Error::NonFinite("heat-kernel normalization"));
    }
    Ok(heat_kernel_baseline(ds, t, x)? / den)
}

/// `Σ_k C(n,k) f(k/n) x^k (1-x)^{n-k}` on `[0, 1]`.
pub fn bernstein_demo(f: &dyn Fn(f64) -> f64, n: usize, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::OutOfRange {
            what: "n",
            detail: "must be at least 1".into(),
        });
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange {
            what: "x",
            detail: format!("{x} not in [0, 1]"),
        });
    }
    if x == 0.0 {
        return Ok(f(0.0));
    }
    if x == 1.0 {
        return Ok(f(1.0));
    }
    let (lx, l1x) = (x.ln(), (-x).ln_1p());
    let nf = n as f64;
    let s = (0..=n)
        .map(|k| {
            let w = (ln_binomial(n as u64, k as u64) + k as f64 * lx + (n - k) as f64 * l1x).exp();
            w * f(k as f64 / nf)
        })
        .sum();
    Ok(s)
}

/// `sup_x n·|B_n(x²) - x²|` over a uniform grid of `[0, 1]`.
pub fn bernstein_scaled_error(n: usize, grid: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..=grid {
        let x = i as f64 / grid as f64;
        let b = bernstein_demo(&|u| u * u, n, x)?;
        worst = worst.max(n as f64 * (b - x * x).abs());
    }
    Ok(worst)
}

/// Kernel estimate divided by the kernel estimate of the constant 1 on the
/// same samples, which removes a non-uniform sampling density.
pub fn density_corrected_estimate(ds: &Dataset, cfg: &EstimatorConfig, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let num = estimate_batch(ds, cfg, xs)?;
    let ones = ds.with_values(&vec![1.0; ds.len()])?;
    let den = estimate_batch(&ones, cfg, xs)?;
    Ok(num.iter().zip(&den).map(|(a, b)| a / b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernstein_reproduces_linears() {
        for n in [1, 5, 40] {
            for x in [0.0, 0.2, 0.5, 0.93, 1.0] {
                let b = bernstein_demo(&|u| 3.0 - 2.0 * u, n, x).unwrap();
                assert!((b - (3.0 - 2.0 * x)).abs() < 1e-12);
                let c = bernstein_demo(&|_| 4.5, n, x).unwrap();
                assert!((c - 4.5).abs() < 1e-12);
            }
        }
        assert!(bernstein_demo(&|u| u, 0, 0.5).is_err());
        assert!(bernstein_demo(&|u| u, 3, 1.5).is_err());
    }

    #[test]
    fn bernstein_square_is_analytic() {
        for n in [16, 64, 256] {
            for x in [0.1, 0.5, 0.77] {
                let b = bernstein_demo(&|u| u * u, n, x).unwrap();
                let exact = x * x + x * (1.0 - x) / n as f64;
                assert!((b - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn heat_single_sample_is_a_bump() {
        let ds = Dataset::from_parts(vec![vec![0.0, 0.0]], vec![2.0], 1).unwrap();
        let t = 0.1;
        let v = heat_kernel_baseline(&ds, t, &[0.3, 0.0]).unwrap();
        let expect = 2.0 * (-0.09f64 / t).exp() / (4.0 * PI * t).sqrt();
        assert!((v - expect).abs() < 1e-14);
        assert!(heat_kernel_baseline(&ds, 0.0, &[0.0, 0.0]).is_err());
        assert!((heat_kernel_normalized(&ds, t, &[0.3, 0.0]).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn density_correction_recovers_constants() {
        let pts: Vec<Vec<f64>> = (0..400).map(|i| vec![(i as f64 / 400.0).powi(2) * 4.0 - 2.0]).collect();
        let ds = Dataset::from_parts(pts, vec![1.5; 400], 1).unwrap();
        let cfg = EstimatorConfig::new(6.0, 1.0, 1).unwrap();
        let v = density_corrected_estimate(&ds, &cfg, &[vec![0.0], vec![1.0]]).unwrap();
        for e in v {
            assert!((e - 1.5).abs() < 1e-12);
        }
    }
}
