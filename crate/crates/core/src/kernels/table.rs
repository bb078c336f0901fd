use std::f64::consts::PI;

use rayon::prelude::*;

use super::filter::h;
use super::proj::ln_p_prefactor;
use crate::error::{out_of_range, Error, Result};
use crate::hermite::{psi_at_zero, PI_POW_M14};
use crate::special::{ln_central_ratio, ln_gamma_over_factorial, parity_sign, CompensatedSum};

/// Upper bound on `⌊n²/2⌋` accepted by [`compile_kernel`].
pub const MAX_TABLE_LEN: usize = 10_000_000;

const RESCALE_AT: f64 = 1e100;
const RESCALE_BY: f64 = 1e-100;
const LN_RESCALE: f64 = 230.258_509_299_404_56;

/// A radial profile `r ↦ Φ̃(r)`.
pub trait RadialKernel: Send + Sync {
    /// Value at radius `r` (the profile is even, so the sign of `r` is ignored).
    fn eval_radial(&self, r: f64) -> f64;
}

/// Compiled coefficients `a_ℓ` with `Φ̃_{n,q}(x) = Σ_ℓ a_ℓ ψ_{2ℓ}(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    n: f64,
    q: usize,
    a: Vec<f64>,
    // recurrence coefficients √(2/k) and √((k-1)/k), k = 1..=2L
    up: Vec<f64>,
    down: Vec<f64>,
}

impl KernelTable {
    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// `a_0, …, a_L` with `L = ⌊n²/2⌋`.
    pub fn coeffs(&self) -> &[f64] {
        &self.a
    }

    /// Highest Hermite degree `2L` touched by an evaluation.
    pub fn max_degree(&self) -> usize {
        2 * (self.a.len() - 1)
    }

    /// `Φ̃_{n,q}(r)` by a single streaming pass over `ψ_0 … ψ_{2L}`.
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        let mut log_scale = -0.5 * r * r + PI_POW_M14.ln();
        let mut scale = log_scale.exp();
        let mut prev = 0.0;
        let mut cur = 1.0;
        let mut acc = CompensatedSum::new();
        acc.add(self.a[0] * cur * scale);
        for k in 1..=self.max_degree() {
            let next = self.up[k] * r * cur - self.down[k] * prev;
            prev = cur;
            cur = next;
            if cur.abs() > RESCALE_AT {
                prev *= RESCALE_BY;
                cur *= RESCALE_BY;
                log_scale += LN_RESCALE;
                scale = log_scale.exp();
            }
            if k % 2 == 0 {
                acc.add(self.a[k / 2] * cur * scale);
            }
        }
        acc.value()
    }
}

impl RadialKernel for KernelTable {
    fn eval_radial(&self, r: f64) -> f64 {
        self.eval(r)
    }
}

/// Compiles `Φ̃_{n,q}` into its even-Hermite coefficient table.
pub fn compile_kernel(n: f64, q: usize) -> Result<KernelTable> {
    if !n.is_finite() {
        return Err(Error::NonFinite("kernel degree"));
    }
    if n < 1.0 {
        return Err(out_of_range("n", format!("{n} < 1")));
    }
    if q == 0 {
        return Err(out_of_range("q", "must be at least 1"));
    }
    let len = (n * n / 2.0).floor();
    if len > MAX_TABLE_LEN as f64 {
        return Err(out_of_range(
            "kernel table",
            format!("⌊n²/2⌋ = {len} exceeds {MAX_TABLE_LEN}"),
        ));
    }
    let big_l = len as usize;
    let filt: Vec<f64> = (0..=big_l).map(|m| h((2.0 * m as f64).sqrt() / n)).collect();

    let a = if q == 1 {
        filt.iter()
            .enumerate()
            .map(|(l, hm)| if *hm == 0.0 { 0.0 } else { hm * psi_at_zero(2 * l) })
            .collect()
    } else {
        let half = (q as f64 - 1.0) / 2.0;
        let ratio: Vec<f64> = (0..=big_l)
            .map(|j| ln_gamma_over_factorial(half, j).exp())
            .collect();
        let pre = ln_p_prefactor(q);
        let last = filt.iter().rposition(|v| *v != 0.0);
        (0..=big_l)
            .map(|l| match last {
                Some(top) if l <= top => {
                    let s: CompensatedSum = (l..=top).map(|m| filt[m] * ratio[m - l]).collect();
                    parity_sign(l) * (pre + ln_central_ratio(l)).exp() * s.value()
                }
                _ => 0.0,
            })
            .collect()
    };
    let a: Vec<f64> = a;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kernel coefficient"));
    }
    let kmax = 2 * big_l;
    let mut up = vec![0.0; kmax + 1];
    let mut down = vec![0.0; kmax + 1];
    for k in 1..=kmax {
        let kf = k as f64;
        up[k] = (2.0 / kf).sqrt();
        down[k] = ((kf - 1.0) / kf).sqrt();
    }
    Ok(KernelTable { n, q, a, up, down })
}

/// Checked evaluation of `Φ̃_{n,q}(r)`.
pub fn eval_kernel(table: &KernelTable, r: f64) -> Result<f64> {
    if !r.is_finite() {
        return Err(Error::NonFinite("kernel radius"));
    }
    Ok(table.eval(r))
}

const CHEB_DEGREE: usize = 16;
const CHEB_NODES: usize = CHEB_DEGREE + 1;

/// Piecewise Chebyshev interpolant of a compiled kernel.
///
/// Panels have width `min(1/2, 3/√(2K+1))` where `K` is the top Hermite
/// degree, and cover `[0, √(2K+1) + 12]`; radii beyond the table fall back to
/// the exact stream.
#[derive(Debug, Clone)]
pub struct TabulatedKernel {
    exact: KernelTable,
    width: f64,
    r_max: f64,
    panels: Vec<[f64; CHEB_NODES]>,
}

impl TabulatedKernel {
    pub fn new(table: &KernelTable) -> Self {
        let turning = (2.0 * table.max_degree() as f64 + 1.0).sqrt();
        let width = (3.0 / turning).min(0.5);
        let count = ((turning + 12.0) / width).ceil() as usize;
        let r_max = count as f64 * width;
        let angles: Vec<f64> = (0..CHEB_NODES)
            .map(|j| PI * (j as f64 + 0.5) / CHEB_NODES as f64)
            .collect();
        let panels = (0..count)
            .into_par_iter()
            .map(|p| {
                let lo = p as f64 * width;
                let vals: Vec<f64> = angles
                    .iter()
                    .map(|t| table.eval(lo + 0.5 * width * (1.0 + t.cos())))
                    .collect();
                let mut c = [0.0; CHEB_NODES];
                for (k, ck) in c.iter_mut().enumerate() {
                    let s: f64 = vals
                        .iter()
                        .zip(&angles)
                        .map(|(v, t)| v * (k as f64 * t).cos())
                        .sum();
                    *ck = 2.0 * s / CHEB_NODES as f64;
                }
                c[0] *= 0.5;
                c
            })
            .collect();
        Self {
            exact: table.clone(),
            width,
            r_max,
            panels,
        }
    }

    pub fn table(&self) -> &KernelTable {
        &self.exact
    }

    /// Radius beyond which evaluation falls back to the exact stream.
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= self.r_max {
            return self.exact.eval(r);
        }
        let p = ((r / self.width) as usize).min(self.panels.len() - 1);
        let lo = p as f64 * self.width;
        let u = 2.0 * (r - lo) / self.width - 1.0;
        let c = &self.panels[p];
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &ck in c[1..].iter().rev() {
            let b0 = 2.0 * u * b1 - b2 + ck;
            b2 = b1;
            b1 = b0;
        }
        u * b1 - b2 + c[0]
    }
}

impl RadialKernel for TabulatedKernel {
    fn eval_radial(&self, r: f64) -> f64 {
        self.eval(r)
    }
}
