use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::filter::h;
use crate::error::{out_of_range, Error, Result};
use crate::hermite::{psi_at_zero, psi_values};
use crate::multi_index::for_each_composition;
use crate::special::{binom, ln_central_ratio, ln_gamma_over_factorial, parity_sign, CompensatedSum};

/// Largest `m` accepted by [`proj_tensor`].
pub const MAX_TENSOR_DEGREE: usize = 30;
/// Largest dimension accepted by [`proj_tensor`].
pub const MAX_TENSOR_DIM: usize = 4;

/// Coefficients `c_{m,ℓ}` with `𝒫_{m,q}(x) = Σ_ℓ c_{m,ℓ} ψ_{2ℓ}(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PCoeffs {
    pub m: usize,
    pub q: usize,
    pub coeffs: Vec<f64>,
}

impl PCoeffs {
    /// `𝒫_{m,q}(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        let row = psi_values(2 * self.m, x);
        self.coeffs
            .iter()
            .enumerate()
            .map(|(l, c)| c * row[2 * l])
            .collect::<CompensatedSum>()
            .value()
    }
}

/// Prefactor `1/(π^{(2q-1)/4} Γ((q-1)/2))` in log form, for `q ≥ 2`.
pub(crate) fn ln_p_prefactor(q: usize) -> f64 {
    let qf = q as f64;
    -(2.0 * qf - 1.0) / 4.0 * PI.ln() - ln_gamma((qf - 1.0) / 2.0)
}

/// Returns the expansion of `𝒫_{m,q}` over even Hermite functions.
///
/// The `q = 1` branch holds the single entry `ψ_{2m}(0)` at `ℓ = m`.
pub fn p_coeffs(m: usize, q: usize) -> Result<PCoeffs> {
    if q == 0 {
        return Err(out_of_range("q", "must be at least 1"));
    }
    let mut coeffs = vec![0.0; m + 1];
    if q == 1 {
        coeffs[m] = psi_at_zero(2 * m);
    } else {
        let a = (q as f64 - 1.0) / 2.0;
        let pre = ln_p_prefactor(q);
        for (l, c) in coeffs.iter_mut().enumerate() {
            let ln = pre + ln_gamma_over_factorial(a, m - l) + ln_central_ratio(l);
            *c = parity_sign(l) * ln.exp();
        }
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("projection coefficient"));
    }
    Ok(PCoeffs { m, q, coeffs })
}

/// `D_{d;r}` for even `r = 2s`, `s = 0..=smax`; odd `r` read as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DSequence {
    d: i64,
    even: Vec<f64>,
}

impl DSequence {
    pub fn d(&self) -> i64 {
        self.d
    }

    /// Largest `r` held.
    pub fn rmax(&self) -> usize {
        2 * (self.even.len() - 1) + 1
    }

    /// `D_{d;r}`; zero for odd `r` and beyond the stored range.
    pub fn get(&self, r: usize) -> f64 {
        if r % 2 == 1 {
            0.0
        } else {
            self.even.get(r / 2).copied().unwrap_or(0.0)
        }
    }

    /// Truncated generating series `Σ_{r ≤ rmax} D_{d;r} w^r`.
    pub fn series(&self, w: f64) -> f64 {
        let w2 = w * w;
        let mut pow = 1.0;
        let mut acc = CompensatedSum::new();
        for v in &self.even {
            acc.add(v * pow);
            pow *= w2;
        }
        acc.value()
    }
}

/// The sequence `D_{d;r}` for `0 ≤ r ≤ rmax`, any integer `d`.
pub fn d_sequence(d: i64, rmax: usize) -> DSequence {
    let smax = rmax / 2;
    let df = d as f64;
    let lead = (-df / 2.0) * PI.ln();
    let even = (0..=smax)
        .map(|s| {
            if d >= 1 {
                (lead + ln_gamma_over_factorial(df / 2.0, s) - ln_gamma(df / 2.0)).exp()
            } else {
                lead.exp() * parity_sign(s) * binom(-df / 2.0, s)
            }
        })
        .collect();
    DSequence { d, even }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_point(p: &[f64], what: &'static str) -> Result<()> {
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

/// Tensor sum `Σ_{|k|₁ = m} ψ_k(x) ψ_k(y)` without scale guards.
pub(crate) fn proj_tensor_unchecked(m: usize, x: &[f64], y: &[f64]) -> f64 {
    let rx: Vec<Vec<f64>> = x.iter().map(|&v| psi_values(m, v)).collect();
    let ry: Vec<Vec<f64>> = y.iter().map(|&v| psi_values(m, v)).collect();
    proj_from_rows(m, &rx, &ry)
}

fn proj_from_rows(m: usize, rx: &[Vec<f64>], ry: &[Vec<f64>]) -> f64 {
    let mut acc = CompensatedSum::new();
    for_each_composition(m, rx.len(), |k| {
        let mut term = 1.0;
        for (i, &ki) in k.iter().enumerate() {
            term *= rx[i][ki] * ry[i][ki];
        }
        acc.add(term);
    });
    acc.value()
}

/// `Proj_{m,d}(x, y)` by direct enumeration of multi-indices.
///
/// Cost is binomial in `(m, d)`, so the scale is capped at
/// `d ≤ 4`, `m ≤ 30`.
pub fn proj_tensor(m: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x.len();
    if d == 0 || d > MAX_TENSOR_DIM {
        return Err(out_of_range("dimension", format!("{d} not in 1..={MAX_TENSOR_DIM}")));
    }
    if m > MAX_TENSOR_DEGREE {
        return Err(out_of_range("degree", format!("{m} exceeds {MAX_TENSOR_DEGREE}")));
    }
    check_point(x, "projection point")?;
    check_point(y, "projection point")?;
    Ok(proj_tensor_unchecked(m, x, y))
}

/// Largest `|w|` accepted by the Mehler closed form.
pub const MEHLER_MAX_W: f64 = 0.95;

fn mehler_check(x: &[f64], y: &[f64], w: f64) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    check_point(x, "Mehler point")?;
    check_point(y, "Mehler point")?;
    if !w.is_finite() {
        return Err(Error::NonFinite("Mehler parameter"));
    }
    if w.abs() > MEHLER_MAX_W {
        return Err(out_of_range("w", format!("|{w}| > {MEHLER_MAX_W}")));
    }
    Ok(())
}

/// `Σ_m w^m Proj_{m,d}(x, y)` in closed form; `d` is the length of `x`.
pub fn mehler_closed_form(x: &[f64], y: &[f64], w: f64) -> Result<f64> {
    mehler_check(x, y, w)?;
    Ok(mehler_forms_unchecked(x, y, w)[0])
}

/// The three algebraic forms of the Mehler kernel, in order: the `x·y` form,
/// the `|x - y|, |x + y|` form, and the completed-square form.
pub fn mehler_forms(x: &[f64], y: &[f64], w: f64) -> Result<[f64; 3]> {
    mehler_check(x, y, w)?;
    Ok(mehler_forms_unchecked(x, y, w))
}

fn mehler_forms_unchecked(x: &[f64], y: &[f64], w: f64) -> [f64; 3] {
    let d = x.len() as f64;
    let one_m = 1.0 - w * w;
    let one_p = 1.0 + w * w;
    let pre = (PI * one_m).powf(-d / 2.0);
    let xx = dot(x, x);
    let yy = dot(y, y);
    let xy = dot(x, y);

    let first = pre * ((4.0 * w * xy - one_p * (xx + yy)) / (2.0 * one_m)).exp();

    let diff2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let sum2: f64 = x.iter().zip(y).map(|(a, b)| (a + b) * (a + b)).sum();
    let second =
        pre * (-(1.0 + w) / (1.0 - w) * diff2 / 4.0 - (1.0 - w) / (1.0 + w) * sum2 / 4.0).exp();

    let shift = 2.0 * w / one_p;
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - shift * b).powi(2)).sum();
    let third = pre * (-one_p / (2.0 * one_m) * sq).exp() * (-one_m / (2.0 * one_p) * yy).exp();

    [first, second, third]
}

/// Planar coordinates `(|x|, 0)` and `(|y| cosθ, |y| sinθ)`.
///
/// If either point is the origin, `cosθ = 1`, `sinθ = 0`.
fn planar(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let nx = norm2(x);
    let ny = norm2(y);
    let (c, s) = if nx == 0.0 || ny == 0.0 {
        (1.0, 0.0)
    } else {
        let c = (dot(x, y) / (nx * ny)).clamp(-1.0, 1.0);
        (c, (1.0 - c * c).max(0.0).sqrt())
    };
    (nx, c, s, ny)
}

/// `Proj_{m,q,Q}(x, y)` on `R^Q` through the planar reduction weighted by
/// `D_{q-2;·}`. For `q = 1` the inputs must be collinear.
pub fn proj_reduced(m: usize, q: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let big_q = x.len();
    if q == 0 || q > big_q {
        return Err(out_of_range("q", format!("{q} not in 1..={big_q}")));
    }
    check_point(x, "projection point")?;
    check_point(y, "projection point")?;
    let (nx, c, s, ny) = planar(x, y);
    if q == 1 {
        if s > 1e-10 {
            return Err(Error::NotCollinear);
        }
        let c = c.signum();
        let ax = psi_values(m, nx)[m];
        let ay = psi_values(m, ny * c)[m];
        return Ok(ax * ay);
    }
    let dseq = d_sequence(q as i64 - 2, m);
    let x1 = psi_values(m, nx);
    let y1 = psi_values(m, ny * c);
    let y2 = psi_values(m, ny * s);
    let z = psi_values(m, 0.0);
    let mut acc = CompensatedSum::new();
    for j in 0..=m {
        let weight = dseq.get(m - j);
        if weight == 0.0 {
            continue;
        }
        let mut pj = CompensatedSum::new();
        for k1 in 0..=j {
            let k2 = j - k1;
            pj.add(x1[k1] * y1[k1] * z[k2] * y2[k2]);
        }
        acc.add(pj.value() * weight);
    }
    Ok(acc.value())
}

/// Largest `n` accepted by [`phi_localized`].
pub const MAX_PHI_N: f64 = 12.0;
/// Largest dimension accepted by [`phi_localized`].
pub const MAX_PHI_DIM: usize = 3;

/// `Φ_{n,d}(x, y) = Σ_{m < n²} H(√m/n) Proj_{m,d}(x, y)` by tensor sums.
pub fn phi_localized(n: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x.len();
    if d == 0 || d > MAX_PHI_DIM {
        return Err(out_of_range("dimension", format!("{d} not in 1..={MAX_PHI_DIM}")));
    }
    if !n.is_finite() || !(1.0..=MAX_PHI_N).contains(&n) {
        return Err(out_of_range("n", format!("{n} not in [1, {MAX_PHI_N}]")));
    }
    check_point(x, "kernel point")?;
    check_point(y, "kernel point")?;
    let top = (n * n).ceil() as usize;
    let rx: Vec<Vec<f64>> = x.iter().map(|&v| psi_values(top, v)).collect();
    let ry: Vec<Vec<f64>> = y.iter().map(|&v| psi_values(top, v)).collect();
    let mut acc = CompensatedSum::new();
    for m in 0..top {
        let weight = h((m as f64).sqrt() / n);
        if weight == 0.0 {
            break;
        }
        acc.add(weight * proj_from_rows(m, &rx, &ry));
    }
    Ok(acc.value())
}
