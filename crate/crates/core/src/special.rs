//! Overflow-safe gamma ratios, generalized binomials and compensated sums.

use statrs::function::gamma::ln_gamma;

/// `ln(k!)`.
pub fn ln_factorial(k: usize) -> f64 {
    if k < 2 {
        return 0.0;
    }
    ln_gamma(k as f64 + 1.0)
}

/// `ln(√((2ℓ)!) / (2^ℓ ℓ!))`, the magnitude of `π^{1/4} ψ_{2ℓ}(0)`.
pub fn ln_central_ratio(l: usize) -> f64 {
    0.5 * ln_factorial(2 * l) - l as f64 * std::f64::consts::LN_2 - ln_factorial(l)
}

/// `ln(Γ(a + j) / j!)` for `a > 0`.
pub fn ln_gamma_over_factorial(a: f64, j: usize) -> f64 {
    ln_gamma(a + j as f64) - ln_factorial(j)
}

/// `(-1)^k`.
#[inline]
pub fn parity_sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Generalized binomial coefficient `binom(top, k)` by the product formula.
///
/// Exact zero once the product passes through a zero factor (integer `top`).
pub fn binom(top: f64, k: usize) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc *= (top - i as f64) / (i as f64 + 1.0);
        if acc == 0.0 {
            return 0.0;
        }
    }
    acc
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}
