//! Orthonormal Hermite functions and Gauss–Hermite quadrature.
//!
//! `ψ_k(x) = h_k(x) exp(-x²/2)` is evaluated directly by the three-term
//! recurrence of the orthonormal polynomials `h_k`; the Gaussian factor is
//! common to all terms so the same recurrence applies to `ψ_k`. Values are
//! carried as `mantissa · exp(log_scale)` which keeps `ψ_0` from underflowing
//! for large `|x|` while high-degree terms are still of order one.

use nalgebra::DMatrix;

use crate::error::{out_of_range, Error, Result};
use crate::special::{ln_central_ratio, parity_sign};

/// `π^{-1/4}`.
pub const PI_POW_M14: f64 = 0.751_125_544_464_942_5;

/// Largest degree materialized by [`hermite_row`].
pub const MAX_ROW_DEGREE: usize = 5000;

/// Largest Gauss–Hermite rule built by [`gauss_hermite_rule`].
pub const MAX_RULE_SIZE: usize = 256;

const RESCALE_AT: f64 = 1e100;
const RESCALE_BY: f64 = 1e-100;
const LN_RESCALE: f64 = 230.258_509_299_404_56; // 100 ln 10

/// Streaming evaluator of `ψ_0(x), ψ_1(x), …`.
#[derive(Debug, Clone)]
pub(crate) struct PsiStream {
    x: f64,
    prev: f64,
    cur: f64,
    degree: usize,
    log_scale: f64,
    scale: f64,
}

impl PsiStream {
    pub(crate) fn new(x: f64) -> Self {
        let log_scale = -0.5 * x * x + PI_POW_M14.ln();
        Self {
            x,
            prev: 0.0,
            cur: 1.0,
            degree: 0,
            log_scale,
            scale: log_scale.exp(),
        }
    }

    /// Current degree `k`.
    #[inline]
    pub(crate) fn degree(&self) -> usize {
        self.degree
    }

    /// `ψ_k(x)` at the current degree.
    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.cur * self.scale
    }

    /// Advances to degree `k + 1`. Returns the rescale factor applied to the
    /// mantissa (1.0 if none), so callers accumulating in mantissa units can
    /// rescale their own state.
    #[inline]
    pub(crate) fn advance(&mut self) -> f64 {
        let k = (self.degree + 1) as f64;
        let next = (2.0 / k).sqrt() * self.x * self.cur - ((k - 1.0) / k).sqrt() * self.prev;
        self.prev = self.cur;
        self.cur = next;
        self.degree += 1;
        if self.cur.abs() > RESCALE_AT {
            self.rescale();
            RESCALE_BY
        } else {
            1.0
        }
    }

    #[inline]
    fn rescale(&mut self) {
        self.prev *= RESCALE_BY;
        self.cur *= RESCALE_BY;
        self.log_scale += LN_RESCALE;
        self.scale = self.log_scale.exp();
    }
}

/// `ψ_0(x) … ψ_{kmax}(x)` at a single point.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteRow {
    point: f64,
    values: Vec<f64>,
}

impl HermiteRow {
    pub fn point(&self) -> f64 {
        self.point
    }

    pub fn kmax(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        self.values.get(k).copied()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Evaluates `ψ_k(x)` for `0 ≤ k ≤ kmax` in `O(kmax)`.
pub fn hermite_row(kmax: usize, x: f64) -> Result<HermiteRow> {
    if !x.is_finite() {
        return Err(Error::NonFinite("hermite_row point"));
    }
    if kmax > MAX_ROW_DEGREE {
        return Err(out_of_range(
            "degree",
            format!("{kmax} exceeds {MAX_ROW_DEGREE}"),
        ));
    }
    Ok(HermiteRow {
        point: x,
        values: psi_values(kmax, x),
    })
}

/// Unchecked row evaluation used internally.
pub(crate) fn psi_values(kmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(kmax + 1);
    let mut stream = PsiStream::new(x);
    out.push(stream.value());
    while stream.degree() < kmax {
        stream.advance();
        out.push(stream.value());
    }
    out
}

/// Closed form of `ψ_ℓ(0)`, evaluated in log space with an explicit sign.
pub fn psi_at_zero(l: usize) -> f64 {
    if l % 2 == 1 {
        return 0.0;
    }
    let half = l / 2;
    parity_sign(half) * PI_POW_M14 * ln_central_ratio(half).exp()
}

/// Gauss–Hermite nodes and Christoffel numbers for the weight `exp(-x²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    // λ_k exp(x_k²) = 1 / Σ_j ψ_j(x_k)², used for Lebesgue-measure integration
    lebesgue_weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    /// Strictly increasing nodes, symmetric about 0.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Christoffel numbers `λ_{k,m}`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `λ_{k,m} exp(x_{k,m}²)`, computed without forming the exponential.
    pub fn lebesgue_weights(&self) -> &[f64] {
        &self.lebesgue_weights
    }

    /// See [`quad_integrate`].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, f: F, weightless: bool) -> Result<f64> {
        quad_integrate(self, f, weightless)
    }
}

/// Builds the `m`-point Gauss–Hermite rule.
///
/// Nodes are the eigenvalues of the Jacobi matrix with off-diagonal entries
/// `√(k/2)`, refined by Newton steps on `h_m`. Weights come from the
/// Christoffel formula `λ = 1 / Σ_{j<m} h_j(x)²`.
pub fn gauss_hermite_rule(m: usize) -> Result<QuadratureRule> {
    if m == 0 || m > MAX_RULE_SIZE {
        return Err(out_of_range(
            "rule size",
            format!("{m} not in 1..={MAX_RULE_SIZE}"),
        ));
    }
    let mut nodes = jacobi_eigenvalues(m);
    for x in nodes.iter_mut() {
        *x = newton_polish(m, *x);
    }
    nodes.sort_by(|a, b| a.total_cmp(b));
    // exact symmetry
    for k in 0..m / 2 {
        let mirrored = 0.5 * (nodes[m - 1 - k] - nodes[k]);
        nodes[k] = -mirrored;
        nodes[m - 1 - k] = mirrored;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }

    let mut weights = Vec::with_capacity(m);
    let mut lebesgue_weights = Vec::with_capacity(m);
    for &x in &nodes {
        let psi = psi_values(m - 1, x);
        let sum_sq: f64 = psi.iter().map(|v| v * v).sum();
        lebesgue_weights.push(1.0 / sum_sq);
        weights.push((-x * x - sum_sq.ln()).exp());
    }
    for k in 0..m / 2 {
        let (a, b) = (weights[k], weights[m - 1 - k]);
        let w = 0.5 * (a + b);
        weights[k] = w;
        weights[m - 1 - k] = w;
        let (a, b) = (lebesgue_weights[k], lebesgue_weights[m - 1 - k]);
        let w = 0.5 * (a + b);
        lebesgue_weights[k] = w;
        lebesgue_weights[m - 1 - k] = w;
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        lebesgue_weights,
    })
}

fn jacobi_matrix(m: usize) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(m, m);
    for k in 1..m {
        let off = (k as f64 / 2.0).sqrt();
        jac[(k - 1, k)] = off;
        jac[(k, k - 1)] = off;
    }
    jac
}

fn jacobi_eigenvalues(m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.0];
    }
    jacobi_matrix(m).symmetric_eigenvalues().iter().copied().collect()
}

/// Weights from the first eigenvector components, `λ_k = √π v_{0k}²`.
///
/// Independent of the Christoffel route used by [`gauss_hermite_rule`];
/// exposed for cross-checking.
pub fn eigenvector_weights(m: usize) -> Result<Vec<(f64, f64)>> {
    if m == 0 || m > MAX_RULE_SIZE {
        return Err(out_of_range("rule size", format!("{m}")));
    }
    let eig = jacobi_matrix(m).symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let v0 = eig.eigenvectors[(0, k)];
            (x, std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs)
}

fn newton_polish(m: usize, mut x: f64) -> f64 {
    // h_m'(x) = √(2m) h_{m-1}(x); the Gaussian factor cancels in the ratio
    for _ in 0..3 {
        let mut stream = PsiStream::new(x);
        while stream.degree() < m {
            stream.advance();
        }
        let step = stream.cur / ((2.0 * m as f64).sqrt() * stream.prev);
        if !step.is_finite() {
            break;
        }
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// `Σ λ_k f(x_k)`, or `Σ λ_k exp(x_k²) f(x_k)` when `weightless` (Lebesgue
/// measure).
pub fn quad_integrate<F: FnMut(f64) -> f64>(
    rule: &QuadratureRule,
    mut f: F,
    weightless: bool,
) -> Result<f64> {
    let weights = if weightless {
        &rule.lebesgue_weights
    } else {
        &rule.weights
    };
    let mut acc = 0.0;
    for (&x, &w) in rule.nodes.iter().zip(weights) {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NonFinite("integrand"));
        }
        acc += w * v;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn row_examples() {
        let r = hermite_row(0, 0.0).unwrap();
        assert!((r.values()[0] - 0.751_125_544_464_942_5).abs() < 1e-16);
        let r = hermite_row(1, 0.0).unwrap();
        assert_eq!(r.values()[1], 0.0);
        let r = hermite_row(2, 0.0).unwrap();
        // (-1)^1 √(2!) / (2^1 1!) π^{-1/4}
        let expected = -PI_POW_M14 * 2f64.sqrt() / 2.0;
        assert!((r.values()[2] - expected).abs() < 1e-15);
        assert!((r.values()[2] + 0.531_125_9).abs() < 1e-6);
    }

    #[test]
    fn row_rejects_bad_input() {
        assert!(matches!(hermite_row(3, f64::NAN), Err(Error::NonFinite(_))));
        assert!(hermite_row(MAX_ROW_DEGREE + 1, 0.0).is_err());
    }

    #[test]
    fn first_value_is_gaussian() {
        for &x in &[-3.0, -0.5, 0.0, 1.25, 7.0] {
            let r = hermite_row(4, x).unwrap();
            let g = PI_POW_M14 * (-x * x / 2.0).exp();
            assert!((r.values()[0] - g).abs() <= 1e-15 * g.max(1e-300));
        }
    }

    #[test]
    fn psi_at_zero_examples() {
        assert_eq!(psi_at_zero(1), 0.0);
        assert!((psi_at_zero(0) - PI_POW_M14).abs() < 1e-15);
        let row = hermite_row(60, 0.0).unwrap();
        let rel = (psi_at_zero(60) - row.values()[60]).abs() / row.values()[60].abs();
        assert!(rel < 1e-10, "rel {rel}");
    }

    #[test]
    fn large_argument_does_not_underflow_high_degrees() {
        // ψ_4096 near x = 50 is O(0.1) although ψ_0(50) underflows
        let row = psi_values(4096, 50.0);
        assert_eq!(row[0], 0.0);
        let peak = row[3000..].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(peak > 1e-3 && peak < 1.1, "peak {peak}");
    }

    #[test]
    fn rule_examples() {
        let r1 = gauss_hermite_rule(1).unwrap();
        assert_eq!(r1.nodes(), &[0.0]);
        assert!((r1.weights()[0] - PI.sqrt()).abs() < 1e-15);

        let r2 = gauss_hermite_rule(2).unwrap();
        let v = r2.integrate(|x| x * x, false).unwrap();
        assert!((v - PI.sqrt() / 2.0).abs() < 1e-14);

        // degree 4 ≥ 2m: not exact
        let v = r2.integrate(|x| x.powi(4), false).unwrap();
        assert!((v - 3.0 * PI.sqrt() / 4.0).abs() > 0.1);

        assert!(gauss_hermite_rule(0).is_err());
        assert!(gauss_hermite_rule(257).is_err());
    }

    #[test]
    fn rule_invariants() {
        for m in [3usize, 8, 33, 64, 128, 256] {
            let r = gauss_hermite_rule(m).unwrap();
            let s: f64 = r.weights().iter().sum();
            assert!((s - PI.sqrt()).abs() < 1e-12, "m={m} sum={s}");
            for k in 0..m {
                assert_eq!(r.nodes()[k], -r.nodes()[m - 1 - k]);
                assert_eq!(r.weights()[k], r.weights()[m - 1 - k]);
                assert!(r.weights()[k] > 0.0);
            }
            assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
            let lebesgue: f64 = r.lebesgue_weights().iter().sum();
            // Σ λ e^{x²} ≤ c m^{1/2}; the ratio settles near 2.2
            assert!(lebesgue / (m as f64).sqrt() < 3.0, "m={m}");
        }
    }

    #[test]
    fn christoffel_weights_match_eigenvector_weights() {
        for m in [5usize, 20, 40] {
            let r = gauss_hermite_rule(m).unwrap();
            let pairs = eigenvector_weights(m).unwrap();
            for (k, (x, w)) in pairs.iter().enumerate() {
                assert!((x - r.nodes()[k]).abs() < 1e-12);
                assert!((w - r.weights()[k]).abs() < 1e-12 * PI.sqrt());
            }
        }
    }

    #[test]
    fn orthonormality_through_weightless_rule() {
        let r = gauss_hermite_rule(40).unwrap();
        let psi = |k: usize, x: f64| psi_values(k, x)[k];
        let same = r.integrate(|x| psi(3, x) * psi(3, x), true).unwrap();
        assert!((same - 1.0).abs() < 1e-10);
        let cross = r.integrate(|x| psi(3, x) * psi(5, x), true).unwrap();
        assert!(cross.abs() < 1e-10);
    }

    #[test]
    fn non_finite_integrand_is_error() {
        let r = gauss_hermite_rule(4).unwrap();
        assert!(r.integrate(|_| f64::INFINITY, false).is_err());
    }
}
