//! Prefabricated Gaussian networks built by quadrature, with no training.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, Error, Result};
use crate::estimator::Dataset;
use crate::hermite::{gauss_hermite_rule, psi_at_zero, psi_values};
use crate::kernels::filter_h;
use crate::multi_index::for_each_composition;
use crate::special::{binom, parity_sign, CompensatedSum};

/// Largest `m` accepted when synthesizing basis networks.
pub const MAX_BASIS_M: usize = 6;
/// Largest dimension accepted when synthesizing networks.
pub const MAX_NET_DIM: usize = 3;
/// Largest `n` accepted by [`prefab_kernel_network`].
pub const MAX_PREFAB_N: f64 = 8.0;
/// Largest neuron count a prefabricated network may have.
pub const MAX_PREFAB_NEURONS: usize = 1 << 21;

/// `x ↦ Σ_k coeffs[k] · exp(-|scale·x - centers[k]|²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNetwork {
    dim: usize,
    scale: f64,
    centers: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
}

impl GaussianNetwork {
    pub fn new(dim: usize, scale: f64, centers: Vec<Vec<f64>>, coeffs: Vec<f64>) -> Result<Self> {
        if centers.len() != coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: centers.len(),
                got: coeffs.len(),
            });
        }
        if !scale.is_finite() || scale <= 0.0 {
            return Err(out_of_range("scale", format!("{scale} must be positive")));
        }
        for c in &centers {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("network center"));
            }
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network coefficient"));
        }
        Ok(Self {
            dim,
            scale,
            centers,
            coeffs,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Number of neurons.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Evaluation without dimension checks.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let sx: Vec<f64> = x.iter().map(|v| self.scale * v).collect();
        let mut acc = CompensatedSum::new();
        for (c, a) in self.centers.iter().zip(&self.coeffs) {
            if *a == 0.0 {
                continue;
            }
            let d2: f64 = sx.iter().zip(c).map(|(u, v)| (u - v) * (u - v)).sum();
            acc.add(a * (-d2).exp());
        }
        acc.value()
    }

    pub fn try_eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        Ok(self.eval(x))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: GaussianNetwork = serde_json::from_str(text)?;
        Self::new(raw.dim, raw.scale, raw.centers, raw.coeffs)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// `P = Σ_k b_k ψ_k` on `R^d`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightedPolyCoeffs {
    d: usize,
    entries: BTreeMap<Vec<usize>, f64>,
}

impl WeightedPolyCoeffs {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Adds `b` to the coefficient of `ψ_k`.
    pub fn add(&mut self, k: Vec<usize>, b: f64) -> Result<()> {
        if k.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: k.len(),
            });
        }
        if !b.is_finite() {
            return Err(Error::NonFinite("polynomial coefficient"));
        }
        *self.entries.entry(k).or_insert(0.0) += b;
        Ok(())
    }

    pub fn with(mut self, k: Vec<usize>, b: f64) -> Result<Self> {
        self.add(k, b)?;
        Ok(self)
    }

    pub fn entries(&self) -> &BTreeMap<Vec<usize>, f64> {
        &self.entries
    }

    /// Largest `|k|₁` present, if any.
    pub fn total_degree(&self) -> Option<usize> {
        self.entries.keys().map(|k| k.iter().sum()).max()
    }

    /// `Σ_k b_k ψ_k(x)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let top = self.entries.keys().flatten().copied().max().unwrap_or(0);
        let rows: Vec<Vec<f64>> = x.iter().map(|&v| psi_values(top, v)).collect();
        self.entries
            .iter()
            .map(|(k, b)| b * k.iter().zip(&rows).map(|(ki, r)| r[*ki]).product::<f64>())
            .collect::<CompensatedSum>()
            .value()
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: other.d,
            });
        }
        let mut out = Self::new(self.d);
        for (k, v) in &self.entries {
            out.add(k.clone(), a * v)?;
        }
        for (k, v) in &other.entries {
            out.add(k.clone(), b * v)?;
        }
        Ok(out)
    }
}

/// One-dimensional ingredients shared by every network of parameter `m`.
#[derive(Debug, Clone)]
struct Grid1d {
    centers: Vec<f64>,
    // (3/2π)^{1/2} λ_j exp(3x_j²/4), one per node
    base: Vec<f64>,
    nodes: Vec<f64>,
}

impl Grid1d {
    fn new(m: usize) -> Result<Self> {
        let rule = gauss_hermite_rule(2 * m * m)?;
        let root = (1.5 / PI).sqrt();
        let base = rule
            .lebesgue_weights()
            .iter()
            .zip(rule.nodes())
            .map(|(lw, x)| root * lw * (-x * x / 4.0).exp())
            .collect();
        Ok(Self {
            centers: rule.nodes().iter().map(|x| 0.75f64.sqrt() * x).collect(),
            base,
            nodes: rule.nodes().to_vec(),
        })
    }

    /// Per-center weights of the univariate network for `ψ_k`.
    fn weights(&self, k: usize) -> Vec<f64> {
        let lift = 3f64.powf(k as f64 / 2.0);
        self.nodes
            .iter()
            .zip(&self.base)
            .map(|(&x, b)| lift * b * psi_values(k, x)[k])
            .collect()
    }

    fn weight_table(&self, kmax: usize) -> Vec<Vec<f64>> {
        let mut table = vec![vec![0.0; self.nodes.len()]; kmax + 1];
        for (j, (&x, b)) in self.nodes.iter().zip(&self.base).enumerate() {
            let row = psi_values(kmax, x);
            let mut lift = 1.0;
            for (k, t) in table.iter_mut().enumerate() {
                if k > 0 {
                    lift *= 3f64.sqrt();
                }
                t[j] = lift * b * row[k];
            }
        }
        table
    }

    fn eval(&self, weights: &[f64], x: f64) -> f64 {
        self.centers
            .iter()
            .zip(weights)
            .map(|(c, w)| w * (-(x - c) * (x - c)).exp())
            .collect::<CompensatedSum>()
            .value()
    }
}

fn check_m_d(m: usize, d: usize) -> Result<()> {
    if m == 0 || m > MAX_BASIS_M {
        return Err(out_of_range("m", format!("{m} not in 1..={MAX_BASIS_M}")));
    }
    if d == 0 || d > MAX_NET_DIM {
        return Err(out_of_range("dimension", format!("{d} not in 1..={MAX_NET_DIM}")));
    }
    Ok(())
}

fn tensor_centers(c1: &[f64], d: usize) -> Vec<Vec<f64>> {
    let j = c1.len();
    let total = j.pow(d as u32);
    (0..total)
        .map(|mut flat| {
            let mut p = vec![0.0; d];
            for slot in p.iter_mut().rev() {
                *slot = c1[flat % j];
                flat /= j;
            }
            p
        })
        .collect()
}

/// Contracts dense coefficients `b[k_1..k_d]` (each `k_i < kdim`) against
/// `table[k][j]` one axis at a time, giving weights on the `J^d` grid.
fn contract(b: Vec<f64>, kdim: usize, d: usize, table: &[Vec<f64>]) -> Vec<f64> {
    let jdim = table[0].len();
    let mut cur = b;
    for axis in 0..d {
        let prefix = jdim.pow(axis as u32);
        let suffix = kdim.pow((d - axis - 1) as u32);
        let mut next = vec![0.0; prefix * jdim * suffix];
        for p in 0..prefix {
            for k in 0..kdim {
                let row = &table[k];
                let src = &cur[(p * kdim + k) * suffix..(p * kdim + k + 1) * suffix];
                if src.iter().all(|v| *v == 0.0) {
                    continue;
                }
                for (j, w) in row.iter().enumerate() {
                    let dst = &mut next[(p * jdim + j) * suffix..(p * jdim + j + 1) * suffix];
                    for (o, s) in dst.iter_mut().zip(src) {
                        *o += w * s;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

/// `𝔊_{k,m,d}`: centers on `(√3/2)` times the tensor grid of the
/// `2m²`-point Gauss–Hermite rule, scale 1.
pub fn gaussian_basis_network(k: &[usize], m: usize) -> Result<GaussianNetwork> {
    let d = k.len();
    check_m_d(m, d)?;
    if k.iter().sum::<usize>() >= m * m {
        return Err(out_of_range("multi-index", format!("|k|₁ must be below {}", m * m)));
    }
    let p = WeightedPolyCoeffs::new(d).with(k.to_vec(), 1.0)?;
    poly_to_gaussian(&p, m)
}

/// `𝔊_d(P) = Σ_k b_k 𝔊_{k,m,d}` merged on the shared center grid.
pub fn poly_to_gaussian(p: &WeightedPolyCoeffs, m: usize) -> Result<GaussianNetwork> {
    let d = p.dim();
    check_m_d(m, d)?;
    synthesize(p, m, 1.0, 1.0)
}

fn synthesize(p: &WeightedPolyCoeffs, m: usize, scale: f64, amp: f64) -> Result<GaussianNetwork> {
    let d = p.dim();
    if let Some(deg) = p.total_degree() {
        if deg >= m * m {
            return Err(out_of_range("degree", format!("|k|₁ = {deg} not below {}", m * m)));
        }
    }
    let grid = Grid1d::new(m)?;
    let kdim = p.entries().keys().flatten().copied().max().unwrap_or(0) + 1;
    let table = grid.weight_table(kdim - 1);
    let mut dense = vec![0.0; kdim.pow(d as u32)];
    for (k, b) in p.entries() {
        let flat = k.iter().fold(0, |acc, ki| acc * kdim + ki);
        dense[flat] += amp * b;
    }
    let coeffs = contract(dense, kdim, d, &table);
    GaussianNetwork::new(d, scale, tensor_centers(&grid.centers, d), coeffs)
}

/// Coefficients `b_k` of `Φ_{n,q,Q}(0, ·)` over `ψ_k` on `R^Q`; only even
/// multi-indices appear.
pub fn prefab_coefficients(n: f64, q: usize, big_q: usize) -> Result<WeightedPolyCoeffs> {
    if q == 0 || q > big_q {
        return Err(out_of_range("q", format!("{q} not in 1..={big_q}")));
    }
    if !n.is_finite() || n < 1.0 {
        return Err(out_of_range("n", format!("{n} < 1")));
    }
    let top = (n * n).ceil() as usize;
    let half_gap = (big_q - q) as f64 / 2.0;
    let lead = PI.powf(half_gap);
    // reduction weight for total degree s: Σ_ℓ H(√(s+2ℓ)/n) π^{(Q-q)/2} (-1)^ℓ binom((Q-q)/2, ℓ)
    let reduce: Vec<f64> = (0..top)
        .map(|s| {
            let mut acc = CompensatedSum::new();
            let mut l = 0;
            while s + 2 * l < top {
                let hv = filter_h(((s + 2 * l) as f64).sqrt() / n).expect("non-negative");
                if hv != 0.0 {
                    acc.add(hv * lead * parity_sign(l) * binom(half_gap, l));
                }
                l += 1;
            }
            acc.value()
        })
        .collect();
    let mut out = WeightedPolyCoeffs::new(big_q);
    for half in 0..top.div_ceil(2) {
        let s = 2 * half;
        if reduce[s] == 0.0 {
            continue;
        }
        for_each_composition(half, big_q, |kh| {
            let k: Vec<usize> = kh.iter().map(|v| 2 * v).collect();
            let at_zero: f64 = k.iter().map(|&ki| psi_at_zero(ki)).product();
            out.entries.insert(k, at_zero * reduce[s]);
        });
    }
    Ok(out)
}

/// `𝔾*_{n,q,Q}(x) = n^{q(1-α)} 𝔊_Q(Φ_{n,q,Q}(0, ·))(n^{1-α} x)` with
/// `m = ⌈n⌉` quadrature parameter.
pub fn prefab_kernel_network(n: f64, q: usize, big_q: usize, alpha: f64) -> Result<GaussianNetwork> {
    prefab_kernel_network_with(n, q, big_q, alpha, n.ceil().max(1.0) as usize)
}

/// As [`prefab_kernel_network`] with an explicit quadrature parameter `m`.
pub fn prefab_kernel_network_with(
    n: f64,
    q: usize,
    big_q: usize,
    alpha: f64,
    m: usize,
) -> Result<GaussianNetwork> {
    if !n.is_finite() || !(1.0..=MAX_PREFAB_N).contains(&n) {
        return Err(out_of_range("n", format!("{n} not in [1, {MAX_PREFAB_N}]")));
    }
    if big_q == 0 || big_q > MAX_NET_DIM {
        return Err(out_of_range("Q", format!("{big_q} not in 1..={MAX_NET_DIM}")));
    }
    if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
        return Err(out_of_range("alpha", format!("{alpha} not in (0, 1]")));
    }
    let neurons = (2 * m * m).checked_pow(big_q as u32).unwrap_or(usize::MAX);
    if m == 0 || neurons > MAX_PREFAB_NEURONS {
        return Err(out_of_range(
            "neurons",
            format!("(2m²)^Q = {neurons} exceeds {MAX_PREFAB_NEURONS}"),
        ));
    }
    let p = prefab_coefficients(n, q, big_q)?;
    let scale = n.powf(1.0 - alpha);
    let amp = n.powf(q as f64 * (1.0 - alpha));
    synthesize(&p, m, scale, amp)
}

/// Pointwise triangle-inequality bound on `|P(x) - 𝔊_d(P)(x)|` built from
/// the univariate errors `|ψ_k(x_i) - 𝔊_{k,m,1}(x_i)|`.
pub fn synthesis_budget(p: &WeightedPolyCoeffs, m: usize, x: &[f64]) -> Result<f64> {
    check_m_d(m, p.dim())?;
    if x.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: x.len(),
        });
    }
    let grid = Grid1d::new(m)?;
    let kmax = p.entries().keys().flatten().copied().max().unwrap_or(0);
    let table = grid.weight_table(kmax);
    // exact and synthesized univariate factors per axis
    let exact: Vec<Vec<f64>> = x.iter().map(|&v| psi_values(kmax, v)).collect();
    let synth: Vec<Vec<f64>> = x
        .iter()
        .map(|&v| table.iter().map(|w| grid.eval(w, v)).collect())
        .collect();
    let mut acc = CompensatedSum::new();
    for (k, b) in p.entries() {
        // |Π a_i - Π g_i| ≤ Σ_i |a_i - g_i| Π_{j<i}|g_j| Π_{j>i}|a_j|
        let mut bound = 0.0;
        for i in 0..k.len() {
            let mut term = (exact[i][k[i]] - synth[i][k[i]]).abs();
            for (j, &kj) in k.iter().enumerate() {
                if j < i {
                    term *= synth[j][kj].abs();
                } else if j > i {
                    term *= exact[j][kj].abs();
                }
            }
            bound += term;
        }
        acc.add(b.abs() * bound);
    }
    Ok(acc.value())
}

/// `(1/M) Σ_j F_j 𝔾*(x - y_j)`.
pub fn shallow_net_estimate(ds: &Dataset, net: &GaussianNetwork, x: &[f64]) -> Result<f64> {
    if net.dim() != ds.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.ambient_dim(),
            got: net.dim(),
        });
    }
    if x.len() != net.dim() {
        return Err(Error::DimensionMismatch {
            expected: net.dim(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("query point"));
    }
    let mut diff = vec![0.0; x.len()];
    let mut acc = CompensatedSum::new();
    for s in ds.samples() {
        for (o, (a, b)) in diff.iter_mut().zip(x.iter().zip(&s.point)) {
            *o = a - b;
        }
        acc.add(s.value * net.eval(&diff));
    }
    Ok(acc.value() / ds.len() as f64)
}

/// Univariate network weights for `ψ_k`, exposed for diagnostics.
pub fn basis_weights_1d(k: usize, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    check_m_d(m, 1)?;
    let grid = Grid1d::new(m)?;
    Ok((grid.centers.clone(), grid.weights(k)))
}
