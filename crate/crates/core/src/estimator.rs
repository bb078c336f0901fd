//! One-shot kernel estimator on scattered samples and its continuous
//! counterpart on parametrized curves.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{out_of_range, Error, Result};
use crate::kernels::{compile_kernel, KernelTable, RadialKernel, TabulatedKernel};
use crate::special::CompensatedSum;

/// An ambient point `y_j` with its observed value.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub point: Vec<f64>,
    pub value: f64,
}

/// Labeled samples in `R^Q` from a manifold of declared dimension `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    ambient_dim: usize,
    manifold_dim: usize,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>, ambient_dim: usize, manifold_dim: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if manifold_dim == 0 || manifold_dim > ambient_dim {
            return Err(out_of_range(
                "manifold dimension",
                format!("q = {manifold_dim} with Q = {ambient_dim}"),
            ));
        }
        for s in &samples {
            if s.point.len() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim,
                    got: s.point.len(),
                });
            }
            if !s.value.is_finite() || s.point.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("sample"));
            }
        }
        Ok(Self {
            samples,
            ambient_dim,
            manifold_dim,
        })
    }

    /// Pairs points with values; the ambient dimension is read off the first point.
    pub fn from_parts(points: Vec<Vec<f64>>, values: Vec<f64>, manifold_dim: usize) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: values.len(),
            });
        }
        let q_amb = points.first().map(Vec::len).ok_or(Error::EmptyDataset)?;
        let samples = points
            .into_iter()
            .zip(values)
            .map(|(point, value)| LabeledSample { point, value })
            .collect();
        Self::new(samples, q_amb, manifold_dim)
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn manifold_dim(&self) -> usize {
        self.manifold_dim
    }

    /// Same points, new values.
    pub fn with_values(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        let samples = self
            .samples
            .iter()
            .zip(values)
            .map(|(s, &value)| LabeledSample {
                point: s.point.clone(),
                value,
            })
            .collect();
        Self::new(samples, self.ambient_dim, self.manifold_dim)
    }

    /// Writes `y_1,…,y_Q,value` with a header row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.ambient_dim).map(|i| format!("y_{i}")).collect();
        header.push("value".into());
        w.write_record(&header)?;
        for s in &self.samples {
            let mut rec: Vec<String> = s.point.iter().map(|v| format!("{v:?}")).collect();
            rec.push(format!("{:?}", s.value));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, manifold_dim: usize) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let cols = headers.len();
        if cols < 2 || headers.get(cols - 1) != Some("value") {
            return Err(Error::Parse("last column must be `value`".into()));
        }
        for (i, name) in headers.iter().take(cols - 1).enumerate() {
            if name != format!("y_{}", i + 1) {
                return Err(Error::Parse(format!("unexpected column `{name}`")));
            }
        }
        let mut samples = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let nums = rec
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", line + 1)))?;
            let (value, point) = nums.split_last().expect("csv enforces column count");
            samples.push(LabeledSample {
                point: point.to_vec(),
                value: *value,
            });
        }
        Self::new(samples, cols - 1, manifold_dim)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>, manifold_dim: usize) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, manifold_dim)
    }
}

/// How the radial kernel is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelEval {
    /// Streaming Hermite pass, `O(n²)` per call.
    #[default]
    Exact,
    /// Piecewise Chebyshev table built once from the exact stream.
    Tabulated,
}

/// Degree `n`, exponent `α`, compiled kernel and an overall volume factor.
///
/// The estimate is `volume · (n^{q(1-α)}/M) Σ_j F_j Φ̃(n^{1-α}|x - y_j|)`.
/// `volume = 1` is the plain estimator; setting it to the total mass of
/// the sampling measure's support turns averages against a probability
/// measure into averages against the unnormalized volume.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    n: f64,
    alpha: f64,
    volume: f64,
    table: Arc<KernelTable>,
    tabulated: Option<Arc<TabulatedKernel>>,
}

impl EstimatorConfig {
    pub fn new(n: f64, alpha: f64, q: usize) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
            return Err(out_of_range("alpha", format!("{alpha} not in (0, 1]")));
        }
        let table = compile_kernel(n, q)?;
        Ok(Self {
            n,
            alpha,
            volume: 1.0,
            table: Arc::new(table),
            tabulated: None,
        })
    }

    /// Reuses an already compiled table.
    pub fn from_table(table: Arc<KernelTable>, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
            return Err(out_of_range("alpha", format!("{alpha} not in (0, 1]")));
        }
        Ok(Self {
            n: table.n(),
            alpha,
            volume: 1.0,
            table,
            tabulated: None,
        })
    }

    pub fn with_volume(mut self, volume: f64) -> Result<Self> {
        if !volume.is_finite() || volume <= 0.0 {
            return Err(out_of_range("volume", format!("{volume} must be positive")));
        }
        self.volume = volume;
        Ok(self)
    }

    pub fn with_eval(mut self, eval: KernelEval) -> Self {
        self.tabulated = match eval {
            KernelEval::Exact => None,
            KernelEval::Tabulated => Some(Arc::new(TabulatedKernel::new(&self.table))),
        };
        self
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn q(&self) -> usize {
        self.table.q()
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn table(&self) -> &KernelTable {
        &self.table
    }

    pub fn eval_mode(&self) -> KernelEval {
        if self.tabulated.is_some() {
            KernelEval::Tabulated
        } else {
            KernelEval::Exact
        }
    }

    /// `λ = n^{1-α}`.
    pub fn scale(&self) -> f64 {
        self.n.powf(1.0 - self.alpha)
    }

    /// `volume · n^{q(1-α)}`.
    pub fn normalization(&self) -> f64 {
        self.volume * self.n.powf(self.q() as f64 * (1.0 - self.alpha))
    }

    pub fn kernel(&self) -> &dyn RadialKernel {
        match &self.tabulated {
            Some(t) => t.as_ref(),
            None => self.table.as_ref(),
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_query(ds: &Dataset, cfg: &EstimatorConfig, x: &[f64]) -> Result<()> {
    if cfg.q() != ds.manifold_dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.manifold_dim(),
            got: cfg.q(),
        });
    }
    if x.len() != ds.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.ambient_dim(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("query point"));
    }
    Ok(())
}

/// `Σ_j F_j Φ̃(λ|x - y_j|)` in fixed sample order.
fn kernel_sum(ds: &Dataset, kernel: &dyn RadialKernel, scale: f64, x: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for s in ds.samples() {
        acc.add(s.value * kernel.eval_radial(scale * distance(x, &s.point)));
    }
    acc.value()
}

/// The estimate at a single point.
pub fn estimate_at(ds: &Dataset, cfg: &EstimatorConfig, x: &[f64]) -> Result<f64> {
    check_query(ds, cfg, x)?;
    let norm = cfg.normalization() / ds.len() as f64;
    Ok(norm * kernel_sum(ds, cfg.kernel(), cfg.scale(), x))
}

/// Pointwise [`estimate_at`] over many query points, evaluated in parallel.
pub fn estimate_batch(ds: &Dataset, cfg: &EstimatorConfig, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
    for x in xs {
        check_query(ds, cfg, x)?;
    }
    let norm = cfg.normalization() / ds.len() as f64;
    let scale = cfg.scale();
    let kernel = cfg.kernel();
    Ok(xs
        .par_iter()
        .map(|x| norm * kernel_sum(ds, kernel, scale, x))
        .collect())
}

/// A parametrized curve `t ↦ γ(t)` on a closed interval.
pub trait Curve: Sync {
    fn ambient_dim(&self) -> usize;
    fn domain(&self) -> (f64, f64);
    fn point(&self, t: f64) -> Vec<f64>;
    /// `|γ'(t)|`.
    fn speed(&self, t: f64) -> f64;
}

/// Resolution controls for curve integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveQuadrature {
    /// Initial number of composite Gauss–Legendre panels.
    pub panels: usize,
    /// Successive refinements must agree to `tol · max(1, |I|)`.
    pub tol: f64,
    /// Maximum number of panel doublings.
    pub max_refinements: usize,
}

impl CurveQuadrature {
    /// Panels sized so each covers about a quarter of a kernel width.
    pub fn for_kernel(length: f64, n: f64, lambda: f64) -> Self {
        let panels = ((length * lambda * n / 4.0).ceil() as usize).max(8);
        Self {
            panels,
            tol: 1e-8,
            max_refinements: 8,
        }
    }
}

const GL_POINTS: usize = 16;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    for i in 0..k.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=k {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = k as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[k - 1 - i] = x;
        weights[i] = w;
        weights[k - 1 - i] = w;
    }
    (nodes, weights)
}

fn composite(curve: &dyn Curve, g: &(dyn Fn(f64, &[f64]) -> f64 + Sync), panels: usize) -> f64 {
    let (a, b) = curve.domain();
    let (nodes, weights) = gauss_legendre(GL_POINTS);
    let h = (b - a) / panels as f64;
    let mut acc = CompensatedSum::new();
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (u, w) in nodes.iter().zip(&weights) {
            let t = mid + 0.5 * h * u;
            let y = curve.point(t);
            acc.add(0.5 * h * w * curve.speed(t) * g(t, &y));
        }
    }
    acc.value()
}

/// `∫ g(t, γ(t)) ds` over arc length, refined by panel doubling.
pub fn curve_integral(
    curve: &dyn Curve,
    g: &(dyn Fn(f64, &[f64]) -> f64 + Sync),
    quad: CurveQuadrature,
) -> Result<f64> {
    let mut panels = quad.panels.max(1);
    let mut prev = composite(curve, g, panels);
    if !prev.is_finite() {
        return Err(Error::NonFinite("curve integrand"));
    }
    for _ in 0..quad.max_refinements {
        panels *= 2;
        let next = composite(curve, g, panels);
        if !next.is_finite() {
            return Err(Error::NonFinite("curve integrand"));
        }
        if (next - prev).abs() <= quad.tol * next.abs().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NoConvergence(format!(
        "curve quadrature still changing at {panels} panels"
    )))
}

/// Arc length of a curve.
pub fn curve_length(curve: &dyn Curve) -> Result<f64> {
    curve_integral(
        curve,
        &|_, _| 1.0,
        CurveQuadrature {
            panels: 16,
            tol: 1e-13,
            max_refinements: 12,
        },
    )
}

/// `volume · λ^q ∫ Φ̃(λ|x - γ|) f dμ*` with `μ*` the arc-length measure of
/// total mass 1. `f` is a function of the curve parameter.
///
/// With `volume` equal to the curve length this is `λ^q ∫ Φ̃ f ds`, which
/// maps constants to themselves in the limit of large `n`.
#[allow(clippy::too_many_arguments)]
pub fn continuous_operator_on_curve(
    curve: &dyn Curve,
    f: &(dyn Fn(f64) -> f64 + Sync),
    kernel: &dyn RadialKernel,
    q: usize,
    lambda: f64,
    volume: f64,
    x: &[f64],
    quad: CurveQuadrature,
) -> Result<f64> {
    let (first, _) = curve_operator_moments(curve, f, kernel, q, lambda, volume, x, quad, false)?;
    Ok(first)
}

/// First and (optionally) second moment of the single-sample estimator term
/// `Z = volume · λ^q Φ̃(λ|x - γ(T)|) f(T)` with `T ~ μ*`. The variance of
/// an `M`-sample estimate is `(E[Z²] - E[Z]²)/M`.
#[allow(clippy::too_many_arguments)]
pub fn curve_operator_moments(
    curve: &dyn Curve,
    f: &(dyn Fn(f64) -> f64 + Sync),
    kernel: &dyn RadialKernel,
    q: usize,
    lambda: f64,
    volume: f64,
    x: &[f64],
    quad: CurveQuadrature,
    second: bool,
) -> Result<(f64, f64)> {
    if x.len() != curve.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: curve.ambient_dim(),
            got: x.len(),
        });
    }
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(out_of_range("lambda", format!("{lambda} must be positive")));
    }
    let length = curve_length(curve)?;
    let amp = volume * lambda.powi(q as i32);
    let term = |t: f64, y: &[f64]| amp * kernel.eval_radial(lambda * distance(x, y)) * f(t);
    let first = curve_integral(curve, &|t, y| term(t, y), quad)? / length;
    let sq = if second {
        curve_integral(curve, &|t, y| term(t, y).powi(2), quad)? / length
    } else {
        0.0
    };
    Ok((first, sq))
}
