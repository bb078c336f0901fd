//! The helix `t ↦ (cos πt, sin πt, πt)` on `[0, 2π]`, its target function
//! and the two noise models used to label training samples.

use std::f64::consts::PI;

use lockern::estimator::{Curve, Dataset};
use lockern::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Total arc length `√8 π²` of the helix.
pub const HELIX_LENGTH: f64 = 2.0 * std::f64::consts::SQRT_2 * PI * PI;

/// Standard deviation of the argument perturbation in the multiplicative model.
pub const MULT_SIGMA: f64 = 1.5;

/// `exp(σ²/2)` for `σ = 1.5`; undoes the damping `E cos(u + Z) = e^{-σ²/2} cos u`.
pub const MULT_GAIN: f64 = 1.125;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HelixSpec;

impl HelixSpec {
    pub fn domain(&self) -> (f64, f64) {
        (0.0, 2.0 * PI)
    }

    pub fn length(&self) -> f64 {
        HELIX_LENGTH
    }

    /// `count` equidistant parameters including both end points.
    pub fn grid(&self, count: usize) -> Vec<f64> {
        let (a, b) = self.domain();
        match count {
            0 => Vec::new(),
            1 => vec![0.5 * (a + b)],
            _ => (0..count)
                .map(|i| a + (b - a) * i as f64 / (count - 1) as f64)
                .collect(),
        }
    }

    /// Whether `t` lies in `[0.1·2π, 0.9·2π]`.
    pub fn is_interior(&self, t: f64) -> bool {
        (0.2 * PI..=1.8 * PI).contains(&t)
    }
}

impl Curve for HelixSpec {
    fn ambient_dim(&self) -> usize {
        3
    }

    fn domain(&self) -> (f64, f64) {
        HelixSpec::domain(self)
    }

    fn point(&self, t: f64) -> Vec<f64> {
        let (s, c) = (PI * t).sin_cos();
        vec![c, s, PI * t]
    }

    fn speed(&self, _t: f64) -> f64 {
        std::f64::consts::SQRT_2 * PI
    }
}

/// `u = x₁ - x₂ + x₃/2` along the helix.
fn argument(t: f64) -> f64 {
    let (s, c) = (PI * t).sin_cos();
    c - s - 0.5 * PI * t
}

/// `cos(cos πt - sin πt - πt/2)`.
pub fn helix_target(t: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::NonFinite("helix parameter"));
    }
    if !(0.0..=2.0 * PI).contains(&t) {
        return Err(Error::OutOfRange {
            what: "t",
            detail: format!("{t} not in [0, 2π]"),
        });
    }
    Ok(argument(t).cos())
}

/// How training labels are corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseModel {
    #[default]
    None,
    /// `f(y) + ε`, `ε ~ N(0, σ²)`.
    Additive { sigma: f64 },
    /// `cos(u + Z)·e^{1.125}`, `Z ~ N(0, 1.5²)`.
    Multiplicative,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if let NoiseModel::Additive { sigma } = self {
            if !sigma.is_finite() || *sigma < 0.0 {
                return Err(Error::OutOfRange {
                    what: "sigma",
                    detail: format!("{sigma} must be finite and non-negative"),
                });
            }
        }
        Ok(())
    }

    /// One noisy label at parameter `t`.
    pub fn label<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Result<f64> {
        let clean = helix_target(t)?;
        Ok(match *self {
            NoiseModel::None => clean,
            NoiseModel::Additive { sigma } => {
                clean + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal)
            }
            NoiseModel::Multiplicative => {
                let z = Normal::new(0.0, MULT_SIGMA)
                    .map_err(|e| Error::Parse(e.to_string()))?
                    .sample(rng);
                (argument(t) + z).cos() * MULT_GAIN.exp()
            }
        })
    }

    /// Scale used for the `(p, y)` histogram: errors are reported as `y·unit`.
    pub fn histogram_unit(&self) -> f64 {
        match *self {
            NoiseModel::Additive { sigma } if sigma > 0.0 => sigma,
            _ => 0.3,
        }
    }
}

/// `M` samples with `t_j` uniform on `[0, 2π]`, labelled by `noise`.
pub fn gen_training<R: Rng + ?Sized>(
    spec: &HelixSpec,
    m: usize,
    noise: NoiseModel,
    rng: &mut R,
) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    noise.validate()?;
    let (a, b) = spec.domain();
    let mut points = Vec::with_capacity(m);
    let mut values = Vec::with_capacity(m);
    for _ in 0..m {
        let t = a + (b - a) * rng.random::<f64>();
        points.push(spec.point(t));
        values.push(noise.label(t, rng)?);
    }
    Dataset::from_parts(points, values, 1)
}
