//! Seeded helix experiments: per-trial reconstructions, multi-trial
//! averages, error summaries and CSV/JSON reports.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lockern::estimator::{
    curve_operator_moments, estimate_batch, Curve, CurveQuadrature, EstimatorConfig, KernelEval,
};
use lockern::kernels::{compile_kernel, TabulatedKernel};
use lockern::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::helix::{gen_training, helix_target, HelixSpec, NoiseModel, HELIX_LENGTH};

/// Identifier of the generator written into every report.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.9), seed_from_u64(seed), stream = trial index";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    #[default]
    Exact,
    Tabulated,
}

impl From<EvalMode> for KernelEval {
    fn from(m: EvalMode) -> Self {
        match m {
            EvalMode::Exact => KernelEval::Exact,
            EvalMode::Tabulated => KernelEval::Tabulated,
        }
    }
}

fn default_volume() -> f64 {
    HELIX_LENGTH
}

/// One helix experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "M")]
    pub m: usize,
    pub n: f64,
    pub alpha: f64,
    #[serde(default)]
    pub noise: NoiseModel,
    pub trials: usize,
    pub test_points: usize,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub kernel_eval: EvalMode,
    #[serde(default = "default_volume")]
    pub volume: f64,
}

impl ExperimentConfig {
    /// `M = 256, n = 64, α = 1`, noiseless, one trial on 2048 points.
    pub fn helix_default() -> Self {
        Self {
            m: 256,
            n: 64.0,
            alpha: 1.0,
            noise: NoiseModel::None,
            trials: 1,
            test_points: 2048,
            seed: 0,
            output: None,
            kernel_eval: EvalMode::Exact,
            volume: HELIX_LENGTH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &'static str, detail: String| Err(Error::OutOfRange { what, detail });
        if self.m == 0 {
            return bad("M", "must be positive".into());
        }
        if !self.n.is_finite() || self.n < 1.0 {
            return bad("n", format!("{} must be at least 1", self.n));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 || self.alpha > 1.0 {
            return bad("alpha", format!("{} not in (0, 1]", self.alpha));
        }
        if self.trials == 0 {
            return bad("trials", "must be positive".into());
        }
        if self.test_points == 0 {
            return bad("test_points", "must be positive".into());
        }
        if !self.volume.is_finite() || self.volume <= 0.0 {
            return bad("volume", format!("{} must be positive", self.volume));
        }
        self.noise.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn estimator(&self) -> Result<EstimatorConfig> {
        Ok(EstimatorConfig::new(self.n, self.alpha, 1)?
            .with_volume(self.volume)?
            .with_eval(self.kernel_eval.into()))
    }
}

/// Error statistics of one reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub max: f64,
    pub interior_max: f64,
    pub mean: f64,
    pub median: f64,
}

/// Reconstruction on the test grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub trial: Option<usize>,
    pub t: Vec<f64>,
    pub f: Vec<f64>,
    pub fhat: Vec<f64>,
    pub errors: Vec<f64>,
    pub summary: ErrorSummary,
    /// `(p, y)`: the error is at most `unit·y` on `p`% of the test points.
    pub histogram: Vec<(u32, f64)>,
}

fn median(sorted: &[f64]) -> f64 {
    let k = sorted.len();
    if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    }
}

/// Cumulative `(p, y)` pairs for `p = 1, …, 100`.
pub fn cumulative_histogram(errors: &[f64], unit: f64) -> Vec<(u32, f64)> {
    if errors.is_empty() {
        return Vec::new();
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    (1..=100u32)
        .map(|p| {
            let rank = ((p as f64 / 100.0) * sorted.len() as f64).ceil() as usize;
            (p, sorted[rank.clamp(1, sorted.len()) - 1] / unit)
        })
        .collect()
}

impl TrialReport {
    pub fn new(trial: Option<usize>, t: Vec<f64>, f: Vec<f64>, fhat: Vec<f64>, unit: f64) -> Self {
        let errors: Vec<f64> = f.iter().zip(&fhat).map(|(a, b)| (a - b).abs()).collect();
        let spec = HelixSpec;
        let interior_max = t
            .iter()
            .zip(&errors)
            .filter(|(ti, _)| spec.is_interior(**ti))
            .map(|(_, e)| *e)
            .fold(0.0, f64::max);
        let mut sorted = errors.clone();
        sorted.sort_by(f64::total_cmp);
        let summary = ErrorSummary {
            max: sorted.last().copied().unwrap_or(0.0),
            interior_max,
            mean: errors.iter().sum::<f64>() / errors.len().max(1) as f64,
            median: if sorted.is_empty() { 0.0 } else { median(&sorted) },
        };
        let histogram = cumulative_histogram(&errors, unit);
        Self {
            trial,
            t,
            f,
            fhat,
            errors,
            summary,
            histogram,
        }
    }

    /// `t,f,fhat,error` with shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "f", "fhat", "error"])?;
        for i in 0..self.t.len() {
            w.write_record([
                format!("{:?}", self.t[i]),
                format!("{:?}", self.f[i]),
                format!("{:?}", self.fhat[i]),
                format!("{:?}", self.errors[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// All trials of one run plus the trial-averaged reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialReport>,
    pub average: TrialReport,
    /// Histogram of all per-trial errors pooled together.
    pub pooled_histogram: Vec<(u32, f64)>,
    pub histogram_unit: f64,
}

#[derive(Serialize)]
struct TrialSummaryJson<'a> {
    trial: Option<usize>,
    summary: &'a ErrorSummary,
    histogram: &'a [(u32, f64)],
}

#[derive(Serialize)]
struct ReportJson<'a> {
    rng: &'a str,
    config: &'a ExperimentConfig,
    interior: [f64; 2],
    histogram_unit: f64,
    sample_complexity_hint: String,
    trials: Vec<TrialSummaryJson<'a>>,
    average: TrialSummaryJson<'a>,
    pooled_histogram: &'a [(u32, f64)],
    median_trial_interior_max: f64,
}

impl ExperimentReport {
    /// Median over trials of the per-trial interior max error.
    pub fn median_trial_interior_max(&self) -> f64 {
        let mut v: Vec<f64> = self.trials.iter().map(|t| t.summary.interior_max).collect();
        v.sort_by(f64::total_cmp);
        median(&v)
    }

    pub fn summary_json(&self) -> Result<String> {
        let c = &self.config;
        let q = 1.0;
        let hint = format!(
            "advisory only: n^(q(2-alpha)) = {:.3e} against M = {}",
            c.n.powf(q * (2.0 - c.alpha)),
            c.m
        );
        let json = ReportJson {
            rng: RNG_ALGORITHM,
            config: c,
            interior: [0.2 * std::f64::consts::PI, 1.8 * std::f64::consts::PI],
            histogram_unit: self.histogram_unit,
            sample_complexity_hint: hint,
            trials: self
                .trials
                .iter()
                .map(|t| TrialSummaryJson {
                    trial: t.trial,
                    summary: &t.summary,
                    histogram: &t.histogram,
                })
                .collect(),
            average: TrialSummaryJson {
                trial: None,
                summary: &self.average.summary,
                histogram: &self.average.histogram,
            },
            pooled_histogram: &self.pooled_histogram,
            median_trial_interior_max: self.median_trial_interior_max(),
        };
        Ok(serde_json::to_string_pretty(&json)?)
    }

    /// `trial_000.csv, …`, `average.csv` and `summary.json` under `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for t in &self.trials {
            let name = format!("trial_{:03}.csv", t.trial.unwrap_or(0));
            t.write_csv(std::fs::File::create(dir.join(name))?)?;
        }
        self.average.write_csv(std::fs::File::create(dir.join("average.csv"))?)?;
        std::fs::write(dir.join("summary.json"), self.summary_json()?)?;
        Ok(())
    }
}

/// Generator for trial `k`: independent stream of the seeded ChaCha20.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Runs every trial (in parallel), averages `F̂` and assembles the report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let spec = HelixSpec;
    let est = cfg.estimator()?;
    let ts = spec.grid(cfg.test_points);
    let xs: Vec<Vec<f64>> = ts.iter().map(|t| spec.point(*t)).collect();
    let f: Vec<f64> = ts.iter().map(|t| helix_target(*t)).collect::<Result<_>>()?;
    let unit = cfg.noise.histogram_unit();

    let fhats: Vec<Vec<f64>> = (0..cfg.trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(cfg.seed, k);
            let ds = gen_training(&spec, cfg.m, cfg.noise, &mut rng)?;
            estimate_batch(&ds, &est, &xs)
        })
        .collect::<Result<_>>()?;

    let trials: Vec<TrialReport> = fhats
        .iter()
        .enumerate()
        .map(|(k, fh)| TrialReport::new(Some(k), ts.clone(), f.clone(), fh.clone(), unit))
        .collect();
    let mean: Vec<f64> = (0..ts.len())
        .map(|i| fhats.iter().map(|fh| fh[i]).sum::<f64>() / cfg.trials as f64)
        .collect();
    let average = TrialReport::new(None, ts.clone(), f.clone(), mean, unit);
    let pooled: Vec<f64> = trials.iter().flat_map(|t| t.errors.iter().copied()).collect();
    Ok(ExperimentReport {
        config: cfg.clone(),
        pooled_histogram: cumulative_histogram(&pooled, unit),
        trials,
        average,
        histogram_unit: unit,
    })
}

/// Mean and standard deviation of the `M`-sample estimate at each test
/// parameter, from the continuous operator.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub t: Vec<f64>,
    pub f: Vec<f64>,
    pub mean: Vec<f64>,
    /// Standard deviation of one summand; divide by `√M` for the estimate.
    pub unit_sd: Vec<f64>,
}

impl OracleRun {
    /// `sup_interior |mean - f| + k · sup_interior unit_sd/√M`.
    pub fn interior_threshold(&self, m: usize, k: f64) -> f64 {
        let spec = HelixSpec;
        let (mut bias, mut sd) = (0.0f64, 0.0f64);
        for i in 0..self.t.len() {
            if spec.is_interior(self.t[i]) {
                bias = bias.max((self.mean[i] - self.f[i]).abs());
                sd = sd.max(self.unit_sd[i]);
            }
        }
        bias + k * sd / (m as f64).sqrt()
    }
}

/// Continuous-operator moments on the helix test grid (noiseless labels).
pub fn helix_oracle(n: f64, alpha: f64, volume: f64, test_points: usize) -> Result<OracleRun> {
    let spec = HelixSpec;
    let table = compile_kernel(n, 1)?;
    let kernel = Arc::new(TabulatedKernel::new(&table));
    let lambda = n.powf(1.0 - alpha);
    let ts = spec.grid(test_points);
    let quad = CurveQuadrature::for_kernel(HELIX_LENGTH, n, lambda);
    let target = |t: f64| helix_target(t.clamp(0.0, 2.0 * std::f64::consts::PI)).unwrap_or(0.0);
    let moments: Vec<(f64, f64)> = ts
        .par_iter()
        .map(|t| {
            let x = spec.point(*t);
            curve_operator_moments(&spec, &target, kernel.as_ref(), 1, lambda, volume, &x, quad, true)
        })
        .collect::<Result<_>>()?;
    let f = ts.iter().map(|t| helix_target(*t)).collect::<Result<_>>()?;
    Ok(OracleRun {
        t: ts,
        f,
        mean: moments.iter().map(|m| m.0).collect(),
        unit_sd: moments.iter().map(|(a, b)| (b - a * a).max(0.0).sqrt()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_is_monotone() {
        let errs: Vec<f64> = (0..37).map(|i| ((i * 7919) % 37) as f64 * 0.01).collect();
        let h = cumulative_histogram(&errs, 0.3);
        assert_eq!(h.len(), 100);
        assert!(h.windows(2).all(|w| w[0].1 <= w[1].1));
        assert!((h[99].1 - 0.36 / 0.3).abs() < 1e-12);
    }

    #[test]
    fn config_json_mirrors_fields() {
        let text = r#"{"M":256,"n":64,"alpha":1,"noise":{"kind":"none"},"trials":1,
                       "test_points":2048,"seed":7,"output":"out"}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.m, 256);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.volume, HELIX_LENGTH);
        assert!(ExperimentConfig::from_json(&text.replace("\"alpha\":1", "\"alpha\":1.5")).is_err());
        assert!(ExperimentConfig::from_json(&text.replace("\"trials\":1", "\"trials\":0")).is_err());
        assert!(ExperimentConfig::from_json(&text.replace("none", "gamma")).is_err());
    }

    #[test]
    fn small_run_is_deterministic_and_consistent() {
        let cfg = ExperimentConfig {
            m: 128,
            n: 8.0,
            trials: 3,
            test_points: 64,
            noise: NoiseModel::Additive { sigma: 0.3 },
            seed: 11,
            ..ExperimentConfig::helix_default()
        };
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        for t in &a.trials {
            assert!(t.summary.interior_max <= t.summary.max);
            assert!(t.histogram.windows(2).all(|w| w[0].1 <= w[1].1));
        }
        assert_ne!(a.trials[0].fhat, a.trials[1].fhat);
        let dir = tempfile::tempdir().unwrap();
        a.write_dir(dir.path()).unwrap();
        assert!(dir.path().join("trial_002.csv").exists());
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(json["rng"], RNG_ALGORITHM);
    }
}
