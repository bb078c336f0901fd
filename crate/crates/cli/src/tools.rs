//! Config types for the network-synthesis and DAG-evaluation commands, and
//! the error-to-exit-code mapping.

use std::collections::HashMap;
use std::sync::Arc;

use lockern::deep_net::{eval_gfunction, Constituent, ConstituentSet, Dag, SourceInputs};
use lockern::gaussian_net::{prefab_kernel_network, prefab_kernel_network_with, GaussianNetwork};
use lockern::{Error, Result};
use serde::{Deserialize, Serialize};

/// Exit status for a library error: 1 for I/O or numerical failure, 2 for
/// anything the caller could fix by changing the input.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::NoConvergence(_) => 1,
        _ => 2,
    }
}

/// Input of `synth-net`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n: f64,
    pub q: usize,
    #[serde(rename = "Q")]
    pub big_q: usize,
    pub alpha: f64,
    #[serde(default)]
    pub m: Option<usize>,
}

impl SynthConfig {
    pub fn build(&self) -> Result<GaussianNetwork> {
        match self.m {
            Some(m) => prefab_kernel_network_with(self.n, self.q, self.big_q, self.alpha, m),
            None => prefab_kernel_network(self.n, self.q, self.big_q, self.alpha),
        }
    }
}

/// Built-in constituent functions addressable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase", deny_unknown_fields)]
pub enum ConstituentSpec {
    Sum,
    Mean,
    Product,
    Norm,
    /// `Σ w_i x_i + b`.
    Linear {
        weights: Vec<f64>,
        #[serde(default)]
        bias: f64,
    },
    /// `sin(Σ x_i)`.
    Sin,
    /// `cos(Σ x_i)`.
    Cos,
}

impl ConstituentSpec {
    pub fn build(&self) -> Constituent {
        match self.clone() {
            ConstituentSpec::Sum => Arc::new(|x: &[f64]| x.iter().sum()),
            ConstituentSpec::Mean => Arc::new(|x: &[f64]| x.iter().sum::<f64>() / x.len().max(1) as f64),
            ConstituentSpec::Product => Arc::new(|x: &[f64]| x.iter().product()),
            ConstituentSpec::Norm => Arc::new(|x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt()),
            ConstituentSpec::Linear { weights, bias } => {
                Arc::new(move |x: &[f64]| bias + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            }
            ConstituentSpec::Sin => Arc::new(|x: &[f64]| x.iter().sum::<f64>().sin()),
            ConstituentSpec::Cos => Arc::new(|x: &[f64]| x.iter().sum::<f64>().cos()),
        }
    }
}

/// Input of `deep-eval`: a DAG, one constituent per node and probe inputs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeepEvalConfig {
    pub dag: serde_json::Value,
    pub constituents: HashMap<String, ConstituentSpec>,
    pub inputs: Vec<SourceInputs>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeepEvalReport {
    pub sink: String,
    pub depth: usize,
    pub order: Vec<String>,
    pub values: Vec<f64>,
}

impl DeepEvalConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn run(&self) -> Result<DeepEvalReport> {
        let dag = Dag::from_json(&self.dag.to_string())?;
        let set: ConstituentSet = self
            .constituents
            .iter()
            .map(|(k, v)| (k.clone(), v.build()))
            .collect();
        let values = self
            .inputs
            .iter()
            .map(|inp| eval_gfunction(&dag, &set, inp))
            .collect::<Result<_>>()?;
        Ok(DeepEvalReport {
            sink: dag.sink().to_string(),
            depth: dag.depth(),
            order: dag.topological_ids().iter().map(|s| s.to_string()).collect(),
            values,
        })
    }
}
