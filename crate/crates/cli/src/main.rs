use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lockern::estimator::{estimate_batch, Curve, Dataset, EstimatorConfig};
use lockern::{Error, Result};
use lockern_cli::tools::{exit_code, DeepEvalConfig, SynthConfig};
use lockern_cli::{
    bernstein_scaled_error, gen_training, heat_kernel_baseline, heat_kernel_normalized, helix_target,
    run_experiment, trial_rng, EvalMode, ExperimentConfig, HelixSpec,
};

#[derive(Parser)]
#[command(name = "lockern", version, about = "Localized Hermite-kernel estimator on manifold data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured number of trials.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a labelled helix training set and write it as CSV.
    GenData(Common),
    /// Evaluate the kernel estimator from a training CSV at query points.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Training CSV with columns y_1..y_Q,value.
        #[arg(long)]
        data: PathBuf,
        /// Query CSV, one point per row.
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value_t = 1)]
        q: usize,
        #[arg(long)]
        n: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        volume: f64,
    },
    /// Run the helix reconstruction experiment.
    Helix(Common),
    /// Compare the heat-kernel average with the kernel estimator on the helix.
    BaselineHeat {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.05, 0.025])]
        t: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [16.0, 32.0, 64.0])]
        n: Vec<f64>,
    },
    /// Tabulate n·sup|B_n(x²) - x²| for the Bernstein operator.
    DemoBernstein {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [16usize, 64, 256])]
        n: Vec<usize>,
    },
    /// Build the Gaussian network equivalent to a kernel.
    SynthNet(Common),
    /// Evaluate a DAG of constituent functions.
    DeepEval(Common),
}

fn load_experiment(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::helix_default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(k) = common.trials {
        cfg.trials = k;
    }
    if let Some(o) = &common.out {
        cfg.output = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn require_config(common: &Common) -> Result<String> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Missing("--config <json>".into()))?;
    Ok(std::fs::read_to_string(path)?)
}

fn out_dir(common: &Common) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

fn read_points(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let p = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        out.push(p);
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(common) => {
            let cfg = load_experiment(&common)?;
            let dir = out_dir(&common);
            std::fs::create_dir_all(&dir)?;
            for k in 0..cfg.trials {
                let ds = gen_training(&HelixSpec, cfg.m, cfg.noise, &mut trial_rng(cfg.seed, k))?;
                ds.save(dir.join(format!("train_{k:03}.csv")))?;
            }
            println!("wrote {} training set(s) of {} samples to {}", cfg.trials, cfg.m, dir.display());
        }
        Command::Estimate {
            common,
            data,
            queries,
            q,
            n,
            alpha,
            volume,
        } => {
            let ds = Dataset::load(&data, q)?;
            let est = EstimatorConfig::new(n, alpha, q)?.with_volume(volume)?;
            let xs = read_points(&queries)?;
            let fhat = estimate_batch(&ds, &est, &xs)?;
            let dir = out_dir(&common);
            std::fs::create_dir_all(&dir)?;
            let rows: Vec<Vec<f64>> = xs
                .iter()
                .zip(&fhat)
                .map(|(x, v)| x.iter().copied().chain([*v]).collect())
                .collect();
            let mut header: Vec<String> = (1..=ds.ambient_dim()).map(|i| format!("x_{i}")).collect();
            header.push("estimate".into());
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            write_rows(&dir.join("estimates.csv"), &header, &rows)?;
            println!("estimated {} point(s)", xs.len());
        }
        Command::Helix(common) => {
            let cfg = load_experiment(&common)?;
            let report = run_experiment(&cfg)?;
            let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
            report.write_dir(&dir)?;
            let a = &report.average.summary;
            println!(
                "trials={} median trial interior max={:.4e} average: max={:.4e} interior max={:.4e} mean={:.4e}",
                cfg.trials,
                report.median_trial_interior_max(),
                a.max,
                a.interior_max,
                a.mean
            );
        }
        Command::BaselineHeat { common, t, n } => {
            let mut cfg = load_experiment(&common)?;
            if common.config.is_none() {
                cfg.m = 1024;
                cfg.kernel_eval = EvalMode::Tabulated;
            }
            let spec = HelixSpec;
            let ds = gen_training(&spec, cfg.m, cfg.noise, &mut trial_rng(cfg.seed, 0))?;
            let ts: Vec<f64> = spec
                .grid(cfg.test_points)
                .into_iter()
                .filter(|s| spec.is_interior(*s))
                .collect();
            let xs: Vec<Vec<f64>> = ts.iter().map(|s| spec.point(*s)).collect();
            let f: Vec<f64> = ts.iter().map(|s| helix_target(*s)).collect::<Result<_>>()?;
            let sup = |v: &[f64]| v.iter().zip(&f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let mut rows = Vec::new();
            println!("{:>10} {:>10} {:>14} {:>14}", "operator", "param", "raw sup err", "normalized");
            for &tt in &t {
                let raw: Vec<f64> = xs.iter().map(|x| heat_kernel_baseline(&ds, tt, x)).collect::<Result<_>>()?;
                let nrm: Vec<f64> = xs.iter().map(|x| heat_kernel_normalized(&ds, tt, x)).collect::<Result<_>>()?;
                println!("{:>10} {:>10} {:>14.4e} {:>14.4e}", "heat", tt, sup(&raw), sup(&nrm));
                rows.push(vec![0.0, tt, sup(&raw), sup(&nrm)]);
            }
            for &nn in &n {
                let est = EstimatorConfig::new(nn, cfg.alpha, 1)?
                    .with_volume(cfg.volume)?
                    .with_eval(cfg.kernel_eval.into());
                let v = estimate_batch(&ds, &est, &xs)?;
                println!("{:>10} {:>10} {:>14.4e} {:>14}", "kernel", nn, sup(&v), "-");
                rows.push(vec![1.0, nn, sup(&v), f64::NAN]);
            }
            let dir = out_dir(&common);
            std::fs::create_dir_all(&dir)?;
            write_rows(
                &dir.join("heat_comparison.csv"),
                &["kernel_estimator", "param", "sup_error", "normalized_sup_error"],
                &rows,
            )?;
        }
        Command::DemoBernstein { common, n } => {
            let mut rows = Vec::new();
            println!("{:>6} {:>16}", "n", "n*sup|Bn-f|");
            for &k in &n {
                let e = bernstein_scaled_error(k, 1000)?;
                println!("{k:>6} {e:>16.10}");
                rows.push(vec![k as f64, e]);
            }
            if let Some(dir) = &common.out {
                std::fs::create_dir_all(dir)?;
                write_rows(&dir.join("bernstein.csv"), &["n", "scaled_error"], &rows)?;
            }
        }
        Command::SynthNet(common) => {
            let cfg: SynthConfig = serde_json::from_str(&require_config(&common)?)?;
            let net = cfg.build()?;
            let dir = out_dir(&common);
            std::fs::create_dir_all(&dir)?;
            net.save(dir.join("network.json"))?;
            println!("{} neurons in dimension {}, scale {}", net.len(), net.dim(), net.scale());
        }
        Command::DeepEval(common) => {
            let cfg = DeepEvalConfig::from_json(&require_config(&common)?)?;
            let report = cfg.run()?;
            for v in &report.values {
                println!("{v:?}");
            }
            if let Some(dir) = &common.out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("deep_eval.json"), serde_json::to_string_pretty(&report)?)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Result<()> {
        let mut full = vec!["lockern"];
        full.extend_from_slice(args);
        run(Cli::try_parse_from(full).expect("arguments parse"))
    }

    #[test]
    fn gen_data_then_estimate() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.json");
        std::fs::write(
            &cfg,
            r#"{"M":64,"n":8,"alpha":1,"noise":{"kind":"none"},"trials":1,"test_points":16,"seed":3}"#,
        )
        .unwrap();
        let out = dir.path().to_str().unwrap();
        cli(&["gen-data", "--config", cfg.to_str().unwrap(), "--out", out]).unwrap();
        let train = dir.path().join("train_000.csv");
        assert_eq!(Dataset::load(&train, 1).unwrap().len(), 64);
        let queries = dir.path().join("q.csv");
        std::fs::write(&queries, "x_1,x_2,x_3\n1.0,0.0,0.0\n0.0,1.0,1.5707963267948966\n").unwrap();
        cli(&[
            "estimate", "--data", train.to_str().unwrap(), "--queries", queries.to_str().unwrap(),
            "--n", "8", "--volume", "27.9", "--out", out,
        ])
        .unwrap();
        let text = std::fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn helix_writes_reports() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.json");
        std::fs::write(
            &cfg,
            r#"{"M":64,"n":8,"alpha":1,"noise":{"kind":"additive","sigma":0.3},"trials":2,"test_points":32,"seed":5}"#,
        )
        .unwrap();
        let out = dir.path().join("run");
        cli(&["helix", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--trials", "3"]).unwrap();
        for f in ["trial_000.csv", "trial_002.csv", "average.csv", "summary.json"] {
            assert!(out.join(f).exists(), "{f}");
        }
    }

    #[test]
    fn validation_errors_map_to_exit_code_2() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.json");
        std::fs::write(
            &cfg,
            r#"{"M":64,"n":8,"alpha":2,"trials":1,"test_points":16,"seed":3}"#,
        )
        .unwrap();
        let err = cli(&["helix", "--config", cfg.to_str().unwrap()]).unwrap_err();
        assert_eq!(exit_code(&err), 2);
        let err = cli(&["synth-net"]).unwrap_err();
        assert_eq!(exit_code(&err), 2);
        let missing = dir.path().join("nope.json");
        let err = cli(&["helix", "--config", missing.to_str().unwrap()]).unwrap_err();
        assert_eq!(exit_code(&err), 1);
    }

    #[test]
    fn synth_and_deep_eval() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let cfg = dir.path().join("net.json");
        std::fs::write(&cfg, r#"{"n":3,"q":1,"Q":2,"alpha":1}"#).unwrap();
        cli(&["synth-net", "--config", cfg.to_str().unwrap(), "--out", out]).unwrap();
        assert!(lockern::gaussian_net::GaussianNetwork::load(dir.path().join("network.json")).is_ok());

        let deep = dir.path().join("deep.json");
        std::fs::write(
            &deep,
            r#"{"dag":{"nodes":[{"id":"a","kind":"source","in_dim":1},
                               {"id":"top","kind":"internal","in_dim":1,"children":["a"],"lipschitz":1}],
                      "sink":"top"},
                "constituents":{"a":{"op":"sin"},"top":{"op":"sum"}},
                "inputs":[{"a":[0.5]}]}"#,
        )
        .unwrap();
        cli(&["deep-eval", "--config", deep.to_str().unwrap(), "--out", out]).unwrap();
        let rep: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("deep_eval.json")).unwrap()).unwrap();
        assert!((rep["values"][0].as_f64().unwrap() - 0.5f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn bernstein_table() {
        let dir = tempfile::tempdir().unwrap();
        cli(&["demo-bernstein", "--n", "4,8", "--out", dir.path().to_str().unwrap()]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("bernstein.csv")).unwrap();
        assert_eq!(text.lines().count(), 3);
    }
}
