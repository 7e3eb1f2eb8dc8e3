//! Noise / denoise / evaluate over a set of models and noise levels, in the
//! layout of a results table: one row per model, a "noise" and a
//! "proposed" column group per noise level.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use log::{error, info};
use rayon::prelude::*;

use crate::cloud::{add_gaussian_noise, load_cloud, CloudFormat, NoiseSpec, PointCloud};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricReport};
use crate::solver::{denoise, DenoiseParams};

/// Gamma used at sigma = 0.3 unless gamma was set explicitly.
pub const HIGH_NOISE_GAMMA: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sigmas: Vec<f64>,
    pub seed: u64,
    pub params: DenoiseParams,
    /// Neighbor count for C2P plane fits.
    pub eval_k: usize,
    /// Models processed concurrently.
    pub workers: usize,
    /// Switch gamma to [`HIGH_NOISE_GAMMA`] for sigma = 0.3.
    pub auto_gamma: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sigmas: vec![0.1, 0.3],
            seed: 1,
            params: DenoiseParams::default(),
            eval_k: crate::metrics::DEFAULT_PLANE_K,
            workers: 1,
            auto_gamma: true,
        }
    }
}

impl BenchConfig {
    pub fn params_for(&self, sigma: f64) -> DenoiseParams {
        let mut p = self.params.clone();
        if self.auto_gamma && (sigma - 0.3).abs() < 1e-12 {
            p.gamma = HIGH_NOISE_GAMMA;
        }
        p
    }

    /// Noise seed for the `sigma_index`-th level of the `model_index`-th model.
    pub fn seed_for(&self, model_index: usize, sigma_index: usize) -> u64 {
        self.seed
            .wrapping_add(1000 * model_index as u64)
            .wrapping_add(sigma_index as u64)
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub model: String,
    pub sigma: f64,
    pub seed: u64,
    pub gamma: f64,
    pub noisy: MetricReport,
    pub denoised: MetricReport,
    pub denoise_seconds: f64,
    pub admm_converged: bool,
}

#[derive(Debug, Clone, Default)]
pub struct BenchOutcome {
    pub rows: Vec<BenchRow>,
    /// `(model, seconds)` for every model that completed.
    pub model_seconds: Vec<(String, f64)>,
    /// `(model, message)` for every model that failed.
    pub failures: Vec<(String, String)>,
}

pub const BENCH_CSV_HEADER: &str = "model,sigma,seed,gamma,method,c2c_unsq,c2c_sq,c2p";

impl BenchOutcome {
    /// Metric rows only, so repeated runs with the same seeds give
    /// identical bytes. Timings are in [`BenchOutcome::timings_csv`].
    pub fn to_csv(&self) -> String {
        let mut out = format!("{BENCH_CSV_HEADER}\n");
        for r in &self.rows {
            for (method, m) in [("noise", &r.noisy), ("proposed", &r.denoised)] {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{method},{:e},{:e},{:e}",
                    r.model,
                    r.sigma,
                    r.seed,
                    r.gamma,
                    m.c2c.unsquared.symmetric,
                    m.c2c.squared.symmetric,
                    m.c2p.squared.symmetric
                );
            }
        }
        out
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("model,runtime_s\n");
        for (m, s) in &self.model_seconds {
            let _ = writeln!(out, "{m},{s:.3}");
        }
        out
    }

    /// Rows are models; for each sigma, C2C (unsquared) and C2P of the noisy
    /// and denoised clouds.
    pub fn to_table(&self) -> String {
        let mut sigmas: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !sigmas.contains(&r.sigma) {
                sigmas.push(r.sigma);
            }
        }
        let mut models: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !models.contains(&r.model.as_str()) {
                models.push(&r.model);
            }
        }
        let mut out = String::new();
        for metric in ["C2C", "C2P"] {
            let _ = write!(out, "{metric:<16}");
            for s in &sigmas {
                let _ = write!(out, " {:>12} {:>12}", format!("noise@{s}"), format!("proposed@{s}"));
            }
            let _ = writeln!(out, " {:>10}", "runtime_s");
            for model in &models {
                let _ = write!(out, "{model:<16}");
                for s in &sigmas {
                    match self.rows.iter().find(|r| r.model == *model && r.sigma == *s) {
                        Some(r) => {
                            let (a, b) = if metric == "C2C" {
                                (r.noisy.c2c.unsquared.symmetric, r.denoised.c2c.unsquared.symmetric)
                            } else {
                                (r.noisy.c2p.squared.symmetric, r.denoised.c2p.squared.symmetric)
                            };
                            let _ = write!(out, " {a:>12.5e} {b:>12.5e}");
                        }
                        None => {
                            let _ = write!(out, " {:>12} {:>12}", "-", "-");
                        }
                    }
                }
                let secs = self
                    .model_seconds
                    .iter()
                    .find(|(m, _)| m == model)
                    .map_or_else(|| "-".to_string(), |(_, s)| format!("{s:.2}"));
                let _ = writeln!(out, " {secs:>10}");
            }
            let _ = writeln!(out);
        }
        for (m, msg) in &self.failures {
            let _ = writeln!(out, "FAILED {m}: {msg}");
        }
        out
    }
}

/// Every `.ply` and `.xyz` file in `dir`, sorted by file name, keyed by stem.
pub fn load_models(dir: impl AsRef<Path>) -> Result<Vec<(String, PointCloud)>> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("ply") || e.eq_ignore_ascii_case("xyz"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no .ply or .xyz models in {}",
            dir.display()
        )));
    }
    paths
        .iter()
        .map(|p| {
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let format = CloudFormat::from_path(p);
            Ok((name, load_cloud(p, format)?))
        })
        .collect()
}

fn run_model(index: usize, name: &str, clean: &PointCloud, cfg: &BenchConfig) -> Result<(Vec<BenchRow>, f64)> {
    let started = Instant::now();
    let mut rows = Vec::new();
    for (si, &sigma) in cfg.sigmas.iter().enumerate() {
        let seed = cfg.seed_for(index, si);
        let params = cfg.params_for(sigma);
        let noisy = add_gaussian_noise(clean, NoiseSpec { sigma, seed })?;
        let t = Instant::now();
        let (denoised, report) = denoise(&noisy, &params)?;
        let denoise_seconds = t.elapsed().as_secs_f64();
        info!("{name} sigma={sigma}: denoised in {denoise_seconds:.2}s");
        rows.push(BenchRow {
            model: name.to_string(),
            sigma,
            seed,
            gamma: params.gamma,
            noisy: evaluate(clean, &noisy, cfg.eval_k)?,
            denoised: evaluate(clean, &denoised, cfg.eval_k)?,
            denoise_seconds,
            admm_converged: report.all_admm_converged(),
        });
    }
    Ok((rows, started.elapsed().as_secs_f64()))
}

/// Runs every model; failures are logged and collected, not propagated.
pub fn run_bench(models: &[(String, PointCloud)], cfg: &BenchConfig) -> Result<BenchOutcome> {
    if models.is_empty() {
        return Err(Error::InvalidParameter("no models to benchmark".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    let results: Vec<Result<(Vec<BenchRow>, f64)>> = pool.install(|| {
        models
            .par_iter()
            .enumerate()
            .map(|(i, (name, cloud))| run_model(i, name, cloud, cfg))
            .collect()
    });
    let mut outcome = BenchOutcome::default();
    for ((name, _), res) in models.iter().zip(results) {
        match res {
            Ok((rows, secs)) => {
                outcome.rows.extend(rows);
                outcome.model_seconds.push((name.clone(), secs));
            }
            Err(e) => {
                error!("{name}: {e}");
                outcome.failures.push((name.clone(), e.to_string()));
            }
        }
    }
    Ok(outcome)
}
