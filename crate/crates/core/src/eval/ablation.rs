use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use super::baselines::{baseline_select, BaselineKind};
use super::metrics::{outlier_recall, reconstruction_quality};
use super::synthetic::{gen_synthetic, SyntheticSpec};
use crate::compression::{plan_compression, ApetConfig, Keep};
use crate::error::{ApetError, Result};
use crate::matrix::TokenMatrix;
use crate::sampling::Sampler;

/// Outcome of one selection method on one seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub retained: Vec<usize>,
    pub relative_error: f64,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodResult {
    pub method: String,
    pub mean_relative_error: f64,
    pub mean_recall: Option<f64>,
    pub runs: Vec<SeedOutcome>,
    /// Selection time summed over seeds; not serialized.
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Comparison of the compression method against baselines over a seed range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub schema: &'static str,
    pub n: usize,
    pub d: usize,
    pub keep: usize,
    pub basis_m: usize,
    pub seeds: Vec<u64>,
    pub methods: Vec<MethodResult>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    s / c as f64
}

fn summarize(method: String, runs: Vec<SeedOutcome>, wall_time: Duration) -> MethodResult {
    let mean_relative_error = mean(runs.iter().map(|r| r.relative_error));
    let mean_recall = if runs.iter().all(|r| r.recall.is_some()) {
        Some(mean(runs.iter().filter_map(|r| r.recall)))
    } else {
        None
    };
    MethodResult {
        method,
        mean_relative_error,
        mean_recall,
        runs,
        wall_time,
    }
}

fn score(x: &TokenMatrix, truth: Option<&[usize]>, seed: u64, retained: Vec<usize>, ridge: f64) -> Result<SeedOutcome> {
    let relative_error = reconstruction_quality(x, &retained, ridge)?;
    let recall = match truth {
        Some(t) if !t.is_empty() => Some(outlier_recall(&retained, t)?),
        _ => None,
    };
    Ok(SeedOutcome {
        seed,
        retained,
        relative_error,
        recall,
    })
}

/// Runs the configured compression and each baseline once per seed on a
/// fixed matrix. The seed feeds the random sampler and the random baseline.
pub fn evaluate(
    x: &TokenMatrix,
    truth: Option<&[usize]>,
    cfg: &ApetConfig,
    baselines: &[BaselineKind],
    seeds: &[u64],
) -> Result<EvalResult> {
    if seeds.is_empty() {
        return Err(ApetError::InvalidArgument("seed list is empty".into()));
    }
    if let Some(t) = truth {
        if let Some(&bad) = t.iter().find(|&&i| i >= x.n()) {
            return Err(ApetError::InvalidArgument(format!("truth index {bad} out of range")));
        }
    }
    let k = cfg.resolve(x.n())?;
    let mut methods = Vec::with_capacity(1 + baselines.len());

    let mut runs = Vec::with_capacity(seeds.len());
    let mut wall = Duration::ZERO;
    for &seed in seeds {
        let c = ApetConfig { seed, ..*cfg };
        let t = Instant::now();
        let plan = plan_compression(x, &c)?;
        wall += t.elapsed();
        runs.push(score(x, truth, seed, plan.retained, cfg.ridge_rel)?);
    }
    methods.push(summarize("apet".into(), runs, wall));

    for &b in baselines {
        let mut runs = Vec::with_capacity(seeds.len());
        let mut wall = Duration::ZERO;
        for &seed in seeds {
            let t = Instant::now();
            let retained = baseline_select(x, k, b, seed)?;
            wall += t.elapsed();
            runs.push(score(x, truth, seed, retained, cfg.ridge_rel)?);
        }
        methods.push(summarize(b.to_string(), runs, wall));
    }

    Ok(EvalResult {
        schema: "1",
        n: x.n(),
        d: x.d(),
        keep: k,
        basis_m: cfg.basis_m,
        seeds: seeds.to_vec(),
        methods,
    })
}

/// Data source for an ablation sweep.
#[derive(Debug, Clone)]
pub enum AblationInput {
    /// One fixed matrix; seeds only affect seeded samplers.
    Matrix {
        x: TokenMatrix,
        truth: Option<Vec<usize>>,
    },
    /// Fresh synthetic data per seed (the spec's own seed is replaced).
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationGrid {
    pub samplers: Vec<Sampler>,
    pub basis_m: Vec<usize>,
    pub keep: Vec<usize>,
    pub seeds: Vec<u64>,
    pub ridge_rel: f64,
}

impl AblationGrid {
    /// Sampler comparison crossed with the basis-size sweep 6..=14.
    pub fn standard(keep: usize, seeds: Vec<u64>) -> Self {
        Self {
            samplers: vec![Sampler::Random, Sampler::dpc(), Sampler::Fps],
            basis_m: vec![6, 8, 10, 12, 14],
            keep: vec![keep],
            seeds,
            ridge_rel: crate::compression::DEFAULT_RIDGE_REL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationCell {
    pub sampler: Sampler,
    pub basis_m: usize,
    pub keep: usize,
    pub mean_relative_error: f64,
    pub mean_recall: Option<f64>,
    pub runs: Vec<SeedOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationTable {
    pub schema: &'static str,
    pub grid: AblationGrid,
    pub cells: Vec<AblationCell>,
}

impl AblationTable {
    /// One line per cell: `sampler,basis_m,keep,mean_relative_error,mean_recall`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sampler,basis_m,keep,mean_relative_error,mean_recall\n");
        for c in &self.cells {
            let recall = c.mean_recall.map(|r| r.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.sampler.kind(),
                c.basis_m,
                c.keep,
                c.mean_relative_error,
                recall
            ));
        }
        out
    }
}

/// Sweeps samplers x basis sizes x keep counts; cells are computed in
/// parallel and emitted in grid order.
pub fn run_ablation(input: &AblationInput, grid: &AblationGrid) -> Result<AblationTable> {
    if grid.seeds.is_empty() || grid.samplers.is_empty() || grid.basis_m.is_empty() || grid.keep.is_empty() {
        return Err(ApetError::InvalidArgument("ablation grid has an empty axis".into()));
    }
    for &m in &grid.basis_m {
        for &k in &grid.keep {
            if m < 1 || m > k {
                return Err(ApetError::InvalidBudget(format!(
                    "grid cell with basis size {m} and keep {k} is invalid"
                )));
            }
        }
    }

    let datasets: Vec<(u64, TokenMatrix, Option<Vec<usize>>)> = match input {
        AblationInput::Matrix { x, truth } => grid
            .seeds
            .iter()
            .map(|&s| (s, x.clone(), truth.clone()))
            .collect(),
        AblationInput::Synthetic(spec) => grid
            .seeds
            .par_iter()
            .map(|&s| {
                let (x, t) = gen_synthetic(&SyntheticSpec { seed: s, ..*spec })?;
                Ok((s, x, t))
            })
            .collect::<Result<_>>()?,
    };

    let mut specs = Vec::new();
    for &sampler in &grid.samplers {
        for &m in &grid.basis_m {
            for &k in &grid.keep {
                specs.push((sampler, m, k));
            }
        }
    }

    let cells = specs
        .par_iter()
        .map(|&(sampler, basis_m, keep)| {
            let runs = datasets
                .iter()
                .map(|(seed, x, truth)| {
                    let cfg = ApetConfig {
                        keep: Keep::Count(keep),
                        basis_m,
                        sampler,
                        ridge_rel: grid.ridge_rel,
                        merge: crate::compression::MergeMode::Mean,
                        seed: *seed,
                    };
                    let plan = plan_compression(x, &cfg)?;
                    score(x, truth.as_deref(), *seed, plan.retained, grid.ridge_rel)
                })
                .collect::<Result<Vec<_>>>()?;
            let summary = summarize(String::new(), runs, Duration::ZERO);
            Ok(AblationCell {
                sampler,
                basis_m,
                keep,
                mean_relative_error: summary.mean_relative_error,
                mean_recall: summary.mean_recall,
                runs: summary.runs,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(AblationTable {
        schema: "1",
        grid: grid.clone(),
        cells,
    })
}
