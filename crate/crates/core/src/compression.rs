//! The end-to-end compression stage: sample a basis, fit every token on it,
//! keep the basis plus the worst-approximated tokens, and fold each dropped
//! token into its most similar survivor.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approximation::{fit_basis, rank_by_error, ApproximationResult};
use crate::error::{ApetError, Result};
use crate::matrix::{cosine_with_norms, norm, TokenMatrix};
use crate::sampling::{BasisSelection, Sampler};

pub const DEFAULT_BASIS_M: usize = 10;
pub const DEFAULT_RIDGE_REL: f64 = 1e-6;

/// Target size of the compressed token set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keep {
    Count(usize),
    /// Fraction of `n`; resolves to `max(1, round(ratio * n))`.
    Ratio(f64),
}

impl Keep {
    pub fn resolve(&self, n: usize) -> Result<usize> {
        let k = match *self {
            Keep::Count(k) => k,
            Keep::Ratio(r) => {
                if !(r > 0.0 && r <= 1.0) {
                    return Err(ApetError::InvalidBudget(format!(
                        "keep ratio must be in (0, 1], got {r}"
                    )));
                }
                ((r * n as f64).round() as usize).max(1)
            }
        };
        if k < 1 || k > n {
            return Err(ApetError::InvalidBudget(format!(
                "keep count {k} must be in 1..={n}"
            )));
        }
        Ok(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeMode {
    /// Replace each retained token by the unweighted mean of itself and the
    /// tokens merged into it.
    #[default]
    Mean,
    /// Discard dropped tokens and emit retained tokens unchanged.
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApetConfig {
    pub keep: Keep,
    pub basis_m: usize,
    pub sampler: Sampler,
    pub ridge_rel: f64,
    pub merge: MergeMode,
    pub seed: u64,
}

impl ApetConfig {
    pub fn new(keep: Keep) -> Self {
        Self {
            keep,
            basis_m: DEFAULT_BASIS_M,
            sampler: Sampler::Fps,
            ridge_rel: DEFAULT_RIDGE_REL,
            merge: MergeMode::Mean,
            seed: 0,
        }
    }

    /// Resolves and checks `1 <= M <= K <= n`, returning `K`.
    pub fn resolve(&self, n: usize) -> Result<usize> {
        let k = self.keep.resolve(n)?;
        if self.basis_m < 1 {
            return Err(ApetError::InvalidBudget("basis size must be at least 1".into()));
        }
        if self.basis_m > k {
            return Err(ApetError::InvalidBudget(format!(
                "basis size {} exceeds keep count {k}; basis tokens are always retained",
                self.basis_m
            )));
        }
        Ok(k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionPlan {
    /// Strictly ascending retained indices.
    pub retained: Vec<usize>,
    pub basis: BasisSelection,
    /// `groups[j]` lists the dropped tokens merged into `retained[j]`, ascending.
    pub groups: Vec<Vec<usize>>,
    pub residuals: Vec<f64>,
}

impl CompressionPlan {
    pub fn k(&self) -> usize {
        self.retained.len()
    }

    /// Checks the partition, ordering and basis-retention invariants against
    /// a token count.
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(ApetError::PlanMismatch(msg));
        if self.residuals.len() != n {
            return bad(format!("{} residuals for {n} tokens", self.residuals.len()));
        }
        if self.groups.len() != self.retained.len() {
            return bad("groups and retained differ in length".into());
        }
        if self.retained.windows(2).any(|w| w[0] >= w[1]) {
            return bad("retained indices not strictly ascending".into());
        }
        let mut seen = vec![false; n];
        let all = self.retained.iter().chain(self.groups.iter().flatten());
        for &i in all {
            if i >= n {
                return bad(format!("index {i} out of range for {n} tokens"));
            }
            if std::mem::replace(&mut seen[i], true) {
                return bad(format!("index {i} assigned twice"));
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return bad(format!("index {i} neither retained nor merged"));
        }
        for b in &self.basis.indices {
            if self.retained.binary_search(b).is_err() {
                return bad(format!("basis index {b} not retained"));
            }
        }
        Ok(())
    }
}

/// Samples a basis according to `cfg` and plans the compression.
pub fn plan_compression(x: &TokenMatrix, cfg: &ApetConfig) -> Result<CompressionPlan> {
    Ok(plan_compression_timed(x, cfg)?.0)
}

fn plan_compression_timed(x: &TokenMatrix, cfg: &ApetConfig) -> Result<(CompressionPlan, StageTimings, f64, usize)> {
    let k = cfg.resolve(x.n())?;
    let t0 = Instant::now();
    let basis = cfg.sampler.sample(x, cfg.basis_m, cfg.seed)?;
    let t1 = Instant::now();
    let approx = fit_basis(x, &basis, cfg.ridge_rel)?;
    let t2 = Instant::now();
    let (lambda, escalations) = (approx.lambda, approx.escalations);
    let plan = plan_from_approximation(x, approx, k)?;
    let t3 = Instant::now();
    let timings = StageTimings {
        sample: t1 - t0,
        fit: t2 - t1,
        select_and_assign: t3 - t2,
        merge: Duration::ZERO,
    };
    Ok((plan, timings, lambda, escalations))
}

/// Plans a compression with an explicitly chosen basis.
pub fn plan_with_basis(
    x: &TokenMatrix,
    basis: &BasisSelection,
    k: usize,
    ridge_rel: f64,
) -> Result<CompressionPlan> {
    if k < basis.m() || k > x.n() {
        return Err(ApetError::InvalidBudget(format!(
            "keep count {k} must be in {}..={}",
            basis.m(),
            x.n()
        )));
    }
    let approx = fit_basis(x, basis, ridge_rel)?;
    plan_from_approximation(x, approx, k)
}

fn plan_from_approximation(x: &TokenMatrix, approx: ApproximationResult, k: usize) -> Result<CompressionPlan> {
    let n = x.n();
    let mut keep = vec![false; n];
    for &b in &approx.basis.indices {
        keep[b] = true;
    }
    let mut extra = k - approx.basis.m();
    for i in rank_by_error(&approx) {
        if extra == 0 {
            break;
        }
        if !keep[i] {
            keep[i] = true;
            extra -= 1;
        }
    }
    let retained: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
    let dropped: Vec<usize> = (0..n).filter(|&i| !keep[i]).collect();
    let groups = assign_to_retained(x, &retained, &dropped);

    let plan = CompressionPlan {
        retained,
        basis: approx.basis,
        groups,
        residuals: approx.residuals,
    };
    plan.validate(n)?;
    Ok(plan)
}

/// Assigns every dropped token to the retained token of highest cosine
/// similarity, ties going to the smaller retained index.
fn assign_to_retained(x: &TokenMatrix, retained: &[usize], dropped: &[usize]) -> Vec<Vec<usize>> {
    let retained_norms: Vec<f64> = retained.iter().map(|&r| norm(x.row(r))).collect();
    let owners: Vec<usize> = dropped
        .par_iter()
        .map(|&i| {
            let v = x.row(i);
            let vn = norm(v);
            let mut best = 0;
            let mut best_sim = f64::NEG_INFINITY;
            for (j, (&r, &rn)) in retained.iter().zip(&retained_norms).enumerate() {
                let s = cosine_with_norms(v, vn, x.row(r), rn);
                if s > best_sim {
                    best = j;
                    best_sim = s;
                }
            }
            best
        })
        .collect();
    let mut groups = vec![Vec::new(); retained.len()];
    for (&i, &owner) in dropped.iter().zip(&owners) {
        groups[owner].push(i);
    }
    groups
}

/// Builds the `K x d` output, one row per retained token in ascending index
/// order.
pub fn apply_merge(x: &TokenMatrix, plan: &CompressionPlan, mode: MergeMode) -> Result<TokenMatrix> {
    plan.validate(x.n())?;
    let d = x.d();
    let mut out = Vec::with_capacity(plan.k() * d);
    for (&r, group) in plan.retained.iter().zip(&plan.groups) {
        let start = out.len();
        out.extend_from_slice(x.row(r));
        if mode == MergeMode::Mean && !group.is_empty() {
            let row = &mut out[start..];
            for &g in group {
                for (o, v) in row.iter_mut().zip(x.row(g)) {
                    *o += v;
                }
            }
            let count = (group.len() + 1) as f64;
            row.iter_mut().for_each(|o| *o /= count);
        }
    }
    TokenMatrix::new(plan.k(), d, out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub sample: Duration,
    pub fit: Duration,
    pub select_and_assign: Duration,
    pub merge: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl ResidualSummary {
    pub fn of(residuals: &[f64]) -> Self {
        let min = residuals.iter().copied().fold(f64::INFINITY, f64::min);
        let max = residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
        Self { min, max, mean }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportFlags {
    /// The sampler saw no usable geometry and fell back to the first `M` tokens.
    pub degenerate_geometry: bool,
    /// The Gram solve needed jitter beyond the requested ridge.
    pub jitter_escalated: bool,
}

/// Diagnostics for one compression call. Serialized field order is the
/// documented report schema; wall times are kept in memory only so that
/// identical runs produce identical JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressionReport {
    pub schema: &'static str,
    pub config: ApetConfig,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub m: usize,
    pub lambda: f64,
    pub residuals: ResidualSummary,
    pub flags: ReportFlags,
    pub basis: Vec<usize>,
    pub retained: Vec<usize>,
    pub groups: Vec<Vec<usize>>,
    #[serde(skip)]
    pub timings: StageTimings,
}

pub const REPORT_SCHEMA: &str = "1";

/// Plans and merges in one call. Deterministic in `(x, cfg)`.
pub fn compress(x: &TokenMatrix, cfg: &ApetConfig) -> Result<(TokenMatrix, CompressionReport)> {
    let (plan, mut timings, lambda, escalations) = plan_compression_timed(x, cfg)?;
    let t = Instant::now();
    let out = apply_merge(x, &plan, cfg.merge)?;
    timings.merge = t.elapsed();

    let report = CompressionReport {
        schema: REPORT_SCHEMA,
        config: *cfg,
        n: x.n(),
        d: x.d(),
        k: plan.k(),
        m: plan.basis.m(),
        lambda,
        residuals: ResidualSummary::of(&plan.residuals),
        flags: ReportFlags {
            degenerate_geometry: plan.basis.degenerate,
            jitter_escalated: escalations > 0,
        },
        basis: plan.basis.indices,
        retained: plan.retained,
        groups: plan.groups,
        timings,
    };
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::SamplerKind;

    fn explicit(indices: Vec<usize>) -> BasisSelection {
        BasisSelection {
            indices,
            strategy: SamplerKind::Fps,
            seed: 0,
            degenerate: false,
        }
    }

    #[test]
    fn keep_resolution() {
        assert_eq!(Keep::Ratio(0.5).resolve(5).unwrap(), 3);
        assert_eq!(Keep::Ratio(0.01).resolve(5).unwrap(), 1);
        assert_eq!(Keep::Ratio(64.0 / 576.0).resolve(576).unwrap(), 64);
        assert!(Keep::Ratio(0.0).resolve(5).is_err());
        assert!(Keep::Ratio(1.5).resolve(5).is_err());
        assert!(Keep::Count(0).resolve(5).is_err());
        assert!(Keep::Count(6).resolve(5).is_err());
    }

    #[test]
    fn basis_larger_than_keep_is_an_error() {
        let x = TokenMatrix::new(6, 2, (0..12).map(|i| i as f64).collect()).unwrap();
        let mut cfg = ApetConfig::new(Keep::Count(3));
        cfg.basis_m = 4;
        assert!(matches!(plan_compression(&x, &cfg), Err(ApetError::InvalidBudget(_))));
    }

    #[test]
    fn hand_example_groups_under_larger_residual() {
        let eps = 1e-3;
        let x = TokenMatrix::from_rows(&[
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 1.0],
            [2.0, 2.0, 2.0 * (1.0 + eps)],
        ])
        .unwrap();
        let plan = plan_with_basis(&x, &explicit(vec![0, 1]), 3, 0.0).unwrap();
        assert!((plan.residuals[2] - 1.0).abs() < 1e-12);
        assert!((plan.residuals[3] - 2.0 * (1.0 + eps)).abs() < 1e-12);
        assert_eq!(plan.retained, vec![0, 1, 3]);
        assert_eq!(plan.groups, vec![vec![], vec![], vec![2]]);
    }

    #[test]
    fn keep_all_is_identity() {
        let x = TokenMatrix::new(7, 3, (0..21).map(|i| (i as f64).sin()).collect()).unwrap();
        let mut cfg = ApetConfig::new(Keep::Count(7));
        cfg.basis_m = 2;
        let (out, report) = compress(&x, &cfg).unwrap();
        assert_eq!(out, x);
        assert!(report.groups.iter().all(|g| g.is_empty()));
        assert_eq!(report.retained, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn merge_examples() {
        let x = TokenMatrix::from_rows(&[[2.0, 0.0], [0.0, 2.0]]).unwrap();
        let plan = CompressionPlan {
            retained: vec![0],
            basis: explicit(vec![0]),
            groups: vec![vec![1]],
            residuals: vec![0.0, 2.0],
        };
        assert_eq!(apply_merge(&x, &plan, MergeMode::Mean).unwrap().row(0), &[1.0, 1.0]);
        assert_eq!(apply_merge(&x, &plan, MergeMode::Drop).unwrap().row(0), &[2.0, 0.0]);
    }

    #[test]
    fn merge_rejects_foreign_plan() {
        let x = TokenMatrix::from_rows(&[[2.0, 0.0], [0.0, 2.0], [1.0, 1.0]]).unwrap();
        let plan = CompressionPlan {
            retained: vec![0],
            basis: explicit(vec![0]),
            groups: vec![vec![1]],
            residuals: vec![0.0, 2.0],
        };
        assert!(matches!(
            apply_merge(&x, &plan, MergeMode::Mean),
            Err(ApetError::PlanMismatch(_))
        ));
    }

    #[test]
    fn zero_token_attracts_no_merges() {
        // retained zero row at index 0 must lose to any positive similarity
        let x = TokenMatrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.9, 0.1]]).unwrap();
        let plan = CompressionPlan {
            retained: vec![0, 1],
            basis: explicit(vec![1]),
            groups: vec![vec![], vec![]],
            residuals: vec![0.0; 3],
        };
        let groups = assign_to_retained(&x, &plan.retained, &[2]);
        assert_eq!(groups, vec![vec![], vec![2]]);
    }
}
