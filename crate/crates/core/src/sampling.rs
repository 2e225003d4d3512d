//! Basis token selection: farthest point sampling, density peaks and seeded
//! uniform sampling.
//!
//! The random strategy uses ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded through
//! `SeedableRng::seed_from_u64`, so a given `(n, m, seed)` produces the same
//! indices on every platform.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ApetError, Result};
use crate::matrix::{pairwise_sq_dist, sq_dist, TokenMatrix};

pub const DEFAULT_DC_PERCENTILE: f64 = 2.0;

/// Basis sampling strategy together with its parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Sampler {
    #[default]
    Fps,
    Dpc { dc_percentile: f64 },
    Random,
}

impl Sampler {
    pub fn kind(&self) -> SamplerKind {
        match self {
            Sampler::Fps => SamplerKind::Fps,
            Sampler::Dpc { .. } => SamplerKind::Dpc,
            Sampler::Random => SamplerKind::Random,
        }
    }

    pub fn dpc() -> Self {
        Sampler::Dpc {
            dc_percentile: DEFAULT_DC_PERCENTILE,
        }
    }

    pub fn sample(&self, x: &TokenMatrix, m: usize, seed: u64) -> Result<BasisSelection> {
        match *self {
            Sampler::Fps => sample_fps(x, m),
            Sampler::Dpc { dc_percentile } => sample_dpc(x, m, dc_percentile),
            Sampler::Random => sample_random(x, m, seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Fps,
    Dpc,
    Random,
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerKind::Fps => "fps",
            SamplerKind::Dpc => "dpc",
            SamplerKind::Random => "random",
        })
    }
}

/// The `m` basis tokens chosen from a token matrix, in selection order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisSelection {
    pub indices: Vec<usize>,
    pub strategy: SamplerKind,
    pub seed: u64,
    /// Set when the input had no usable geometry (all tokens identical) and
    /// the sampler fell back to the first `m` indices.
    pub degenerate: bool,
}

impl BasisSelection {
    pub fn m(&self) -> usize {
        self.indices.len()
    }

    /// Checks that indices are distinct, in range and nonempty.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        if self.indices.is_empty() {
            return Err(ApetError::InvalidBudget("basis must not be empty".into()));
        }
        let mut seen = vec![false; n];
        for &i in &self.indices {
            if i >= n {
                return Err(ApetError::InvalidArgument(format!(
                    "basis index {i} out of range for {n} tokens"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(ApetError::InvalidArgument(format!(
                    "basis index {i} repeated"
                )));
            }
        }
        Ok(())
    }
}

fn check_budget(n: usize, m: usize) -> Result<()> {
    if m < 1 || m > n {
        return Err(ApetError::InvalidBudget(format!(
            "basis size {m} must be in 1..={n}"
        )));
    }
    Ok(())
}

/// Farthest point sampling, returning each selected index together with the
/// squared distance that won its step (distance to the centroid for the first
/// pick, min distance to the selected set afterwards).
pub fn fps_steps(x: &TokenMatrix, m: usize) -> Result<Vec<(usize, f64)>> {
    let n = x.n();
    check_budget(n, m)?;

    let centroid = x.centroid();
    let to_centroid: Vec<f64> = x.rows().map(|r| sq_dist(r, &centroid)).collect();
    let mut selected = vec![false; n];
    let mut steps = Vec::with_capacity(m);

    let first = argmax_unselected(&to_centroid, &selected);
    selected[first] = true;
    steps.push((first, to_centroid[first]));

    let mut min_dist = vec![f64::INFINITY; n];
    let mut last = first;
    while steps.len() < m {
        let anchor = x.row(last);
        min_dist
            .par_iter_mut()
            .with_min_len(256)
            .enumerate()
            .for_each(|(i, md)| {
                let dd = sq_dist(x.row(i), anchor);
                if dd < *md {
                    *md = dd;
                }
            });
        let next = argmax_unselected(&min_dist, &selected);
        selected[next] = true;
        steps.push((next, min_dist[next]));
        last = next;
    }
    Ok(steps)
}

// Sequential scan; strict comparison keeps the smallest index on ties.
fn argmax_unselected(values: &[f64], selected: &[bool]) -> usize {
    let mut best = usize::MAX;
    let mut best_val = f64::NEG_INFINITY;
    for (i, (&v, &s)) in values.iter().zip(selected).enumerate() {
        if !s && (best == usize::MAX || v > best_val) {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Greedy max-min selection starting from the token farthest from the centroid.
pub fn sample_fps(x: &TokenMatrix, m: usize) -> Result<BasisSelection> {
    let indices = fps_steps(x, m)?.into_iter().map(|(i, _)| i).collect();
    Ok(BasisSelection {
        indices,
        strategy: SamplerKind::Fps,
        seed: 0,
        degenerate: false,
    })
}

/// Linear-interpolation percentile of `values` (which is sorted in place).
pub(crate) fn percentile(values: &mut [f64], pct: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = pct / 100.0 * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    values[lo] + (values[hi] - values[lo]) * frac
}

/// Per-token density-peak scores.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPeaks {
    pub cutoff: f64,
    pub rho: Vec<f64>,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// Computes Gaussian-kernel densities `rho`, separations `delta` and the
/// product `gamma`. Returns `None` when every pairwise distance is zero.
///
/// The cutoff is the `dc_percentile`-th percentile of the off-diagonal squared
/// distances; if that is zero the smallest positive squared distance is used.
/// `delta` is the Euclidean distance to the nearest token of higher density,
/// where density ties are ordered by index.
pub fn density_peaks(x: &TokenMatrix, dc_percentile: f64) -> Option<DensityPeaks> {
    let n = x.n();
    let dist = pairwise_sq_dist(x);
    let mut off = dist.upper_triangle();
    let max_sq = off.iter().copied().fold(0.0f64, f64::max);
    if max_sq <= 0.0 {
        return None;
    }
    let mut cutoff = percentile(&mut off, dc_percentile);
    if cutoff <= 0.0 {
        cutoff = off.iter().copied().find(|&v| v > 0.0).unwrap_or(max_sq);
    }

    let rho: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            dist.row(i)
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &dd)| (-dd / cutoff).exp())
                .sum()
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| rho[b].total_cmp(&rho[a]).then(a.cmp(&b)));

    let mut delta = vec![0.0; n];
    delta[order[0]] = dist.row(order[0]).iter().copied().fold(0.0f64, f64::max).sqrt();
    for (rank, &i) in order.iter().enumerate().skip(1) {
        let nearest = order[..rank]
            .iter()
            .map(|&j| dist.get(i, j))
            .fold(f64::INFINITY, f64::min);
        delta[i] = nearest.sqrt();
    }

    let gamma = rho.iter().zip(&delta).map(|(r, d)| r * d).collect();
    Some(DensityPeaks {
        cutoff,
        rho,
        delta,
        gamma,
    })
}

/// Density-peak cluster centers: the `m` tokens with the largest
/// `rho * delta`, in descending score order.
pub fn sample_dpc(x: &TokenMatrix, m: usize, dc_percentile: f64) -> Result<BasisSelection> {
    check_budget(x.n(), m)?;
    if !(dc_percentile > 0.0 && dc_percentile < 100.0) {
        return Err(ApetError::InvalidArgument(format!(
            "dc percentile must be in (0, 100), got {dc_percentile}"
        )));
    }
    let Some(peaks) = density_peaks(x, dc_percentile) else {
        return Ok(BasisSelection {
            indices: (0..m).collect(),
            strategy: SamplerKind::Dpc,
            seed: 0,
            degenerate: true,
        });
    };
    let mut order: Vec<usize> = (0..x.n()).collect();
    order.sort_by(|&a, &b| peaks.gamma[b].total_cmp(&peaks.gamma[a]).then(a.cmp(&b)));
    order.truncate(m);
    Ok(BasisSelection {
        indices: order,
        strategy: SamplerKind::Dpc,
        seed: 0,
        degenerate: false,
    })
}

/// `m` distinct indices drawn uniformly from ChaCha8 seeded with `seed`,
/// sorted ascending.
pub fn sample_random(x: &TokenMatrix, m: usize, seed: u64) -> Result<BasisSelection> {
    check_budget(x.n(), m)?;
    Ok(BasisSelection {
        indices: random_indices(x.n(), m, seed),
        strategy: SamplerKind::Random,
        seed,
        degenerate: false,
    })
}

pub(crate) fn random_indices(n: usize, m: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
    idx.sort_unstable();
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(v: &[f64]) -> TokenMatrix {
        TokenMatrix::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn fps_hand_trace() {
        let x = line(&[0.0, 1.0, 9.0, 10.0]);
        assert_eq!(sample_fps(&x, 2).unwrap().indices, vec![0, 3]);
        assert_eq!(sample_fps(&x, 1).unwrap().indices, vec![0]);
        let all = sample_fps(&x, 4).unwrap().indices;
        assert_eq!(all[0], 0);
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
    }

    #[test]
    fn fps_m1_picks_centroid_farthest() {
        // centroid 3; distances 9, 4, 36 -> index 2
        let x = line(&[0.0, 1.0, 9.0, 2.0, 3.0]);
        assert_eq!(sample_fps(&x, 1).unwrap().indices, vec![2]);
    }

    #[test]
    fn fps_handles_duplicates() {
        let x = line(&[1.0, 1.0, 1.0]);
        assert_eq!(sample_fps(&x, 3).unwrap().indices, vec![0, 1, 2]);
    }

    #[test]
    fn budgets_checked() {
        let x = line(&[0.0, 1.0]);
        for m in [0, 3] {
            assert!(matches!(sample_fps(&x, m), Err(ApetError::InvalidBudget(_))));
            assert!(matches!(sample_dpc(&x, m, 2.0), Err(ApetError::InvalidBudget(_))));
            assert!(matches!(sample_random(&x, m, 1), Err(ApetError::InvalidBudget(_))));
        }
        assert!(sample_dpc(&x, 1, 0.0).is_err());
        assert!(sample_dpc(&x, 1, 100.0).is_err());
    }

    #[test]
    fn percentile_interpolates() {
        let mut v = vec![4.0, 1.0, 3.0, 2.0];
        assert_eq!(percentile(&mut v, 50.0), 2.5);
        assert_eq!(percentile(&mut v, 100.0 / 3.0), 2.0);
    }

    #[test]
    fn dpc_degenerate_input() {
        let x = TokenMatrix::new(4, 2, vec![1.5; 8]).unwrap();
        let sel = sample_dpc(&x, 2, 2.0).unwrap();
        assert_eq!(sel.indices, vec![0, 1]);
        assert!(sel.degenerate);
    }

    #[test]
    fn random_examples() {
        let x = TokenMatrix::new(100, 1, (0..100).map(|i| i as f64).collect()).unwrap();
        let a = sample_random(&x, 10, 1).unwrap();
        let b = sample_random(&x, 10, 1).unwrap();
        let c = sample_random(&x, 10, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.indices, c.indices);
        assert!(a.indices.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(
            sample_random(&x, 100, 9).unwrap().indices,
            (0..100).collect::<Vec<_>>()
        );
    }

    #[test]
    fn validate_rejects_bad_basis() {
        let sel = BasisSelection {
            indices: vec![0, 0],
            strategy: SamplerKind::Fps,
            seed: 0,
            degenerate: false,
        };
        assert!(sel.validate_for(3).is_err());
        let sel = BasisSelection {
            indices: vec![3],
            ..sel
        };
        assert!(sel.validate_for(3).is_err());
    }
}
