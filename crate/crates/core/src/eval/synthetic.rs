use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{ApetError, Result};
use crate::matrix::{dot, TokenMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    /// `L R^T + sigma * noise`; rows have unit expected variance per entry.
    LowRank,
    /// A low-rank base with `outliers` rows replaced by `outlier_scale` times
    /// unit vectors orthogonal to the base's signal subspace.
    Outliers,
    /// `rank` Gaussian centers, each row a center plus `sigma` noise.
    Clusters,
}

impl FromStr for SyntheticKind {
    type Err = ApetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowrank" => Ok(SyntheticKind::LowRank),
            "outliers" => Ok(SyntheticKind::Outliers),
            "clusters" => Ok(SyntheticKind::Clusters),
            other => Err(ApetError::InvalidArgument(format!("unknown synthetic kind {other:?}"))),
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SyntheticKind::LowRank => "lowrank",
            SyntheticKind::Outliers => "outliers",
            SyntheticKind::Clusters => "clusters",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    pub d: usize,
    pub rank: usize,
    pub outliers: usize,
    pub sigma: f64,
    pub outlier_scale: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// The planted-outlier setup used by the retention experiments.
    pub fn planted_outliers(seed: u64) -> Self {
        Self {
            kind: SyntheticKind::Outliers,
            n: 576,
            d: 64,
            rank: 5,
            outliers: 20,
            sigma: 0.05,
            outlier_scale: 10.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ApetError::InvalidArgument(m));
        if self.n < 1 || self.d < 1 {
            return bad(format!("shape {}x{} must be at least 1x1", self.n, self.d));
        }
        if self.rank < 1 || self.rank > self.n.min(self.d) {
            return bad(format!("rank {} must be in 1..={}", self.rank, self.n.min(self.d)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be finite and nonnegative, got {}", self.sigma));
        }
        if self.kind == SyntheticKind::Outliers {
            if self.outliers >= self.n {
                return bad(format!("outlier count {} must be below n = {}", self.outliers, self.n));
            }
            if self.outliers > 0 && self.rank >= self.d {
                return bad("outliers need rank < d to leave an orthogonal complement".into());
            }
            if !(self.outlier_scale > 0.0 && self.outlier_scale.is_finite()) {
                return bad(format!("outlier scale must be positive, got {}", self.outlier_scale));
            }
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Orthonormal basis (as rows) for the span of the given rows, via modified
/// Gram-Schmidt with reorthogonalization.
fn orthonormal_rows(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        let mut v = r.clone();
        project_out(&mut v, &out);
        let nv = dot(&v, &v).sqrt();
        if nv > 1e-12 {
            v.iter_mut().for_each(|x| *x /= nv);
            out.push(v);
        }
    }
    out
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            v.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
        }
    }
}

/// Generates a token matrix and, for the outlier kind, the sorted indices of
/// the planted rows.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<(TokenMatrix, Option<Vec<usize>>)> {
    spec.validate()?;
    let SyntheticSpec { n, d, rank, .. } = *spec;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    match spec.kind {
        SyntheticKind::LowRank | SyntheticKind::Outliers => {
            let left = gaussian(&mut rng, n * rank, 1.0);
            // columns of R stored as rows: factors[k] is the k-th signal direction
            let factors: Vec<Vec<f64>> = (0..rank)
                .map(|_| gaussian(&mut rng, d, 1.0 / (rank as f64).sqrt()))
                .collect();
            let noise = gaussian(&mut rng, n * d, spec.sigma);
            let mut data = noise;
            for i in 0..n {
                let row = &mut data[i * d..(i + 1) * d];
                for (k, f) in factors.iter().enumerate() {
                    let l = left[i * rank + k];
                    row.iter_mut().zip(f).for_each(|(x, fk)| *x += l * fk);
                }
            }
            if spec.kind == SyntheticKind::LowRank {
                return Ok((TokenMatrix::new(n, d, data)?, None));
            }

            let mut truth = rand::seq::index::sample(&mut rng, n, spec.outliers).into_vec();
            truth.sort_unstable();
            let subspace = orthonormal_rows(&factors);
            for &i in &truth {
                let mut v = gaussian(&mut rng, d, 1.0);
                project_out(&mut v, &subspace);
                let nv = dot(&v, &v).sqrt();
                let row = &mut data[i * d..(i + 1) * d];
                row.iter_mut()
                    .zip(&v)
                    .for_each(|(x, vi)| *x = spec.outlier_scale * vi / nv);
            }
            Ok((TokenMatrix::new(n, d, data)?, Some(truth)))
        }
        SyntheticKind::Clusters => {
            let centers: Vec<Vec<f64>> = (0..rank).map(|_| gaussian(&mut rng, d, 1.0)).collect();
            let mut data = Vec::with_capacity(n * d);
            for _ in 0..n {
                let c = &centers[rng.random_range(0..rank)];
                for &ck in c {
                    data.push(ck + spec.sigma * rng.sample::<f64, _>(StandardNormal));
                }
            }
            Ok((TokenMatrix::new(n, d, data)?, None))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: SyntheticKind) -> SyntheticSpec {
        SyntheticSpec {
            kind,
            n: 40,
            d: 12,
            rank: 3,
            outliers: 4,
            sigma: 0.1,
            outlier_scale: 5.0,
            seed: 11,
        }
    }

    #[test]
    fn deterministic() {
        for kind in [SyntheticKind::LowRank, SyntheticKind::Outliers, SyntheticKind::Clusters] {
            assert_eq!(gen_synthetic(&spec(kind)).unwrap(), gen_synthetic(&spec(kind)).unwrap());
        }
        let mut other = spec(SyntheticKind::LowRank);
        other.seed = 12;
        assert_ne!(gen_synthetic(&other).unwrap().0, gen_synthetic(&spec(SyntheticKind::LowRank)).unwrap().0);
    }

    #[test]
    fn outliers_are_orthogonal_and_scaled() {
        let mut s = spec(SyntheticKind::Outliers);
        s.sigma = 0.0;
        let (x, truth) = gen_synthetic(&s).unwrap();
        let truth = truth.unwrap();
        assert_eq!(truth.len(), 4);
        let base: Vec<usize> = (0..40).filter(|i| !truth.contains(i)).collect();
        for &t in &truth {
            let v = x.row(t);
            assert!((dot(v, v).sqrt() - 5.0).abs() < 1e-12);
            for &b in &base {
                let w = x.row(b);
                assert!(dot(v, w).abs() < 1e-9 * dot(w, w).sqrt() * 5.0);
            }
        }
    }

    #[test]
    fn zero_outliers_gives_empty_truth() {
        let mut s = spec(SyntheticKind::Outliers);
        s.outliers = 0;
        assert_eq!(gen_synthetic(&s).unwrap().1, Some(vec![]));
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(SyntheticKind::LowRank);
        s.rank = 13;
        assert!(gen_synthetic(&s).is_err());
        let mut s = spec(SyntheticKind::Outliers);
        s.outliers = 40;
        assert!(gen_synthetic(&s).is_err());
        let mut s = spec(SyntheticKind::Clusters);
        s.sigma = -1.0;
        assert!(gen_synthetic(&s).is_err());
        assert!("nope".parse::<SyntheticKind>().is_err());
    }
}
