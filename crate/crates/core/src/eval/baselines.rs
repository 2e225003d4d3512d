use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::approximation::rank_desc;
use crate::error::{ApetError, Result};
use crate::matrix::{norm, TokenMatrix};
use crate::sampling::random_indices;

/// Score-free selectors to compare against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Random,
    Norm,
    Stride,
}

impl FromStr for BaselineKind {
    type Err = ApetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(BaselineKind::Random),
            "norm" => Ok(BaselineKind::Norm),
            "stride" => Ok(BaselineKind::Stride),
            other => Err(ApetError::InvalidArgument(format!("unknown baseline {other:?}"))),
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::Random => "random",
            BaselineKind::Norm => "norm",
            BaselineKind::Stride => "stride",
        })
    }
}

/// Picks `k` tokens, returned sorted ascending.
pub fn baseline_select(x: &TokenMatrix, k: usize, kind: BaselineKind, seed: u64) -> Result<Vec<usize>> {
    let n = x.n();
    if k < 1 || k > n {
        return Err(ApetError::InvalidBudget(format!("keep count {k} must be in 1..={n}")));
    }
    let mut out = match kind {
        BaselineKind::Random => random_indices(n, k, seed),
        BaselineKind::Norm => {
            let norms: Vec<f64> = x.rows().map(norm).collect();
            let mut top = rank_desc(&norms);
            top.truncate(k);
            top
        }
        BaselineKind::Stride => {
            let mut idx: Vec<usize> = (0..k)
                .map(|i| ((i * n) as f64 / k as f64).round() as usize)
                .collect();
            idx.dedup();
            let mut fill = 0;
            while idx.len() < k {
                if !idx.contains(&fill) {
                    idx.push(fill);
                }
                fill += 1;
            }
            idx
        }
    };
    out.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_picks_largest() {
        let x = TokenMatrix::from_rows(&[[3.0, 0.0], [0.0, 1.0], [0.0, 2.0]]).unwrap();
        assert_eq!(baseline_select(&x, 2, BaselineKind::Norm, 0).unwrap(), vec![0, 2]);
    }

    #[test]
    fn norm_ties_prefer_smaller_index() {
        let x = TokenMatrix::from_rows(&[[1.0], [2.0], [2.0], [2.0]]).unwrap();
        assert_eq!(baseline_select(&x, 2, BaselineKind::Norm, 0).unwrap(), vec![1, 2]);
    }

    #[test]
    fn stride() {
        let x = TokenMatrix::new(10, 1, vec![0.0; 10]).unwrap();
        assert_eq!(
            baseline_select(&x, 10, BaselineKind::Stride, 0).unwrap(),
            (0..10).collect::<Vec<_>>()
        );
        assert_eq!(baseline_select(&x, 4, BaselineKind::Stride, 0).unwrap(), vec![0, 3, 5, 8]);
        assert_eq!(baseline_select(&x, 1, BaselineKind::Stride, 0).unwrap(), vec![0]);
    }

    #[test]
    fn random_is_seeded() {
        let x = TokenMatrix::new(50, 1, vec![0.0; 50]).unwrap();
        let a = baseline_select(&x, 7, BaselineKind::Random, 3).unwrap();
        assert_eq!(a, baseline_select(&x, 7, BaselineKind::Random, 3).unwrap());
        assert_eq!(a.len(), 7);
    }

    #[test]
    fn budget_checked() {
        let x = TokenMatrix::new(3, 1, vec![0.0; 3]).unwrap();
        assert!(baseline_select(&x, 0, BaselineKind::Norm, 0).is_err());
        assert!(baseline_select(&x, 4, BaselineKind::Stride, 0).is_err());
    }
}
