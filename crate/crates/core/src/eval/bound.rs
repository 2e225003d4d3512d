use std::f64::consts::{E, PI};

use crate::error::{ApetError, Result};

/// Conditional entropy `H(V|S)` in nats, paired with the feature dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyBoundInput {
    h_cond: f64,
    d: usize,
}

impl EntropyBoundInput {
    pub fn new(h_cond: f64, d: usize) -> Result<Self> {
        if d < 1 {
            return Err(ApetError::InvalidArgument("dimension must be at least 1".into()));
        }
        if !h_cond.is_finite() {
            return Err(ApetError::InvalidArgument(format!(
                "conditional entropy must be finite, got {h_cond}"
            )));
        }
        Ok(Self { h_cond, d })
    }

    pub fn h_cond(&self) -> f64 {
        self.h_cond
    }

    pub fn d(&self) -> usize {
        self.d
    }
}

/// Lower bound on the per-dimension reconstruction MSE achievable given a
/// conditional entropy: `exp(2 h / d) / (2 pi e)`.
///
/// Maximizing the information a retained set carries about the full set is
/// the same as minimizing `H(V|S)`, and this bound ties that entropy to the
/// reconstruction error, which is what the compression ranks by.
pub fn mse_entropy_bound(inp: &EntropyBoundInput) -> f64 {
    (2.0 * inp.h_cond / inp.d as f64).exp() / (2.0 * PI * E)
}

/// Differential entropy of `N(0, sigma^2 I_d)` in nats. The Gaussian attains
/// the bound with equality.
pub fn gaussian_conditional_entropy(sigma: f64, d: usize) -> f64 {
    0.5 * d as f64 * (2.0 * PI * E * sigma * sigma).ln()
}
