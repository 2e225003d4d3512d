//! Approximation-error guided token compression.
//!
//! A token set is compressed in one pass:
//!
//! 1. pick `M` basis tokens ([`sampling`]),
//! 2. reconstruct every token as a least-squares combination of the basis and
//!    score it by the L2 norm of its residual ([`approximation`]),
//! 3. keep the basis plus the `K - M` highest-residual tokens and average each
//!    dropped token into the retained token it is most cosine-similar to
//!    ([`compression`]).
//!
//! Tokens that the basis explains well carry little information beyond it and
//! are the first to go. [`eval`] holds synthetic generators, baselines and
//! metrics for measuring how much of the original set survives.

pub mod approximation;
pub mod compression;
pub mod error;
pub mod eval;
pub mod io;
pub mod matrix;
pub mod sampling;

pub use approximation::{fit_basis, fit_basis_with, rank_by_error, ApproximationResult};
pub use compression::{
    apply_merge, compress, plan_compression, plan_with_basis, ApetConfig, CompressionPlan,
    CompressionReport, Keep, MergeMode,
};
pub use error::{ApetError, ErrorKind, Result};
pub use matrix::{cosine_to_rows, lstsq_fit, pairwise_sq_dist, Coefficients, DistanceMatrix, TokenMatrix};
pub use sampling::{sample_dpc, sample_fps, sample_random, BasisSelection, Sampler, SamplerKind};
