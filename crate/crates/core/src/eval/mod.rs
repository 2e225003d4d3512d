//! Synthetic benchmarks, baseline selectors, retention metrics and the
//! entropy lower bound on reconstruction error.

mod ablation;
mod baselines;
mod bound;
mod metrics;
mod synthetic;

pub use ablation::{
    evaluate, run_ablation, AblationCell, AblationGrid, AblationInput, AblationTable, EvalResult,
    MethodResult, SeedOutcome,
};
pub use baselines::{baseline_select, BaselineKind};
pub use bound::{gaussian_conditional_entropy, mse_entropy_bound, EntropyBoundInput};
pub use metrics::{outlier_recall, reconstruction_quality};
pub use synthetic::{gen_synthetic, SyntheticKind, SyntheticSpec};
