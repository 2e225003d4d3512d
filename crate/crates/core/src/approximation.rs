//! Per-token approximation error: reconstruct every token as a linear
//! combination of the basis tokens and score it by the L2 norm of what is
//! left over.

use rayon::prelude::*;

use crate::error::Result;
use crate::matrix::{norm, Coefficients, GramSolver, TokenMatrix};
use crate::sampling::BasisSelection;

#[derive(Debug, Clone)]
pub struct ApproximationResult {
    pub coefficients: Coefficients,
    /// `residuals[i] = |v_i - v'_i|_2`, unnormalized.
    pub residuals: Vec<f64>,
    pub basis: BasisSelection,
    pub ridge_rel: f64,
    /// Absolute ridge after jitter escalation.
    pub lambda: f64,
    /// Jitter escalations the Gram solve needed.
    pub escalations: usize,
    /// Reconstructed tokens, only kept when requested.
    pub reconstruction: Option<TokenMatrix>,
}

/// Fits all tokens (basis tokens included) on the basis rows and records the
/// residual norm of each.
pub fn fit_basis(x: &TokenMatrix, basis: &BasisSelection, ridge_rel: f64) -> Result<ApproximationResult> {
    fit_basis_with(x, basis, ridge_rel, false)
}

pub fn fit_basis_with(
    x: &TokenMatrix,
    basis: &BasisSelection,
    ridge_rel: f64,
    keep_reconstruction: bool,
) -> Result<ApproximationResult> {
    basis.validate_for(x.n())?;
    let basis_rows = x.select_rows(&basis.indices)?;
    let solver = GramSolver::new(&basis_rows, ridge_rel)?;
    let (n, d, m) = (x.n(), x.d(), basis.m());

    let mut coef = vec![0.0; n * m];
    let mut residuals = vec![0.0; n];
    let mut recon = if keep_reconstruction {
        vec![0.0; n * d]
    } else {
        Vec::new()
    };

    let fit_one = |i: usize, c: &mut [f64], r: &mut f64, scratch: &mut [f64]| {
        let v = x.row(i);
        solver.solve_into(v, c);
        solver.residual_into(v, c, scratch);
        *r = norm(scratch);
    };

    if keep_reconstruction {
        coef.par_chunks_mut(m)
            .zip(residuals.par_iter_mut())
            .zip(recon.par_chunks_mut(d))
            .enumerate()
            .for_each(|(i, ((c, r), rec))| {
                fit_one(i, c, r, rec);
                for (o, v) in rec.iter_mut().zip(x.row(i)) {
                    *o = v - *o;
                }
            });
    } else {
        coef.par_chunks_mut(m)
            .zip(residuals.par_iter_mut())
            .enumerate()
            .for_each_init(
                || vec![0.0; d],
                |scratch, (i, (c, r))| fit_one(i, c, r, scratch),
            );
    }

    let reconstruction = if keep_reconstruction {
        Some(TokenMatrix::new(n, d, recon)?)
    } else {
        None
    };
    Ok(ApproximationResult {
        coefficients: crate::matrix::coefficients_from_parts(n, m, coef),
        residuals,
        basis: basis.clone(),
        ridge_rel,
        lambda: solver.lambda(),
        escalations: solver.escalations(),
        reconstruction,
    })
}

/// Token indices by descending residual; equal residuals keep index order.
pub fn rank_by_error(result: &ApproximationResult) -> Vec<usize> {
    rank_desc(&result.residuals)
}

pub(crate) fn rank_desc(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}
