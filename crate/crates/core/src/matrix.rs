//! Dense row-major matrix primitives: token storage, pairwise distances,
//! cosine similarity and a ridge-stabilized least-squares solver for small
//! bases.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ApetError, Result};

/// Norms below this are treated as zero by [`cosine_to_rows`].
pub const EPS_NORM: f64 = 1e-12;

/// Maximum number of jitter escalations attempted by [`lstsq_fit`].
pub const MAX_JITTER_ESCALATIONS: usize = 5;

/// A set of `n` tokens of dimension `d`, stored row-major in 64-bit floats.
///
/// Row `i` is the token at sequence position `i`. Rows are never reordered by
/// any operation in this crate.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl TokenMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(ApetError::InvalidShape(format!(
                "token matrix must be at least 1x1, got {n}x{d}"
            )));
        }
        if data.len() != n * d {
            return Err(ApetError::InvalidShape(format!(
                "{n}x{d} matrix needs {} values, got {}",
                n * d,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(ApetError::NonFiniteValue {
                row: pos / d,
                col: pos % d,
            });
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(n * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(ApetError::InvalidShape(format!(
                    "row {i} has {} columns, expected {d}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(n, d, data)
    }

    /// Widens 32-bit input; all arithmetic downstream runs in 64-bit.
    pub fn from_f32(n: usize, d: usize, data: &[f32]) -> Result<Self> {
        Self::new(n, d, data.iter().map(|&v| v as f64).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    /// Gathers the given rows, in the given order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Result<TokenMatrix> {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(ApetError::InvalidArgument(format!(
                    "row index {i} out of range for {} tokens",
                    self.n
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        TokenMatrix::new(indices.len(), self.d, data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    /// Column-wise mean of all rows.
    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.d];
        for row in self.rows() {
            for (acc, v) in c.iter_mut().zip(row) {
                *acc += v;
            }
        }
        let inv = 1.0 / self.n as f64;
        c.iter_mut().for_each(|v| *v *= inv);
        c
    }

    /// Multiplies every entry by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Result<TokenMatrix> {
        TokenMatrix::new(self.n, self.d, self.data.iter().map(|v| v * alpha).collect())
    }
}

/// Inner product with a fixed eight-lane accumulation order, so results are
/// reproducible regardless of how callers partition work.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            let t = x[k] - y[k];
            acc[k] += t * t;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        let t = x - y;
        tail += t * t;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Symmetric `n x n` matrix of squared Euclidean distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Off-diagonal entries with `i < j`, in row-major order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * (self.n.saturating_sub(1)) / 2);
        for i in 0..self.n {
            out.extend_from_slice(&self.row(i)[i + 1..]);
        }
        out
    }
}

/// Squared distances between all pairs of rows. The upper triangle is
/// computed and mirrored, so the result is exactly symmetric.
pub fn pairwise_sq_dist(x: &TokenMatrix) -> DistanceMatrix {
    let n = x.n();
    let mut entries = vec![0.0; n * n];
    entries.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let vi = x.row(i);
        for (j, e) in row.iter_mut().enumerate().skip(i + 1) {
            *e = sq_dist(vi, x.row(j));
        }
    });
    for i in 0..n {
        for j in 0..i {
            entries[i * n + j] = entries[j * n + i];
        }
    }
    DistanceMatrix { n, entries }
}

/// Cosine similarity between `q` and every row of `x`. Elements where either
/// norm is below [`EPS_NORM`] are 0.
pub fn cosine_to_rows(x: &TokenMatrix, q: &[f64]) -> Result<Vec<f64>> {
    if q.len() != x.d() {
        return Err(ApetError::DimensionMismatch {
            expected: x.d(),
            got: q.len(),
        });
    }
    let qn = norm(q);
    Ok(x.rows().map(|v| cosine_with_norms(v, norm(v), q, qn)).collect())
}

pub(crate) fn cosine_with_norms(a: &[f64], an: f64, b: &[f64], bn: f64) -> f64 {
    if an < EPS_NORM || bn < EPS_NORM {
        0.0
    } else {
        dot(a, b) / (an * bn)
    }
}

/// Least-squares coefficients, one row per target token and one column per
/// basis token (the transpose of the usual `V ~ B A` column layout).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficients {
    n: usize,
    m: usize,
    entries: Vec<f64>,
}

impl Coefficients {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.m..(i + 1) * self.m]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }
}

pub(crate) fn coefficients_from_parts(n: usize, m: usize, entries: Vec<f64>) -> Coefficients {
    debug_assert_eq!(entries.len(), n * m);
    Coefficients { n, m, entries }
}

/// Cholesky factor of the regularized basis Gram matrix `B B^T + lambda I`.
///
/// Factor once, then solve each target independently; every solve depends
/// only on its own target, so parallel and sequential runs agree bit for bit.
#[derive(Debug, Clone)]
pub struct GramSolver<'a> {
    basis: &'a TokenMatrix,
    lower: Vec<f64>,
    lambda: f64,
    escalations: usize,
}

impl<'a> GramSolver<'a> {
    pub fn new(basis: &'a TokenMatrix, ridge_rel: f64) -> Result<Self> {
        if !(ridge_rel >= 0.0 && ridge_rel.is_finite()) {
            return Err(ApetError::InvalidArgument(format!(
                "ridge must be a finite nonnegative number, got {ridge_rel}"
            )));
        }
        let m = basis.n();
        let mut gram = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let g = dot(basis.row(i), basis.row(j));
                gram[i * m + j] = g;
                gram[j * m + i] = g;
            }
        }
        let mean_diag = (0..m).map(|i| gram[i * m + i]).sum::<f64>() / m as f64;
        let jitter_floor = 1e-10 * mean_diag;

        let mut lambda = ridge_rel * mean_diag;
        let mut escalations = 0;
        loop {
            if let Some(lower) = cholesky(&gram, m, lambda) {
                return Ok(Self {
                    basis,
                    lower,
                    lambda,
                    escalations,
                });
            }
            if escalations == MAX_JITTER_ESCALATIONS {
                return Err(ApetError::SingularGram { escalations });
            }
            lambda = lambda.max(jitter_floor) * 10.0;
            escalations += 1;
        }
    }

    /// Absolute ridge actually applied, after any jitter escalation.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn escalations(&self) -> usize {
        self.escalations
    }

    pub fn m(&self) -> usize {
        self.basis.n()
    }

    /// Solves for the coefficients of one target vector into `coef`.
    pub fn solve_into(&self, target: &[f64], coef: &mut [f64]) {
        let m = self.m();
        for (j, c) in coef.iter_mut().enumerate() {
            *c = dot(self.basis.row(j), target);
        }
        // L y = rhs
        for i in 0..m {
            let row = &self.lower[i * m..i * m + i];
            let s = coef[i] - row.iter().zip(&coef[..i]).map(|(l, c)| l * c).sum::<f64>();
            coef[i] = s / self.lower[i * m + i];
        }
        // L^T c = y
        for i in (0..m).rev() {
            let s = coef[i]
                - (i + 1..m)
                    .zip(&coef[i + 1..])
                    .map(|(k, c)| self.lower[k * m + i] * c)
                    .sum::<f64>();
            coef[i] = s / self.lower[i * m + i];
        }
    }

    /// Writes `target - coef * basis` into `out`.
    pub fn residual_into(&self, target: &[f64], coef: &[f64], out: &mut [f64]) {
        out.copy_from_slice(target);
        for (j, &c) in coef.iter().enumerate() {
            for (o, b) in out.iter_mut().zip(self.basis.row(j)) {
                *o -= c * b;
            }
        }
    }
}

/// Cholesky of `gram + lambda I`. Returns `None` when a pivot falls below a
/// relative tolerance, which treats numerically rank-deficient systems as
/// singular rather than producing exploding coefficients.
fn cholesky(gram: &[f64], m: usize, lambda: f64) -> Option<Vec<f64>> {
    let max_diag = (0..m)
        .map(|i| gram[i * m + i] + lambda)
        .fold(0.0f64, f64::max);
    let tol = (m as f64) * f64::EPSILON * max_diag;
    if max_diag <= 0.0 || !max_diag.is_finite() {
        return None;
    }
    let mut l = vec![0.0; m * m];
    for j in 0..m {
        let mut diag = gram[j * m + j] + lambda;
        for k in 0..j {
            diag -= l[j * m + k] * l[j * m + k];
        }
        if diag.is_nan() || diag <= tol {
            return None;
        }
        let ljj = diag.sqrt();
        l[j * m + j] = ljj;
        for i in j + 1..m {
            let mut s = gram[i * m + j];
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            l[i * m + j] = s / ljj;
        }
    }
    Some(l)
}

/// Minimizes `|targets - C basis|_F^2 + lambda |C|_F^2` where
/// `lambda = ridge_rel * trace(B B^T) / m`.
pub fn lstsq_fit(basis: &TokenMatrix, targets: &TokenMatrix, ridge_rel: f64) -> Result<Coefficients> {
    if basis.d() != targets.d() {
        return Err(ApetError::DimensionMismatch {
            expected: basis.d(),
            got: targets.d(),
        });
    }
    let solver = GramSolver::new(basis, ridge_rel)?;
    let m = basis.n();
    let mut entries = vec![0.0; targets.n() * m];
    entries
        .par_chunks_mut(m)
        .zip(targets.data.par_chunks(targets.d()))
        .for_each(|(coef, t)| solver.solve_into(t, coef));
    Ok(Coefficients {
        n: targets.n(),
        m,
        entries,
    })
}
