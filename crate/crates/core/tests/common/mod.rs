//! Independent reference implementations used to check the library.
//!
//! Nothing here calls into the solver, sampler or planner under test; the
//! least-squares oracle projects onto an orthonormalized basis instead of
//! solving normal equations.

#![allow(dead_code, clippy::needless_range_loop)]

use apet::TokenMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> TokenMatrix {
    TokenMatrix::from_rows(&gaussian_rows(rng, n, d)).unwrap()
}

pub fn rows_of(x: &TokenMatrix) -> Vec<Vec<f64>> {
    x.rows().map(|r| r.to_vec()).collect()
}

pub fn naive_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn naive_norm(a: &[f64]) -> f64 {
    naive_dot(a, a).sqrt()
}

pub fn naive_sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s
}

/// Orthonormal rows spanning `rows` (modified Gram-Schmidt, applied twice).
/// Directions with norm below `tol` are dropped.
pub fn orthonormalize(rows: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        let mut v = r.clone();
        for _ in 0..2 {
            for u in &q {
                let c = naive_dot(&v, u);
                for i in 0..v.len() {
                    v[i] -= c * u[i];
                }
            }
        }
        let nv = naive_norm(&v);
        if nv > tol {
            q.push(v.iter().map(|x| x / nv).collect());
        }
    }
    q
}

/// Residual of `v` after orthogonal projection onto span(q).
pub fn project_residual(v: &[f64], q: &[Vec<f64>]) -> Vec<f64> {
    let mut r = v.to_vec();
    for _ in 0..2 {
        for u in q {
            let c = naive_dot(&r, u);
            for i in 0..r.len() {
                r[i] -= c * u[i];
            }
        }
    }
    r
}

/// Exact least-squares residual norms of every row of `x` against the rows
/// listed in `basis`.
pub fn oracle_residuals(x: &[Vec<f64>], basis: &[usize]) -> Vec<f64> {
    let b: Vec<Vec<f64>> = basis.iter().map(|&i| x[i].clone()).collect();
    let q = orthonormalize(&b, 1e-12);
    x.iter().map(|v| naive_norm(&project_residual(v, &q))).collect()
}

/// Greedy max-min selection recomputed from scratch at every step.
/// Returns `(index, winning value)` per step.
pub fn brute_fps(x: &[Vec<f64>], m: usize) -> Vec<(usize, f64)> {
    let n = x.len();
    let d = x[0].len();
    let mut centroid = vec![0.0; d];
    for v in x {
        for k in 0..d {
            centroid[k] += v[k] / n as f64;
        }
    }
    let mut chosen: Vec<(usize, f64)> = Vec::new();
    // first: farthest from centroid, smallest index on ties
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in x.iter().enumerate() {
        let dd = naive_sq_dist(v, &centroid);
        if dd > best.1 {
            best = (i, dd);
        }
    }
    chosen.push(best);
    while chosen.len() < m {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for i in 0..n {
            if chosen.iter().any(|&(c, _)| c == i) {
                continue;
            }
            let md = chosen
                .iter()
                .map(|&(c, _)| naive_sq_dist(&x[i], &x[c]))
                .fold(f64::INFINITY, f64::min);
            if md > best.1 {
                best = (i, md);
            }
        }
        chosen.push(best);
    }
    chosen
}

/// Density-peak scores computed directly from the definitions.
pub fn brute_gamma(x: &[Vec<f64>], pct: f64) -> Vec<f64> {
    let n = x.len();
    let mut off = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            off.push(naive_sq_dist(&x[i], &x[j]));
        }
    }
    off.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = pct / 100.0 * (off.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    let dc = off[lo] + (off[hi] - off[lo]) * (pos - lo as f64);
    let rho: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (-naive_sq_dist(&x[i], &x[j]) / dc).exp())
                .sum()
        })
        .collect();
    (0..n)
        .map(|i| {
            let higher: Vec<usize> = (0..n)
                .filter(|&j| rho[j] > rho[i] || (rho[j] == rho[i] && j < i))
                .collect();
            let delta = if higher.is_empty() {
                (0..n).map(|j| naive_sq_dist(&x[i], &x[j]).sqrt()).fold(0.0, f64::max)
            } else {
                higher
                    .iter()
                    .map(|&j| naive_sq_dist(&x[i], &x[j]).sqrt())
                    .fold(f64::INFINITY, f64::min)
            };
            rho[i] * delta
        })
        .collect()
}

pub fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (naive_norm(a), naive_norm(b));
    if na < 1e-12 || nb < 1e-12 {
        0.0
    } else {
        naive_dot(a, b) / (na * nb)
    }
}

pub struct OraclePlan {
    pub basis: Vec<usize>,
    pub residuals: Vec<f64>,
    pub retained: Vec<usize>,
    pub groups: Vec<Vec<usize>>,
}

/// FPS basis, exact projection residuals, exhaustive top-K and exhaustive
/// argmax-cosine assignment.
pub fn oracle_plan(x: &[Vec<f64>], m: usize, k: usize) -> OraclePlan {
    let n = x.len();
    let basis: Vec<usize> = brute_fps(x, m).into_iter().map(|(i, _)| i).collect();
    let residuals = oracle_residuals(x, &basis);
    let mut retained = basis.clone();
    while retained.len() < k {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for i in 0..n {
            if !retained.contains(&i) && residuals[i] > best.1 {
                best = (i, residuals[i]);
            }
        }
        retained.push(best.0);
    }
    retained.sort();
    let mut groups = vec![Vec::new(); k];
    for i in 0..n {
        if retained.contains(&i) {
            continue;
        }
        let mut best = (0, f64::NEG_INFINITY);
        for (j, &r) in retained.iter().enumerate() {
            let s = naive_cosine(&x[i], &x[r]);
            if s > best.1 {
                best = (j, s);
            }
        }
        groups[best.0].push(i);
    }
    OraclePlan {
        basis,
        residuals,
        retained,
        groups,
    }
}

/// Haar-ish random orthogonal matrix, rows orthonormal.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> Vec<Vec<f64>> {
    loop {
        let q = orthonormalize(&gaussian_rows(rng, d, d), 1e-8);
        if q.len() == d {
            return q;
        }
    }
}

/// `x * Q` for row-major `x` and `Q` given as rows.
pub fn rotate(x: &TokenMatrix, q: &[Vec<f64>]) -> TokenMatrix {
    let d = x.d();
    let rows: Vec<Vec<f64>> = x
        .rows()
        .map(|v| (0..d).map(|j| (0..d).map(|k| v[k] * q[k][j]).sum()).collect())
        .collect();
    TokenMatrix::from_rows(&rows).unwrap()
}

/// Rank-`r` matrix `U W` with Gaussian factors.
pub fn low_rank(rng: &mut ChaCha8Rng, n: usize, d: usize, r: usize) -> TokenMatrix {
    let u = gaussian_rows(rng, n, r);
    let w = gaussian_rows(rng, r, d);
    let rows: Vec<Vec<f64>> = u
        .iter()
        .map(|ui| (0..d).map(|j| (0..r).map(|k| ui[k] * w[k][j]).sum()).collect())
        .collect();
    TokenMatrix::from_rows(&rows).unwrap()
}
