//! One-class support vector machine, soft-boundary formulation.
//!
//! Solves the dual `min 1/2 a^T Q a` subject to `0 <= a_i <= 1/(nu n)` and
//! `sum a = 1` with a maximal-violating-pair SMO loop over a precomputed
//! kernel matrix. The decision function is `f(x) = sum_i a_i k(x_i, x) - rho`;
//! a point is inside the boundary iff `f(x) >= 0`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel with resolved parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kernel {
    Rbf { gamma: f64 },
    Linear,
}

impl Kernel {
    /// Kernel value from the dot product and squared norms of both points.
    pub fn value(&self, dot: f64, norm_sq_a: f64, norm_sq_b: f64) -> f64 {
        match self {
            Kernel::Rbf { gamma } => {
                let dist_sq = (norm_sq_a + norm_sq_b - 2.0 * dot).max(0.0);
                (-gamma * dist_sq).exp()
            }
            Kernel::Linear => dot,
        }
    }
}

/// Solver output: dual coefficients and offset.
#[derive(Debug, Clone, PartialEq)]
pub struct OneClassSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
}

pub const KKT_TOLERANCE: f64 = 1e-6;
const MAX_ITER_PER_POINT: usize = 100_000;

/// Solves the one-class dual for a symmetric positive semidefinite kernel
/// matrix. Deterministic: ties resolve to the lowest index.
pub fn solve_one_class(kernel: &Array2<f64>, nu: f64, tol: f64) -> Result<OneClassSolution> {
    let n = kernel.nrows();
    if n == 0 || kernel.ncols() != n {
        return Err(Error::InvalidParam(format!(
            "kernel matrix must be square and nonempty, got {}x{}",
            n,
            kernel.ncols()
        )));
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::InvalidParam(format!("nu must be in (0, 1], got {nu}")));
    }

    let upper = 1.0 / (nu * n as f64);
    let mut alpha = vec![0.0f64; n];
    let full = ((nu * n as f64).floor() as usize).min(n);
    for a in alpha.iter_mut().take(full) {
        *a = upper;
    }
    if full < n {
        alpha[full] = (1.0 - full as f64 * upper).clamp(0.0, upper);
    }

    let mut gradient = vec![0.0f64; n];
    for i in 0..n {
        if alpha[i] > 0.0 {
            for j in 0..n {
                gradient[j] += alpha[i] * kernel[[i, j]];
            }
        }
    }

    let max_iter = MAX_ITER_PER_POINT.saturating_mul(n);
    let mut iterations = 0usize;
    let mut gap = f64::INFINITY;
    while iterations < max_iter {
        // maximal violating pair: i raises alpha (smallest gradient among
        // movable-up), j lowers it (largest gradient among movable-down)
        let mut i_best: Option<usize> = None;
        let mut j_best: Option<usize> = None;
        for t in 0..n {
            if alpha[t] < upper && i_best.is_none_or(|i| gradient[t] < gradient[i]) {
                i_best = Some(t);
            }
            if alpha[t] > 0.0 && j_best.is_none_or(|j| gradient[t] > gradient[j]) {
                j_best = Some(t);
            }
        }
        let (i, j) = match (i_best, j_best) {
            (Some(i), Some(j)) => (i, j),
            _ => break,
        };
        gap = gradient[j] - gradient[i];
        if gap <= tol {
            break;
        }
        let mut quad = kernel[[i, i]] + kernel[[j, j]] - 2.0 * kernel[[i, j]];
        if quad <= 0.0 {
            quad = 1e-12;
        }
        let step = (gap / quad).min(upper - alpha[i]).min(alpha[j]);
        alpha[i] += step;
        alpha[j] -= step;
        // snap to the box so bound membership tests stay exact
        if upper - alpha[i] < 1e-15 * upper {
            alpha[i] = upper;
        }
        if alpha[j] < 1e-15 * upper {
            alpha[j] = 0.0;
        }
        for t in 0..n {
            gradient[t] += step * (kernel[[i, t]] - kernel[[j, t]]);
        }
        iterations += 1;
    }
    if gap > tol && iterations >= max_iter {
        return Err(Error::SolverDiverged {
            iterations,
            violation: gap,
        });
    }

    // KKT: free points satisfy g = rho; bounded ones bracket it.
    let lo_tol = upper * 1e-12;
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut lower_bracket = f64::NEG_INFINITY; // from alpha = upper
    let mut upper_bracket = f64::INFINITY; // from alpha = 0
    for t in 0..n {
        if alpha[t] <= lo_tol {
            upper_bracket = upper_bracket.min(gradient[t]);
        } else if alpha[t] >= upper - lo_tol {
            lower_bracket = lower_bracket.max(gradient[t]);
        } else {
            free_sum += gradient[t];
            free_count += 1;
        }
    }
    let rho = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        match (
            lower_bracket.is_finite(),
            upper_bracket.is_finite(),
        ) {
            (true, true) => 0.5 * (lower_bracket + upper_bracket),
            (true, false) => lower_bracket,
            (false, true) => upper_bracket,
            (false, false) => 0.0,
        }
    };
    // Free support vectors sit on the boundary; their gradients equal rho
    // only up to the solver tolerance. Placing the offset one tolerance
    // below keeps boundary points inside instead of letting rounding noise
    // pick their side.
    let rho = rho - tol;

    Ok(OneClassSolution {
        alpha,
        rho,
        iterations,
    })
}
