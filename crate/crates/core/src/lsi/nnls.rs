//! Non-negative least squares by the Lawson–Hanson active-set method.
//!
//! Minimizes `‖A x − b‖₂` subject to `x ≥ 0`. The passive-set subproblems are
//! solved on the Gram matrix `AᵀA`, which is formed once; neighbourhood
//! problems have few columns and many rows, so this is much cheaper than
//! refactorizing `A` on every active-set change.

use nalgebra::{DMatrix, DVector};

/// KKT tolerance on the dual vector `Aᵀ(b − Ax)`.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Solves the problem for `A` given as a list of columns.
pub fn nnls(columns: &[&[f64]], b: &[f64]) -> NnlsSolution {
    nnls_with_tolerance(columns, b, DEFAULT_TOLERANCE)
}

pub fn nnls_with_tolerance(columns: &[&[f64]], b: &[f64], tol: f64) -> NnlsSolution {
    let n = columns.len();
    assert!(n >= 1, "nnls needs at least one column");
    assert!(
        columns.iter().all(|c| c.len() == b.len()),
        "column length must equal target length"
    );
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let gram = DMatrix::from_fn(n, n, |i, j| dot(columns[i], columns[j]));
    let atb = DVector::from_iterator(n, columns.iter().map(|c| dot(c, b)));
    let b_sq = dot(b, b);

    let (x, iterations) = active_set(&gram, &atb, tol);

    // ‖Ax − b‖² = xᵀGx − 2xᵀc + bᵀb loses precision near zero; recompute directly.
    let mut r = b.to_vec();
    for (xi, col) in x.iter().zip(columns) {
        if *xi != 0.0 {
            for (rk, ak) in r.iter_mut().zip(col.iter()) {
                *rk -= xi * ak;
            }
        }
    }
    let residual_norm = dot(&r, &r).sqrt();
    debug_assert!(residual_norm <= b_sq.sqrt() + 1e-9 * (1.0 + b_sq.sqrt()));
    NnlsSolution {
        x: x.iter().copied().collect(),
        residual_norm,
        iterations,
    }
}

/// Lawson–Hanson on the normal equations `G x = c` with `x ≥ 0`.
fn active_set(gram: &DMatrix<f64>, c: &DVector<f64>, tol: f64) -> (DVector<f64>, usize) {
    let n = c.len();
    let scale = c.amax().max(1.0);
    let tol = tol * scale;
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    // Variables whose entry immediately failed (numerically) until x moves again.
    let mut blocked = vec![false; n];
    let max_outer = 30 * n.max(1);
    let mut iterations = 0;

    while iterations < max_outer {
        let w = c - gram * &x;
        let candidate = (0..n)
            .filter(|&j| !passive[j] && !blocked[j])
            .max_by(|&a, &b| w[a].total_cmp(&w[b]).then(b.cmp(&a)));
        let Some(entering) = candidate.filter(|&j| w[j] > tol) else {
            break;
        };
        iterations += 1;
        passive[entering] = true;

        let mut first_solve = true;
        loop {
            let z = solve_passive(gram, c, &passive);
            let infeasible: Vec<usize> = (0..n).filter(|&i| passive[i] && z[i] <= 0.0).collect();
            if infeasible.is_empty() {
                x = z;
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
            if first_solve && infeasible.contains(&entering) {
                // Cannot happen in exact arithmetic; the column is numerically
                // dependent on the passive set. Skip it until x changes.
                passive[entering] = false;
                blocked[entering] = true;
                break;
            }
            first_solve = false;
            // Step from x towards z until the first passive variable reaches zero.
            let (binding, alpha) = infeasible
                .iter()
                .map(|&i| (i, x[i] / (x[i] - z[i])))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty");
            for i in 0..n {
                if passive[i] {
                    x[i] += alpha * (z[i] - x[i]);
                }
            }
            for i in 0..n {
                if passive[i] && (i == binding || x[i] <= 0.0) {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    (x, iterations)
}

/// Unconstrained least squares restricted to the passive set; zero elsewhere.
fn solve_passive(gram: &DMatrix<f64>, c: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    let p = idx.len();
    let sub = DMatrix::from_fn(p, p, |r, s| gram[(idx[r], idx[s])]);
    let rhs = DVector::from_iterator(p, idx.iter().map(|&i| c[i]));
    let sol = sub
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .filter(|v| v.iter().all(|x| x.is_finite()))
        .unwrap_or_else(|| {
            // Rank-deficient passive set: minimum-norm solution.
            let eps = 1e-12 * sub.amax().max(f64::MIN_POSITIVE);
            sub.svd(true, true)
                .solve(&rhs, eps)
                .unwrap_or_else(|_| DVector::zeros(p))
        });
    let mut z = DVector::zeros(passive.len());
    for (r, &i) in idx.iter().enumerate() {
        z[i] = sol[r];
    }
    z
}
