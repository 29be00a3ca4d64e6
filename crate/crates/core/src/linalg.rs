//! Linear solvers for the implicit time steps.
//!
//! Reductions run serially in index order so that results are bit-reproducible
//! regardless of thread count.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Solve a tridiagonal system by forward elimination and back substitution.
/// `lower[j]` couples row `j+1` to column `j`, `upper[j]` couples row `j` to
/// column `j+1`. No pivoting; the systems solved here (`I + iK`, `I + τK`
/// with Hermitian `K`) have non-singular leading minors.
pub fn solve_tridiagonal(lower: &[C64], diag: &[C64], upper: &[C64], rhs: &[C64]) -> Result<Vec<C64>> {
    let n = diag.len();
    if rhs.len() != n || lower.len() + 1 != n || upper.len() + 1 != n {
        return Err(Error::Mismatch("tridiagonal band lengths".into()));
    }
    let mut c = vec![C64::new(0.0, 0.0); n];
    let mut d = vec![C64::new(0.0, 0.0); n];
    let mut pivot = diag[0];
    for j in 0..n {
        if j > 0 {
            pivot = diag[j] - lower[j - 1] * c[j - 1];
        }
        if pivot.norm() == 0.0 || !pivot.is_finite() {
            return Err(Error::SolverDivergence {
                iterations: j,
                residual: f64::INFINITY,
            });
        }
        let inv = pivot.inv();
        if j + 1 < n {
            c[j] = upper[j] * inv;
        }
        d[j] = if j == 0 {
            rhs[0] * inv
        } else {
            (rhs[j] - lower[j - 1] * d[j - 1]) * inv
        };
    }
    for j in (0..n - 1).rev() {
        let next = d[j + 1];
        d[j] -= c[j] * next;
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Conjugate gradients for a Hermitian positive-definite operator.
/// Stops when `‖b − Ax‖ ≤ tol·‖b‖`.
pub fn conjugate_gradient(
    apply: impl Fn(&[C64], &mut [C64]),
    b: &[C64],
    x: &mut [C64],
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        return Ok(SolveStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut ap = vec![C64::new(0.0, 0.0); n];
    apply(x, &mut ap);
    let mut r: Vec<C64> = b.iter().zip(&ap).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r).re;
    for it in 0..=max_iter {
        let rel = rr.sqrt() / b_norm;
        if rel <= tol {
            return Ok(SolveStats {
                iterations: it,
                residual: rel,
            });
        }
        if it == max_iter || !rel.is_finite() {
            return Err(Error::SolverDivergence {
                iterations: it,
                residual: rel,
            });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap).re;
        if !(pap > 0.0) {
            return Err(Error::SolverDivergence {
                iterations: it,
                residual: rel,
            });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r).re;
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    unreachable!()
}

/// CG on the normal equations `A†A x = A†b` for a general non-singular `A`.
/// The stopping test is on the true residual `‖b − Ax‖ ≤ tol·‖b‖`.
pub fn cgnr(
    apply: impl Fn(&[C64], &mut [C64]),
    apply_adjoint: impl Fn(&[C64], &mut [C64]),
    b: &[C64],
    x: &mut [C64],
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        return Ok(SolveStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut ax = vec![C64::new(0.0, 0.0); n];
    apply(x, &mut ax);
    let mut r: Vec<C64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z = vec![C64::new(0.0, 0.0); n];
    apply_adjoint(&r, &mut z);
    let mut p = z.clone();
    let mut zz = dot(&z, &z).re;
    let mut w = vec![C64::new(0.0, 0.0); n];
    for it in 0..=max_iter {
        let rel = norm(&r) / b_norm;
        if rel <= tol {
            return Ok(SolveStats {
                iterations: it,
                residual: rel,
            });
        }
        if it == max_iter || !rel.is_finite() || zz == 0.0 {
            return Err(Error::SolverDivergence {
                iterations: it,
                residual: rel,
            });
        }
        apply(&p, &mut w);
        let ww = dot(&w, &w).re;
        let alpha = zz / ww;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * w[i];
        }
        apply_adjoint(&r, &mut z);
        let zz_new = dot(&z, &z).re;
        let beta = zz_new / zz;
        zz = zz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    unreachable!()
}
