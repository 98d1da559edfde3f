//! Small dense complex linear algebra on top of nalgebra: min-norm least
//! squares, null-space elimination for exact equality constraints, and the
//! matrix infinity norm.

use crate::C64;
use nalgebra::{DMatrix, DVector};

pub fn dmatrix_from_rows(rows: &[Vec<C64>]) -> DMatrix<C64> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(nr, nc, |i, j| rows[i][j])
}

pub fn dvector(v: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(v)
}

/// Max row sum of moduli.
pub fn inf_norm(m: &DMatrix<C64>) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub struct LstsqResult {
    pub x: DVector<C64>,
    /// sup-norm residual of A x - b
    pub residual: f64,
    /// ratio of largest to smallest retained singular value
    pub condition: f64,
    pub rank: usize,
}

/// Minimum-norm least-squares solution via truncated SVD.
pub fn lstsq_min_norm(a: &DMatrix<C64>, b: &DVector<C64>, rank_tol: f64) -> LstsqResult {
    if a.nrows() == 0 || a.ncols() == 0 {
        return LstsqResult {
            x: DVector::zeros(a.ncols()),
            residual: b.iter().map(|v| v.norm()).fold(0.0, f64::max),
            condition: 1.0,
            rank: 0,
        };
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = rank_tol * smax.max(1e-300);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut rank = 0;
    let mut smin = f64::INFINITY;
    let k = svd.singular_values.len();
    let mut coeffs = DVector::<C64>::zeros(k);
    let utb = u.adjoint() * b;
    for i in 0..k {
        let s = svd.singular_values[i];
        if s > cutoff {
            coeffs[i] = utb[i] / s;
            rank += 1;
            smin = smin.min(s);
        }
    }
    let x = vt.adjoint() * coeffs;
    let r = a * &x - b;
    LstsqResult {
        x,
        residual: r.iter().map(|v| v.norm()).fold(0.0, f64::max),
        condition: if rank > 0 { smax / smin } else { 1.0 },
        rank,
    }
}

pub struct ConstrainedLstsq {
    pub x: DVector<C64>,
    /// sup-norm residual of the equality constraints
    pub constraint_residual: f64,
    /// sup-norm residual of the objective rows
    pub objective_sup_error: f64,
    pub condition: f64,
}

/// Minimizes ||A_o x - b_o||_2 subject to A_c x = b_c, by null-space
/// elimination: a min-norm particular solution of the constraints plus an
/// unconstrained solve in the null space of A_c.
pub fn constrained_lstsq(
    a_c: &DMatrix<C64>,
    b_c: &DVector<C64>,
    a_o: &DMatrix<C64>,
    b_o: &DVector<C64>,
) -> ConstrainedLstsq {
    let dim = a_o.ncols().max(a_c.ncols());
    if a_c.nrows() == 0 {
        let r = lstsq_min_norm(a_o, b_o, 1e-12);
        return ConstrainedLstsq {
            x: r.x,
            constraint_residual: 0.0,
            objective_sup_error: r.residual,
            condition: r.condition,
        };
    }
    // pad with zero rows so the thin SVD carries a full right-singular
    // basis, which the null-space step below needs
    let (a_c, b_c) = if a_c.nrows() < dim {
        let mut ap = DMatrix::<C64>::zeros(dim, dim);
        ap.view_mut((0, 0), (a_c.nrows(), a_c.ncols())).copy_from(a_c);
        let mut bp = DVector::<C64>::zeros(dim);
        bp.rows_mut(0, b_c.len()).copy_from(b_c);
        (ap, bp)
    } else {
        (a_c.clone(), b_c.clone())
    };
    let svd = a_c.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = 1e-12 * smax.max(1e-300);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let k = svd.singular_values.len();
    let rank = (0..k).filter(|&i| svd.singular_values[i] > cutoff).count();

    let utb = u.adjoint() * &b_c;
    let mut coeffs = DVector::<C64>::zeros(vt.nrows());
    for i in 0..rank {
        coeffs[i] = utb[i] / svd.singular_values[i];
    }
    let x_p = vt.adjoint() * &coeffs;

    // null-space basis: remaining right singular vectors
    let v = vt.adjoint();
    let null_dim = dim - rank;
    let x = if null_dim > 0 && a_o.nrows() > 0 {
        let n_basis = v.columns(rank, null_dim).into_owned();
        let an = a_o * &n_basis;
        let rhs = b_o - a_o * &x_p;
        let t = lstsq_min_norm(&an, &rhs, 1e-12);
        &x_p + n_basis * t.x
    } else {
        x_p
    };

    // refinement passes through the pseudo-inverse keep the exact rows
    // exact even when the objective stage piles up large coefficients
    let mut x = x;
    for _ in 0..2 {
        let defect = &b_c - &a_c * &x;
        let utd = u.adjoint() * defect;
        let mut corr = DVector::<C64>::zeros(vt.nrows());
        for i in 0..rank {
            corr[i] = utd[i] / svd.singular_values[i];
        }
        x += vt.adjoint() * corr;
    }
    let cr = &a_c * &x - &b_c;
    let objective_sup_error = if a_o.nrows() > 0 {
        let or = a_o * &x - b_o;
        or.iter().map(|v| v.norm()).fold(0.0, f64::max)
    } else {
        0.0
    };
    ConstrainedLstsq {
        x,
        constraint_residual: cr.iter().map(|v| v.norm()).fold(0.0, f64::max),
        objective_sup_error,
        condition: if rank > 0 {
            smax / svd.singular_values.as_slice()[..k]
                .iter()
                .filter(|&&s| s > cutoff)
                .cloned()
                .fold(f64::INFINITY, f64::min)
        } else {
            1.0
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn min_norm_solution_of_underdetermined_row() {
        // single row [2i] x = 1 -> x = conj(2i)/|2i|^2 = -i/2
        let a = dmatrix_from_rows(&[vec![c(0.0, 2.0)]]);
        let b = dvector(&[c(1.0, 0.0)]);
        let r = lstsq_min_norm(&a, &b, 1e-12);
        assert!((r.x[0] - c(0.0, -0.5)).norm() < 1e-14);
        assert!(r.residual < 1e-14);
    }

    #[test]
    fn constrained_solve_hits_constraints_exactly() {
        // minimize ||x0 - 1||, ||x1 - 1|| subject to x0 + x1 = 4
        let a_c = dmatrix_from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)]]);
        let b_c = dvector(&[c(4.0, 0.0)]);
        let a_o = dmatrix_from_rows(&[
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0)],
        ]);
        let b_o = dvector(&[c(1.0, 0.0), c(1.0, 0.0)]);
        let r = constrained_lstsq(&a_c, &b_c, &a_o, &b_o);
        assert!(r.constraint_residual < 1e-13);
        assert!((r.x[0] - c(2.0, 0.0)).norm() < 1e-13);
        assert!((r.x[1] - c(2.0, 0.0)).norm() < 1e-13);
    }
}
