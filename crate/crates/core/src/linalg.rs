//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Operator 2-norm; Euclidean norm for row or column vectors.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

pub fn vec_norm(v: &DVector<f64>) -> f64 {
    v.norm()
}

pub fn inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let inv = m.clone().try_inverse()?;
    if inv.iter().all(|x| x.is_finite()) {
        Some(inv)
    } else {
        None
    }
}

/// Reciprocal condition estimate via singular values; 0 for singular input.
pub fn rcond(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
    let min = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Thin QR with a non-negative diagonal in R, so orientations stay continuous
/// when a basis is propagated cell by cell.
pub fn qr_positive(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..r.nrows().min(q.ncols()) {
        if r[(j, j)] < 0.0 {
            for i in 0..q.nrows() {
                q[(i, j)] = -q[(i, j)];
            }
            for c in 0..r.ncols() {
                r[(j, c)] = -r[(j, c)];
            }
        }
    }
    (q, r)
}

/// Orthonormal basis of the span of `m`'s columns, taken in column order and
/// skipping columns whose residual falls below `rel_tol * max_col_norm`.
pub fn column_basis(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let scale = (0..m.ncols())
        .map(|j| m.column(j).norm())
        .fold(0.0_f64, f64::max);
    let mut cols: Vec<DVector<f64>> = Vec::new();
    if scale == 0.0 {
        return DMatrix::zeros(n, 0);
    }
    for j in 0..m.ncols() {
        let mut v: DVector<f64> = m.column(j).into_owned();
        for _ in 0..2 {
            for c in &cols {
                let d = c.dot(&v);
                v -= c * d;
            }
        }
        let nv = v.norm();
        if nv > rel_tol * scale {
            cols.push(v / nv);
        }
    }
    let mut out = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        out.set_column(j, c);
    }
    out
}

/// Residual of idempotency, `|P^2 - P|`.
pub fn projection_residual(p: &DMatrix<f64>) -> f64 {
    op_norm(&(p * p - p))
}

/// Numerical rank of a projection via its trace, which equals the rank.
pub fn projection_rank(p: &DMatrix<f64>) -> usize {
    p.trace().round().max(0.0) as usize
}

/// Projection onto span(S) along span(U), for bases stacked as `[S U]`.
pub fn projection_from_bases(s: &DMatrix<f64>, u: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = s.nrows();
    let k = s.ncols();
    if k == 0 {
        return Some(DMatrix::zeros(n, n));
    }
    if u.ncols() == 0 {
        return Some(DMatrix::identity(n, n));
    }
    let mut b = DMatrix::zeros(n, n);
    b.view_mut((0, 0), (n, k)).copy_from(s);
    b.view_mut((0, k), (n, n - k)).copy_from(u);
    let binv = inverse(&b)?;
    Some(s * binv.rows(0, k))
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_norm_of_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -5.0]);
        assert!((op_norm(&m) - 5.0).abs() < 1e-12);
        let v = DMatrix::from_row_slice(2, 1, &[3.0, 4.0]);
        assert!((op_norm(&v) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn qr_keeps_positive_diagonal() {
        let m = DMatrix::from_row_slice(3, 2, &[-1.0, 2.0, 0.5, 1.0, 0.0, -3.0]);
        let (q, r) = qr_positive(&m);
        assert!(max_abs_diff(&(&q * &r), &m) < 1e-12);
        assert!(r[(0, 0)] >= 0.0 && r[(1, 1)] >= 0.0);
    }

    #[test]
    fn oblique_projection_from_bases() {
        let s = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let u = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]) / 2f64.sqrt();
        let p = projection_from_bases(&s, &u).unwrap();
        assert!(projection_residual(&p) < 1e-12);
        assert!((&p * &u).norm() < 1e-12);
        assert!((&p * &s - &s).norm() < 1e-12);
    }

    #[test]
    fn column_basis_skips_dependent_columns() {
        let p = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let b = column_basis(&p, 1e-8);
        assert_eq!(b.ncols(), 1);
        assert!((b[(1, 0)] - 1.0).abs() < 1e-12);
    }
}
