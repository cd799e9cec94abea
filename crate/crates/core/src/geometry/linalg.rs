//! Small dense real linear algebra used by the fiber machinery.

use nalgebra::{DMatrix, DVector};

/// Modified Gram-Schmidt with one re-orthogonalization pass.
///
/// Returns the orthonormal vectors and, for each, the index of the input it
/// came from. Inputs whose residual norm falls below `drop_tol` are skipped.
pub(crate) fn gram_schmidt(raw: &[DVector<f64>], drop_tol: f64) -> (Vec<DVector<f64>>, Vec<usize>) {
    let mut out: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for (idx, v) in raw.iter().enumerate() {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let n = w.norm();
        if n >= drop_tol {
            out.push(w / n);
            kept.push(idx);
        }
    }
    (out, kept)
}

/// Orthonormal basis of the orthogonal complement of `span(basis)` in `R^dim`.
/// `basis` must already be orthonormal.
pub(crate) fn orthogonal_complement(basis: &[DVector<f64>], dim: usize) -> Vec<DVector<f64>> {
    let mut all: Vec<DVector<f64>> = basis.to_vec();
    let start = all.len();
    for i in 0..dim {
        if all.len() == dim {
            break;
        }
        let mut w = DVector::zeros(dim);
        w[i] = 1.0;
        for _ in 0..2 {
            for q in &all {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let n = w.norm();
        if n > 1e-8 {
            all.push(w / n);
        }
    }
    all.split_off(start)
}

pub(crate) fn columns(vs: &[DVector<f64>], dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, vs.len());
    for (j, v) in vs.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

pub(crate) fn rows(vs: &[DVector<f64>], dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(vs.len(), dim);
    for (i, v) in vs.iter().enumerate() {
        m.set_row(i, &v.transpose());
    }
    m
}

/// Least-squares solution of `A x = b` with minimum norm, plus an orthonormal
/// basis (as columns) of the numerical null space of `A`.
///
/// Singular values at or below `rel_tol * max(1, sigma_max)` count as zero.
pub(crate) struct LeastSquares {
    pub solution: DVector<f64>,
    pub null_space: DMatrix<f64>,
    pub residual: f64,
}

pub(crate) fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> LeastSquares {
    let (m, n) = a.shape();
    if n == 0 {
        return LeastSquares {
            solution: DVector::zeros(0),
            null_space: DMatrix::zeros(0, 0),
            residual: b.norm(),
        };
    }
    // Pad with zero rows so the thin SVD returns a full right basis.
    let rows_needed = m.max(n);
    let mut padded = DMatrix::zeros(rows_needed, n);
    padded.view_mut((0, 0), (m, n)).copy_from(a);
    let mut rhs = DVector::zeros(rows_needed);
    rhs.rows_mut(0, m).copy_from(b);

    let svd = padded.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = rel_tol * smax.max(1.0);

    let mut x = DVector::zeros(n);
    let mut null = Vec::new();
    for k in 0..svd.singular_values.len() {
        let s = svd.singular_values[k];
        let vk = vt.row(k).transpose();
        if s > cut {
            let coef = u.column(k).dot(&rhs) / s;
            x.axpy(coef, &vk, 1.0);
        } else {
            null.push(vk);
        }
    }
    let residual = (a * &x - b).norm();
    LeastSquares {
        solution: x,
        null_space: columns(&null, n),
        residual,
    }
}

/// Solves `A x = b` for symmetric positive definite `A`, adding a growing
/// ridge when the factorization fails.
pub(crate) fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..40 {
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] += ridge;
        }
        if let Some(ch) = m.cholesky() {
            return ch.solve(b);
        }
        ridge = if ridge == 0.0 { 1e-14 * scale } else { ridge * 10.0 };
    }
    DVector::zeros(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_schmidt_drops_dependent_inputs() {
        let raw = vec![
            DVector::from_vec(vec![1.0, 1.0, 0.0]),
            DVector::from_vec(vec![2.0, 2.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 1.0]),
        ];
        let (q, kept) = gram_schmidt(&raw, 1e-10);
        assert_eq!(kept, vec![0, 2]);
        assert!((q[0].dot(&q[1])).abs() < 1e-15);
        let comp = orthogonal_complement(&q, 3);
        assert_eq!(comp.len(), 1);
        assert!(q.iter().all(|v| v.dot(&comp[0]).abs() < 1e-14));
    }

    #[test]
    fn least_squares_reports_null_space() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![2.0]);
        let ls = least_squares(&a, &b, 1e-13);
        assert!((ls.solution - DVector::from_vec(vec![2.0, 0.0, 0.0])).norm() < 1e-14);
        assert_eq!(ls.null_space.ncols(), 2);
        assert!(ls.residual < 1e-14);
    }

    #[test]
    fn least_squares_keeps_tiny_but_genuine_rows() {
        let a = DMatrix::from_row_slice(1, 2, &[2.5e-11, 0.0]);
        let b = DVector::from_vec(vec![1e-15]);
        let ls = least_squares(&a, &b, 1e-13);
        assert_eq!(ls.null_space.ncols(), 1);
        assert!((ls.solution[0] - 4e-5).abs() < 1e-12);
    }
}
