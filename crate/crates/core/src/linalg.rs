//! Shared dense linear algebra helpers on top of nalgebra.
//!
//! Everything operates on `DMatrix<f64>` / `DVector<f64>`. Symmetric
//! spectral decompositions go through [`sym_eigen`] so that eigenvalue
//! clustering is applied uniformly; matrix exponentials use an eigenvalue
//! route for symmetric inputs and scaling-and-squaring otherwise.

use nalgebra::{DMatrix, DVector};

/// Trace inner product `<A, B> = tr(A B^T)`.
pub fn trace_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Frobenius norm induced by [`trace_inner`].
pub fn trace_norm(a: &DMatrix<f64>) -> f64 {
    trace_inner(a, a).sqrt()
}

/// Matrix commutator `[A, B] = AB - BA`.
pub fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

/// Modified Gram-Schmidt on a family of matrices under the trace form.
///
/// Returns an orthonormal basis of the span. Vectors whose residual after
/// projection falls below `tol` times their original norm are dropped.
pub fn orthonormalize(family: &[DMatrix<f64>], tol: f64) -> Vec<DMatrix<f64>> {
    let mut basis: Vec<DMatrix<f64>> = Vec::with_capacity(family.len());
    for m in family {
        let scale = trace_norm(m).max(1.0);
        let mut v = m.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = trace_inner(&v, b);
                v -= b * c;
            }
        }
        let n = trace_norm(&v);
        if n > tol * scale {
            basis.push(v / n);
        }
    }
    basis
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns, in
/// the same order as the eigenvalues.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let se = m.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let vals = DVector::from_iterator(n, idx.iter().map(|&i| se.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Groups sorted eigenvalues into clusters separated by more than `gap`.
///
/// Returns `(representative, column indices)` per cluster, representatives
/// being cluster means. Representatives within `gap` of zero are snapped to
/// exactly zero so that products `lambda * exp(lambda t)` stay clean.
pub fn cluster_eigenvalues(sorted: &DVector<f64>, gap: f64) -> Vec<(f64, Vec<usize>)> {
    let mut clusters: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] - sorted[end - 1] <= gap {
            end += 1;
        }
        let members: Vec<usize> = (start..end).collect();
        let mean = members.iter().map(|&i| sorted[i]).sum::<f64>() / members.len() as f64;
        let rep = if mean.abs() <= gap { 0.0 } else { mean };
        clusters.push((rep, members));
        start = end;
    }
    clusters
}

/// Numerical rank against an absolute singular-value threshold.
pub fn rank_with_threshold(m: &DMatrix<f64>, threshold: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    sv.iter().filter(|&&s| s > threshold).count()
}

/// Orthonormal kernel basis of `m` (columns), singular values below
/// `threshold` counting as zero.
pub fn kernel_basis(m: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 {
        return DMatrix::identity(cols, cols);
    }
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("svd requested v_t");
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > threshold)
        .count();
    let target = cols - rank;
    // Rows of v_t beyond the rank span kernel directions; v_t only has
    // min(rows, cols) rows, so for wide matrices the remaining directions
    // are completed on the orthogonal complement of the row space.
    let row_space: Vec<DVector<f64>> = (0..rank).map(|r| vt.row(r).transpose()).collect();
    let mut kernel_cols: Vec<DVector<f64>> = Vec::with_capacity(target);
    for r in rank..vt.nrows() {
        kernel_cols.push(vt.row(r).transpose());
    }
    let mut j = 0;
    while kernel_cols.len() < target && j < cols {
        let mut v = DVector::zeros(cols);
        v[j] = 1.0;
        j += 1;
        for _ in 0..2 {
            for b in row_space.iter().chain(kernel_cols.iter()) {
                let c = v.dot(b);
                v -= b * c;
            }
        }
        let n = v.norm();
        if n > 1e-10 {
            kernel_cols.push(v / n);
        }
    }
    let mut out = DMatrix::zeros(cols, kernel_cols.len());
    for (j, col) in kernel_cols.iter().enumerate() {
        out.set_column(j, col);
    }
    out
}

/// Smallest and largest singular values, or `(0, 0)` for empty input.
pub fn singular_value_range(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 || m.ncols() == 0 {
        return (0.0, 0.0);
    }
    let sv = m.clone().singular_values();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for &s in sv.iter() {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    (lo.min(hi), hi)
}

/// Matrix exponential by scaling and squaring with a degree-6 diagonal
/// Pade approximant. Accurate to roughly 1e-13 for the moderate norms used
/// here; symmetric inputs should prefer [`sym_exp`].
pub fn matrix_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    let norm = m.amax() * n as f64;
    let squarings = if norm > 0.5 {
        ((norm / 0.5).log2().ceil() as i32).max(0)
    } else {
        0
    };
    let a = m / 2f64.powi(squarings);
    // Pade(6, 6): p(x) = sum c_k x^k with c_k = (2q - k)! q! / ((2q)! k! (q - k)!)
    const C: [f64; 7] = [
        1.0,
        0.5,
        0.113_636_363_636_363_64,
        0.015_151_515_151_515_152,
        1.262_626_262_626_262_6e-3,
        6.313_131_313_131_313e-5,
        1.503_126_503_126_503e-6,
    ];
    let id = DMatrix::identity(n, n);
    let mut pow = id.clone();
    let mut num = DMatrix::zeros(n, n);
    let mut den = DMatrix::zeros(n, n);
    for (k, &c) in C.iter().enumerate() {
        num += &pow * c;
        den += &pow * (c * if k % 2 == 0 { 1.0 } else { -1.0 });
        if k < C.len() - 1 {
            pow = &pow * &a;
        }
    }
    let mut result = den
        .lu()
        .solve(&num)
        .expect("Pade denominator is invertible after scaling");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Exponential of a symmetric matrix through its eigendecomposition.
///
/// Stable for large `t` because over- and underflow stay confined to the
/// diagonal factors.
pub fn sym_exp(m: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(m);
    let exp_diag = DMatrix::from_diagonal(&vals.map(|l| (t * l).exp()));
    &vecs * exp_diag * vecs.transpose()
}

/// Solves the SPD system `G x = rhs` by Cholesky, falling back to LU.
pub fn solve_spd(g: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = g.clone().cholesky() {
        return Some(chol.solve(rhs));
    }
    g.clone().lu().solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_matches_series_on_nilpotent() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 0.0, 0.0]);
        let e = matrix_exp(&m);
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 0.0, 1.0]);
        assert!((e - expect).amax() < 1e-14);
    }

    #[test]
    fn exp_matches_rotation() {
        let th = 0.7f64;
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -th, th, 0.0]);
        let e = matrix_exp(&m);
        let expect = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        assert!((e - expect).amax() < 1e-13);
    }

    #[test]
    fn sym_exp_matches_pade() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, -0.5]);
        let a = sym_exp(&m, 0.9);
        let b = matrix_exp(&(&m * 0.9));
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn kernel_of_rank_one() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, -1.0]);
        let k = kernel_basis(&m, 1e-12);
        assert_eq!(k.ncols(), 2);
        for j in 0..2 {
            let v = k.column(j);
            assert!((v[0] - v[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn clustering_merges_close_values() {
        let v = DVector::from_vec(vec![-1.0, -1.0 + 1e-12, 0.0, 2.0]);
        let c = cluster_eigenvalues(&v, 1e-9);
        assert_eq!(c.len(), 3);
        assert_eq!(c[0].1.len(), 2);
        assert_eq!(c[1].0, 0.0);
    }

    #[test]
    fn orthonormalize_drops_dependent() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = &a * 2.0;
        let c = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let basis = orthonormalize(&[a, b, c], 1e-10);
        assert_eq!(basis.len(), 2);
        assert!((trace_norm(&basis[0]) - 1.0).abs() < 1e-12);
        assert!(trace_inner(&basis[0], &basis[1]).abs() < 1e-12);
    }
}
