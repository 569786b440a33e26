//! Dense complex linear algebra used by the factorization stages.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

pub type CMatrix = DMatrix<Complex64>;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

/// Row-major `[[{re, im}]]`.
pub fn matrix_json(m: &CMatrix) -> Vec<Vec<ComplexJson>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| ComplexJson {
                    re: m[(i, j)].re,
                    im: m[(i, j)].im,
                })
                .collect()
        })
        .collect()
}

/// Eigenpairs of a hermitian matrix, eigenvalues in descending order. Each
/// eigenvector's first entry of non-negligible size is made real positive.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    // symmetrize exactly so the solver sees a hermitian input
    let h = (a + a.adjoint()).map(|c| c * 0.5);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        normalize_phase(v.as_mut_slice());
        vectors.set_column(k, &v);
    }
    (values, vectors)
}

/// Rotates `v` so that its first entry above `1e-8·max|v|` is real positive.
pub fn normalize_phase(v: &mut [Complex64]) {
    let max = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    if let Some(lead) = v.iter().find(|c| c.norm() > 1e-8 * max).copied() {
        let phase = lead.conj() / lead.norm();
        for c in v.iter_mut() {
            *c *= phase;
        }
    }
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// `max |V*V − I|` entrywise.
pub fn isometry_defect(v: &CMatrix) -> f64 {
    let g = v.adjoint() * v;
    max_abs(&(g - CMatrix::identity(v.ncols(), v.ncols())))
}

pub fn largest_singular_value(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Moore–Penrose pseudo-inverse with relative singular-value cutoff.
pub fn pseudo_inverse(m: &CMatrix, rel_tol: f64) -> CMatrix {
    if m.nrows() == 0 || m.ncols() == 0 {
        return CMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let mut out = CMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_tol * smax && s > 0.0 {
            let uk = u.column(k);
            let vk = vt.row(k).adjoint();
            out += (vk * uk.adjoint()).map(|c| c / s);
        }
    }
    out
}

pub fn vstack(top: &CMatrix, bottom: &CMatrix) -> CMatrix {
    assert_eq!(top.ncols(), bottom.ncols());
    let mut out = CMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    out
}

pub fn hstack(left: &CMatrix, right: &CMatrix) -> CMatrix {
    assert_eq!(left.nrows(), right.nrows());
    let mut out = CMatrix::zeros(left.nrows(), left.ncols() + right.ncols());
    out.view_mut((0, 0), left.shape()).copy_from(left);
    out.view_mut((0, left.ncols()), right.shape()).copy_from(right);
    out
}

pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    assert_eq!(data.len(), rows * cols);
    CMatrix::from_fn(rows, cols, |i, j| Complex64::new(data[i * cols + j], 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_descending_and_phase_fixed() {
        let a = real_matrix(2, 2, &[3.0 / 32.0, 1.0 / 32.0, 1.0 / 32.0, 3.0 / 32.0]);
        let (vals, vecs) = hermitian_eigen(&a);
        assert!((vals[0] - 0.125).abs() < 1e-15);
        assert!((vals[1] - 0.0625).abs() < 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((vecs[(0, 0)] - Complex64::new(s, 0.0)).norm() < 1e-14);
        assert!((vecs[(1, 0)] - Complex64::new(s, 0.0)).norm() < 1e-14);
        assert!((vecs[(0, 1)] - Complex64::new(s, 0.0)).norm() < 1e-14);
        assert!((vecs[(1, 1)] + Complex64::new(s, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn pinv_of_rank_one() {
        let a = real_matrix(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let p = pseudo_inverse(&a, 1e-12);
        assert!(max_abs(&(&a * &p * &a - &a)) < 1e-14);
    }
}
