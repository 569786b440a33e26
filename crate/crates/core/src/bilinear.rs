//! Bilinear kernels `K(ξ, η̄)` in `2d` variables.
//!
//! A kernel is stored as a [`LaurentPoly`] of dimension `2d`: exponents
//! `0..d` belong to `ξ`, exponents `d..2d` to `η̄`. The hermitian form
//! `v(η)* A v(ξ)` becomes the kernel with coefficient `A(α, β)` at
//! `ξ^β η̄^α`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::laurent::{LaurentPoly, MultiIndex};

fn join(xi: &MultiIndex, eta: &MultiIndex) -> MultiIndex {
    MultiIndex(xi.0.iter().chain(eta.0.iter()).copied().collect())
}

fn split(e: &MultiIndex, d: usize) -> (MultiIndex, MultiIndex) {
    (MultiIndex(e.0[..d].to_vec()), MultiIndex(e.0[d..].to_vec()))
}

/// `Σ_k h_k(η)* h_k(ξ)` for polynomials `h_k` in `d` variables.
pub fn gram_kernel(rows: &[LaurentPoly], d: usize) -> Result<LaurentPoly> {
    let mut terms: Vec<(MultiIndex, Complex64)> = Vec::new();
    for h in rows {
        if h.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: h.dim(),
            });
        }
        for (a, ca) in h.terms() {
            for (b, cb) in h.terms() {
                terms.push((join(a, b), cb.conj() * ca));
            }
        }
    }
    LaurentPoly::from_terms(2 * d, terms)
}

/// `v(η)* A v(ξ)` where `v = (ξ^α : α ∈ indices)`.
pub fn quadratic_kernel(indices: &[MultiIndex], a: &DMatrix<Complex64>) -> Result<LaurentPoly> {
    let n = indices.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::Shape(format!(
            "{}x{} matrix for {} indices",
            a.nrows(),
            a.ncols(),
            n
        )));
    }
    let d = indices.first().map_or(0, |e| e.dim());
    let mut terms = Vec::new();
    for (i, alpha) in indices.iter().enumerate() {
        for (j, beta) in indices.iter().enumerate() {
            if a[(i, j)] != Complex64::new(0.0, 0.0) {
                terms.push((join(beta, alpha), a[(i, j)]));
            }
        }
    }
    LaurentPoly::from_terms(2 * d, terms)
}

/// `(1 − ξ_j η̄_j)·K` (`j` zero-based).
pub fn times_one_minus(kernel: &LaurentPoly, j: usize) -> LaurentPoly {
    let d = kernel.dim() / 2;
    let mut e = vec![0; 2 * d];
    e[j] = 1;
    e[d + j] = 1;
    let shifted = kernel.map_exponents(2 * d, |x| x.add(&MultiIndex(e.clone())));
    kernel - &shifted
}

/// Diagonal restriction `η = ξ` on the torus (`η̄ = ξ⁻¹`).
pub fn restrict_to_torus(kernel: &LaurentPoly) -> LaurentPoly {
    let d = kernel.dim() / 2;
    kernel.map_exponents(d, |e| {
        let (a, b) = split(e, d);
        a.sub(&b)
    })
}

/// Splits `R(ξ, η̄) = Σ_j (1 − ξ_j η̄_j) K_j + R₀` where `K_j` involves only
/// the first `j` variables of each side and `R₀` is constant. This split is
/// unique; the returned kernels are `K_1..K_d` together with the constant `R₀`.
pub fn split_by_direction(r: &LaurentPoly) -> Result<(Vec<LaurentPoly>, Complex64)> {
    let d = r.dim() / 2;
    if r.exponents().any(|e| !e.is_nonnegative()) {
        return Err(Error::Precondition("kernel must be polynomial in (ξ, η̄)".into()));
    }
    let mut rest = r.clone();
    let mut kernels = vec![LaurentPoly::zero(2 * d); d];
    for j in (0..d).rev() {
        let (kernel, remainder) = peel_direction(&rest, j)?;
        kernels[j] = kernel;
        rest = remainder;
    }
    if rest.exponents().any(|e| !e.is_zero()) {
        return Err(Error::Internal(format!(
            "remainder after peeling all directions is not constant: {rest:?}"
        )));
    }
    Ok((kernels, rest.coeff(&vec![0; 2 * d])))
}

/// One step of [`split_by_direction`]. The part free of `ξ_j, η̄_j` is `R`
/// at `ξ_j = η̄_j = 1`; the rest is divided by `1 − ξ_j η̄_j`.
fn peel_direction(r: &LaurentPoly, j: usize) -> Result<(LaurentPoly, LaurentPoly)> {
    let d = r.dim() / 2;
    let remainder = r.map_exponents(2 * d, |e| {
        let mut e = e.clone();
        e.0[j] = 0;
        e.0[d + j] = 0;
        e
    });
    let moving = r - &remainder;

    // group by (other exponents, s - t); walk each diagonal accumulating
    type Diagonal = BTreeMap<i64, Complex64>;
    let mut diagonals: BTreeMap<(MultiIndex, i64), Diagonal> = BTreeMap::new();
    for (e, c) in moving.terms() {
        let (s, t) = (e.0[j], e.0[d + j]);
        let mut other = e.clone();
        other.0[j] = 0;
        other.0[d + j] = 0;
        diagonals.entry((other, s - t)).or_default().insert(s.min(t), *c);
    }

    let scale = r.max_abs().max(1.0);
    let mut kernel_terms = Vec::new();
    for ((other, offset), diag) in &diagonals {
        let lo = *diag.keys().next().expect("nonempty");
        let hi = *diag.keys().next_back().expect("nonempty");
        let mut running = Complex64::new(0.0, 0.0);
        for k in lo..=hi {
            running += diag.get(&k).copied().unwrap_or_default();
            if k < hi {
                let (s, t) = if *offset >= 0 { (k + offset, k) } else { (k, k - offset) };
                let mut e = other.clone();
                e.0[j] = s;
                e.0[d + j] = t;
                kernel_terms.push((e, running));
            }
        }
        if running.norm() > 1e-9 * scale {
            return Err(Error::Precondition(format!(
                "kernel is not divisible by (1 - ξ{0} η̄{0}); leftover {1:e}",
                j + 1,
                running.norm()
            )));
        }
    }
    let kernel = LaurentPoly::from_terms(2 * d, kernel_terms)?;
    Ok((kernel, remainder))
}

/// Reads a kernel as `v(η)* G v(ξ)` over the sorted union of exponents that
/// occur on either side. Indices are returned in full `d`-variable form.
pub fn kernel_gram(kernel: &LaurentPoly) -> (Vec<MultiIndex>, DMatrix<Complex64>) {
    let d = kernel.dim() / 2;
    let mut index_set = std::collections::BTreeSet::new();
    for e in kernel.exponents() {
        let (a, b) = split(e, d);
        index_set.insert(a);
        index_set.insert(b);
    }
    let indices: Vec<MultiIndex> = index_set.into_iter().collect();
    let pos: BTreeMap<&MultiIndex, usize> = indices.iter().enumerate().map(|(i, e)| (e, i)).collect();
    let mut g = DMatrix::zeros(indices.len(), indices.len());
    for (e, c) in kernel.terms() {
        let (beta, alpha) = split(e, d);
        g[(pos[&alpha], pos[&beta])] = *c;
    }
    (indices, g)
}

/// Row vector `(Hv)_k = Σ_α H(k, α) ξ^α` as polynomials.
pub fn rows_times_monomials(h: &DMatrix<Complex64>, indices: &[MultiIndex], d: usize) -> Vec<LaurentPoly> {
    (0..h.nrows())
        .map(|k| {
            LaurentPoly::from_terms(d, indices.iter().enumerate().map(|(i, e)| (e.clone(), h[(k, i)])))
                .expect("indices share dim")
        })
        .collect()
}
