//! Transfer-function realizations `f(ξ) = A + B E(ξ)(I − D E(ξ))⁻¹ C` with
//! `E(ξ) = diag(ξ₁ I_{n₁}, …, ξ_d I_{n_d})`.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use serde::Serialize;

use crate::bilinear;
use crate::certify::{self, AglerDecomposition};
use crate::error::{Error, Result};
use crate::laurent::{LaurentPoly, MultiIndex, PolyMatrix};
use crate::linalg::{self, CMatrix};

/// Isometry defect above which a realization is reported but accepted.
pub const ISOMETRY_WARN: f64 = 1e-10;
/// Isometry defect above which construction fails.
pub const ISOMETRY_FAIL: f64 = 1e-8;
/// Largest coefficient treated as zero when a series must terminate.
pub const NILPOTENT_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct Realization {
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
    pub d: CMatrix,
    pub state_blocks: Vec<usize>,
    pub dim: usize,
    pub isometric: bool,
}

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

impl Realization {
    pub fn outputs(&self) -> usize {
        self.a.nrows()
    }

    pub fn states(&self) -> usize {
        self.d.nrows()
    }

    /// Variable index of each state.
    pub fn state_vars(&self) -> Vec<usize> {
        self.state_blocks
            .iter()
            .enumerate()
            .flat_map(|(j, &n)| std::iter::repeat_n(j, n))
            .collect()
    }

    /// `[[A, B], [C, D]]`.
    pub fn block_matrix(&self) -> CMatrix {
        linalg::vstack(&linalg::hstack(&self.a, &self.b), &linalg::hstack(&self.c, &self.d))
    }

    pub fn isometry_defect(&self) -> f64 {
        linalg::isometry_defect(&self.block_matrix())
    }

    /// `‖(D·E(1,…,1))^n‖_max` with `n` the state dimension.
    pub fn nilpotency_residual(&self) -> f64 {
        let n = self.states();
        if n == 0 {
            return 0.0;
        }
        let mut p = CMatrix::identity(n, n);
        for _ in 0..n {
            p = &p * &self.d;
        }
        linalg::max_abs(&p)
    }

    fn e_times(&self, v: &[LaurentPoly]) -> Vec<LaurentPoly> {
        let vars = self.state_vars();
        v.iter()
            .zip(vars)
            .map(|(p, j)| p * &LaurentPoly::var(self.dim, j))
            .collect()
    }

    fn const_column(&self, m: &CMatrix) -> Vec<LaurentPoly> {
        (0..m.nrows())
            .map(|i| LaurentPoly::constant(self.dim, m[(i, 0)]))
            .collect()
    }

    /// `g = Σ_k (D E)^k C`, the state response.
    pub fn state_response(&self) -> Result<Vec<LaurentPoly>> {
        let n = self.states();
        let mut term = self.const_column(&self.c);
        let mut sum = term.clone();
        for _ in 0..n {
            term = mat_times_polys(&self.d, &self.e_times(&term));
            if term.iter().all(|p| p.max_abs() <= NILPOTENT_TOL) {
                return Ok(sum);
            }
            sum = sum.iter().zip(&term).map(|(a, b)| a + b).collect();
        }
        if n == 0 || term.iter().all(|p| p.max_abs() <= NILPOTENT_TOL) {
            return Ok(sum);
        }
        Err(Error::NotNilpotent { steps: n })
    }

    /// Expands the transfer function into a column of polynomials.
    pub fn transfer_expand(&self) -> Result<PolyMatrix> {
        let g = self.state_response()?;
        let eg = self.e_times(&g);
        let beg = mat_times_polys(&self.b, &eg);
        let a = self.const_column(&self.a);
        let out = a.iter().zip(&beg).map(|(x, y)| x + y).collect();
        PolyMatrix::column(self.dim, out)
    }

    /// Keeps the first `keep` outputs.
    pub fn trim_to_contractive(&self, keep: usize) -> Result<Realization> {
        if keep > self.outputs() {
            return Err(Error::Shape(format!(
                "cannot keep {keep} of {} outputs",
                self.outputs()
            )));
        }
        if keep == self.outputs() {
            return Ok(self.clone());
        }
        Ok(Realization {
            a: self.a.rows(0, keep).into_owned(),
            b: self.b.rows(0, keep).into_owned(),
            c: self.c.clone(),
            d: self.d.clone(),
            state_blocks: self.state_blocks.clone(),
            dim: self.dim,
            isometric: false,
        })
    }

    pub fn report(&self) -> RealizationReport {
        RealizationReport {
            a: linalg::matrix_json(&self.a),
            b: linalg::matrix_json(&self.b),
            c: linalg::matrix_json(&self.c),
            d: linalg::matrix_json(&self.d),
            state_blocks: self.state_blocks.clone(),
            isometry_defect: self.isometry_defect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RealizationReport {
    #[serde(rename = "A")]
    pub a: Vec<Vec<linalg::ComplexJson>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<linalg::ComplexJson>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<linalg::ComplexJson>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<linalg::ComplexJson>>,
    #[serde(rename = "stateBlocks")]
    pub state_blocks: Vec<usize>,
    #[serde(rename = "isometryDefect")]
    pub isometry_defect: f64,
}

/// `M·v` for a constant matrix and a polynomial vector.
pub(crate) fn mat_times_polys(m: &CMatrix, v: &[LaurentPoly]) -> Vec<LaurentPoly> {
    let dim = v.first().map_or(1, LaurentPoly::dim);
    (0..m.nrows())
        .map(|i| {
            let mut acc = LaurentPoly::zero(dim);
            for (j, p) in v.iter().enumerate() {
                let c = m[(i, j)];
                if c != czero() && !p.is_zero() {
                    acc = &acc + &p.scale(c);
                }
            }
            acc
        })
        .collect()
}

fn check_isometry(r: &Realization) -> Result<()> {
    let defect = r.isometry_defect();
    if defect > ISOMETRY_FAIL {
        return Err(Error::Verification {
            what: format!(
                "realization isometry (defect matrix {:?})",
                r.block_matrix().adjoint() * r.block_matrix()
                    - CMatrix::identity(r.block_matrix().ncols(), r.block_matrix().ncols())
            ),
            residual: defect,
            tol: ISOMETRY_FAIL,
        });
    }
    Ok(())
}

/// Explicit realization of `(f_p, H v)` from a non-negative-coefficient
/// decomposition. States are `(j, γ)` over the pruned `I_j`.
pub fn build_realization(dec: &AglerDecomposition, h: &CMatrix) -> Result<Realization> {
    let d = dec.setup.dim();
    let m = dec.setup.m();
    if h.ncols() != dec.base_indices.len() {
        return Err(Error::Shape(format!(
            "H has {} columns for {} base indices",
            h.ncols(),
            dec.base_indices.len()
        )));
    }
    if !dec.pruned {
        return Err(Error::Precondition(
            "explicit realization needs pruned direction boxes".into(),
        ));
    }
    let base_pos: BTreeMap<&MultiIndex, usize> = dec.base_indices.iter().enumerate().map(|(i, e)| (e, i)).collect();

    let mut state: BTreeMap<(usize, MultiIndex), usize> = BTreeMap::new();
    let mut weight = Vec::new();
    for (j, (idx, diag)) in dec.dir_indices.iter().zip(&dec.adiag).enumerate() {
        for (gamma, &a) in idx.iter().zip(diag) {
            state.insert((j, gamma.clone()), weight.len());
            weight.push(a);
        }
    }
    let n = weight.len();
    let lookup = |j: usize, gamma: &MultiIndex| -> Result<(usize, f64)> {
        match state.get(&(j, gamma.clone())) {
            Some(&s) if weight[s] > 0.0 => Ok((s, weight[s])),
            _ => Err(Error::Internal(format!(
                "A_{}({gamma:?}) vanishes but is needed",
                j + 1
            ))),
        }
    };
    // ξ^α = ξ_j·ξ^γ with j the last non-zero coordinate of α
    let peel = |alpha: &MultiIndex| -> (usize, MultiIndex) {
        let j = alpha.0.iter().rposition(|x| *x != 0).expect("non-zero");
        let mut gamma = alpha.clone();
        gamma.0[j] -= 1;
        (j, gamma)
    };

    let mut c = CMatrix::zeros(n, 1);
    let mut dm = CMatrix::zeros(n, n);
    for ((i, beta), &s) in &state {
        if beta.is_zero() {
            c[(s, 0)] = Complex64::new(weight[s].sqrt(), 0.0);
            continue;
        }
        let (j, gamma) = if beta.0[*i] > 0 {
            let mut g = beta.clone();
            g.0[*i] -= 1;
            (*i, g)
        } else {
            peel(beta)
        };
        let (t, w) = lookup(j, &gamma)?;
        dm[(s, t)] = Complex64::new((weight[s] / w).sqrt(), 0.0);
    }

    let comps = dec.fp();
    let outs = m + h.nrows();
    let mut a = CMatrix::zeros(outs, 1);
    let mut b = CMatrix::zeros(outs, n);
    for (chi, comp) in comps.iter().enumerate() {
        for (alpha, coef) in comp.terms() {
            if alpha.is_zero() {
                a[(chi, 0)] = *coef;
            } else {
                let (j, gamma) = peel(alpha);
                let (t, w) = lookup(j, &gamma)?;
                b[(chi, t)] = coef / w.sqrt();
            }
        }
    }
    for k in 0..h.nrows() {
        for (alpha, &col) in &base_pos {
            let coef = h[(k, col)];
            if alpha.is_zero() {
                a[(m + k, 0)] = coef;
            } else if coef != czero() {
                let (j, gamma) = peel(alpha);
                let (t, w) = lookup(j, &gamma)?;
                b[(m + k, t)] = coef / w.sqrt();
            }
        }
    }

    let r = Realization {
        a,
        b,
        c,
        d: dm,
        state_blocks: dec.state_blocks(),
        dim: d,
        isometric: true,
    };
    check_isometry(&r)?;
    Ok(r)
}

/// Solves `V·x(ξ) = y(ξ)` for `V = [[A, B], [C, D]]`, where
/// `x = (1, E(ξ)g(ξ))`, `y = (f(ξ), g(ξ))` and `g` stacks the rows of each
/// direction block. The solution is completed to an isometry on the
/// complement of the range of `x`.
pub fn realize_from_blocks(outputs: &[LaurentPoly], blocks: &[Vec<LaurentPoly>], dim: usize) -> Result<Realization> {
    let g: Vec<LaurentPoly> = blocks.iter().flatten().cloned().collect();
    let vars: Vec<usize> = blocks
        .iter()
        .enumerate()
        .flat_map(|(j, b)| std::iter::repeat_n(j, b.len()))
        .collect();
    let n = g.len();
    let outs = outputs.len();

    let mut x: Vec<LaurentPoly> = vec![LaurentPoly::one(dim)];
    x.extend(g.iter().zip(&vars).map(|(p, &j)| p * &LaurentPoly::var(dim, j)));
    let mut y: Vec<LaurentPoly> = outputs.to_vec();
    y.extend(g.iter().cloned());

    let monomials: Vec<MultiIndex> = x
        .iter()
        .chain(&y)
        .flat_map(|p| p.exponents().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let coeffs =
        |rows: &[LaurentPoly]| CMatrix::from_fn(rows.len(), monomials.len(), |i, k| rows[i].coeff(&monomials[k].0));
    let xm = coeffs(&x);
    let ym = coeffs(&y);

    let mut v = &ym * linalg::pseudo_inverse(&xm, 1e-12);
    let solve_residual = linalg::max_abs(&(&v * &xm - &ym));
    if solve_residual > ISOMETRY_FAIL {
        return Err(Error::Verification {
            what: "coefficient matching V·x = y".into(),
            residual: solve_residual,
            tol: ISOMETRY_FAIL,
        });
    }

    // extend V from range(X) by an isometry range(X)^⊥ → range(Y)^⊥
    let rank_proj = |m: &CMatrix| -> CMatrix {
        let p = m * linalg::pseudo_inverse(m, 1e-12);
        (&p + p.adjoint()).map(|c| c * 0.5)
    };
    let px = rank_proj(&xm);
    let py = rank_proj(&ym);
    let free_in = certify::psd_factor(&(CMatrix::identity(n + 1, n + 1) - &px), 1e-8)?;
    if free_in.nrows() > 0 {
        let free_out = certify::psd_factor(&(CMatrix::identity(outs + n, outs + n) - &py), 1e-8)?;
        if free_out.nrows() < free_in.nrows() {
            return Err(Error::Internal(
                "no room to complete the realization to an isometry".into(),
            ));
        }
        for k in 0..free_in.nrows() {
            let out_vec = free_out.row(k).adjoint();
            let in_vec = free_in.row(k).into_owned();
            v += out_vec * in_vec;
        }
    }

    let r = Realization {
        a: v.view((0, 0), (outs, 1)).into_owned(),
        b: v.view((0, 1), (outs, n)).into_owned(),
        c: v.view((outs, 0), (n, 1)).into_owned(),
        d: v.view((outs, 1), (n, n)).into_owned(),
        state_blocks: blocks.iter().map(Vec::len).collect(),
        dim,
        isometric: true,
    };
    check_isometry(&r)?;
    Ok(r)
}

/// Direction blocks `q_j = H_j v_j` from the unique split of
/// `1 − y(η)*y(ξ) = Σ_j (1 − ξ_j η̄_j) K_j`, for a column `y` that is inner.
pub fn direction_blocks(rows: &[LaurentPoly], dim: usize, psd_tol: f64) -> Result<Vec<Vec<LaurentPoly>>> {
    let r = &LaurentPoly::one(2 * dim) - &bilinear::gram_kernel(rows, dim)?;
    let (kernels, c0) = bilinear::split_by_direction(&r)?;
    if c0.norm() > 1e-10 {
        return Err(Error::Precondition(format!(
            "stacked column is not inner: constant remainder {c0}"
        )));
    }
    kernels
        .iter()
        .map(|k| {
            if k.is_zero() {
                return Ok(Vec::new());
            }
            let (idx, g) = bilinear::kernel_gram(k);
            let h = certify::psd_factor(&g, psd_tol)?;
            Ok(bilinear::rows_times_monomials(&h, &idx, dim))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{agler_nonneg, psd_factor, PSD_TOL};
    use crate::fixtures;
    use crate::symmetry::DilationSetup;

    fn b111_dec() -> AglerDecomposition {
        agler_nonneg(&fixtures::b111(), &DilationSetup::dyadic(2).unwrap()).unwrap()
    }

    #[test]
    fn b111_reference_h0_reproduces_reference_block() {
        let r = build_realization(&b111_dec(), &fixtures::b111_h0()).unwrap();
        assert_eq!(r.state_blocks, vec![1, 2]);
        assert!(linalg::max_abs(&(r.block_matrix() - fixtures::b111_abcd())) < 1e-15);
        assert!(r.isometry_defect() < 1e-15);
        assert!(r.nilpotency_residual() < 1e-15);
    }

    #[test]
    fn b111_transfer_reproduces_inner_column() {
        let dec = b111_dec();
        let h = psd_factor(&dec.a0, PSD_TOL).unwrap();
        let r = build_realization(&dec, &h).unwrap();
        assert!(r.isometry_defect() < 1e-12);
        let f = r.transfer_expand().unwrap();
        let mut expect = dec.fp();
        expect.extend(bilinear::rows_times_monomials(&h, &dec.base_indices, 2));
        for (i, e) in expect.iter().enumerate() {
            assert!(f.get(i, 0).approx_eq(e, 1e-12), "row {i}");
        }
    }

    #[test]
    fn haar_has_empty_state() {
        let dec = agler_nonneg(&fixtures::haar(), &DilationSetup::dyadic(1).unwrap()).unwrap();
        let h = psd_factor(&dec.a0, PSD_TOL).unwrap();
        let r = build_realization(&dec, &h).unwrap();
        assert_eq!(r.states(), 0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.a[(0, 0)].re - s).abs() < 1e-15 && (r.a[(1, 0)].re - s).abs() < 1e-15);
        assert!(r.isometry_defect() < 1e-15);
        let f = r.transfer_expand().unwrap();
        assert_eq!(f.get(0, 0), &LaurentPoly::real_constant(1, s));
    }

    #[test]
    fn bspline_square_single_state() {
        let dec = agler_nonneg(&fixtures::bspline(2), &DilationSetup::dyadic(1).unwrap()).unwrap();
        let h = psd_factor(&dec.a0, PSD_TOL).unwrap();
        let r = build_realization(&dec, &h).unwrap();
        assert_eq!(r.states(), 1);
        assert_eq!(r.d[(0, 0)], czero());
        assert_eq!(r.block_matrix().shape(), (4, 2));
        assert!(r.isometry_defect() < 1e-12);
        let f = r.transfer_expand().unwrap();
        let s2 = 2f64.sqrt();
        let expect = [
            LaurentPoly::from_real(1, &[(&[0], s2 / 4.0), (&[1], s2 / 4.0)]),
            LaurentPoly::real_constant(1, s2 / 2.0),
            LaurentPoly::from_real(1, &[(&[0], 1.0 / (2.0 * s2)), (&[1], -1.0 / (2.0 * s2))]),
        ];
        for (i, e) in expect.iter().enumerate() {
            assert!(f.get(i, 0).approx_eq(e, 1e-12), "row {i}: {:?}", f.get(i, 0));
        }
        let t = r.trim_to_contractive(2).unwrap();
        assert!(!t.isometric);
        assert_eq!(t.transfer_expand().unwrap().rows(), 2);
        assert!(r.trim_to_contractive(4).is_err());
        assert_eq!(r.trim_to_contractive(3).unwrap().outputs(), 3);
    }

    #[test]
    fn b111a_general_solver_matches_reference_block() {
        let s = DilationSetup::dyadic(2).unwrap();
        let fp = crate::symmetry::polyphase_split(&fixtures::b111(), &s)
            .unwrap()
            .scaled()
            .components;
        let mut rows = fp;
        rows.extend(fixtures::b111a_q0().column_entries(0));
        let blocks = direction_blocks(&rows, 2, PSD_TOL).unwrap();
        assert_eq!(blocks.iter().map(Vec::len).collect::<Vec<_>>(), vec![1, 2]);
        let r = realize_from_blocks(&rows, &blocks, 2).unwrap();
        assert!(linalg::max_abs(&(r.block_matrix() - fixtures::b111a_abcd())) < 1e-12);
        let f = r.transfer_expand().unwrap();
        for (i, e) in rows.iter().enumerate() {
            assert!(f.get(i, 0).approx_eq(e, 1e-12));
        }
    }
}
