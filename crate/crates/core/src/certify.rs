//! Sum-of-hermitian-squares certificates for the sub-QMF defect.
//!
//! All certificate polynomials live in `ξ = z^M`.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::bilinear;
use crate::error::{Error, Result};
use crate::laurent::{LaurentPoly, MultiIndex};
use crate::linalg::{self, CMatrix};
use crate::symmetry::{self, DilationSetup};
use crate::univariate;

/// Relative eigenvalue threshold for rank decisions.
pub const PSD_TOL: f64 = 1e-10;
/// Tolerance on `p̃_χ(1,…,1) = 1/m`.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Tolerance for accepting an input certificate.
pub const CERT_TOL: f64 = 1e-10;

const COEFF_TOL: f64 = 1e-14;

/// `1 − f_p(η)*f_p(ξ) = v(η)*A₀v(ξ) + Σ_j (1 − ξ_j η̄_j) v_j(η)*A_j v_j(ξ)`.
///
/// Index sets use full `d`-variable exponents; entries of `dir_indices[j]`
/// vanish beyond coordinate `j`.
#[derive(Clone, Debug)]
pub struct AglerDecomposition {
    pub base_indices: Vec<MultiIndex>,
    pub a0: CMatrix,
    pub dir_indices: Vec<Vec<MultiIndex>>,
    pub adiag: Vec<Vec<f64>>,
    pub setup: DilationSetup,
    pub source_mask: LaurentPoly,
    pub pruned: bool,
}

/// Polyphase coefficient `p(α_χ + Mα)` lookup.
struct Phases {
    comps: Vec<LaurentPoly>,
}

impl Phases {
    fn at(&self, chi: usize, alpha: &MultiIndex) -> f64 {
        self.comps[chi].coeff(&alpha.0).re
    }

    fn column_sum(&self, alpha: &MultiIndex) -> f64 {
        (0..self.comps.len()).map(|chi| self.at(chi, alpha)).sum()
    }
}

/// `{0..n₁} × … × {0..n_j} × {0}^{d−j}` in term order.
fn box_indices(n: &[i64], j: usize) -> Vec<MultiIndex> {
    let d = n.len();
    let mut out = vec![MultiIndex::zero(d)];
    for (k, &nk) in n.iter().enumerate().take(j) {
        let mut next = Vec::with_capacity(out.len() * (nk as usize + 1));
        for v in 0..=nk {
            for base in &out {
                let mut e = base.clone();
                e.0[k] = v;
                next.push(e);
            }
        }
        out = next;
    }
    out.sort();
    out
}

/// Decomposition for masks with non-negative coefficients.
pub fn agler_nonneg(p: &LaurentPoly, setup: &DilationSetup) -> Result<AglerDecomposition> {
    agler_nonneg_with(p, setup, true)
}

/// As [`agler_nonneg`]; `prune = false` keeps the full boxes `I_j`.
pub fn agler_nonneg_with(p: &LaurentPoly, setup: &DilationSetup, prune: bool) -> Result<AglerDecomposition> {
    let d = setup.dim();
    if p.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: p.dim(),
        });
    }
    for (e, c) in p.terms() {
        if c.im.abs() > COEFF_TOL || c.re < -COEFF_TOL {
            return Err(Error::Precondition(format!(
                "coefficient at {e:?} is {c}, not real and non-negative"
            )));
        }
        if !e.is_nonnegative() {
            return Err(Error::Precondition(format!("negative exponent {e:?}")));
        }
    }
    let m = setup.m();
    let phases = Phases {
        comps: symmetry::polyphase_split(p, setup)?.components,
    };
    let bad: Vec<String> = phases
        .comps
        .iter()
        .enumerate()
        .filter_map(|(chi, c)| {
            let s = c.sum_coeffs().re;
            ((s - 1.0 / m as f64).abs() > NORMALIZATION_TOL).then(|| format!("χ={chi}: sum {s}"))
        })
        .collect();
    if !bad.is_empty() {
        return Err(Error::Precondition(format!(
            "polyphase components must each sum to 1/{m}; {}",
            bad.join(", ")
        )));
    }

    let base: BTreeSet<MultiIndex> = phases.comps.iter().flat_map(|c| c.exponents().cloned()).collect();
    let base_indices: Vec<MultiIndex> = if base.is_empty() {
        vec![MultiIndex::zero(d)]
    } else {
        base.into_iter().collect()
    };

    let nb = base_indices.len();
    let mf = m as f64;
    let mut a0 = DMatrix::<f64>::zeros(nb, nb);
    for chi in 0..m {
        let vals: Vec<f64> = base_indices.iter().map(|a| phases.at(chi, a)).collect();
        for i in 0..nb {
            for j in 0..nb {
                a0[(i, j)] += if i == j {
                    vals[i] - mf * vals[i] * vals[i]
                } else {
                    -mf * vals[i] * vals[j]
                };
            }
        }
    }

    let n: Vec<i64> = (0..d)
        .map(|k| base_indices.iter().map(|a| a.0[k]).max().unwrap_or(0))
        .collect();
    let mut dir_indices = Vec::with_capacity(d);
    let mut adiag = Vec::with_capacity(d);
    for j in 0..d {
        let mut idx = Vec::new();
        let mut diag = Vec::new();
        for beta in box_indices(&n, j + 1) {
            let value: f64 = base_indices
                .iter()
                .filter(|a| (0..j).all(|k| a.0[k] == beta.0[k]) && a.0[j] > beta.0[j])
                .map(|a| phases.column_sum(a))
                .sum();
            if !prune || value > COEFF_TOL {
                idx.push(beta);
                diag.push(value);
            }
        }
        dir_indices.push(idx);
        adiag.push(diag);
    }

    Ok(AglerDecomposition {
        base_indices,
        a0: a0.map(|x| Complex64::new(x, 0.0)),
        dir_indices,
        adiag,
        setup: setup.clone(),
        source_mask: p.clone(),
        pruned: prune,
    })
}

impl AglerDecomposition {
    /// `f_p` components in `ξ`.
    pub fn fp(&self) -> Vec<LaurentPoly> {
        symmetry::polyphase_split(&self.source_mask, &self.setup)
            .expect("validated at construction")
            .scaled()
            .components
    }

    /// Sizes `|I_j|`.
    pub fn state_blocks(&self) -> Vec<usize> {
        self.dir_indices.iter().map(Vec::len).collect()
    }

    /// Largest coefficient of the bilinear identity's residual.
    pub fn identity_residual(&self) -> f64 {
        let d = self.setup.dim();
        let lhs = &LaurentPoly::one(2 * d) - &bilinear::gram_kernel(&self.fp(), d).expect("dims agree");
        let mut rhs = bilinear::quadratic_kernel(&self.base_indices, &self.a0).expect("square");
        for (j, (idx, diag)) in self.dir_indices.iter().zip(&self.adiag).enumerate() {
            if idx.is_empty() {
                continue;
            }
            let a = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                diag.len(),
                diag.iter().map(|x| Complex64::new(*x, 0.0)),
            ));
            let k = bilinear::quadratic_kernel(idx, &a).expect("square");
            rhs = &rhs + &bilinear::times_one_minus(&k, j);
        }
        lhs.max_diff(&rhs)
    }

    /// `max_χ max_i (A_{χ,0}(i,i) − Σ_{k≠i} |A_{χ,0}(i,k)|)` is `≥ 0` for
    /// weak diagonal dominance; returns the worst row margin.
    pub fn min_dominance_margin(&self) -> f64 {
        let m = self.setup.m();
        let mf = m as f64;
        let comps = symmetry::polyphase_split(&self.source_mask, &self.setup)
            .expect("validated")
            .components;
        let mut worst = f64::INFINITY;
        for c in &comps {
            let vals: Vec<f64> = self.base_indices.iter().map(|a| c.coeff(&a.0).re).collect();
            for (i, &vi) in vals.iter().enumerate() {
                let diag = vi - mf * vi * vi;
                let off: f64 = vals
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != i)
                    .map(|(_, &vk)| (mf * vi * vk).abs())
                    .sum();
                worst = worst.min(diag - off);
            }
        }
        worst
    }
}

/// Rows `√λ_k v_k*` for the eigenvalues above `tol·max(λ_max, 1)`, descending.
pub fn psd_factor(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!("{}x{} is not square", a.nrows(), a.ncols())));
    }
    let norm = linalg::max_abs(a);
    let herm = linalg::max_abs(&(a - a.adjoint()));
    if herm > tol * norm.max(1.0) {
        return Err(Error::Precondition(format!(
            "matrix is not hermitian (defect {herm:e})"
        )));
    }
    let n = a.nrows();
    if n == 0 || norm == 0.0 {
        return Ok(CMatrix::zeros(0, n));
    }
    let (vals, vecs) = linalg::hermitian_eigen(a);
    let scale = vals.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -tol * scale {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            threshold: tol * scale,
        });
    }
    let keep: Vec<usize> = (0..n).filter(|&k| vals[k] > tol * scale).collect();
    let mut h = CMatrix::zeros(keep.len(), n);
    for (row, &k) in keep.iter().enumerate() {
        let s = vals[k].sqrt();
        for i in 0..n {
            h[(row, i)] = vecs[(i, k)].conj() * s;
        }
    }
    Ok(h)
}

/// `target = Σ_j h_j* h_j` on the torus.
#[derive(Clone, Debug)]
pub struct SosCertificate {
    pub target: LaurentPoly,
    pub factors: Vec<LaurentPoly>,
    pub length: usize,
}

impl SosCertificate {
    pub fn new(target: LaurentPoly, factors: Vec<LaurentPoly>) -> Self {
        let factors: Vec<LaurentPoly> = factors.into_iter().filter(|f| !f.is_zero()).collect();
        let length = factors.len();
        SosCertificate {
            target,
            factors,
            length,
        }
    }

    pub fn sum_of_squares(&self) -> LaurentPoly {
        self.factors
            .iter()
            .fold(LaurentPoly::zero(self.target.dim()), |acc, h| {
                &acc + &(&h.conj_reflect() * h)
            })
    }

    pub fn residual(&self) -> f64 {
        self.target.max_diff(&self.sum_of_squares())
    }

    pub fn report(&self) -> CertificateReport {
        CertificateReport {
            length: self.length,
            factors: self.factors.clone(),
            residual: self.residual(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub length: usize,
    pub factors: Vec<LaurentPoly>,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SosReport {
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

pub fn verify_sos(cert: &SosCertificate, tol: f64) -> SosReport {
    let residual = cert.residual();
    SosReport {
        residual,
        tol,
        pass: residual <= tol,
    }
}

/// Factors `H₀ v(ξ)` with `H₀ = psd_factor(A₀)`.
pub fn certificate_from_agler(dec: &AglerDecomposition) -> Result<SosCertificate> {
    let h = psd_factor(&dec.a0, PSD_TOL)?;
    certificate_from_rows(dec, &h)
}

/// Certificate from any `H` with `H*H = A₀`.
pub fn certificate_from_rows(dec: &AglerDecomposition, h: &CMatrix) -> Result<SosCertificate> {
    if h.ncols() != dec.base_indices.len() {
        return Err(Error::Shape(format!(
            "factor has {} columns for {} base indices",
            h.ncols(),
            dec.base_indices.len()
        )));
    }
    let d = dec.setup.dim();
    let factors = bilinear::rows_times_monomials(h, &dec.base_indices, d);
    let target = symmetry::defect_xi(&dec.source_mask, &dec.setup)?;
    Ok(SosCertificate::new(target, factors))
}

fn require_verified(cert: &SosCertificate, what: &str) -> Result<()> {
    let r = cert.residual();
    if r > CERT_TOL {
        return Err(Error::Verification {
            what: what.into(),
            residual: r,
            tol: CERT_TOL,
        });
    }
    Ok(())
}

/// Certificate for `p·q` from one for `p` and a certificate
/// `Σ τ_j*τ_j = 1 − q*q` in `z`.
pub fn sos_product(
    cert_p: &SosCertificate,
    cert_q: &SosCertificate,
    p: &LaurentPoly,
    q: &LaurentPoly,
    setup: &DilationSetup,
) -> Result<SosCertificate> {
    require_verified(cert_p, "certificate for p")?;
    require_verified(cert_q, "certificate for 1 - q*q")?;
    let expected_p = symmetry::defect_xi(p, setup)?;
    let gap = expected_p.max_diff(&cert_p.target);
    if gap > CERT_TOL {
        return Err(Error::Verification {
            what: "certificate target vs defect of p".into(),
            residual: gap,
            tol: CERT_TOL,
        });
    }
    let one_minus = &LaurentPoly::one(q.dim()) - &(&q.conj_reflect() * q);
    let gap = one_minus.max_diff(&cert_q.target);
    if gap > CERT_TOL {
        return Err(Error::Verification {
            what: "certificate target vs 1 - q*q".into(),
            residual: gap,
            tol: CERT_TOL,
        });
    }
    let mut factors = cert_p.factors.clone();
    for tau in &cert_q.factors {
        let v = symmetry::polyphase_split(&(p * tau), setup)?.scaled();
        factors.extend(v.components);
    }
    let target = symmetry::defect_xi(&(p * q), setup)?;
    Ok(SosCertificate::new(target, factors))
}

/// One factor of a product over a direct-product decomposition of the
/// dual group; `group` lists dual-representative indices.
#[derive(Clone, Debug)]
pub struct TelescopeFactor {
    pub mask: LaurentPoly,
    pub group: Vec<usize>,
}

/// Writes `t` in `ξ` as `T(ξ^φ)` for a univariate `T` and primitive `φ`.
fn as_univariate(t: &LaurentPoly) -> Result<(LaurentPoly, Vec<i64>)> {
    let d = t.dim();
    let Some(first) = t.exponents().find(|e| !e.is_zero()) else {
        return Ok((LaurentPoly::constant(1, t.coeff(&vec![0; d])), {
            let mut v = vec![0; d];
            v[0] = 1;
            v
        }));
    };
    let g = first.0.iter().fold(0i64, |g, &x| gcd(g, x.abs()));
    let mut phi: Vec<i64> = first.0.iter().map(|x| x / g).collect();
    if phi.iter().find(|x| **x != 0).is_some_and(|x| *x < 0) {
        phi.iter_mut().for_each(|x| *x = -*x);
    }
    let lead = phi.iter().position(|x| *x != 0).expect("nonzero");
    let mut terms = Vec::new();
    for (e, c) in t.terms() {
        let k = e.0[lead] / phi[lead];
        if e.0.iter().zip(&phi).any(|(a, b)| *a != k * b) {
            return Err(Error::Precondition(format!(
                "{t:?} is not a polynomial in a single monomial"
            )));
        }
        terms.push((vec![k], *c));
    }
    Ok((LaurentPoly::from_terms(1, terms)?, phi))
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Checks that `G_1 × … × G_r → G` is bijective.
fn check_product_groups(groups: &[Vec<usize>], setup: &DilationSetup) -> Result<()> {
    let mut reached: BTreeSet<usize> = BTreeSet::from([0]);
    let mut count = 1usize;
    for g in groups {
        count *= g.len();
        let mut next = BTreeSet::new();
        for &a in &reached {
            for &s in g {
                next.insert(setup.compose_dual(a, s));
            }
        }
        reached = next;
    }
    if count != setup.m() || reached.len() != setup.m() {
        return Err(Error::Precondition(format!(
            "subgroups of orders {:?} do not factor the dual group of order {}",
            groups.iter().map(Vec::len).collect::<Vec<_>>(),
            setup.m()
        )));
    }
    Ok(())
}

/// Telescoped certificate for `Π p_j` with
/// `1 − t₁⋯t_r = Σ_j t₁⋯t_{j−1}(1 − t_j)`, `t_j = Σ_{σ∈G_j} |p_j^σ|²`.
pub fn sos_telescope(factors: &[TelescopeFactor], setup: &DilationSetup) -> Result<SosCertificate> {
    let d = setup.dim();
    let groups: Vec<Vec<usize>> = factors.iter().map(|f| f.group.clone()).collect();
    check_product_groups(&groups, setup)?;
    for (j, f) in factors.iter().enumerate() {
        for (k, other) in factors.iter().enumerate() {
            if k == j {
                continue;
            }
            for &s in &other.group {
                let shifted = symmetry::shift_action(&f.mask, s, setup)?;
                if shifted.max_diff(&f.mask) > COEFF_TOL {
                    return Err(Error::Precondition(format!(
                        "factor {j} is not invariant under the subgroup of factor {k}"
                    )));
                }
            }
        }
    }

    let mut prefix = LaurentPoly::one(d);
    let mut out = Vec::new();
    for f in factors {
        let mut t = LaurentPoly::zero(d);
        for &s in &f.group {
            let ps = symmetry::shift_action(&f.mask, s, setup)?;
            t = &t + &(&ps.conj_reflect() * &ps);
        }
        let t_xi = symmetry::to_xi(&t, setup)?;
        let (t_u, phi) = as_univariate(&t_xi)?;
        let rest_u = &LaurentPoly::one(1) - &t_u;
        if !rest_u.is_zero() {
            let h = univariate::fejer_riesz(&rest_u)?.factor;
            out.push(&prefix * &h.substitute_monomial(&phi)?);
        }
        let s = univariate::fejer_riesz(&t_u)?.factor;
        prefix = &prefix * &s.substitute_monomial(&phi)?;
    }
    let product = factors.iter().fold(LaurentPoly::one(d), |acc, f| &acc * &f.mask);
    let target = symmetry::defect_xi(&product, setup)?;
    Ok(SosCertificate::new(target, out))
}
