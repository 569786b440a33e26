//! Sparse multivariate Laurent polynomials with complex coefficients.
//!
//! A [`LaurentPoly`] stores finitely many nonzero coefficients keyed by an
//! integer exponent vector. The same type carries masks, sub-QMF defects,
//! certificate factors and framelets, as well as bilinear kernels in the
//! doubled variable set `(ξ, η̄)` (see [`crate::bilinear`]).
//!
//! Terms are ordered by [`MultiIndex`]'s ordering, which compares the last
//! coordinate first: in two variables the order is `1, ξ₁, ξ₁², …, ξ₂, ξ₁ξ₂, …`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative magnitude below which coefficients are dropped after arithmetic.
pub const PRUNE_REL: f64 = 1e-14;

/// Default tolerance for approximate polynomial equality.
pub const DEFAULT_EQ_TOL: f64 = 1e-12;

/// Integer exponent vector `α` of a monomial `z^α`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<i64>);

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn unit(dim: usize, var: usize) -> Self {
        let mut v = vec![0; dim];
        v[var] = 1;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn neg(&self) -> Self {
        MultiIndex(self.0.iter().map(|a| -a).collect())
    }

    pub fn add(&self, other: &MultiIndex) -> Self {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &MultiIndex) -> Self {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn total_degree(&self) -> i64 {
        self.0.iter().sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&a| a >= 0)
    }
}

impl From<Vec<i64>> for MultiIndex {
    fn from(v: Vec<i64>) -> Self {
        MultiIndex(v)
    }
}

impl From<&[i64]> for MultiIndex {
    fn from(v: &[i64]) -> Self {
        MultiIndex(v.to_vec())
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        // last coordinate is the most significant
        self.0
            .iter()
            .rev()
            .cmp(other.0.iter().rev())
            .then(self.0.len().cmp(&other.0.len()))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Sparse Laurent polynomial in `dim` variables.
#[derive(Clone, PartialEq)]
pub struct LaurentPoly {
    dim: usize,
    terms: BTreeMap<MultiIndex, Complex64>,
}

fn prune_map(terms: &mut BTreeMap<MultiIndex, Complex64>) {
    let max = terms.values().map(|c| c.norm()).fold(0.0, f64::max);
    let threshold = PRUNE_REL * max.max(1.0);
    terms.retain(|_, c| c.norm() >= threshold && *c != Complex64::new(0.0, 0.0));
}

impl LaurentPoly {
    pub fn zero(dim: usize) -> Self {
        LaurentPoly {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: Complex64) -> Self {
        Self::monomial(MultiIndex::zero(dim), c)
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, Complex64::new(1.0, 0.0))
    }

    pub fn real_constant(dim: usize, c: f64) -> Self {
        Self::constant(dim, Complex64::new(c, 0.0))
    }

    pub fn monomial(exp: impl Into<MultiIndex>, c: Complex64) -> Self {
        let exp = exp.into();
        let dim = exp.dim();
        let mut terms = BTreeMap::new();
        if c != Complex64::new(0.0, 0.0) {
            terms.insert(exp, c);
        }
        LaurentPoly { dim, terms }
    }

    /// The variable `z_var` as a polynomial.
    pub fn var(dim: usize, var: usize) -> Self {
        Self::monomial(MultiIndex::unit(dim, var), Complex64::new(1.0, 0.0))
    }

    /// Builds a polynomial from `(exponent, coefficient)` pairs, summing
    /// repeated exponents and pruning.
    pub fn from_terms<I, E>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (E, Complex64)>,
        E: Into<MultiIndex>,
    {
        let mut map = BTreeMap::new();
        for (e, c) in terms {
            let e = e.into();
            if e.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: e.dim(),
                });
            }
            *map.entry(e).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        prune_map(&mut map);
        Ok(LaurentPoly { dim, terms: map })
    }

    /// Real-coefficient convenience constructor; panics on a dimension mismatch.
    pub fn from_real(dim: usize, terms: &[(&[i64], f64)]) -> Self {
        Self::from_terms(
            dim,
            terms
                .iter()
                .map(|(e, c)| (MultiIndex::from(*e), Complex64::new(*c, 0.0))),
        )
        .expect("exponent length must equal dim")
    }

    /// Stores coefficients verbatim, dropping only exact zeros. Used where
    /// coefficients are moved rather than computed (polyphase split/merge).
    pub(crate) fn from_map_exact(dim: usize, mut terms: BTreeMap<MultiIndex, Complex64>) -> Self {
        terms.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        LaurentPoly { dim, terms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.terms.iter()
    }

    pub fn exponents(&self) -> impl Iterator<Item = &MultiIndex> {
        self.terms.keys()
    }

    pub fn coeff(&self, exp: &[i64]) -> Complex64 {
        self.terms.get(&MultiIndex::from(exp)).copied().unwrap_or_default()
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn check_dim(&self, other: &LaurentPoly) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &LaurentPoly) -> Result<LaurentPoly> {
        self.check_dim(other)?;
        let mut terms = self.terms.clone();
        for (e, c) in &other.terms {
            *terms.entry(e.clone()).or_default() += c;
        }
        prune_map(&mut terms);
        Ok(LaurentPoly { dim: self.dim, terms })
    }

    pub fn try_sub(&self, other: &LaurentPoly) -> Result<LaurentPoly> {
        self.check_dim(other)?;
        let mut terms = self.terms.clone();
        for (e, c) in &other.terms {
            *terms.entry(e.clone()).or_default() -= c;
        }
        prune_map(&mut terms);
        Ok(LaurentPoly { dim: self.dim, terms })
    }

    /// Product `a·b`: the coefficient at `γ` is `Σ_{α+β=γ} a(α) b(β)`.
    pub fn try_mul(&self, other: &LaurentPoly) -> Result<LaurentPoly> {
        self.check_dim(other)?;
        let mut terms: BTreeMap<MultiIndex, Complex64> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                *terms.entry(ea.add(eb)).or_default() += ca * cb;
            }
        }
        prune_map(&mut terms);
        Ok(LaurentPoly { dim: self.dim, terms })
    }

    pub fn scale(&self, s: Complex64) -> LaurentPoly {
        let mut terms: BTreeMap<_, _> = self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect();
        prune_map(&mut terms);
        LaurentPoly { dim: self.dim, terms }
    }

    pub fn scale_real(&self, s: f64) -> LaurentPoly {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn pow(&self, k: u32) -> LaurentPoly {
        let mut acc = LaurentPoly::one(self.dim);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Torus adjoint `p*`: coefficient of `-α` is the conjugate of the
    /// coefficient of `α`, so `p*(z) = conj(p(z))` on the torus.
    pub fn conj_reflect(&self) -> LaurentPoly {
        LaurentPoly {
            dim: self.dim,
            terms: self.terms.iter().map(|(e, c)| (e.neg(), c.conj())).collect(),
        }
    }

    /// Conjugates the coefficients only: `p̄(ξ) = p(ξ̄)*` as a polynomial in `ξ`.
    pub fn conj_coeffs(&self) -> LaurentPoly {
        LaurentPoly {
            dim: self.dim,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c.conj())).collect(),
        }
    }

    /// `Σ p(α) z^α`; fails if a coordinate is zero where a negative power occurs.
    pub fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: z.len(),
            });
        }
        let mut sum = Complex64::new(0.0, 0.0);
        for (e, c) in &self.terms {
            let mut t = *c;
            for (var, (&a, &zv)) in e.0.iter().zip(z).enumerate() {
                if a < 0 && zv == Complex64::new(0.0, 0.0) {
                    return Err(Error::ZeroCoordinate { var });
                }
                t *= zv.powi(a as i32);
            }
            sum += t;
        }
        Ok(sum)
    }

    /// Value at `(1, …, 1)`.
    pub fn sum_coeffs(&self) -> Complex64 {
        self.terms.values().sum()
    }

    /// Largest coefficient magnitude of `self − other`.
    pub fn max_diff(&self, other: &LaurentPoly) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let mut m: f64 = 0.0;
        for (e, c) in &self.terms {
            m = m.max((c - other.terms.get(e).copied().unwrap_or_default()).norm());
        }
        for (e, c) in &other.terms {
            if !self.terms.contains_key(e) {
                m = m.max(c.norm());
            }
        }
        m
    }

    pub fn approx_eq(&self, other: &LaurentPoly, eps: f64) -> bool {
        self.dim == other.dim && self.max_diff(other) <= eps
    }

    /// Largest `|c_{−α} − conj(c_α)|`; zero for polynomials real on the torus.
    pub fn hermitian_defect(&self) -> f64 {
        self.max_diff(&self.conj_reflect())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    /// Sum of exponents, maximised over the support; `None` for zero.
    pub fn total_degree(&self) -> Option<i64> {
        self.terms.keys().map(|e| e.total_degree()).max()
    }

    /// Componentwise minimum and maximum exponent over the support.
    pub fn support_box(&self) -> Option<(Vec<i64>, Vec<i64>)> {
        let mut it = self.terms.keys();
        let first = it.next()?;
        let mut lo = first.0.clone();
        let mut hi = first.0.clone();
        for e in it {
            for k in 0..self.dim {
                lo[k] = lo[k].min(e.0[k]);
                hi[k] = hi[k].max(e.0[k]);
            }
        }
        Some((lo, hi))
    }

    /// Applies an exponent map; coefficients landing on the same exponent add.
    pub fn map_exponents<F>(&self, new_dim: usize, f: F) -> LaurentPoly
    where
        F: Fn(&MultiIndex) -> MultiIndex,
    {
        let mut terms: BTreeMap<MultiIndex, Complex64> = BTreeMap::new();
        for (e, c) in &self.terms {
            let ne = f(e);
            debug_assert_eq!(ne.dim(), new_dim);
            *terms.entry(ne).or_default() += c;
        }
        prune_map(&mut terms);
        LaurentPoly { dim: new_dim, terms }
    }

    /// For a univariate `self(u)`, returns `self(x^θ)` in `θ.len()` variables.
    pub fn substitute_monomial(&self, theta: &[i64]) -> Result<LaurentPoly> {
        if self.dim != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: self.dim,
            });
        }
        Ok(self.map_exponents(theta.len(), |e| MultiIndex(theta.iter().map(|t| t * e.0[0]).collect())))
    }

    /// Multiplies every coefficient `c_α` by `w(α)`; exact when `w` returns
    /// exact values.
    pub fn map_coeffs<F>(&self, f: F) -> LaurentPoly
    where
        F: Fn(&MultiIndex, Complex64) -> Complex64,
    {
        let mut terms: BTreeMap<MultiIndex, Complex64> =
            self.terms.iter().map(|(e, c)| (e.clone(), f(e, *c))).collect();
        prune_map(&mut terms);
        LaurentPoly { dim: self.dim, terms }
    }

    /// Drops terms failing the predicate, without touching the rest.
    pub fn filter_terms<F>(&self, keep: F) -> LaurentPoly
    where
        F: Fn(&MultiIndex, &Complex64) -> bool,
    {
        LaurentPoly {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|(e, c)| keep(e, c))
                .map(|(e, c)| (e.clone(), *c))
                .collect(),
        }
    }

    /// Drops coefficients with magnitude `<= tol`.
    pub fn chop(&self, tol: f64) -> LaurentPoly {
        self.filter_terms(|_, c| c.norm() > tol)
    }
}

impl fmt::Debug for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if c.im == 0.0 {
                write!(f, "{}", c.re)?;
            } else {
                write!(f, "({}{:+}i)", c.re, c.im)?;
            }
            if !e.is_zero() {
                write!(f, "·z^{:?}", e.0)?;
            }
        }
        Ok(())
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $try:ident) => {
        impl $tr<&LaurentPoly> for &LaurentPoly {
            type Output = LaurentPoly;
            fn $m(self, rhs: &LaurentPoly) -> LaurentPoly {
                self.$try(rhs)
                    .expect("dimension mismatch in polynomial arithmetic")
            }
        }
        impl $tr<LaurentPoly> for LaurentPoly {
            type Output = LaurentPoly;
            fn $m(self, rhs: LaurentPoly) -> LaurentPoly {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&LaurentPoly> for LaurentPoly {
            type Output = LaurentPoly;
            fn $m(self, rhs: &LaurentPoly) -> LaurentPoly {
                (&self).$m(rhs)
            }
        }
    };
}

binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);
binop!(Mul, mul, try_mul);

impl Neg for &LaurentPoly {
    type Output = LaurentPoly;
    fn neg(self) -> LaurentPoly {
        LaurentPoly {
            dim: self.dim,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    exp: Vec<i64>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct PolyJson {
    dim: usize,
    terms: Vec<TermJson>,
}

impl Serialize for LaurentPoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyJson {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| TermJson {
                    exp: e.0.clone(),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LaurentPoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = PolyJson::deserialize(d)?;
        if raw.dim == 0 {
            return Err(D::Error::custom("dim must be positive"));
        }
        let mut map = BTreeMap::new();
        for t in raw.terms {
            if t.exp.len() != raw.dim {
                return Err(D::Error::custom(format!(
                    "exponent {:?} has length {}, expected {}",
                    t.exp,
                    t.exp.len(),
                    raw.dim
                )));
            }
            if !t.re.is_finite() || !t.im.is_finite() {
                return Err(D::Error::custom("non-finite coefficient"));
            }
            if map
                .insert(MultiIndex(t.exp.clone()), Complex64::new(t.re, t.im))
                .is_some()
            {
                return Err(D::Error::custom(format!("duplicate exponent {:?}", t.exp)));
            }
        }
        prune_map(&mut map);
        Ok(LaurentPoly {
            dim: raw.dim,
            terms: map,
        })
    }
}

/// Dense grid of Laurent polynomials sharing one `dim`; column vectors have
/// `cols == 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    dim: usize,
    entries: Vec<LaurentPoly>,
}

impl PolyMatrix {
    pub fn zeros(rows: usize, cols: usize, dim: usize) -> Self {
        PolyMatrix {
            rows,
            cols,
            dim,
            entries: vec![LaurentPoly::zero(dim); rows * cols],
        }
    }

    pub fn identity(n: usize, dim: usize) -> Self {
        let mut m = Self::zeros(n, n, dim);
        for i in 0..n {
            m.set(i, i, LaurentPoly::one(dim));
        }
        m
    }

    pub fn from_rows(dim: usize, rows: Vec<Vec<LaurentPoly>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::Shape("ragged rows".into()));
            }
            for p in row {
                if p.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: p.dim(),
                    });
                }
                entries.push(p);
            }
        }
        Ok(PolyMatrix {
            rows: r,
            cols: c,
            dim,
            entries,
        })
    }

    pub fn column(dim: usize, entries: Vec<LaurentPoly>) -> Result<Self> {
        Self::from_rows(dim, entries.into_iter().map(|p| vec![p]).collect())
    }

    /// Constant polynomial matrix with the given numeric entries.
    pub fn from_const(dim: usize, m: &DMatrix<Complex64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols(), dim);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.set(i, j, LaurentPoly::constant(dim, m[(i, j)]));
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &LaurentPoly {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: LaurentPoly) {
        assert_eq!(p.dim(), self.dim);
        self.entries[i * self.cols + j] = p;
    }

    pub fn column_entries(&self, j: usize) -> Vec<LaurentPoly> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn row_entries(&self, i: usize) -> Vec<LaurentPoly> {
        (0..self.cols).map(|j| self.get(i, j).clone()).collect()
    }

    pub fn try_mul(&self, other: &PolyMatrix) -> Result<PolyMatrix> {
        if self.cols != other.rows || self.dim != other.dim {
            return Err(Error::Shape(format!(
                "{}x{} (dim {}) times {}x{} (dim {})",
                self.rows, self.cols, self.dim, other.rows, other.cols, other.dim
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols, self.dim);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = LaurentPoly::zero(self.dim);
                for k in 0..self.cols {
                    let (a, b) = (self.get(i, k), other.get(k, j));
                    if !a.is_zero() && !b.is_zero() {
                        acc = &acc + &(a * b);
                    }
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    fn zip_with<F>(&self, other: &PolyMatrix, f: F) -> Result<PolyMatrix>
    where
        F: Fn(&LaurentPoly, &LaurentPoly) -> LaurentPoly,
    {
        if self.rows != other.rows || self.cols != other.cols || self.dim != other.dim {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(PolyMatrix {
            rows: self.rows,
            cols: self.cols,
            dim: self.dim,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| f(a, b)).collect(),
        })
    }

    pub fn try_add(&self, other: &PolyMatrix) -> Result<PolyMatrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn try_sub(&self, other: &PolyMatrix) -> Result<PolyMatrix> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Torus adjoint: transpose with [`LaurentPoly::conj_reflect`] entries.
    pub fn adjoint(&self) -> PolyMatrix {
        let mut out = Self::zeros(self.cols, self.rows, self.dim);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj_reflect());
            }
        }
        out
    }

    /// Polynomial adjoint `P*(ξ) = P(ξ̄)*`: transpose with conjugated coefficients.
    pub fn conj_transpose_coeffs(&self) -> PolyMatrix {
        let mut out = Self::zeros(self.cols, self.rows, self.dim);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj_coeffs());
            }
        }
        out
    }

    pub fn select_rows(&self, rows: std::ops::Range<usize>) -> PolyMatrix {
        let mut out = Self::zeros(rows.len(), self.cols, self.dim);
        for (oi, i) in rows.enumerate() {
            for j in 0..self.cols {
                out.set(oi, j, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.entries.iter().map(|p| p.max_abs()).fold(0.0, f64::max)
    }

    pub fn max_diff(&self, other: &PolyMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.max_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn eval(&self, z: &[Complex64]) -> Result<DMatrix<Complex64>> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self.get(i, j).eval(z)?;
            }
        }
        Ok(out)
    }

    pub fn entries(&self) -> impl Iterator<Item = &LaurentPoly> {
        self.entries.iter()
    }
}

#[derive(Serialize, Deserialize)]
struct PolyMatrixJson {
    rows: usize,
    cols: usize,
    dim: usize,
    entries: Vec<Vec<LaurentPoly>>,
}

impl Serialize for PolyMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyMatrixJson {
            rows: self.rows,
            cols: self.cols,
            dim: self.dim,
            entries: (0..self.rows).map(|i| self.row_entries(i)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PolyMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = PolyMatrixJson::deserialize(d)?;
        let m = PolyMatrix::from_rows(raw.dim, raw.entries).map_err(D::Error::custom)?;
        if m.rows != raw.rows || (m.rows > 0 && m.cols != raw.cols) {
            return Err(D::Error::custom("declared shape does not match entries"));
        }
        Ok(PolyMatrix { cols: raw.cols, ..m })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn b111() -> LaurentPoly {
        let half = |e: &[i64]| LaurentPoly::from_real(2, &[(&[0, 0], 0.5), (e, 0.5)]);
        &(&half(&[1, 0]) * &half(&[0, 1])) * &half(&[1, 1])
    }

    #[test]
    fn ordering_is_last_coordinate_major() {
        let mut v: Vec<MultiIndex> = vec![
            vec![1, 1].into(),
            vec![0, 1].into(),
            vec![1, 0].into(),
            vec![0, 0].into(),
        ];
        v.sort();
        let got: Vec<_> = v.iter().map(|m| m.0.clone()).collect();
        assert_eq!(got, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]]);
    }

    #[test]
    fn product_of_three_direction_factors() {
        let p = b111();
        let expect = LaurentPoly::from_real(
            2,
            &[
                (&[0, 0], 1.0 / 8.0),
                (&[1, 0], 1.0 / 8.0),
                (&[0, 1], 1.0 / 8.0),
                (&[1, 1], 2.0 / 8.0),
                (&[1, 2], 1.0 / 8.0),
                (&[2, 1], 1.0 / 8.0),
                (&[2, 2], 1.0 / 8.0),
            ],
        );
        assert!(p.approx_eq(&expect, 0.0));
        assert_eq!(&p * &LaurentPoly::one(2), p);
    }

    #[test]
    fn square_of_haar() {
        let h = LaurentPoly::from_real(1, &[(&[0], 0.5), (&[1], 0.5)]);
        let sq = &h * &h;
        let expect = LaurentPoly::from_real(1, &[(&[0], 0.25), (&[1], 0.5), (&[2], 0.25)]);
        assert_eq!(sq, expect);
    }

    #[test]
    fn mul_dimension_mismatch() {
        let a = LaurentPoly::one(1);
        let b = LaurentPoly::one(2);
        assert!(matches!(a.try_mul(&b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn conj_reflect_examples() {
        let z1 = LaurentPoly::var(2, 0);
        let r = z1.conj_reflect();
        assert_eq!(r.coeff(&[-1, 0]), c(1.0));
        let h = LaurentPoly::from_real(1, &[(&[0], 0.5), (&[1], 0.5)]);
        let expect = LaurentPoly::from_real(1, &[(&[0], 0.5), (&[-1], 0.5)]);
        assert_eq!(h.conj_reflect(), expect);
    }

    #[test]
    fn b111_modulus_square_nonnegative_on_grid() {
        let p = b111();
        let sq = &p.conj_reflect() * &p;
        let n = 32;
        for a in 0..n {
            for b in 0..n {
                let z = [
                    Complex64::from_polar(1.0, std::f64::consts::TAU * a as f64 / n as f64),
                    Complex64::from_polar(1.0, std::f64::consts::TAU * b as f64 / n as f64),
                ];
                let v = sq.eval(&z).unwrap();
                assert!(v.im.abs() < 1e-14);
                assert!(v.re >= -1e-15);
            }
        }
    }

    #[test]
    fn eval_examples() {
        let p = b111();
        let one = c(1.0);
        assert!((p.eval(&[one, one]).unwrap() - one).norm() < 1e-15);
        assert!(p.eval(&[c(-1.0), one]).unwrap().norm() < 1e-15);
        // brute-force sum at (i, 1): terms 1, i, 1, 2i, i, -1, -1 over 8
        let i = Complex64::new(0.0, 1.0);
        let v = p.eval(&[i, one]).unwrap();
        assert!((v - Complex64::new(0.0, 4.0) / 8.0).norm() < 1e-15, "{v}");
    }

    #[test]
    fn eval_zero_coordinate_with_negative_power() {
        let p = LaurentPoly::var(1, 0).conj_reflect();
        assert!(matches!(p.eval(&[c(0.0)]), Err(Error::ZeroCoordinate { var: 0 })));
        assert_eq!(LaurentPoly::var(1, 0).eval(&[c(0.0)]).unwrap(), c(0.0));
    }

    #[test]
    fn prune_drops_tiny_relative_coefficients() {
        let p = LaurentPoly::from_real(1, &[(&[0], 1.0), (&[1], 1e-15)]);
        assert_eq!(p.len(), 1);
        let big = LaurentPoly::from_real(1, &[(&[0], 1e6), (&[1], 1e-9)]);
        assert_eq!(big.len(), 1);
        let small = LaurentPoly::from_real(1, &[(&[0], 1e-3), (&[1], 1e-13)]);
        assert_eq!(small.len(), 2);
    }

    #[test]
    fn json_shape_and_order() {
        let p = b111();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.starts_with(r#"{"dim":2,"terms":[{"exp":[0,0],"re":0.125,"im":0.0},{"exp":[1,0]"#));
        let back: LaurentPoly = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn json_rejects_bad_exponent_length() {
        let bad = r#"{"dim":2,"terms":[{"exp":[1],"re":1.0,"im":0.0}]}"#;
        assert!(serde_json::from_str::<LaurentPoly>(bad).is_err());
        let dup = r#"{"dim":1,"terms":[{"exp":[1],"re":1.0,"im":0.0},{"exp":[1],"re":1.0,"im":0.0}]}"#;
        assert!(serde_json::from_str::<LaurentPoly>(dup).is_err());
    }

    #[test]
    fn poly_matrix_adjoint_product() {
        let z = LaurentPoly::var(1, 0);
        let col = PolyMatrix::column(1, vec![z.clone(), LaurentPoly::one(1)]).unwrap();
        let gram = col.adjoint().try_mul(&col).unwrap();
        assert_eq!(gram.rows(), 1);
        assert!(gram.get(0, 0).approx_eq(&LaurentPoly::real_constant(1, 2.0), 0.0));
    }
}
