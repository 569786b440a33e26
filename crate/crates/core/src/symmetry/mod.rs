//! Dilation-group machinery: cosets of `ℤ^d / Mℤ^d`, the dual shift action,
//! polyphase components and the sub-QMF defect.

mod grid;

#[cfg(feature = "parallel")]
pub use grid::grid_min_parallel;
pub use grid::{default_grid, grid_max_abs, grid_min, grid_min_sequential};

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::laurent::{LaurentPoly, MultiIndex};

/// Agreement required between the two defect computations.
pub const DEFECT_ROUTE_TOL: f64 = 1e-12;

/// Integer dilation matrix with its coset data.
///
/// `cosets[χ]` represent `ℤ^d / Mℤ^d`, `dual_reps[σ]` represent
/// `ℤ^d / Mᵀℤ^d`. Both lists start with zero and are sorted in term order.
#[derive(Clone, Debug, PartialEq)]
pub struct DilationSetup {
    matrix: Vec<Vec<i64>>,
    det: i64,
    adj: Vec<Vec<i64>>,
    cosets: Vec<MultiIndex>,
    dual_reps: Vec<MultiIndex>,
}

fn det_i128(a: &[Vec<i128>]) -> i128 {
    let n = a.len();
    match n {
        0 => 1,
        1 => a[0][0],
        _ => (0..n)
            .map(|j| {
                let minor: Vec<Vec<i128>> = a[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(k, _)| *k != j)
                            .map(|(_, v)| *v)
                            .collect()
                    })
                    .collect();
                let sign = if j % 2 == 0 { 1 } else { -1 };
                sign * a[0][j] * det_i128(&minor)
            })
            .sum(),
    }
}

#[allow(clippy::needless_range_loop)]
fn adjugate(a: &[Vec<i128>]) -> Vec<Vec<i128>> {
    let n = a.len();
    if n == 1 {
        return vec![vec![1]];
    }
    let mut adj = vec![vec![0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<Vec<i128>> = a
                .iter()
                .enumerate()
                .filter(|(r, _)| *r != i)
                .map(|(_, row)| {
                    row.iter()
                        .enumerate()
                        .filter(|(c, _)| *c != j)
                        .map(|(_, v)| *v)
                        .collect()
                })
                .collect();
            let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
            // adj = transpose of the cofactor matrix
            adj[j][i] = sign * det_i128(&minor);
        }
    }
    adj
}

fn mat_vec(a: &[Vec<i64>], v: &[i64]) -> Vec<i64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

fn mat_t_vec(a: &[Vec<i64>], v: &[i64]) -> Vec<i64> {
    (0..a.len())
        .map(|j| (0..a.len()).map(|i| a[i][j] * v[i]).sum())
        .collect()
}

/// `exp(−2πi·num/den)`, exact at multiples of a quarter turn.
fn unit_root(num: i64, den: i64) -> Complex64 {
    let den_abs = den.abs();
    let num = if den < 0 { -num } else { num };
    let r = num.rem_euclid(den_abs);
    if (4 * r) % den_abs == 0 {
        return match 4 * r / den_abs {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, -1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, 1.0),
        };
    }
    let angle = -2.0 * std::f64::consts::PI * (r as f64) / (den_abs as f64);
    Complex64::new(angle.cos(), angle.sin())
}

/// Visits `[0, bound]^d` in term order.
fn box_points(d: usize, bound: i64) -> impl Iterator<Item = Vec<i64>> {
    let side = (bound + 1) as u64;
    let total = side.pow(d as u32);
    (0..total).map(move |mut k| {
        let mut v = vec![0i64; d];
        for x in v.iter_mut() {
            *x = (k % side) as i64;
            k /= side;
        }
        v
    })
}

impl DilationSetup {
    /// Validates `M` and enumerates both coset systems.
    pub fn new(matrix: Vec<Vec<i64>>) -> Result<Self> {
        let d = matrix.len();
        if d == 0 || matrix.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidDilation(format!(
                "expected a non-empty square matrix, got {d} rows of lengths {:?}",
                matrix.iter().map(Vec::len).collect::<Vec<_>>()
            )));
        }
        let wide: Vec<Vec<i128>> = matrix.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
        let det = det_i128(&wide);
        if det == 0 {
            return Err(Error::SingularDilation);
        }
        if det.abs() == 1 {
            return Err(Error::TrivialDilation);
        }
        let to_i64 = |v: i128| i64::try_from(v).map_err(|_| Error::InvalidDilation("entries too large".into()));
        let det = to_i64(det)?;
        let adj = adjugate(&wide)
            .into_iter()
            .map(|r| r.into_iter().map(to_i64).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let m = det.unsigned_abs() as usize;

        // every coset meets [0, |det|)^d, so the box below holds each
        // term-order-minimal representative
        let max_entry = matrix.iter().flatten().map(|v| v.abs()).max().unwrap_or(0);
        let bound = (max_entry * d as i64).max(det.abs() - 1);

        let scan = |in_lattice: &dyn Fn(&[i64]) -> bool| {
            let mut reps: Vec<Vec<i64>> = Vec::with_capacity(m);
            for x in box_points(d, bound) {
                if reps.len() == m {
                    break;
                }
                let new = reps.iter().all(|r| {
                    let diff: Vec<i64> = x.iter().zip(r).map(|(a, b)| a - b).collect();
                    !in_lattice(&diff)
                });
                if new {
                    reps.push(x);
                }
            }
            reps
        };

        let lattice = |v: &[i64]| mat_vec(&adj, v).iter().all(|x| x % det == 0);
        let dual_lattice = |v: &[i64]| mat_t_vec(&adj, v).iter().all(|x| x % det == 0);
        let cosets = scan(&lattice);
        let dual_reps = scan(&dual_lattice);
        if cosets.len() != m || dual_reps.len() != m {
            return Err(Error::Internal(format!(
                "found {} cosets and {} dual representatives for m = {m}",
                cosets.len(),
                dual_reps.len()
            )));
        }
        Ok(DilationSetup {
            matrix,
            det,
            adj,
            cosets: cosets.into_iter().map(MultiIndex).collect(),
            dual_reps: dual_reps.into_iter().map(MultiIndex).collect(),
        })
    }

    /// `M = 2I_d`.
    pub fn dyadic(d: usize) -> Result<Self> {
        Self::new(
            (0..d)
                .map(|i| (0..d).map(|j| if i == j { 2 } else { 0 }).collect())
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    /// Group order `|det M|`.
    pub fn m(&self) -> usize {
        self.det.unsigned_abs() as usize
    }

    pub fn matrix(&self) -> &[Vec<i64>] {
        &self.matrix
    }

    pub fn cosets(&self) -> &[MultiIndex] {
        &self.cosets
    }

    pub fn dual_reps(&self) -> &[MultiIndex] {
        &self.dual_reps
    }

    pub fn is_dyadic(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| self.matrix[i][j] == if i == j { 2 } else { 0 }))
    }

    /// `Mβ`.
    pub fn apply(&self, beta: &MultiIndex) -> MultiIndex {
        MultiIndex(mat_vec(&self.matrix, &beta.0))
    }

    /// `M⁻¹α` when `α ∈ Mℤ^d`.
    pub fn preimage(&self, alpha: &MultiIndex) -> Option<MultiIndex> {
        let v = mat_vec(&self.adj, &alpha.0);
        if v.iter().all(|x| x % self.det == 0) {
            Some(MultiIndex(v.into_iter().map(|x| x / self.det).collect()))
        } else {
            None
        }
    }

    /// Writes `α = α_χ + Mβ`, returning `(χ, β)`.
    pub fn decompose(&self, alpha: &MultiIndex) -> (usize, MultiIndex) {
        for (chi, rep) in self.cosets.iter().enumerate() {
            if let Some(beta) = self.preimage(&alpha.sub(rep)) {
                return (chi, beta);
            }
        }
        unreachable!("coset list is complete")
    }

    /// The character `α ↦ exp(−i σ·α)` with `σ = 2π M⁻ᵀ k_σ`.
    pub fn character(&self, sigma: usize, alpha: &MultiIndex) -> Complex64 {
        let k = &self.dual_reps[sigma];
        let num: i64 = mat_vec(&self.adj, &alpha.0).iter().zip(&k.0).map(|(a, b)| a * b).sum();
        unit_root(num, self.det)
    }

    /// Index of `σ_a + σ_b` in the dual group.
    pub fn compose_dual(&self, a: usize, b: usize) -> usize {
        let sum = self.dual_reps[a].add(&self.dual_reps[b]);
        self.dual_reps
            .iter()
            .position(|k| mat_t_vec(&self.adj, &sum.sub(k).0).iter().all(|x| x % self.det == 0))
            .expect("dual representatives are complete")
    }

    fn check_dim(&self, p: &LaurentPoly) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p.dim(),
            });
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct SetupJson {
    #[serde(rename = "M")]
    matrix: Vec<Vec<i64>>,
    #[serde(default)]
    cosets: Option<Vec<Vec<i64>>>,
    #[serde(rename = "dualReps", default)]
    dual_reps: Option<Vec<Vec<i64>>>,
}

impl Serialize for DilationSetup {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SetupJson {
            matrix: self.matrix.clone(),
            cosets: Some(self.cosets.iter().map(|c| c.0.clone()).collect()),
            dual_reps: Some(self.dual_reps.iter().map(|c| c.0.clone()).collect()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DilationSetup {
    /// Only `M` is authoritative; supplied coset lists must match the
    /// recomputed ones.
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = SetupJson::deserialize(de)?;
        let setup = DilationSetup::new(raw.matrix).map_err(D::Error::custom)?;
        let same = |given: &Option<Vec<Vec<i64>>>, ours: &[MultiIndex]| {
            given
                .as_ref()
                .is_none_or(|g| g.iter().map(|v| MultiIndex(v.clone())).eq(ours.iter().cloned()))
        };
        if !same(&raw.cosets, &setup.cosets) || !same(&raw.dual_reps, &setup.dual_reps) {
            return Err(D::Error::custom(
                "coset lists do not match the canonical representatives for M",
            ));
        }
        Ok(setup)
    }
}

/// Polyphase components `p̃_χ`, in coset order, optionally scaled by `√m`.
#[derive(Clone, Debug)]
pub struct PolyphaseVector {
    pub setup: DilationSetup,
    pub components: Vec<LaurentPoly>,
    pub scaled: bool,
}

impl PolyphaseVector {
    /// The `√m`-scaled vector `f_p`.
    pub fn scaled(&self) -> PolyphaseVector {
        if self.scaled {
            return self.clone();
        }
        let s = (self.setup.m() as f64).sqrt();
        PolyphaseVector {
            setup: self.setup.clone(),
            components: self.components.iter().map(|c| c.scale_real(s)).collect(),
            scaled: true,
        }
    }

    /// `Σ_χ c_χ* c_χ`.
    pub fn norm_squared(&self) -> LaurentPoly {
        let d = self.setup.dim();
        self.components
            .iter()
            .fold(LaurentPoly::zero(d), |acc, c| &acc + &(&c.conj_reflect() * c))
    }
}

/// `p^σ(z) = p(e^{−iσ}z)`.
pub fn shift_action(p: &LaurentPoly, sigma: usize, setup: &DilationSetup) -> Result<LaurentPoly> {
    setup.check_dim(p)?;
    if sigma >= setup.m() {
        return Err(Error::IndexOutOfRange {
            index: sigma,
            len: setup.m(),
        });
    }
    if sigma == 0 {
        return Ok(p.clone());
    }
    Ok(p.map_coeffs(|e, c| c * setup.character(sigma, e)))
}

/// Sorts coefficients by coset: `p̃_χ(ξ) = Σ_β p(α_χ + Mβ) ξ^β`.
pub fn polyphase_split(p: &LaurentPoly, setup: &DilationSetup) -> Result<PolyphaseVector> {
    setup.check_dim(p)?;
    let d = setup.dim();
    let mut buckets: Vec<BTreeMap<MultiIndex, Complex64>> = vec![BTreeMap::new(); setup.m()];
    for (e, c) in p.terms() {
        let (chi, beta) = setup.decompose(e);
        buckets[chi].insert(beta, *c);
    }
    Ok(PolyphaseVector {
        setup: setup.clone(),
        components: buckets.into_iter().map(|b| LaurentPoly::from_map_exact(d, b)).collect(),
        scaled: false,
    })
}

/// `Σ_χ z^{α_χ} p̃_χ(z^M)`; the exact inverse of [`polyphase_split`].
pub fn polyphase_merge(v: &PolyphaseVector) -> Result<LaurentPoly> {
    if v.scaled {
        return Err(Error::Precondition("cannot merge a √m-scaled polyphase vector".into()));
    }
    let setup = &v.setup;
    if v.components.len() != setup.m() {
        return Err(Error::Shape(format!(
            "{} components for {} cosets",
            v.components.len(),
            setup.m()
        )));
    }
    let mut out = BTreeMap::new();
    for (chi, comp) in v.components.iter().enumerate() {
        setup.check_dim(comp)?;
        for (beta, c) in comp.terms() {
            out.insert(setup.cosets[chi].add(&setup.apply(beta)), *c);
        }
    }
    Ok(LaurentPoly::from_map_exact(setup.dim(), out))
}

/// `f(z^M)` for `f` in `ξ`.
pub fn from_xi(f: &LaurentPoly, setup: &DilationSetup) -> LaurentPoly {
    f.map_exponents(setup.dim(), |b| setup.apply(b))
}

/// Reads a `G`-invariant `f` in `ξ = z^M`.
pub fn to_xi(f: &LaurentPoly, setup: &DilationSetup) -> Result<LaurentPoly> {
    setup.check_dim(f)?;
    let mut out = BTreeMap::new();
    for (e, c) in f.terms() {
        let beta = setup
            .preimage(e)
            .ok_or_else(|| Error::Precondition(format!("exponent {e:?} is outside the lattice Mℤ^d")))?;
        out.insert(beta, *c);
    }
    Ok(LaurentPoly::from_map_exact(setup.dim(), out))
}

#[derive(Clone, Debug, Serialize)]
pub struct SumRuleReport {
    /// `|p^σ(1,…,1) − δ_{0σ}|` per dual representative.
    pub residuals: Vec<f64>,
    pub tol: f64,
    pub pass: bool,
}

pub fn sum_rules_check(p: &LaurentPoly, setup: &DilationSetup, tol: f64) -> SumRuleReport {
    let residuals: Vec<f64> = (0..setup.m())
        .map(|sigma| {
            let value: Complex64 = p.terms().map(|(e, c)| c * setup.character(sigma, e)).sum();
            let target = if sigma == 0 { 1.0 } else { 0.0 };
            (value - target).norm()
        })
        .collect();
    let pass = residuals.iter().all(|r| *r <= tol);
    SumRuleReport { residuals, tol, pass }
}

/// `1 − Σ_σ p^{σ*}p^σ` by direct shift sum.
pub fn defect_by_shifts(p: &LaurentPoly, setup: &DilationSetup) -> Result<LaurentPoly> {
    setup.check_dim(p)?;
    let mut acc = LaurentPoly::one(setup.dim());
    for sigma in 0..setup.m() {
        let ps = shift_action(p, sigma, setup)?;
        acc = &acc - &(&ps.conj_reflect() * &ps);
    }
    Ok(acc)
}

/// `1 − m Σ_χ p̃_χ* p̃_χ`, in `ξ`.
pub fn defect_xi(p: &LaurentPoly, setup: &DilationSetup) -> Result<LaurentPoly> {
    let v = polyphase_split(p, setup)?.scaled();
    Ok(&LaurentPoly::one(setup.dim()) - &v.norm_squared())
}

/// The sub-QMF defect `f = 1 − Σ_σ p^{σ*}p^σ` in `z`. Computed through the
/// polyphase identity and cross-checked against the shift sum; the returned
/// polynomial is supported on `Mℤ^d`.
pub fn subqmf_defect(p: &LaurentPoly, setup: &DilationSetup) -> Result<LaurentPoly> {
    let via_polyphase = from_xi(&defect_xi(p, setup)?, setup);
    let via_shifts = defect_by_shifts(p, setup)?;
    let gap = via_polyphase.max_diff(&via_shifts);
    if gap > DEFECT_ROUTE_TOL {
        return Err(Error::Internal(format!("defect routes disagree by {gap:e}")));
    }
    Ok(via_polyphase)
}

/// True iff every defect coefficient is at most `tol` in magnitude.
pub fn qmf_check(p: &LaurentPoly, setup: &DilationSetup, tol: f64) -> Result<bool> {
    Ok(subqmf_defect(p, setup)?.max_abs() <= tol)
}
