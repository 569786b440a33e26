//! Framelet synthesis: adjunction, isometry completion and mask assembly.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::certify::{self, PSD_TOL};
use crate::error::{Error, Result};
use crate::laurent::{LaurentPoly, PolyMatrix};
use crate::linalg::{self, CMatrix};
use crate::realize::{self, Realization, NILPOTENT_TOL};
use crate::symmetry::{self, DilationSetup, PolyphaseVector};

/// Default tolerance for every synthesis stage.
pub const SYNTH_TOL: f64 = 1e-10;
/// Torus points used by the shift-form UEP cross-check.
pub const UEP_SAMPLES: usize = 100;
const UEP_SEED: u64 = 0x7167_6874_6672_616d;

fn times_var(p: &LaurentPoly, j: usize) -> LaurentPoly {
    p * &LaurentPoly::var(p.dim(), j)
}

/// `u(ξ) = B (I − E(ξ) D)⁻¹` as a finite series.
pub fn adjoint_polynomial(r: &Realization) -> Result<PolyMatrix> {
    let outs = r.outputs();
    let n = r.states();
    let dim = r.dim;
    let vars = r.state_vars();
    let mut rows = Vec::with_capacity(outs);
    for i in 0..outs {
        let mut term: Vec<LaurentPoly> = (0..n).map(|s| LaurentPoly::constant(dim, r.b[(i, s)])).collect();
        let mut sum = term.clone();
        let mut done = n == 0;
        for _ in 0..n {
            let shifted: Vec<LaurentPoly> = term.iter().zip(&vars).map(|(p, &j)| times_var(p, j)).collect();
            term = (0..n)
                .map(|t| {
                    shifted
                        .iter()
                        .enumerate()
                        .filter(|(s, p)| r.d[(*s, t)] != Complex64::new(0.0, 0.0) && !p.is_zero())
                        .fold(LaurentPoly::zero(dim), |acc, (s, p)| &acc + &p.scale(r.d[(s, t)]))
                })
                .collect();
            if term.iter().all(|p| p.max_abs() <= NILPOTENT_TOL) {
                done = true;
                break;
            }
            sum = sum.iter().zip(&term).map(|(a, b)| a + b).collect();
        }
        if !done {
            return Err(Error::NotNilpotent { steps: n });
        }
        rows.push(sum);
    }
    let u = if n == 0 {
        PolyMatrix::zeros(outs, 0, dim)
    } else {
        PolyMatrix::from_rows(dim, rows)?
    };
    let residual = adjunction_residual(r, &u)?;
    if residual > SYNTH_TOL {
        return Err(Error::Verification {
            what: "adjunction identity".into(),
            residual,
            tol: SYNTH_TOL,
        });
    }
    Ok(u)
}

/// `u(ξ) E(ξ) M` for a constant `n × k` matrix `M`.
fn u_e_times(u: &PolyMatrix, vars: &[usize], m: &CMatrix) -> Vec<Vec<LaurentPoly>> {
    (0..u.rows())
        .map(|i| {
            (0..m.ncols())
                .map(|k| {
                    vars.iter()
                        .enumerate()
                        .fold(LaurentPoly::zero(u.dim()), |acc, (s, &j)| {
                            let c = m[(s, k)];
                            if c == Complex64::new(0.0, 0.0) {
                                acc
                            } else {
                                &acc + &times_var(u.get(i, s), j).scale(c)
                            }
                        })
                })
                .collect()
        })
        .collect()
}

/// Largest coefficient of `f − (A + u E C)`, the conjugate-transposed form of
/// `f*(ξ) = A* + C* E(ξ) u*(ξ)`.
pub fn adjunction_residual(r: &Realization, u: &PolyMatrix) -> Result<f64> {
    let f = r.transfer_expand()?;
    let uec = u_e_times(u, &r.state_vars(), &r.c);
    let mut worst: f64 = 0.0;
    for i in 0..r.outputs() {
        let mut rhs = LaurentPoly::constant(r.dim, r.a[(i, 0)]);
        if let Some(row) = uec.get(i) {
            if let Some(x) = row.first() {
                rhs = &rhs + x;
            }
        }
        worst = worst.max(f.get(i, 0).max_diff(&rhs));
    }
    Ok(worst)
}

/// `[[A*, C*], [B*, D*]]`.
pub fn adjoint_block(r: &Realization) -> CMatrix {
    linalg::vstack(
        &linalg::hstack(&r.a.adjoint(), &r.c.adjoint()),
        &linalg::hstack(&r.b.adjoint(), &r.d.adjoint()),
    )
}

#[derive(Clone, Debug)]
pub struct CompletionReport {
    pub base_matrix: CMatrix,
    pub added_rows: CMatrix,
    pub defect_rank: usize,
    pub isometry_defect: f64,
}

/// Appends rows `T = psd_factor(I − M*M)` so that `[M; T]` is isometric.
pub fn isometry_complete(mtx: &CMatrix, tol: f64) -> Result<CompletionReport> {
    let norm = linalg::largest_singular_value(mtx);
    if norm > 1.0 + tol {
        return Err(Error::NotContractive { norm, tol });
    }
    let n = mtx.ncols();
    let defect = CMatrix::identity(n, n) - mtx.adjoint() * mtx;
    let t = certify::psd_factor(&defect, PSD_TOL)?;
    let stacked = linalg::vstack(mtx, &t);
    let iso = linalg::isometry_defect(&stacked);
    if iso > tol {
        return Err(Error::Verification {
            what: "completed isometry".into(),
            residual: iso,
            tol,
        });
    }
    Ok(CompletionReport {
        base_matrix: mtx.clone(),
        defect_rank: t.nrows(),
        added_rows: t,
        isometry_defect: iso,
    })
}

/// `u₀(ξ) = T₀* + u(ξ) E(ξ) T₁*` with `T = (T₀, T₁)` split after `m` columns.
pub fn build_u0(comp: &CompletionReport, u: &PolyMatrix, state_vars: &[usize]) -> Result<PolyMatrix> {
    let m = u.rows();
    let n = state_vars.len();
    let t = &comp.added_rows;
    if t.ncols() != m + n || u.cols() != n {
        return Err(Error::Shape(format!(
            "completion rows have {} columns; expected {m} + {n}",
            t.ncols()
        )));
    }
    let k = t.nrows();
    let t0s = t.columns(0, m).adjoint();
    let t1s = t.columns(m, n).adjoint();
    let tail = u_e_times(u, state_vars, &t1s);
    let dim = u.dim();
    let mut out = PolyMatrix::zeros(m, k, dim);
    for i in 0..m {
        for j in 0..k {
            let mut e = LaurentPoly::constant(dim, t0s[(i, j)]);
            if n > 0 {
                e = &e + &tail[i][j];
            }
            out.set(i, j, e);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct UepReport {
    /// Largest coefficient of `I − f_p f_p* − U U*`.
    pub residual: f64,
    /// Largest deviation of the shift-form identity at sampled torus points.
    #[serde(rename = "sampledResidual")]
    pub sampled_residual: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FrameletReport {
    pub uep: Option<UepReport>,
    /// Per-variable degree of each mask.
    pub degrees: Vec<Vec<i64>>,
    /// `(lo, hi)` exponent box of each mask.
    pub supports: Vec<Option<(Vec<i64>, Vec<i64>)>>,
    /// `|a_j(1,…,1)|`.
    #[serde(rename = "vanishingMoments")]
    pub vanishing_moments: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FrameletSet {
    pub masks: Vec<LaurentPoly>,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "u0")]
    pub u_matrix: PolyMatrix,
    pub report: FrameletReport,
}

impl FrameletSet {
    /// Masks that are not identically zero.
    pub fn nonzero_count(&self) -> usize {
        self.masks.iter().filter(|m| !m.is_zero()).count()
    }
}

/// `a_j(z) = m^{−1/2} Σ_χ z^{α_χ} u₀[χ, j](z^M)`.
pub fn assemble_framelets(u0: &PolyMatrix, setup: &DilationSetup) -> Result<FrameletSet> {
    let m = setup.m();
    if u0.rows() != m {
        return Err(Error::Shape(format!("u₀ has {} rows for {m} cosets", u0.rows())));
    }
    let s = 1.0 / (m as f64).sqrt();
    let masks = (0..u0.cols())
        .map(|j| {
            let v = PolyphaseVector {
                setup: setup.clone(),
                components: u0.column_entries(j).iter().map(|c| c.scale_real(s)).collect(),
                scaled: false,
            };
            symmetry::polyphase_merge(&v)
        })
        .collect::<Result<Vec<_>>>()?;
    let d = setup.dim();
    let ones = vec![Complex64::new(1.0, 0.0); d];
    let report = FrameletReport {
        uep: None,
        degrees: masks
            .iter()
            .map(|a| a.support_box().map_or(vec![0; d], |(_, hi)| hi))
            .collect(),
        supports: masks.iter().map(LaurentPoly::support_box).collect(),
        vanishing_moments: masks
            .iter()
            .map(|a| a.eval(&ones).map_or(f64::NAN, |v| v.norm()))
            .collect(),
    };
    Ok(FrameletSet {
        n: masks.len(),
        masks,
        u_matrix: u0.clone(),
        report,
    })
}

fn scaled_phases(p: &LaurentPoly, setup: &DilationSetup) -> Result<Vec<LaurentPoly>> {
    Ok(symmetry::polyphase_split(p, setup)?.scaled().components)
}

/// Checks `I − f_p f_p* = U U*` coefficientwise and the shift form
/// `Σ conj(a(z)) a^σ(z) = δ_σ` (with `a` ranging over `p, a_1, …`) at
/// seeded random torus points.
pub fn verify_uep(p: &LaurentPoly, fs: &FrameletSet, setup: &DilationSetup, tol: f64) -> Result<UepReport> {
    let m = setup.m();
    let fp = scaled_phases(p, setup)?;
    let cols: Vec<Vec<LaurentPoly>> = fs
        .masks
        .iter()
        .map(|a| scaled_phases(a, setup))
        .collect::<Result<_>>()?;
    let dim = setup.dim();
    let mut residual: f64 = 0.0;
    for i in 0..m {
        for k in 0..m {
            let mut e = if i == k {
                LaurentPoly::one(dim)
            } else {
                LaurentPoly::zero(dim)
            };
            e = &e - &(&fp[i] * &fp[k].conj_reflect());
            for c in &cols {
                e = &e - &(&c[i] * &c[k].conj_reflect());
            }
            residual = residual.max(e.max_abs());
        }
    }

    let family: Vec<&LaurentPoly> = std::iter::once(p).chain(fs.masks.iter()).collect();
    let shifted: Vec<Vec<LaurentPoly>> = (0..m)
        .map(|s| {
            family
                .iter()
                .map(|a| symmetry::shift_action(a, s, setup))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(UEP_SEED);
    let points: Vec<Vec<Complex64>> = (0..UEP_SAMPLES)
        .map(|_| {
            (0..dim)
                .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
                .collect()
        })
        .collect();
    let per_point = crate::par::map_slice(&points, |z| {
        let base: Vec<Complex64> = family.iter().map(|a| a.eval(z).expect("torus point")).collect();
        (0..m)
            .map(|s| {
                let total: Complex64 = shifted[s]
                    .iter()
                    .zip(&base)
                    .map(|(a, b)| b.conj() * a.eval(z).expect("torus point"))
                    .sum();
                let target = if s == 0 { 1.0 } else { 0.0 };
                (total - target).norm()
            })
            .fold(0.0, f64::max)
    });
    let sampled_residual = per_point.into_iter().fold(0.0, f64::max);
    Ok(UepReport {
        residual,
        sampled_residual,
        tol,
        pass: residual <= tol && sampled_residual <= tol,
    })
}

#[derive(Clone, Debug, Default)]
pub struct PipelineOptions {
    /// Replacement for the decomposition's `q₀`, as a column in `ξ`.
    pub custom_q0: Option<PolyMatrix>,
    /// Explicit `H` with `H*H = A₀`, used instead of the eigen-factor.
    pub q0_rows: Option<CMatrix>,
    /// Stage tolerance; `None` means [`SYNTH_TOL`].
    pub tol: Option<f64>,
}

/// Every intermediate object of [`frame_pipeline`].
#[derive(Clone, Debug)]
pub struct PipelineTrace {
    pub q0: Vec<LaurentPoly>,
    pub realization: Realization,
    pub trimmed: Realization,
    pub u: PolyMatrix,
    pub completion: CompletionReport,
    pub framelets: FrameletSet,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(Error::at(name))
}

fn check_expansion(r: &Realization, rows: &[LaurentPoly], tol: f64) -> Result<()> {
    let f = r.transfer_expand()?;
    let worst = rows
        .iter()
        .enumerate()
        .map(|(i, e)| f.get(i, 0).max_diff(e))
        .fold(0.0, f64::max);
    if worst > tol {
        return Err(Error::Verification {
            what: "transfer expansion".into(),
            residual: worst,
            tol,
        });
    }
    Ok(())
}

/// Runs the full construction and returns every intermediate object.
pub fn frame_pipeline_trace(p: &LaurentPoly, setup: &DilationSetup, opts: &PipelineOptions) -> Result<PipelineTrace> {
    let tol = opts.tol.unwrap_or(SYNTH_TOL);
    let d = setup.dim();
    let m = setup.m();
    let fp = stage("polyphase", scaled_phases(p, setup))?;

    let (rows, realization) = if let Some(q0) = &opts.custom_q0 {
        let mut rows = fp.clone();
        if q0.dim() != d || q0.cols() != 1 {
            return Err(Error::at("decomposition")(Error::Shape(format!(
                "custom q0 must be a column in {d} variables"
            ))));
        }
        rows.extend(q0.column_entries(0));
        let blocks = stage("decomposition", realize::direction_blocks(&rows, d, PSD_TOL))?;
        let r = stage("realization", realize::realize_from_blocks(&rows, &blocks, d))?;
        (rows, r)
    } else {
        let dec = stage("decomposition", certify::agler_nonneg(p, setup))?;
        let h = match &opts.q0_rows {
            Some(h) => h.clone(),
            None => stage("decomposition", certify::psd_factor(&dec.a0, PSD_TOL))?,
        };
        let mut rows = fp.clone();
        rows.extend(crate::bilinear::rows_times_monomials(&h, &dec.base_indices, d));
        let r = stage("realization", realize::build_realization(&dec, &h))?;
        (rows, r)
    };
    stage("realization", check_expansion(&realization, &rows, tol))?;
    let q0 = rows[m..].to_vec();

    let trimmed = stage("trim", realization.trim_to_contractive(m))?;
    let u = stage("adjunction", adjoint_polynomial(&trimmed))?;
    let completion = stage("completion", isometry_complete(&adjoint_block(&trimmed), tol))?;
    let u0 = stage("assembly", build_u0(&completion, &u, &trimmed.state_vars()))?;
    let mut framelets = stage("assembly", assemble_framelets(&u0, setup))?;
    let uep = stage("verification", verify_uep(p, &framelets, setup, tol))?;
    if !uep.pass {
        return Err(Error::at("verification")(Error::Verification {
            what: "unitary extension principle".into(),
            residual: uep.residual.max(uep.sampled_residual),
            tol,
        }));
    }
    framelets.report.uep = Some(uep);
    Ok(PipelineTrace {
        q0,
        realization,
        trimmed,
        u,
        completion,
        framelets,
    })
}

/// Polyphase split → decomposition → realization → trim → adjunction →
/// completion → assembly → verification.
pub fn frame_pipeline(p: &LaurentPoly, setup: &DilationSetup, opts: &PipelineOptions) -> Result<FrameletSet> {
    Ok(frame_pipeline_trace(p, setup, opts)?.framelets)
}

/// Matches `found` to `expected` up to a permutation and a unimodular
/// factor per mask. Returns the permutation and the worst coefficient gap,
/// or `None` when the counts differ.
pub fn match_up_to_phase(found: &[LaurentPoly], expected: &[LaurentPoly]) -> Option<(Vec<usize>, f64)> {
    if found.len() != expected.len() {
        return None;
    }
    let n = found.len();
    let cost: Vec<Vec<f64>> = expected
        .iter()
        .map(|e| found.iter().map(|f| phase_gap(f, e)).collect())
        .collect();
    // exhaustive for small n, greedy beyond
    if n <= 8 {
        let mut best: Option<(Vec<usize>, f64)> = None;
        let mut perm: Vec<usize> = (0..n).collect();
        permute(&mut perm, 0, &mut |p| {
            let worst = p.iter().enumerate().map(|(i, &j)| cost[i][j]).fold(0.0, f64::max);
            if best.as_ref().is_none_or(|(_, b)| worst < *b) {
                best = Some((p.to_vec(), worst));
            }
        });
        best
    } else {
        let mut used = vec![false; n];
        let mut perm = Vec::with_capacity(n);
        let mut worst: f64 = 0.0;
        for row in &cost {
            let (j, c) = row
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("square");
            used[j] = true;
            perm.push(j);
            worst = worst.max(*c);
        }
        Some((perm, worst))
    }
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

/// `min_{|c|=1} max_α |c·f(α) − e(α)|`, using the phase of `⟨e, f⟩`.
fn phase_gap(f: &LaurentPoly, e: &LaurentPoly) -> f64 {
    let mut inner = Complex64::new(0.0, 0.0);
    for (a, c) in e.terms() {
        inner += f.coeff(&a.0).conj() * c;
    }
    let c = if inner.norm() > 0.0 {
        inner / inner.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    f.scale(c).max_diff(e)
}
