//! Fejér–Riesz factorization and the univariate `m`-generator construction.

use nalgebra::linalg::Schur;
use num_complex::Complex64;
use serde::Serialize;

use crate::certify::PSD_TOL;
use crate::error::{Error, Result};
use crate::laurent::{LaurentPoly, PolyMatrix};
use crate::linalg::{self, CMatrix};
use crate::realize::{self, Realization};
use crate::symmetry::{self, DilationSetup};
use crate::synth::{self, CompletionReport, FrameletSet, SYNTH_TOL};

/// `| |r| − 1 |` below this counts as on the unit circle.
pub const CIRCLE_TOL: f64 = 1e-7;
/// Largest degree accepted by [`fejer_riesz`].
pub const MAX_DEGREE: usize = 64;
const GRID_POINTS: usize = 1024;
const GRID_TOL: f64 = 1e-9;
const HERMITIAN_TOL: f64 = 1e-12;
// single-linkage radii tried in turn; the best residual wins
const CLUSTER_RADII: [f64; 6] = [1e-7, 1e-5, 1e-4, 1e-3, 1e-2, 5e-2];

#[derive(Clone, Debug, Serialize)]
pub struct SpectralFactor {
    pub input: LaurentPoly,
    pub factor: LaurentPoly,
    pub residual: f64,
    /// Set when the in-disk root count differed from the degree and roots
    /// were chosen by modulus instead.
    #[serde(rename = "pairingMismatch")]
    pub pairing_mismatch: bool,
}

impl SpectralFactor {
    /// Largest root modulus of the factor.
    pub fn max_root_modulus(&self) -> f64 {
        poly_roots(&coefficients(&self.factor))
            .map(|r| r.iter().map(|z| z.norm()).fold(0.0, f64::max))
            .unwrap_or(0.0)
    }
}

/// Ascending coefficients of a polynomial with non-negative exponents.
fn coefficients(h: &LaurentPoly) -> Vec<Complex64> {
    let hi = h.support_box().map_or(0, |(_, hi)| hi[0]).max(0) as usize;
    (0..=hi).map(|k| h.coeff(&[k as i64])).collect()
}

/// Roots of `Σ a_k z^k` from companion-matrix eigenvalues.
fn poly_roots(a: &[Complex64]) -> Result<Vec<Complex64>> {
    let deg = a.iter().rposition(|c| c.norm() > 0.0).unwrap_or(0);
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = a[deg];
    let mut comp = CMatrix::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -a[i] / lead;
    }
    let schur = Schur::try_new(comp, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Internal("companion eigenvalues did not converge".into()))?;
    let ev = schur
        .eigenvalues()
        .ok_or_else(|| Error::Internal("companion eigenvalues unavailable".into()))?;
    Ok(ev.iter().copied().collect())
}

fn horner(a: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for c in a.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Newton steps that are kept only while `|P|` decreases.
fn polish(a: &[Complex64], r: Complex64) -> Complex64 {
    let mut z = r;
    let (mut pz, mut dz) = horner(a, z);
    for _ in 0..8 {
        if dz.norm() == 0.0 || pz.norm() == 0.0 {
            break;
        }
        let next = z - pz / dz;
        let (pn, dn) = horner(a, next);
        if pn.norm() >= pz.norm() {
            break;
        }
        z = next;
        pz = pn;
        dz = dn;
    }
    z
}

/// Single-linkage clusters of `roots` at relative radius `rho`.
fn clusters(roots: &[Complex64], rho: f64) -> Vec<Vec<usize>> {
    let n = roots.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (roots[i] - roots[j]).norm() < rho * roots[i].norm().max(1.0) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// The `n` roots of the factor, or `None` if an on-circle cluster has odd
/// size. The flag reports a modulus-based fallback.
fn select_roots(roots: &[Complex64], n: usize, rho: f64) -> Option<(Vec<Complex64>, bool)> {
    let mut chosen = Vec::with_capacity(n);
    let mut off = Vec::new();
    for group in clusters(roots, rho) {
        let c: Complex64 = group.iter().map(|&i| roots[i]).sum::<Complex64>() / group.len() as f64;
        if (c.norm() - 1.0).abs() < CIRCLE_TOL {
            if group.len() % 2 == 1 {
                return None;
            }
            let u = c / c.norm();
            chosen.extend(std::iter::repeat_n(u, group.len() / 2));
        } else {
            off.extend(group.iter().map(|&i| roots[i]));
        }
    }
    if chosen.len() > n {
        return None;
    }
    let inside = off.iter().filter(|r| r.norm() < 1.0).count();
    let need = n - chosen.len();
    off.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    chosen.extend(off.into_iter().take(need));
    Some((chosen, inside != need))
}

fn from_roots(roots: &[Complex64]) -> LaurentPoly {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (k, a) in c.iter().enumerate() {
            next[k + 1] += a;
            next[k] -= a * r;
        }
        c = next;
    }
    LaurentPoly::from_terms(1, c.into_iter().enumerate().map(|(k, a)| (vec![k as i64], a))).expect("dim 1")
}

fn scaled_factor(f: &LaurentPoly, roots: &[Complex64]) -> Option<(LaurentPoly, f64)> {
    let h = from_roots(roots);
    let g = &h.conj_reflect() * &h;
    let fg: Complex64 = g.terms().map(|(e, c)| f.coeff(&e.0) * c.conj()).sum();
    let gg: f64 = g.terms().map(|(_, c)| c.norm_sqr()).sum();
    let s = fg.re / gg;
    if s.is_nan() || s <= 0.0 {
        return None;
    }
    let h = h.scale_real(s.sqrt());
    let residual = (&h.conj_reflect() * &h).max_diff(f);
    Some((h, residual))
}

/// `h` with non-negative exponents, roots in the closed disk and positive
/// leading coefficient such that `h*h = f`.
pub fn fejer_riesz(f: &LaurentPoly) -> Result<SpectralFactor> {
    if f.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: f.dim(),
        });
    }
    let scale = f.max_abs().max(1.0);
    let herm = f.hermitian_defect();
    if herm > HERMITIAN_TOL * scale {
        return Err(Error::Precondition(format!(
            "coefficients are not hermitian (defect {herm:e})"
        )));
    }
    let low = symmetry::grid_min(f, GRID_POINTS);
    if low < -GRID_TOL * scale {
        return Err(Error::NotPsd {
            min_eigenvalue: low,
            threshold: -GRID_TOL * scale,
        });
    }
    let n = f.support_box().map_or(0, |(lo, hi)| hi[0].max(-lo[0])).max(0) as usize;
    if n > MAX_DEGREE {
        return Err(Error::Precondition(format!(
            "degree {n} exceeds the supported {MAX_DEGREE}"
        )));
    }
    let done = |factor: LaurentPoly, mismatch: bool| {
        let residual = (&factor.conj_reflect() * &factor).max_diff(f);
        SpectralFactor {
            input: f.clone(),
            factor,
            residual,
            pairing_mismatch: mismatch,
        }
    };
    if n == 0 {
        let c = f.coeff(&[0]).re.max(0.0);
        return Ok(done(LaurentPoly::real_constant(1, c.sqrt()), false));
    }

    let a: Vec<Complex64> = (0..=2 * n as i64).map(|k| f.coeff(&[k - n as i64])).collect();
    let raw = poly_roots(&a)?;
    // polishing sharpens simple roots but skews multiple-root clusters
    let polished: Vec<Complex64> = raw.iter().map(|r| polish(&a, *r)).collect();

    let mut best: Option<(LaurentPoly, f64, bool)> = None;
    for (roots, rho) in [&polished, &raw]
        .into_iter()
        .flat_map(|r| CLUSTER_RADII.iter().map(move |rho| (r, *rho)))
    {
        let Some((sel, mismatch)) = select_roots(roots, n, rho) else {
            continue;
        };
        let Some((h, res)) = scaled_factor(f, &sel) else {
            continue;
        };
        if best.as_ref().is_none_or(|(_, r, _)| res < *r) {
            best = Some((h, res, mismatch));
        }
    }
    let (h, _, mismatch) =
        best.ok_or_else(|| Error::NotASquare("odd multiplicity of a root on the unit circle".into()))?;
    Ok(done(h, mismatch))
}

/// Every intermediate object of [`univariate_tight_frame`].
#[derive(Clone, Debug)]
pub struct UnivariateTrace {
    pub q0: Option<SpectralFactor>,
    pub realization: Realization,
    pub u: PolyMatrix,
    pub completion: CompletionReport,
    pub framelets: FrameletSet,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(Error::at(name))
}

/// Runs the univariate construction for dilation `m` and returns every
/// intermediate object.
pub fn univariate_tight_frame_trace(p: &LaurentPoly, m: i64) -> Result<UnivariateTrace> {
    if m < 2 {
        return Err(Error::InvalidDilation(format!("dilation {m} must be at least 2")));
    }
    let setup = DilationSetup::new(vec![vec![m]])?;
    let mu = setup.m();
    let sums = symmetry::sum_rules_check(p, &setup, 1e-10);
    if !sums.pass {
        return Err(Error::Precondition(format!(
            "sum rules fail: residuals {:?}",
            sums.residuals
        )));
    }
    let fp = stage(
        "polyphase",
        symmetry::polyphase_split(p, &setup).map(|v| v.scaled().components),
    )?;

    let norm: LaurentPoly = fp
        .iter()
        .fold(LaurentPoly::zero(1), |acc, c| &acc + &(&c.conj_reflect() * c));
    let defect = &LaurentPoly::one(1) - &norm;
    let q0 = if defect.max_abs() <= SYNTH_TOL {
        None
    } else {
        Some(stage("decomposition", fejer_riesz(&defect))?)
    };
    let mut rows = fp.clone();
    if let Some(q) = &q0 {
        rows.push(q.factor.clone());
    }
    let blocks = stage("decomposition", realize::direction_blocks(&rows, 1, PSD_TOL))?;
    let realization = stage("realization", realize::realize_from_blocks(&rows, &blocks, 1))?;
    let states = realization.states();

    let trimmed = stage("trim", realization.trim_to_contractive(mu))?;
    let u = stage("adjunction", synth::adjoint_polynomial(&trimmed))?;

    // unitary completion of V*, then drop the q₀ column
    let w = realization.block_matrix().adjoint();
    let full = stage("completion", synth::isometry_complete(&w, SYNTH_TOL))?;
    let t = &full.added_rows;
    let keep: Vec<usize> = (0..mu).chain(rows.len()..rows.len() + states).collect();
    let mut added = CMatrix::zeros(mu, mu + states);
    for (i, row) in (0..t.nrows().min(mu)).enumerate() {
        for (j, &col) in keep.iter().enumerate() {
            added[(i, j)] = t[(row, col)];
        }
    }
    let completion = CompletionReport {
        base_matrix: synth::adjoint_block(&trimmed),
        isometry_defect: linalg::isometry_defect(&linalg::vstack(&synth::adjoint_block(&trimmed), &added)),
        defect_rank: t.nrows(),
        added_rows: added,
    };
    let u0 = stage("assembly", synth::build_u0(&completion, &u, &trimmed.state_vars()))?;
    let mut framelets = stage("assembly", synth::assemble_framelets(&u0, &setup))?;
    let uep = stage("verification", synth::verify_uep(p, &framelets, &setup, SYNTH_TOL))?;
    if !uep.pass {
        return Err(Error::at("verification")(Error::Verification {
            what: "unitary extension principle".into(),
            residual: uep.residual.max(uep.sampled_residual),
            tol: SYNTH_TOL,
        }));
    }
    framelets.report.uep = Some(uep);
    Ok(UnivariateTrace {
        q0,
        realization,
        u,
        completion,
        framelets,
    })
}

/// Exactly `m` framelet masks for a univariate mask with dilation `m`.
pub fn univariate_tight_frame(p: &LaurentPoly, m: i64) -> Result<FrameletSet> {
    Ok(univariate_tight_frame_trace(p, m)?.framelets)
}
