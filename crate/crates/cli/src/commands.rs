use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use tightframe::boxspline::{self, BoxSplineSpec};
use tightframe::certify::{self, psd_factor, CERT_TOL, PSD_TOL};
use tightframe::fixtures;
use tightframe::linalg::{self, matrix_json};
use tightframe::realize::{self, Realization, ISOMETRY_WARN, NILPOTENT_TOL};
use tightframe::symmetry::{self, DEFECT_ROUTE_TOL};
use tightframe::synth::{self, FrameletSet, PipelineOptions, SYNTH_TOL};
use tightframe::univariate;
use tightframe::{bilinear, DilationSetup, Error, LaurentPoly, PolyMatrix, Result};

use crate::report::Stages;

/// Grid-screen floor for `min (defect) ≥ −tol`.
pub const GRID_TOL: f64 = 1e-9;
const SUM_RULE_TOL: f64 = 1e-10;

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

/// `"2I:d"` or a JSON file holding either `{"M": …}` or a bare matrix.
pub fn dilation(arg: Option<&str>, dim: usize) -> Result<DilationSetup> {
    let Some(arg) = arg else {
        return DilationSetup::dyadic(dim);
    };
    let setup = if let Some(d) = arg.strip_prefix("2I:") {
        let d: usize = d
            .parse()
            .map_err(|_| Error::Input(format!("bad dimension in dilation {arg:?}")))?;
        DilationSetup::dyadic(d)?
    } else {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum DilationFile {
            Setup(DilationSetup),
            Matrix(Vec<Vec<i64>>),
        }
        match load::<DilationFile>(Path::new(arg))? {
            DilationFile::Setup(s) => s,
            DilationFile::Matrix(m) => DilationSetup::new(m)?,
        }
    };
    if setup.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: setup.dim(),
        });
    }
    Ok(setup)
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn transfer_gap(r: &Realization, rows: &[LaurentPoly]) -> Result<f64> {
    let f = r.transfer_expand()?;
    Ok(rows
        .iter()
        .enumerate()
        .map(|(i, e)| f.get(i, 0).max_diff(e))
        .fold(0.0, f64::max))
}

pub fn analyze(
    p: &LaurentPoly,
    setup: &DilationSetup,
    tol: Option<f64>,
    grid: Option<usize>,
    st: &mut Stages,
) -> Result<Value> {
    let tol = tol.unwrap_or(SUM_RULE_TOL);
    let sums = symmetry::sum_rules_check(p, setup, tol);
    st.push("sum rules", sums.residuals.iter().copied().fold(0.0, f64::max), tol);
    let defect = symmetry::subqmf_defect(p, setup)?;
    let by_shifts = symmetry::defect_by_shifts(p, setup)?;
    st.push("defect routes", defect.max_diff(&by_shifts), DEFECT_ROUTE_TOL);
    let n = grid.unwrap_or_else(|| symmetry::default_grid(setup.dim()));
    let low = symmetry::grid_min(&defect, n);
    st.push("sub-QMF grid", (-low).max(0.0), GRID_TOL);
    Ok(json!({
        "dilation": setup,
        "m": setup.m(),
        "sumRules": sums,
        "qmf": symmetry::qmf_check(p, setup, tol)?,
        "grid": n,
        "defectGridMin": low,
        "defect": defect,
    }))
}

pub fn certify_cmd(p: &LaurentPoly, setup: &DilationSetup, tol: Option<f64>, st: &mut Stages) -> Result<Value> {
    let tol = tol.unwrap_or(CERT_TOL);
    let dec = certify::agler_nonneg(p, setup)?;
    st.push("bilinear identity", dec.identity_residual(), tol);
    let cert = certify::certificate_from_agler(&dec)?;
    let check = certify::verify_sos(&cert, tol);
    st.push("certificate", check.residual, tol);
    Ok(json!({
        "A0": matrix_json(&dec.a0),
        "Adiag": dec.adiag,
        "baseIndices": dec.base_indices,
        "dirIndices": dec.dir_indices,
        "dominanceMargin": dec.min_dominance_margin(),
        "certificate": cert.report(),
        "verification": check,
    }))
}

fn custom_rows(p: &LaurentPoly, setup: &DilationSetup, q0: &PolyMatrix) -> Result<Vec<LaurentPoly>> {
    if q0.cols() != 1 || q0.dim() != setup.dim() {
        return Err(Error::Shape(format!(
            "q0 must be a column in {} variables",
            setup.dim()
        )));
    }
    let mut rows = symmetry::polyphase_split(p, setup)?.scaled().components;
    rows.extend(q0.column_entries(0));
    Ok(rows)
}

pub fn realize_cmd(
    p: &LaurentPoly,
    setup: &DilationSetup,
    q0: Option<&PolyMatrix>,
    tol: Option<f64>,
    st: &mut Stages,
) -> Result<Value> {
    let tol = tol.unwrap_or(ISOMETRY_WARN);
    let (r, rows) = match q0 {
        Some(q0) => {
            let rows = custom_rows(p, setup, q0)?;
            let blocks = realize::direction_blocks(&rows, setup.dim(), PSD_TOL)?;
            (realize::realize_from_blocks(&rows, &blocks, setup.dim())?, rows)
        }
        None => {
            let dec = certify::agler_nonneg(p, setup)?;
            let h = psd_factor(&dec.a0, PSD_TOL)?;
            let mut rows = dec.fp();
            rows.extend(bilinear::rows_times_monomials(&h, &dec.base_indices, setup.dim()));
            (realize::build_realization(&dec, &h)?, rows)
        }
    };
    st.push("isometry", r.isometry_defect(), tol);
    st.push("nilpotency", r.nilpotency_residual(), NILPOTENT_TOL);
    st.push("transfer expansion", transfer_gap(&r, &rows)?, tol);
    to_value(&r.report())
}

fn framelet_stages(fs: &FrameletSet, st: &mut Stages) {
    if let Some(u) = &fs.report.uep {
        st.push("UEP", u.residual, u.tol);
        st.push("UEP sampled", u.sampled_residual, u.tol);
    }
}

pub fn framelets(
    p: &LaurentPoly,
    setup: &DilationSetup,
    q0: Option<&PolyMatrix>,
    tol: Option<f64>,
    st: &mut Stages,
) -> Result<Value> {
    let opts = PipelineOptions {
        custom_q0: q0.cloned(),
        q0_rows: None,
        tol,
    };
    let t = synth::frame_pipeline_trace(p, setup, &opts)?;
    let tol = tol.unwrap_or(SYNTH_TOL);
    st.push("adjunction", synth::adjunction_residual(&t.trimmed, &t.u)?, tol);
    st.push("completion", t.completion.isometry_defect, tol);
    framelet_stages(&t.framelets, st);
    Ok(json!({
        "N": t.framelets.n,
        "defectRank": t.completion.defect_rank,
        "realization": t.realization.report(),
        "u": t.u,
        "framelets": t.framelets,
    }))
}

pub fn univariate_cmd(p: &LaurentPoly, m: i64, st: &mut Stages) -> Result<Value> {
    let t = univariate::univariate_tight_frame_trace(p, m)?;
    st.push("nilpotency", t.realization.nilpotency_residual(), NILPOTENT_TOL);
    framelet_stages(&t.framelets, st);
    Ok(json!({
        "m": m,
        "q0": t.q0,
        "realization": t.realization.report(),
        "framelets": t.framelets,
    }))
}

fn parse_ints(s: &str) -> Result<Vec<i64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Error::Input(format!("not an integer: {x:?}")))
        })
        .collect()
}

/// Moves the support into the non-negative orthant by a monomial factor,
/// which keeps the sum rules and the defect unchanged.
fn shift_to_nonneg(p: &LaurentPoly) -> LaurentPoly {
    match p.support_box() {
        Some((lo, _)) if lo.iter().any(|x| *x < 0) => {
            let e: Vec<i64> = lo.iter().map(|x| (-x).max(0)).collect();
            p * &LaurentPoly::monomial(e, Complex64::new(1.0, 0.0))
        }
        _ => p.clone(),
    }
}

pub fn boxspline_cmd(
    directions: &str,
    mult: Option<&str>,
    with_framelets: bool,
    tol: Option<f64>,
    st: &mut Stages,
) -> Result<Value> {
    let dirs: Vec<Vec<i64>> = directions.split(';').map(parse_ints).collect::<Result<_>>()?;
    let mult: Vec<u32> = match mult {
        Some(m) => parse_ints(m)?
            .into_iter()
            .map(|x| u32::try_from(x).map_err(|_| Error::Input(format!("bad multiplicity {x}"))))
            .collect::<Result<_>>()?,
        None => vec![1; dirs.len()],
    };
    let spec = BoxSplineSpec::new(dirs, mult)?;
    let mask = boxspline::boxspline_mask(&spec);
    let bound = boxspline::bound_l(&spec);
    let cert = boxspline::sos_boxspline(&spec)?;
    let check = certify::verify_sos(&cert, tol.unwrap_or(CERT_TOL));
    st.push("certificate", check.residual, check.tol);
    st.flag("length within bound", cert.length <= bound);
    let mut out = json!({
        "spec": spec,
        "mask": mask,
        "boundL": bound,
        "certificate": cert.report(),
    });
    if with_framelets {
        let setup = DilationSetup::dyadic(spec.dim)?;
        let shifted = shift_to_nonneg(&mask);
        let opts = PipelineOptions {
            tol,
            ..Default::default()
        };
        let fs = synth::frame_pipeline(&shifted, &setup, &opts)?;
        framelet_stages(&fs, st);
        out["shiftedMask"] = to_value(&shifted)?;
        out["framelets"] = to_value(&fs)?;
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(untagged)]
pub enum MaskList {
    Set { masks: Vec<LaurentPoly> },
    List(Vec<LaurentPoly>),
}

pub fn verify(
    p: &LaurentPoly,
    setup: &DilationSetup,
    masks: MaskList,
    tol: Option<f64>,
    st: &mut Stages,
) -> Result<Value> {
    let masks = match masks {
        MaskList::Set { masks } | MaskList::List(masks) => masks,
    };
    if let Some(bad) = masks.iter().find(|a| a.dim() != setup.dim()) {
        return Err(Error::DimensionMismatch {
            expected: setup.dim(),
            found: bad.dim(),
        });
    }
    let u0 = PolyMatrix::zeros(setup.m(), 0, setup.dim());
    let mut fs = synth::assemble_framelets(&u0, setup)?;
    fs.n = masks.len();
    fs.masks = masks;
    let report = synth::verify_uep(p, &fs, setup, tol.unwrap_or(SYNTH_TOL))?;
    st.push("UEP", report.residual, report.tol);
    st.push("UEP sampled", report.sampled_residual, report.tol);
    to_value(&report)
}

pub fn example(
    name: &str,
    with_framelets: bool,
    grid: Option<usize>,
    tol: Option<f64>,
    st: &mut Stages,
) -> Result<Value> {
    match name {
        "b111" => {
            let p = fixtures::b111();
            let setup = DilationSetup::dyadic(2)?;
            if with_framelets {
                let q0 = fixtures::b111a_q0();
                let v = framelets(&p, &setup, Some(&q0), tol, st)?;
                st.push(
                    "u matches reference",
                    {
                        let u: PolyMatrix = serde_json::from_value(v["u"].clone())?;
                        u.max_diff(&fixtures::b111a_u())
                    },
                    tol.unwrap_or(SYNTH_TOL),
                );
                Ok(v)
            } else {
                let cert = certify_cmd(&p, &setup, tol, st)?;
                let dec = certify::agler_nonneg(&p, &setup)?;
                let r = realize::build_realization(&dec, &fixtures::b111_h0())?;
                let gap = linalg::max_abs(&(r.block_matrix() - fixtures::b111_abcd()));
                st.push("realization matches reference", gap, 1e-12);
                Ok(json!({ "mask": p, "decomposition": cert, "realization": r.report() }))
            }
        }
        "drury" => {
            let p = fixtures::fixture_drury();
            let setup = DilationSetup::dyadic(3)?;
            let rejection = certify::agler_nonneg(&p, &setup);
            let rejected = matches!(rejection, Err(Error::Precondition(_)));
            st.flag("rejected by the non-negative decomposition", rejected);
            let n = grid.unwrap_or(32);
            let defect = symmetry::subqmf_defect(&p, &setup)?;
            let low = symmetry::grid_min(&defect, n);
            st.push("sub-QMF grid", (-low).max(0.0), GRID_TOL);
            let q1 = fixtures::drury_q().eval(&[Complex64::new(1.0, 0.0); 3])?;
            Ok(json!({
                "mask": p,
                "rejection": rejection.err().map(|e| e.to_string()),
                "grid": n,
                "defectGridMin": low,
                "qAtOnes": { "re": q1.re, "im": q1.im },
                "maxAbsG": symmetry::grid_max_abs(&fixtures::drury_g(), n),
            }))
        }
        "haar" => {
            let p = fixtures::haar();
            let setup = DilationSetup::dyadic(1)?;
            framelets(&p, &setup, None, tol, st)
        }
        other => Err(Error::Input(format!(
            "unknown example {other:?}; expected b111, drury or haar"
        ))),
    }
}
