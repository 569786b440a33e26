//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tightframe::boxspline::{self, BoxSplineSpec};
use tightframe::certify::{self, psd_factor, PSD_TOL};
use tightframe::fixtures;
use tightframe::linalg::{self, real_matrix};
use tightframe::realize;
use tightframe::symmetry::{self, grid_max_abs, grid_min};
use tightframe::synth::{self, PipelineOptions};
use tightframe::univariate;
use tightframe::{DilationSetup, Error, LaurentPoly};

/// Outcome of one named check inside a criterion.
struct Check {
    what: String,
    ok: bool,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.0.push(Check { what: what.into(), ok });
    }

    fn le(&mut self, value: f64, tol: f64, what: &str) {
        self.check(value <= tol, format!("{what}: {value:.3e} <= {tol:.0e}"));
    }

    fn note(&mut self, what: impl Into<String>) {
        self.0.push(Check {
            what: format!("info: {}", what.into()),
            ok: true,
        });
    }

    fn runtime(&mut self, t: Duration, limit: f64) {
        let s = t.as_secs_f64();
        self.check(s < limit, format!("runtime {s:.3} s < {limit} s"));
    }
}

fn s2() -> DilationSetup {
    DilationSetup::dyadic(2).unwrap()
}

fn c1_decomposition(c: &mut Checks) {
    let t = Instant::now();
    let dec = certify::agler_nonneg(&fixtures::b111(), &s2()).unwrap();
    let elapsed = t.elapsed();
    let a0 = real_matrix(
        4,
        4,
        &[3., -1., -1., -1., -1., 1., 0., 0., -1., 0., 1., 0., -1., 0., 0., 1.],
    )
    .map(|x| x / 16.0);
    c.le(linalg::max_abs(&(&dec.a0 - a0)), 1e-12, "A0 entrywise");
    c.check(
        dec.adiag[0].len() == 1,
        format!("pruned A1 size {}", dec.adiag[0].len()),
    );
    c.le((dec.adiag[0][0] - 0.25).abs(), 1e-12, "A1 = 1/4");
    c.check(
        dec.adiag[1].len() == 2,
        format!("pruned A2 size {}", dec.adiag[1].len()),
    );
    let a2 = dec.adiag[1].iter().map(|x| (x - 0.125).abs()).fold(0.0, f64::max);
    c.le(a2, 1e-12, "A2 = diag(1,1)/8");
    c.runtime(elapsed, 1.0);
}

fn c2_certificate(c: &mut Checks) {
    let dec = certify::agler_nonneg(&fixtures::b111(), &s2()).unwrap();
    let cert = certify::certificate_from_agler(&dec).unwrap();
    c.check(cert.length == 3, format!("certificate length {} = 3", cert.length));
    c.le(cert.residual(), 1e-10, "certificate residual");
    let h = psd_factor(&dec.a0, PSD_TOL).unwrap();
    let mut rows = dec.fp();
    rows.extend(tightframe::bilinear::rows_times_monomials(&h, &dec.base_indices, 2));
    let norm = rows
        .iter()
        .fold(LaurentPoly::zero(2), |acc, r| &acc + &(&r.conj_reflect() * r));
    c.le(norm.max_diff(&LaurentPoly::one(2)), 1e-12, "|f_p|^2 + |q0|^2 - 1");
}

fn c3_realization(c: &mut Checks) {
    let dec = certify::agler_nonneg(&fixtures::b111(), &s2()).unwrap();
    let h0 = fixtures::b111_h0();
    let r = realize::build_realization(&dec, &h0).unwrap();
    c.le(r.isometry_defect(), 1e-12, "isometry defect");
    c.check(
        r.state_blocks == vec![1, 2],
        format!("state blocks {:?}", r.state_blocks),
    );
    c.check(
        r.state_vars() == vec![0, 1, 1],
        format!("E = diag over variables {:?}", r.state_vars()),
    );
    let f = r.transfer_expand().unwrap();
    let mut rows = dec.fp();
    rows.extend(tightframe::bilinear::rows_times_monomials(&h0, &dec.base_indices, 2));
    c.check(f.rows() == 7, format!("{} output rows", f.rows()));
    let gap = rows
        .iter()
        .enumerate()
        .map(|(i, e)| f.get(i, 0).max_diff(e))
        .fold(0.0, f64::max);
    c.le(gap, 1e-12, "transfer vs reference (f_p, q0)");
}

fn c4_end_to_end(c: &mut Checks) {
    let t = Instant::now();
    let opts = PipelineOptions {
        custom_q0: Some(fixtures::b111a_q0()),
        ..Default::default()
    };
    let trace = synth::frame_pipeline_trace(&fixtures::b111(), &s2(), &opts).unwrap();
    let elapsed = t.elapsed();
    c.le(trace.u.max_diff(&fixtures::b111a_u()), 1e-10, "u(xi) entrywise");
    c.check(
        trace.completion.defect_rank == 5,
        format!("completion adds {} rows", trace.completion.defect_rank),
    );
    let fs = &trace.framelets;
    c.check(fs.n == 5, format!("N = {}", fs.n));
    let expected = fixtures::b111a_framelets();
    match synth::match_up_to_phase(&fs.masks, &expected) {
        Some((perm, gap)) => c.le(gap, 1e-10, &format!("framelets up to permutation {perm:?} and phase")),
        None => c.check(false, "framelet count differs"),
    }
    let in_box = fs.masks.iter().all(|a| {
        a.support_box()
            .is_none_or(|(lo, hi)| lo.iter().all(|x| *x >= 0) && hi.iter().all(|x| *x <= 2))
    });
    c.check(in_box, "support in [0,2]^2, per-variable degree <= 2");
    let uep = fs.report.uep.as_ref().unwrap();
    c.le(uep.residual, 1e-10, "UEP residual");
    c.runtime(elapsed, 1.0);

    // both row sets factor the same defect, so they differ by a unitary
    let ours = &trace.completion.added_rows;
    let theirs = fixtures::b111a_t();
    let w = ours * linalg::pseudo_inverse(&theirs, 1e-12);
    let mix = linalg::max_abs(&(&w * &theirs - ours));
    c.note(format!(
        "completion rows = W * reference rows with |W*W - I| = {:.1e}, fit {:.1e}",
        linalg::isometry_defect(&w),
        mix
    ));
}

fn c5_boxspline(c: &mut Checks) {
    let t = Instant::now();
    let dirs: [Vec<i64>; 4] = [vec![1, 0], vec![0, 1], vec![1, 1], vec![1, -1]];
    for (r, bound) in [(2usize, 2usize), (3, 6), (4, 10)] {
        let spec = BoxSplineSpec::new(dirs[..r].to_vec(), vec![1; r]).unwrap();
        c.check(boxspline::bound_l(&spec) == bound, format!("r={r}: bound {bound}"));
        let cert = boxspline::sos_boxspline(&spec).unwrap();
        c.check(
            cert.length <= bound,
            format!("r={r}: length {} <= {bound}", cert.length),
        );
        let target = symmetry::defect_xi(&boxspline::boxspline_mask(&spec), &s2()).unwrap();
        let gap = cert.sum_of_squares().max_diff(&target);
        c.le(gap, 1e-10, &format!("r={r}: certificate vs mask defect"));
    }
    c.runtime(t.elapsed(), 5.0);
}

fn random_complex_poly(rng: &mut ChaCha8Rng, deg: usize) -> LaurentPoly {
    let terms: Vec<(Vec<i64>, Complex64)> = (0..=deg)
        .map(|k| {
            (
                vec![k as i64],
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            )
        })
        .collect();
    LaurentPoly::from_terms(1, terms).unwrap()
}

fn c6_fejer_riesz(c: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_res: f64 = 0.0;
    let mut worst_root: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..100 {
        let deg = rng.random_range(0..=20);
        let g = random_complex_poly(&mut rng, deg);
        let f = &g.conj_reflect() * &g;
        match univariate::fejer_riesz(&f) {
            Ok(s) => {
                worst_res = worst_res.max(s.residual);
                worst_root = worst_root.max(s.max_root_modulus());
            }
            Err(_) => failures += 1,
        }
    }
    c.check(failures == 0, format!("{failures} of 100 factorizations failed"));
    c.le(worst_res, 1e-8, "worst residual");
    c.le(worst_root - 1.0, 1e-7, "largest root modulus - 1");
}

fn c7_univariate(c: &mut Checks) {
    for k in 1..=3 {
        let t = univariate::univariate_tight_frame_trace(&fixtures::bspline(k), 2).unwrap();
        c.check(
            t.framelets.n == 2,
            format!("k={k}: {} generator columns", t.framelets.n),
        );
        c.le(
            t.framelets.report.uep.as_ref().unwrap().residual,
            1e-10,
            &format!("k={k}: UEP residual"),
        );
        c.le(
            t.realization.nilpotency_residual(),
            1e-12,
            &format!("k={k}: D nilpotent"),
        );
    }
}

/// Non-negative mask on `[0,2]^2` whose polyphase components each sum to 1/4.
fn random_nonneg_mask(rng: &mut ChaCha8Rng) -> LaurentPoly {
    let setup = s2();
    let mut comps = Vec::new();
    for chi in 0..4 {
        let coset = &setup.cosets()[chi];
        let pts: Vec<Vec<i64>> = [[0i64, 0], [1, 0], [0, 1], [1, 1]]
            .iter()
            .map(|b| vec![coset.0[0] + 2 * b[0], coset.0[1] + 2 * b[1]])
            .filter(|e| e.iter().all(|x| *x <= 2))
            .collect();
        let w: Vec<f64> = pts.iter().map(|_| rng.random_range(0.0..1.0)).collect();
        let s: f64 = w.iter().sum();
        comps.extend(
            pts.into_iter()
                .zip(w)
                .map(|(e, x)| (e, Complex64::new(x / s / 4.0, 0.0))),
        );
    }
    LaurentPoly::from_terms(2, comps).unwrap()
}

fn c8_closure(c: &mut Checks) {
    let setup = s2();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = f64::INFINITY;
    let mut rejected = 0;
    for _ in 0..50 {
        let p = random_nonneg_mask(&mut rng);
        let q = random_nonneg_mask(&mut rng);
        if certify::agler_nonneg(&p, &setup).is_err() || certify::agler_nonneg(&q, &setup).is_err() {
            rejected += 1;
        }
        let defect = symmetry::subqmf_defect(&(&p * &q), &setup).unwrap();
        worst = worst.min(grid_min(&defect, 64));
    }
    c.check(rejected == 0, format!("{rejected} generated masks rejected"));
    c.check(
        worst >= -1e-9,
        format!("worst product defect minimum {worst:.3e} >= -1e-9"),
    );
}

fn c9_drury(c: &mut Checks) {
    let t = Instant::now();
    let p = fixtures::fixture_drury();
    let setup = DilationSetup::dyadic(3).unwrap();
    let rejected = matches!(certify::agler_nonneg(&p, &setup), Err(Error::Precondition(_)));
    c.check(rejected, "rejected with a precondition error");
    let defect = symmetry::subqmf_defect(&p, &setup).unwrap();
    let low = grid_min(&defect, 32);
    c.check(low >= -1e-9, format!("defect minimum {low:.3e} >= -1e-9"));
    let g = fixtures::drury_g();
    let top = grid_max_abs(&g, 32);
    let target = 3.0 * 3f64.sqrt();
    c.le((top - target).abs(), 1e-2, &format!("max |g| = {top:.6} vs 3*sqrt(3)"));
    c.runtime(t.elapsed(), 10.0);

    c.note(format!("max |g| on the 64^3 grid: {:.6}", grid_max_abs(&g, 64)));
    let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let rotated = g.map_coeffs(|e, x| x * w.powi((e.0[0] + e.0[1]) as i32));
    c.note(format!(
        "max |g| over the grid rotated by (w, w, 1): {:.12}",
        grid_max_abs(&rotated, 32)
    ));
}

fn arb_poly(dim: usize) -> impl Strategy<Value = LaurentPoly> {
    prop::collection::vec(
        (prop::collection::vec(-4i64..=4, dim), -1.0f64..1.0, -1.0f64..1.0),
        0..12,
    )
    .prop_map(move |terms| {
        LaurentPoly::from_terms(dim, terms.into_iter().map(|(e, re, im)| (e, Complex64::new(re, im)))).unwrap()
    })
}

fn arb_setup() -> impl Strategy<Value = DilationSetup> {
    prop_oneof![
        (2i64..=4).prop_map(|m| vec![vec![m]]),
        prop::collection::vec(-3i64..=3, 4).prop_map(|v| vec![vec![v[0], v[1]], vec![v[2], v[3]]]),
    ]
    .prop_filter_map("invalid dilation", |m| {
        let det = if m.len() == 1 {
            m[0][0]
        } else {
            m[0][0] * m[1][1] - m[0][1] * m[1][0]
        };
        (2..=9)
            .contains(&det.abs())
            .then(|| DilationSetup::new(m).ok())
            .flatten()
    })
}

fn c10_round_trips(c: &mut Checks) {
    let cases = 1000;
    let run = |name: &str, c: &mut Checks, f: &mut dyn FnMut(&mut TestRunner) -> Result<(), String>| {
        let mut runner = TestRunner::new(Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        });
        match f(&mut runner) {
            Ok(()) => c.check(true, format!("{name}: {cases} cases")),
            Err(e) => c.check(false, format!("{name}: {e}")),
        }
    };
    run("conj_reflect involution", c, &mut |r| {
        r.run(&(1usize..=3).prop_flat_map(arb_poly), |p| {
            prop_assert!(p.conj_reflect().conj_reflect() == p);
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    run("exact polyphase split/merge", c, &mut |r| {
        r.run(
            &arb_setup().prop_flat_map(|s| (arb_poly(s.dim()), Just(s))),
            |(p, s)| {
                let v = symmetry::polyphase_split(&p, &s).unwrap();
                prop_assert!(symmetry::polyphase_merge(&v).unwrap() == p);
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
    });
    run("xi substitution round trip", c, &mut |r| {
        r.run(
            &arb_setup().prop_flat_map(|s| (arb_poly(s.dim()), Just(s))),
            |(p, s)| {
                prop_assert!(symmetry::to_xi(&symmetry::from_xi(&p, &s), &s).unwrap() == p);
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
    });
    run("shift action composes", c, &mut |r| {
        r.run(
            &arb_setup().prop_flat_map(|s| {
                let m = s.m();
                (arb_poly(s.dim()), 0..m, 0..m, Just(s))
            }),
            |(p, a, b, s)| {
                let twice = symmetry::shift_action(&symmetry::shift_action(&p, a, &s).unwrap(), b, &s).unwrap();
                let once = symmetry::shift_action(&p, s.compose_dual(a, b), &s).unwrap();
                prop_assert!(twice.max_diff(&once) <= 1e-12);
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
    });
}

fn main() {
    type Criterion = (&'static str, fn(&mut Checks));
    let criteria: [Criterion; 10] = [
        ("B111 decomposition fixture", c1_decomposition),
        ("B111 certificate", c2_certificate),
        ("B111 realization", c3_realization),
        ("B111a end-to-end", c4_end_to_end),
        ("box-spline bounds", c5_boxspline),
        ("Fejer-Riesz property suite", c6_fejer_riesz),
        ("univariate frame", c7_univariate),
        ("multiplicative closure", c8_closure),
        ("Drury negative fixture", c9_drury),
        ("round-trip and involution suites", c10_round_trips),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let mut checks = Checks::default();
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| run(&mut checks)));
        if let Err(e) = &outcome {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            checks.check(false, format!("panicked: {msg}"));
        }
        let ok = checks.0.iter().all(|c| c.ok);
        if !ok {
            failed += 1;
        }
        println!("{} criterion {:>2}: {name}", if ok { "PASS" } else { "FAIL" }, k + 1);
        for c in &checks.0 {
            println!("      [{}] {}", if c.ok { "ok" } else { "FAILED" }, c.what);
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
