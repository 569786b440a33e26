//! Reference masks and the explicit matrices of the worked box-spline
//! examples. Coset order is `(0,0),(1,0),(0,1),(1,1)`; state order for the
//! bivariate realizations is `E(ξ) = diag(ξ₁, ξ₂, ξ₂)`.

use num_complex::Complex64;

use crate::laurent::{LaurentPoly, MultiIndex, PolyMatrix};
use crate::linalg::{real_matrix, CMatrix};

const S2: f64 = std::f64::consts::SQRT_2;

fn s3() -> f64 {
    3f64.sqrt()
}

fn s6() -> f64 {
    6f64.sqrt()
}

fn poly(terms: &[(&[i64], f64)]) -> LaurentPoly {
    LaurentPoly::from_real(terms[0].0.len(), terms)
}

/// Haar mask `(1+z)/2`.
pub fn haar() -> LaurentPoly {
    poly(&[(&[0], 0.5), (&[1], 0.5)])
}

/// Univariate B-spline mask `((1+z)/2)^k`.
pub fn bspline(k: u32) -> LaurentPoly {
    haar().pow(k)
}

/// Three-directional box-spline mask `B111`.
pub fn b111() -> LaurentPoly {
    let e = 0.125;
    poly(&[
        (&[0, 0], e),
        (&[1, 0], e),
        (&[0, 1], e),
        (&[1, 1], 2.0 * e),
        (&[1, 2], e),
        (&[2, 1], e),
        (&[2, 2], e),
    ])
}

/// `H₀` with `H₀ᵀH₀ = A₀` over `Ĩ = {(0,0),(1,0),(0,1),(1,1)}`.
pub fn b111_h0() -> CMatrix {
    real_matrix(3, 4, &[1., -1., 0., 0., 1., 0., -1., 0., 1., 0., 0., -1.]).map(|c| c * 0.25)
}

/// The 10×4 isometric block `[[A, B], [C, D]]` of `(f_p, H₀v)`.
pub fn b111_abcd() -> CMatrix {
    let t = 2.0 * S2;
    real_matrix(
        10,
        4,
        &[
            1., 0., 0., t, //
            1., 0., t, 0., //
            1., 2., 0., 0., //
            2., 0., 0., 0., //
            1., -2., 0., 0., //
            1., 0., -t, 0., //
            1., 0., 0., -t, //
            2., 0., 0., 0., //
            S2, 0., 0., 0., //
            0., t, 0., 0.,
        ],
    )
    .map(|c| c * 0.25)
}

/// The two-row extension `q̃₀` of `f_p` for `B111`, in `ξ`.
pub fn b111a_q0() -> PolyMatrix {
    let a = s6() / 8.0;
    let b = S2 / 8.0;
    PolyMatrix::column(
        2,
        vec![
            poly(&[(&[0, 0], a), (&[1, 0], -a)]),
            poly(&[(&[0, 0], 2.0 * b), (&[0, 1], -b), (&[1, 1], -b)]),
        ],
    )
    .expect("fixed shape")
}

/// The 9×4 isometric block for `(f_p, q̃₀)`.
pub fn b111a_abcd() -> CMatrix {
    let f = 4.0 * S2;
    real_matrix(
        9,
        4,
        &[
            2.,
            0.,
            4.,
            -f, //
            2.,
            0.,
            4.,
            f, //
            2.,
            4.,
            0.,
            0., //
            4.,
            0.,
            0.,
            0., //
            s6(),
            -2. * s6(),
            0.,
            0., //
            2. * S2,
            0.,
            -f,
            0., //
            4.,
            0.,
            0.,
            0., //
            2.,
            4.,
            0.,
            0., //
            S2,
            -2. * S2,
            0.,
            0.,
        ],
    )
    .map(|c| c * 0.125)
}

/// `u(ξ) = B̃(I − E(ξ)D)⁻¹` for the trimmed `B111a` realization.
pub fn b111a_u() -> PolyMatrix {
    let h = 0.5;
    let c = |x: f64| LaurentPoly::real_constant(2, x);
    let z = LaurentPoly::zero(2);
    PolyMatrix::from_rows(
        2,
        vec![
            vec![poly(&[(&[0, 1], h)]), c(h), c(-S2 * h)],
            vec![z.clone(), c(h), c(S2 * h)],
            vec![c(h), z.clone(), z.clone()],
            vec![z.clone(), z.clone(), z],
        ],
    )
    .expect("fixed shape")
}

/// The five completion rows `(T₀, T₁)`.
pub fn b111a_t() -> CMatrix {
    let (r2, r3, r6) = (S2, s3(), s6());
    real_matrix(
        5,
        7,
        &[
            6. * r3,
            6. * r3,
            -2. * r3,
            -4. * r3,
            -4. * r3,
            -2. * r3,
            -r6, //
            0.,
            0.,
            -12. * r2,
            0.,
            0.,
            12. * r2,
            0., //
            0.,
            0.,
            0.,
            12. * r2,
            -12. * r2,
            0.,
            0., //
            0.,
            0.,
            4. * r6,
            -4. * r6,
            -4. * r6,
            4. * r6,
            4. * r3, //
            0.,
            0.,
            0.,
            0.,
            0.,
            0.,
            12. * r3,
        ],
    )
    .map(|c| c / 24.0)
}

/// The five framelet masks `a₁..a₅` built from `(T₀, T₁)`.
pub fn b111a_framelets() -> Vec<LaurentPoly> {
    let (r2, r3, r6) = (S2, s3(), s6());
    let k = 1.0 / 24.0;
    vec![
        poly(&[
            (&[0, 0], 3. * r3 * k),
            (&[1, 0], 3. * r3 * k),
            (&[0, 1], -r3 * k),
            (&[1, 1], -2. * r3 * k),
            (&[2, 1], -r3 * k),
            (&[1, 2], -r3 * k),
            (&[2, 2], -r3 * k),
        ]),
        poly(&[(&[0, 1], -6. * r2 * k), (&[0, 2], 3. * r2 * k), (&[1, 2], 3. * r2 * k)]),
        poly(&[(&[1, 1], 6. * r2 * k), (&[2, 1], -3. * r2 * k), (&[2, 2], -3. * r2 * k)]),
        poly(&[
            (&[0, 1], 2. * r6 * k),
            (&[1, 1], -2. * r6 * k),
            (&[2, 1], -r6 * k),
            (&[1, 2], 2. * r6 * k),
            (&[2, 2], -r6 * k),
        ]),
        poly(&[(&[0, 2], -3. * r6 * k), (&[1, 2], 3. * r6 * k)]),
    ]
}

/// `g(z) = z₁³ + z₂³ + z₃³ − 3z₁z₂z₃`.
pub fn drury_g() -> LaurentPoly {
    poly(&[
        (&[3, 0, 0], 1.0),
        (&[0, 3, 0], 1.0),
        (&[0, 0, 3], 1.0),
        (&[1, 1, 1], -3.0),
    ])
}

/// `q(z) = g(ωz₁, ωz₂, z₃) / g(ω, ω, 1)` with `ω = e^{2πi/3}`.
pub fn drury_q() -> LaurentPoly {
    let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let g = drury_g();
    let norm = g.eval(&[w, w, Complex64::new(1.0, 0.0)]).expect("no negative powers");
    g.map_coeffs(|e, c| c * w.powi((e.0[0] + e.0[1]) as i32) / norm)
}

/// `p(z) = q(z²)·Σ_{α∈{0,1}³} z^α / 8`, with `M = 2I₃`.
pub fn fixture_drury() -> LaurentPoly {
    let q2 = drury_q().map_exponents(3, |e| MultiIndex(e.0.iter().map(|x| 2 * x).collect()));
    let mut box_sum = Vec::new();
    for k in 0..8i64 {
        box_sum.push((vec![k & 1, (k >> 1) & 1, (k >> 2) & 1], Complex64::new(0.125, 0.0)));
    }
    let b = LaurentPoly::from_terms(3, box_sum).expect("dim 3");
    &q2 * &b
}
