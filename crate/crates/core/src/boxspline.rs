//! Box-spline masks `Π_j ((1 + z^{θ_j})/2)^{ℓ_j}` for dilation `2I`.

use num_complex::Complex64;
use serde::Serialize;

use crate::certify::{self, SosCertificate, TelescopeFactor};
use crate::error::{Error, Result};
use crate::laurent::{LaurentPoly, MultiIndex};
use crate::symmetry::{self, DilationSetup};
use crate::univariate;

#[derive(Clone, Debug, Serialize)]
pub struct BoxSplineSpec {
    pub directions: Vec<MultiIndex>,
    pub multiplicities: Vec<u32>,
    pub dim: usize,
    /// Direction indices with a spanning `d`-subset (mod 2) first.
    pub order: Vec<usize>,
}

fn parity_bits(theta: &MultiIndex) -> u64 {
    theta
        .0
        .iter()
        .enumerate()
        .filter(|(_, x)| x.rem_euclid(2) == 1)
        .fold(0, |acc, (k, _)| acc | (1 << k))
}

/// Inserts `v` into a GF(2) echelon basis keyed by pivot bit.
fn reduce(basis: &[(u32, u64)], mut v: u64) -> u64 {
    for &(pivot, b) in basis {
        if v >> pivot & 1 == 1 {
            v ^= b;
        }
    }
    v
}

/// Inverse of the `d × d` GF(2) matrix with bit-packed rows.
fn gf2_inverse(rows: &[u64], d: usize) -> Option<Vec<u64>> {
    let mut a = rows.to_vec();
    let mut inv: Vec<u64> = (0..d).map(|k| 1 << k).collect();
    for col in 0..d {
        let pivot = (col..d).find(|&r| a[r] >> col & 1 == 1)?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        for r in 0..d {
            if r != col && a[r] >> col & 1 == 1 {
                a[r] ^= a[col];
                inv[r] ^= inv[col];
            }
        }
    }
    Some(inv)
}

impl BoxSplineSpec {
    pub fn new(directions: Vec<Vec<i64>>, multiplicities: Vec<u32>) -> Result<Self> {
        let Some(first) = directions.first() else {
            return Err(Error::Input("at least one direction is required".into()));
        };
        let dim = first.len();
        if dim == 0 || dim > 63 {
            return Err(Error::Input(format!("unsupported dimension {dim}")));
        }
        if multiplicities.len() != directions.len() {
            return Err(Error::Shape(format!(
                "{} multiplicities for {} directions",
                multiplicities.len(),
                directions.len()
            )));
        }
        if multiplicities.contains(&0) {
            return Err(Error::Input("multiplicities must be positive".into()));
        }
        if let Some(bad) = directions.iter().find(|t| t.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        let directions: Vec<MultiIndex> = directions.into_iter().map(MultiIndex).collect();

        let mut basis: Vec<(u32, u64)> = Vec::new();
        let mut spanning = Vec::new();
        for (j, t) in directions.iter().enumerate() {
            if spanning.len() == dim {
                break;
            }
            let v = reduce(&basis, parity_bits(t));
            if v != 0 {
                basis.push((v.trailing_zeros(), v));
                spanning.push(j);
            }
        }
        if spanning.len() < dim {
            return Err(Error::Precondition(format!(
                "directions span a subspace of rank {} < {dim} modulo 2",
                spanning.len()
            )));
        }
        let order = spanning
            .iter()
            .copied()
            .chain((0..directions.len()).filter(|j| !spanning.contains(j)))
            .collect();
        Ok(Self {
            directions,
            multiplicities,
            dim,
            order,
        })
    }

    pub fn r(&self) -> usize {
        self.directions.len()
    }

    fn factor(&self, j: usize) -> LaurentPoly {
        let half = Complex64::new(0.5, 0.0);
        let base = &LaurentPoly::constant(self.dim, half) + &LaurentPoly::monomial(self.directions[j].clone(), half);
        base.pow(self.multiplicities[j])
    }
}

pub fn boxspline_mask(spec: &BoxSplineSpec) -> LaurentPoly {
    (0..spec.r()).fold(LaurentPoly::one(spec.dim), |acc, j| &acc * &spec.factor(j))
}

/// `d + (r − d)·2^d`.
pub fn bound_l(spec: &BoxSplineSpec) -> usize {
    let d = spec.dim;
    d + (spec.r() - d) * (1usize << d)
}

/// Index of the dual representative acting as `z ↦ ((−1)^{b_k} z_k)_k`.
fn dual_index(setup: &DilationSetup, bits: u64) -> Result<usize> {
    let d = setup.dim();
    (0..setup.m())
        .find(|&s| {
            (0..d).all(|k| {
                let want = if bits >> k & 1 == 1 { -1.0 } else { 1.0 };
                (setup.character(s, &MultiIndex::unit(d, k)) - want).norm() < 1e-12
            })
        })
        .ok_or_else(|| Error::Internal(format!("no dual representative for parity {bits:b}")))
}

/// Telescoped certificate over a spanning subset, extended one direction
/// at a time by the product rule.
pub fn sos_boxspline(spec: &BoxSplineSpec) -> Result<SosCertificate> {
    let d = spec.dim;
    let setup = DilationSetup::dyadic(d)?;
    let lead = &spec.order[..d];
    let rows: Vec<u64> = lead.iter().map(|&j| parity_bits(&spec.directions[j])).collect();
    let inv = gf2_inverse(&rows, d).ok_or_else(|| Error::Internal("spanning directions are singular mod 2".into()))?;
    // column k of the inverse is the dual vector b_k
    let factors = lead
        .iter()
        .enumerate()
        .map(|(k, &j)| {
            let b = (0..d).fold(0u64, |acc, i| acc | ((inv[i] >> k & 1) << i));
            Ok(TelescopeFactor {
                mask: spec.factor(j),
                group: vec![0, dual_index(&setup, b)?],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cert = certify::sos_telescope(&factors, &setup)?;
    let mut p = factors.iter().fold(LaurentPoly::one(d), |acc, f| &acc * &f.mask);

    for &j in &spec.order[d..] {
        let q = spec.factor(j);
        let half = Complex64::new(0.5, 0.0);
        let qu = (&LaurentPoly::constant(1, half) + &LaurentPoly::monomial(vec![1], half)).pow(spec.multiplicities[j]);
        let tau = univariate::fejer_riesz(&(&LaurentPoly::one(1) - &(&qu.conj_reflect() * &qu)))?
            .factor
            .substitute_monomial(&spec.directions[j].0)?;
        let one_minus = &LaurentPoly::one(d) - &(&q.conj_reflect() * &q);
        let cert_q = SosCertificate::new(one_minus, vec![tau]);
        cert = certify::sos_product(&cert, &cert_q, &p, &q, &setup)?;
        p = &p * &q;
    }
    let bound = bound_l(spec);
    if cert.length > bound {
        return Err(Error::Internal(format!(
            "certificate length {} exceeds the bound {bound}",
            cert.length
        )));
    }
    let target = symmetry::defect_xi(&p, &setup)?;
    let gap = target.max_diff(&cert.target);
    if gap > certify::CERT_TOL {
        return Err(Error::Verification {
            what: "certificate target vs box-spline defect".into(),
            residual: gap,
            tol: certify::CERT_TOL,
        });
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::verify_sos;
    use crate::fixtures;

    fn spec(dirs: &[&[i64]], mult: &[u32]) -> BoxSplineSpec {
        BoxSplineSpec::new(dirs.iter().map(|d| d.to_vec()).collect(), mult.to_vec()).unwrap()
    }

    #[test]
    fn masks() {
        let b = spec(&[&[1, 0], &[0, 1], &[1, 1]], &[1, 1, 1]);
        assert!(boxspline_mask(&b).approx_eq(&fixtures::b111(), 1e-15));
        assert!(boxspline_mask(&spec(&[&[1]], &[1])).approx_eq(&fixtures::haar(), 1e-15));
        let zp = spec(&[&[1, 0], &[0, 1], &[1, 1], &[1, -1]], &[1, 1, 1, 1]);
        let p = boxspline_mask(&zp);
        assert!((p.sum_coeffs().re - 1.0).abs() < 1e-15);
        assert!(symmetry::sum_rules_check(&p, &DilationSetup::dyadic(2).unwrap(), 1e-12).pass);
    }

    #[test]
    fn bounds() {
        assert_eq!(bound_l(&spec(&[&[1, 0], &[0, 1], &[1, 1]], &[1, 1, 1])), 6);
        assert_eq!(bound_l(&spec(&[&[1, 0], &[0, 1]], &[2, 3])), 2);
        assert_eq!(
            bound_l(&spec(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1], &[1, 1, 1]], &[1; 4])),
            11
        );
    }

    #[test]
    fn spanning_subset_is_found_and_required() {
        let s = spec(&[&[1, 1], &[2, 0], &[1, 0]], &[1, 1, 1]);
        assert_eq!(s.order, vec![0, 2, 1]);
        let err = BoxSplineSpec::new(vec![vec![1, 1], vec![3, 3]], vec![1, 1]).unwrap_err();
        assert!(err.to_string().contains("rank 1"), "{err}");
    }

    #[test]
    fn certificates() {
        let b = spec(&[&[1, 0], &[0, 1], &[1, 1]], &[1, 1, 1]);
        let c = sos_boxspline(&b).unwrap();
        assert!(c.length <= 6);
        assert!(verify_sos(&c, 1e-10).pass);

        let tensor = sos_boxspline(&spec(&[&[1, 0], &[0, 1]], &[1, 1])).unwrap();
        assert_eq!(tensor.length, 0);

        let zp = sos_boxspline(&spec(&[&[1, 0], &[0, 1], &[1, 1], &[1, -1]], &[1; 4])).unwrap();
        assert!(zp.length <= 10);
        assert!(verify_sos(&zp, 1e-10).pass);

        let squared = sos_boxspline(&spec(&[&[1, 0], &[0, 1]], &[2, 1])).unwrap();
        assert_eq!(squared.length, 1);
        assert!(verify_sos(&squared, 1e-10).pass);
    }
}
