//! Uniform torus-grid screens.

use num_complex::Complex64;

use crate::laurent::LaurentPoly;

/// 64 points per axis up to two variables, 32 beyond.
pub fn default_grid(d: usize) -> usize {
    if d <= 2 {
        64
    } else {
        32
    }
}

/// Terms with exponents reduced mod `n`, evaluated at `z_i = w^{k_i}` with
/// `w = e^{2πi/n}`.
struct GridEval {
    n: usize,
    d: usize,
    roots: Vec<Complex64>,
    terms: Vec<(Vec<usize>, Complex64)>,
}

impl GridEval {
    fn new(f: &LaurentPoly, n: usize) -> Self {
        let roots = (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Complex64::new(a.cos(), a.sin())
            })
            .collect();
        let terms = f
            .terms()
            .map(|(e, c)| (e.0.iter().map(|x| x.rem_euclid(n as i64) as usize).collect(), *c))
            .collect();
        GridEval {
            n,
            d: f.dim(),
            roots,
            terms,
        }
    }

    fn points(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    fn at(&self, mut flat: usize) -> Complex64 {
        let mut ks = vec![0usize; self.d];
        for x in ks.iter_mut() {
            *x = flat % self.n;
            flat /= self.n;
        }
        self.terms
            .iter()
            .map(|(e, c)| {
                let s: usize = e.iter().zip(ks.iter()).map(|(a, b)| a * b).sum();
                c * self.roots[s % self.n]
            })
            .sum()
    }
}

/// Minimum of `Re f` over the `n^d` torus grid, evaluated in order.
pub fn grid_min_sequential(f: &LaurentPoly, n: usize) -> f64 {
    if f.is_zero() {
        return 0.0;
    }
    let g = GridEval::new(f, n);
    (0..g.points()).map(|i| g.at(i).re).fold(f64::INFINITY, f64::min)
}

/// Minimum of `Re f` over the `n^d` torus grid, evaluated on the rayon pool.
#[cfg(feature = "parallel")]
pub fn grid_min_parallel(f: &LaurentPoly, n: usize) -> f64 {
    use rayon::prelude::*;
    if f.is_zero() {
        return 0.0;
    }
    let g = GridEval::new(f, n);
    (0..g.points())
        .into_par_iter()
        .map(|i| g.at(i).re)
        .reduce(|| f64::INFINITY, f64::min)
}

/// Minimum of `Re f` over the `n^d` torus grid.
pub fn grid_min(f: &LaurentPoly, n: usize) -> f64 {
    #[cfg(feature = "parallel")]
    {
        grid_min_parallel(f, n)
    }
    #[cfg(not(feature = "parallel"))]
    {
        grid_min_sequential(f, n)
    }
}

/// Maximum of `|f|` over the `n^d` torus grid.
pub fn grid_max_abs(f: &LaurentPoly, n: usize) -> f64 {
    if f.is_zero() {
        return 0.0;
    }
    let g = GridEval::new(f, n);
    crate::par::map_range(g.points(), |i| g.at(i).norm())
        .into_iter()
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_constant() {
        assert_eq!(grid_min(&LaurentPoly::zero(2), 8), 0.0);
        assert_eq!(grid_min(&LaurentPoly::real_constant(3, 2.5), 4), 2.5);
    }

    #[test]
    fn cosine_minimum() {
        // 2 − ξ − ξ⁻¹ = |1−ξ|² has minimum 0 at ξ = 1 and maximum 4
        let f = LaurentPoly::from_real(1, &[(&[-1], -1.0), (&[0], 2.0), (&[1], -1.0)]);
        assert!(grid_min_sequential(&f, 16).abs() < 1e-15);
        assert!((grid_max_abs(&f, 16) - 4.0).abs() < 1e-14);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn paths_agree() {
        let f = LaurentPoly::from_real(
            2,
            &[
                (&[0, 0], 3.0),
                (&[1, 0], -1.0),
                (&[-1, 0], -1.0),
                (&[1, 1], 0.5),
                (&[-1, -1], 0.5),
            ],
        );
        assert_eq!(grid_min_parallel(&f, 32), grid_min_sequential(&f, 32));
    }
}
