//! Discrete uniform-norm best approximation by Lawson's iteratively
//! reweighted least squares.

use nalgebra::{Cholesky, ComplexField, DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimaxOptions {
    /// Stop when `(upper - lower) / upper` falls below this.
    pub rel_gap: f64,
    pub max_iterations: usize,
}

impl Default for MinimaxOptions {
    fn default() -> Self {
        MinimaxOptions {
            rel_gap: 1e-6,
            max_iterations: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxResult<T> {
    pub coefficients: Vec<T>,
    /// `max_i |f_i - (A c)_i|` for the returned coefficients.
    pub upper: f64,
    /// Certified lower bound on `min_c max_i |f_i - (A c)_i|`.
    pub lower: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn weighted_solve<T>(a: &DMatrix<T>, f: &[T], lambda: &[f64]) -> Option<DVector<T>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let (g, k) = a.shape();
    let sw: Vec<f64> = lambda.iter().map(|l| l.sqrt()).collect();
    let s = DMatrix::from_fn(g, k, |r, c| a[(r, c)].scale(sw[r]));
    let b = DVector::from_iterator(g, f.iter().zip(&sw).map(|(v, w)| v.scale(*w)));
    let normal = s.ad_mul(&s);
    let rhs = s.ad_mul(&b);
    if let Some(ch) = Cholesky::new(normal) {
        let l = ch.l();
        let d: Vec<f64> = l.diagonal().iter().map(|x| x.real()).collect();
        let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
        let dmax = d.iter().copied().fold(0.0, f64::max);
        if dmin > 1e-7 * dmax {
            return Some(ch.solve(&rhs));
        }
    }
    let svd = SVD::new(s, true, true);
    let tol = svd.singular_values.max() * 1e-11;
    svd.solve(&b, tol).ok()
}

/// Approximately minimizes `max_i |f_i - (A c)_i|`. Every iterate's
/// weighted least-squares error is a valid lower bound on the minimax
/// value and the returned coefficients realize `upper`.
pub fn lawson<T>(a: &DMatrix<T>, f: &[T], opts: &MinimaxOptions) -> MinimaxResult<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    lawson_with_cutoff(a, f, opts, f64::INFINITY)
}

/// [`lawson`] that also stops as soon as the certified lower bound exceeds
/// `cutoff`.
pub fn lawson_with_cutoff<T>(a: &DMatrix<T>, f: &[T], opts: &MinimaxOptions, cutoff: f64) -> MinimaxResult<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let (g, k) = a.shape();
    let f_max = f.iter().map(|v| v.modulus()).fold(0.0, f64::max);
    let zero = MinimaxResult {
        coefficients: vec![T::zero(); k],
        upper: f_max,
        lower: 0.0,
        iterations: 0,
        converged: f_max == 0.0 || k == 0,
    };
    if g == 0 || k == 0 || f_max == 0.0 {
        return MinimaxResult {
            lower: if k == 0 { f_max } else { 0.0 },
            ..zero
        };
    }
    let mut lambda = vec![1.0 / g as f64; g];
    let mut best = zero;
    for it in 1..=opts.max_iterations {
        let Some(c) = weighted_solve(a, f, &lambda) else {
            break;
        };
        let approx = a * &c;
        let err: Vec<f64> = f
            .iter()
            .zip(approx.iter())
            .map(|(x, y)| (*x - *y).modulus())
            .collect();
        let upper = err.iter().copied().fold(0.0, f64::max);
        let lower = err
            .iter()
            .zip(&lambda)
            .map(|(e, l)| l * e * e)
            .sum::<f64>()
            .sqrt();
        best.iterations = it;
        if upper < best.upper {
            best.upper = upper;
            best.coefficients = c.iter().copied().collect();
        }
        best.lower = best.lower.max(lower.min(best.upper));
        if best.upper <= 1e-14 * f_max || best.upper - best.lower <= opts.rel_gap * best.upper {
            best.converged = true;
            break;
        }
        if best.lower > cutoff {
            break;
        }
        let mut total = 0.0;
        for (l, e) in lambda.iter_mut().zip(&err) {
            *l = (*l * e).max(1e-300);
            total += *l;
        }
        for l in lambda.iter_mut() {
            *l /= total;
        }
    }
    best
}
