//! Small dense linear-algebra helpers shared by the discretization, recovery
//! and oracle modules. Everything works on complex matrices; real
//! dictionaries embed with zero imaginary part.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

pub type C64 = Complex64;

/// Singular values below this fraction of the largest one count as zero.
pub const RANK_RTOL: f64 = 1e-11;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Number of k-subsets of an n-set, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Lexicographic iterator over the k-subsets of `0..n`.
#[derive(Debug, Clone)]
pub struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

pub fn combinations(n: usize, k: usize) -> Combinations {
    let current = if k <= n { Some((0..k).collect()) } else { None };
    Combinations { n, current }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

/// Columns `idx` of `m`.
pub fn columns(m: &DMatrix<C64>, idx: &[usize]) -> DMatrix<C64> {
    DMatrix::from_fn(m.nrows(), idx.len(), |r, c| m[(r, idx[c])])
}

/// Principal submatrix on `idx`.
pub fn principal(m: &DMatrix<C64>, idx: &[usize]) -> DMatrix<C64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

/// `Φ^H diag(w) Φ` for a design matrix with one row per point.
pub fn weighted_gram(design: &DMatrix<C64>, weights: &[f64]) -> DMatrix<C64> {
    let scaled = DMatrix::from_fn(design.nrows(), design.ncols(), |r, c| {
        design[(r, c)] * weights[r].sqrt()
    });
    let g = scaled.adjoint() * &scaled;
    hermitize(g)
}

/// Averages `m` with its adjoint so round-off asymmetry cannot leak into
/// the eigen solver.
pub fn hermitize(m: DMatrix<C64>) -> DMatrix<C64> {
    let adj = m.adjoint();
    (m + adj) * c(0.5)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    if m.nrows() == 1 {
        return vec![m[(0, 0)].re];
    }
    let eig = SymmetricEigen::new(hermitize(m.clone()));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Eigenpairs of a Hermitian matrix sorted by ascending eigenvalue.
pub fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitize(m.clone()));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Extreme generalized eigenvalues of the pencil `(h, g)` with `g` Hermitian
/// positive definite. Returns `None` when `g` is not numerically PD.
pub fn generalized_extremes(h: &DMatrix<C64>, g: &DMatrix<C64>) -> Option<(f64, f64)> {
    let n = h.nrows();
    if n == 1 {
        let d = g[(0, 0)].re;
        if d <= 0.0 {
            return None;
        }
        let r = h[(0, 0)].re / d;
        return Some((r, r));
    }
    let chol = Cholesky::new(hermitize(g.clone()))?;
    let l = chol.l();
    // C = L^{-1} H L^{-H}
    let x = l.solve_lower_triangular(h)?;
    let y = l.solve_lower_triangular(&x.adjoint())?;
    let vals = hermitian_eigenvalues(&y.adjoint());
    Some((vals[0], vals[n - 1]))
}

pub fn is_identity(m: &DMatrix<C64>, tol: f64) -> bool {
    m.is_square()
        && (0..m.nrows()).all(|i| {
            (0..m.ncols()).all(|j| {
                let target = if i == j { 1.0 } else { 0.0 };
                (m[(i, j)] - c(target)).norm() <= tol
            })
        })
}

/// Solution of a weighted least-squares problem.
#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub coefficients: DVector<C64>,
    pub rank: usize,
}

impl LstsqSolution {
    pub fn degenerate(&self) -> bool {
        self.rank < self.coefficients.len()
    }
}

/// Minimizes `Σ w_ν |rhs_ν − (A c)_ν|²` through an SVD of the row-scaled
/// design. Rank-deficient problems get the minimum-norm minimizer.
pub fn weighted_lstsq(a: &DMatrix<C64>, rhs: &[C64], weights: &[f64]) -> LstsqSolution {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return LstsqSolution {
            coefficients: DVector::zeros(n),
            rank: 0,
        };
    }
    let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let scaled = DMatrix::from_fn(m, n, |r, col| a[(r, col)] * sw[r]);
    let b = DVector::from_iterator(m, rhs.iter().zip(&sw).map(|(v, s)| v * *s));
    let svd = SVD::new(scaled, true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return LstsqSolution {
            coefficients: DVector::zeros(n),
            rank: 0,
        };
    }
    let tol = smax * RANK_RTOL;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    let coefficients = svd
        .solve(&b, tol)
        .expect("SVD was computed with both factors");
    LstsqSolution { coefficients, rank }
}

/// Orthonormal basis (columns) of the numerical kernel of a Hermitian PSD
/// matrix: eigenvectors whose eigenvalue is at most `rtol` times the largest.
pub fn psd_kernel(k: &DMatrix<C64>, rtol: f64) -> DMatrix<C64> {
    let n = k.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let (vals, vecs) = hermitian_eigen(k);
    let top = vals.last().copied().unwrap_or(0.0).abs();
    let cut = if top == 0.0 { f64::INFINITY } else { top * rtol };
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] <= cut).collect();
    DMatrix::from_fn(n, keep.len(), |r, c| vecs[(r, keep[c])])
}

/// Orthonormal basis (columns) of the kernel of `a`, computed as the
/// complement of the row space so that `‖a x‖` stays at rounding level.
pub fn null_space(a: &DMatrix<C64>) -> DMatrix<C64> {
    let (m, n) = a.shape();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m == 0 {
        return DMatrix::identity(n, n);
    }
    let svd = SVD::new(a.adjoint(), true, false);
    let u = svd.u.expect("left factor requested");
    let smax = svd.singular_values.max();
    let rank = if smax == 0.0 {
        0
    } else {
        svd.singular_values
            .iter()
            .filter(|s| **s > smax * RANK_RTOL)
            .count()
    };
    if rank == n {
        return DMatrix::zeros(n, 0);
    }
    let mut proj = DMatrix::<C64>::identity(n, n);
    for k in 0..svd.singular_values.len() {
        if svd.singular_values[k] > smax * RANK_RTOL {
            let col = u.column(k);
            proj -= col * col.adjoint();
        }
    }
    let (vals, vecs) = hermitian_eigen(&hermitize(proj));
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.5).collect();
    DMatrix::from_fn(n, keep.len(), |r, c| vecs[(r, keep[c])])
}

/// `A c` evaluated into a plain vector.
pub fn apply(a: &DMatrix<C64>, coeffs: &[C64]) -> Vec<C64> {
    (0..a.nrows())
        .map(|r| (0..a.ncols()).map(|j| a[(r, j)] * coeffs[j]).sum())
        .collect()
}

/// `A[:, idx] c` without materializing the column selection.
pub fn apply_columns(a: &DMatrix<C64>, idx: &[usize], coeffs: &[C64]) -> Vec<C64> {
    (0..a.nrows())
        .map(|r| idx.iter().zip(coeffs).map(|(&j, c)| a[(r, j)] * c).sum())
        .collect()
}

/// Weighted ℓ₂ norm `(Σ w |x|²)^{1/2}`.
pub fn weighted_l2(values: &[C64], weights: &[f64]) -> f64 {
    values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * v.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn max_abs(values: &[C64]) -> f64 {
    values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Least-squares slope of `ln y` against `ln x`, with the fitted intercept.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_is_orthonormal_and_annihilated() {
        let a = DMatrix::from_fn(2, 5, |r, k| C64::new((r + 2 * k) as f64, (r * k) as f64 * 0.5));
        let k = null_space(&a);
        assert_eq!(k.ncols(), 3);
        assert!((&a * &k).norm() < 1e-12);
        assert!(is_identity(&(k.adjoint() * &k), 1e-12));
        assert_eq!(null_space(&DMatrix::<C64>::zeros(0, 4)).ncols(), 4);
    }

    #[test]
    fn combinations_are_lexicographic_and_complete() {
        let all: Vec<Vec<usize>> = combinations(5, 3).collect();
        assert_eq!(all.len() as u128, binomial(5, 3));
        assert_eq!(all.first().unwrap(), &vec![0, 1, 2]);
        assert_eq!(all.last().unwrap(), &vec![2, 3, 4]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(combinations(3, 0).count(), 1);
        assert_eq!(combinations(2, 3).count(), 0);
    }

    #[test]
    fn binomial_saturates() {
        assert_eq!(binomial(10, 2), 45);
        assert_eq!(binomial(64, 32), 1_832_624_140_942_590_534);
        assert_eq!(binomial(400, 200), u128::MAX);
    }

    #[test]
    fn lstsq_min_norm_on_rank_deficient_design() {
        // two identical columns: min-norm solution splits the weight evenly
        let a = DMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(1.0), c(1.0)]);
        let sol = weighted_lstsq(&a, &[c(2.0), c(2.0)], &[0.5, 0.5]);
        assert_eq!(sol.rank, 1);
        assert!(sol.degenerate());
        assert!((sol.coefficients[0] - c(1.0)).norm() < 1e-12);
        assert!((sol.coefficients[1] - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn generalized_extremes_scale_with_gram() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![c(2.0), c(6.0)]));
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(2.0)]));
        let (lo, hi) = generalized_extremes(&h, &g).unwrap();
        assert!((lo - 2.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
    }
}
