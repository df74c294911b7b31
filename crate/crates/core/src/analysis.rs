//! Probability measures on the torus and on [-1, 1], Gauss-type quadrature,
//! and the norms used throughout the crate.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Underlying set of a measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Domain {
    /// `[0, 2π)^dim` with periodic identification.
    Torus { dim: usize },
    /// `[-1, 1]`.
    Interval,
}

/// Density of a probability measure relative to Lebesgue measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Density {
    Uniform,
    /// `c_α (1 - x²)^α`.
    Gegenbauer { alpha: f64 },
    /// `π^{-1} (1 - x²)^{-1/2}`.
    Chebyshev,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub domain: Domain,
    pub density: Density,
}

impl MeasureSpec {
    pub fn torus(dim: usize) -> Self {
        MeasureSpec {
            domain: Domain::Torus { dim },
            density: Density::Uniform,
        }
    }

    pub fn gegenbauer(alpha: f64) -> Self {
        MeasureSpec {
            domain: Domain::Interval,
            density: Density::Gegenbauer { alpha },
        }
    }

    pub fn chebyshev() -> Self {
        MeasureSpec {
            domain: Domain::Interval,
            density: Density::Chebyshev,
        }
    }

    pub fn dim(&self) -> usize {
        match self.domain {
            Domain::Torus { dim } => dim,
            Domain::Interval => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.domain, self.density) {
            (Domain::Torus { dim }, Density::Uniform) => {
                if dim == 0 {
                    return Err(Error::param("torus dimension must be at least 1"));
                }
                Ok(())
            }
            (Domain::Torus { .. }, _) => Err(Error::param(
                "the torus only carries the uniform measure",
            )),
            (Domain::Interval, Density::Gegenbauer { alpha }) => check_alpha(alpha),
            (Domain::Interval, _) => Ok(()),
        }
    }

    /// Checks that `x` lies in the domain.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self.domain {
            Domain::Torus { dim } => x.len() == dim && x.iter().all(|t| t.is_finite()),
            Domain::Interval => x.len() == 1 && (-1.0..=1.0).contains(&x[0]),
        }
    }

    /// Draws `count` i.i.d. points from the measure.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let pts = match (self.domain, self.density) {
            (Domain::Torus { dim }, _) => (0..count)
                .map(|_| (0..dim).map(|_| rng.random::<f64>() * 2.0 * PI).collect())
                .collect(),
            (Domain::Interval, Density::Chebyshev) => (0..count)
                .map(|_| vec![(PI * rng.random::<f64>()).cos()])
                .collect(),
            (Domain::Interval, density) => {
                let alpha = match density {
                    Density::Gegenbauer { alpha } => alpha,
                    _ => 0.0,
                };
                let beta = Beta::new(alpha + 0.5, alpha + 0.5)
                    .map_err(|e| Error::param(format!("beta law: {e}")))?;
                (0..count)
                    .map(|_| vec![2.0 * beta.sample(rng) - 1.0])
                    .collect()
            }
        };
        Ok(pts)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > -0.5 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!(
            "Gegenbauer exponent must exceed -1/2, got {alpha}"
        )))
    }
}

/// Normalizing constant `c_α = Γ(α + 3/2) / (√π Γ(α + 1))` of `(1 - x²)^α`.
pub fn gegenbauer_normalizer(alpha: f64) -> f64 {
    (libm::lgamma(alpha + 1.5) - libm::lgamma(alpha + 1.0)).exp() / PI.sqrt()
}

/// Recurrence coefficient `b_n` of the orthonormal Gegenbauer polynomials:
/// `x L_n = b_{n+1} L_{n+1} + b_n L_{n-1}`.
pub fn gegenbauer_offdiag(alpha: f64, n: usize) -> f64 {
    let n = n as f64;
    let a = alpha;
    (n * (n + 2.0 * a) / (4.0 * (n + a + 0.5) * (n + a - 0.5))).sqrt()
}

/// Discrete probability measure approximating integration against a measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub dim: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Polynomial (interval) or trigonometric (torus, per coordinate) degree
    /// up to which the rule is exact.
    pub exactness_degree: usize,
}

impl Quadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, values: &[C64]) -> C64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * *w).sum()
    }
}

/// Builds a quadrature rule for `measure`.
///
/// On the torus the rule is the tensor equispaced grid with `resolution`
/// points per coordinate. On the interval it is the Gauss rule with
/// `resolution` nodes, exact up to degree `2 resolution - 1`.
pub fn build_quadrature(measure: &MeasureSpec, resolution: usize) -> Result<Quadrature> {
    measure.validate()?;
    if resolution == 0 {
        return Err(Error::param("quadrature resolution must be at least 1"));
    }
    match (measure.domain, measure.density) {
        (Domain::Torus { dim }, _) => {
            let total = resolution
                .checked_pow(dim as u32)
                .filter(|t| *t <= 1 << 24)
                .ok_or_else(|| Error::Size(format!("{resolution}^{dim} torus nodes")))?;
            let step = 2.0 * PI / resolution as f64;
            let nodes = (0..total)
                .map(|mut idx| {
                    let mut p = vec![0.0; dim];
                    for slot in p.iter_mut().rev() {
                        *slot = (idx % resolution) as f64 * step;
                        idx /= resolution;
                    }
                    p
                })
                .collect();
            Ok(Quadrature {
                dim,
                nodes,
                weights: vec![1.0 / total as f64; total],
                exactness_degree: resolution - 1,
            })
        }
        (Domain::Interval, Density::Chebyshev) => {
            let n = resolution;
            let mut nodes: Vec<Vec<f64>> = (1..=n)
                .map(|k| vec![((2 * k - 1) as f64 * PI / (2 * n) as f64).cos()])
                .collect();
            nodes.reverse();
            Ok(Quadrature {
                dim: 1,
                nodes,
                weights: vec![1.0 / n as f64; n],
                exactness_degree: 2 * n - 1,
            })
        }
        (Domain::Interval, density) => {
            let alpha = match density {
                Density::Gegenbauer { alpha } => alpha,
                _ => 0.0,
            };
            let offdiag: Vec<f64> = (1..resolution)
                .map(|n| gegenbauer_offdiag(alpha, n))
                .collect();
            let (nodes, weights) = gauss_symmetric(&offdiag);
            Ok(Quadrature {
                dim: 1,
                nodes: nodes.into_iter().map(|x| vec![x]).collect(),
                weights,
                exactness_degree: 2 * resolution - 1,
            })
        }
    }
}

/// Gauss rule for a symmetric probability measure on [-1, 1] given the
/// off-diagonal entries of its Jacobi matrix (zero diagonal). Nodes come from
/// Sturm-sequence bisection, weights from the Christoffel function.
fn gauss_symmetric(offdiag: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = offdiag.len() + 1;
    let b2: Vec<f64> = offdiag.iter().map(|b| b * b).collect();
    // number of eigenvalues strictly below x
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut d = -x;
        if d < 0.0 {
            count += 1;
        }
        for &bb in &b2 {
            let prev = if d == 0.0 { f64::MIN_POSITIVE } else { d };
            d = -x - bb / prev;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let mut nodes = Vec::with_capacity(n);
    for k in 0..n {
        let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        nodes.push(0.5 * (lo + hi));
    }
    // symmetrize exactly
    for k in 0..n / 2 {
        let x = 0.5 * (nodes[n - 1 - k] - nodes[k]);
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let (mut prev, mut cur) = (0.0, 1.0);
            let mut sum = 1.0;
            for j in 0..n - 1 {
                let b_prev = if j == 0 { 0.0 } else { offdiag[j - 1] };
                let next = (x * cur - b_prev * prev) / offdiag[j];
                prev = cur;
                cur = next;
                sum += cur * cur;
            }
            1.0 / sum
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let weights = weights.into_iter().map(|w| w / total).collect();
    (nodes, weights)
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("norm exponent must be >= 1, got {p}")))
    }
}

fn weighted_lp(values: &[C64], weights: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    }
    let s: f64 = values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * v.norm().powf(p))
        .sum();
    s.powf(1.0 / p)
}

/// `L_p(μ)` norm of a function given by its values on the quadrature nodes.
/// `p = f64::INFINITY` gives the maximum over the nodes.
pub fn norm_lp(values: &[C64], q: &Quadrature, p: f64) -> Result<f64> {
    check_p(p)?;
    if values.len() != q.len() {
        return Err(Error::param(format!(
            "{} values for {} quadrature nodes",
            values.len(),
            q.len()
        )));
    }
    Ok(weighted_lp(values, &q.weights, p))
}

/// Norm in `L₂(μ_ξ)` with `μ_ξ = μ/2 + (1/2m) Σ δ_{ξ^j}`.
pub fn norm_l2_mu_xi(on_quad: &[C64], q: &Quadrature, at_points: &[C64]) -> Result<f64> {
    if at_points.is_empty() {
        return Err(Error::param("mixture measure needs at least one point"));
    }
    let cont = norm_lp(on_quad, q, 2.0)?;
    let m = at_points.len() as f64;
    let disc: f64 = at_points.iter().map(|v| v.norm_sqr()).sum::<f64>() / m;
    Ok((0.5 * cont * cont + 0.5 * disc).sqrt())
}

/// Weighted sample norm `(Σ w_ν |s_ν|^p)^{1/p}`.
pub fn sample_norm_weighted(samples: &[C64], weights: &[f64], p: f64) -> Result<f64> {
    check_p(p)?;
    if samples.len() != weights.len() {
        return Err(Error::param(format!(
            "{} samples but {} weights",
            samples.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
        return Err(Error::param(format!("weights must be positive, got {w}")));
    }
    Ok(weighted_lp(samples, weights, p))
}

/// Weights of the mixture measure on the stacked node list
/// `(quadrature nodes, sample points)`.
pub fn mu_xi_weights(q: &Quadrature, m: usize) -> Vec<f64> {
    q.weights
        .iter()
        .map(|w| 0.5 * w)
        .chain(std::iter::repeat_n(0.5 / m as f64, m))
        .collect()
}

/// Dense evaluation grid standing in for the supremum over the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalGrid {
    pub points: Vec<Vec<f64>>,
    /// Number of points of the dense part before any extra nodes were merged.
    pub dense_size: usize,
    pub oversample: usize,
}

impl EvalGrid {
    /// Grid of about `oversample * n` points. On the torus it is the tensor
    /// equispaced grid; on the interval the Chebyshev-Lobatto points, which
    /// include both endpoints.
    pub fn dense(measure: &MeasureSpec, n: usize, oversample: usize) -> Result<Self> {
        measure.validate()?;
        let target = (oversample.max(1) * n.max(1)).max(2);
        let points = match measure.domain {
            Domain::Torus { dim } => {
                let per = (target as f64).powf(1.0 / dim as f64).ceil() as usize;
                build_quadrature(measure, per.max(2))?.nodes
            }
            Domain::Interval => {
                let g = target + 1;
                (0..g)
                    .map(|k| vec![-(PI * k as f64 / (g - 1) as f64).cos()])
                    .collect()
            }
        };
        Ok(EvalGrid {
            dense_size: points.len(),
            points,
            oversample,
        })
    }

    /// Appends extra points (quadrature nodes, sample points).
    pub fn with_points(mut self, extra: &[Vec<f64>]) -> Self {
        self.points.extend(extra.iter().cloned());
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn torus_rule_is_equispaced() {
        let q = build_quadrature(&MeasureSpec::torus(1), 8).unwrap();
        assert_eq!(q.len(), 8);
        assert!(q.weights.iter().all(|w| (*w - 0.125).abs() < 1e-15));
        assert!((q.nodes[2][0] - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn legendre_rule_integrates_x4() {
        let q = build_quadrature(&MeasureSpec::gegenbauer(0.0), 5).unwrap();
        let vals: Vec<C64> = q.nodes.iter().map(|x| c(x[0].powi(4))).collect();
        assert!((q.integrate(&vals).re - 0.2).abs() < 1e-12);
        let one = build_quadrature(&MeasureSpec::gegenbauer(0.0), 1).unwrap();
        assert_eq!(one.nodes, vec![vec![0.0]]);
        assert!((one.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_jacobi_moments_match_beta_law() {
        // E[x²] under c_α(1-x²)^α is 1/(2α+3)
        for &alpha in &[-0.3, 0.0, 0.5, 2.0] {
            let q = build_quadrature(&MeasureSpec::gegenbauer(alpha), 12).unwrap();
            let vals: Vec<C64> = q.nodes.iter().map(|x| c(x[0] * x[0])).collect();
            assert!((q.integrate(&vals).re - 1.0 / (2.0 * alpha + 3.0)).abs() < 1e-13);
            assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn large_gauss_rule_stays_accurate() {
        let q = build_quadrature(&MeasureSpec::gegenbauer(0.5), 600).unwrap();
        let vals: Vec<C64> = q.nodes.iter().map(|x| c(x[0].powi(6))).collect();
        // E[x^6] for α = 1/2 is 15/((5)(7)(9)) * ... computed as product formula
        let exact = (1.0 * 3.0 * 5.0) / (4.0 * 6.0 * 8.0);
        assert!((q.integrate(&vals).re - exact).abs() < 1e-12);
        assert!(q.weights.iter().all(|w| *w > 0.0));
    }

    #[test]
    fn norms_on_simple_inputs() {
        let q = build_quadrature(&MeasureSpec::gegenbauer(0.0), 6).unwrap();
        let x: Vec<C64> = q.nodes.iter().map(|p| c(p[0])).collect();
        assert!((norm_lp(&x, &q, 2.0).unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-14);
        assert!(norm_lp(&x, &q, 0.5).is_err());
        assert!(
            (sample_norm_weighted(&[c(2.0), c(0.0)], &[0.5, 0.5], 2.0).unwrap()
                - 2f64.sqrt())
            .abs()
                < 1e-15
        );
        assert!(sample_norm_weighted(&[c(1.0)], &[0.0], 2.0).is_err());
        let half = norm_l2_mu_xi(&vec![c(1.0); q.len()], &q, &[c(0.0); 3]).unwrap();
        assert!((half - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn normalizer_matches_known_values() {
        assert!((gegenbauer_normalizer(0.0) - 0.5).abs() < 1e-15);
        assert!((gegenbauer_normalizer(0.5) - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn lobatto_grid_contains_endpoints() {
        let g = EvalGrid::dense(&MeasureSpec::gegenbauer(0.0), 4, 4).unwrap();
        assert_eq!(g.len(), 17);
        assert_eq!(g.points[0][0], -1.0);
        assert_eq!(g.points[16][0], 1.0);
    }
}
