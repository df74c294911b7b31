//! Dictionaries: trigonometric systems on frequency sets, orthonormal and
//! weighted Gegenbauer polynomials, and systems given by values on a grid.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    build_quadrature, gegenbauer_normalizer, gegenbauer_offdiag, Domain, MeasureSpec, Quadrature,
};
use crate::error::{Error, Result};
use crate::frequency::{build_frequency_set, FrequencyKind, FrequencySet};
use crate::linalg::{self, c, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GegenbauerParams {
    pub alpha: f64,
    pub max_degree: usize,
}

impl GegenbauerParams {
    pub fn new(alpha: f64, max_degree: usize) -> Result<Self> {
        MeasureSpec::gegenbauer(alpha).validate()?;
        Ok(GegenbauerParams { alpha, max_degree })
    }
}

/// Values `L_0(x), …, L_degree(x)` of the Gegenbauer polynomials normalized
/// in `L₂(μ_α)`.
pub fn gegenbauer_all(alpha: f64, degree: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(degree + 1);
    out.push(1.0);
    if degree == 0 {
        return out;
    }
    let mut b_prev = 0.0;
    let mut prev = 0.0;
    let mut cur = 1.0;
    for n in 0..degree {
        let b_next = gegenbauer_offdiag(alpha, n + 1);
        let next = (x * cur - b_prev * prev) / b_next;
        out.push(next);
        prev = cur;
        cur = next;
        b_prev = b_next;
    }
    out
}

/// `L_n(x)` for the orthonormal Gegenbauer polynomial of degree `n`.
pub fn gegenbauer_eval(params: &GegenbauerParams, n: usize, x: f64) -> Result<f64> {
    MeasureSpec::gegenbauer(params.alpha).validate()?;
    if n > params.max_degree {
        return Err(Error::param(format!(
            "degree {n} exceeds the maximum {}",
            params.max_degree
        )));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("{x} is outside [-1, 1]")));
    }
    Ok(gegenbauer_all(params.alpha, n, x)[n])
}

/// Envelope `(1 - x²)^{α/2 + 1/4}` of the weighted system.
pub fn gegenbauer_envelope(alpha: f64, x: f64) -> f64 {
    (1.0 - x * x).max(0.0).powf(alpha / 2.0 + 0.25)
}

/// `max_{n ≤ N} sup_x |L_n(x)| (1 - x²)^{α/2+1/4}`, from a dense
/// Chebyshev-Lobatto scan followed by golden-section refinement of every
/// near-maximal peak.
pub fn weighted_gegenbauer_scale(alpha: f64, max_degree: usize) -> f64 {
    let g = 64 * (max_degree + 1) + 1;
    let xs: Vec<f64> = (0..g)
        .map(|k| -(PI * k as f64 / (g - 1) as f64).cos())
        .collect();
    let rows: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| {
            let env = gegenbauer_envelope(alpha, x);
            gegenbauer_all(alpha, max_degree, x)
                .into_iter()
                .map(|v| v.abs() * env)
                .collect()
        })
        .collect();
    let grid_max = rows.iter().flatten().copied().fold(0.0, f64::max);
    let refine = max_degree <= 512;
    let best: Vec<f64> = (0..=max_degree)
        .into_par_iter()
        .map(|n| {
            let value = |x: f64| {
                gegenbauer_all(alpha, n, x)[n].abs() * gegenbauer_envelope(alpha, x)
            };
            let mut best = rows.iter().map(|r| r[n]).fold(0.0, f64::max);
            if !refine {
                return best;
            }
            for k in 1..g - 1 {
                let v = rows[k][n];
                if v >= rows[k - 1][n] && v >= rows[k + 1][n] && v >= 0.99 * grid_max {
                    best = best.max(golden_max(&value, xs[k - 1], xs[k + 1]));
                }
            }
            best
        })
        .collect();
    best.into_iter().fold(grid_max, f64::max)
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut best = f1.max(f2);
    for _ in 0..80 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
        best = best.max(f1).max(f2);
        if b - a < 1e-15 {
            break;
        }
    }
    best
}

/// Structured description of a dictionary, as found in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DictionarySpec {
    Trig {
        #[serde(default = "one")]
        dim: usize,
        frequencies: FrequencyKind,
    },
    Gegenbauer {
        alpha: f64,
        max_degree: usize,
        #[serde(default)]
        weighted: bool,
    },
    /// Values of each element on a named grid; the grid with its weights is
    /// the reference measure.
    Explicit {
        domain: Domain,
        nodes: Vec<Vec<f64>>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
        values: Vec<Vec<C64>>,
    },
}

fn one() -> usize {
    1
}

impl DictionarySpec {
    pub fn build(&self) -> Result<Dictionary> {
        match self {
            DictionarySpec::Trig { dim, frequencies } => {
                trig_dictionary(build_frequency_set(frequencies.clone(), *dim)?)
            }
            DictionarySpec::Gegenbauer {
                alpha,
                max_degree,
                weighted,
            } => gegenbauer_dictionary(GegenbauerParams::new(*alpha, *max_degree)?, *weighted),
            DictionarySpec::Explicit {
                domain,
                nodes,
                weights,
                values,
            } => explicit_dictionary(*domain, nodes.clone(), weights.clone(), values.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryMeta {
    pub orthonormal: bool,
    /// Declared `sup |φ_j|` bound.
    pub uniform_bound: Option<f64>,
    /// Smallest `K` with `Σ|a_j|² ≤ K ‖Σ a_j φ_j‖²`.
    pub riesz_k: Option<f64>,
    /// Degree (maximal `|k_j|` for exponentials) of each element.
    pub degrees: Vec<usize>,
    /// Every element has modulus one everywhere.
    pub unimodular: bool,
}

#[derive(Debug, Clone)]
enum Kind {
    Trig(FrequencySet),
    Gegenbauer {
        params: GegenbauerParams,
        weighted: bool,
        scale: f64,
    },
    Explicit {
        domain: Domain,
        nodes: Vec<Vec<f64>>,
        weights: Vec<f64>,
        values: DMatrix<C64>,
    },
}

/// A finite system of functions with its reference probability measure.
#[derive(Debug, Clone)]
pub struct Dictionary {
    kind: Kind,
    pub meta: DictionaryMeta,
}

pub fn trig_dictionary(freqs: FrequencySet) -> Result<Dictionary> {
    if freqs.is_empty() {
        return Err(Error::param("trigonometric dictionary needs a frequency"));
    }
    let degrees = freqs
        .indices
        .iter()
        .map(|k| k.iter().map(|x| x.unsigned_abs() as usize).max().unwrap_or(0))
        .collect();
    Ok(Dictionary {
        kind: Kind::Trig(freqs),
        meta: DictionaryMeta {
            orthonormal: true,
            uniform_bound: Some(1.0),
            riesz_k: Some(1.0),
            degrees,
            unimodular: true,
        },
    })
}

/// Orthonormal Gegenbauer polynomials `L_0..L_N` under `μ_α`, or with
/// `weighted` the uniformly bounded system `C(α)^{-1} L_n (1-x²)^{α/2+1/4}`
/// orthogonal under the Chebyshev measure.
pub fn gegenbauer_dictionary(params: GegenbauerParams, weighted: bool) -> Result<Dictionary> {
    MeasureSpec::gegenbauer(params.alpha).validate()?;
    let alpha = params.alpha;
    let degrees: Vec<usize> = (0..=params.max_degree).collect();
    let (scale, meta) = if weighted {
        let scale = weighted_gegenbauer_scale(alpha, params.max_degree);
        let norm_sq = 1.0 / (PI * gegenbauer_normalizer(alpha) * scale * scale);
        (
            scale,
            DictionaryMeta {
                orthonormal: (norm_sq - 1.0).abs() < 1e-12,
                uniform_bound: Some(1.0),
                riesz_k: Some(1.0 / norm_sq),
                degrees,
                unimodular: false,
            },
        )
    } else {
        let bound = gegenbauer_all(alpha, params.max_degree, 1.0)
            .into_iter()
            .fold(0.0, f64::max);
        (
            1.0,
            DictionaryMeta {
                orthonormal: true,
                uniform_bound: Some(bound),
                riesz_k: Some(1.0),
                degrees,
                unimodular: false,
            },
        )
    };
    Ok(Dictionary {
        kind: Kind::Gegenbauer {
            params,
            weighted,
            scale,
        },
        meta,
    })
}

/// Dictionary given by its values on a grid; evaluation at other points
/// uses the nearest grid node.
pub fn explicit_dictionary(
    domain: Domain,
    nodes: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
    values: Vec<Vec<C64>>,
) -> Result<Dictionary> {
    let g = nodes.len();
    if g == 0 || values.is_empty() {
        return Err(Error::param("explicit dictionary needs nodes and elements"));
    }
    let probe = MeasureSpec {
        domain,
        density: crate::analysis::Density::Uniform,
    };
    if let Some(bad) = nodes.iter().find(|x| !probe.contains(x)) {
        return Err(Error::Domain(format!("grid node {bad:?}")));
    }
    if let Some((j, _)) = values.iter().enumerate().find(|(_, v)| v.len() != g) {
        return Err(Error::param(format!("element {j} has the wrong number of values")));
    }
    let weights = match weights {
        Some(w) => {
            if w.len() != g || w.iter().any(|x| !(*x > 0.0)) {
                return Err(Error::param("grid weights must be positive, one per node"));
            }
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        }
        None => vec![1.0 / g as f64; g],
    };
    let n = values.len();
    let mat = DMatrix::from_fn(g, n, |r, col| values[col][r]);
    let gram = linalg::weighted_gram(&mat, &weights);
    let eig = linalg::hermitian_eigenvalues(&gram);
    let bound = mat.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let meta = DictionaryMeta {
        orthonormal: linalg::is_identity(&gram, 1e-10),
        uniform_bound: Some(bound),
        riesz_k: if eig[0] > 0.0 { Some(1.0 / eig[0]) } else { None },
        degrees: vec![0; n],
        unimodular: mat.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12),
    };
    Ok(Dictionary {
        kind: Kind::Explicit {
            domain,
            nodes,
            weights,
            values: mat,
        },
        meta,
    })
}

impl Dictionary {
    pub fn len(&self) -> usize {
        self.meta.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            Kind::Trig(f) => f.dim,
            Kind::Gegenbauer { .. } => 1,
            Kind::Explicit { nodes, .. } => nodes[0].len(),
        }
    }

    pub fn max_degree(&self) -> usize {
        self.meta.degrees.iter().copied().max().unwrap_or(0)
    }

    /// Reference measure. Explicit dictionaries carry a discrete measure
    /// and report `None`.
    pub fn measure(&self) -> Option<MeasureSpec> {
        match &self.kind {
            Kind::Trig(f) => Some(MeasureSpec::torus(f.dim)),
            Kind::Gegenbauer {
                params, weighted, ..
            } => Some(if *weighted {
                MeasureSpec::chebyshev()
            } else {
                MeasureSpec::gegenbauer(params.alpha)
            }),
            Kind::Explicit { .. } => None,
        }
    }

    pub fn domain(&self) -> Domain {
        match &self.kind {
            Kind::Trig(f) => Domain::Torus { dim: f.dim },
            Kind::Gegenbauer { .. } => Domain::Interval,
            Kind::Explicit { domain, .. } => *domain,
        }
    }

    pub fn frequencies(&self) -> Option<&FrequencySet> {
        match &self.kind {
            Kind::Trig(f) => Some(f),
            _ => None,
        }
    }

    pub fn gegenbauer_params(&self) -> Option<(GegenbauerParams, bool)> {
        match &self.kind {
            Kind::Gegenbauer {
                params, weighted, ..
            } => Some((*params, *weighted)),
            _ => None,
        }
    }

    /// `C(α)` for the weighted Gegenbauer system.
    pub fn weighted_scale(&self) -> Option<f64> {
        match &self.kind {
            Kind::Gegenbauer {
                weighted: true,
                scale,
                ..
            } => Some(*scale),
            _ => None,
        }
    }

    /// Quadrature whose inner products reproduce the exact Gram. The
    /// automatic resolution is `2 * max_degree + 1`.
    pub fn quadrature(&self, resolution: Option<usize>) -> Result<Quadrature> {
        match &self.kind {
            Kind::Explicit { nodes, weights, .. } => Ok(Quadrature {
                dim: nodes[0].len(),
                nodes: nodes.clone(),
                weights: weights.clone(),
                exactness_degree: usize::MAX,
            }),
            _ => {
                let res = resolution.unwrap_or(2 * self.max_degree() + 1);
                build_quadrature(&self.measure().expect("analytic dictionary"), res)
            }
        }
    }

    /// Whether `q` integrates all products `φ_i conj(φ_j)` exactly.
    pub fn quadrature_is_exact(&self, q: &Quadrature) -> bool {
        match &self.kind {
            Kind::Trig(_) => q.exactness_degree >= 2 * self.max_degree(),
            Kind::Gegenbauer { weighted, .. } => {
                !*weighted && q.exactness_degree >= 2 * self.max_degree()
            }
            Kind::Explicit { .. } => q.exactness_degree == usize::MAX,
        }
    }

    /// Gram matrix in the reference measure when it is known in closed form.
    pub fn exact_gram(&self) -> DMatrix<C64> {
        let n = self.len();
        match &self.kind {
            Kind::Trig(_) => DMatrix::identity(n, n),
            Kind::Gegenbauer {
                params,
                weighted,
                scale,
            } => {
                if *weighted {
                    let d = 1.0 / (PI * gegenbauer_normalizer(params.alpha) * scale * scale);
                    DMatrix::from_diagonal_element(n, n, c(d))
                } else {
                    DMatrix::identity(n, n)
                }
            }
            Kind::Explicit {
                weights, values, ..
            } => linalg::weighted_gram(values, weights),
        }
    }

    /// Values of all elements at `x`.
    pub fn eval_all(&self, x: &[f64]) -> Result<Vec<C64>> {
        match &self.kind {
            Kind::Trig(f) => {
                if x.len() != f.dim {
                    return Err(Error::Domain(format!(
                        "point of dimension {} for a {}-dimensional torus",
                        x.len(),
                        f.dim
                    )));
                }
                Ok(f.indices
                    .iter()
                    .map(|k| {
                        let phase: f64 = k.iter().zip(x).map(|(kj, xj)| *kj as f64 * xj).sum();
                        C64::from_polar(1.0, phase)
                    })
                    .collect())
            }
            Kind::Gegenbauer {
                params,
                weighted,
                scale,
            } => {
                let t = match x {
                    [t] if (-1.0..=1.0).contains(t) => *t,
                    _ => return Err(Error::Domain(format!("{x:?} is not in [-1, 1]"))),
                };
                let vals = gegenbauer_all(params.alpha, params.max_degree, t);
                let factor = if *weighted {
                    gegenbauer_envelope(params.alpha, t) / scale
                } else {
                    1.0
                };
                Ok(vals.into_iter().map(|v| c(v * factor)).collect())
            }
            Kind::Explicit {
                domain,
                nodes,
                values,
                ..
            } => {
                if x.len() != nodes[0].len() {
                    return Err(Error::Domain(format!("point {x:?} has the wrong dimension")));
                }
                let idx = nearest_node(*domain, nodes, x);
                Ok(values.row(idx).iter().copied().collect())
            }
        }
    }

    /// Value of element `j` at `x`.
    pub fn eval(&self, j: usize, x: &[f64]) -> Result<C64> {
        if j >= self.len() {
            return Err(Error::param(format!("element {j} of {}", self.len())));
        }
        Ok(self.eval_all(x)?[j])
    }

    /// Matrix with one row per point and one column per element.
    pub fn design(&self, points: &[Vec<f64>]) -> Result<DMatrix<C64>> {
        let rows: Vec<Vec<C64>> = points
            .par_iter()
            .map(|x| self.eval_all(x))
            .collect::<Result<_>>()?;
        let n = self.len();
        Ok(DMatrix::from_fn(points.len(), n, |r, col| rows[r][col]))
    }

    /// Draws `count` points from the reference measure.
    pub fn sample_points<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        match &self.kind {
            Kind::Explicit { nodes, weights, .. } => {
                let cdf: Vec<f64> = weights
                    .iter()
                    .scan(0.0, |s, w| {
                        *s += w;
                        Some(*s)
                    })
                    .collect();
                Ok((0..count)
                    .map(|_| {
                        let u = rng.random::<f64>() * cdf[cdf.len() - 1];
                        let i = cdf.partition_point(|c| *c <= u).min(nodes.len() - 1);
                        nodes[i].clone()
                    })
                    .collect())
            }
            _ => self.measure().expect("analytic dictionary").sample(count, rng),
        }
    }
}

fn nearest_node(domain: Domain, nodes: &[Vec<f64>], x: &[f64]) -> usize {
    let dist = |p: &[f64]| -> f64 {
        p.iter()
            .zip(x)
            .map(|(a, b)| {
                let d = (a - b).abs();
                let d = match domain {
                    Domain::Torus { .. } => {
                        let d = d.rem_euclid(2.0 * PI);
                        d.min(2.0 * PI - d)
                    }
                    Domain::Interval => d,
                };
                d * d
            })
            .sum()
    };
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in nodes.iter().enumerate() {
        let d = dist(p);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Gram matrix computed with the given quadrature.
#[derive(Debug, Clone)]
pub struct GramResult {
    pub matrix: DMatrix<C64>,
    /// Set when `q` is not exact for products of dictionary elements.
    pub precision_warning: bool,
}

pub fn dictionary_gram(dict: &Dictionary, q: &Quadrature) -> Result<GramResult> {
    let design = dict.design(&q.nodes)?;
    Ok(GramResult {
        matrix: linalg::weighted_gram(&design, &q.weights),
        precision_warning: !dict.quadrature_is_exact(q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trig(kind: FrequencyKind) -> Dictionary {
        trig_dictionary(build_frequency_set(kind, 1).unwrap()).unwrap()
    }

    #[test]
    fn exponential_at_quarter_turn() {
        let d = trig(FrequencyKind::List {
            indices: vec![vec![1]],
        });
        let v = d.eval(0, &[PI / 2.0]).unwrap();
        assert!((v - C64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn trig_gram_on_small_grid_is_identity() {
        let d = trig(FrequencyKind::HyperbolicCross { n: 2 });
        let q = build_quadrature(&MeasureSpec::torus(1), 8).unwrap();
        let g = dictionary_gram(&d, &q).unwrap();
        assert!(linalg::is_identity(&g.matrix, 1e-12));
        assert!(!g.precision_warning);
    }

    #[test]
    fn legendre_normalization() {
        let p = GegenbauerParams::new(0.0, 8).unwrap();
        for n in 0..=8 {
            let v = gegenbauer_eval(&p, n, 1.0).unwrap();
            assert!((v - (2.0 * n as f64 + 1.0).sqrt()).abs() < 1e-12);
        }
        assert!((gegenbauer_eval(&p, 1, 0.3).unwrap() - 3f64.sqrt() * 0.3).abs() < 1e-15);
        assert!(matches!(
            gegenbauer_eval(&p, 1, 1.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn gegenbauer_gram_is_identity() {
        for &alpha in &[-0.25, 0.0, 0.5, 1.5] {
            let d = gegenbauer_dictionary(GegenbauerParams::new(alpha, 10).unwrap(), false).unwrap();
            let q = d.quadrature(None).unwrap();
            let g = dictionary_gram(&d, &q).unwrap();
            assert!(linalg::is_identity(&g.matrix, 1e-10), "alpha {alpha}");
        }
    }

    #[test]
    fn weighted_system_is_bounded_by_one() {
        let d = gegenbauer_dictionary(GegenbauerParams::new(0.5, 12).unwrap(), true).unwrap();
        let xs: Vec<Vec<f64>> = (0..=4001)
            .map(|k| vec![-1.0 + 2.0 * k as f64 / 4001.0])
            .collect();
        let m = d.design(&xs).unwrap();
        assert!(m.iter().all(|v| v.norm() <= 1.0 + 1e-9));
        assert!(m.iter().any(|v| v.norm() > 0.9));
    }

    #[test]
    fn explicit_dictionary_uses_its_grid() {
        let d = DictionarySpec::Explicit {
            domain: Domain::Interval,
            nodes: vec![vec![-0.5], vec![0.5]],
            weights: None,
            values: vec![vec![c(1.0), c(1.0)], vec![c(1.0), c(-1.0)]],
        }
        .build()
        .unwrap();
        assert!(d.meta.orthonormal);
        assert_eq!(d.eval(1, &[0.4]).unwrap(), c(-1.0));
        assert!(linalg::is_identity(&d.exact_gram(), 1e-15));
    }
}
