//! Point sets and a cache of dictionary values on the quadrature nodes,
//! the sample points and the uniform-norm grid.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{mu_xi_weights, EvalGrid, MeasureSpec, Quadrature};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::{self, C64};

/// How a point set was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Equispaced,
    RandomFromMeasure,
    RandomChebyshev,
    User,
}

/// Sample locations with positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl PointSet {
    /// Points with uniform weights `1/m`.
    pub fn uniform(points: Vec<Vec<f64>>, provenance: Provenance) -> Result<Self> {
        let m = points.len();
        Self::weighted(points, vec![1.0 / m.max(1) as f64; m], provenance)
    }

    pub fn weighted(points: Vec<Vec<f64>>, weights: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::param("a point set needs at least one point"));
        }
        if weights.len() != points.len() {
            return Err(Error::param(format!(
                "{} weights for {} points",
                weights.len(),
                points.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::param(format!("weights must be positive, got {w}")));
        }
        Ok(PointSet {
            points,
            weights,
            provenance,
            seed: None,
        })
    }

    /// Tensor equispaced grid on the torus with `per_dim` points per
    /// coordinate.
    pub fn equispaced_torus(dim: usize, per_dim: usize) -> Result<Self> {
        let q = crate::analysis::build_quadrature(&MeasureSpec::torus(dim), per_dim)?;
        Self::uniform(q.nodes, Provenance::Equispaced)
    }

    /// Gauss-Chebyshev nodes `cos((2k-1)π/(2m))`, ascending.
    pub fn chebyshev_nodes(m: usize) -> Result<Self> {
        let mut pts: Vec<Vec<f64>> = (1..=m)
            .map(|k| vec![((2 * k - 1) as f64 * PI / (2 * m) as f64).cos()])
            .collect();
        pts.reverse();
        Self::uniform(pts, Provenance::User)
    }

    /// `m` i.i.d. points from the dictionary's reference measure.
    pub fn random<R: Rng + ?Sized>(dict: &Dictionary, m: usize, rng: &mut R) -> Result<Self> {
        let pts = dict.sample_points(m, rng)?;
        let provenance = match dict.measure() {
            Some(MeasureSpec {
                density: crate::analysis::Density::Chebyshev,
                ..
            }) => Provenance::RandomChebyshev,
            _ => Provenance::RandomFromMeasure,
        };
        Self::uniform(pts, provenance)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        let w0 = 1.0 / self.len() as f64;
        self.weights.iter().all(|w| (w - w0).abs() <= 1e-15 * w0)
    }
}

/// Hilbert-space norms the oracles work in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HilbertNorm {
    /// `L₂(μ)` through the quadrature.
    L2Mu,
    /// `L₂(μ_ξ)` with the mixture measure.
    L2MuXi,
}

/// All norms supported by the best-approximation oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Norm {
    L2Mu,
    L2MuXi,
    /// Maximum over the evaluation grid.
    Uniform,
}

impl From<HilbertNorm> for Norm {
    fn from(h: HilbertNorm) -> Self {
        match h {
            HilbertNorm::L2Mu => Norm::L2Mu,
            HilbertNorm::L2MuXi => Norm::L2MuXi,
        }
    }
}

/// Construction options for a [`Workspace`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceOptions {
    /// Quadrature resolution; `None` picks `2 * max_degree + 1`.
    pub quadrature_resolution: Option<usize>,
    /// Dense grid size factor for the uniform norm; `0` disables the grid.
    pub oversample: usize,
}

impl Default for WorkspaceOptions {
    fn default() -> Self {
        WorkspaceOptions {
            quadrature_resolution: None,
            oversample: 16,
        }
    }
}

/// Dictionary values cached on every node set a computation needs.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub dict: Dictionary,
    pub quad: Quadrature,
    pub phi_quad: DMatrix<C64>,
    pub points: PointSet,
    pub phi_points: DMatrix<C64>,
    /// Dense grid merged with the quadrature nodes and the sample points.
    pub grid: Option<EvalGrid>,
    pub phi_grid: Option<DMatrix<C64>>,
    /// Exact Gram matrix in the reference measure.
    pub gram: DMatrix<C64>,
    pub gram_is_identity: bool,
}

/// Values of one function on the workspace node sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled {
    pub on_quad: Vec<C64>,
    pub on_points: Vec<C64>,
    pub on_grid: Option<Vec<C64>>,
}

impl Workspace {
    pub fn new(dict: Dictionary, points: PointSet, opts: WorkspaceOptions) -> Result<Self> {
        let quad = dict.quadrature(opts.quadrature_resolution)?;
        Self::with_quadrature(dict, points, quad, opts.oversample)
    }

    pub fn with_quadrature(
        dict: Dictionary,
        points: PointSet,
        quad: Quadrature,
        oversample: usize,
    ) -> Result<Self> {
        let phi_quad = dict.design(&quad.nodes)?;
        let phi_points = dict.design(&points.points)?;
        let (grid, phi_grid) = if oversample > 0 {
            let dense = match dict.measure() {
                Some(measure) => EvalGrid::dense(&measure, dict.len(), oversample)?,
                None => EvalGrid {
                    points: Vec::new(),
                    dense_size: 0,
                    oversample,
                },
            };
            let grid = dense.with_points(&quad.nodes).with_points(&points.points);
            let phi = dict.design(&grid.points)?;
            (Some(grid), Some(phi))
        } else {
            (None, None)
        };
        let gram = dict.exact_gram();
        let gram_is_identity = linalg::is_identity(&gram, 1e-14);
        Ok(Workspace {
            dict,
            quad,
            phi_quad,
            points,
            phi_points,
            grid,
            phi_grid,
            gram,
            gram_is_identity,
        })
    }

    pub fn n(&self) -> usize {
        self.dict.len()
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn grid_size(&self) -> Option<usize> {
        self.grid.as_ref().map(|g| g.len())
    }

    /// Values of the expansion `Σ c_j φ_j`.
    pub fn expansion(&self, coeffs: &[C64]) -> Sampled {
        Sampled {
            on_quad: linalg::apply(&self.phi_quad, coeffs),
            on_points: linalg::apply(&self.phi_points, coeffs),
            on_grid: self.phi_grid.as_ref().map(|g| linalg::apply(g, coeffs)),
        }
    }

    /// Values of an arbitrary function.
    pub fn sample_fn(&self, f: impl Fn(&[f64]) -> C64) -> Sampled {
        Sampled {
            on_quad: self.quad.nodes.iter().map(|x| f(x)).collect(),
            on_points: self.points.points.iter().map(|x| f(x)).collect(),
            on_grid: self
                .grid
                .as_ref()
                .map(|g| g.points.iter().map(|x| f(x)).collect()),
        }
    }

    /// Design matrix and weights of the discrete measure realizing `norm`.
    pub fn hilbert_view(&self, norm: HilbertNorm) -> (DMatrix<C64>, Vec<f64>) {
        match norm {
            HilbertNorm::L2Mu => (self.phi_quad.clone(), self.quad.weights.clone()),
            HilbertNorm::L2MuXi => {
                let (q, m, n) = (self.quad.len(), self.m(), self.n());
                let design = DMatrix::from_fn(q + m, n, |r, c| {
                    if r < q {
                        self.phi_quad[(r, c)]
                    } else {
                        self.phi_points[(r - q, c)]
                    }
                });
                (design, mu_xi_weights(&self.quad, m))
            }
        }
    }

    /// Values of `s` on the node list of [`Workspace::hilbert_view`].
    pub fn hilbert_values(&self, s: &Sampled, norm: HilbertNorm) -> Vec<C64> {
        match norm {
            HilbertNorm::L2Mu => s.on_quad.clone(),
            HilbertNorm::L2MuXi => s.on_quad.iter().chain(&s.on_points).copied().collect(),
        }
    }

    /// Norm of a sampled function.
    pub fn norm(&self, s: &Sampled, norm: Norm) -> Result<f64> {
        match norm {
            Norm::L2Mu => Ok(linalg::weighted_l2(&s.on_quad, &self.quad.weights)),
            Norm::L2MuXi => crate::analysis::norm_l2_mu_xi(&s.on_quad, &self.quad, &s.on_points),
            Norm::Uniform => s
                .on_grid
                .as_ref()
                .map(|g| linalg::max_abs(g))
                .ok_or_else(|| Error::param("workspace was built without an evaluation grid")),
        }
    }

    /// Values of `f - Σ_{j∈J} c_j φ_j`.
    pub fn residual(&self, f: &Sampled, subset: &[usize], coeffs: &[C64]) -> Sampled {
        Sampled {
            on_quad: linalg::sub(&f.on_quad, &linalg::apply_columns(&self.phi_quad, subset, coeffs)),
            on_points: linalg::sub(
                &f.on_points,
                &linalg::apply_columns(&self.phi_points, subset, coeffs),
            ),
            on_grid: match (&f.on_grid, &self.phi_grid) {
                (Some(v), Some(g)) => Some(linalg::sub(v, &linalg::apply_columns(g, subset, coeffs))),
                _ => None,
            },
        }
    }
}

/// A function that can be evaluated on a workspace.
pub trait Target: Sync {
    fn sample(&self, ws: &Workspace) -> Result<Sampled>;
}

/// `Σ c_j φ_j` over the workspace dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub coefficients: Vec<C64>,
}

impl Target for Expansion {
    fn sample(&self, ws: &Workspace) -> Result<Sampled> {
        if self.coefficients.len() != ws.n() {
            return Err(Error::param(format!(
                "{} coefficients for {} elements",
                self.coefficients.len(),
                ws.n()
            )));
        }
        Ok(ws.expansion(&self.coefficients))
    }
}

/// An expansion plus exponentials `e^{i(k,x)}` that may lie outside the
/// dictionary span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedExpansion {
    pub base: Expansion,
    pub exponentials: Vec<(Vec<i64>, C64)>,
}

impl Target for PerturbedExpansion {
    fn sample(&self, ws: &Workspace) -> Result<Sampled> {
        let base = self.base.sample(ws)?;
        let extra = ws.sample_fn(|x| {
            self.exponentials
                .iter()
                .map(|(k, a)| {
                    let phase: f64 = k.iter().zip(x).map(|(kj, xj)| *kj as f64 * xj).sum();
                    a * C64::from_polar(1.0, phase)
                })
                .sum()
        });
        let add = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
        Ok(Sampled {
            on_quad: add(&base.on_quad, &extra.on_quad),
            on_points: add(&base.on_points, &extra.on_points),
            on_grid: match (base.on_grid, extra.on_grid) {
                (Some(a), Some(b)) => Some(add(&a, &b)),
                _ => None,
            },
        })
    }
}

/// Wraps a closure as a [`Target`].
pub struct FnTarget<F>(pub F);

impl<F: Fn(&[f64]) -> C64 + Sync> Target for FnTarget<F> {
    fn sample(&self, ws: &Workspace) -> Result<Sampled> {
        Ok(ws.sample_fn(&self.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::trig_dictionary;
    use crate::frequency::{build_frequency_set, FrequencyKind};
    use crate::linalg::c;

    fn ws() -> Workspace {
        let d = trig_dictionary(
            build_frequency_set(FrequencyKind::HyperbolicCross { n: 2 }, 1).unwrap(),
        )
        .unwrap();
        let pts = PointSet::equispaced_torus(1, 5).unwrap();
        Workspace::new(d, pts, WorkspaceOptions::default()).unwrap()
    }

    #[test]
    fn mixture_norm_of_constant_is_one() {
        let w = ws();
        let one = w.sample_fn(|_| c(1.0));
        assert!((w.norm(&one, Norm::L2MuXi).unwrap() - 1.0).abs() < 1e-15);
        assert!((w.norm(&one, Norm::Uniform).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn discrete_parseval_on_equispaced_nodes() {
        let w = ws();
        let mut coeffs = vec![c(0.0); 5];
        coeffs[1] = c(1.0);
        let f = w.expansion(&coeffs);
        assert!((w.norm(&f, Norm::L2MuXi).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn point_sets_reject_bad_weights() {
        assert!(PointSet::weighted(vec![vec![0.0]], vec![0.0], Provenance::User).is_err());
        assert!(PointSet::uniform(vec![], Provenance::User).is_err());
    }
}
