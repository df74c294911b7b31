//! Least-squares recovery from samples: weighted and ℓ_p fits on a fixed
//! subspace, the ideal best-subset projection and the sparse least-squares
//! operator over all v-term subspaces.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::discretization::{scan_subsets, DEFAULT_SUBSET_CAP, TIE_TOLERANCE};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::workspace::{HilbertNorm, Norm, Sampled, Target, Workspace};

/// Constant `2/c + 1` in the Lebesgue-type inequalities for a one-sided
/// discretization constant `C₁` stored in squared form. The constant of the
/// unsquared sampling inequality is `√C₁`, so `c = min(C₁, √C₁)` keeps the
/// bound valid for `C₁ > 1` as well.
pub fn lebesgue_factor(c1: f64) -> Result<f64> {
    if !(c1 > 0.0) || !c1.is_finite() {
        return Err(Error::param(format!("discretization constant {c1} must be positive")));
    }
    Ok(2.0 / c1.min(c1.sqrt()) + 1.0)
}

/// Least-squares solution on a subspace spanned by dictionary elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsFit {
    pub subset: Vec<usize>,
    pub coefficients: Vec<C64>,
    pub rank: usize,
    /// The design restricted to the subset is rank deficient; the
    /// minimum-norm minimizer was returned.
    pub degenerate: bool,
    /// `‖S(f - u, ξ)‖_{2,w}`.
    pub sample_residual: f64,
}

fn check_subset(subset: &[usize], n: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::param("empty subspace"));
    }
    if subset.windows(2).any(|w| w[0] >= w[1]) || subset[subset.len() - 1] >= n {
        return Err(Error::param(format!(
            "subset {subset:?} must be sorted, distinct and below {n}"
        )));
    }
    Ok(())
}

/// Minimizer of `Σ w_ν |f(ξ^ν) - u(ξ^ν)|²` over `u` in the span of the
/// columns `subset` of `design` (one row per point).
pub fn weighted_least_squares_fit(
    design: &DMatrix<C64>,
    samples: &[C64],
    weights: &[f64],
    subset: &[usize],
) -> Result<LsFit> {
    check_subset(subset, design.ncols())?;
    if samples.len() != design.nrows() || weights.len() != design.nrows() {
        return Err(Error::param("samples, weights and points must align"));
    }
    let a = linalg::columns(design, subset);
    let sol = linalg::weighted_lstsq(&a, samples, weights);
    let coefficients: Vec<C64> = sol.coefficients.iter().copied().collect();
    let resid = linalg::sub(samples, &linalg::apply(&a, &coefficients));
    Ok(LsFit {
        subset: subset.to_vec(),
        degenerate: sol.degenerate(),
        rank: sol.rank,
        coefficients,
        sample_residual: linalg::weighted_l2(&resid, weights),
    })
}

/// Weighted least squares with the workspace points and weights.
pub fn least_squares_fit(ws: &Workspace, samples: &[C64], subset: &[usize]) -> Result<LsFit> {
    weighted_least_squares_fit(&ws.phi_points, samples, &ws.points.weights, subset)
}

/// Result of a weighted ℓ_p fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpFit {
    pub fit: LsFit,
    pub p: f64,
    /// `Σ w_ν |f(ξ^ν) - u(ξ^ν)|^p`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Options for the iteratively reweighted ℓ_p solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            tolerance: 1e-8,
            max_iterations: 500,
        }
    }
}

fn lp_objective(resid: &[C64], weights: &[f64], p: f64) -> f64 {
    resid
        .iter()
        .zip(weights)
        .map(|(r, w)| w * r.norm().powf(p))
        .sum()
}

/// Minimizer of `Σ w_ν |f(ξ^ν) - u(ξ^ν)|^p`. For `p = 2` this is exactly
/// [`weighted_least_squares_fit`]; otherwise iteratively reweighted least
/// squares with a monotone line search.
pub fn least_p_fit(
    design: &DMatrix<C64>,
    samples: &[C64],
    weights: &[f64],
    subset: &[usize],
    p: f64,
    opts: &LpOptions,
) -> Result<LpFit> {
    if !(p >= 1.0) || p.is_infinite() {
        return Err(Error::param(format!("p must lie in [1, ∞), got {p}")));
    }
    let start = weighted_least_squares_fit(design, samples, weights, subset)?;
    let a = linalg::columns(design, subset);
    let objective_of = |c: &[C64]| {
        let r = linalg::sub(samples, &linalg::apply(&a, c));
        (lp_objective(&r, weights, p), r)
    };
    if p == 2.0 {
        let objective = start.sample_residual * start.sample_residual;
        return Ok(LpFit {
            fit: start,
            p,
            objective,
            iterations: 0,
            converged: true,
        });
    }
    let mut coeffs = start.coefficients.clone();
    let (mut obj, mut resid) = objective_of(&coeffs);
    let mut converged = obj == 0.0;
    let mut iterations = 0;
    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let scale = linalg::max_abs(&resid);
        let floor = (scale * 1e-12).max(f64::MIN_POSITIVE);
        let irls: Vec<f64> = resid
            .iter()
            .zip(weights)
            .map(|(r, w)| w * r.norm().max(floor).powf(p - 2.0))
            .collect();
        let target = linalg::weighted_lstsq(&a, samples, &irls);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<C64> = coeffs
                .iter()
                .zip(target.coefficients.iter())
                .map(|(c, t)| c + (t - c) * step)
                .collect();
            let (trial_obj, trial_resid) = objective_of(&trial);
            if trial_obj < obj {
                let gain = (obj - trial_obj) / obj;
                coeffs = trial;
                obj = trial_obj;
                resid = trial_resid;
                accepted = true;
                converged = gain < opts.tolerance * 1e-4 || obj == 0.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            converged = true;
        }
    }
    let sample_residual = linalg::weighted_l2(&resid, weights);
    Ok(LpFit {
        fit: LsFit {
            coefficients: coeffs,
            sample_residual,
            ..start
        },
        p,
        objective: obj,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    IdealProjection,
    SparseLsExhaustive,
    SparseLsGreedy,
    Oga,
    TwoBlock,
    BlockBudget,
    Projection,
}

/// A v-term approximant with its residual in several norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseApproximant {
    pub subset: Vec<usize>,
    pub coefficients: Vec<C64>,
    pub residual_l2_mu: f64,
    pub residual_l2_mu_xi: f64,
    pub residual_uniform: Option<f64>,
    pub grid_size: Option<usize>,
    pub algorithm: Algorithm,
    pub degenerate: bool,
    /// Result of a heuristic (non-exhaustive) search.
    pub heuristic: bool,
    /// Subset choice used the function beyond its samples (quadrature
    /// values for exact `L₂(μ)` residuals).
    pub uses_quadrature_values: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residual_history: Vec<f64>,
}

impl SparseApproximant {
    pub fn build(
        ws: &Workspace,
        f: &Sampled,
        subset: Vec<usize>,
        coefficients: Vec<C64>,
        algorithm: Algorithm,
    ) -> Result<Self> {
        let r = ws.residual(f, &subset, &coefficients);
        Ok(SparseApproximant {
            residual_l2_mu: ws.norm(&r, Norm::L2Mu)?,
            residual_l2_mu_xi: ws.norm(&r, Norm::L2MuXi)?,
            residual_uniform: ws.norm(&r, Norm::Uniform).ok(),
            grid_size: ws.grid_size(),
            subset,
            coefficients,
            algorithm,
            degenerate: false,
            heuristic: false,
            uses_quadrature_values: false,
            residual_history: Vec::new(),
        })
    }

    /// Coefficients over the whole dictionary.
    pub fn dense_coefficients(&self, n: usize) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (j, c) in self.subset.iter().zip(&self.coefficients) {
            out[*j] += c;
        }
        out
    }
}

/// Orthogonal projections onto spans of dictionary subsets in a discrete
/// inner product `⟨g, h⟩ = Σ ω_i g_i conj(h_i)`.
pub(crate) struct Projector<'a> {
    design: &'a DMatrix<C64>,
    weights: &'a [f64],
    values: &'a [C64],
    gram: DMatrix<C64>,
    corr: DVector<C64>,
    norm_sq: f64,
}

impl<'a> Projector<'a> {
    pub(crate) fn new(design: &'a DMatrix<C64>, weights: &'a [f64], values: &'a [C64]) -> Self {
        let gram = linalg::weighted_gram(design, weights);
        let wv: Vec<C64> = values.iter().zip(weights).map(|(v, w)| v * *w).collect();
        let corr = design.adjoint() * DVector::from_vec(wv);
        let norm_sq = values
            .iter()
            .zip(weights)
            .map(|(v, w)| w * v.norm_sqr())
            .sum();
        Projector {
            design,
            weights,
            values,
            gram,
            corr,
            norm_sq,
        }
    }

    pub(crate) fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }

    /// Distance from the values to the span of `subset`. Fast Gram path,
    /// with a direct solve when the residual is small relative to the norm.
    pub(crate) fn distance(&self, subset: &[usize]) -> f64 {
        let g = linalg::principal(&self.gram, subset);
        let b = DVector::from_iterator(subset.len(), subset.iter().map(|&j| self.corr[j]));
        let fast = Cholesky::new(g).and_then(|ch| {
            let l = ch.l();
            let diag_min = l.diagonal().iter().map(|d| d.re).fold(f64::INFINITY, f64::min);
            let diag_max = l.diagonal().iter().map(|d| d.re).fold(0.0, f64::max);
            if diag_min <= diag_max * 1e-6 {
                return None;
            }
            let y = l.solve_lower_triangular(&b)?;
            Some((self.norm_sq - y.norm_squared()).max(0.0))
        });
        match fast {
            Some(r2) if r2 > 1e-6 * self.norm_sq => r2.sqrt(),
            _ => self.project(subset).1,
        }
    }

    /// Projection coefficients and distance by a direct least-squares solve.
    pub(crate) fn project(&self, subset: &[usize]) -> (Vec<C64>, f64, bool) {
        let a = linalg::columns(self.design, subset);
        let sol = linalg::weighted_lstsq(&a, self.values, self.weights);
        let coeffs: Vec<C64> = sol.coefficients.iter().copied().collect();
        let r = linalg::sub(self.values, &linalg::apply(&a, &coeffs));
        (coeffs, linalg::weighted_l2(&r, self.weights), sol.degenerate())
    }

    /// Exhaustive best subset with lexicographic tie-breaking.
    pub(crate) fn best_subset(&self, v: usize) -> (Vec<usize>, f64) {
        let mut best: Option<(Vec<usize>, f64)> = None;
        scan_subsets(
            self.design.ncols(),
            v,
            |j| self.distance(j),
            |j, d| {
                if best.as_ref().is_none_or(|(_, b)| d < b - TIE_TOLERANCE) {
                    best = Some((j.to_vec(), d));
                }
            },
        );
        best.expect("at least one subset")
    }

    /// Orthogonal greedy selection of `v` elements by normalized
    /// correlation, ties to the smaller index. Returns the selection order
    /// and the residual norm after each step.
    pub(crate) fn greedy(&self, v: usize) -> (Vec<usize>, Vec<f64>) {
        let n = self.design.ncols();
        let norms: Vec<f64> = (0..n).map(|j| self.gram[(j, j)].re.sqrt()).collect();
        let mut selected: Vec<usize> = Vec::new();
        let mut resid = self.values.to_vec();
        let mut history = vec![self.norm()];
        for _ in 0..v.min(n) {
            let wr: Vec<C64> = resid.iter().zip(self.weights).map(|(r, w)| r * *w).collect();
            let mut pick = None;
            let mut best = -1.0;
            for (j, &nj) in norms.iter().enumerate() {
                if selected.contains(&j) || nj == 0.0 {
                    continue;
                }
                let ip: C64 = (0..wr.len()).map(|i| self.design[(i, j)].conj() * wr[i]).sum();
                let score = ip.norm() / nj;
                if score > best {
                    best = score;
                    pick = Some(j);
                }
            }
            let Some(j) = pick else { break };
            selected.push(j);
            let mut sorted = selected.clone();
            sorted.sort_unstable();
            let (coeffs, dist, _) = self.project(&sorted);
            resid = linalg::sub(self.values, &linalg::apply_columns(self.design, &sorted, &coeffs));
            history.push(dist);
            if dist == 0.0 {
                break;
            }
        }
        (selected, history)
    }
}

/// Options shared by the exhaustive subset searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub cap: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            cap: DEFAULT_SUBSET_CAP,
        }
    }
}

fn check_v(v: usize, n: usize) -> Result<()> {
    if v == 0 || v > n {
        Err(Error::param(format!("v = {v} must lie in 1..={n}")))
    } else {
        Ok(())
    }
}

/// Best `v`-term `L₂(μ)` approximation by exhaustive projection. Above the
/// cap, falls back to orthogonal greedy selection and flags the result.
pub fn ideal_projection_recover(
    ws: &Workspace,
    f: &Sampled,
    v: usize,
    opts: &SearchOptions,
) -> Result<SparseApproximant> {
    check_v(v, ws.n())?;
    let (design, weights) = ws.hilbert_view(HilbertNorm::L2Mu);
    let values = ws.hilbert_values(f, HilbertNorm::L2Mu);
    let proj = Projector::new(&design, &weights, &values);
    let exhaustive = linalg::binomial(ws.n(), v) <= opts.cap as u128;
    let subset = if exhaustive {
        proj.best_subset(v).0
    } else {
        let mut s = proj.greedy(v).0;
        s.sort_unstable();
        s
    };
    let (coeffs, _, degenerate) = proj.project(&subset);
    let mut out = SparseApproximant::build(ws, f, subset, coeffs, Algorithm::IdealProjection)?;
    out.degenerate = degenerate;
    out.heuristic = !exhaustive;
    out.uses_quadrature_values = true;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Exhaustive,
    Greedy,
}

/// Scores subsets for the sparse least-squares operator: fit on the
/// samples, measure the error in `L₂(μ)` by quadrature.
struct SparseLsScorer<'a> {
    ws: &'a Workspace,
    f: &'a Sampled,
    sample_gram: DMatrix<C64>,
    sample_corr: DVector<C64>,
    quad: Projector<'a>,
}

impl<'a> SparseLsScorer<'a> {
    fn new(ws: &'a Workspace, f: &'a Sampled) -> Self {
        let w = &ws.points.weights;
        let sample_gram = linalg::weighted_gram(&ws.phi_points, w);
        let wy: Vec<C64> = f.on_points.iter().zip(w).map(|(y, w)| y * *w).collect();
        let sample_corr = ws.phi_points.adjoint() * DVector::from_vec(wy);
        SparseLsScorer {
            ws,
            f,
            sample_gram,
            sample_corr,
            quad: Projector::new(&ws.phi_quad, &ws.quad.weights, &f.on_quad),
        }
    }

    fn fit(&self, subset: &[usize]) -> Vec<C64> {
        let g = linalg::principal(&self.sample_gram, subset);
        let b = DVector::from_iterator(subset.len(), subset.iter().map(|&j| self.sample_corr[j]));
        let fast = Cholesky::new(g).and_then(|ch| {
            let l = ch.l();
            let dmin = l.diagonal().iter().map(|d| d.re).fold(f64::INFINITY, f64::min);
            let dmax = l.diagonal().iter().map(|d| d.re).fold(0.0, f64::max);
            (dmin > dmax * 1e-6).then(|| ch.solve(&b))
        });
        match fast {
            Some(c) => c.iter().copied().collect(),
            None => {
                least_squares_fit(self.ws, &self.f.on_points, subset)
                    .expect("validated subset")
                    .coefficients
            }
        }
    }

    /// `‖f - LS(ξ, span J) f‖_{L₂(μ)}`.
    fn error(&self, subset: &[usize]) -> f64 {
        let c = self.fit(subset);
        let q = &self.quad;
        let mut cross = C64::new(0.0, 0.0);
        let mut quadratic = C64::new(0.0, 0.0);
        for (a, &i) in subset.iter().enumerate() {
            cross += c[a].conj() * q.corr[i];
            for (b, &j) in subset.iter().enumerate() {
                quadratic += c[a].conj() * q.gram[(i, j)] * c[b];
            }
        }
        let r2 = q.norm_sq - 2.0 * cross.re + quadratic.re;
        if r2 > 1e-6 * q.norm_sq {
            return r2.sqrt();
        }
        let approx = linalg::apply_columns(&self.ws.phi_quad, subset, &c);
        linalg::weighted_l2(&linalg::sub(&self.f.on_quad, &approx), &self.ws.quad.weights)
    }
}

/// The sparse least-squares operator `LS(ξ, 𝒳_v)`: over `v`-subsets `J`,
/// fit `f` on the samples by least squares on `span J` and keep the fit with
/// the smallest `L₂(μ)` error. The greedy strategy selects `J` by orthogonal
/// matching on the sample inner product instead.
pub fn sparse_ls_recover(
    ws: &Workspace,
    f: &Sampled,
    v: usize,
    strategy: Strategy,
    opts: &SearchOptions,
) -> Result<SparseApproximant> {
    check_v(v, ws.n())?;
    let (subset, algorithm) = match strategy {
        Strategy::Exhaustive => {
            let count = linalg::binomial(ws.n(), v);
            if count > opts.cap as u128 {
                return Err(Error::Cap {
                    count,
                    cap: opts.cap,
                    hint: "use the greedy strategy",
                });
            }
            let scorer = SparseLsScorer::new(ws, f);
            let mut best: Option<(Vec<usize>, f64)> = None;
            scan_subsets(
                ws.n(),
                v,
                |j| scorer.error(j),
                |j, e| {
                    if best.as_ref().is_none_or(|(_, b)| e < b - TIE_TOLERANCE) {
                        best = Some((j.to_vec(), e));
                    }
                },
            );
            (best.expect("nonempty").0, Algorithm::SparseLsExhaustive)
        }
        Strategy::Greedy => {
            let proj = Projector::new(&ws.phi_points, &ws.points.weights, &f.on_points);
            let mut s = proj.greedy(v).0;
            s.sort_unstable();
            (s, Algorithm::SparseLsGreedy)
        }
    };
    let fit = least_squares_fit(ws, &f.on_points, &subset)?;
    let mut out = SparseApproximant::build(ws, f, subset, fit.coefficients, algorithm)?;
    out.degenerate = fit.degenerate;
    out.heuristic = strategy == Strategy::Greedy;
    out.uses_quadrature_values = strategy == Strategy::Exhaustive;
    Ok(out)
}

/// Empirical recovery characteristic: the best candidate point set by its
/// worst sampled class member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    pub value: f64,
    pub best_candidate: usize,
    pub per_candidate: Vec<f64>,
    pub members: usize,
    pub label: String,
}

/// `min` over candidate workspaces of `max` over `members` of the sparse
/// least-squares `L₂(μ)` error. The point weights of each candidate are
/// used, so weighted candidates give the weighted characteristic.
pub fn estimate_rho_ls(
    members: &[&dyn Target],
    candidates: &[Workspace],
    v: usize,
    strategy: Strategy,
    opts: &SearchOptions,
) -> Result<RhoEstimate> {
    if candidates.is_empty() {
        return Err(Error::param("at least one candidate point set is required"));
    }
    let mut per_candidate = Vec::with_capacity(candidates.len());
    for ws in candidates {
        let mut worst = 0.0f64;
        for t in members {
            let f = t.sample(ws)?;
            worst = worst.max(sparse_ls_recover(ws, &f, v, strategy, opts)?.residual_l2_mu);
        }
        per_candidate.push(worst);
    }
    let (best_candidate, value) = per_candidate
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, x)| if x < acc.1 { (i, x) } else { acc });
    Ok(RhoEstimate {
        value,
        best_candidate,
        per_candidate,
        members: members.len(),
        label: "empirical (finite sample)".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use nalgebra::DMatrix;

    #[test]
    fn one_dimensional_fit_matches_normal_equations() {
        let design = DMatrix::from_column_slice(3, 1, &[c(1.0), c(2.0), c(-1.0)]);
        let y = [c(1.1), c(1.9), c(-0.8)];
        let w = [1.0 / 3.0; 3];
        let fit = weighted_least_squares_fit(&design, &y, &w, &[0]).unwrap();
        let expected = (1.1 + 3.8 + 0.8) / (1.0 + 4.0 + 1.0);
        assert!((fit.coefficients[0] - c(expected)).norm() < 1e-14);
        assert!(weighted_least_squares_fit(&design, &y, &w, &[]).is_err());
    }

    #[test]
    fn l1_fit_picks_the_majority_value() {
        let design = DMatrix::from_element(3, 1, c(1.0));
        let y = [c(1.0), c(1.0), c(-1.0)];
        let w = [1.0 / 3.0; 3];
        let fit = least_p_fit(&design, &y, &w, &[0], 1.0, &Default::default()).unwrap();
        assert!((fit.fit.coefficients[0] - c(1.0)).norm() < 1e-6);
        assert!((fit.objective - 2.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn l2_path_is_plain_least_squares() {
        let design = DMatrix::from_column_slice(3, 1, &[c(1.0), c(0.5), c(2.0)]);
        let y = [c(0.3), c(-0.2), c(1.0)];
        let w = [0.2, 0.3, 0.5];
        let a = weighted_least_squares_fit(&design, &y, &w, &[0]).unwrap();
        let b = least_p_fit(&design, &y, &w, &[0], 2.0, &Default::default()).unwrap();
        assert_eq!(a, b.fit);
    }
}
