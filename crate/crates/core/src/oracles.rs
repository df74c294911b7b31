//! Best v-term approximation oracles and constructive sparse approximants.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::discretization::{scan_subsets, DEFAULT_SUBSET_CAP, TIE_TOLERANCE};
use crate::error::{Error, Result};
use crate::frequency::block_of;
use crate::linalg::{self, C64};
use crate::minimax::{lawson, lawson_with_cutoff, MinimaxOptions};
use crate::recovery::{Algorithm, Projector, SparseApproximant};
use crate::workspace::{HilbertNorm, Norm, Sampled, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certification {
    ExactExhaustive,
    ExactThreshold,
    UpperBoundGreedy,
    GridEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaResult {
    pub value: f64,
    pub subset: Vec<usize>,
    pub coefficients: Vec<C64>,
    pub norm: Norm,
    pub certification: Certification,
    /// Certified lower bound for grid estimates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaOptions {
    pub cap: u64,
    pub minimax: MinimaxOptions,
}

impl Default for SigmaOptions {
    fn default() -> Self {
        SigmaOptions {
            cap: DEFAULT_SUBSET_CAP,
            minimax: MinimaxOptions::default(),
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

/// Indices of the `v` largest entries of `score`, ties to the smaller
/// index, returned sorted.
pub fn top_indices(score: &[f64], v: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..score.len()).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    let mut out: Vec<usize> = order.into_iter().take(v).collect();
    out.sort_unstable();
    out
}

/// Best `v`-term approximation error of `f` in `norm`.
///
/// Hilbert norms use exhaustive projection (or coefficient thresholding for
/// an orthonormal dictionary in `L₂(μ)`); the uniform norm uses a
/// branch-and-bound over subsets with a discrete minimax solve per subset on
/// the evaluation grid.
pub fn sigma_v(
    ws: &Workspace,
    f: &Sampled,
    v: usize,
    norm: Norm,
    opts: &SigmaOptions,
) -> Result<SigmaResult> {
    check_v(v, ws.n())?;
    match norm {
        Norm::L2Mu | Norm::L2MuXi => {
            let h = if norm == Norm::L2Mu {
                HilbertNorm::L2Mu
            } else {
                HilbertNorm::L2MuXi
            };
            let (design, weights) = ws.hilbert_view(h);
            let values = ws.hilbert_values(f, h);
            let proj = Projector::new(&design, &weights, &values);
            let threshold = h == HilbertNorm::L2Mu
                && ws.gram_is_identity
                && ws.dict.quadrature_is_exact(&ws.quad);
            let exhaustive = linalg::binomial(ws.n(), v) <= opts.cap as u128;
            let (subset, certification) = if threshold {
                let corr: Vec<f64> = (0..ws.n())
                    .map(|j| {
                        (0..values.len())
                            .map(|i| design[(i, j)].conj() * values[i] * weights[i])
                            .sum::<C64>()
                            .norm()
                    })
                    .collect();
                (top_indices(&corr, v), Certification::ExactThreshold)
            } else if exhaustive {
                (proj.best_subset(v).0, Certification::ExactExhaustive)
            } else {
                let mut s = proj.greedy(v).0;
                s.sort_unstable();
                (s, Certification::UpperBoundGreedy)
            };
            let (coefficients, value, _) = proj.project(&subset);
            Ok(SigmaResult {
                value,
                subset,
                coefficients,
                norm,
                certification,
                lower_bound: None,
                grid_size: None,
            })
        }
        Norm::Uniform => sigma_uniform(ws, f, v, opts),
    }
}

fn sigma_uniform(ws: &Workspace, f: &Sampled, v: usize, opts: &SigmaOptions) -> Result<SigmaResult> {
    let (Some(phi), Some(values)) = (ws.phi_grid.as_ref(), f.on_grid.as_ref()) else {
        return Err(Error::param("uniform norm needs an evaluation grid"));
    };
    let g = phi.nrows();
    let uniform = vec![1.0 / g as f64; g];
    let proj = Projector::new(phi, &uniform, values);
    let solve = |j: &[usize], cutoff: f64| {
        let a = linalg::columns(phi, j);
        lawson_with_cutoff(&a, values, &opts.minimax, cutoff)
    };
    let count = linalg::binomial(ws.n(), v);
    if count > opts.cap as u128 {
        let mut s = proj.greedy(v).0;
        s.sort_unstable();
        let r = solve(&s, f64::INFINITY);
        return Ok(SigmaResult {
            value: r.upper,
            subset: s,
            coefficients: r.coefficients,
            norm: Norm::Uniform,
            certification: Certification::UpperBoundGreedy,
            lower_bound: None,
            grid_size: Some(g),
        });
    }
    // least-squares distances under the uniform grid measure bound the
    // minimax value of each subset from below
    let mut bounds: Vec<(Vec<usize>, f64)> = Vec::new();
    scan_subsets(ws.n(), v, |j| proj.distance(j), |j, d| bounds.push((j.to_vec(), d)));
    bounds.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let mut best: Option<(Vec<usize>, Vec<C64>, f64)> = None;
    let mut lower = f64::INFINITY;
    for (j, lb) in &bounds {
        if let Some((_, _, up)) = &best {
            if *lb > *up {
                lower = lower.min(*lb);
                continue;
            }
        }
        let cutoff = best.as_ref().map_or(f64::INFINITY, |b| b.2 + TIE_TOLERANCE);
        let r = solve(j, cutoff);
        lower = lower.min(r.lower);
        let better = match &best {
            None => true,
            Some((bj, _, up)) => {
                r.upper < up - TIE_TOLERANCE || ((r.upper - up).abs() <= TIE_TOLERANCE && j < bj)
            }
        };
        if better {
            best = Some((j.clone(), r.coefficients, r.upper));
        }
    }
    let (subset, coefficients, value) = best.expect("at least one subset");
    Ok(SigmaResult {
        value,
        subset,
        coefficients,
        norm: Norm::Uniform,
        certification: Certification::GridEstimate,
        lower_bound: Some(lower.min(value)),
        grid_size: Some(g),
    })
}

/// Orthogonal greedy algorithm in the chosen inner product: select the
/// element with the largest normalized correlation with the residual, ties
/// to the smaller index, then project onto everything selected so far.
pub fn oga_approximate(
    ws: &Workspace,
    f: &Sampled,
    v: usize,
    inner: HilbertNorm,
) -> Result<SparseApproximant> {
    check_v(v, ws.n())?;
    let (design, weights) = ws.hilbert_view(inner);
    let values = ws.hilbert_values(f, inner);
    let proj = Projector::new(&design, &weights, &values);
    let (selected, history) = proj.greedy(v);
    let mut subset = selected;
    subset.sort_unstable();
    let (coeffs, _, degenerate) = if subset.is_empty() {
        (Vec::new(), proj.norm(), false)
    } else {
        proj.project(&subset)
    };
    let mut out = SparseApproximant::build(ws, f, subset, coeffs, Algorithm::Oga)?;
    out.degenerate = degenerate;
    out.heuristic = true;
    out.residual_history = history;
    Ok(out)
}

/// `Σ |c_j| (j+1)^r` with 0-based `j`.
pub fn a1r_budget(coeffs: &[C64], r: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| c.norm() * ((j + 1) as f64).powf(r))
        .sum()
}

/// At most `2v` terms: the first `v` coefficients kept as they are, plus
/// `v` orthogonal greedy steps in `L₂(μ_ξ)` on the remaining tail.
pub fn two_block_approximant(ws: &Workspace, coeffs: &[C64], r: f64, v: usize) -> Result<SparseApproximant> {
    let n = ws.n();
    if coeffs.len() != n {
        return Err(Error::param(format!("{} coefficients for {n} elements", coeffs.len())));
    }
    let budget = a1r_budget(coeffs, r);
    if budget > 1.0 + 1e-12 {
        return Err(Error::param(format!("coefficient budget {budget} exceeds 1")));
    }
    if v == 0 {
        return Err(Error::param("v must be at least 1"));
    }
    let f = ws.expansion(coeffs);
    let head = v.min(n);
    let mut dense = vec![C64::new(0.0, 0.0); n];
    dense[..head].copy_from_slice(&coeffs[..head]);
    let mut history = Vec::new();
    if head < n {
        let mut tail = coeffs.to_vec();
        for t in tail.iter_mut().take(head) {
            *t = C64::new(0.0, 0.0);
        }
        let tail_f = ws.expansion(&tail);
        let greedy = oga_approximate(ws, &tail_f, v.min(n), HilbertNorm::L2MuXi)?;
        for (j, c) in greedy.subset.iter().zip(&greedy.coefficients) {
            dense[*j] += c;
        }
        history = greedy.residual_history;
    }
    let subset: Vec<usize> = (0..n)
        .filter(|&j| j < head || dense[j] != C64::new(0.0, 0.0))
        .collect();
    let coefficients = subset.iter().map(|&j| dense[j]).collect();
    let mut out = SparseApproximant::build(ws, &f, subset, coefficients, Algorithm::TwoBlock)?;
    out.residual_history = history;
    Ok(out)
}

/// Term allocation of a block schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockAllocation {
    pub level: u32,
    pub size: usize,
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPlan {
    /// Indices kept regardless of blocks.
    pub kept: Vec<usize>,
    pub blocks: Vec<BlockAllocation>,
    pub total_terms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Schedule {
    /// Full dyadic levels up to the largest `t` with at most `v/2` terms,
    /// then geometric budgets `⌊R (1 - 2^{-κ}) 2^{-κ(j-t-1)}⌋`.
    Wab { kappa: f64 },
    /// Degree blocks `[2^{k-1}, 2^k)` with `n_k = ⌊(k-m+2)^{-2} 2^{m-2}⌋`
    /// for `m - 1 ≤ k ≤ κ₀ m`, where `2^m ≤ v < 2^{m+1}`.
    Gegenbauer { alpha: f64, r: f64, theta: f64 },
}

/// Smallest integer `≥ (r + 1/θ - 1/2)/(r - α - 1/2) + 1`.
pub fn kappa0(alpha: f64, r: f64, theta: f64) -> Result<u32> {
    if !(r > alpha + 0.5) || !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::param(format!(
            "need r > α + 1/2 and θ in (0, 1], got r = {r}, α = {alpha}, θ = {theta}"
        )));
    }
    Ok(((r + 1.0 / theta - 0.5) / (r - alpha - 0.5) + 1.0 - 1e-12).ceil() as u32)
}

/// `(k, n_k)` for `k = m-1 ..= κ₀ m`, checked against `Σ n_k ≤ 2^{m-1}`.
pub fn gegenbauer_budgets(m: u32, kappa0: u32) -> Result<Vec<(u32, usize)>> {
    if m == 0 || m > 60 {
        return Err(Error::param(format!("level {m} out of range")));
    }
    let base = 2f64.powi(m as i32 - 2);
    let out: Vec<(u32, usize)> = (m - 1..=kappa0 * m)
        .map(|k| {
            let d = (k + 2 - m) as f64;
            (k, (base / (d * d)).floor() as usize)
        })
        .collect();
    let total: usize = out.iter().map(|x| x.1).sum();
    if total as f64 > 2f64.powi(m as i32 - 1) {
        return Err(Error::Schedule(format!("Σ n_k = {total} exceeds 2^{}", m - 1)));
    }
    Ok(out)
}

/// Chooses terms by a block schedule and keeps the original coefficients on
/// them.
pub fn block_budget_plan(ws_dict: &crate::dictionary::Dictionary, coeffs: &[C64], v: usize, schedule: &Schedule) -> Result<BlockPlan> {
    let n = ws_dict.len();
    if coeffs.len() != n {
        return Err(Error::param(format!("{} coefficients for {n} elements", coeffs.len())));
    }
    if v == 0 {
        return Err(Error::param("v must be at least 1"));
    }
    let mags: Vec<f64> = coeffs.iter().map(|c| c.norm()).collect();
    let pick = |pool: &[usize], count: usize| -> Vec<usize> {
        let scores: Vec<f64> = pool.iter().map(|&j| mags[j]).collect();
        top_indices(&scores, count).into_iter().map(|i| pool[i]).collect()
    };
    let mut kept: Vec<usize> = Vec::new();
    let mut blocks = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    match *schedule {
        Schedule::Wab { kappa } => {
            let freqs = ws_dict
                .frequencies()
                .ok_or_else(|| Error::param("the wab schedule needs a trigonometric dictionary"))?;
            let levels: Vec<u32> = freqs.indices.iter().map(|k| block_of(k).iter().sum()).collect();
            let top = levels.iter().copied().max().unwrap_or(0);
            let counts: Vec<usize> = (0..=top).map(|l| levels.iter().filter(|x| **x == l).count()).collect();
            let mut t: Option<u32> = None;
            let mut cum = 0;
            for (l, c) in counts.iter().enumerate() {
                if 2 * (cum + c) <= v {
                    cum += c;
                    t = Some(l as u32);
                } else {
                    break;
                }
            }
            if let Some(t) = t {
                kept = (0..n).filter(|&j| levels[j] <= t).collect();
            }
            let start = t.map_or(0, |t| t + 1);
            let remaining = (v - cum) as f64;
            for l in start..=top {
                let pool: Vec<usize> = (0..n).filter(|&j| levels[j] == l).collect();
                let budget = (remaining * (1.0 - 2f64.powf(-kappa)) * 2f64.powf(-kappa * (l - start) as f64)).floor() as usize;
                let budget = budget.min(pool.len());
                chosen.extend(pick(&pool, budget));
                blocks.push(BlockAllocation { level: l, size: pool.len(), budget });
            }
        }
        Schedule::Gegenbauer { alpha, r, theta } => {
            let k0 = kappa0(alpha, r, theta)?;
            let m = usize::BITS - 1 - v.leading_zeros();
            let head = if m >= 2 { 1usize << (m - 2) } else { 0 };
            let weighted: Vec<f64> = (0..n).map(|j| mags[j] * ((j + 1) as f64).powf(r)).collect();
            let mut lambda = top_indices(&weighted, head.min(n));
            lambda.extend(0..head.min(n));
            lambda.sort_unstable();
            lambda.dedup();
            kept = lambda;
            if m >= 1 {
                for (k, nk) in gegenbauer_budgets(m, k0)? {
                    let lo = if k == 0 { 0 } else { 1usize << (k - 1) };
                    let hi = (1usize << k).min(n);
                    if lo >= n {
                        break;
                    }
                    let pool: Vec<usize> = (lo..hi).filter(|j| kept.binary_search(j).is_err()).collect();
                    let budget = nk.min(pool.len());
                    chosen.extend(pick(&pool, budget));
                    blocks.push(BlockAllocation { level: k, size: hi - lo, budget });
                }
            }
        }
    }
    let mut all = kept.clone();
    all.extend(chosen);
    all.sort_unstable();
    all.dedup();
    let total_terms = all.len();
    if matches!(schedule, Schedule::Wab { .. }) && total_terms > v {
        return Err(Error::Schedule(format!("{total_terms} terms for a budget of {v}")));
    }
    Ok(BlockPlan {
        kept: all,
        blocks,
        total_terms,
    })
}

/// Truncation of `f = Σ c_j φ_j` to the terms chosen by a block schedule.
pub fn block_budget_approximate(
    ws: &Workspace,
    coeffs: &[C64],
    v: usize,
    schedule: &Schedule,
) -> Result<(SparseApproximant, BlockPlan)> {
    let plan = block_budget_plan(&ws.dict, coeffs, v, schedule)?;
    let f = ws.expansion(coeffs);
    let c: Vec<C64> = plan.kept.iter().map(|&j| coeffs[j]).collect();
    let approx = SparseApproximant::build(ws, &f, plan.kept.clone(), c, Algorithm::BlockBudget)?;
    Ok((approx, plan))
}

/// Replaces the coefficients on `subset` by a discrete minimax fit of `f`
/// on the evaluation grid.
pub fn minimax_refit(
    ws: &Workspace,
    f: &Sampled,
    subset: &[usize],
    opts: &MinimaxOptions,
) -> Result<SparseApproximant> {
    let (Some(phi), Some(values)) = (ws.phi_grid.as_ref(), f.on_grid.as_ref()) else {
        return Err(Error::param("minimax refit needs an evaluation grid"));
    };
    let a = linalg::columns(phi, subset);
    let real = a.iter().all(|z| z.im == 0.0) && values.iter().all(|z| z.im == 0.0);
    let coefficients: Vec<C64> = if real {
        let ar = a.map(|z| z.re);
        let fr: Vec<f64> = values.iter().map(|z| z.re).collect();
        lawson(&ar, &fr, opts).coefficients.into_iter().map(|x| C64::new(x, 0.0)).collect()
    } else {
        lawson(&a, values, opts).coefficients
    };
    SparseApproximant::build(ws, f, subset.to_vec(), coefficients, Algorithm::BlockBudget)
}

/// Worst vertex of the box class `{Σ a_j ψ_j : |a_j| ≤ 1}` for `n`-term
/// approximation from a dictionary with Gram matrix `gram`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KashinResult {
    pub value: f64,
    pub worst_vertex: Vec<i8>,
    pub best_subset: Vec<usize>,
    pub vertices: u64,
    pub subsets: u64,
}

/// Default limit on vertex-subset pairs.
pub const KASHIN_CAP: u128 = 50_000_000;

/// Maximum over sign vertices `a ∈ {±1}^N` of the `L₂` distance from
/// `Σ a_j ψ_j` to the nearest `n`-term span of the dictionary. `psi` holds
/// the coefficients of each `ψ_j` (columns) in the dictionary; the `ψ_j`
/// must be orthonormal. The vertex maximum is a lower bound for the class
/// supremum and equals it when the `ψ_j` are dictionary elements.
pub fn kashin_oracle_sigma(gram: &DMatrix<C64>, psi: &DMatrix<C64>, n: usize) -> Result<KashinResult> {
    let (k, big_n) = psi.shape();
    if gram.shape() != (k, k) {
        return Err(Error::param("Gram and coefficient matrices disagree"));
    }
    if big_n == 0 || big_n > 30 {
        return Err(Error::Size(format!("{big_n} class generators")));
    }
    if n > k {
        return Err(Error::param(format!("n = {n} exceeds the dictionary size {k}")));
    }
    let inner = psi.adjoint() * gram * psi;
    if !linalg::is_identity(&inner, 1e-10) {
        return Err(Error::param("class generators are not orthonormal"));
    }
    let vertices = 1u64 << (big_n - 1);
    let subsets = linalg::binomial(k, n);
    if (vertices as u128).saturating_mul(subsets) > KASHIN_CAP {
        return Err(Error::Size(format!(
            "{vertices} vertices times {subsets} subsets exceeds {KASHIN_CAP}"
        )));
    }
    let all: Vec<Vec<usize>> = linalg::combinations(k, n).collect();
    let factors: Vec<Option<(DMatrix<C64>, Vec<usize>)>> = all
        .iter()
        .map(|s| {
            if s.is_empty() {
                return None;
            }
            Cholesky::new(linalg::principal(gram, s)).map(|c| (c.l(), s.clone()))
        })
        .collect();
    let mut best = KashinResult {
        value: -1.0,
        worst_vertex: Vec::new(),
        best_subset: Vec::new(),
        vertices,
        subsets: subsets as u64,
    };
    for mask in 0..vertices {
        let signs: Vec<i8> = (0..big_n)
            .map(|j| if j > 0 && (mask >> (j - 1)) & 1 == 1 { -1 } else { 1 })
            .collect();
        let a = DVector::from_iterator(big_n, signs.iter().map(|s| C64::new(*s as f64, 0.0)));
        let x = psi * a;
        let gx = gram * &x;
        let total = x.dotc(&gx).re;
        let mut min = (f64::INFINITY, Vec::new());
        for (s, fac) in all.iter().zip(&factors) {
            let captured = match fac {
                None if s.is_empty() => 0.0,
                None => continue,
                Some((l, idx)) => {
                    let b = DVector::from_iterator(idx.len(), idx.iter().map(|&i| gx[i]));
                    l.solve_lower_triangular(&b).map_or(0.0, |y| y.norm_squared())
                }
            };
            let d = (total - captured).max(0.0).sqrt();
            if d < min.0 - TIE_TOLERANCE {
                min = (d, s.clone());
            }
        }
        if min.0 > best.value + TIE_TOLERANCE {
            best.value = min.0;
            best.worst_vertex = signs;
            best.best_subset = min.1;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn kashin_identity_case() {
        for &(n_gen, n) in &[(4usize, 1usize), (4, 0), (6, 1)] {
            let g = DMatrix::identity(n_gen, n_gen);
            let r = kashin_oracle_sigma(&g, &g, n).unwrap();
            assert!((r.value - ((n_gen - n) as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn kappa0_for_legendre_rate() {
        assert_eq!(kappa0(0.0, 1.0, 1.0).unwrap(), 4);
        assert!(kappa0(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn gegenbauer_budgets_fit() {
        let b = gegenbauer_budgets(20, 4).unwrap();
        let total: usize = b.iter().map(|x| x.1).sum();
        assert!(total <= 1 << 19);
        assert_eq!(b[0], (19, 1 << 18));
    }

    #[test]
    fn top_indices_break_ties_low() {
        assert_eq!(top_indices(&[1.0, 2.0, 2.0, 0.5], 2), vec![1, 2]);
        assert_eq!(top_indices(&[1.0, 1.0, 1.0], 1), vec![0]);
    }

    #[test]
    fn budget_counts_weights() {
        let cs = [c(0.5), c(-0.25)];
        assert!((a1r_budget(&cs, 1.0) - 1.0).abs() < 1e-15);
    }
}
