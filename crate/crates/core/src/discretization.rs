//! Universal discretization over all v-term subspaces of a dictionary.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::gegenbauer_normalizer;
use crate::dictionary::{gegenbauer_dictionary, Dictionary, GegenbauerParams};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::workspace::{PointSet, Provenance};

/// Default limit on the number of enumerated subsets.
pub const DEFAULT_SUBSET_CAP: u64 = 1_000_000;

/// Subset values closer than this count as equal; the lexicographically
/// smaller subset wins.
pub const TIE_TOLERANCE: f64 = 1e-12;

const CHUNK: usize = 4096;

/// Runs `map` over every `v`-subset of `0..n` in parallel and feeds the
/// results to `sink` in lexicographic order.
pub fn scan_subsets<T, F, S>(n: usize, v: usize, map: F, mut sink: S)
where
    T: Send,
    F: Fn(&[usize]) -> T + Sync,
    S: FnMut(&[usize], T),
{
    let mut iter = linalg::combinations(n, v);
    loop {
        let chunk: Vec<Vec<usize>> = iter.by_ref().take(CHUNK).collect();
        if chunk.is_empty() {
            break;
        }
        let out: Vec<T> = chunk.par_iter().map(|j| map(j)).collect();
        for (j, t) in chunk.iter().zip(out) {
            sink(j, t);
        }
    }
}

/// `count` distinct random `v`-subsets, sorted, in sorted order.
pub fn random_subsets(n: usize, v: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec<usize>> = (0..count)
        .map(|_| {
            let mut s = sample(&mut rng, n, v).into_vec();
            s.sort_unstable();
            s
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    OneSided,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnumerationMode {
    Exhaustive,
    /// Uniformly sampled subsets; results are estimates.
    RandomAudit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationOptions {
    pub side: Side,
    pub cap: u64,
    /// When set and the subset count exceeds `cap`, this many random
    /// subsets are audited instead of failing.
    pub audit: Option<usize>,
    pub audit_seed: u64,
    /// Number of per-subset extremes kept in the report.
    pub keep_per_subset: usize,
}

impl Default for DiscretizationOptions {
    fn default() -> Self {
        DiscretizationOptions {
            side: Side::TwoSided,
            cap: DEFAULT_SUBSET_CAP,
            audit: None,
            audit_seed: 0,
            keep_per_subset: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetExtremes {
    pub subset: Vec<usize>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationReport {
    pub v: usize,
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    /// Smallest generalized eigenvalue over all subsets (squared form).
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: Option<f64>,
    pub worst_subset: Vec<usize>,
    pub certified: bool,
    pub seed: Option<u64>,
    pub side: Side,
    pub mode: EnumerationMode,
    pub subsets_examined: u64,
    pub mean_lower: f64,
    pub mean_upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<Provenance>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_subset: Vec<SubsetExtremes>,
}

/// Extreme values of `Σ w_ν |f(ξ^ν)|² / ‖f‖²` over every `f` in every
/// span of `v` dictionary elements.
///
/// `design` holds one row per point, `gram` is the exact Gram matrix of the
/// dictionary.
pub fn verify_design(
    design: &DMatrix<C64>,
    weights: &[f64],
    gram: &DMatrix<C64>,
    v: usize,
    opts: &DiscretizationOptions,
) -> Result<DiscretizationReport> {
    let (m, n) = design.shape();
    if v == 0 || v > n {
        return Err(Error::param(format!("v = {v} must lie in 1..={n}")));
    }
    if weights.len() != m {
        return Err(Error::param("one weight per point is required"));
    }
    let h = linalg::weighted_gram(design, weights);
    let identity = linalg::is_identity(gram, 1e-14);
    let rank_deficient = weights.iter().filter(|w| **w > 0.0).count() < v;
    let eval = |j: &[usize]| -> Result<(f64, f64)> {
        let hj = linalg::principal(&h, j);
        let (lo, hi) = if identity {
            let e = linalg::hermitian_eigenvalues(&hj);
            (e[0], e[e.len() - 1])
        } else {
            linalg::generalized_extremes(&hj, &linalg::principal(gram, j)).ok_or_else(|| {
                Error::param(format!("Gram matrix is not positive definite on {j:?}"))
            })?
        };
        let lo = if rank_deficient { 0.0 } else { lo.max(0.0) };
        Ok((lo, hi.max(lo)))
    };

    let total = linalg::binomial(n, v);
    let mut acc = Accumulator::new(opts.keep_per_subset);
    let mut err = None;
    let mode = if total <= opts.cap as u128 {
        scan_subsets(n, v, eval, |j, r| match r {
            Ok((lo, hi)) => acc.push(j, lo, hi),
            Err(e) => {
                err.get_or_insert(e);
            }
        });
        EnumerationMode::Exhaustive
    } else if let Some(count) = opts.audit {
        let subsets = random_subsets(n, v, count, opts.audit_seed);
        let vals: Vec<Result<(f64, f64)>> = subsets.par_iter().map(|j| eval(j)).collect();
        for (j, r) in subsets.iter().zip(vals) {
            match r {
                Ok((lo, hi)) => acc.push(j, lo, hi),
                Err(e) => {
                    err.get_or_insert(e);
                }
            }
        }
        EnumerationMode::RandomAudit
    } else {
        return Err(Error::Cap {
            count: total,
            cap: opts.cap,
            hint: "enable the randomized audit mode for a non-certified estimate",
        });
    };
    if let Some(e) = err {
        return Err(e);
    }
    let count = acc.count.max(1) as f64;
    Ok(DiscretizationReport {
        v,
        m,
        n,
        c1: acc.c1,
        c2: (opts.side == Side::TwoSided).then_some(acc.c2),
        worst_subset: acc.worst,
        certified: mode == EnumerationMode::Exhaustive,
        seed: (mode == EnumerationMode::RandomAudit).then_some(opts.audit_seed),
        side: opts.side,
        mode,
        subsets_examined: acc.count,
        mean_lower: acc.sum_lower / count,
        mean_upper: acc.sum_upper / count,
        sampling: None,
        per_subset: acc.kept,
    })
}

struct Accumulator {
    c1: f64,
    c2: f64,
    worst: Vec<usize>,
    count: u64,
    sum_lower: f64,
    sum_upper: f64,
    keep: usize,
    kept: Vec<SubsetExtremes>,
}

impl Accumulator {
    fn new(keep: usize) -> Self {
        Accumulator {
            c1: f64::INFINITY,
            c2: f64::NEG_INFINITY,
            worst: Vec::new(),
            count: 0,
            sum_lower: 0.0,
            sum_upper: 0.0,
            keep,
            kept: Vec::new(),
        }
    }

    fn push(&mut self, j: &[usize], lo: f64, hi: f64) {
        if self.worst.is_empty() || lo < self.c1 - TIE_TOLERANCE {
            self.c1 = lo;
            self.worst = j.to_vec();
        }
        self.c2 = self.c2.max(hi);
        self.count += 1;
        self.sum_lower += lo;
        self.sum_upper += hi;
        if self.kept.len() < self.keep {
            self.kept.push(SubsetExtremes {
                subset: j.to_vec(),
                lower: lo,
                upper: hi,
            });
        }
    }
}

/// Discretization of `dict` on the point set `xi` (with its weights).
pub fn verify_universal_discretization(
    dict: &Dictionary,
    xi: &PointSet,
    v: usize,
    opts: &DiscretizationOptions,
) -> Result<DiscretizationReport> {
    let design = dict.design(&xi.points)?;
    let mut report = verify_design(&design, &xi.weights, &dict.exact_gram(), v, opts)?;
    report.sampling = Some(xi.provenance);
    if report.seed.is_none() {
        report.seed = xi.seed;
    }
    Ok(report)
}

/// Point weight `π c_α (1 - x²)^{α+1/2}` that turns Chebyshev-distributed
/// samples into a discretization of `L₂(μ_α)`.
pub fn gegenbauer_point_weight(alpha: f64, x: f64) -> f64 {
    PI * gegenbauer_normalizer(alpha) * (1.0 - x * x).powf(alpha + 0.5)
}

/// Per-point weights `w(ξ_j)/m` for the Gegenbauer reduction; points must
/// lie in the open interval.
pub fn gegenbauer_weights(alpha: f64, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = points.len() as f64;
    points
        .iter()
        .map(|p| match p.as_slice() {
            [x] if *x > -1.0 && *x < 1.0 => Ok(gegenbauer_point_weight(alpha, *x) / m),
            _ => Err(Error::Domain(format!("{p:?} is not in (-1, 1)"))),
        })
        .collect()
}

/// Discretization of the orthonormal Gegenbauer system in `L₂(μ_α)` by the
/// weighted samples `Σ w(ξ_j)/m |f(ξ_j)|²`.
pub fn verify_weighted_gegenbauer_discretization(
    params: GegenbauerParams,
    xi: &PointSet,
    v: usize,
    opts: &DiscretizationOptions,
) -> Result<DiscretizationReport> {
    let dict = gegenbauer_dictionary(params, false)?;
    let weights = gegenbauer_weights(params.alpha, &xi.points)?;
    let design = dict.design(&xi.points)?;
    let mut report = verify_design(&design, &weights, &dict.exact_gram(), v, opts)?;
    report.sampling = Some(xi.provenance);
    report.seed = report.seed.or(xi.seed);
    Ok(report)
}

/// Outcome of a randomized point search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSearch {
    pub points: PointSet,
    pub report: DiscretizationReport,
    pub success: bool,
    pub attempts: usize,
    pub seed: u64,
}

/// Sampling law used by [`find_universal_points`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointLaw {
    /// The dictionary's reference measure with uniform weights.
    Reference,
    /// Chebyshev measure with the Gegenbauer weights; the dictionary must
    /// be an unweighted Gegenbauer system.
    WeightedGegenbauer,
}

/// Parameters of a randomized point search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub v: usize,
    pub target_c1: f64,
    pub m: usize,
    pub seed: u64,
    pub max_attempts: usize,
    pub law: PointLaw,
}

/// Draws `m` points up to `max_attempts` times until the certified lower
/// constant reaches `target_c1`. Without success, the best attempt is
/// returned with `success = false`.
pub fn find_universal_points(
    dict: &Dictionary,
    spec: &SearchSpec,
    opts: &DiscretizationOptions,
) -> Result<PointSearch> {
    let SearchSpec {
        v,
        target_c1,
        m,
        seed,
        max_attempts,
        law,
    } = *spec;
    if !(target_c1 > 0.0) {
        return Err(Error::param("target constant must be positive"));
    }
    if m == 0 || max_attempts == 0 {
        return Err(Error::param("need at least one point and one attempt"));
    }
    let alpha = match (law, dict.gegenbauer_params()) {
        (PointLaw::WeightedGegenbauer, Some((p, false))) => Some(p.alpha),
        (PointLaw::WeightedGegenbauer, _) => {
            return Err(Error::param(
                "weighted Gegenbauer sampling needs an unweighted Gegenbauer dictionary",
            ))
        }
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gram = dict.exact_gram();
    let mut best: Option<(PointSet, DiscretizationReport)> = None;
    for attempt in 1..=max_attempts {
        let (points, weights) = match alpha {
            Some(a) => {
                let pts = crate::analysis::MeasureSpec::chebyshev().sample(m, &mut rng)?;
                let w = gegenbauer_weights(a, &pts)?;
                let ps = PointSet::weighted(pts, w.clone(), Provenance::RandomChebyshev)?;
                (ps, w)
            }
            None => {
                let ps = PointSet::random(dict, m, &mut rng)?;
                let w = ps.weights.clone();
                (ps, w)
            }
        };
        let design = dict.design(&points.points)?;
        let mut report = verify_design(&design, &weights, &gram, v, opts)?;
        report.sampling = Some(points.provenance);
        report.seed = Some(seed);
        let ok = report.certified && report.c1 >= target_c1;
        let better = best.as_ref().is_none_or(|(_, b)| report.c1 > b.c1);
        if ok || better {
            let mut points = points;
            points.seed = Some(seed);
            best = Some((points, report));
        }
        if ok {
            let (points, report) = best.expect("just stored");
            return Ok(PointSearch {
                points,
                report,
                success: true,
                attempts: attempt,
                seed,
            });
        }
    }
    let (points, report) = best.expect("at least one attempt");
    Ok(PointSearch {
        points,
        report,
        success: false,
        attempts: max_attempts,
        seed,
    })
}

/// Empirical upper estimate of the smallest `m` for which random points
/// give the lower constant `c1` in a majority of `trials` draws. Doubling
/// from `v` up to `m_cap`, then bisection. Returns `None` when no `m` up
/// to the cap works, and immediately when `c1` exceeds what the mean
/// eigenvalue allows for unimodular systems.
pub fn estimate_m_required(
    dict: &Dictionary,
    v: usize,
    c1: f64,
    seed: u64,
    trials: usize,
    m_cap: usize,
    opts: &DiscretizationOptions,
) -> Result<Option<usize>> {
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    if c1 > 1.0 && dict.meta.unimodular && dict.meta.orthonormal {
        return Ok(None);
    }
    let succeeds = |m: usize| -> Result<bool> {
        let mut wins = 0;
        for t in 0..trials {
            let s = seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add((m as u64) << 20)
                .wrapping_add(t as u64);
            let spec = SearchSpec {
                v,
                target_c1: c1,
                m,
                seed: s,
                max_attempts: 1,
                law: PointLaw::Reference,
            };
            let r = find_universal_points(dict, &spec, opts)?;
            if r.success {
                wins += 1;
            }
        }
        Ok(2 * wins > trials)
    };
    let mut hi = v.max(1);
    while !succeeds(hi)? {
        if hi >= m_cap {
            return Ok(None);
        }
        hi = (hi * 2).min(m_cap);
    }
    let mut lo = hi / 2;
    if lo < v {
        return Ok(Some(hi));
    }
    // invariant: lo fails (or untested below v), hi succeeds
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if succeeds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::trig_dictionary;
    use crate::frequency::{build_frequency_set, FrequencyKind};

    fn trig(n: u64) -> Dictionary {
        trig_dictionary(build_frequency_set(FrequencyKind::HyperbolicCross { n }, 1).unwrap())
            .unwrap()
    }

    #[test]
    fn parseval_on_equispaced_points() {
        let d = trig(2);
        let xi = PointSet::equispaced_torus(1, 5).unwrap();
        let r = verify_universal_discretization(&d, &xi, 5, &Default::default()).unwrap();
        assert!((r.c1 - 1.0).abs() < 1e-12 && (r.c2.unwrap() - 1.0).abs() < 1e-12);
        assert!(r.certified);
    }

    #[test]
    fn too_few_points_give_zero() {
        let d = trig(2);
        let xi = PointSet::equispaced_torus(1, 2).unwrap();
        let r = verify_universal_discretization(&d, &xi, 3, &Default::default()).unwrap();
        assert_eq!(r.c1, 0.0);
        assert_eq!(r.worst_subset, vec![0, 1, 2]);
    }

    #[test]
    fn cap_is_reported() {
        let d = trig(2);
        let xi = PointSet::equispaced_torus(1, 5).unwrap();
        let opts = DiscretizationOptions {
            cap: 3,
            ..Default::default()
        };
        assert!(matches!(
            verify_universal_discretization(&d, &xi, 2, &opts),
            Err(Error::Cap { .. })
        ));
        let audit = DiscretizationOptions {
            audit: Some(4),
            ..opts
        };
        let r = verify_universal_discretization(&d, &xi, 2, &audit).unwrap();
        assert!(!r.certified);
        assert_eq!(r.mode, EnumerationMode::RandomAudit);
    }

    #[test]
    fn constant_function_under_gegenbauer_weights() {
        let p = GegenbauerParams::new(0.0, 0).unwrap();
        let xi = PointSet::chebyshev_nodes(8).unwrap();
        let r = verify_weighted_gegenbauer_discretization(p, &xi, 1, &Default::default()).unwrap();
        let expected: f64 = gegenbauer_weights(0.0, &xi.points).unwrap().iter().sum();
        assert!((r.c1 - expected).abs() < 1e-14);
    }

    #[test]
    fn unimodular_systems_cannot_exceed_one() {
        let d = trig(4);
        let r = estimate_m_required(&d, 1, 1.5, 1, 3, 64, &Default::default()).unwrap();
        assert_eq!(r, None);
    }
}
