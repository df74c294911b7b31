//! Functions hidden from a point set: the vanishing subspace, the
//! two-sided sampling condition on a test grid, Lorentz-type vertex search
//! and certified lower bounds for the hidden `L₂` mass.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{norm_lp, EvalGrid, Quadrature};
use crate::dictionary::Dictionary;
use crate::discretization::{verify_design, DiscretizationOptions, Side};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::workspace::PointSet;

/// Tolerance for "vanishes at a point" and "lies in the subspace".
pub const VANISHING_TOLERANCE: f64 = 1e-10;

/// `L₂(μ)`-orthonormal basis of the functions in the span of a dictionary
/// that vanish on a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct NullspaceBasis {
    /// Dictionary coefficients of each basis function (columns).
    pub coefficients: DMatrix<C64>,
    pub dimension: usize,
    /// Dimension of the span.
    pub span_dimension: usize,
    pub points: usize,
    /// Largest basis value at the points.
    pub max_point_value: f64,
    /// `max |⟨b_i, b_j⟩ - δ_ij|`.
    pub orthonormality_error: f64,
}

/// Basis of `{f ∈ span(dict) : f(ξ^ν) = 0}`, orthonormal in `L₂(μ)` through
/// the exact Gram matrix.
pub fn nullspace_basis(dict: &Dictionary, xi: &[Vec<f64>]) -> Result<NullspaceBasis> {
    let gram = dict.exact_gram();
    let span_dimension = linalg::hermitian_eigenvalues(&gram)
        .iter()
        .filter(|l| **l > linalg::RANK_RTOL)
        .count();
    let sampling = dict.design(xi)?;
    let kernel = linalg::null_space(&sampling);
    let inner = linalg::hermitize(kernel.adjoint() * &gram * &kernel);
    let (vals, vecs) = linalg::hermitian_eigen(&inner);
    let top = vals.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..vals.len())
        .filter(|&i| vals[i] > top * linalg::RANK_RTOL && vals[i] > 0.0)
        .collect();
    let scale = DMatrix::from_fn(vals.len(), keep.len(), |r, c| {
        vecs[(r, keep[c])] / vals[keep[c]].sqrt()
    });
    let coefficients = kernel * scale;
    let dimension = coefficients.ncols();
    let max_point_value = linalg::max_abs((&sampling * &coefficients).as_slice());
    let ortho = coefficients.adjoint() * &gram * &coefficients;
    let orthonormality_error = (0..dimension)
        .flat_map(|i| (0..dimension).map(move |j| (i, j)))
        .map(|(i, j)| (ortho[(i, j)] - linalg::c(if i == j { 1.0 } else { 0.0 })).norm())
        .fold(0.0, f64::max);
    if dimension + xi.len() < span_dimension {
        return Err(Error::Size(format!(
            "vanishing subspace of dimension {dimension} is below {span_dimension} - {}",
            xi.len()
        )));
    }
    Ok(NullspaceBasis {
        coefficients,
        dimension,
        span_dimension,
        points: xi.len(),
        max_point_value,
        orthonormality_error,
    })
}

/// Vector of a subspace of `ℂ^M` with sup norm 1 and many large entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzVertex {
    pub z: Vec<C64>,
    /// Entries with modulus at least `1/√2`.
    pub count: usize,
    /// Entries with modulus 1.
    pub pinned: usize,
    pub required: usize,
    pub valid: bool,
    pub attempts: usize,
}

/// Checks that `z` lies in the column span of `basis`, has sup norm 1 and
/// at least `n` entries of modulus `≥ 1/√2`. Returns the count.
pub fn validate_lorentz_vertex(basis: &DMatrix<C64>, z: &[C64], n: usize) -> Option<usize> {
    if z.len() != basis.nrows() {
        return None;
    }
    let top = linalg::max_abs(z);
    if (top - 1.0).abs() > 1e-12 {
        return None;
    }
    let sol = linalg::weighted_lstsq(basis, z, &vec![1.0; z.len()]);
    let fit = linalg::apply(basis, sol.coefficients.as_slice());
    if linalg::max_abs(&linalg::sub(z, &fit)) > VANISHING_TOLERANCE {
        return None;
    }
    let count = z
        .iter()
        .filter(|x| x.norm() >= std::f64::consts::FRAC_1_SQRT_2 - 1e-12)
        .count();
    (count >= n).then_some(count)
}

fn pin_search(y: &DMatrix<C64>, rng: &mut ChaCha8Rng) -> (Vec<C64>, usize) {
    let (m, k) = y.shape();
    let real = y.iter().all(|x| x.im == 0.0);
    let mut coef = DVector::<C64>::zeros(k);
    let mut pinned: Vec<usize> = Vec::new();
    for _ in 0..m {
        let rows = DMatrix::from_fn(pinned.len(), k, |r, c| y[(pinned[r], c)]);
        let free = linalg::null_space(&rows);
        if free.ncols() == 0 {
            break;
        }
        let r = DVector::from_fn(free.ncols(), |_, _| {
            let re = rng.random::<f64>() * 2.0 - 1.0;
            let im = if real { 0.0 } else { rng.random::<f64>() * 2.0 - 1.0 };
            C64::new(re, im)
        });
        let dc = &free * r;
        let d = y * &dc;
        let z = y * &coef;
        let dmax = linalg::max_abs(d.as_slice());
        if dmax == 0.0 {
            break;
        }
        let mut step = f64::INFINITY;
        let mut hits = Vec::new();
        for i in 0..m {
            if pinned.contains(&i) || d[i].norm() <= 1e-12 * dmax {
                continue;
            }
            let a = d[i].norm_sqr();
            let b = (z[i].conj() * d[i]).re;
            let c = (z[i].norm_sqr() - 1.0).min(0.0);
            let t = (-b + (b * b - a * c).max(0.0).sqrt()) / a;
            if t < step * (1.0 - 1e-12) {
                step = t;
                hits = vec![i];
            } else if t <= step * (1.0 + 1e-12) {
                hits.push(i);
            }
        }
        if !step.is_finite() {
            break;
        }
        coef += dc * C64::new(step, 0.0);
        pinned.extend(hits);
    }
    let z = y * &coef;
    let top = linalg::max_abs(z.as_slice());
    let z: Vec<C64> = if top > 0.0 {
        z.iter().map(|x| x / top).collect()
    } else {
        z.iter().copied().collect()
    };
    (z, pinned.len())
}

/// Searches the column span `Y` of `basis` for `z` with `max |z_i| = 1` and
/// at least `n` entries of modulus `≥ 1/√2`. Each step moves along a random
/// direction that keeps the already saturated entries fixed until a new
/// entry reaches modulus 1, so a successful run saturates `dim Y` entries.
/// The output is validated before it is returned.
pub fn lorentz_vertex_search(basis: &DMatrix<C64>, n: usize, seed: u64) -> Result<LorentzVertex> {
    let (m, _) = basis.shape();
    let rank = linalg::weighted_lstsq(basis, &vec![C64::new(0.0, 0.0); m], &vec![1.0; m]).rank;
    if n > rank {
        return Err(Error::param(format!("n = {n} exceeds the subspace dimension {rank}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const ATTEMPTS: usize = 16;
    let mut last = (vec![C64::new(0.0, 0.0); m], 0);
    for attempt in 1..=ATTEMPTS {
        let (z, pinned) = pin_search(basis, &mut rng);
        if let Some(count) = validate_lorentz_vertex(basis, &z, n) {
            return Ok(LorentzVertex {
                z,
                count,
                pinned,
                required: n,
                valid: true,
                attempts: attempt,
            });
        }
        last = (z, pinned);
    }
    let count = last.0.iter().filter(|x| x.norm() >= std::f64::consts::FRAC_1_SQRT_2).count();
    Ok(LorentzVertex {
        z: last.0,
        count,
        pinned: last.1,
        required: n,
        valid: false,
        attempts: ATTEMPTS,
    })
}

/// Two-sided sampling check on the whole span with constants `1/2, 3/2`
/// for the `L_p` and the `L₂` norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingCertificate {
    pub points: usize,
    pub dimension: usize,
    pub p: f64,
    /// Extremes of `‖S(f)‖₂² / ‖f‖₂²`, exact.
    pub l2_lower: f64,
    pub l2_upper: f64,
    /// Extremes of `‖S(f)‖_p^p / ‖f‖_p^p` found by the search (exact for `p = 2`).
    pub lp_lower: f64,
    pub lp_upper: f64,
    pub l2_pass: bool,
    pub lp_pass: bool,
    pub pass: bool,
    /// `false` when the `L_p` extremes come from a search.
    pub lp_certified: bool,
    pub restarts: usize,
    pub seed: u64,
    /// `sup ‖f‖_∞ / ‖f‖₂` over the span, measured on a grid.
    pub nikolskii_grid: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingCheckOptions {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for SamplingCheckOptions {
    fn default() -> Self {
        SamplingCheckOptions {
            restarts: 200,
            iterations: 100,
            seed: 0,
        }
    }
}

/// `sup_x φ(x)^H G^{-1} φ(x)` square-rooted over a grid: the ratio
/// `‖f‖_∞ / ‖f‖₂` on the span, attained by the reproducing kernel.
pub fn nikolskii_constant(dict: &Dictionary, grid: &[Vec<f64>]) -> Result<f64> {
    let gram = dict.exact_gram();
    let chol = nalgebra::Cholesky::new(gram)
        .ok_or_else(|| Error::param("dictionary elements are linearly dependent"))?;
    let phi = dict.design(grid)?;
    let mut best = 0.0f64;
    for r in 0..phi.nrows() {
        let row = phi.row(r).adjoint();
        let y = chol
            .l()
            .solve_lower_triangular(&row)
            .expect("Cholesky factor is invertible");
        best = best.max(y.norm_squared());
    }
    Ok(best.sqrt())
}

fn lp_power(values: &DVector<C64>, weights: &[f64], p: f64) -> f64 {
    values.iter().zip(weights).map(|(v, w)| w * v.norm().powf(p)).sum()
}

fn lp_gradient(a: &DMatrix<C64>, weights: &[f64], c: &DVector<C64>, p: f64) -> (f64, DVector<C64>) {
    let u = a * c;
    let value = lp_power(&u, weights, p);
    let s = DVector::from_iterator(
        u.len(),
        u.iter().zip(weights).map(|(x, w)| {
            let r = x.norm();
            if r == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                x * (w * r.powf(p - 2.0))
            }
        }),
    );
    (value, a.ad_mul(&s) * C64::new(p / 2.0, 0.0))
}

/// Extremes of `Σ_x w_x|f(x)|^p / ∫|f|^p dμ` by projected gradient ascent
/// and descent on the unit sphere of coefficients.
fn lp_ratio_search(
    sample: &DMatrix<C64>,
    quad: &DMatrix<C64>,
    quad_weights: &[f64],
    p: f64,
    opts: &SamplingCheckOptions,
) -> (f64, f64) {
    let k = sample.ncols();
    let m = sample.nrows();
    let sample_weights = vec![1.0 / m as f64; m];
    let log_ratio = |c: &DVector<C64>| {
        let top = lp_power(&(sample * c), &sample_weights, p);
        let bottom = lp_power(&(quad * c), quad_weights, p);
        (top / bottom).ln()
    };
    let run = |restart: usize, sign: f64| -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(restart as u64));
        let mut c = DVector::from_fn(k, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        c /= C64::new(c.norm(), 0.0);
        let mut value = log_ratio(&c);
        let mut step = 0.5;
        for _ in 0..opts.iterations {
            let (ft, gt) = lp_gradient(sample, &sample_weights, &c, p);
            let (fb, gb) = lp_gradient(quad, quad_weights, &c, p);
            let g = gt / C64::new(ft, 0.0) - gb / C64::new(fb, 0.0);
            let g = &g - &c * c.dotc(&g);
            let gn = g.norm();
            if gn < 1e-14 {
                break;
            }
            let mut moved = false;
            while step > 1e-12 {
                let mut trial = &c + &g * C64::new(sign * step / gn, 0.0);
                trial /= C64::new(trial.norm(), 0.0);
                let tv = log_ratio(&trial);
                if sign * (tv - value) > 0.0 {
                    c = trial;
                    value = tv;
                    step *= 1.5;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        value.exp()
    };
    let lows: Vec<f64> = (0..opts.restarts).into_par_iter().map(|i| run(2 * i, -1.0)).collect();
    let highs: Vec<f64> = (0..opts.restarts).into_par_iter().map(|i| run(2 * i + 1, 1.0)).collect();
    (
        lows.into_iter().fold(f64::INFINITY, f64::min),
        highs.into_iter().fold(0.0, f64::max),
    )
}

/// Checks `½‖f‖_p^p ≤ (1/M)Σ|f(x)|^p ≤ 3/2 ‖f‖_p^p` and the same for
/// `p = 2` on the span of `dict` with the equal-weight points `x`. The `L₂`
/// part is exact; for `p ≠ 2` the `L_p` part is a seeded search, and the
/// `L_p` norm is computed with `q`, which should integrate `|f|^p` exactly.
pub fn check_sampling_condition(
    dict: &Dictionary,
    x: &PointSet,
    p: f64,
    q: &Quadrature,
    opts: &SamplingCheckOptions,
) -> Result<SamplingCertificate> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::param(format!("p = {p} must be finite and at least 2")));
    }
    if !x.is_uniform() {
        return Err(Error::param("the test points must carry equal weights"));
    }
    let d = dict.len();
    let sample = dict.design(&x.points)?;
    let disc = DiscretizationOptions {
        side: Side::TwoSided,
        ..Default::default()
    };
    let report = verify_design(&sample, &x.weights, &dict.exact_gram(), d, &disc)?;
    let (l2_lower, l2_upper) = (report.c1, report.c2.unwrap_or(f64::INFINITY));
    let l2_pass = l2_lower >= 0.5 && l2_upper <= 1.5;
    let lp_certified = p == 2.0;
    let (lp_lower, lp_upper) = if lp_certified {
        (l2_lower, l2_upper)
    } else if x.len() < d || l2_lower == 0.0 {
        (0.0, l2_upper)
    } else {
        let quad = dict.design(&q.nodes)?;
        lp_ratio_search(&sample, &quad, &q.weights, p, opts)
    };
    let lp_pass = lp_lower >= 0.5 && lp_upper <= 1.5;
    let nikolskii_grid = match dict.measure() {
        Some(measure) => {
            let grid = EvalGrid::dense(&measure, d, 16)?;
            Some(nikolskii_constant(dict, &grid.points)?)
        }
        None => None,
    };
    Ok(SamplingCertificate {
        points: x.len(),
        dimension: d,
        p,
        l2_lower,
        l2_upper,
        lp_lower,
        lp_upper,
        l2_pass,
        lp_pass,
        pass: l2_pass && lp_pass,
        lp_certified,
        restarts: if lp_certified { 0 } else { opts.restarts },
        seed: opts.seed,
        nikolskii_grid,
    })
}

/// A function of the span that vanishes on `ξ`, has `‖g‖_p ≤ 1` and a
/// large `L₂` norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenMassWitness {
    pub coefficients: Option<Vec<C64>>,
    /// `‖g‖₂` of a validated witness.
    pub tau_lower: Option<f64>,
    /// `(1/3)((D - m)/M)^{1/2}`.
    pub bound: f64,
    /// `2^{-2/p}(2/3)(D - m)/(3M)`, the guaranteed value of `‖g‖₂²`.
    pub squared_guarantee: f64,
    pub nullspace_dimension: usize,
    pub large_entries: usize,
    pub norm_p: Option<f64>,
    pub max_at_points: Option<f64>,
    pub certified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Builds `g = 2^{-1/p} f₀` where `f₀` vanishes on `ξ` and its samples on
/// the test points `x` form a Lorentz vertex. Every claimed property is
/// checked on the result; a failed check leaves the witness uncertified.
pub fn hidden_mass_witness(
    dict: &Dictionary,
    xi: &[Vec<f64>],
    x: &PointSet,
    q: &Quadrature,
    cert: &SamplingCertificate,
    seed: u64,
) -> Result<HiddenMassWitness> {
    if !cert.pass {
        return Err(Error::param("the sampling condition was not verified"));
    }
    let d = dict.len();
    let m = xi.len();
    let p = cert.p;
    if m == 0 || m > d {
        return Err(Error::param(format!("need 1 ≤ m ≤ D, got m = {m}, D = {d}")));
    }
    let big_m = x.len() as f64;
    let gap = (d - m) as f64;
    let bound = (gap / big_m).sqrt() / 3.0;
    let squared_guarantee = 2f64.powf(-2.0 / p) * (2.0 / 3.0) * gap / (3.0 * big_m);
    let basis = nullspace_basis(dict, xi)?;
    let mut out = HiddenMassWitness {
        coefficients: None,
        tau_lower: None,
        bound,
        squared_guarantee,
        nullspace_dimension: basis.dimension,
        large_entries: 0,
        norm_p: None,
        max_at_points: None,
        certified: false,
        failure: None,
    };
    if basis.dimension == 0 {
        out.failure = Some("no nonzero function of the span vanishes on the points".into());
        return Ok(out);
    }
    let y = dict.design(&x.points)? * &basis.coefficients;
    let vertex = lorentz_vertex_search(&y, basis.dimension, seed)?;
    out.large_entries = vertex.count;
    if !vertex.valid {
        out.failure = Some("vertex search did not reach the required count".into());
        return Ok(out);
    }
    let sol = linalg::weighted_lstsq(&y, &vertex.z, &vec![1.0; vertex.z.len()]);
    let scale = C64::new(2f64.powf(-1.0 / p), 0.0);
    let g = (&basis.coefficients * sol.coefficients) * scale;
    let coeffs: Vec<C64> = g.iter().copied().collect();
    let at_points = linalg::max_abs(&linalg::apply(&dict.design(xi)?, &coeffs));
    let on_quad = linalg::apply(&dict.design(&q.nodes)?, &coeffs);
    let norm_p = norm_lp(&on_quad, q, p)?;
    let norm_2 = norm_lp(&on_quad, q, 2.0)?;
    out.coefficients = Some(coeffs);
    out.norm_p = Some(norm_p);
    out.max_at_points = Some(at_points);
    let mut problems = Vec::new();
    if at_points > VANISHING_TOLERANCE {
        problems.push(format!("value {at_points:e} at the points"));
    }
    if norm_p > 1.0 + 1e-10 {
        problems.push(format!("L_p norm {norm_p} above 1"));
    }
    if norm_2 * norm_2 < squared_guarantee * (1.0 - 1e-12) {
        problems.push(format!("squared L2 norm {} below {squared_guarantee}", norm_2 * norm_2));
    }
    if problems.is_empty() {
        out.tau_lower = Some(norm_2);
        out.certified = true;
    } else {
        out.failure = Some(problems.join("; "));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::trig_dictionary;
    use crate::frequency::{build_frequency_set, FrequencyKind};

    fn trig(lo: i64, hi: i64) -> Dictionary {
        trig_dictionary(build_frequency_set(FrequencyKind::Range { lo, hi }, 1).unwrap()).unwrap()
    }

    #[test]
    fn nullspace_dimensions() {
        let d = trig(-2, 2);
        assert_eq!(nullspace_basis(&d, &[]).unwrap().dimension, 5);
        let b = nullspace_basis(&d, &[vec![0.3], vec![1.7]]).unwrap();
        assert_eq!(b.dimension, 3);
        assert!(b.max_point_value < 1e-12);
        assert!(b.orthonormality_error < 1e-12);
        let full = PointSet::equispaced_torus(1, 5).unwrap();
        assert_eq!(nullspace_basis(&d, &full.points).unwrap().dimension, 0);
    }

    #[test]
    fn lorentz_trivial_cases() {
        let id = DMatrix::<C64>::identity(4, 4);
        let v = lorentz_vertex_search(&id, 4, 1).unwrap();
        assert!(v.valid);
        assert_eq!(v.count, 4);
        let e1 = DMatrix::from_fn(4, 1, |r, _| linalg::c(if r == 0 { 1.0 } else { 0.0 }));
        let v = lorentz_vertex_search(&e1, 1, 1).unwrap();
        assert!(v.valid);
        assert_eq!(v.count, 1);
        assert!((v.z[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_sampling_for_equispaced_points() {
        let d = trig(-3, 4);
        let x = PointSet::equispaced_torus(1, 8).unwrap();
        let q = d.quadrature(None).unwrap();
        let cert = check_sampling_condition(&d, &x, 2.0, &q, &Default::default()).unwrap();
        assert!(cert.pass && cert.lp_certified);
        assert!((cert.l2_lower - 1.0).abs() < 1e-10 && (cert.l2_upper - 1.0).abs() < 1e-10);
        let few = PointSet::equispaced_torus(1, 6).unwrap();
        let cert = check_sampling_condition(&d, &few, 2.0, &q, &Default::default()).unwrap();
        assert_eq!(cert.l2_lower, 0.0);
        assert!(!cert.pass);
    }

    #[test]
    fn nikolskii_for_trig_is_root_dimension() {
        let d = trig(-2, 2);
        let grid = PointSet::equispaced_torus(1, 64).unwrap();
        assert!((nikolskii_constant(&d, &grid.points).unwrap() - 5f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn lebesgue_factor_matches_squared_convention() {
        use crate::recovery::lebesgue_factor;
        assert_eq!(lebesgue_factor(0.5).unwrap(), 5.0);
        assert_eq!(lebesgue_factor(4.0).unwrap(), 2.0);
        assert!(lebesgue_factor(0.0).is_err());
    }

    #[test]
    fn witness_meets_the_hidden_mass_bound() {
        let d = trig(-3, 4);
        let x = PointSet::equispaced_torus(1, 8).unwrap();
        let q = d.quadrature(None).unwrap();
        let cert = check_sampling_condition(&d, &x, 2.0, &q, &Default::default()).unwrap();
        let xi = vec![vec![0.4], vec![1.9], vec![3.3], vec![5.1]];
        let w = hidden_mass_witness(&d, &xi, &x, &q, &cert, 7).unwrap();
        assert!(w.certified, "{:?}", w.failure);
        assert!(w.tau_lower.unwrap() >= w.bound);
        assert!(w.max_at_points.unwrap() < 1e-10);
    }

    #[test]
    fn fourth_power_sampling_with_oversampled_points() {
        let d = trig(-2, 2);
        let x = PointSet::equispaced_torus(1, 20).unwrap();
        let q = d.quadrature(Some(41)).unwrap();
        let opts = SamplingCheckOptions {
            restarts: 20,
            ..Default::default()
        };
        let cert = check_sampling_condition(&d, &x, 4.0, &q, &opts).unwrap();
        assert!(cert.pass && !cert.lp_certified);
        assert!(cert.lp_lower <= cert.lp_upper);
    }
}
