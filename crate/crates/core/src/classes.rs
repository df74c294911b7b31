//! Coefficient classes: weighted ℓ₁ balls, dyadic Wiener-norm classes and
//! Gegenbauer–Wiener classes, with samplers that saturate the budget and
//! the box class of extreme functions on one dyadic degree block.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::frequency::block_of;
use crate::linalg::C64;

/// Membership tolerance on the budget.
pub const BUDGET_TOLERANCE: f64 = 1e-12;

/// Distribution of the magnitudes drawn by [`sample_class`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Random support, magnitudes uniform in `[1/2, 1]` before scaling.
    #[default]
    Flat,
    /// Every index kept with probability 1/2, magnitudes decaying like
    /// `(1+j)^{-(r+1/θ)}`: the slowest decay the budget allows for a dense
    /// sequence.
    Critical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassSpec {
    /// `Σ |c_j| (j+1)^r ≤ 1` over 0-based indices.
    A1r {
        r: f64,
        /// Support size; random when absent.
        #[serde(default)]
        support: Option<usize>,
    },
    /// Trigonometric coefficients whose part on the level `‖s‖₁ = j` has
    /// ℓ₁ norm at most `2^{-aj} max(j,1)^{(d-1)b}`.
    WabA {
        a: f64,
        b: f64,
        d: usize,
        max_level: u32,
    },
    /// `Σ ((1+j)^r |c_j|)^θ ≤ 1`.
    GegWiener {
        alpha: f64,
        r: f64,
        theta: f64,
        #[serde(default)]
        profile: Profile,
    },
}

impl ClassSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ClassSpec::A1r { r, support } => {
                if !(r >= 0.0) {
                    return Err(Error::param(format!("r = {r} must be nonnegative")));
                }
                if support == Some(0) {
                    return Err(Error::param("support size must be positive"));
                }
            }
            ClassSpec::WabA { a, b, d, .. } => {
                if !(a > 0.0) || !b.is_finite() || d == 0 {
                    return Err(Error::param(format!("need a > 0 and d ≥ 1, got a = {a}, d = {d}")));
                }
            }
            ClassSpec::GegWiener { alpha, r, theta, .. } => {
                if !(alpha > -0.5) || !(theta > 0.0 && theta <= 1.0) || !(r > alpha + 0.5) {
                    return Err(Error::param(format!(
                        "need α > -1/2, θ in (0, 1] and r > α + 1/2, got α = {alpha}, r = {r}, θ = {theta}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn level_bound(a: f64, b: f64, d: usize, level: u32) -> f64 {
    2f64.powf(-a * level as f64) * (level.max(1) as f64).powf((d as f64 - 1.0) * b)
}

fn wab_levels(dict: &Dictionary, d: usize) -> Result<Vec<u32>> {
    let freqs = dict
        .frequencies()
        .ok_or_else(|| Error::param("the Wiener class needs a trigonometric dictionary"))?;
    if freqs.dim != d {
        return Err(Error::param(format!(
            "class dimension {d} differs from the dictionary dimension {}",
            freqs.dim
        )));
    }
    Ok(freqs.indices.iter().map(|k| block_of(k).iter().sum()).collect())
}

fn signed(rng: &mut ChaCha8Rng, magnitude: f64) -> C64 {
    if rng.random::<bool>() {
        C64::new(magnitude, 0.0)
    } else {
        C64::new(-magnitude, 0.0)
    }
}

/// Random coefficients on `dict` whose class budget equals 1.
pub fn sample_class(spec: &ClassSpec, dict: &Dictionary, rng: &mut ChaCha8Rng) -> Result<Vec<C64>> {
    spec.validate()?;
    let n = dict.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    match *spec {
        ClassSpec::A1r { r, support } => {
            let k = match support {
                Some(k) => k.min(n),
                None => rng.random_range(1..=n),
            };
            let idx = sample(rng, n, k).into_vec();
            let mags: Vec<f64> = idx.iter().map(|_| rng.random_range(0.5..=1.0)).collect();
            let total: f64 = idx
                .iter()
                .zip(&mags)
                .map(|(&j, m)| m * ((j + 1) as f64).powf(r))
                .sum();
            for (&j, m) in idx.iter().zip(&mags) {
                out[j] = signed(rng, m / total);
            }
        }
        ClassSpec::WabA { a, b, d, max_level } => {
            let levels = wab_levels(dict, d)?;
            for level in 0..=max_level {
                let members: Vec<usize> = (0..n).filter(|&j| levels[j] == level).collect();
                if members.is_empty() {
                    continue;
                }
                let mags: Vec<f64> = members.iter().map(|_| rng.random_range(0.5..=1.0)).collect();
                let total: f64 = mags.iter().sum();
                let mass = level_bound(a, b, d, level);
                for (&j, m) in members.iter().zip(&mags) {
                    let phase = rng.random::<f64>() * std::f64::consts::TAU;
                    out[j] = C64::from_polar(mass * m / total, phase);
                }
            }
        }
        ClassSpec::GegWiener { r, theta, profile, .. } => {
            let weight = |j: usize| ((j + 1) as f64).powf(r);
            let raw: Vec<f64> = match profile {
                Profile::Flat => {
                    let k = rng.random_range(1..=n);
                    let idx = sample(rng, n, k).into_vec();
                    let mut v = vec![0.0; n];
                    for j in idx {
                        v[j] = rng.random_range(0.5..=1.0);
                    }
                    v
                }
                Profile::Critical => {
                    let forced = rng.random_range(0..n);
                    (0..n)
                        .map(|j| {
                            let keep = rng.random::<f64>() < 0.5 || j == forced;
                            let mag = ((j + 1) as f64).powf(-(r + 1.0 / theta)) * rng.random_range(0.5..=1.0);
                            if keep {
                                mag
                            } else {
                                0.0
                            }
                        })
                        .collect()
                }
            };
            let total: f64 = raw
                .iter()
                .enumerate()
                .map(|(j, m)| (weight(j) * m).powf(theta))
                .sum::<f64>()
                .powf(1.0 / theta);
            for (j, m) in raw.iter().enumerate() {
                if *m > 0.0 {
                    out[j] = signed(rng, m / total);
                }
            }
        }
    }
    Ok(out)
}

/// Value of the defining budget; membership means at most `1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub member: bool,
    pub budget: f64,
}

/// Recomputes the class budget of `coeffs` (0-based indices into `dict`).
/// For the Wiener class the budget is the largest ratio of a level's ℓ₁
/// mass to its allowance.
pub fn class_membership_check(coeffs: &[C64], spec: &ClassSpec, dict: &Dictionary) -> Result<Membership> {
    spec.validate()?;
    if coeffs.len() != dict.len() {
        return Err(Error::param(format!(
            "{} coefficients for {} elements",
            coeffs.len(),
            dict.len()
        )));
    }
    let budget = match *spec {
        ClassSpec::A1r { r, .. } => coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c.norm() * ((j + 1) as f64).powf(r))
            .sum(),
        ClassSpec::WabA { a, b, d, max_level } => {
            let levels = wab_levels(dict, d)?;
            let top = levels.iter().copied().max().unwrap_or(0);
            let mut worst = 0.0f64;
            for level in 0..=top {
                let mass: f64 = (0..coeffs.len())
                    .filter(|&j| levels[j] == level)
                    .map(|j| coeffs[j].norm())
                    .sum();
                if mass == 0.0 {
                    continue;
                }
                if level > max_level {
                    worst = f64::INFINITY;
                } else {
                    worst = worst.max(mass / level_bound(a, b, d, level));
                }
            }
            worst
        }
        ClassSpec::GegWiener { r, theta, .. } => coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| (((j + 1) as f64).powf(r) * c.norm()).powf(theta))
            .sum(),
    };
    Ok(Membership {
        member: budget <= 1.0 + BUDGET_TOLERANCE,
        budget,
    })
}

/// Box class `{s Σ_{2^{m₁} ≤ j < 2^{m₁+1}} a_j L_j : |a_j| ≤ 1}` with
/// `s = 2^{-(m₁+1)(r+1/θ)}` and `m₁ = m_level + m₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessClass {
    pub alpha: f64,
    pub r: f64,
    pub theta: f64,
    pub m_level: u32,
    pub m0: u32,
    pub m1: u32,
    pub scale: f64,
    /// First index of the block.
    pub start: usize,
    pub block_size: usize,
    /// Sign patterns of the emitted vertices.
    pub vertices: Vec<Vec<i8>>,
    /// `false` when the vertex set is a random subset of all `2^{block}`.
    pub exhaustive: bool,
    pub seed: u64,
}

impl WitnessClass {
    /// Dense coefficients of the vertex with the given signs.
    pub fn coefficients(&self, signs: &[i8], n: usize) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (i, s) in signs.iter().enumerate() {
            out[self.start + i] = C64::new(self.scale * *s as f64, 0.0);
        }
        out
    }

    /// Exact `L₂` distance from a vertex to the nearest `n`-term expansion
    /// in the orthonormal system: the `block - n` smallest entries are all
    /// equal to `scale`.
    pub fn vertex_sigma(&self, n: usize) -> f64 {
        self.scale * (self.block_size.saturating_sub(n) as f64).sqrt()
    }
}

/// Box class on the degree block selected by `m_level` and `m0`, for an
/// orthonormal Gegenbauer dictionary with `n_dict` elements. At most
/// `vertex_cap` vertices are emitted; the all-ones vertex is always first.
#[allow(clippy::too_many_arguments)]
pub fn dyadic_witness_class(
    alpha: f64,
    r: f64,
    theta: f64,
    m_level: u32,
    m0: u32,
    n_dict: usize,
    vertex_cap: usize,
    seed: u64,
) -> Result<WitnessClass> {
    ClassSpec::GegWiener {
        alpha,
        r,
        theta,
        profile: Profile::Flat,
    }
    .validate()?;
    if m_level == 0 || vertex_cap == 0 {
        return Err(Error::param("m_level and the vertex cap must be positive"));
    }
    let m1 = m_level + m0;
    if m1 >= 40 || (1usize << (m1 + 1)) > n_dict {
        return Err(Error::Size(format!(
            "block [2^{m1}, 2^{}) exceeds the {n_dict} dictionary elements",
            m1 + 1
        )));
    }
    let start = 1usize << m1;
    let block_size = start;
    let scale = 2f64.powf(-((m1 + 1) as f64) * (r + 1.0 / theta));
    let exhaustive = block_size < 63 && (1u64 << block_size) <= vertex_cap as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertices: Vec<Vec<i8>> = if exhaustive {
        (0..1u64 << block_size)
            .map(|mask| {
                (0..block_size)
                    .map(|i| if (mask >> i) & 1 == 1 { -1 } else { 1 })
                    .collect()
            })
            .collect()
    } else {
        std::iter::once(vec![1i8; block_size])
            .chain((1..vertex_cap).map(|_| {
                (0..block_size)
                    .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                    .collect()
            }))
            .collect()
    };
    Ok(WitnessClass {
        alpha,
        r,
        theta,
        m_level,
        m0,
        m1,
        scale,
        start,
        block_size,
        vertices,
        exhaustive,
        seed,
    })
}
