//! Integer frequency sets: hyperbolic crosses, dyadic blocks and boxes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default limit on the number of generated frequencies.
pub const DEFAULT_FREQUENCY_CAP: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FrequencyKind {
    /// `Γ(N)`: `Π max(|k_j|, 1) ≤ N`.
    HyperbolicCross { n: u64 },
    /// `Q_n`: union of dyadic blocks with `‖s‖₁ ≤ n`.
    StepCross { n: u32 },
    /// `ρ(s)`: `⌊2^{s_j - 1}⌋ ≤ |k_j| < 2^{s_j}` in every coordinate.
    DyadicBlock { s: Vec<u32> },
    /// Box `lo ≤ k_j ≤ hi` in every coordinate.
    Range { lo: i64, hi: i64 },
    /// Explicit list.
    List { indices: Vec<Vec<i64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySet {
    pub dim: usize,
    pub kind: FrequencyKind,
    pub indices: Vec<Vec<i64>>,
}

impl FrequencySet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Largest `|k_j|` over the set.
    pub fn max_abs(&self) -> u64 {
        self.indices
            .iter()
            .flat_map(|k| k.iter().map(|x| x.unsigned_abs()))
            .max()
            .unwrap_or(0)
    }
}

pub fn build_frequency_set(kind: FrequencyKind, dim: usize) -> Result<FrequencySet> {
    build_frequency_set_capped(kind, dim, DEFAULT_FREQUENCY_CAP)
}

pub fn build_frequency_set_capped(
    kind: FrequencyKind,
    dim: usize,
    cap: usize,
) -> Result<FrequencySet> {
    if dim == 0 {
        return Err(Error::param("dimension must be at least 1"));
    }
    let mut indices = match &kind {
        FrequencyKind::HyperbolicCross { n } => hyperbolic_cross(*n, dim, cap)?,
        FrequencyKind::StepCross { n } => {
            let mut out = Vec::new();
            for s in levels_up_to(*n, dim) {
                out.extend(dyadic_block(&s, cap.saturating_sub(out.len()))?);
            }
            out
        }
        FrequencyKind::DyadicBlock { s } => {
            if s.len() != dim {
                return Err(Error::param(format!(
                    "block index has {} entries for dimension {dim}",
                    s.len()
                )));
            }
            dyadic_block(s, cap)?
        }
        FrequencyKind::Range { lo, hi } => {
            if lo > hi {
                return Err(Error::param(format!("empty range {lo}..={hi}")));
            }
            let width = (hi - lo + 1) as u128;
            if width.checked_pow(dim as u32).is_none_or(|t| t > cap as u128) {
                return Err(Error::Size(format!("box of width {width} in dimension {dim}")));
            }
            let mut out = vec![vec![]];
            for _ in 0..dim {
                out = out
                    .into_iter()
                    .flat_map(|p: Vec<i64>| {
                        (*lo..=*hi).map(move |k| {
                            let mut q = p.clone();
                            q.push(k);
                            q
                        })
                    })
                    .collect();
            }
            out
        }
        FrequencyKind::List { indices } => {
            if let Some(bad) = indices.iter().find(|k| k.len() != dim) {
                return Err(Error::param(format!("index {bad:?} has wrong dimension")));
            }
            if indices.len() > cap {
                return Err(Error::Size(format!("{} frequencies", indices.len())));
            }
            indices.clone()
        }
    };
    indices.sort();
    indices.dedup();
    Ok(FrequencySet { dim, kind, indices })
}

fn hyperbolic_cross(n: u64, dim: usize, cap: usize) -> Result<Vec<Vec<i64>>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<i64>, u64)> = vec![(Vec::new(), 1)];
    while let Some((prefix, prod)) = stack.pop() {
        if prefix.len() == dim {
            out.push(prefix);
            if out.len() > cap {
                return Err(Error::Size(format!(
                    "hyperbolic cross exceeds {cap} frequencies"
                )));
            }
            continue;
        }
        let limit = (n / prod) as i64;
        for k in -limit..=limit {
            let next = prod * k.unsigned_abs().max(1);
            let mut p = prefix.clone();
            p.push(k);
            stack.push((p, next));
        }
    }
    Ok(out)
}

fn dyadic_block(s: &[u32], cap: usize) -> Result<Vec<Vec<i64>>> {
    let mut out: Vec<Vec<i64>> = vec![vec![]];
    for &sj in s {
        if sj >= 62 {
            return Err(Error::Size(format!("block level {sj}")));
        }
        let lo = if sj == 0 { 0 } else { 1i64 << (sj - 1) };
        let hi = 1i64 << sj;
        let coord: Vec<i64> = (lo..hi).flat_map(|a| if a == 0 { vec![0] } else { vec![-a, a] }).collect();
        if out.len().saturating_mul(coord.len()) > cap {
            return Err(Error::Size(format!("dyadic block {s:?} exceeds {cap} frequencies")));
        }
        out = out
            .into_iter()
            .flat_map(|p| {
                coord.iter().map(move |&k| {
                    let mut q = p.clone();
                    q.push(k);
                    q
                })
            })
            .collect();
    }
    Ok(out)
}

/// All `s ∈ ℕ₀^dim` with `‖s‖₁ ≤ n`.
pub fn levels_up_to(n: u32, dim: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=n {
        out.extend(levels_exact(total, dim));
    }
    out
}

/// All `s ∈ ℕ₀^dim` with `‖s‖₁ = n`, lexicographically.
pub fn levels_exact(n: u32, dim: usize) -> Vec<Vec<u32>> {
    if dim == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in 0..=n {
        for mut rest in levels_exact(n - first, dim - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Dyadic level vector `s` with `k ∈ ρ(s)`.
pub fn block_of(k: &[i64]) -> Vec<u32> {
    k.iter()
        .map(|x| {
            let a = x.unsigned_abs();
            if a == 0 {
                0
            } else {
                64 - a.leading_zeros()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_one_in_two_dims_is_the_unit_box() {
        let f = build_frequency_set(FrequencyKind::HyperbolicCross { n: 1 }, 2).unwrap();
        assert_eq!(f.len(), 9);
        assert_eq!(f.indices[0], vec![-1, -1]);
    }

    #[test]
    fn gamma_two_in_one_dim() {
        let f = build_frequency_set(FrequencyKind::HyperbolicCross { n: 2 }, 1).unwrap();
        let ks: Vec<i64> = f.indices.iter().map(|k| k[0]).collect();
        assert_eq!(ks, vec![-2, -1, 0, 1, 2]);
    }

    #[test]
    fn small_blocks_and_step_cross() {
        let r = build_frequency_set(FrequencyKind::DyadicBlock { s: vec![0, 0] }, 2).unwrap();
        assert_eq!(r.indices, vec![vec![0, 0]]);
        let q = build_frequency_set(FrequencyKind::StepCross { n: 1 }, 1).unwrap();
        assert_eq!(q.indices, vec![vec![-1], vec![0], vec![1]]);
        let b = build_frequency_set(FrequencyKind::DyadicBlock { s: vec![3] }, 1).unwrap();
        assert_eq!(b.len(), 8);
        assert!(b.indices.iter().all(|k| block_of(k) == vec![3]));
    }

    #[test]
    fn caps_are_enforced() {
        let err = build_frequency_set_capped(FrequencyKind::HyperbolicCross { n: 1000 }, 3, 100);
        assert!(matches!(err, Err(Error::Size(_))));
    }

    #[test]
    fn range_box() {
        let f = build_frequency_set(FrequencyKind::Range { lo: -7, hi: 8 }, 1).unwrap();
        assert_eq!(f.len(), 16);
        assert_eq!(f.max_abs(), 8);
    }
}
