//! Pair selection and the well-connectedness check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{minimal_common_cube, GridGeometry};
use crate::error::{QmdError, Result};
use crate::gridset::GridSet;
use crate::rational::Rational;
use crate::scalar::Real;

use super::chain::{build_chain, refined_chain, search_chain, Chain, ChainMethod};
use super::pipeline::pipeline_constants;

pub const DEFAULT_SAMPLE: usize = 10_000;
const SEARCH_CAP: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum PairPolicy {
    Exhaustive,
    /// At most `n` pairs; all of them when there are no more than `n`.
    Sample {
        n: usize,
        seed: u64,
    },
}

impl Default for PairPolicy {
    fn default() -> Self {
        Self::Sample { n: DEFAULT_SAMPLE, seed: 0 }
    }
}

impl PairPolicy {
    /// `exhaustive` or `sample:N`.
    pub fn parse(s: &str, seed: u64) -> Result<Self> {
        if s == "exhaustive" {
            return Ok(Self::Exhaustive);
        }
        let n = s
            .strip_prefix("sample:")
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| QmdError::Domain(format!("bad pair policy {s:?}")))?;
        Ok(Self::Sample { n, seed })
    }
}

/// `⌊-log10 |x-y|⌋` from the squared distance in cells, exactly.
fn decade(geom: &GridGeometry, sq_cells: i64) -> u32 {
    // |x-y|² = s / 4^L; find the least j with s * 100^(j+1) >= 4^L.
    let four_l = 1u128 << (2 * geom.level());
    let mut j = 0u32;
    let mut v = sq_cells as u128 * 100;
    while v < four_l {
        v *= 100;
        j += 1;
    }
    j
}

/// Unordered pairs of distinct cells from the same piece, tagged with the
/// piece index. Samples are drawn uniformly over all such pairs and filled
/// round-robin across distance decades.
pub fn select_pairs(pieces: &[GridSet], policy: PairPolicy) -> Vec<(usize, usize, usize)> {
    let cells: Vec<Vec<usize>> = pieces.iter().map(|f| f.iter().collect()).collect();
    let counts: Vec<u128> = cells.iter().map(|c| (c.len() as u128) * (c.len() as u128).saturating_sub(1) / 2).collect();
    let total: u128 = counts.iter().sum();
    let all = |out: &mut Vec<(usize, usize, usize)>| {
        for (j, c) in cells.iter().enumerate() {
            for a in 0..c.len() {
                for b in a + 1..c.len() {
                    out.push((j, c[a], c[b]));
                }
            }
        }
    };
    let (n, seed) = match policy {
        PairPolicy::Exhaustive => {
            let mut out = Vec::new();
            all(&mut out);
            return out;
        }
        PairPolicy::Sample { n, .. } if total <= n as u128 => {
            let mut out = Vec::new();
            all(&mut out);
            return out;
        }
        PairPolicy::Sample { n, seed } => (n, seed),
    };
    let geom = *pieces[0].geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::BTreeSet::new();
    let mut buckets: std::collections::BTreeMap<u32, Vec<(usize, usize, usize)>> = Default::default();
    for _ in 0..n.saturating_mul(8) {
        let mut t = rng.random_range(0..total);
        let j = counts.iter().position(|&c| {
            if t < c {
                true
            } else {
                t -= c;
                false
            }
        });
        let j = j.expect("t < total");
        let c = &cells[j];
        let a = rng.random_range(0..c.len());
        let mut b = rng.random_range(0..c.len() - 1);
        if b >= a {
            b += 1;
        }
        let (a, b) = (c[a.min(b)], c[a.max(b)]);
        if !seen.insert((a, b)) {
            continue;
        }
        let dec = decade(&geom, geom.point(a).sq_dist(&geom.point(b)));
        buckets.entry(dec).or_default().push((j, a, b));
    }
    let mut lists: Vec<std::vec::IntoIter<_>> = buckets.into_values().map(|v| v.into_iter()).collect();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let before = out.len();
        for l in lists.iter_mut() {
            if out.len() == n {
                break;
            }
            if let Some(v) = l.next() {
                out.push(v);
            }
        }
        if out.len() == before {
            break;
        }
    }
    out
}

/// Best chain for a pair: the construction with `Q` the minimal common cube,
/// then finer constructions, then shortest paths (exact thresholds, then with
/// slack).
pub fn connect<T: Real>(e: &GridSet, x: usize, y: usize, p: u64, delta: &Rational) -> Chain<T> {
    let geom = e.geometry();
    let q = minimal_common_cube(geom, &geom.point(x), &geom.point(y));
    let first = build_chain::<T>(e, x, y, &q, p, delta).ok();
    if let Some(c) = first.as_ref().filter(|c| c.passes()) {
        return c.clone();
    }
    if let Some(c) = refined_chain::<T>(e, x, y, p, delta) {
        return c;
    }
    if let Some(c) = search_chain::<T>(e, x, y, delta, 0.0, SEARCH_CAP).filter(|c| c.passes()) {
        return c;
    }
    if let Some(c) = first.as_ref().filter(|c| c.passes_with_slack()) {
        return c.clone();
    }
    let slack = 2.0 * (geom.dim() as f64).sqrt();
    if let Some(c) = search_chain::<T>(e, x, y, delta, slack, SEARCH_CAP).filter(|c| c.passes_with_slack()) {
        return c;
    }
    first.unwrap_or_else(|| {
        let mut c = Chain::measure(geom, vec![x, y], delta, ChainMethod::None);
        c.step_ok = false;
        c.length_ok = false;
        c.step_ok_slack = false;
        c.length_ok_slack = false;
        c
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairFailure {
    pub piece: usize,
    pub x: usize,
    pub y: usize,
    pub max_step: f64,
    pub length: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WellConnectedVerdict {
    pub pairs: usize,
    /// Pairs with a chain meeting both bounds exactly.
    pub strict: usize,
    /// Pairs with a chain meeting both bounds up to the lattice slack.
    pub with_slack: usize,
    pub failures: Vec<PairFailure>,
}

impl WellConnectedVerdict {
    pub fn passed(&self) -> bool {
        self.with_slack == self.pairs
    }
}

/// Checks the chain condition on selected same-piece pairs through `e`.
pub fn verify_well_connected<T: Real>(
    pieces: &[GridSet],
    e: &GridSet,
    delta: &Rational,
    policy: PairPolicy,
) -> Result<WellConnectedVerdict> {
    let (p, _) = pipeline_constants(delta)?;
    for f in pieces {
        if !f.is_subset(e) {
            return Err(QmdError::Domain("piece is not contained in the set".into()));
        }
    }
    if pieces.is_empty() {
        return Ok(WellConnectedVerdict { pairs: 0, strict: 0, with_slack: 0, failures: Vec::new() });
    }
    let pairs = select_pairs(pieces, policy);
    let chains: Vec<Chain<T>> = pairs.par_iter().map(|&(_, x, y)| connect::<T>(e, x, y, p, delta)).collect();
    let mut v = WellConnectedVerdict { pairs: pairs.len(), strict: 0, with_slack: 0, failures: Vec::new() };
    for (&(j, x, y), c) in pairs.iter().zip(&chains) {
        v.strict += usize::from(c.passes());
        v.with_slack += usize::from(c.passes_with_slack());
        if !c.passes_with_slack() {
            v.failures.push(PairFailure {
                piece: j,
                x,
                y,
                max_step: c.max_step.to_f64_lossy(),
                length: c.length.to_f64_lossy(),
                distance: c.distance.to_f64_lossy(),
            });
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_is_well_connected() {
        let g = GridGeometry::new(2, 3).unwrap();
        let e = GridSet::full(g);
        let v = verify_well_connected::<f64>(std::slice::from_ref(&e), &e, &Rational::new(2, 5), PairPolicy::Exhaustive).unwrap();
        assert_eq!(v.pairs, 64 * 63 / 2);
        assert!(v.passed());
    }

    #[test]
    fn two_far_cells_fail() {
        let g = GridGeometry::new(1, 6).unwrap();
        let e = GridSet::from_indices(g, [3, 50]).unwrap();
        let v = verify_well_connected::<f64>(std::slice::from_ref(&e), &e, &Rational::new(2, 5), PairPolicy::Exhaustive).unwrap();
        assert!(!v.passed());
        assert_eq!((v.failures[0].x, v.failures[0].y), (3, 50));
    }

    #[test]
    fn sampling_is_seeded_and_spread() {
        let g = GridGeometry::new(1, 10).unwrap();
        let e = GridSet::full(g);
        let a = select_pairs(&[e.clone()], PairPolicy::Sample { n: 500, seed: 7 });
        let b = select_pairs(&[e.clone()], PairPolicy::Sample { n: 500, seed: 7 });
        assert_eq!(a, b);
        assert_eq!(a.len(), 500);
        let decades: std::collections::BTreeSet<u32> =
            a.iter().map(|&(_, x, y)| decade(&g, g.point(x).sq_dist(&g.point(y)))).collect();
        assert!(decades.len() >= 3, "{decades:?}");
        let small =
            select_pairs(&[GridSet::from_indices(g, [1, 2, 3]).unwrap()], PairPolicy::Sample { n: 500, seed: 1 });
        assert_eq!(small.len(), 3);
    }

    #[test]
    fn decades() {
        let g = GridGeometry::new(1, 10).unwrap();
        // |x-y| = 1024/1024 = 1 -> 0; 100 cells ≈ 0.098 -> 1; 5 cells -> 2.
        assert_eq!(decade(&g, 1024 * 1024), 0);
        assert_eq!(decade(&g, 100 * 100), 1);
        assert_eq!(decade(&g, 25), 2);
    }
}
