//! Constants of the decomposition, the bad cube list and the choice of `N`.

use std::cmp::Ordering;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::density::constants::{ktilde_of, theoretical_n};
use crate::density::sweep::{cube_at, CubeSweep};
use crate::density::zset::CoverCounts;
use crate::dyadic::{DyadicCube, GridGeometry};
use crate::error::{QmdError, Result};
use crate::gridset::{BoxCounter, GridSet};
use crate::rational::Rational;

/// `(P, ε)` with `P` the least integer satisfying `1/P <= 3δ/4` and
/// `P > 1 + 1/δ`, and `ε = δ / (28 P)`.
pub fn pipeline_constants(delta: &Rational) -> Result<(u64, Rational)> {
    let zero = Rational::from_integer(0);
    if *delta <= zero || *delta >= Rational::new(1, 2) {
        return Err(QmdError::Domain(format!("delta {delta} not in (0, 1/2)")));
    }
    let one = Rational::from_integer(1);
    let bound = one + one / delta;
    let mut p = bound.floor().to_integer() as u64;
    loop {
        let pr = Rational::from_integer(p as i128);
        if pr > bound && one / pr <= Rational::new(3, 4) * delta {
            break;
        }
        p += 1;
    }
    Ok((p, delta / Rational::from_integer(28 * p as i128)))
}

/// Decreasing side, then lexicographic corner (first coordinate most
/// significant).
pub fn cube_order(a: &DyadicCube, b: &DyadicCube) -> Ordering {
    a.level().cmp(&b.level()).then_with(|| a.corner().cmp(b.corner()))
}

/// Bad cubes `Q` of levels `0..=L`: `3Q` meets the reference set and
/// `sparse(E, 7Q) >= ε`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadCubeSet {
    geom: GridGeometry,
    cubes: Vec<DyadicCube>,
}

impl BadCubeSet {
    /// All bad cubes of the sweep (the reference set is `E` itself).
    pub fn from_sweep(sweep: &CubeSweep, eps: &Rational) -> Self {
        let geom = *sweep.geometry();
        let mut cubes: Vec<DyadicCube> = (0..=geom.level())
            .flat_map(|k| (0..sweep.level(k).len()).map(move |i| (k, i)))
            .filter(|&(k, i)| sweep.is_bad(k, i, eps))
            .map(|(k, i)| cube_at(&geom, k, i))
            .collect();
        cubes.sort_by(cube_order);
        Self { geom, cubes }
    }

    pub fn from_cubes(geom: GridGeometry, mut cubes: Vec<DyadicCube>) -> Self {
        cubes.sort_by(cube_order);
        cubes.dedup();
        Self { geom, cubes }
    }

    /// Keeps the cubes whose unclipped triple meets `g`.
    pub fn restrict_to(&self, g: &GridSet) -> Self {
        let counter = BoxCounter::new(g);
        let cubes = self.cubes.iter().filter(|q| counter.count(&q.expansion_box(&self.geom, 3)) > 0).copied().collect();
        Self { geom: self.geom, cubes }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn contains(&self, q: &DyadicCube) -> bool {
        self.cubes.binary_search_by(|c| cube_order(c, q)).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NMode {
    Theoretical,
    #[default]
    Empirical,
}

impl std::str::FromStr for NMode {
    type Err = QmdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theoretical" => Ok(Self::Theoretical),
            "empirical" => Ok(Self::Empirical),
            _ => Err(QmdError::Domain(format!("unknown mode {s:?}"))),
        }
    }
}

impl std::fmt::Display for NMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Theoretical => "theoretical",
            Self::Empirical => "empirical",
        })
    }
}

/// Theoretical: least `N` with `7^d K̃ / N < α`. Empirical: least `N >= 1`
/// with `λ(Z_N) < α` from the cover counts.
pub fn choose_n(counts: &CoverCounts, eps: &Rational, alpha: &Rational, mode: NMode) -> Result<BigUint> {
    if *alpha <= Rational::from_integer(0) {
        return Err(QmdError::Domain(format!("alpha {alpha} must be positive")));
    }
    match mode {
        NMode::Theoretical => {
            let dim = counts.geometry().dim();
            Ok(theoretical_n(&ktilde_of(eps, dim)?, dim, alpha))
        }
        NMode::Empirical => Ok(BigUint::from(counts.empirical_n(alpha)?)),
    }
}

/// `N` as a machine integer; larger values saturate, which changes nothing
/// since no cell lies in more than `u32::MAX` regions.
pub fn n_saturating(n: &BigUint) -> u64 {
    n.to_u64().unwrap_or(u64::MAX)
}
