//! How many bad `7Q` regions contain each cell, and the sets `Z_N`.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::dyadic::{CellBox, GridGeometry, MAX_DIM};
use crate::error::{QmdError, Result};
use crate::gridset::{BoxCounter, GridSet};
use crate::rational::{serde_big, serde_rational, to_big, Rational};

use super::constants::{ktilde_of, z_bound};
use super::sweep::CubeSweep;

/// Per cell, the number of bad cubes `Q` with the cell center in `7Q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverCounts {
    geom: GridGeometry,
    counts: Vec<u32>,
}

impl CoverCounts {
    /// Counts from per-level bad indicators (dictionary order per level).
    pub fn from_mask(geom: &GridGeometry, bad: &[Vec<bool>]) -> Self {
        let d = geom.dim();
        let l = geom.level();
        let mut counts = vec![0u32; geom.num_cells()];
        for k in 0..=l {
            let mask = &bad[k as usize];
            if !mask.iter().any(|&b| b) {
                continue;
            }
            let table = BoxCounter::from_indicator(d, k, |i| mask[i]);
            let shift = l - k;
            for (idx, c) in counts.iter_mut().enumerate() {
                let p = geom.point(idx);
                let mut lo = [0i64; MAX_DIM];
                let mut hi = [0i64; MAX_DIM];
                for i in 0..d {
                    let a = p.coords()[i] >> shift;
                    lo[i] = a - 3;
                    hi[i] = a + 4;
                }
                *c += table.count(&CellBox::new(&lo[..d], &hi[..d])) as u32;
            }
        }
        Self { geom: *geom, counts }
    }

    pub fn new(sweep: &CubeSweep, eps: &Rational) -> Self {
        Self::from_mask(sweep.geometry(), &sweep.bad_mask(eps))
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    pub fn get(&self, idx: usize) -> u32 {
        self.counts[idx]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn max(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// `Z_N`: cells in at least `n` bad regions.
    pub fn z_set(&self, n: u64) -> GridSet {
        GridSet::from_indices(
            self.geom,
            self.counts.iter().enumerate().filter(|(_, &c)| u64::from(c) >= n).map(|(i, _)| i),
        )
        .expect("indices in range")
    }

    /// `hist[c]` = number of cells with count exactly `c`.
    pub fn histogram(&self) -> Vec<u64> {
        let mut hist = vec![0u64; self.max() as usize + 1];
        for &c in &self.counts {
            hist[c as usize] += 1;
        }
        hist
    }

    /// Smallest `N >= 1` with `λ(Z_N) < α`.
    pub fn empirical_n(&self, alpha: &Rational) -> Result<u64> {
        if *alpha <= Rational::from_integer(0) {
            return Err(QmdError::Domain(format!("alpha {alpha} must be positive")));
        }
        let hist = self.histogram();
        let cells = self.geom.num_cells() as i128;
        // at_least[n] = #cells with count >= n.
        let mut at_least = self.geom.num_cells() as u64;
        for (n, &h) in hist.iter().enumerate() {
            if n >= 1 && Rational::new(at_least as i128, cells) < *alpha {
                return Ok(n as u64);
            }
            at_least -= h;
        }
        Ok(hist.len().max(1) as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ZReport {
    #[serde(with = "serde_rational")]
    pub epsilon: Rational,
    pub n: u64,
    pub clip: bool,
    /// Dictionary-order indices of the cells of `Z_N`.
    pub cells: Vec<usize>,
    #[serde(with = "serde_rational")]
    pub measure: Rational,
    /// `7^d K̃ / N`.
    #[serde(with = "serde_big")]
    pub bound: BigRational,
}

impl ZReport {
    pub fn within_bound(&self) -> bool {
        to_big(&self.measure) <= self.bound
    }
}

pub fn z_report(counts: &CoverCounts, eps: &Rational, n: u64, clip: bool) -> Result<ZReport> {
    if n == 0 {
        return Err(QmdError::Domain("N must be at least 1".into()));
    }
    let geom = counts.geometry();
    let z = counts.z_set(n);
    let kt = ktilde_of(eps, geom.dim())?;
    Ok(ZReport {
        epsilon: *eps,
        n,
        clip,
        cells: z.iter().collect(),
        measure: z.measure(),
        bound: z_bound(&kt, geom.dim(), n),
    })
}

pub fn z_set(e: &GridSet, eps: &Rational, n: u64, clip: bool) -> Result<ZReport> {
    let sweep = CubeSweep::new(e, clip)?;
    z_report(&CoverCounts::new(&sweep, eps), eps, n, clip)
}
