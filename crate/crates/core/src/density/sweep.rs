//! Whole-family evaluations: every cube `Q` with its `7Q` sparsity, or every
//! ball of a multiresolution family with its sparsity and `d_E` data.
//!
//! Sweeps do not depend on ε, so one sweep serves many thresholds. Work is
//! spread over the rayon pool and collected in order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicCube, GridGeometry, Region};
use crate::edt::EdtWorkspace;
use crate::error::{QmdError, Result};
use crate::gridset::{BoxCounter, GridSet};
use crate::multires::{Ball, MultiresFamily, ScaleConstant};
use crate::rational::Rational;
use crate::scalar::{CompensatedSum, Real};

use super::sparsity::{ball_sup_sq, cube_scale_sq, region_sup_sq, DistanceField, SparsityValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeEntry {
    /// `3Q ∩ E ≠ ∅`.
    pub touches: bool,
    /// Squared sup distance over `7Q` to `E ∩ 7Q`; present when `touches`.
    pub sup_sq: Option<i64>,
}

/// All dyadic cubes of levels `0..=L`, in dictionary order per level.
#[derive(Debug, Clone)]
pub struct CubeSweep {
    geom: GridGeometry,
    clip: bool,
    measure: Rational,
    levels: Vec<Vec<CubeEntry>>,
}

impl CubeSweep {
    pub fn new(e: &GridSet, clip: bool) -> Result<Self> {
        if e.is_empty() {
            return Err(QmdError::EmptySet);
        }
        let geom = *e.geometry();
        let counter = BoxCounter::new(e);
        let levels = (0..=geom.level())
            .map(|k| {
                let cubes: Vec<DyadicCube> = geom.cubes_at(k).collect();
                cubes
                    .par_iter()
                    .map_init(EdtWorkspace::new, |ws, q| {
                        let touches = counter.count(&q.expansion_box(&geom, 3)) > 0;
                        let sup_sq =
                            touches.then(|| region_sup_sq(ws, e, &Region { cube: *q, factor: 7, clip })).flatten();
                        CubeEntry { touches, sup_sq }
                    })
                    .collect()
            })
            .collect();
        Ok(Self { geom, clip, measure: e.measure(), levels })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    pub fn clip(&self) -> bool {
        self.clip
    }

    /// `λ(E)`.
    pub fn measure(&self) -> Rational {
        self.measure
    }

    pub fn level(&self, k: u32) -> &[CubeEntry] {
        &self.levels[k as usize]
    }

    pub fn sparsity(&self, k: u32, idx: usize) -> Option<SparsityValue> {
        self.levels[k as usize][idx].sup_sq.map(|sup_sq| SparsityValue {
            sup_sq,
            scale_sq: cube_scale_sq(&self.geom, k),
            dim: self.geom.dim(),
        })
    }

    /// `3Q ∩ E ≠ ∅` and `sparse(E, 7Q) >= ε`.
    pub fn is_bad(&self, k: u32, idx: usize, eps: &Rational) -> bool {
        let entry = &self.levels[k as usize][idx];
        entry.touches && self.sparsity(k, idx).is_some_and(|s| s.at_least(eps))
    }

    /// Bad indicator per level, dictionary order.
    pub fn bad_mask(&self, eps: &Rational) -> Vec<Vec<bool>> {
        (0..=self.geom.level())
            .map(|k| (0..self.levels[k as usize].len()).map(|i| self.is_bad(k, i, eps)).collect())
            .collect()
    }
}

/// Cube at dictionary index `idx` of level `k`.
pub fn cube_at(geom: &GridGeometry, k: u32, mut idx: usize) -> DyadicCube {
    let per_side = 1usize << k;
    let corner: Vec<i64> = (0..geom.dim())
        .map(|_| {
            let c = (idx % per_side) as i64;
            idx /= per_side;
            c
        })
        .collect();
    DyadicCube::new(k, &corner)
}

/// Dictionary index of a cube inside the unit cube.
pub fn cube_index(q: &DyadicCube) -> usize {
    let mut idx = 0usize;
    for &c in q.corner().iter().rev() {
        idx = (idx << q.level()) | c as usize;
    }
    idx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BallEntry<T> {
    pub center: usize,
    /// Lattice points in `B`.
    pub count: u64,
    /// `B ∩ E ≠ ∅`.
    pub touches: bool,
    pub sup_sq: Option<i64>,
    /// Sum over `B` of `dist(x, E)` in cells.
    pub dist_sum: T,
}

/// Every ball of a family, per level in net order.
#[derive(Debug, Clone)]
pub struct BallSweep<T> {
    geom: GridGeometry,
    scale: ScaleConstant,
    e_measure: Rational,
    levels: Vec<Vec<BallEntry<T>>>,
}

impl<T: Real> BallSweep<T> {
    pub fn new(e: &GridSet, family: &MultiresFamily) -> Result<Self> {
        let field = DistanceField::new(e)?;
        let geom = *e.geometry();
        if *family.geometry() != geom {
            return Err(QmdError::Domain("family and set geometries differ".into()));
        }
        let levels = (0..=geom.level())
            .map(|k| {
                let balls: Vec<Ball> = family.balls_at(k).collect();
                balls
                    .par_iter()
                    .map_init(EdtWorkspace::new, |ws, b| {
                        let mut count = 0u64;
                        let mut touches = false;
                        let mut sum = CompensatedSum::<T>::new();
                        for p in b.points(&geom) {
                            count += 1;
                            let d2 = field.sq_dist(&p);
                            touches |= d2 == 0;
                            sum.add(T::of_int(d2 as i128).sqrt());
                        }
                        let sup_sq = if touches { ball_sup_sq(ws, e, b) } else { None };
                        BallEntry { center: geom.index_of(&b.center), count, touches, sup_sq, dist_sum: sum.value() }
                    })
                    .collect()
            })
            .collect();
        Ok(Self { geom, scale: family.scale(), e_measure: e.measure(), levels })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    pub fn scale(&self) -> ScaleConstant {
        self.scale
    }

    /// `μ(E)`.
    pub fn set_measure(&self) -> Rational {
        self.e_measure
    }

    pub fn level(&self, k: u32) -> &[BallEntry<T>] {
        &self.levels[k as usize]
    }

    pub fn ball(&self, k: u32, i: usize) -> Ball {
        Ball { center: self.geom.point(self.levels[k as usize][i].center), level: k, scale: self.scale }
    }

    pub fn radius_sq_cells(&self, k: u32) -> Rational {
        self.scale.square() * Rational::from_integer(1i128 << (2 * (self.geom.level() - k)))
    }

    pub fn sparsity(&self, k: u32, i: usize) -> Option<SparsityValue> {
        self.levels[k as usize][i].sup_sq.map(|sup_sq| SparsityValue {
            sup_sq,
            scale_sq: self.radius_sq_cells(k),
            dim: self.geom.dim(),
        })
    }

    pub fn is_bad(&self, k: u32, i: usize, eps: &Rational) -> bool {
        self.sparsity(k, i).is_some_and(|s| s.at_least(eps))
    }

    /// `d_E(B)` for the `i`-th ball of level `k`.
    pub fn avg_dist(&self, k: u32, i: usize) -> T {
        let e = &self.levels[k as usize][i];
        let r = T::of_int(*self.radius_sq_cells(k).numer()).sqrt() / T::of_int(*self.radius_sq_cells(k).denom()).sqrt();
        e.dist_sum / (T::of_int(e.count as i128) * r)
    }

    /// `μ(B)` as the lattice fraction.
    pub fn measure(&self, k: u32, i: usize) -> Rational {
        Rational::new(self.levels[k as usize][i].count as i128, self.geom.num_cells() as i128)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::sparsity::{sparsity_7q, sparsity_ball, DistanceField};
    use crate::gridset::{gen_family, FamilyKind};

    #[test]
    fn sweeps_agree_with_single_evaluations() {
        let g = GridGeometry::new(2, 4).unwrap();
        let e = gen_family(&FamilyKind::Bernoulli { p: 0.3, seed: 2 }, g).unwrap();
        for clip in [true, false] {
            let sweep = CubeSweep::new(&e, clip).unwrap();
            for k in 0..=4 {
                for (i, q) in g.cubes_at(k).enumerate() {
                    assert_eq!(cube_at(&g, k, i), q);
                    assert_eq!(cube_index(&q), i);
                    if sweep.level(k)[i].touches {
                        assert_eq!(sweep.sparsity(k, i), sparsity_7q(&e, &q, clip));
                    }
                }
            }
        }
        let fam = MultiresFamily::build(&g, ScaleConstant::one());
        let bs = BallSweep::<f64>::new(&e, &fam).unwrap();
        let field = DistanceField::new(&e).unwrap();
        for k in 0..=4 {
            for (i, b) in fam.balls_at(k).enumerate() {
                if bs.level(k)[i].touches {
                    assert_eq!(bs.sparsity(k, i), sparsity_ball(&e, &b));
                }
                let direct = field.avg_dist::<f64>(&b).unwrap().value();
                assert!((bs.avg_dist(k, i) - direct).abs() <= 1e-12 * direct.max(1.0));
            }
        }
    }
}
