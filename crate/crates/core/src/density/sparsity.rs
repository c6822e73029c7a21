//! Sparsity of a set in a ball or in `7Q`, and the averaged distance `d_E`.

use serde::{Deserialize, Serialize};

use crate::dyadic::{CellBox, DyadicCube, GridGeometry, GridPoint, Region};
use crate::edt::{EdtWorkspace, INF};
use crate::error::{QmdError, Result};
use crate::gridset::GridSet;
use crate::multires::Ball;
use crate::rational::{rational_to_f64, Rational};
use crate::scalar::{sqrt_ratio, CompensatedSum, Real};

/// `sup_x dist(x, E ∩ R) / scale(R)`, kept as the exact squared numerator
/// (cells squared) and squared scale (cells squared).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SparsityValue {
    pub sup_sq: i64,
    #[serde(with = "crate::rational::serde_rational")]
    pub scale_sq: Rational,
    pub dim: usize,
}

impl SparsityValue {
    pub fn value<T: Real>(&self) -> T {
        let r = Rational::from_integer(self.sup_sq as i128) / self.scale_sq;
        sqrt_ratio(*r.numer(), *r.denom())
    }

    /// Exact test of `sparsity >= eps`.
    pub fn at_least(&self, eps: &Rational) -> bool {
        Rational::from_integer(self.sup_sq as i128) >= eps * eps * self.scale_sq
    }

    /// Discretization error bound `sqrt(d) 2^-L / scale`.
    pub fn slack<T: Real>(&self) -> T {
        let s2 = self.scale_sq;
        (T::of(self.dim as f64) * T::of_int(*s2.denom()) / T::of_int(*s2.numer())).sqrt()
    }
}

/// Largest squared distance from a query point of `domain` to the nearest
/// site. `None` when there are no sites.
pub(crate) fn sup_min_sq(
    ws: &mut EdtWorkspace,
    domain: &CellBox,
    site: &[bool],
    query: Option<&[bool]>,
) -> Option<i64> {
    if !site.iter().any(|&s| s) {
        return None;
    }
    let dist = ws.transform(domain, |i| site[i]);
    let sup = match query {
        Some(q) => dist.iter().zip(q).filter(|(_, &keep)| keep).map(|(&v, _)| v).max(),
        None => dist.iter().copied().max(),
    };
    sup.filter(|&v| v != INF)
}

/// Sup over the lattice points of `7Q` (clipped or extended past the unit
/// cube) of the squared distance to `E ∩ 7Q`.
pub(crate) fn region_sup_sq(ws: &mut EdtWorkspace, e: &GridSet, region: &Region) -> Option<i64> {
    let geom = e.geometry();
    let domain = region.cell_box(geom);
    let site: Vec<bool> = domain.points().map(|p| geom.contains(&p) && e.contains(geom.index_of(&p))).collect();
    sup_min_sq(ws, &domain, &site, None)
}

pub(crate) fn ball_sup_sq(ws: &mut EdtWorkspace, e: &GridSet, b: &Ball) -> Option<i64> {
    let geom = e.geometry();
    let domain = b.bounding_box(geom);
    let r2 = b.radius_sq_cells(geom);
    let inside: Vec<bool> =
        domain.points().map(|p| Rational::from_integer(p.sq_dist(&b.center) as i128) <= r2).collect();
    let site: Vec<bool> = domain.points().zip(&inside).map(|(p, &i)| i && e.contains(geom.index_of(&p))).collect();
    sup_min_sq(ws, &domain, &site, Some(&inside))
}

/// Squared `side(7Q)` in cells squared, used even when `7Q` is clipped.
pub(crate) fn cube_scale_sq(geom: &GridGeometry, level: u32) -> Rational {
    let s = 7 * geom.cube_cells(level) as i128;
    Rational::from_integer(s * s)
}

/// `None` when `E ∩ B` is empty.
pub fn sparsity_ball(e: &GridSet, b: &Ball) -> Option<SparsityValue> {
    let geom = e.geometry();
    let sup_sq = ball_sup_sq(&mut EdtWorkspace::new(), e, b)?;
    Some(SparsityValue { sup_sq, scale_sq: b.radius_sq_cells(geom), dim: geom.dim() })
}

/// `None` when `E ∩ 7Q` is empty. The scale is `side(7Q)` in both modes.
pub fn sparsity_7q(e: &GridSet, q: &DyadicCube, clip: bool) -> Option<SparsityValue> {
    let geom = e.geometry();
    let region = Region { cube: *q, factor: 7, clip };
    let sup_sq = region_sup_sq(&mut EdtWorkspace::new(), e, &region)?;
    Some(SparsityValue { sup_sq, scale_sq: cube_scale_sq(geom, q.level()), dim: geom.dim() })
}

/// Squared distance from every lattice point to the whole of `E`.
#[derive(Debug, Clone)]
pub struct DistanceField {
    geom: GridGeometry,
    sq: Vec<i64>,
}

impl DistanceField {
    pub fn new(e: &GridSet) -> Result<Self> {
        if e.is_empty() {
            return Err(QmdError::EmptySet);
        }
        let geom = *e.geometry();
        let sq = EdtWorkspace::new().transform(&geom.unit_box(), |i| e.contains(i)).to_vec();
        Ok(Self { geom, sq })
    }

    pub fn sq_dist(&self, p: &GridPoint) -> i64 {
        self.sq[self.geom.index_of(p)]
    }

    pub fn avg_dist<T: Real>(&self, b: &Ball) -> Result<AvgDist<T>> {
        let mut sum = CompensatedSum::<T>::new();
        let mut count = 0u64;
        for p in b.points(&self.geom) {
            sum.add(T::of_int(self.sq_dist(&p) as i128).sqrt());
            count += 1;
        }
        if count == 0 {
            return Err(QmdError::EmptyBall);
        }
        let r2 = b.radius_sq_cells(&self.geom);
        Ok(AvgDist { dist_sum: sum.value(), count, radius_cells: T::of(rational_to_f64(&r2)).sqrt() })
    }
}

/// `d_E(B)`: mean over the lattice points of `B` of `dist(x, E) / r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AvgDist<T> {
    /// Sum of distances to `E`, in cells.
    pub dist_sum: T,
    pub count: u64,
    pub radius_cells: T,
}

impl<T: Real> AvgDist<T> {
    pub fn value(&self) -> T {
        self.dist_sum / (T::of_int(self.count as i128) * self.radius_cells)
    }
}

pub fn avg_dist<T: Real>(e: &GridSet, b: &Ball) -> Result<AvgDist<T>> {
    DistanceField::new(e)?.avg_dist(b)
}
