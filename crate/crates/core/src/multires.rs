//! Nested `2^-k`-nets on the lattice and the multiresolution ball family.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::dyadic::{CellBox, GridGeometry, GridPoint, MAX_DIM};
use crate::error::{QmdError, Result};
use crate::rational::{ceil_sqrt_rational, rational_to_string, Rational};

/// The constant `A`, held as the exact square `A^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScaleConstant {
    a2: Rational,
}

impl ScaleConstant {
    /// Requires `A >= 1`.
    pub fn from_square(a2: Rational) -> Result<Self> {
        if a2 < Rational::one() {
            return Err(QmdError::Domain(format!("scale constant A^2 = {a2} is below 1")));
        }
        Ok(Self { a2 })
    }

    pub fn from_value(a: Rational) -> Result<Self> {
        Self::from_square(a * a)
    }

    pub fn one() -> Self {
        Self { a2: Rational::one() }
    }

    /// `A = 7 sqrt(d)`, the constant whose balls enclose `7Q`.
    pub fn seven_sqrt_d(dim: usize) -> Self {
        Self { a2: Rational::from_integer(49 * dim as i128) }
    }

    pub fn square(&self) -> Rational {
        self.a2
    }

    pub fn to_f64(&self) -> f64 {
        (*self.a2.numer() as f64 / *self.a2.denom() as f64).sqrt()
    }
}

impl fmt::Display for ScaleConstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sqrt({})", rational_to_string(&self.a2))
    }
}

/// Largest integer `n` with `n^2 <= v`.
pub(crate) fn floor_sqrt_rational(v: &Rational) -> i64 {
    let n = ceil_sqrt_rational(v);
    if Rational::from_integer(n as i128 * n as i128) > *v {
        n - 1
    } else {
        n
    }
}

/// A closed ball `B(x, A 2^-k)` of the family, intersected with `[0,1]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ball {
    pub center: GridPoint,
    pub level: u32,
    pub scale: ScaleConstant,
}

impl Ball {
    /// Squared radius in cells squared: `A^2 4^(L-k)`.
    pub fn radius_sq_cells(&self, geom: &GridGeometry) -> Rational {
        self.scale.a2 * Rational::from_integer(1i128 << (2 * (geom.level() - self.level)))
    }

    /// Radius in `[0,1]` units.
    pub fn radius(&self) -> f64 {
        self.scale.to_f64() / (1u64 << self.level) as f64
    }

    pub fn contains(&self, geom: &GridGeometry, p: &GridPoint) -> bool {
        let r2 = self.radius_sq_cells(geom);
        Rational::from_integer(p.sq_dist(&self.center) as i128) <= r2
    }

    /// The lattice box around the ball, clipped to the unit cube.
    pub fn bounding_box(&self, geom: &GridGeometry) -> CellBox {
        let r = floor_sqrt_rational(&self.radius_sq_cells(geom));
        let c = self.center.coords();
        let lo: Vec<i64> = c.iter().map(|&x| x - r).collect();
        let hi: Vec<i64> = c.iter().map(|&x| x + r + 1).collect();
        CellBox::new(&lo, &hi).intersect(&geom.unit_box())
    }

    /// Lattice points of the ball in dictionary order.
    pub fn points<'a>(&'a self, geom: &'a GridGeometry) -> impl Iterator<Item = GridPoint> + 'a {
        let r2 = self.radius_sq_cells(geom);
        let bbox = self.bounding_box(geom);
        let pts: Vec<GridPoint> = bbox.points().collect();
        pts.into_iter().filter(move |p| Rational::from_integer(p.sq_dist(&self.center) as i128) <= r2)
    }
}

/// `N_0 ⊆ N_1 ⊆ ... ⊆ N_L`, stored as the level at which each lattice point
/// first joins a net.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedNets {
    geom: GridGeometry,
    first_level: Vec<u8>,
    levels: Vec<Vec<usize>>,
}

/// Greedy construction, coarse to fine: each level starts from the previous
/// net and admits, in dictionary order, every point at distance at least
/// `2^-k` from all points already admitted.
pub fn build_nets(geom: &GridGeometry) -> NestedNets {
    let l = geom.level();
    let d = geom.dim();
    let n = geom.num_cells();
    let mut first_level = vec![u8::MAX; n];
    let mut levels = Vec::with_capacity(l as usize + 1);
    let mut members: Vec<usize> = Vec::new();
    for k in 0..=l {
        let shift = l - k;
        let sep2 = 1i64 << (2 * shift);
        let per_side = 1usize << k;
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); per_side.pow(d as u32)];
        let bucket_of = |p: &GridPoint| -> [i64; MAX_DIM] {
            let mut b = [0i64; MAX_DIM];
            for i in 0..d {
                b[i] = p.coords()[i] >> shift;
            }
            b
        };
        let flat = |b: &[i64; MAX_DIM]| -> usize {
            let mut idx = 0usize;
            for i in (0..d).rev() {
                idx = idx * per_side + b[i] as usize;
            }
            idx
        };
        for &m in &members {
            let p = geom.point(m);
            buckets[flat(&bucket_of(&p))].push(m as u32);
        }
        let offsets = neighbor_offsets(d);
        for idx in 0..n {
            if first_level[idx] != u8::MAX {
                continue;
            }
            let p = geom.point(idx);
            let b = bucket_of(&p);
            let mut far = true;
            'scan: for off in &offsets {
                let mut nb = [0i64; MAX_DIM];
                for i in 0..d {
                    nb[i] = b[i] + off[i];
                    if nb[i] < 0 || nb[i] >= per_side as i64 {
                        continue 'scan;
                    }
                }
                for &m in &buckets[flat(&nb)] {
                    if geom.point(m as usize).sq_dist(&p) < sep2 {
                        far = false;
                        break 'scan;
                    }
                }
            }
            if far {
                first_level[idx] = k as u8;
                buckets[flat(&b)].push(idx as u32);
                members.push(idx);
            }
        }
        members.sort_unstable();
        levels.push(members.clone());
    }
    NestedNets { geom: *geom, first_level, levels }
}

fn neighbor_offsets(d: usize) -> Vec<[i64; MAX_DIM]> {
    (0..3usize.pow(d as u32))
        .map(|mut t| {
            let mut o = [0i64; MAX_DIM];
            for c in o.iter_mut().take(d) {
                *c = (t % 3) as i64 - 1;
                t /= 3;
            }
            o
        })
        .collect()
}

/// Exhaustive check of the net conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NetAudit {
    pub nested: bool,
    pub separated: bool,
    pub covering: bool,
    /// Extra distance for points off the lattice: half a cell diagonal.
    pub covering_defect: f64,
}

impl NetAudit {
    pub fn ok(&self) -> bool {
        self.nested && self.separated && self.covering
    }
}

impl NestedNets {
    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    /// Cell indices of `N_k`, in dictionary order.
    pub fn level(&self, k: u32) -> &[usize] {
        &self.levels[k as usize]
    }

    pub fn contains(&self, k: u32, idx: usize) -> bool {
        u32::from(self.first_level[idx]) <= k
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// All-pairs audit; quadratic in the net size.
    pub fn audit(&self) -> NetAudit {
        let g = &self.geom;
        let l = g.level();
        let mut nested = true;
        let mut separated = true;
        let mut covering = true;
        for k in 0..=l {
            let sep2 = 1i64 << (2 * (l - k));
            let pts: Vec<GridPoint> = self.level(k).iter().map(|&i| g.point(i)).collect();
            if k > 0 && !self.level(k - 1).iter().all(|i| self.level(k).binary_search(i).is_ok()) {
                nested = false;
            }
            for (i, p) in pts.iter().enumerate() {
                if pts[i + 1..].iter().any(|q| p.sq_dist(q) < sep2) {
                    separated = false;
                }
            }
            for idx in 0..g.num_cells() {
                let x = g.point(idx);
                if !pts.iter().any(|p| p.sq_dist(&x) < sep2) {
                    covering = false;
                }
            }
        }
        let covering_defect = (g.dim() as f64).sqrt() / 2.0 / g.side() as f64;
        NetAudit { nested, separated, covering, covering_defect }
    }
}

/// `{B(x, A 2^-k) : x in N_k, 0 <= k <= L}`.
#[derive(Debug, Clone)]
pub struct MultiresFamily {
    nets: NestedNets,
    scale: ScaleConstant,
}

impl MultiresFamily {
    pub fn new(nets: NestedNets, scale: ScaleConstant) -> Self {
        Self { nets, scale }
    }

    pub fn build(geom: &GridGeometry, scale: ScaleConstant) -> Self {
        Self::new(build_nets(geom), scale)
    }

    pub fn nets(&self) -> &NestedNets {
        &self.nets
    }

    pub fn scale(&self) -> ScaleConstant {
        self.scale
    }

    pub fn geometry(&self) -> &GridGeometry {
        self.nets.geometry()
    }

    pub fn balls_at(&self, k: u32) -> impl Iterator<Item = Ball> + '_ {
        let g = *self.geometry();
        self.nets.level(k).iter().map(move |&i| Ball { center: g.point(i), level: k, scale: self.scale })
    }

    pub fn balls(&self) -> impl Iterator<Item = Ball> + '_ {
        (0..=self.geometry().level()).flat_map(move |k| self.balls_at(k))
    }

    pub fn num_balls(&self) -> usize {
        (0..=self.geometry().level()).map(|k| self.nets.level(k).len()).sum()
    }

    /// Number of level-`k` balls containing `x`.
    pub fn overlap_count(&self, x: &GridPoint, k: u32) -> usize {
        let g = self.geometry();
        let probe = Ball { center: *x, level: k, scale: self.scale };
        probe.points(g).filter(|c| self.nets.contains(k, g.index_of(c))).count()
    }
}

/// Covering number used as the doubling constant of `R^d`: the ball of
/// radius `2r` sits in a cube of side `4r`, which splits into `m^d` cubes of
/// half-diagonal at most `r` once `m^2 >= 4d`.
pub fn doubling_number(dim: usize) -> u64 {
    let mut m = 1u64;
    while m * m < 4 * dim as u64 {
        m += 1;
    }
    m.pow(dim as u32)
}

/// Smallest `p` with `2^p >= 4A`, i.e. `4^p >= 16 A^2`.
pub fn overlap_exponent(scale: &ScaleConstant) -> u32 {
    let target = scale.a2 * Rational::from_integer(16);
    let mut p = 0u32;
    while Rational::from_integer(1i128 << (2 * p)) < target {
        p += 1;
    }
    p
}

/// `M = N^p` for the doubling number `N`.
pub fn theoretical_overlap_bound(dim: usize, scale: &ScaleConstant) -> BigUint {
    BigUint::from(doubling_number(dim)).pow(overlap_exponent(scale))
}

/// Same bound as a machine integer when it fits.
pub fn theoretical_overlap_bound_u64(dim: usize, scale: &ScaleConstant) -> Option<u64> {
    theoretical_overlap_bound(dim, scale).to_u64()
}
