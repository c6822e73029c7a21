//! Dyadic cubes on a `2^L`-per-side lattice in `[0,1]^d`.
//!
//! All coordinates are integers in *cell units* at the finest level `L`: a
//! grid point `c` stands for the cell center `(c + 1/2) * 2^-L`, and a cube at
//! level `k` spans `2^(L-k)` cells per side. Membership and distance
//! comparisons are therefore decided on integers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{QmdError, Result};
use crate::rational::Rational;

pub const MAX_DIM: usize = 4;

/// Cap on `d * L`, so that the `2^(Ld)` cells stay enumerable.
pub const MAX_TOTAL_BITS: u32 = 20;

/// Ambient dimension and finest dyadic level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridGeometry {
    dim: usize,
    level: u32,
}

impl GridGeometry {
    pub fn new(dim: usize, level: u32) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(QmdError::InvalidGeometry { dim, level, reason: "dimension must be in 1..=4" });
        }
        if dim as u32 * level > MAX_TOTAL_BITS {
            return Err(QmdError::InvalidGeometry { dim, level, reason: "level exceeds 20/d" });
        }
        Ok(Self { dim, level })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Cells per side, `2^L`.
    pub fn side(&self) -> i64 {
        1i64 << self.level
    }

    pub fn num_cells(&self) -> usize {
        1usize << (self.level as usize * self.dim)
    }

    /// Dictionary-order index: the first coordinate varies fastest.
    pub fn index_of(&self, p: &GridPoint) -> usize {
        debug_assert!(self.contains(p));
        let mut idx = 0usize;
        for i in (0..self.dim).rev() {
            idx = (idx << self.level) | p.coords[i] as usize;
        }
        idx
    }

    pub fn point(&self, mut idx: usize) -> GridPoint {
        let mask = (1usize << self.level) - 1;
        let mut coords = [0i64; MAX_DIM];
        for c in coords.iter_mut().take(self.dim) {
            *c = (idx & mask) as i64;
            idx >>= self.level;
        }
        GridPoint { dim: self.dim as u8, coords }
    }

    pub fn contains(&self, p: &GridPoint) -> bool {
        p.dim as usize == self.dim && p.coords().iter().all(|&c| (0..self.side()).contains(&c))
    }

    /// Side length of a level-`k` cube in cells.
    pub fn cube_cells(&self, level: u32) -> i64 {
        debug_assert!(level <= self.level);
        1i64 << (self.level - level)
    }

    /// The whole unit cube as a cell box.
    pub fn unit_box(&self) -> CellBox {
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for i in 0..self.dim {
            lo[i] = 0;
            hi[i] = self.side();
        }
        CellBox { dim: self.dim as u8, lo, hi }
    }

    /// Iterates over all cubes of one level, in dictionary order.
    pub fn cubes_at(&self, level: u32) -> impl Iterator<Item = DyadicCube> + '_ {
        let per_side = 1usize << level;
        let count = per_side.pow(self.dim as u32);
        let dim = self.dim;
        (0..count).map(move |mut idx| {
            let mut corner = [0i64; MAX_DIM];
            for c in corner.iter_mut().take(dim) {
                *c = (idx % per_side) as i64;
                idx /= per_side;
            }
            DyadicCube { dim: dim as u8, level, corner }
        })
    }
}

/// A cell center on the lattice. Coordinates may leave `[0, 2^L)` when the
/// point is used as a virtual lattice site outside the unit cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPoint {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl GridPoint {
    pub fn new(coords: &[i64]) -> Self {
        assert!(!coords.is_empty() && coords.len() <= MAX_DIM, "dimension must be in 1..=4");
        let mut c = [0i64; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Self { dim: coords.len() as u8, coords: c }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    /// Squared Euclidean distance in cell units.
    pub fn sq_dist(&self, other: &GridPoint) -> i64 {
        self.coords().iter().zip(other.coords()).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// The center as a rational point of `[0,1]^d`.
    pub fn center(&self, geom: &GridGeometry) -> Vec<Rational> {
        let den = 2 * geom.side() as i128;
        self.coords().iter().map(|&c| Rational::new(2 * c as i128 + 1, den)).collect()
    }
}

impl fmt::Display for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// `prod_i [a_i 2^-k, (a_i + 1) 2^-k)`. Corners are signed so that the cells
/// of an expansion can be represented even when they leave the unit cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    dim: u8,
    level: u32,
    corner: [i64; MAX_DIM],
}

impl DyadicCube {
    pub fn new(level: u32, corner: &[i64]) -> Self {
        assert!(!corner.is_empty() && corner.len() <= MAX_DIM, "dimension must be in 1..=4");
        let mut c = [0i64; MAX_DIM];
        c[..corner.len()].copy_from_slice(corner);
        Self { dim: corner.len() as u8, level, corner: c }
    }

    pub fn unit(dim: usize) -> Self {
        Self::new(0, &vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn corner(&self) -> &[i64] {
        &self.corner[..self.dim as usize]
    }

    pub fn in_unit_cube(&self) -> bool {
        let n = 1i64 << self.level;
        self.corner().iter().all(|&a| (0..n).contains(&a))
    }

    /// Lebesgue measure `2^(-kd)`.
    pub fn measure(&self) -> Rational {
        Rational::new(1, 1i128 << (self.level as usize * self.dim()))
    }

    /// Side as an exact rational, `2^-k`.
    pub fn side(&self) -> Rational {
        Rational::new(1, 1i128 << self.level)
    }

    /// Cell box of the unclipped expansion `m Q` at grid level `L`.
    pub fn expansion_box(&self, geom: &GridGeometry, factor: u32) -> CellBox {
        debug_assert!(factor % 2 == 1);
        let s = geom.cube_cells(self.level);
        let h = (factor as i64 - 1) / 2;
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for i in 0..self.dim() {
            lo[i] = (self.corner[i] - h) * s;
            hi[i] = (self.corner[i] + h + 1) * s;
        }
        CellBox { dim: self.dim, lo, hi }
    }

    /// Whether the cell center `p` lies in the unclipped expansion `m Q`.
    pub fn expansion_contains(&self, geom: &GridGeometry, factor: u32, p: &GridPoint) -> bool {
        let shift = geom.level() - self.level;
        let h = (factor as i64 - 1) / 2;
        p.coords().iter().zip(self.corner()).all(|(&c, &a)| ((c >> shift) - a).abs() <= h)
    }

    pub fn contains(&self, geom: &GridGeometry, p: &GridPoint) -> bool {
        self.expansion_contains(geom, 1, p)
    }

    /// The ancestor of `p` at this cube's level.
    pub fn of_point(geom: &GridGeometry, level: u32, p: &GridPoint) -> Self {
        let shift = geom.level() - level;
        let corner: Vec<i64> = p.coords().iter().map(|&c| c >> shift).collect();
        Self::new(level, &corner)
    }
}

impl fmt::Display for DyadicCube {
    /// Cube literal `k:(a1,...,ad)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:(", self.level)?;
        for (i, a) in self.corner().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for DyadicCube {
    type Err = QmdError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || QmdError::Format(format!("bad cube literal {s:?}"));
        let (k, rest) = s.trim().split_once(':').ok_or_else(bad)?;
        let level: u32 = k.trim().parse().map_err(|_| bad())?;
        let inner = rest.trim().strip_prefix('(').and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
        let corner =
            inner.split(',').map(|t| t.trim().parse::<i64>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
        if corner.is_empty() || corner.len() > MAX_DIM {
            return Err(bad());
        }
        Ok(Self::new(level, &corner))
    }
}

impl Serialize for DyadicCube {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DyadicCube {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Half-open box of lattice cells, `prod_i [lo_i, hi_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellBox {
    dim: u8,
    lo: [i64; MAX_DIM],
    hi: [i64; MAX_DIM],
}

impl CellBox {
    pub fn new(lo: &[i64], hi: &[i64]) -> Self {
        assert_eq!(lo.len(), hi.len());
        let mut l = [0i64; MAX_DIM];
        let mut h = [0i64; MAX_DIM];
        l[..lo.len()].copy_from_slice(lo);
        h[..hi.len()].copy_from_slice(hi);
        Self { dim: lo.len() as u8, lo: l, hi: h }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo[..self.dim()]
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi[..self.dim()]
    }

    pub fn is_empty(&self) -> bool {
        self.lo().iter().zip(self.hi()).any(|(l, h)| l >= h)
    }

    pub fn extents(&self) -> Vec<usize> {
        self.lo().iter().zip(self.hi()).map(|(l, h)| (h - l).max(0) as usize).collect()
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            self.extents().iter().product()
        }
    }

    pub fn intersect(&self, other: &CellBox) -> CellBox {
        let mut out = *self;
        for i in 0..self.dim() {
            out.lo[i] = self.lo[i].max(other.lo[i]);
            out.hi[i] = self.hi[i].min(other.hi[i]);
        }
        out
    }

    pub fn contains(&self, p: &GridPoint) -> bool {
        p.coords().iter().enumerate().all(|(i, &c)| c >= self.lo[i] && c < self.hi[i])
    }

    /// Points of the box in dictionary order (first coordinate fastest).
    pub fn points(&self) -> impl Iterator<Item = GridPoint> + '_ {
        let ext = self.extents();
        let total = self.len();
        let dim = self.dim();
        (0..total).map(move |mut idx| {
            let mut coords = [0i64; MAX_DIM];
            for i in 0..dim {
                coords[i] = self.lo[i] + (idx % ext[i]) as i64;
                idx /= ext[i];
            }
            GridPoint { dim: dim as u8, coords }
        })
    }

    /// Position of `p` in the dictionary enumeration of this box.
    pub fn offset_of(&self, p: &GridPoint) -> usize {
        let ext = self.extents();
        let mut idx = 0usize;
        for i in (0..self.dim()).rev() {
            idx = idx * ext[i] + (p.coords[i] - self.lo[i]) as usize;
        }
        idx
    }
}

/// A dyadic cube expanded by an odd factor, optionally clipped to `[0,1]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Region {
    pub cube: DyadicCube,
    pub factor: u32,
    pub clip: bool,
}

impl Region {
    /// Per-dimension interval `[lo, hi)` in `[0,1]` coordinates.
    pub fn bounds(&self) -> Vec<(Rational, Rational)> {
        let h = (self.factor as i128 - 1) / 2;
        let den = 1i128 << self.cube.level;
        self.cube
            .corner()
            .iter()
            .map(|&a| {
                let mut lo = Rational::new(a as i128 - h, den);
                let mut hi = Rational::new(a as i128 + h + 1, den);
                if self.clip {
                    lo = lo.max(Rational::from_integer(0));
                    hi = hi.min(Rational::from_integer(1));
                }
                (lo, hi)
            })
            .collect()
    }

    /// Cell box of the region at grid level `L`.
    pub fn cell_box(&self, geom: &GridGeometry) -> CellBox {
        let b = self.cube.expansion_box(geom, self.factor);
        if self.clip {
            b.intersect(&geom.unit_box())
        } else {
            b
        }
    }

    pub fn contains(&self, geom: &GridGeometry, p: &GridPoint) -> bool {
        self.cell_box(geom).contains(p)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*{}{}", self.factor, self.cube, if self.clip { "|clip" } else { "" })
    }
}

/// The `2^d` children of `q`, in dictionary order.
pub fn children(geom: &GridGeometry, q: &DyadicCube) -> Result<Vec<DyadicCube>> {
    if q.level >= geom.level() {
        return Err(QmdError::LevelOverflow { level: q.level, max: geom.level() });
    }
    let d = q.dim();
    Ok((0..1usize << d)
        .map(|bits| {
            let corner: Vec<i64> = (0..d).map(|i| 2 * q.corner[i] + ((bits >> i) & 1) as i64).collect();
            DyadicCube::new(q.level + 1, &corner)
        })
        .collect())
}

/// One of the `3^d` same-level cells of `3Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThreeCell {
    pub cube: DyadicCube,
    pub outside: bool,
}

/// The cells of `3Q` in dictionary order of their centers: cell 1 is the one
/// closest to the origin and the first coordinate varies fastest.
pub fn cells_of_3q(q: &DyadicCube) -> Vec<ThreeCell> {
    let d = q.dim();
    let n = 3usize.pow(d as u32);
    (0..n)
        .map(|mut idx| {
            let mut corner = [0i64; MAX_DIM];
            for i in 0..d {
                corner[i] = q.corner[i] + (idx % 3) as i64 - 1;
                idx /= 3;
            }
            let cube = DyadicCube { dim: q.dim, level: q.level, corner };
            ThreeCell { cube, outside: !cube.in_unit_cube() }
        })
        .collect()
}

pub fn region_of(q: &DyadicCube, factor: u32, clip: bool) -> Result<Region> {
    if !matches!(factor, 1 | 3 | 5 | 7) {
        return Err(QmdError::Domain(format!("expansion factor {factor} not in {{1,3,5,7}}")));
    }
    Ok(Region { cube: *q, factor, clip })
}

/// A finest dyadic cube (level at most `L`) whose unclipped triple holds both
/// points; among cubes of that side, the one with the smallest corner.
///
/// For `x == y` this is the level-`L` cube whose triple is centered at `x`'s
/// lowest neighbor, i.e. the same rule applied to a degenerate pair.
pub fn minimal_common_cube(geom: &GridGeometry, x: &GridPoint, y: &GridPoint) -> DyadicCube {
    let d = geom.dim();
    'levels: for level in (0..=geom.level()).rev() {
        let shift = geom.level() - level;
        let mut corner = [0i64; MAX_DIM];
        for i in 0..d {
            let px = x.coords[i] >> shift;
            let py = y.coords[i] >> shift;
            let a = (px.max(py) - 1).max(0);
            if a > px.min(py) + 1 {
                continue 'levels;
            }
            corner[i] = a;
        }
        return DyadicCube { dim: d as u8, level, corner };
    }
    unreachable!("the level-0 cube always qualifies")
}

/// 1-based index of the cell of `3Q` holding `x`.
pub fn cell_label(geom: &GridGeometry, x: &GridPoint, q: &DyadicCube) -> Result<u32> {
    let shift = geom.level() - q.level;
    let mut label = 0u32;
    for i in (0..q.dim()).rev() {
        let off = (x.coords[i] >> shift) - q.corner[i];
        if !(-1..=1).contains(&off) {
            return Err(QmdError::PointOutsideRegion { point: x.to_string(), region: format!("3*{q}") });
        }
        label = label * 3 + (off + 1) as u32;
    }
    Ok(label + 1)
}
