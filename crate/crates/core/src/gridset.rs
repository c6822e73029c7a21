//! Finite-resolution subsets of `[0,1]^d`, stored as occupied lattice cells.

use bitvec::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::{CellBox, GridGeometry, GridPoint, Region, MAX_DIM};
use crate::error::{QmdError, Result};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSet {
    geom: GridGeometry,
    occupied: BitVec<u64, Lsb0>,
}

impl GridSet {
    pub fn empty(geom: GridGeometry) -> Self {
        Self { geom, occupied: bitvec![u64, Lsb0; 0; geom.num_cells()] }
    }

    pub fn full(geom: GridGeometry) -> Self {
        Self { geom, occupied: bitvec![u64, Lsb0; 1; geom.num_cells()] }
    }

    pub fn from_indices(geom: GridGeometry, cells: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut set = Self::empty(geom);
        for c in cells {
            if c >= geom.num_cells() {
                return Err(QmdError::Format(format!("cell index {c} out of range")));
            }
            set.occupied.set(c, true);
        }
        Ok(set)
    }

    pub fn from_fn(geom: GridGeometry, mut f: impl FnMut(&GridPoint) -> bool) -> Self {
        let mut set = Self::empty(geom);
        for i in 0..geom.num_cells() {
            if f(&geom.point(i)) {
                set.occupied.set(i, true);
            }
        }
        set
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.occupied[idx]
    }

    /// False for points outside the unit cube.
    pub fn contains_point(&self, p: &GridPoint) -> bool {
        self.geom.contains(p) && self.occupied[self.geom.index_of(p)]
    }

    pub fn insert(&mut self, idx: usize) {
        self.occupied.set(idx, true);
    }

    pub fn remove(&mut self, idx: usize) {
        self.occupied.set(idx, false);
    }

    pub fn len(&self) -> usize {
        self.occupied.count_ones()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.not_any()
    }

    /// Occupied cell indices in dictionary order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.occupied.iter_ones()
    }

    pub fn points(&self) -> impl Iterator<Item = GridPoint> + '_ {
        self.iter().map(|i| self.geom.point(i))
    }

    /// Exact Lebesgue measure, `popcount * 2^-(Ld)`.
    pub fn measure(&self) -> Rational {
        Rational::new(self.len() as i128, self.geom.num_cells() as i128)
    }

    pub fn union(&self, other: &GridSet) -> GridSet {
        assert_eq!(self.geom, other.geom);
        let mut out = self.clone();
        out.occupied |= &other.occupied;
        out
    }

    pub fn intersection(&self, other: &GridSet) -> GridSet {
        assert_eq!(self.geom, other.geom);
        let mut out = self.clone();
        out.occupied &= &other.occupied;
        out
    }

    pub fn difference(&self, other: &GridSet) -> GridSet {
        assert_eq!(self.geom, other.geom);
        let mut out = self.clone();
        let mut neg = other.occupied.clone();
        neg = !neg;
        out.occupied &= &neg;
        out
    }

    pub fn is_subset(&self, other: &GridSet) -> bool {
        self.geom == other.geom && self.iter().all(|i| other.contains(i))
    }

    pub fn is_disjoint(&self, other: &GridSet) -> bool {
        self.iter().all(|i| !other.contains(i))
    }
}

/// Summed-area table over a `2^level`-per-side lattice for O(2^d) box counts.
#[derive(Debug, Clone)]
pub struct BoxCounter {
    dim: usize,
    side: i64,
    stride: [usize; MAX_DIM],
    table: Vec<u32>,
}

impl BoxCounter {
    pub fn new(set: &GridSet) -> Self {
        let geom = set.geometry();
        Self::from_indicator(geom.dim(), geom.level(), |i| set.contains(i))
    }

    /// Table over an indicator on dictionary-order indices at `level`.
    pub fn from_indicator(dim: usize, level: u32, f: impl Fn(usize) -> bool) -> Self {
        let n = 1usize << level;
        let m = n + 1;
        let mut stride = [0usize; MAX_DIM];
        let mut s = 1;
        for st in stride.iter_mut().take(dim) {
            *st = s;
            s *= m;
        }
        let mut table = vec![0u32; s];
        for idx in 0..n.pow(dim as u32) {
            if f(idx) {
                let mut t = 0;
                let mut rest = idx;
                for st in stride.iter().take(dim) {
                    t += (rest % n + 1) * st;
                    rest /= n;
                }
                table[t] = 1;
            }
        }
        for st in stride.iter().take(dim) {
            for t in 0..table.len() {
                if (t / st) % m != 0 {
                    table[t] += table[t - st];
                }
            }
        }
        Self { dim, side: n as i64, stride, table }
    }

    /// Number of marked cells in the box (clipped to the lattice).
    pub fn count(&self, b: &CellBox) -> u64 {
        let d = self.dim;
        let n = self.side;
        let mut lo = [0usize; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        for i in 0..d {
            let l = b.lo()[i].clamp(0, n);
            let h = b.hi()[i].clamp(0, n);
            if l >= h {
                return 0;
            }
            lo[i] = l as usize;
            hi[i] = h as usize;
        }
        let mut total: i64 = 0;
        for mask in 0..1usize << d {
            let mut t = 0;
            let mut sign = 1i64;
            for i in 0..d {
                if mask >> i & 1 == 1 {
                    t += lo[i] * self.stride[i];
                    sign = -sign;
                } else {
                    t += hi[i] * self.stride[i];
                }
            }
            total += sign * self.table[t] as i64;
        }
        total as u64
    }
}

/// Squared center distance (cell units) from `x` to the nearest occupied cell
/// of `e` inside `r`; `None` when `E ∩ r` is empty. Brute force over the region.
pub fn dist_to_set_within(x: &GridPoint, e: &GridSet, r: &Region) -> Option<i64> {
    let geom = e.geometry();
    let b = r.cube.expansion_box(geom, r.factor).intersect(&geom.unit_box());
    b.points().filter(|p| e.contains(geom.index_of(p))).map(|p| p.sq_dist(x)).min()
}

/// `E_k`: alternating blocks of `2^(L-k-2)` cells starting occupied (d = 1).
pub fn gen_counterexample(k: u32, level: u32) -> Result<GridSet> {
    let geom = GridGeometry::new(1, level)?;
    stripes(geom, k)
}

/// Cylinder over `E_k` in the first coordinate; equals `E_k` when d = 1.
pub fn stripes(geom: GridGeometry, k: u32) -> Result<GridSet> {
    if geom.level() < k + 2 {
        return Err(QmdError::ResolutionTooCoarse { level: geom.level(), needed: k + 2 });
    }
    let shift = geom.level() - k - 2;
    Ok(GridSet::from_fn(geom, |p| (p.coords()[0] >> shift) % 2 == 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Test-set families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilyKind {
    Full,
    /// Each cell independently with probability `p`, drawn in index order.
    Bernoulli {
        p: f64,
        seed: u64,
    },
    /// Product of the 1-d set that keeps the outer quarters at every depth.
    Cantor {
        depth: u32,
    },
    /// Cells whose centers lie in a union of closed Euclidean balls.
    BallUnion {
        balls: Vec<BallSpec>,
    },
    /// `E_k` in the first coordinate.
    Stripes {
        k: u32,
    },
}

pub fn gen_family(kind: &FamilyKind, geom: GridGeometry) -> Result<GridSet> {
    match kind {
        FamilyKind::Full => Ok(GridSet::full(geom)),
        FamilyKind::Bernoulli { p, seed } => {
            if !(0.0..=1.0).contains(p) {
                return Err(QmdError::InvalidSpec(format!("probability {p} not in [0,1]")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut set = GridSet::empty(geom);
            for i in 0..geom.num_cells() {
                if rng.random::<f64>() < *p {
                    set.insert(i);
                }
            }
            Ok(set)
        }
        FamilyKind::Cantor { depth } => {
            if 2 * depth > geom.level() {
                return Err(QmdError::InvalidSpec(format!("cantor depth {depth} needs level >= {}", 2 * depth)));
            }
            let l = geom.level();
            let keep = |c: i64| (1..=*depth).all(|j| matches!((c >> (l - 2 * j)) & 3, 0 | 3));
            Ok(GridSet::from_fn(geom, |p| p.coords().iter().all(|&c| keep(c))))
        }
        FamilyKind::BallUnion { balls } => {
            for b in balls {
                if b.center.len() != geom.dim() || b.radius.is_nan() || b.radius < 0.0 {
                    return Err(QmdError::InvalidSpec(format!("bad ball {b:?}")));
                }
            }
            let scale = geom.side() as f64;
            Ok(GridSet::from_fn(geom, |p| {
                balls.iter().any(|b| {
                    let sq: f64 = p
                        .coords()
                        .iter()
                        .zip(&b.center)
                        .map(|(&c, &z)| {
                            let t = (c as f64 + 0.5) / scale - z;
                            t * t
                        })
                        .sum();
                    sq <= b.radius * b.radius
                })
            }))
        }
        FamilyKind::Stripes { k } => stripes(geom, *k),
    }
}

/// The test corpus at one geometry: a fixed list of named families, skipping
/// those the resolution cannot express.
pub fn corpus(geom: GridGeometry) -> Vec<(String, GridSet)> {
    let d = geom.dim();
    let l = geom.level();
    let mut kinds: Vec<(String, FamilyKind)> = vec![("full".into(), FamilyKind::Full)];
    for k in 0..4u32 {
        if l >= k + 2 {
            kinds.push((format!("stripes-{k}"), FamilyKind::Stripes { k }));
        }
    }
    for depth in 1..=3u32 {
        if 2 * depth <= l {
            kinds.push((format!("cantor-{depth}"), FamilyKind::Cantor { depth }));
        }
    }
    for (i, p) in [0.1, 0.5, 0.9].into_iter().enumerate() {
        kinds.push((format!("bernoulli-{p}"), FamilyKind::Bernoulli { p, seed: 17 + i as u64 }));
    }
    let c = |v: f64| vec![v; d];
    let mut shifted = c(0.7);
    shifted[0] = 0.25;
    kinds.push(("ball-center".into(), FamilyKind::BallUnion { balls: vec![BallSpec { center: c(0.5), radius: 0.3 }] }));
    kinds.push((
        "ball-pair".into(),
        FamilyKind::BallUnion {
            balls: vec![BallSpec { center: c(0.2), radius: 0.15 }, BallSpec { center: shifted, radius: 0.2 }],
        },
    ));
    kinds
        .push(("ball-corner".into(), FamilyKind::BallUnion { balls: vec![BallSpec { center: c(0.0), radius: 0.45 }] }));
    kinds.push(("ball-small".into(), FamilyKind::BallUnion { balls: vec![BallSpec { center: c(0.6), radius: 0.08 }] }));
    let mut out: Vec<(String, GridSet)> = kinds
        .into_iter()
        .filter_map(|(name, kind)| {
            let set = gen_family(&kind, geom).ok()?;
            (!set.is_empty()).then_some((name, set))
        })
        .collect();
    let mid = geom.point(geom.num_cells() / 2 + geom.side() as usize / 2);
    out.push(("single-cell".into(), GridSet::from_indices(geom, [geom.index_of(&mid)]).unwrap()));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    CellList,
    HexBitset,
}

/// On-disk form of a [`GridSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetFile {
    pub dimension: usize,
    pub level: u32,
    pub encoding: Encoding,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<serde_json::Value>,
}

impl SetFile {
    pub fn encode(set: &GridSet, encoding: Encoding) -> Self {
        let geom = set.geometry();
        let (cells, bits) = match encoding {
            Encoding::CellList => (Some(set.iter().map(|i| i as u64).collect()), None),
            Encoding::HexBitset => {
                let mut bytes = vec![0u8; geom.num_cells().div_ceil(8)];
                for i in set.iter() {
                    bytes[i / 8] |= 1 << (i % 8);
                }
                (None, Some(hex::encode(bytes)))
            }
        };
        Self { dimension: geom.dim(), level: geom.level(), encoding, cells, bits, manifest: None }
    }

    pub fn decode(&self) -> Result<GridSet> {
        let geom = GridGeometry::new(self.dimension, self.level)?;
        match self.encoding {
            Encoding::CellList => {
                let cells =
                    self.cells.as_ref().ok_or_else(|| QmdError::Format("cell-list without \"cells\"".into()))?;
                GridSet::from_indices(geom, cells.iter().map(|&c| c as usize))
            }
            Encoding::HexBitset => {
                let hex_str =
                    self.bits.as_ref().ok_or_else(|| QmdError::Format("hex-bitset without \"bits\"".into()))?;
                let bytes = hex::decode(hex_str).map_err(|e| QmdError::Format(e.to_string()))?;
                if bytes.len() != geom.num_cells().div_ceil(8) {
                    return Err(QmdError::Format("bitset length mismatch".into()));
                }
                let mut set = GridSet::empty(geom);
                for i in 0..geom.num_cells() {
                    if bytes[i / 8] >> (i % 8) & 1 == 1 {
                        set.insert(i);
                    }
                }
                if geom.num_cells() % 8 != 0 && bytes.last().copied().unwrap_or(0) >> (geom.num_cells() % 8) != 0 {
                    return Err(QmdError::Format("bits set beyond the last cell".into()));
                }
                Ok(set)
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
