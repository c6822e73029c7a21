//! Brute-force reference implementations, written straight from the
//! definitions with plain loops. Slow on purpose and capped in size.
//!
//! Only the domain types are shared with the rest of the crate.

use crate::dyadic::{DyadicCube, GridGeometry, GridPoint};
use crate::error::{QmdError, Result};
use crate::gridset::GridSet;
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    pub max_dim: usize,
    pub max_level: u32,
    pub max_family: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { max_dim: 2, max_level: 6, max_family: 100_000, seed: 0 }
    }
}

impl OracleConfig {
    fn check(&self, geom: &GridGeometry) -> Result<()> {
        if geom.dim() > self.max_dim || geom.level() > self.max_level {
            return Err(QmdError::CapExceeded(format!(
                "dimension {} level {} above ({}, {})",
                geom.dim(),
                geom.level(),
                self.max_dim,
                self.max_level
            )));
        }
        Ok(())
    }

    fn check_family(&self, n: usize) -> Result<()> {
        if n > self.max_family {
            return Err(QmdError::CapExceeded(format!("family of {n} regions above {}", self.max_family)));
        }
        Ok(())
    }
}

/// A region given by its defining data.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleRegion {
    /// Closed ball of radius `sqrt(a2) 2^-level` around a cell center.
    Ball { center: usize, level: u32, a2: Rational },
    /// `7Q`, optionally cut to the unit cube.
    Cube7 { cube: DyadicCube, clip: bool },
}

fn sq(a: &GridPoint, b: &GridPoint) -> i64 {
    a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Every lattice point of the region (including virtual points outside the
/// unit cube for unclipped `7Q`), and the squared scale in cells².
fn region_points(geom: &GridGeometry, region: &OracleRegion) -> (Vec<GridPoint>, Rational) {
    let n = geom.side();
    let d = geom.dim();
    match region {
        OracleRegion::Ball { center, level, a2 } => {
            let c = geom.point(*center);
            let r2 = a2 * Rational::from_integer(1i128 << (2 * (geom.level() - level)));
            let mut pts = Vec::new();
            for i in 0..geom.num_cells() {
                let p = geom.point(i);
                if Rational::from_integer(sq(&p, &c) as i128) <= r2 {
                    pts.push(p);
                }
            }
            (pts, r2)
        }
        OracleRegion::Cube7 { cube, clip } => {
            let s = n >> cube.level();
            let (lo, hi): (Vec<i64>, Vec<i64>) = cube
                .corner()
                .iter()
                .map(|&a| {
                    let (l, h) = ((a - 3) * s, (a + 4) * s);
                    if *clip {
                        (l.max(0), h.min(n))
                    } else {
                        (l, h)
                    }
                })
                .unzip();
            let mut pts = Vec::new();
            let mut cur = lo.clone();
            'outer: loop {
                pts.push(GridPoint::new(&cur));
                for j in 0..d {
                    cur[j] += 1;
                    if cur[j] < hi[j] {
                        continue 'outer;
                    }
                    cur[j] = lo[j];
                }
                break;
            }
            let side = 7 * s as i128;
            (pts, Rational::from_integer(side * side))
        }
    }
}

fn in_grid(geom: &GridGeometry, p: &GridPoint) -> bool {
    p.coords().iter().all(|&c| (0..geom.side()).contains(&c))
}

/// `sup_{x ∈ R} dist(x, E ∩ R)²` in cells² and the squared scale; `None`
/// when `E ∩ R` is empty.
pub fn oracle_sparsity(cfg: &OracleConfig, e: &GridSet, region: &OracleRegion) -> Result<Option<(i64, Rational)>> {
    let geom = *e.geometry();
    cfg.check(&geom)?;
    let (pts, scale_sq) = region_points(&geom, region);
    let sites: Vec<&GridPoint> = pts.iter().filter(|p| in_grid(&geom, p) && e.contains(geom.index_of(p))).collect();
    if sites.is_empty() {
        return Ok(None);
    }
    let mut sup = 0i64;
    for x in &pts {
        let mut best = i64::MAX;
        for y in &sites {
            best = best.min(sq(x, y));
        }
        sup = sup.max(best);
    }
    Ok(Some((sup, scale_sq)))
}

/// `d_E(B)`: mean over lattice points of `B` of `dist(x, E) / r`.
pub fn oracle_avg_dist(cfg: &OracleConfig, e: &GridSet, center: usize, level: u32, a2: &Rational) -> Result<f64> {
    let geom = *e.geometry();
    cfg.check(&geom)?;
    let region = OracleRegion::Ball { center, level, a2: *a2 };
    let (pts, r2) = region_points(&geom, &region);
    if pts.is_empty() {
        return Err(QmdError::EmptyBall);
    }
    let all: Vec<GridPoint> = e.points().collect();
    if all.is_empty() {
        return Err(QmdError::EmptySet);
    }
    let r = (*r2.numer() as f64 / *r2.denom() as f64).sqrt();
    let mut total = 0.0f64;
    for x in &pts {
        let best = all.iter().map(|y| sq(x, y)).min().expect("nonempty");
        total += (best as f64).sqrt() / r;
    }
    Ok(total / pts.len() as f64)
}

fn ge_eps(sup: i64, scale_sq: &Rational, eps: &Rational) -> bool {
    Rational::from_integer(sup as i128) >= eps * eps * scale_sq
}

fn all_cubes(geom: &GridGeometry) -> Vec<DyadicCube> {
    let d = geom.dim();
    let mut out = Vec::new();
    for k in 0..=geom.level() {
        let per = 1i64 << k;
        for mut i in 0..per.pow(d as u32) {
            let mut corner = Vec::with_capacity(d);
            for _ in 0..d {
                corner.push(i % per);
                i /= per;
            }
            out.push(DyadicCube::new(k, &corner));
        }
    }
    out
}

fn triple_meets(geom: &GridGeometry, q: &DyadicCube, e: &GridSet) -> bool {
    let s = geom.side() >> q.level();
    e.points().any(|p| p.coords().iter().zip(q.corner()).all(|(&c, &a)| c >= (a - 1) * s && c < (a + 2) * s))
}

/// Bad cubes: `3Q ∩ E ≠ ∅` and `sparse(E, 7Q) >= ε`.
pub fn oracle_bad_cubes(cfg: &OracleConfig, e: &GridSet, eps: &Rational, clip: bool) -> Result<Vec<DyadicCube>> {
    let geom = *e.geometry();
    cfg.check(&geom)?;
    let cubes = all_cubes(&geom);
    cfg.check_family(cubes.len())?;
    let mut out = Vec::new();
    for q in cubes {
        if !triple_meets(&geom, &q, e) {
            continue;
        }
        if let Some((sup, s2)) = oracle_sparsity(cfg, e, &OracleRegion::Cube7 { cube: q, clip })? {
            if ge_eps(sup, &s2, eps) {
                out.push(q);
            }
        }
    }
    Ok(out)
}

/// `Σ λ(Q)` over bad cubes.
pub fn oracle_carleson_cubes(cfg: &OracleConfig, e: &GridSet, eps: &Rational, clip: bool) -> Result<Rational> {
    let cubes = oracle_bad_cubes(cfg, e, eps, clip)?;
    let d = e.geometry().dim() as u32;
    Ok(cubes.iter().map(|q| Rational::new(1, 1i128 << (q.level() * d))).sum())
}

/// `Σ μ(B)` over balls meeting `E` with sparsity at least `ε`; `centers[k]`
/// lists the level-`k` centers.
pub fn oracle_carleson_balls(
    cfg: &OracleConfig,
    e: &GridSet,
    eps: &Rational,
    centers: &[Vec<usize>],
    a2: &Rational,
) -> Result<Rational> {
    let geom = *e.geometry();
    cfg.check(&geom)?;
    cfg.check_family(centers.iter().map(Vec::len).sum())?;
    let mut total = Rational::from_integer(0);
    for (k, level) in centers.iter().enumerate() {
        for &c in level {
            let region = OracleRegion::Ball { center: c, level: k as u32, a2: *a2 };
            if let Some((sup, r2)) = oracle_sparsity(cfg, e, &region)? {
                if ge_eps(sup, &r2, eps) {
                    let (pts, _) = region_points(&geom, &region);
                    total += Rational::new(pts.len() as i128, geom.num_cells() as i128);
                }
            }
        }
    }
    Ok(total)
}

/// Per cell, the number of bad cubes whose `7Q` holds it.
pub fn oracle_cover_counts(cfg: &OracleConfig, e: &GridSet, eps: &Rational, clip: bool) -> Result<Vec<u32>> {
    let geom = *e.geometry();
    let bad = oracle_bad_cubes(cfg, e, eps, clip)?;
    let mut counts = vec![0u32; geom.num_cells()];
    for (i, c) in counts.iter_mut().enumerate() {
        let p = geom.point(i);
        for q in &bad {
            let s = geom.side() >> q.level();
            if p.coords().iter().zip(q.corner()).all(|(&x, &a)| x >= (a - 3) * s && x < (a + 4) * s) {
                *c += 1;
            }
        }
    }
    Ok(counts)
}

/// Finest cube (smallest corner on ties) whose triple holds both points.
pub fn oracle_min_cube(cfg: &OracleConfig, geom: &GridGeometry, x: &GridPoint, y: &GridPoint) -> Result<DyadicCube> {
    cfg.check(geom)?;
    let cubes = all_cubes(geom);
    for k in (0..=geom.level()).rev() {
        let s = geom.side() >> k;
        let holds = |q: &DyadicCube, p: &GridPoint| {
            p.coords().iter().zip(q.corner()).all(|(&c, &a)| c >= (a - 1) * s && c < (a + 2) * s)
        };
        if let Some(q) = cubes.iter().find(|q| q.level() == k && holds(q, x) && holds(q, y)) {
            return Ok(*q);
        }
    }
    unreachable!("the unit cube holds every point")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainVerdict {
    pub in_set: bool,
    pub endpoints: bool,
    pub step_ok: bool,
    pub length_ok: bool,
}

/// Checks a chain of cell indices from `x` to `y` through `e` against the
/// step bound `δ|x-y|` and the length bound `(1+δ)|x-y|`.
pub fn oracle_chain_check(
    cfg: &OracleConfig,
    e: &GridSet,
    chain: &[usize],
    x: usize,
    y: usize,
    delta: &Rational,
) -> Result<ChainVerdict> {
    let geom = *e.geometry();
    cfg.check(&geom)?;
    let pts: Vec<GridPoint> = chain.iter().map(|&i| geom.point(i)).collect();
    let xy = sq(&geom.point(x), &geom.point(y));
    let dl = *delta.numer() as f64 / *delta.denom() as f64;
    let mut step_ok = true;
    let mut length = 0.0f64;
    for w in pts.windows(2) {
        let s = sq(&w[0], &w[1]);
        step_ok &= Rational::from_integer(s as i128) < delta * delta * Rational::from_integer(xy as i128);
        length += (s as f64).sqrt();
    }
    Ok(ChainVerdict {
        in_set: chain.iter().all(|&i| e.contains(i)),
        endpoints: chain.first() == Some(&x) && chain.last() == Some(&y),
        step_ok,
        length_ok: length <= (1.0 + dl) * (xy as f64).sqrt() * (1.0 + 1e-12),
    })
}
