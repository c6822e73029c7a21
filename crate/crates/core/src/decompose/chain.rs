//! Chains through `E` between two of its cells, the straight-line
//! construction and a shortest-path fallback.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use num_integer::Roots;
use serde::{Deserialize, Serialize};

use crate::dyadic::{CellBox, DyadicCube, GridGeometry, GridPoint, Region, MAX_DIM};
use crate::error::{QmdError, Result};
use crate::gridset::GridSet;
use crate::rational::Rational;
use crate::scalar::{CompensatedSum, Real};

/// Fixed-point scale for certified bounds on sums of square roots.
const FIX_BITS: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainMethod {
    /// Points nearest to the segment, inside `7Q`.
    Construction,
    /// The same with more points, nearest in all of `E`.
    Refined,
    /// Shortest path over the cells of `E`.
    Search,
    /// No chain found.
    None,
}

/// `z_0 = x, ..., z_P = y` with its step and length checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Chain<T> {
    /// Dictionary-order cell indices.
    pub points: Vec<usize>,
    /// Step lengths in the unit-cube metric.
    pub steps: Vec<T>,
    pub length: T,
    pub max_step: T,
    pub distance: T,
    /// `max step < δ|x-y|`, decided exactly.
    pub step_ok: bool,
    /// `length <= (1+δ)|x-y|`, decided on certified bounds.
    pub length_ok: bool,
    /// Both checks with `2 sqrt(d) 2^-L` added to the right-hand sides.
    pub step_ok_slack: bool,
    pub length_ok_slack: bool,
    pub method: ChainMethod,
}

impl<T: Real> Chain<T> {
    pub fn passes(&self) -> bool {
        self.step_ok && self.length_ok
    }

    pub fn passes_with_slack(&self) -> bool {
        self.step_ok_slack && self.length_ok_slack
    }

    /// Evaluates a chain given by its cells.
    pub fn measure(geom: &GridGeometry, points: Vec<usize>, delta: &Rational, method: ChainMethod) -> Self {
        let pts: Vec<GridPoint> = points.iter().map(|&i| geom.point(i)).collect();
        let cell = T::of_int(geom.side() as i128);
        let sq: Vec<i64> = pts.windows(2).map(|w| w[0].sq_dist(&w[1])).collect();
        let xy_sq = pts[0].sq_dist(pts.last().expect("nonempty"));
        let steps: Vec<T> = sq.iter().map(|&s| T::of_int(s as i128).sqrt() / cell).collect();
        let mut sum = CompensatedSum::<T>::new();
        sum.extend(steps.iter().copied());
        let length = sum.value();
        let max_step = steps.iter().copied().fold(T::zero(), T::max);
        let distance = T::of_int(xy_sq as i128).sqrt() / cell;

        // δ|x-y| > step  ⟺  δ² |x-y|² > step², all in cells².
        let d2 = delta * delta;
        let max_sq = sq.iter().copied().max().unwrap_or(0);
        let step_ok = d2 * Rational::from_integer(xy_sq as i128) > Rational::from_integer(max_sq as i128);
        let length_ok = length_within(&sq, xy_sq, delta);

        let slack = T::of(2.0 * (geom.dim() as f64).sqrt()) / cell;
        let dt = T::of_int(*delta.numer()) / T::of_int(*delta.denom());
        let step_ok_slack = step_ok || max_step < dt * distance + slack;
        let length_ok_slack = length_ok || length <= (T::one() + dt) * distance + slack;
        Self { points, steps, length, max_step, distance, step_ok, length_ok, step_ok_slack, length_ok_slack, method }
    }
}

/// `Σ sqrt(s_i) <= (1+δ) sqrt(s)` on fixed-point bounds: certified true when
/// the upper bound of the left side is below the lower bound of the right.
/// The rare undecided band is resolved on the midpoints.
fn length_within(steps_sq: &[i64], xy_sq: i64, delta: &Rational) -> bool {
    let scale = 1u128 << (2 * FIX_BITS);
    let mut lo = 0u128;
    let mut hi = 0u128;
    for &s in steps_sq {
        let v = s as u128 * scale;
        let r = v.sqrt();
        lo += r;
        hi += if r * r == v { r } else { r + 1 };
    }
    let v = xy_sq as u128 * scale;
    let r = v.sqrt();
    let (rl, rh) = (r, if r * r == v { r } else { r + 1 });
    let num = (*delta.denom() + *delta.numer()) as u128;
    let den = *delta.denom() as u128;
    // hi <= num/den * rl  or  lo > num/den * rh decide.
    if hi * den <= num * rl {
        true
    } else if lo * den > num * rh {
        false
    } else {
        (lo + hi) * den <= num * (rl + rh)
    }
}

/// Segment point `x + (i/P)(y - x)` scaled by `2P` in cell units, where a
/// cell `c` has scaled center `P(2c+1)`.
fn segment_point(x: &GridPoint, y: &GridPoint, i: u64, p: u64) -> [i64; MAX_DIM] {
    let mut out = [0i64; MAX_DIM];
    let p = p as i64;
    let i = i as i64;
    for (j, o) in out.iter_mut().enumerate().take(x.dim()) {
        *o = p * (2 * x.coords()[j] + 1) + 2 * i * (y.coords()[j] - x.coords()[j]);
    }
    out
}

/// Nearest cell of `e` inside `allowed` to a scaled point, ties by index.
fn nearest_in(e: &GridSet, allowed: &CellBox, target: &[i64], p: u64) -> Option<usize> {
    let geom = e.geometry();
    let d = geom.dim();
    let p = p as i64;
    let base: Vec<i64> = (0..d).map(|j| target[j].div_euclid(2 * p)).collect();
    let mut best: Option<(i128, usize)> = None;
    let max_r =
        (0..d).map(|j| (base[j] - allowed.lo()[j]).max(allowed.hi()[j] - 1 - base[j])).max().unwrap_or(0).max(0);
    for rho in 0..=max_r {
        if let Some((b, _)) = best {
            let lb = (p * (2 * rho - 1)) as i128;
            if rho > 0 && lb * lb >= b {
                break;
            }
        }
        let lo: Vec<i64> = (0..d).map(|j| (base[j] - rho).max(allowed.lo()[j])).collect();
        let hi: Vec<i64> = (0..d).map(|j| (base[j] + rho + 1).min(allowed.hi()[j])).collect();
        let ring = CellBox::new(&lo, &hi);
        for c in ring.points() {
            let cheb = (0..d).map(|j| (c.coords()[j] - base[j]).abs()).max().unwrap_or(0);
            if cheb != rho {
                continue;
            }
            let idx = geom.index_of(&c);
            if !e.contains(idx) {
                continue;
            }
            let dist: i128 = (0..d)
                .map(|j| {
                    let v = (p * (2 * c.coords()[j] + 1) - target[j]) as i128;
                    v * v
                })
                .sum();
            if best.is_none_or(|(b, bi)| dist < b || (dist == b && idx < bi)) {
                best = Some((dist, idx));
            }
        }
    }
    best.map(|(_, i)| i)
}

/// The straight-line chain: `z_i` is the cell of `E` nearest to the point
/// `x + (i/P)(y - x)` within `7Q` (clipped), ties by index.
pub fn build_chain<T: Real>(
    e: &GridSet,
    x: usize,
    y: usize,
    q: &DyadicCube,
    p: u64,
    delta: &Rational,
) -> Result<Chain<T>> {
    let geom = e.geometry();
    let allowed = Region { cube: *q, factor: 7, clip: true }.cell_box(geom);
    chain_through(e, x, y, &allowed, p, delta, ChainMethod::Construction)
}

fn chain_through<T: Real>(
    e: &GridSet,
    x: usize,
    y: usize,
    allowed: &CellBox,
    p: u64,
    delta: &Rational,
    method: ChainMethod,
) -> Result<Chain<T>> {
    let geom = e.geometry();
    let (px, py) = (geom.point(x), geom.point(y));
    let mut points = vec![x];
    for i in 1..p {
        let t = segment_point(&px, &py, i, p);
        points.push(nearest_in(e, allowed, &t[..geom.dim()], p).ok_or(QmdError::EmptyRegion)?);
    }
    points.push(y);
    Ok(Chain::measure(geom, points, delta, method))
}

/// Straight-line chains with `2P` and `4P` points, nearest in all of `E`.
pub fn refined_chain<T: Real>(e: &GridSet, x: usize, y: usize, p: u64, delta: &Rational) -> Option<Chain<T>> {
    let all = e.geometry().unit_box();
    [2 * p, 4 * p]
        .into_iter()
        .filter_map(|pp| chain_through::<T>(e, x, y, &all, pp, delta, ChainMethod::Refined).ok())
        .find(|c| c.passes())
}

/// Shortest path from `x` to `y` over cells of `E` with every step shorter
/// than `δ|x-y|` (plus `extra` cells when given). Gives up after `cap`
/// expansions.
pub fn search_chain<T: Real>(
    e: &GridSet,
    x: usize,
    y: usize,
    delta: &Rational,
    extra_cells: f64,
    cap: usize,
) -> Option<Chain<T>> {
    let geom = *e.geometry();
    let d = geom.dim();
    let (px, py) = (geom.point(x), geom.point(y));
    let xy = (px.sq_dist(&py) as f64).sqrt();
    let dt = *delta.numer() as f64 / *delta.denom() as f64;
    let step_sq = Rational::from_integer(px.sq_dist(&py) as i128) * delta * delta;
    let slack_bound = dt * xy + extra_cells;
    let reach =
        if extra_cells > 0.0 { slack_bound.ceil() as i64 } else { crate::rational::ceil_sqrt_rational(&step_sq) };
    let allowed = |s: i64| {
        if extra_cells > 0.0 {
            (s as f64).sqrt() < slack_bound
        } else {
            Rational::from_integer(s as i128) < step_sq
        }
    };
    let budget = (1.0 + dt) * xy + extra_cells;

    #[derive(PartialEq)]
    struct Key(f64, usize);
    impl Eq for Key {}
    impl PartialOrd for Key {
        fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Key {
        fn cmp(&self, o: &Self) -> Ordering {
            self.0.total_cmp(&o.0).then(self.1.cmp(&o.1))
        }
    }

    let h = |p: &GridPoint| (p.sq_dist(&py) as f64).sqrt();
    let mut g_cost = vec![f64::INFINITY; geom.num_cells()];
    let mut parent = vec![usize::MAX; geom.num_cells()];
    let mut heap = BinaryHeap::new();
    g_cost[x] = 0.0;
    heap.push(Reverse(Key(h(&px), x)));
    let mut expanded = 0usize;
    while let Some(Reverse(Key(f, u))) = heap.pop() {
        let pu = geom.point(u);
        if f > g_cost[u] + h(&pu) + 1e-9 {
            continue;
        }
        if u == y {
            break;
        }
        if f > budget * (1.0 + 1e-12) {
            return None;
        }
        expanded += 1;
        if expanded > cap {
            return None;
        }
        let lo: Vec<i64> = (0..d).map(|j| (pu.coords()[j] - reach).max(0)).collect();
        let hi: Vec<i64> = (0..d).map(|j| (pu.coords()[j] + reach + 1).min(geom.side())).collect();
        for v in CellBox::new(&lo, &hi).points() {
            let vi = geom.index_of(&v);
            if vi == u || !e.contains(vi) {
                continue;
            }
            let s = pu.sq_dist(&v);
            if !allowed(s) {
                continue;
            }
            let cand = g_cost[u] + (s as f64).sqrt();
            if cand < g_cost[vi] {
                g_cost[vi] = cand;
                parent[vi] = u;
                heap.push(Reverse(Key(cand + h(&v), vi)));
            }
        }
    }
    if !g_cost[y].is_finite() {
        return None;
    }
    let mut path = vec![y];
    while *path.last().expect("nonempty") != x {
        path.push(parent[*path.last().expect("nonempty")]);
    }
    path.reverse();
    Some(Chain::measure(&geom, path, delta, ChainMethod::Search))
}
