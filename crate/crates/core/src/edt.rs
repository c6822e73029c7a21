//! Exact squared Euclidean distance transform on integer boxes.
//!
//! Separable lower-envelope algorithm (Felzenszwalb–Huttenlocher) restricted
//! to integer query positions, so every breakpoint is an integer ceiling and
//! no floating point is involved.

use crate::dyadic::{CellBox, MAX_DIM};

pub const INF: i64 = i64::MAX;

/// Reusable buffers; one per worker.
#[derive(Debug, Default, Clone)]
pub struct EdtWorkspace {
    grid: Vec<i64>,
    line_in: Vec<i64>,
    line_out: Vec<i64>,
    hull: Vec<usize>,
    breaks: Vec<i64>,
}

fn ceil_div(num: i64, den: i64) -> i64 {
    debug_assert!(den > 0);
    num.div_euclid(den) + i64::from(num.rem_euclid(den) != 0)
}

/// `out[p] = min_q f[q] + (p - q)^2` over finite `f[q]`.
fn envelope(f: &[i64], out: &mut [i64], hull: &mut Vec<usize>, breaks: &mut Vec<i64>) {
    hull.clear();
    breaks.clear();
    for (q, &fq) in f.iter().enumerate() {
        if fq == INF {
            continue;
        }
        let qi = q as i64;
        loop {
            let Some(&u) = hull.last() else {
                hull.push(q);
                breaks.push(i64::MIN);
                break;
            };
            let ui = u as i64;
            // First integer p at which parabola q is no higher than parabola u.
            let b = ceil_div(fq - f[u] + qi * qi - ui * ui, 2 * (qi - ui));
            if b <= *breaks.last().unwrap() {
                hull.pop();
                breaks.pop();
                continue;
            }
            hull.push(q);
            breaks.push(b);
            break;
        }
    }
    if hull.is_empty() {
        out.fill(INF);
        return;
    }
    let mut k = 0;
    for (p, o) in out.iter_mut().enumerate() {
        let pi = p as i64;
        while k + 1 < hull.len() && breaks[k + 1] <= pi {
            k += 1;
        }
        let q = hull[k] as i64;
        *o = f[hull[k]] + (pi - q) * (pi - q);
    }
}

impl EdtWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Squared distance from every lattice point of `domain` to the nearest
    /// site, in the box's dictionary order (`INF` when there is no site).
    /// `is_site` is called with the offset of each point in that order.
    pub fn transform(&mut self, domain: &CellBox, is_site: impl Fn(usize) -> bool) -> &[i64] {
        let ext = domain.extents();
        let total = domain.len();
        self.grid.clear();
        self.grid.extend((0..total).map(|i| if is_site(i) { 0 } else { INF }));
        let mut stride = [0usize; MAX_DIM];
        let mut s = 1;
        for (i, st) in stride.iter_mut().enumerate().take(ext.len()) {
            *st = s;
            s *= ext[i];
        }
        for axis in 0..ext.len() {
            let n = ext[axis];
            if n <= 1 {
                continue;
            }
            let st = stride[axis];
            self.line_in.resize(n, 0);
            self.line_out.resize(n, 0);
            for base in 0..total {
                // Visit each line once, from its first point.
                if (base / st) % n != 0 {
                    continue;
                }
                for j in 0..n {
                    self.line_in[j] = self.grid[base + j * st];
                }
                envelope(&self.line_in, &mut self.line_out, &mut self.hull, &mut self.breaks);
                for j in 0..n {
                    self.grid[base + j * st] = self.line_out[j];
                }
            }
        }
        &self.grid
    }
}
