//! Measure density of `E_k` over grid-aligned intervals.

use serde::{Deserialize, Serialize};

use crate::error::{QmdError, Result};
use crate::gridset::gen_counterexample;
use crate::rational::{serde_rational, Rational};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RadiusRow {
    /// Radius in cells.
    pub r_cells: u64,
    #[serde(with = "serde_rational")]
    pub r: Rational,
    #[serde(with = "serde_rational")]
    pub max_density: Rational,
    /// Center (in cells) of the first interval attaining the maximum.
    pub argmax_x_cells: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CounterexampleAudit {
    pub k: u32,
    pub level: u32,
    #[serde(with = "serde_rational")]
    pub epsilon: Rational,
    #[serde(with = "serde_rational")]
    pub r0: Rational,
    /// Rows for every swept radius `r >= r0`.
    pub rows: Vec<RadiusRow>,
    #[serde(with = "serde_rational")]
    pub max_density: Rational,
    #[serde(with = "serde_rational")]
    pub argmax_x: Rational,
    #[serde(with = "serde_rational")]
    pub argmax_r: Rational,
    #[serde(with = "serde_rational")]
    pub bound: Rational,
    /// `max_density <= 7/8`.
    pub within_bound: bool,
    /// `max_density < 1 - ε`.
    pub below_threshold: bool,
    /// Dyadic intervals checked for half density.
    pub dyadic_checked: u64,
    pub dyadic_half: bool,
    /// Max density over radii below `r0`; not covered by the bound.
    #[serde(with = "serde_rational")]
    pub small_radius_max: Rational,
}

impl CounterexampleAudit {
    pub fn passed(&self) -> bool {
        self.within_bound && self.below_threshold && self.dyadic_half
    }
}

/// Sweeps `[x - r, x + r] ∩ [0,1]` for `x = i 2^-L`, `r = j 2^-L`, `r0 <= r <= 1`
/// with `r0 = 2^-k`, computing `λ(E_k ∩ I) / λ(I)` exactly.
pub fn counterexample_audit(k: u32, level: u32, eps: &Rational) -> Result<CounterexampleAudit> {
    if *eps <= Rational::from_integer(0) || *eps >= Rational::from_integer(1) {
        return Err(QmdError::Domain(format!("epsilon {eps} not in (0,1)")));
    }
    let e = gen_counterexample(k, level)?;
    let n = 1u64 << level;
    let mut prefix = vec![0u64; n as usize + 1];
    for i in 0..n as usize {
        prefix[i + 1] = prefix[i] + u64::from(e.contains(i));
    }
    let density = |x: u64, r: u64| {
        let lo = x.saturating_sub(r);
        let hi = (x + r).min(n);
        Rational::new((prefix[hi as usize] - prefix[lo as usize]) as i128, (hi - lo) as i128)
    };
    let best_at = |r: u64| {
        let mut best = (Rational::from_integer(-1), 0u64);
        for x in 0..=n {
            let v = density(x, r);
            if v > best.0 {
                best = (v, x);
            }
        }
        best
    };
    let cell = |c: u64| Rational::new(c as i128, n as i128);

    let r0_cells = n >> k;
    let rows: Vec<RadiusRow> = (r0_cells..=n)
        .map(|r| {
            let (max_density, x) = best_at(r);
            RadiusRow { r_cells: r, r: cell(r), max_density, argmax_x_cells: x }
        })
        .collect();
    let top = rows.iter().fold(&rows[0], |a, b| if b.max_density > a.max_density { b } else { a });

    let mut dyadic_checked = 0;
    let mut dyadic_half = true;
    for j in 0..=k + 1 {
        let len = n >> j;
        for s in 0..1u64 << j {
            let count = prefix[((s + 1) * len) as usize] - prefix[(s * len) as usize];
            dyadic_checked += 1;
            dyadic_half &= 2 * count == len;
        }
    }

    let small_radius_max = (1..r0_cells).map(|r| best_at(r).0).max().unwrap_or_else(|| Rational::from_integer(0));
    let bound = Rational::new(7, 8);
    Ok(CounterexampleAudit {
        k,
        level,
        epsilon: *eps,
        r0: cell(r0_cells),
        max_density: top.max_density,
        argmax_x: cell(top.argmax_x_cells),
        argmax_r: top.r,
        within_bound: top.max_density <= bound,
        below_threshold: top.max_density < Rational::from_integer(1) - eps,
        bound,
        rows,
        dyadic_checked,
        dyadic_half,
        small_radius_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases_pass() {
        for k in 1..=4 {
            let a = counterexample_audit(k, k + 4, &Rational::new(1, 10)).unwrap();
            assert!(a.passed(), "{k}");
            assert_eq!(a.small_radius_max, Rational::from_integer(1));
            assert_eq!(a.dyadic_checked, (1u64 << (k + 2)) - 1);
        }
    }

    #[test]
    fn quarter_interval_has_half_density() {
        // E_1 ∩ [0, 1/4) = [0, 1/8).
        let e = gen_counterexample(1, 5).unwrap();
        assert_eq!((0..8).filter(|&i| e.contains(i)).count(), 4);
    }

    #[test]
    fn known_maximum_k1() {
        // r = 1/2 at L = 5: interval [0, 1/2] clipped holds 2 full blocks of 4.
        let a = counterexample_audit(1, 5, &Rational::new(1, 10)).unwrap();
        assert_eq!(a.rows[0].r, Rational::new(1, 2));
        assert!(a.max_density >= Rational::new(1, 2));
        assert!(a.max_density <= Rational::new(3, 5));
    }

    #[test]
    fn rejects_coarse_levels() {
        assert!(counterexample_audit(3, 4, &Rational::new(1, 10)).is_err());
    }
}
