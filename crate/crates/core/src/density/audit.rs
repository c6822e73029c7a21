//! Per-ball and per-cube audits of the inequalities behind the packing bounds.

use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicCube, GridGeometry, Region};
use crate::edt::EdtWorkspace;
use crate::error::Result;
use crate::gridset::GridSet;
use crate::multires::{Ball, NestedNets, ScaleConstant};
use crate::rational::{big_to_f64, serde_big, serde_rational, to_big, Rational};
use crate::scalar::{CompensatedSum, Real};

use super::constants::{cx_of, delta_of, measure_doubling_constant};
use super::sparsity::{ball_sup_sq, cube_scale_sq, region_sup_sq, SparsityValue};
use super::sweep::BallSweep;

const SAMPLE_CAP: usize = 16;

/// One ball that breaks an audited implication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BallWitness {
    pub level: u32,
    pub center: usize,
    pub avg_dist: f64,
    pub sparsity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SmallAverageAudit {
    #[serde(with = "serde_rational")]
    pub epsilon: Rational,
    #[serde(with = "serde_big")]
    pub delta: BigRational,
    /// Balls meeting `E`.
    pub checked: u64,
    /// Of those, balls with `d_E(B) < δ`.
    pub below_delta: u64,
    /// `d_E(B) < δ` but `sparsity >= ε + slack`.
    pub violations: u64,
    /// `sparsity >= ε` but `d_E(B) < δ - slack`.
    pub contrapositive_violations: u64,
    pub sample: Vec<BallWitness>,
}

impl SmallAverageAudit {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.contrapositive_violations == 0
    }
}

/// Checks, for every ball of the sweep meeting `E`, that a small averaged
/// distance `d_E(B) < δ(ε, 2^d)` forces `sparsity < ε` up to the lattice slack.
pub fn small_average_audit<T: Real>(sweep: &BallSweep<T>, eps: &Rational) -> Result<SmallAverageAudit> {
    let geom = sweep.geometry();
    let delta = delta_of(&to_big(eps), measure_doubling_constant(geom.dim()))?;
    let delta_t = T::of(big_to_f64(&delta));
    let eps_t = T::of_int(*eps.numer()) / T::of_int(*eps.denom());
    let mut out = SmallAverageAudit {
        epsilon: *eps,
        delta,
        checked: 0,
        below_delta: 0,
        violations: 0,
        contrapositive_violations: 0,
        sample: Vec::new(),
    };
    for k in 0..=geom.level() {
        for (i, b) in sweep.level(k).iter().enumerate() {
            let Some(s) = sweep.sparsity(k, i) else { continue };
            out.checked += 1;
            let avg = sweep.avg_dist(k, i);
            let value = s.value::<T>();
            let slack = s.slack::<T>();
            let mut bad = false;
            if avg < delta_t {
                out.below_delta += 1;
                if value >= eps_t + slack {
                    out.violations += 1;
                    bad = true;
                }
            }
            if s.at_least(eps) && avg < delta_t - slack {
                out.contrapositive_violations += 1;
                bad = true;
            }
            if bad && out.sample.len() < SAMPLE_CAP {
                out.sample.push(BallWitness {
                    level: k,
                    center: b.center,
                    avg_dist: avg.to_f64_lossy(),
                    sparsity: value.to_f64_lossy(),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AverageSumAudit {
    /// Cumulative `Σ_{k <= t} Σ_{B ∩ E ≠ ∅} d_E(B) μ(B)` for `t = 0..=L`.
    pub cumulative: Vec<f64>,
    #[serde(with = "serde_big")]
    pub cx: BigRational,
    pub passed: bool,
}

/// `Σ d_E(B) μ(B)` over balls meeting `E`, against `C_X = 4M`, at every
/// truncation level.
pub fn average_sum_audit<T: Real>(sweep: &BallSweep<T>) -> AverageSumAudit {
    let geom = sweep.geometry();
    let cx = cx_of(geom.dim(), &sweep.scale());
    let cx_f = big_to_f64(&cx);
    let mut total = CompensatedSum::<T>::new();
    let mut cumulative = Vec::new();
    for k in 0..=geom.level() {
        for (i, b) in sweep.level(k).iter().enumerate() {
            if b.touches {
                let mu = sweep.measure(k, i);
                total.add(sweep.avg_dist(k, i) * T::of_int(*mu.numer()) / T::of_int(*mu.denom()));
            }
        }
        cumulative.push(total.value().to_f64_lossy());
    }
    let passed = cumulative.iter().all(|&v| v <= cx_f);
    AverageSumAudit { cumulative, cx, passed }
}

/// The first level-`k` net point, in dictionary order, whose ball of radius
/// `7 sqrt(d) 2^-k` contains every corner of `7Q` (clipped per the flag).
pub fn enclosing_ball(nets: &NestedNets, q: &DyadicCube, clip: bool) -> Option<Ball> {
    let geom = nets.geometry();
    let d = geom.dim();
    let k = q.level();
    let bounds = Region { cube: *q, factor: 7, clip }.cell_box(geom);
    // Doubled coordinates: corners at 2 b, cell centers at 2 c + 1.
    let r2x4 = 4 * 49 * d as i128 * (geom.cube_cells(k) as i128).pow(2);
    let mut centers: Vec<usize> = nets.level(k).to_vec();
    centers.sort_unstable();
    let scale = ScaleConstant::seven_sqrt_d(d);
    centers.into_iter().map(|i| geom.point(i)).find_map(|c| {
        let fits = (0..1usize << d).all(|mask| {
            (0..d)
                .map(|j| {
                    let b = if mask >> j & 1 == 1 { bounds.hi()[j] } else { bounds.lo()[j] };
                    let v = 2 * (b as i128) - (2 * c.coords()[j] as i128 + 1);
                    v * v
                })
                .sum::<i128>()
                <= r2x4
        });
        fits.then_some(Ball { center: c, level: k, scale })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EnclosureWitness {
    pub cube: String,
    pub cube_sparsity: f64,
    pub ball_sparsity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EnclosureAudit {
    pub clip: bool,
    /// Cubes with `E ∩ 7Q ≠ ∅`.
    pub checked: u64,
    /// Cubes for which no enclosing net ball was found.
    pub missing_ball: u64,
    /// Cubes with `sparse(E,7Q) > sqrt(d)(d+1) sparse(E,B_Q) + slack`.
    pub violations: u64,
    pub sample: Vec<EnclosureWitness>,
}

impl EnclosureAudit {
    pub fn passed(&self) -> bool {
        self.missing_ball == 0 && self.violations == 0
    }
}

/// Checks `sparse(E,7Q) <= (A(d+1)/7) sparse(E,B_Q)` with `A = 7 sqrt(d)` for
/// every cube with `E ∩ 7Q ≠ ∅`, up to the slack of both sides.
pub fn enclosure_audit(e: &GridSet, nets: &NestedNets, clip: bool) -> EnclosureAudit {
    let geom: GridGeometry = *e.geometry();
    let d = geom.dim();
    let factor = (d as f64).sqrt() * (d as f64 + 1.0);
    let mut out = EnclosureAudit { clip, checked: 0, missing_ball: 0, violations: 0, sample: Vec::new() };
    for k in 0..=geom.level() {
        let cubes: Vec<DyadicCube> = geom.cubes_at(k).collect();
        let rows: Vec<Option<(DyadicCube, Option<(SparsityValue, SparsityValue)>)>> = cubes
            .par_iter()
            .map_init(EdtWorkspace::new, |ws, q| {
                let sup_sq = region_sup_sq(ws, e, &Region { cube: *q, factor: 7, clip })?;
                let cube_s = SparsityValue { sup_sq, scale_sq: cube_scale_sq(&geom, k), dim: d };
                let pair = enclosing_ball(nets, q, clip).and_then(|b| {
                    let ball_sup = ball_sup_sq(ws, e, &b)?;
                    Some((cube_s, SparsityValue { sup_sq: ball_sup, scale_sq: b.radius_sq_cells(&geom), dim: d }))
                });
                Some((*q, pair))
            })
            .collect();
        for (q, pair) in rows.into_iter().flatten() {
            out.checked += 1;
            let Some((cs, bs)) = pair else {
                out.missing_ball += 1;
                continue;
            };
            let lhs = cs.value::<f64>();
            let rhs = factor * bs.value::<f64>() + cs.slack::<f64>() + factor * bs.slack::<f64>();
            if lhs > rhs {
                out.violations += 1;
                if out.sample.len() < SAMPLE_CAP {
                    out.sample.push(EnclosureWitness {
                        cube: q.to_string(),
                        cube_sparsity: lhs,
                        ball_sparsity: bs.value::<f64>(),
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridset::{corpus, gen_counterexample};
    use crate::multires::{build_nets, MultiresFamily};

    #[test]
    fn small_average_implies_dense_on_corpus() {
        for (d, l) in [(1, 6), (2, 4)] {
            let g = GridGeometry::new(d, l).unwrap();
            let fam = MultiresFamily::build(&g, ScaleConstant::one());
            for (name, e) in corpus(g) {
                let sweep = BallSweep::<f64>::new(&e, &fam).unwrap();
                for eps in [Rational::new(1, 2), Rational::new(1, 4), Rational::new(1, 10)] {
                    let a = small_average_audit(&sweep, &eps).unwrap();
                    assert!(a.passed(), "{name} {eps}: {a:?}");
                }
                assert!(average_sum_audit(&sweep).passed, "{name}");
            }
        }
    }

    #[test]
    fn enclosing_ball_always_exists() {
        let g = GridGeometry::new(2, 4).unwrap();
        let nets = build_nets(&g);
        for k in 0..=4 {
            for q in g.cubes_at(k) {
                for clip in [true, false] {
                    let b = enclosing_ball(&nets, &q, clip).expect("net covers");
                    let bx = Region { cube: q, factor: 7, clip: true }.cell_box(&g);
                    assert!(bx.points().all(|p| b.contains(&g, &p)));
                }
            }
        }
    }

    #[test]
    fn enclosure_inequality_holds() {
        let e = gen_counterexample(2, 7).unwrap();
        let a = enclosure_audit(&e, &build_nets(e.geometry()), true);
        assert!(a.passed(), "{a:?}");
        assert!(a.checked > 0);
    }
}
