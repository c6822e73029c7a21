//! Carleson packing sums over the bad families of balls and cubes.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicCube, GridGeometry};
use crate::error::{QmdError, Result};
use crate::gridset::GridSet;
use crate::multires::{Ball, MultiresFamily, ScaleConstant};
use crate::rational::{serde_big, serde_rational, to_big, Rational};
use crate::scalar::Real;

use super::constants::{k_of, ktilde_of};
use super::sparsity::{sparsity_7q, sparsity_ball};
use super::sweep::{cube_at, BallSweep, CubeSweep};

/// Bad regions kept in a report before only the overflow count grows.
pub const BAD_SAMPLE_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilySpec {
    Balls {
        #[serde(rename = "A2", with = "serde_rational")]
        a2: Rational,
    },
    Cubes {
        clip: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LevelSum {
    pub k: u32,
    pub count: u64,
    #[serde(with = "serde_rational")]
    pub sum: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BadRegion {
    /// Cube literal for cube families, center cell index for balls.
    pub region: String,
    pub level: u32,
    pub sup_sq: i64,
    pub sparsity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CarlesonReport {
    #[serde(with = "serde_rational")]
    pub epsilon: Rational,
    pub family: FamilySpec,
    pub dimension: usize,
    pub level: u32,
    pub per_level: Vec<LevelSum>,
    #[serde(with = "serde_rational")]
    pub total: Rational,
    /// Sum over every region touching `E`, without the sparsity filter.
    pub unfiltered_per_level: Vec<LevelSum>,
    #[serde(with = "serde_rational")]
    pub unfiltered_total: Rational,
    #[serde(with = "serde_rational")]
    pub measure: Rational,
    #[serde(with = "serde_big")]
    pub theoretical_bound: BigRational,
    /// Cell diagonal `sqrt(d) 2^-L`; divide by a region's scale for its error bar.
    pub slack: f64,
    pub bad_sample: Vec<BadRegion>,
    pub bad_overflow: u64,
}

impl CarlesonReport {
    pub fn within_bound(&self) -> bool {
        to_big(&self.total) <= self.theoretical_bound
    }

    /// Re-derives each listed region from `e` and checks the totals add up.
    pub fn recheck(&self, e: &GridSet) -> Result<()> {
        let geom = e.geometry();
        if geom.dim() != self.dimension || geom.level() != self.level {
            return Err(QmdError::Format("report geometry differs from the set".into()));
        }
        let sum = |v: &[LevelSum]| v.iter().fold(Rational::from_integer(0), |a, l| a + l.sum);
        if sum(&self.per_level) != self.total || sum(&self.unfiltered_per_level) != self.unfiltered_total {
            return Err(QmdError::Format("total differs from the sum of its levels".into()));
        }
        for bad in &self.bad_sample {
            let s = match self.family {
                FamilySpec::Cubes { clip } => {
                    let q: DyadicCube = bad.region.parse()?;
                    let touches =
                        q.expansion_box(geom, 3).intersect(&geom.unit_box()).points().any(|p| e.contains_point(&p));
                    if !touches {
                        return Err(QmdError::Format(format!("3Q misses E for {}", bad.region)));
                    }
                    sparsity_7q(e, &q, clip)
                }
                FamilySpec::Balls { a2 } => {
                    let idx: usize = bad
                        .region
                        .parse()
                        .map_err(|_| QmdError::Format(format!("bad ball center {:?}", bad.region)))?;
                    if idx >= geom.num_cells() {
                        return Err(QmdError::Format(format!("ball center {idx} out of range")));
                    }
                    let scale = ScaleConstant::from_square(a2)?;
                    sparsity_ball(e, &Ball { center: geom.point(idx), level: bad.level, scale })
                }
            };
            match s {
                Some(s) if s.sup_sq == bad.sup_sq && s.at_least(&self.epsilon) => {}
                _ => return Err(QmdError::Format(format!("listed region {} is not bad", bad.region))),
            }
        }
        Ok(())
    }
}

fn slack(geom: &GridGeometry) -> f64 {
    (geom.dim() as f64).sqrt() / geom.side() as f64
}

fn check_eps(eps: &Rational) -> Result<()> {
    if *eps <= Rational::from_integer(0) || *eps >= Rational::from_integer(1) {
        return Err(QmdError::Domain(format!("epsilon {eps} not in (0,1)")));
    }
    Ok(())
}

/// `sum of μ(B)` over balls with `B ∩ E ≠ ∅` and `sparse(E, B) >= ε`.
pub fn carleson_sum_balls<T: Real>(sweep: &BallSweep<T>, eps: &Rational) -> Result<CarlesonReport> {
    check_eps(eps)?;
    let geom = *sweep.geometry();
    let cells = geom.num_cells() as i128;
    let mut per_level = Vec::new();
    let mut unfiltered = Vec::new();
    let mut sample = Vec::new();
    let mut overflow = 0u64;
    for k in 0..=geom.level() {
        let (mut bad_count, mut bad_pts, mut all_count, mut all_pts) = (0u64, 0i128, 0u64, 0i128);
        for (i, b) in sweep.level(k).iter().enumerate() {
            if !b.touches {
                continue;
            }
            all_count += 1;
            all_pts += b.count as i128;
            if sweep.is_bad(k, i, eps) {
                bad_count += 1;
                bad_pts += b.count as i128;
                if sample.len() < BAD_SAMPLE_CAP {
                    let s = sweep.sparsity(k, i).unwrap();
                    sample.push(BadRegion {
                        region: b.center.to_string(),
                        level: k,
                        sup_sq: s.sup_sq,
                        sparsity: s.value::<f64>(),
                    });
                } else {
                    overflow += 1;
                }
            }
        }
        per_level.push(LevelSum { k, count: bad_count, sum: Rational::new(bad_pts, cells) });
        unfiltered.push(LevelSum { k, count: all_count, sum: Rational::new(all_pts, cells) });
    }
    let scale = sweep.scale();
    finish(
        *eps,
        FamilySpec::Balls { a2: scale.square() },
        &geom,
        per_level,
        unfiltered,
        k_of(eps, geom.dim(), &scale)?,
        sample,
        overflow,
        sweep.set_measure(),
    )
}

/// `sum of λ(Q)` over cubes with `3Q ∩ E ≠ ∅` and `sparse(E, 7Q) >= ε`.
pub fn carleson_sum_cubes(sweep: &CubeSweep, eps: &Rational) -> Result<CarlesonReport> {
    check_eps(eps)?;
    let geom = *sweep.geometry();
    let mut per_level = Vec::new();
    let mut unfiltered = Vec::new();
    let mut sample = Vec::new();
    let mut overflow = 0u64;
    for k in 0..=geom.level() {
        let vol = Rational::new(1, 1i128 << (k as usize * geom.dim()));
        let (mut bad, mut all) = (0u64, 0u64);
        for (i, q) in sweep.level(k).iter().enumerate() {
            if !q.touches {
                continue;
            }
            all += 1;
            if sweep.is_bad(k, i, eps) {
                bad += 1;
                if sample.len() < BAD_SAMPLE_CAP {
                    let s = sweep.sparsity(k, i).unwrap();
                    sample.push(BadRegion {
                        region: cube_at(&geom, k, i).to_string(),
                        level: k,
                        sup_sq: s.sup_sq,
                        sparsity: s.value::<f64>(),
                    });
                } else {
                    overflow += 1;
                }
            }
        }
        per_level.push(LevelSum { k, count: bad, sum: vol * Rational::from_integer(bad as i128) });
        unfiltered.push(LevelSum { k, count: all, sum: vol * Rational::from_integer(all as i128) });
    }
    finish(
        *eps,
        FamilySpec::Cubes { clip: sweep.clip() },
        &geom,
        per_level,
        unfiltered,
        ktilde_of(eps, geom.dim())?,
        sample,
        overflow,
        sweep.measure(),
    )
}

#[allow(clippy::too_many_arguments)]
fn finish(
    epsilon: Rational,
    family: FamilySpec,
    geom: &GridGeometry,
    per_level: Vec<LevelSum>,
    unfiltered_per_level: Vec<LevelSum>,
    theoretical_bound: BigRational,
    bad_sample: Vec<BadRegion>,
    bad_overflow: u64,
    measure: Rational,
) -> Result<CarlesonReport> {
    let zero = Rational::from_integer(0);
    let total = per_level.iter().fold(zero, |a, l| a + l.sum);
    let unfiltered_total = unfiltered_per_level.iter().fold(zero, |a, l| a + l.sum);
    Ok(CarlesonReport {
        epsilon,
        family,
        dimension: geom.dim(),
        level: geom.level(),
        per_level,
        total,
        unfiltered_per_level,
        unfiltered_total,
        measure,
        theoretical_bound,
        slack: slack(geom),
        bad_sample,
        bad_overflow,
    })
}

/// Ball report straight from a set and a family.
pub fn carleson_balls_for<T: Real>(e: &GridSet, eps: &Rational, family: &MultiresFamily) -> Result<CarlesonReport> {
    carleson_sum_balls(&BallSweep::<T>::new(e, family)?, eps)
}

/// Cube report straight from a set.
pub fn carleson_cubes_for(e: &GridSet, eps: &Rational, clip: bool) -> Result<CarlesonReport> {
    carleson_sum_cubes(&CubeSweep::new(e, clip)?, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridset::{gen_counterexample, gen_family, FamilyKind};

    #[test]
    fn full_set_has_no_bad_regions() {
        let g = GridGeometry::new(2, 4).unwrap();
        let e = GridSet::full(g);
        let eps = Rational::new(1, 4);
        let r = carleson_cubes_for(&e, &eps, true).unwrap();
        assert_eq!(r.total, Rational::from_integer(0));
        assert_eq!(r.unfiltered_total, Rational::from_integer(5));
        let fam = MultiresFamily::build(&g, ScaleConstant::one());
        let r = carleson_balls_for::<f64>(&e, &eps, &fam).unwrap();
        assert_eq!(r.total, Rational::from_integer(0));
        assert!(r.unfiltered_total >= Rational::from_integer(5));
    }

    #[test]
    fn totals_shrink_with_epsilon() {
        let e = gen_counterexample(1, 6).unwrap();
        let sweep = CubeSweep::new(&e, true).unwrap();
        let mut last = None;
        for n in 1..10 {
            let r = carleson_sum_cubes(&sweep, &Rational::new(n, 10)).unwrap();
            assert!(r.within_bound());
            if let Some(prev) = last {
                assert!(r.total <= prev);
            }
            last = Some(r.total);
        }
    }

    #[test]
    fn reports_recheck_and_round_trip() {
        let g = GridGeometry::new(2, 4).unwrap();
        let e = gen_family(&FamilyKind::Bernoulli { p: 0.3, seed: 5 }, g).unwrap();
        let eps = Rational::new(1, 4);
        let fam = MultiresFamily::build(&g, ScaleConstant::one());
        for r in [
            carleson_cubes_for(&e, &eps, true).unwrap(),
            carleson_cubes_for(&e, &eps, false).unwrap(),
            carleson_balls_for::<f64>(&e, &eps, &fam).unwrap(),
        ] {
            r.recheck(&e).unwrap();
            let back: CarlesonReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
            assert_eq!(back, r);
            let mut forged = r.clone();
            if let Some(b) = forged.bad_sample.first_mut() {
                b.sup_sq += 1;
                assert!(forged.recheck(&e).is_err());
            }
        }
    }
}
