//! First scale at which some ball touching `E` is metrically dense.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{QmdError, Result};
use crate::rational::{big_to_f64, serde_big, to_big, Rational};
use crate::scalar::Real;

use super::constants::k_of;
use super::sweep::BallSweep;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DenseScale {
    pub level: u32,
    /// Center cell of the witness ball.
    pub center: usize,
    pub sparsity: f64,
    pub radius: f64,
    /// `K / α` with `α = μ(E)`: the guaranteed level bound.
    #[serde(with = "serde_big")]
    pub level_bound: BigRational,
    /// `log2 r_0 = log2 A - K/α`.
    pub log2_r0: f64,
}

/// Smallest level `N` with a ball of radius `A 2^-N` touching `E` and
/// `sparse(E, B) < ε`; the first such ball in net order is the witness.
/// `None` when no level qualifies (isolated points at the finest scale).
pub fn dense_scale_search<T: Real>(sweep: &BallSweep<T>, eps: &Rational) -> Result<Option<DenseScale>> {
    let geom = sweep.geometry();
    let alpha = sweep.set_measure();
    if alpha == Rational::from_integer(0) {
        return Err(QmdError::EmptySet);
    }
    let scale = sweep.scale();
    let k = k_of(eps, geom.dim(), &scale)?;
    let level_bound = &k / to_big(&alpha);
    let log2_r0 = scale.to_f64().log2() - big_to_f64(&level_bound);
    for lvl in 0..=geom.level() {
        for (i, b) in sweep.level(lvl).iter().enumerate() {
            if !b.touches {
                continue;
            }
            let s = sweep.sparsity(lvl, i).expect("touching ball has a sparsity");
            if !s.at_least(eps) {
                return Ok(Some(DenseScale {
                    level: lvl,
                    center: b.center,
                    sparsity: s.value::<f64>(),
                    radius: sweep.ball(lvl, i).radius(),
                    level_bound,
                    log2_r0,
                }));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::GridGeometry;
    use crate::gridset::{gen_counterexample, GridSet};
    use crate::multires::{MultiresFamily, ScaleConstant};

    fn search(e: &GridSet, eps: Rational) -> Option<DenseScale> {
        let fam = MultiresFamily::build(e.geometry(), ScaleConstant::one());
        dense_scale_search(&BallSweep::<f64>::new(e, &fam).unwrap(), &eps).unwrap()
    }

    #[test]
    fn full_set_is_dense_at_level_zero() {
        let g = GridGeometry::new(2, 4).unwrap();
        let w = search(&GridSet::full(g), Rational::new(1, 10)).unwrap();
        assert_eq!(w.level, 0);
        assert!(w.level_bound > BigRational::from_integer(0.into()));
    }

    #[test]
    fn counterexample_scales() {
        // Fine E_k look dense from far away: sparsity 2^-(k+3) at radius 1.
        let w = search(&gen_counterexample(4, 8).unwrap(), Rational::new(1, 10)).unwrap();
        assert_eq!(w.level, 0);
        // Coarse E_0: the level-0 ball sees a quarter-length gap.
        let w = search(&gen_counterexample(0, 8).unwrap(), Rational::new(1, 10)).unwrap();
        assert!(w.level >= 1 && w.level <= 3, "{w:?}");
    }
}
