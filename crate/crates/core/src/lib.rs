//! Quantitative metric density on dyadic grids.
//!
//! Subsets of `[0,1]^d` are held at a fixed resolution `2^-L` as sets of
//! cells. On top of that the crate measures how metrically dense a set is in
//! balls and expanded dyadic cubes, sums those measurements over
//! multiresolution families, and splits a set into well-connected pieces plus
//! a small garbage set.
//!
//! Integer and rational arithmetic decides every threshold. Quantities that
//! need square roots are generic over [`Real`] (`f32` or `f64`); the `*64`
//! and `*32` aliases below fix the scalar.

pub mod decompose;
pub mod density;
pub mod dyadic;
pub mod edt;
pub mod error;
pub mod gridset;
pub mod multires;
pub mod oracle;
pub mod rational;
pub mod scalar;

pub use dyadic::{minimal_common_cube, DyadicCube, GridGeometry, GridPoint, Region};
pub use error::{QmdError, Result};
pub use gridset::{GridSet, SetFile};
pub use multires::{Ball, MultiresFamily, NestedNets, ScaleConstant};
pub use rational::Rational;
pub use scalar::Real;

pub type AvgDist64 = density::AvgDist<f64>;
pub type AvgDist32 = density::AvgDist<f32>;
pub type BallSweep64 = density::BallSweep<f64>;
pub type BallSweep32 = density::BallSweep<f32>;
pub type Chain64 = decompose::Chain<f64>;
pub type Chain32 = decompose::Chain<f32>;
