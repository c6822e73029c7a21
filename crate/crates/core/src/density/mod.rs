//! Sparsity, averaged distance, packing sums and their audits.

pub mod audit;
pub mod carleson;
pub mod constants;
pub mod counterexample;
pub mod scale;
pub mod sparsity;
pub mod sweep;
pub mod zset;

pub use audit::{
    average_sum_audit, enclosing_ball, enclosure_audit, small_average_audit, AverageSumAudit, EnclosureAudit,
    SmallAverageAudit,
};
pub use carleson::{
    carleson_balls_for, carleson_cubes_for, carleson_sum_balls, carleson_sum_cubes, CarlesonReport, FamilySpec,
};
pub use constants::{cx_of, delta_of, k_of, ktilde_of, theoretical_n, z_bound};
pub use counterexample::{counterexample_audit, CounterexampleAudit};
pub use scale::{dense_scale_search, DenseScale};
pub use sparsity::{avg_dist, sparsity_7q, sparsity_ball, AvgDist, DistanceField, SparsityValue};
pub use sweep::{BallSweep, CubeSweep};
pub use zset::{z_report, z_set, CoverCounts, ZReport};
