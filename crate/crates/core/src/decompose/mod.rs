//! Splitting `E` into well-connected pieces and a small garbage set.

pub mod chain;
pub mod coding;
pub mod decomp;
pub mod pipeline;
pub mod verify;

pub use chain::{build_chain, Chain, ChainMethod};
pub use coding::{assign_collections, coding_partition, word_of, CodingPartition, CollectionAssignment, Word};
pub use decomp::{decompose, verify_decomposition, Certificate, DecomposeOptions, Decomposition, Params, VerifyReport};
pub use pipeline::{choose_n, pipeline_constants, BadCubeSet, NMode};
pub use verify::{select_pairs, verify_well_connected, PairPolicy, WellConnectedVerdict};
