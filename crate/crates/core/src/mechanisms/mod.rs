//! Benchmark and adapted DP mechanisms.
//!
//! A [`MechanismSpec`] describes a mechanism. Auditors get access to it only
//! through the [`Sampler`] trait; exact probabilities live in
//! [`DensityOracle`], which is reserved for ground-truth computations.

mod dpsgd;
mod inputs;
mod oracle;
mod output;
mod rappor;
mod sampler;
mod spec;
pub(crate) mod svt;

pub use dpsgd::{DpsgdConfig, ToyStep};
pub use inputs::{canonical_pair, generate_inputs, pair_for, AdjacentPair, Pattern};
pub use oracle::DensityOracle;
pub use output::{OutputKind, OutputSample, SampleBatch, Symbol, SymbolString};
pub use rappor::{bloom_positions, collision_free_seed, RapporHash};
pub use sampler::{sample, sample_batch, MechanismSampler, Sampler};
pub use spec::{adapted_svt_mass, Family, MechanismSpec, Structure};
