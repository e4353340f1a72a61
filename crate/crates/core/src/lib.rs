//! Interventional Markov equivalence and greedy permutation search for
//! causal DAGs learned from observational plus general interventional data.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: DAGs, d-separation, skeletons, v-structures, covered edges.
//! * [`interventions`]: target families, interventional DAGs and the
//!   equivalence criteria for general and perfect interventions.
//! * [`semsim`]: linear Gaussian structural equation models and their
//!   interventional variants, plus a seeded sampler.
//! * [`stats`]: conditional-independence and invariance tests, the
//!   d-separation oracles and the data-pooling rule.
//! * [`igsp`]: the greedy search over permutations.
//! * [`enumerate`]: brute-force DAG catalogs for checking the criteria.
//! * [`bench`]: simulation experiments and Hamming scoring.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the usual double-precision instantiation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod enumerate;
mod error;
pub mod graph;
pub mod igsp;
pub mod interventions;
pub mod linalg;
mod scalar;
pub mod semsim;
pub mod stats;

pub use error::{Error, Result};
pub use graph::{Dag, NodeSet, Permutation};
pub use interventions::{IDag, TargetFamily};
pub use scalar::Scalar;

pub type Matrix64 = linalg::Matrix<f64>;
pub type SemModel64 = semsim::SemModel<f64>;
pub type SemModel32 = semsim::SemModel<f32>;
pub type MultiDataset64 = semsim::MultiDataset<f64>;
pub type MultiDataset32 = semsim::MultiDataset<f32>;
pub type GaussianCi64 = stats::GaussianCi<f64>;
pub type GaussianInvariance64 = stats::GaussianInvariance<f64>;
pub type HsicInvariance64 = stats::HsicInvariance<f64>;
