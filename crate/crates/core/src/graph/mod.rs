//! DAGs, node sets, permutations and the graphical criteria built on them:
//! d-separation, skeletons, v-structures, Markov equivalence and covered
//! edges.
//!
//! Nodes are 0-based in the API and 1-based in every serialized form.

mod dag;
mod nodeset;
mod permutation;

pub use dag::{Dag, GraphJson};
pub use nodeset::{NodeSet, MAX_VERTICES};
pub use permutation::Permutation;
