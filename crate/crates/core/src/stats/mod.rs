//! Conditional-independence and invariance tests, their d-separation
//! oracles, the pooling rule and a memoising decider used by the search.

mod cache;
mod gaussian;
mod hsic;
mod oracle;
mod pooling;

pub use cache::{Decider, TestCache, TestCounts, TestKey, TestLogRow};
pub use gaussian::{fisher_z_ci, gaussian_invariance, BlockMoments, GaussianCi, GaussianInvariance};
pub use hsic::{hsic_gamma, hsic_index_invariance, HsicInvariance, DEFAULT_ROW_CAP};
pub use oracle::{DsepCi, IDagInvariance};
pub use pooling::pool_eligible_blocks;

use crate::graph::NodeSet;
use crate::Result;

pub const DEFAULT_ALPHA_CI: f64 = 1e-3;
pub const DEFAULT_ALPHA_INV: f64 = 1e-3;

/// Statistic and p-value of one test. `degenerate` marks results computed
/// on singular or constant data; those never accept the null.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestOutcome {
    pub stat: f64,
    pub p_value: f64,
    pub degenerate: bool,
}

impl TestOutcome {
    pub fn new(stat: f64, p_value: f64) -> Self {
        TestOutcome {
            stat,
            p_value: p_value.clamp(0.0, 1.0),
            degenerate: false,
        }
    }

    pub fn degenerate() -> Self {
        TestOutcome {
            stat: f64::INFINITY,
            p_value: 0.0,
            degenerate: true,
        }
    }

    /// Oracle answer: `p = 1` when the null holds, `0` otherwise.
    pub fn exact(null_holds: bool) -> Self {
        if null_holds {
            TestOutcome::new(0.0, 1.0)
        } else {
            TestOutcome::new(f64::INFINITY, 0.0)
        }
    }

    /// Independence / invariance at level `alpha`.
    pub fn accepts_null(&self, alpha: f64) -> bool {
        !self.degenerate && self.p_value >= alpha
    }
}

/// `X_i ⫫ X_j | X_cond`, estimated on the observational block pooled with
/// the interventional blocks listed in `pool`.
pub trait CiTest: Send + Sync {
    fn ci(&self, i: usize, j: usize, cond: &NodeSet, pool: &[usize]) -> Result<TestOutcome>;
    fn alpha(&self) -> f64;
    fn name(&self) -> &'static str;
}

/// Whether `X_i | X_cond` has the same distribution in block `block` as in
/// the observational block.
pub trait InvarianceTest: Send + Sync {
    fn invariance(&self, i: usize, cond: &NodeSet, block: usize) -> Result<TestOutcome>;
    fn alpha(&self) -> f64;
    fn name(&self) -> &'static str;
}

pub(crate) fn two_sided_normal_p(z: f64) -> f64 {
    statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2)
}
