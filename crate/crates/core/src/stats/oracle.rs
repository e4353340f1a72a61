//! Faithful oracles: answers read off d-separation in a known graph.

use super::{CiTest, InvarianceTest, TestOutcome};
use crate::graph::{Dag, NodeSet};
use crate::interventions::{build_idag, IDag, TargetFamily};
use crate::{Error, Result};

/// `X_i ⫫ X_j | X_cond` iff `i` and `j` are d-separated by `cond`.
/// Pooled blocks are ignored: the oracle answers for the observational
/// distribution.
#[derive(Clone, Debug)]
pub struct DsepCi {
    g: Dag,
}

impl DsepCi {
    pub fn new(g: Dag) -> Self {
        DsepCi { g }
    }

    pub fn graph(&self) -> &Dag {
        &self.g
    }
}

impl CiTest for DsepCi {
    fn ci(&self, i: usize, j: usize, cond: &NodeSet, _pool: &[usize]) -> Result<TestOutcome> {
        let sep = self
            .g
            .d_separated(&NodeSet::singleton(i), &NodeSet::singleton(j), cond)?;
        Ok(TestOutcome::exact(sep))
    }

    fn alpha(&self) -> f64 {
        0.5
    }

    fn name(&self) -> &'static str {
        "dsep_oracle"
    }
}

/// `X_i | X_cond` is invariant in block `k` iff `{i}` is d-separated from
/// `ζ_k` by `cond` together with every other parameter vertex.
#[derive(Clone, Debug)]
pub struct IDagInvariance {
    idag: IDag,
    fam: TargetFamily,
}

impl IDagInvariance {
    pub fn new(g: &Dag, fam: &TargetFamily) -> Result<Self> {
        Ok(IDagInvariance {
            idag: build_idag(g, fam)?,
            fam: fam.clone(),
        })
    }

    pub fn idag(&self) -> &IDag {
        &self.idag
    }
}

impl InvarianceTest for IDagInvariance {
    fn invariance(&self, i: usize, cond: &NodeSet, block: usize) -> Result<TestOutcome> {
        if block >= self.fam.len() {
            return Err(Error::invalid(format!("block {block} out of range")));
        }
        let zeta = self
            .idag
            .zeta(block)
            .ok_or_else(|| Error::invalid(format!("block {block} is observational")))?;
        self.idag.base().check_node(i)?;
        self.idag.base().check_set(cond)?;
        let c = cond.union(&self.idag.zetas_except(block));
        let sep = self
            .idag
            .graph()
            .d_separated(&NodeSet::singleton(i), &NodeSet::singleton(zeta), &c)?;
        Ok(TestOutcome::exact(sep))
    }

    fn alpha(&self) -> f64 {
        0.5
    }

    fn name(&self) -> &'static str {
        "idag_oracle"
    }
}
