use crate::graph::{Dag, NodeSet};
use crate::interventions::TargetFamily;
use crate::stats::Decider;
use crate::{Error, Result};

/// Neighbourhood size above which the general contradiction check skips a
/// condition instead of enumerating its subsets.
pub const DEFAULT_DEGREE_CAP: usize = 8;

/// A covered edge `i -> j` whose reversal is allowed: when `{i}` is a
/// target, the marginal of `X_j` must be invariant under it.
pub fn is_i_covered(g: &Dag, i: usize, j: usize, dec: &Decider, fam: &TargetFamily) -> bool {
    if !g.has_edge(i, j) || !g.is_covered(i, j) {
        return false;
    }
    let blocks = fam.singleton_positions(i);
    blocks.is_empty() || dec.invariant_all(j, &NodeSet::empty(), &blocks)
}

/// General definition. Condition 1: targets hitting `i` but not `j` exist
/// and some `S ⊆ ne(j) \ {i}` leaves `X_j | X_S` invariant under all of
/// them. Condition 2: targets hitting `j` but not `i` exist and for every
/// `S ⊆ ne(i) \ {j}` some of them moves `X_i | X_S`.
///
/// A condition whose neighbourhood exceeds `degree_cap` is treated as
/// false, with a warning.
pub fn is_i_contradictory_general(
    g: &Dag,
    i: usize,
    j: usize,
    dec: &Decider,
    fam: &TargetFamily,
    degree_cap: usize,
) -> bool {
    if !g.has_edge(i, j) {
        return false;
    }
    let i_not_j = fam.positions_separating(i, j);
    if !i_not_j.is_empty() {
        let ne = g.neighbors(j).without(i);
        if ne.len() > degree_cap {
            log::warn!(
                "node {} has {} neighbours, above the cap {degree_cap}; skipping a contradiction check",
                j + 1,
                ne.len()
            );
        } else if ne.subsets().iter().any(|s| dec.invariant_all(j, s, &i_not_j)) {
            return true;
        }
    }
    let j_not_i = fam.positions_separating(j, i);
    if !j_not_i.is_empty() {
        let ne = g.neighbors(i).without(j);
        if ne.len() > degree_cap {
            log::warn!(
                "node {} has {} neighbours, above the cap {degree_cap}; skipping a contradiction check",
                i + 1,
                ne.len()
            );
        } else if ne.subsets().iter().all(|s| !dec.invariant_all(i, s, &j_not_i)) {
            return true;
        }
    }
    false
}

/// Single-node definition: `{i}` is a target and leaves the marginal of
/// `X_j` unchanged, or `{j}` is a target and changes the marginal of `X_i`.
pub fn is_i_contradictory_single(
    g: &Dag,
    i: usize,
    j: usize,
    dec: &Decider,
    fam: &TargetFamily,
) -> Result<bool> {
    let (bi, bj) = (fam.singleton_positions(i), fam.singleton_positions(j));
    if bi.is_empty() && bj.is_empty() {
        return Err(Error::invalid(format!(
            "neither {{{}}} nor {{{}}} is a target",
            i + 1,
            j + 1
        )));
    }
    if !g.has_edge(i, j) {
        return Ok(false);
    }
    let empty = NodeSet::empty();
    Ok((!bi.is_empty() && dec.invariant_all(j, &empty, &bi))
        || (!bj.is_empty() && !dec.invariant_all(i, &empty, &bj)))
}

/// Which contradiction rule the search applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContradictionRule {
    General { degree_cap: usize },
    SingleNode,
}

impl ContradictionRule {
    pub fn check(&self, g: &Dag, i: usize, j: usize, dec: &Decider, fam: &TargetFamily) -> bool {
        if !dec.has_invariance() {
            return false;
        }
        match *self {
            ContradictionRule::General { degree_cap } => {
                is_i_contradictory_general(g, i, j, dec, fam, degree_cap)
            }
            ContradictionRule::SingleNode => {
                is_i_contradictory_single(g, i, j, dec, fam).unwrap_or(false)
            }
        }
    }
}

/// Number of edges of `g` the rule marks as contradictory.
pub fn count_i_contradictory(g: &Dag, dec: &Decider, fam: &TargetFamily, rule: ContradictionRule) -> usize {
    g.edges()
        .into_iter()
        .filter(|&(i, j)| rule.check(g, i, j, dec, fam))
        .count()
}
