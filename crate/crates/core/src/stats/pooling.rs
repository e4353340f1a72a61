use crate::graph::{Dag, Permutation};
use crate::interventions::TargetFamily;
use crate::{Error, Result};

/// Interventional blocks that may be pooled with the observational block
/// to test `X_i ⫫ X_k | X_{an(i) \ {k}}` for a parent `k` of `i` in `g_pi`.
///
/// A non-empty target qualifies when every member `j` satisfies, in `g_pi`:
/// `j = i` or `j` is neither an ancestor nor a descendant of `i`; and
/// either `j` precedes `k` and `k` is not a parent of `j`, or `j` follows
/// `k` and is not an ancestor of `k`.
pub fn pool_eligible_blocks(
    g_pi: &Dag,
    pi: &Permutation,
    fam: &TargetFamily,
    i: usize,
    k: usize,
) -> Result<Vec<usize>> {
    g_pi.check_node(i)?;
    g_pi.check_node(k)?;
    if pi.len() != g_pi.p() || fam.p() != g_pi.p() {
        return Err(Error::invalid("graph, permutation and family sizes differ"));
    }
    if !g_pi.has_edge(k, i) {
        return Err(Error::invalid(format!("{} is not a parent of {}", k + 1, i + 1)));
    }
    let (an_i, de_i, an_k) = (g_pi.ancestors(i), g_pi.descendants(i), g_pi.ancestors(k));
    let ok = |j: usize| {
        let unrelated = j == i || !(an_i.contains(j) || de_i.contains(j));
        let (pj, pk) = (pi.position(j), pi.position(k));
        let ordered = (pk > pj && !g_pi.has_edge(k, j)) || (pj > pk && !an_k.contains(j));
        unrelated && ordered
    };
    Ok(fam
        .targets()
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.is_empty() && t.iter().all(ok))
        .map(|(b, _)| b)
        .collect())
}
