use crate::graph::{Dag, Permutation};
use crate::interventions::TargetFamily;
use crate::stats::{pool_eligible_blocks, Decider};
use crate::{Error, Result};

/// Sparsest DAG consistent with `pi` to which the observational
/// distribution is Markov, as judged by a CI decider.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MinimalIMap {
    pub pi: Permutation,
    pub g: Dag,
}

impl MinimalIMap {
    pub fn edge_count(&self) -> usize {
        self.g.edge_count()
    }
}

/// Includes `i -> j` (with `i` before `j`) iff `X_i` and `X_j` are dependent
/// given all other predecessors of `j`.
pub fn minimal_imap(pi: &Permutation, dec: &Decider) -> Result<MinimalIMap> {
    let p = pi.len();
    let mut g = Dag::empty(p)?;
    for (b, &j) in pi.order().iter().enumerate() {
        let pre = pi.predecessors(j);
        for &i in &pi.order()[..b] {
            if !dec.independent(i, j, &pre.without(i), &[]) {
                g.insert_edge(i, j);
            }
        }
    }
    Ok(MinimalIMap { pi: pi.clone(), g })
}

/// Reverses the covered edge `i -> j` of `m.g`, moves `j` in front of `i`
/// and re-tests the parent edges of every node whose predecessor set
/// changed: for `k ∈ pa(m)` the edge `k -> m` is dropped when
/// `X_m ⫫ X_k | X_{an(m) \ {k}}`.
///
/// With `pool`, each test also uses the interventional blocks returned by
/// [`pool_eligible_blocks`] for the reversed graph.
pub fn update_imap_after_reversal(
    m: &MinimalIMap,
    i: usize,
    j: usize,
    dec: &Decider,
    pool: Option<&TargetFamily>,
) -> Result<MinimalIMap> {
    if !m.g.has_edge(i, j) {
        return Err(Error::invalid(format!("{}->{} is not an edge", i + 1, j + 1)));
    }
    if !m.g.is_covered(i, j) {
        return Err(Error::PreconditionViolation(format!(
            "{}->{} is not covered",
            i + 1,
            j + 1
        )));
    }
    let reversed = m.g.reverse_edge(i, j)?;
    let pi = m.pi.move_before(j, i);
    let (lo, hi) = (m.pi.position(i), m.pi.position(j));
    let affected: Vec<usize> = pi.order()[lo..=hi].to_vec();
    let mut g = reversed.clone();
    for &node in &affected {
        let an = reversed.ancestors(node);
        for k in reversed.parents(node).iter() {
            let blocks = match pool {
                Some(fam) => pool_eligible_blocks(&reversed, &pi, fam, node, k)?,
                None => Vec::new(),
            };
            if dec.independent(node, k, &an.without(k), &blocks) {
                g.delete_edge(k, node);
            }
        }
    }
    Ok(MinimalIMap { pi, g })
}
