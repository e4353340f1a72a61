//! Intervention-target families, interventional DAGs and the equivalence
//! criteria that decide whether two DAGs can be told apart from data
//! collected under a family of (general or perfect) interventions.
//!
//! An interventional DAG augments the base graph with one parameter vertex
//! ζ per non-empty target and an edge ζ → i for each targeted node i.
//! Parameter vertices are identified by the target's position in the
//! family, so duplicated targets in a multiset remain distinct.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{Dag, NodeSet, MAX_VERTICES};
use crate::{Error, Result};

/// Ordered multiset of intervention targets over nodes `0..p`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TargetFamily {
    p: usize,
    targets: Vec<NodeSet>,
}

impl TargetFamily {
    pub fn new(p: usize, targets: Vec<NodeSet>) -> Result<TargetFamily> {
        if p == 0 || p > MAX_VERTICES {
            return Err(Error::invalid(format!("node count {p} out of range")));
        }
        if targets.is_empty() {
            return Err(Error::invalid("target family is empty"));
        }
        for (k, t) in targets.iter().enumerate() {
            if t.bound() > p {
                return Err(Error::invalid(format!("target #{k} {t} exceeds 1..={p}")));
            }
        }
        Ok(TargetFamily { p, targets })
    }

    /// Builds a family from 1-based label lists; `&[]` denotes the empty target.
    pub fn from_labels(p: usize, targets: &[&[usize]]) -> Result<TargetFamily> {
        let sets = targets
            .iter()
            .map(|t| NodeSet::from_labels(t, p))
            .collect::<Result<Vec<_>>>()?;
        TargetFamily::new(p, sets)
    }

    /// `{∅}` only.
    pub fn observational(p: usize) -> TargetFamily {
        TargetFamily::new(p, vec![NodeSet::empty()]).expect("valid")
    }

    /// `{∅, {1}, .., {p}}`.
    pub fn all_singletons(p: usize) -> TargetFamily {
        let mut t = vec![NodeSet::empty()];
        t.extend((0..p).map(NodeSet::singleton));
        TargetFamily::new(p, t).expect("valid")
    }

    /// `{∅} ∪ {{i, j} : i < j}`.
    pub fn all_pairs(p: usize) -> TargetFamily {
        let mut t = vec![NodeSet::empty()];
        for i in 0..p {
            for j in i + 1..p {
                t.push([i, j].into_iter().collect());
            }
        }
        TargetFamily::new(p, t).expect("valid")
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn targets(&self) -> &[NodeSet] {
        &self.targets
    }

    pub fn target(&self, k: usize) -> &NodeSet {
        &self.targets[k]
    }

    pub fn has_empty(&self) -> bool {
        self.targets.iter().any(NodeSet::is_empty)
    }

    /// Position of the first empty target.
    pub fn observational_index(&self) -> Option<usize> {
        self.targets.iter().position(NodeSet::is_empty)
    }

    /// Every node is left untouched by at least one target.
    pub fn is_conservative(&self) -> bool {
        (0..self.p).all(|j| self.targets.iter().any(|t| !t.contains(j)))
    }

    /// Whether every non-empty target is a single node.
    pub fn is_single_node(&self) -> bool {
        self.targets.iter().all(|t| t.len() <= 1)
    }

    /// Positions whose target is exactly `{v}`.
    pub fn singleton_positions(&self, v: usize) -> Vec<usize> {
        let s = NodeSet::singleton(v);
        (0..self.len()).filter(|&k| self.targets[k] == s).collect()
    }

    /// Positions of targets containing `i` but not `j`.
    pub fn positions_separating(&self, i: usize, j: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| self.targets[k].contains(i) && !self.targets[k].contains(j))
            .collect()
    }

    /// Copy with the first empty target moved to position 0.
    ///
    /// Returns the reordered family and `order`, where new position `k`
    /// holds old position `order[k]`.
    pub fn normalized(&self) -> (TargetFamily, Vec<usize>) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        if let Some(e) = self.observational_index() {
            order.remove(e);
            order.insert(0, e);
        }
        let targets = order.iter().map(|&k| self.targets[k]).collect();
        (TargetFamily { p: self.p, targets }, order)
    }

    /// Family obtained by treating target `index` as the observational
    /// regime: that position becomes ∅ and every other position `J`
    /// becomes `I ∪ J`. Positions are preserved.
    pub fn relabeled(&self, index: usize) -> Result<TargetFamily> {
        let pivot = *self.targets.get(index).ok_or_else(|| {
            Error::invalid(format!("target index {index} out of range 0..{}", self.len()))
        })?;
        let targets = self
            .targets
            .iter()
            .enumerate()
            .map(|(k, t)| if k == index { NodeSet::empty() } else { pivot.union(t) })
            .collect();
        Ok(TargetFamily { p: self.p, targets })
    }

    /// Applies a node relabeling `v -> perm[v]` to every target.
    pub fn relabel_nodes(&self, perm: &[usize]) -> TargetFamily {
        let targets = self
            .targets
            .iter()
            .map(|t| t.iter().map(|v| perm[v]).collect())
            .collect();
        TargetFamily { p: self.p, targets }
    }

    pub fn to_json(&self) -> FamilyJson {
        FamilyJson {
            p: self.p,
            targets: self.targets.iter().map(NodeSet::to_labels).collect(),
        }
    }

    /// Parses `{"p": .., "targets": [[..], ..]}`; `[]` is the empty target.
    pub fn from_json_str(text: &str) -> Result<TargetFamily> {
        let raw: FamilyJson = serde_json::from_str(text).map_err(|e| {
            Error::parse(format!("line {}, column {}", e.line(), e.column()), e.to_string())
        })?;
        raw.to_family()
    }
}

impl fmt::Debug for TargetFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TargetFamily({self})")
    }
}

impl fmt::Display for TargetFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, t) in self.targets.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            if t.is_empty() {
                write!(f, "∅")?;
            } else {
                write!(f, "{t}")?;
            }
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyJson {
    pub p: usize,
    pub targets: Vec<Vec<usize>>,
}

impl FamilyJson {
    pub fn to_family(&self) -> Result<TargetFamily> {
        let mut sets = Vec::with_capacity(self.targets.len());
        for (k, t) in self.targets.iter().enumerate() {
            let s = NodeSet::from_labels(t, self.p)
                .map_err(|e| Error::parse(format!("field `targets[{k}]`"), e.to_string()))?;
            sets.push(s);
        }
        TargetFamily::new(self.p, sets).map_err(|e| Error::parse("field `targets`", e.to_string()))
    }
}

/// A DAG augmented with one parameter vertex per non-empty target.
///
/// Vertices `0..p` are the base nodes; parameter vertices follow, in target
/// order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IDag {
    base: Dag,
    graph: Dag,
    zeta: Vec<Option<usize>>,
}

impl IDag {
    pub fn base(&self) -> &Dag {
        &self.base
    }

    /// The augmented graph over base and parameter vertices.
    pub fn graph(&self) -> &Dag {
        &self.graph
    }

    /// Parameter vertex for target position `k`; `None` for empty targets.
    pub fn zeta(&self, k: usize) -> Option<usize> {
        self.zeta.get(k).copied().flatten()
    }

    pub fn zeta_count(&self) -> usize {
        self.zeta.iter().flatten().count()
    }

    /// All parameter vertices except the one for position `k`.
    pub fn zetas_except(&self, k: usize) -> NodeSet {
        self.zeta
            .iter()
            .enumerate()
            .filter(|&(pos, _)| pos != k)
            .filter_map(|(_, z)| *z)
            .collect()
    }

    /// Parameter vertices for the given positions.
    pub fn zetas_of(&self, positions: &[usize]) -> NodeSet {
        positions.iter().filter_map(|&k| self.zeta(k)).collect()
    }

    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.graph.skeleton()
    }

    pub fn v_structures(&self) -> BTreeSet<(usize, usize, usize)> {
        self.graph.v_structures()
    }

    /// Skeleton and v-structures; equal signatures mean equal I-MECs.
    pub fn signature(&self) -> Signature {
        (self.skeleton(), self.v_structures())
    }
}

pub type Signature = (BTreeSet<(usize, usize)>, BTreeSet<(usize, usize, usize)>);

pub fn build_idag(g: &Dag, fam: &TargetFamily) -> Result<IDag> {
    if fam.p() != g.p() {
        return Err(Error::invalid(format!(
            "family is over {} nodes but the graph has {}",
            fam.p(),
            g.p()
        )));
    }
    let extra = fam.targets().iter().filter(|t| !t.is_empty()).count();
    let total = g.p() + extra;
    if total > MAX_VERTICES {
        return Err(Error::invalid(format!(
            "augmented graph needs {total} vertices, limit is {MAX_VERTICES}"
        )));
    }
    let mut graph = Dag::empty(total)?;
    for (i, j) in g.edges() {
        graph.insert_edge(i, j);
    }
    let mut zeta = Vec::with_capacity(fam.len());
    let mut next = g.p();
    for t in fam.targets() {
        if t.is_empty() {
            zeta.push(None);
            continue;
        }
        for v in t.iter() {
            graph.insert_edge(next, v);
        }
        zeta.push(Some(next));
        next += 1;
    }
    Ok(IDag {
        base: g.clone(),
        graph,
        zeta,
    })
}

fn check_pair(g1: &Dag, g2: &Dag, fam: &TargetFamily) -> Result<()> {
    if g1.p() != g2.p() || g1.p() != fam.p() {
        return Err(Error::invalid(format!(
            "node counts differ: {} / {} / family {}",
            g1.p(),
            g2.p(),
            fam.p()
        )));
    }
    Ok(())
}

/// I-MEC signature of `g` for a family containing ∅.
pub fn imec_signature(g: &Dag, fam: &TargetFamily) -> Result<Signature> {
    Ok(build_idag(g, fam)?.signature())
}

/// Same I-MEC under `fam` (which must contain ∅): the two interventional
/// DAGs share skeleton and v-structures.
pub fn i_markov_equivalent(g1: &Dag, g2: &Dag, fam: &TargetFamily) -> Result<bool> {
    check_pair(g1, g2, fam)?;
    if !fam.has_empty() {
        return Err(Error::PreconditionViolation(
            "the skeleton/v-structure criterion needs ∅ in the family; \
             use i_markov_equivalent_conservative for conservative families without ∅"
                .into(),
        ));
    }
    Ok(imec_signature(g1, fam)? == imec_signature(g2, fam)?)
}

/// Per-position signatures of the relabeled families.
pub fn conservative_signature(g: &Dag, fam: &TargetFamily) -> Result<Vec<Signature>> {
    (0..fam.len())
        .map(|k| imec_signature(g, &fam.relabeled(k)?))
        .collect()
}

/// Same I-MEC under a conservative family, with or without ∅: for every
/// target position the relabeled interventional DAGs agree.
pub fn i_markov_equivalent_conservative(g1: &Dag, g2: &Dag, fam: &TargetFamily) -> Result<bool> {
    check_pair(g1, g2, fam)?;
    if !fam.is_conservative() {
        return Err(Error::PreconditionViolation(format!(
            "family {fam} is not conservative"
        )));
    }
    for k in 0..fam.len() {
        let rel = fam.relabeled(k)?;
        if imec_signature(g1, &rel)? != imec_signature(g2, &rel)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Per-target Markov-equivalence signatures of the cut sub-DAGs.
pub fn perfect_signature(g: &Dag, fam: &TargetFamily) -> Vec<Signature> {
    fam.targets()
        .iter()
        .map(|t| {
            let cut = g.cut_incoming(t);
            (cut.skeleton(), cut.v_structures())
        })
        .collect()
}

/// Same perfect-intervention MEC: for every target `I`, the sub-DAGs with
/// all edges into `I` removed are Markov equivalent.
pub fn perfect_i_mec_equivalent(g1: &Dag, g2: &Dag, fam: &TargetFamily) -> Result<bool> {
    check_pair(g1, g2, fam)?;
    if !fam.is_conservative() {
        return Err(Error::PreconditionViolation(format!(
            "family {fam} is not conservative"
        )));
    }
    for t in fam.targets() {
        if !g1.cut_incoming(t).markov_equivalent(&g2.cut_incoming(t))? {
            return Ok(false);
        }
    }
    Ok(true)
}
