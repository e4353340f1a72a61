use std::collections::BTreeSet;
use std::fmt;

use super::nodeset::{NodeSet, MAX_VERTICES};
use crate::{Error, Result};

/// Labeled DAG over vertices `0..p`, stored as parent and child bit sets.
///
/// Values are immutable once built; every mutating operation returns a new
/// graph. Equality and hashing are over the edge set.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dag {
    p: usize,
    parents: Vec<NodeSet>,
    children: Vec<NodeSet>,
}

impl Dag {
    pub fn empty(p: usize) -> Result<Dag> {
        if p == 0 || p > MAX_VERTICES {
            return Err(Error::invalid(format!(
                "node count must be in 1..={MAX_VERTICES}, got {p}"
            )));
        }
        Ok(Dag {
            p,
            parents: vec![NodeSet::empty(); p],
            children: vec![NodeSet::empty(); p],
        })
    }

    /// Builds a DAG from 0-based edges `(from, to)`.
    pub fn new(p: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Dag> {
        let mut g = Dag::empty(p)?;
        for (k, (i, j)) in edges.into_iter().enumerate() {
            if i >= p || j >= p {
                return Err(Error::invalid(format!(
                    "edge #{k} ({}, {}) has a node outside 1..={p}",
                    i + 1,
                    j + 1
                )));
            }
            if i == j {
                return Err(Error::invalid(format!("edge #{k} is a self-loop on {}", i + 1)));
            }
            if g.has_edge(i, j) {
                return Err(Error::invalid(format!(
                    "edge #{k} {}->{} is a duplicate",
                    i + 1,
                    j + 1
                )));
            }
            if g.has_edge(j, i) {
                return Err(Error::invalid(format!(
                    "edge #{k} {}->{} conflicts with {}->{}",
                    i + 1,
                    j + 1,
                    j + 1,
                    i + 1
                )));
            }
            g.insert_edge(i, j);
        }
        if g.topological_order().is_none() {
            return Err(Error::invalid("edge set contains a directed cycle"));
        }
        Ok(g)
    }

    /// Builds a DAG from 1-based labelled edges.
    pub fn from_labels(p: usize, edges: &[(usize, usize)]) -> Result<Dag> {
        let mut zero = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            if i == 0 || j == 0 {
                return Err(Error::invalid("node labels are 1-based"));
            }
            zero.push((i - 1, j - 1));
        }
        Dag::new(p, zero)
    }

    pub(crate) fn insert_edge(&mut self, i: usize, j: usize) {
        self.children[i].insert(j);
        self.parents[j].insert(i);
    }

    pub(crate) fn delete_edge(&mut self, i: usize, j: usize) {
        self.children[i].remove(j);
        self.parents[j].remove(i);
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn check_node(&self, v: usize) -> Result<()> {
        if v >= self.p {
            Err(Error::invalid(format!("node {} outside 1..={}", v + 1, self.p)))
        } else {
            Ok(())
        }
    }

    pub fn check_set(&self, s: &NodeSet) -> Result<()> {
        if s.bound() > self.p {
            Err(Error::invalid(format!("node set {s} exceeds 1..={}", self.p)))
        } else {
            Ok(())
        }
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.children[i].contains(j)
    }

    #[inline]
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.has_edge(i, j) || self.has_edge(j, i)
    }

    #[inline]
    pub fn parents(&self, v: usize) -> NodeSet {
        self.parents[v]
    }

    #[inline]
    pub fn children(&self, v: usize) -> NodeSet {
        self.children[v]
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> NodeSet {
        self.parents[v].union(&self.children[v])
    }

    /// Strict ancestors of `v`.
    pub fn ancestors(&self, v: usize) -> NodeSet {
        self.ancestors_of_set(&NodeSet::singleton(v)).without(v)
    }

    /// Strict descendants of `v`.
    pub fn descendants(&self, v: usize) -> NodeSet {
        let mut seen = NodeSet::empty();
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for c in self.children[u].iter() {
                if seen.insert(c) {
                    stack.push(c);
                }
            }
        }
        seen
    }

    /// `set` together with all of its ancestors.
    pub fn ancestors_of_set(&self, set: &NodeSet) -> NodeSet {
        let mut seen = *set;
        let mut stack: Vec<usize> = set.iter().collect();
        while let Some(u) = stack.pop() {
            for q in self.parents[u].iter() {
                if seen.insert(q) {
                    stack.push(q);
                }
            }
        }
        seen
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(NodeSet::len).sum()
    }

    /// Edges in lexicographic `(from, to)` order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for i in 0..self.p {
            for j in self.children[i].iter() {
                out.push((i, j));
            }
        }
        out
    }

    /// Kahn's algorithm with smallest-index tie-breaking; `None` on a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indeg: Vec<usize> = self.parents.iter().map(NodeSet::len).collect();
        let mut ready: BTreeSet<usize> = (0..self.p).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.p);
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            order.push(v);
            for c in self.children[v].iter() {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == self.p).then_some(order)
    }

    /// Unordered adjacent pairs, each stored as `(min, max)`.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.edges()
            .into_iter()
            .map(|(i, j)| (i.min(j), i.max(j)))
            .collect()
    }

    /// Unshielded colliders `(i, j, k)` with `i -> j <- k` and `i < k`.
    pub fn v_structures(&self) -> BTreeSet<(usize, usize, usize)> {
        let mut out = BTreeSet::new();
        for j in 0..self.p {
            let pa: Vec<usize> = self.parents[j].iter().collect();
            for (a, &i) in pa.iter().enumerate() {
                for &k in &pa[a + 1..] {
                    if !self.adjacent(i, k) {
                        out.insert((i, j, k));
                    }
                }
            }
        }
        out
    }

    pub fn markov_equivalent(&self, other: &Dag) -> Result<bool> {
        if self.p != other.p {
            return Err(Error::invalid(format!(
                "graphs have different node counts ({} vs {})",
                self.p, other.p
            )));
        }
        Ok(self.skeleton() == other.skeleton() && self.v_structures() == other.v_structures())
    }

    /// `i -> j` is covered when `pa(i) = pa(j) \ {i}`.
    pub fn is_covered(&self, i: usize, j: usize) -> bool {
        self.has_edge(i, j) && self.parents[i] == self.parents[j].without(i)
    }

    pub fn covered_edges(&self) -> Vec<(usize, usize)> {
        self.edges()
            .into_iter()
            .filter(|&(i, j)| self.is_covered(i, j))
            .collect()
    }

    /// Returns a copy with `i -> j` replaced by `j -> i`.
    ///
    /// Fails with `InvalidArgument` when the edge is absent and with `Internal`
    /// when the reversal would close a cycle, which cannot happen for covered
    /// edges.
    pub fn reverse_edge(&self, i: usize, j: usize) -> Result<Dag> {
        self.check_node(i)?;
        self.check_node(j)?;
        if !self.has_edge(i, j) {
            return Err(Error::invalid(format!("edge {}->{} is absent", i + 1, j + 1)));
        }
        let mut g = self.clone();
        g.delete_edge(i, j);
        // j -> i closes a cycle iff i still reaches j.
        if g.descendants(i).contains(j) {
            return Err(Error::Internal(format!(
                "reversing {}->{} creates a cycle",
                i + 1,
                j + 1
            )));
        }
        g.insert_edge(j, i);
        Ok(g)
    }

    /// Whether `c` d-separates `a` from `b`.
    ///
    /// Reachability ("Bayes ball") over (vertex, direction) states, linear in
    /// the size of the graph.
    pub fn d_separated(&self, a: &NodeSet, b: &NodeSet, c: &NodeSet) -> Result<bool> {
        for s in [a, b, c] {
            self.check_set(s)?;
        }
        if !a.is_disjoint(b) || !a.is_disjoint(c) || !b.is_disjoint(c) {
            return Err(Error::invalid(format!(
                "sets must be pairwise disjoint: {a}, {b}, {c}"
            )));
        }
        Ok(self.reachable(a, c).is_disjoint(b))
    }

    /// Vertices d-connected to some member of `sources` given `cond`.
    pub(crate) fn reachable(&self, sources: &NodeSet, cond: &NodeSet) -> NodeSet {
        let cond_anc = self.ancestors_of_set(cond);
        // visited[0]: arrived from a child (moving up); visited[1]: from a parent.
        let mut visited = [NodeSet::empty(), NodeSet::empty()];
        let mut reached = NodeSet::empty();
        let mut stack: Vec<(usize, bool)> = sources.iter().map(|v| (v, true)).collect();
        while let Some((v, up)) = stack.pop() {
            let slot = usize::from(!up);
            if !visited[slot].insert(v) {
                continue;
            }
            let blocked = cond.contains(v);
            if !blocked {
                reached.insert(v);
            }
            if up {
                if !blocked {
                    stack.extend(self.parents[v].iter().map(|q| (q, true)));
                    stack.extend(self.children[v].iter().map(|c| (c, false)));
                }
            } else {
                if !blocked {
                    stack.extend(self.children[v].iter().map(|c| (c, false)));
                }
                if cond_anc.contains(v) {
                    stack.extend(self.parents[v].iter().map(|q| (q, true)));
                }
            }
        }
        reached
    }

    /// Sub-DAG keeping only edges whose head is outside `targets`.
    pub fn cut_incoming(&self, targets: &NodeSet) -> Dag {
        let mut g = self.clone();
        for t in targets.iter().filter(|&t| t < self.p) {
            for q in self.parents[t].iter() {
                g.delete_edge(q, t);
            }
        }
        g
    }

    /// Relabels vertex `v` as `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Dag> {
        if perm.len() != self.p {
            return Err(Error::invalid("relabeling has the wrong length"));
        }
        Dag::new(self.p, self.edges().into_iter().map(|(i, j)| (perm[i], perm[j])))
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            p: self.p,
            edges: self.edges().into_iter().map(|(i, j)| [i + 1, j + 1]).collect(),
        }
    }

    /// Parses `{"p": .., "edges": [[i, j], ..]}` with 1-based labels.
    pub fn from_json_str(text: &str) -> Result<Dag> {
        let raw: GraphJson = serde_json::from_str(text).map_err(|e| {
            Error::parse(format!("line {}, column {}", e.line(), e.column()), e.to_string())
        })?;
        raw.to_dag()
    }
}

/// Serialized graph form with 1-based labels.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GraphJson {
    pub p: usize,
    pub edges: Vec<[usize; 2]>,
}

impl GraphJson {
    pub fn to_dag(&self) -> Result<Dag> {
        let mut g = Dag::empty(self.p).map_err(|e| Error::parse("field `p`", e.to_string()))?;
        for (k, &[i, j]) in self.edges.iter().enumerate() {
            let loc = format!("field `edges[{k}]`");
            if i == 0 || j == 0 || i > self.p || j > self.p {
                return Err(Error::parse(loc, format!("label outside 1..={}", self.p)));
            }
            let (a, b) = (i - 1, j - 1);
            if a == b {
                return Err(Error::parse(loc, format!("self-loop on {i}")));
            }
            if g.has_edge(a, b) {
                return Err(Error::parse(loc, format!("duplicate edge {i}->{j}")));
            }
            if g.has_edge(b, a) {
                return Err(Error::parse(loc, format!("{i}->{j} conflicts with {j}->{i}")));
            }
            g.insert_edge(a, b);
            if g.descendants(b).contains(a) {
                return Err(Error::parse(loc, format!("edge {i}->{j} closes a directed cycle")));
            }
        }
        Ok(g)
    }
}

impl fmt::Debug for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dag({self})")
    }
}

/// `p=3: 1->2, 2->3` with 1-based labels.
impl fmt::Display for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p={}:", self.p)?;
        for (k, (i, j)) in self.edges().into_iter().enumerate() {
            let sep = if k == 0 { " " } else { ", " };
            write!(f, "{sep}{}->{}", i + 1, j + 1)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dag(p: usize, e: &[(usize, usize)]) -> Dag {
        Dag::from_labels(p, e).unwrap()
    }

    fn set(labels: &[usize]) -> NodeSet {
        labels.iter().map(|l| l - 1).collect()
    }

    #[test]
    fn rejects_cycles_loops_and_duplicates() {
        assert!(Dag::from_labels(3, &[(1, 2), (2, 3), (3, 1)]).is_err());
        assert!(Dag::from_labels(2, &[(1, 1)]).is_err());
        assert!(Dag::from_labels(2, &[(1, 2), (1, 2)]).is_err());
        assert!(Dag::from_labels(2, &[(1, 2), (2, 1)]).is_err());
        assert!(Dag::from_labels(2, &[(1, 3)]).is_err());
        assert!(Dag::empty(0).is_err());
    }

    #[test]
    fn d_separation_examples() {
        let chain = dag(3, &[(1, 2), (2, 3)]);
        assert!(chain.d_separated(&set(&[1]), &set(&[3]), &set(&[2])).unwrap());
        assert!(!chain.d_separated(&set(&[1]), &set(&[3]), &set(&[])).unwrap());

        let collider = dag(3, &[(1, 2), (3, 2)]);
        assert!(collider.d_separated(&set(&[1]), &set(&[3]), &set(&[])).unwrap());
        assert!(!collider.d_separated(&set(&[1]), &set(&[3]), &set(&[2])).unwrap());
    }

    #[test]
    fn d_separation_descendant_of_collider_opens_path() {
        let g = dag(4, &[(1, 2), (3, 2), (2, 4)]);
        assert!(!g.d_separated(&set(&[1]), &set(&[3]), &set(&[4])).unwrap());
    }

    #[test]
    fn d_separation_argument_errors() {
        let g = dag(3, &[(1, 2)]);
        assert!(g.d_separated(&set(&[1]), &set(&[1]), &set(&[])).is_err());
        assert!(g.d_separated(&set(&[1]), &set(&[2]), &set(&[2])).is_err());
        assert!(g.d_separated(&set(&[1]), &set(&[4]), &set(&[])).is_err());
    }

    #[test]
    fn skeleton_examples() {
        let expect: BTreeSet<_> = [(0, 1), (1, 2)].into_iter().collect();
        assert_eq!(dag(3, &[(1, 2), (2, 3)]).skeleton(), expect);
        assert_eq!(dag(3, &[(2, 1), (2, 3)]).skeleton(), expect);
        assert!(dag(3, &[]).skeleton().is_empty());
    }

    #[test]
    fn v_structure_examples() {
        let expect: BTreeSet<_> = [(0, 1, 2)].into_iter().collect();
        assert_eq!(dag(3, &[(1, 2), (3, 2)]).v_structures(), expect);
        assert!(dag(3, &[(1, 2), (3, 2), (1, 3)]).v_structures().is_empty());
        assert!(dag(3, &[(1, 2), (2, 3)]).v_structures().is_empty());
    }

    #[test]
    fn markov_equivalence_examples() {
        let chain = dag(3, &[(1, 2), (2, 3)]);
        assert!(chain.markov_equivalent(&dag(3, &[(2, 1), (2, 3)])).unwrap());
        assert!(!chain.markov_equivalent(&dag(3, &[(1, 2), (3, 2)])).unwrap());
        assert!(chain.markov_equivalent(&chain).unwrap());
        assert!(chain.markov_equivalent(&dag(4, &[])).is_err());
    }

    #[test]
    fn covered_edge_examples() {
        assert!(dag(2, &[(1, 2)]).is_covered(0, 1));
        assert!(!dag(3, &[(1, 2), (3, 2)]).is_covered(0, 1));
        let chain = dag(3, &[(1, 2), (2, 3)]);
        assert!(!chain.is_covered(1, 2));
        assert_eq!(chain.covered_edges(), vec![(0, 1)]);
    }

    #[test]
    fn reverse_edge_examples() {
        assert_eq!(dag(2, &[(1, 2)]).reverse_edge(0, 1).unwrap(), dag(2, &[(2, 1)]));
        let chain = dag(3, &[(1, 2), (2, 3)]);
        assert_eq!(chain.reverse_edge(0, 1).unwrap(), dag(3, &[(2, 1), (2, 3)]));
        assert!(matches!(chain.reverse_edge(0, 2), Err(Error::InvalidArgument(_))));
        let tri = dag(3, &[(1, 2), (2, 3), (1, 3)]);
        assert!(matches!(tri.reverse_edge(0, 2), Err(Error::Internal(_))));
    }

    #[test]
    fn relation_examples() {
        let chain = dag(3, &[(1, 2), (2, 3)]);
        assert_eq!(chain.ancestors(2), set(&[1, 2]));
        assert_eq!(chain.descendants(0), set(&[2, 3]));
        assert_eq!(chain.parents(1), set(&[1]));
        assert_eq!(chain.children(1), set(&[3]));
        assert_eq!(chain.neighbors(1), set(&[1, 3]));
        let iso = dag(1, &[]);
        assert!(iso.ancestors(0).is_empty());
        assert!(iso.descendants(0).is_empty());
        assert!(iso.neighbors(0).is_empty());
        assert!(chain.check_node(3).is_err());
    }

    #[test]
    fn json_errors_name_the_field() {
        let err = Dag::from_json_str(r#"{"p": 3, "edges": [[1,2],[2,3],[3,1]]}"#).unwrap_err();
        assert!(err.to_string().contains("edges[2]"), "{err}");
        let err = Dag::from_json_str(r#"{"p": 3, "edges": [[1,2],[1,2]]}"#).unwrap_err();
        assert!(err.to_string().contains("edges[1]"), "{err}");
        let err = Dag::from_json_str("{\"p\": 3,\n \"edges\": [[1,2]").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let g = Dag::from_json_str(r#"{"p": 3, "edges": [[1,2],[2,3]]}"#).unwrap();
        assert_eq!(g, dag(3, &[(1, 2), (2, 3)]));
        assert_eq!(serde_json::to_string(&g.to_json()).unwrap(), r#"{"p":3,"edges":[[1,2],[2,3]]}"#);
    }
}
