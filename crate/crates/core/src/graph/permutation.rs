use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use super::Dag;
use crate::{Error, Result};

/// Ordering of the nodes `0..p`; `order[k]` is the node at position `k`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    order: Vec<usize>,
    position: Vec<usize>,
}

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Permutation> {
        let p = order.len();
        let mut position = vec![usize::MAX; p];
        for (k, &v) in order.iter().enumerate() {
            if v >= p {
                return Err(Error::invalid(format!("permutation entry {} exceeds {p}", v + 1)));
            }
            if position[v] != usize::MAX {
                return Err(Error::invalid(format!("node {} repeated in permutation", v + 1)));
            }
            position[v] = k;
        }
        Ok(Permutation { order, position })
    }

    /// Parses 1-based labels.
    pub fn from_labels(labels: &[usize]) -> Result<Permutation> {
        if labels.contains(&0) {
            return Err(Error::invalid("permutation labels are 1-based"));
        }
        Permutation::new(labels.iter().map(|l| l - 1).collect())
    }

    pub fn identity(p: usize) -> Permutation {
        Permutation::new((0..p).collect()).expect("identity is a bijection")
    }

    pub fn random<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Permutation {
        let mut order: Vec<usize> = (0..p).collect();
        order.shuffle(rng);
        Permutation::new(order).expect("shuffle is a bijection")
    }

    /// A topological order of `g` (smallest index first among ready nodes).
    pub fn topological(g: &Dag) -> Permutation {
        Permutation::new(g.topological_order().expect("Dag is acyclic")).expect("bijection")
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    #[inline]
    pub fn position(&self, v: usize) -> usize {
        self.position[v]
    }

    pub fn to_labels(&self) -> Vec<usize> {
        self.order.iter().map(|v| v + 1).collect()
    }

    /// Nodes strictly before `v`.
    pub fn predecessors(&self, v: usize) -> super::NodeSet {
        self.order[..self.position[v]].iter().copied().collect()
    }

    /// Whether every edge of `g` points forward in this order.
    pub fn is_consistent_with(&self, g: &Dag) -> bool {
        g.p() == self.len() && g.edges().iter().all(|&(i, j)| self.position[i] < self.position[j])
    }

    /// Moves `node` so that it sits immediately before `anchor`.
    ///
    /// After reversing a covered edge `i -> j`, moving `j` in front of `i`
    /// gives an order consistent with the new graph; for adjacent `i, j`
    /// this is the plain transposition.
    pub fn move_before(&self, node: usize, anchor: usize) -> Permutation {
        let mut order = self.order.clone();
        let from = self.position[node];
        order.remove(from);
        let to = order.iter().position(|&v| v == anchor).expect("anchor present");
        order.insert(to, node);
        Permutation::new(order).expect("still a bijection")
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation{:?}", self.to_labels())
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.order.iter().map(|v| (v + 1).to_string()).collect();
        write!(f, "({})", labels.join(","))
    }
}
