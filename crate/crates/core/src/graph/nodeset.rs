use std::fmt;

use serde::{Deserialize, Serialize};

/// Largest vertex count a [`NodeSet`] can address. Graphs augmented with
/// intervention vertices count against this bound too.
pub const MAX_VERTICES: usize = 256;

const WORDS: usize = MAX_VERTICES / 64;

/// Fixed-width bit set of 0-based vertex indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NodeSet {
    words: [u64; WORDS],
}

impl NodeSet {
    pub const fn empty() -> Self {
        NodeSet { words: [0; WORDS] }
    }

    pub fn singleton(v: usize) -> Self {
        let mut s = Self::empty();
        s.insert(v);
        s
    }

    /// All vertices `0..n`.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_VERTICES);
        let mut s = Self::empty();
        for (w, word) in s.words.iter_mut().enumerate() {
            let lo = w * 64;
            if n >= lo + 64 {
                *word = u64::MAX;
            } else if n > lo {
                *word = (1u64 << (n - lo)) - 1;
            }
        }
        s
    }

    #[inline]
    pub fn insert(&mut self, v: usize) -> bool {
        debug_assert!(v < MAX_VERTICES);
        let (w, b) = (v / 64, v % 64);
        let had = self.words[w] >> b & 1 == 1;
        self.words[w] |= 1 << b;
        !had
    }

    #[inline]
    pub fn remove(&mut self, v: usize) -> bool {
        let (w, b) = (v / 64, v % 64);
        let had = self.words[w] >> b & 1 == 1;
        self.words[w] &= !(1 << b);
        had
    }

    #[inline]
    pub fn contains(&self, v: usize) -> bool {
        v < MAX_VERTICES && self.words[v / 64] >> (v % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn union(&self, other: &NodeSet) -> NodeSet {
        let mut out = *self;
        for (a, b) in out.words.iter_mut().zip(other.words.iter()) {
            *a |= b;
        }
        out
    }

    pub fn intersection(&self, other: &NodeSet) -> NodeSet {
        let mut out = *self;
        for (a, b) in out.words.iter_mut().zip(other.words.iter()) {
            *a &= b;
        }
        out
    }

    pub fn difference(&self, other: &NodeSet) -> NodeSet {
        let mut out = *self;
        for (a, b) in out.words.iter_mut().zip(other.words.iter()) {
            *a &= !b;
        }
        out
    }

    pub fn without(&self, v: usize) -> NodeSet {
        let mut out = *self;
        out.remove(v);
        out
    }

    pub fn with(&self, v: usize) -> NodeSet {
        let mut out = *self;
        out.insert(v);
        out
    }

    pub fn is_disjoint(&self, other: &NodeSet) -> bool {
        self.words.iter().zip(other.words.iter()).all(|(a, b)| a & b == 0)
    }

    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.words.iter().zip(other.words.iter()).all(|(a, b)| a & !b == 0)
    }

    /// Largest member plus one, or 0 for the empty set.
    pub fn bound(&self) -> usize {
        for w in (0..WORDS).rev() {
            if self.words[w] != 0 {
                return w * 64 + 64 - self.words[w].leading_zeros() as usize;
            }
        }
        0
    }

    pub fn first(&self) -> Option<usize> {
        self.iter().next()
    }

    pub fn iter(&self) -> Iter {
        Iter {
            words: self.words,
            w: 0,
        }
    }

    /// 1-based labels in increasing order.
    pub fn to_labels(&self) -> Vec<usize> {
        self.iter().map(|v| v + 1).collect()
    }

    /// Builds a set from 1-based labels, checking each against `p`.
    pub fn from_labels(labels: &[usize], p: usize) -> crate::Result<NodeSet> {
        let mut s = NodeSet::empty();
        for &l in labels {
            if l == 0 || l > p {
                return Err(crate::Error::invalid(format!(
                    "node label {l} outside 1..={p}"
                )));
            }
            if !s.insert(l - 1) {
                return Err(crate::Error::invalid(format!("duplicate node label {l}")));
            }
        }
        Ok(s)
    }

    /// Every subset of `self`, starting with the empty set.
    pub fn subsets(&self) -> Vec<NodeSet> {
        let members: Vec<usize> = self.iter().collect();
        assert!(members.len() < 31, "subset enumeration over {} members", members.len());
        (0u32..1 << members.len())
            .map(|mask| {
                let mut s = NodeSet::empty();
                for (b, &v) in members.iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        s.insert(v);
                    }
                }
                s
            })
            .collect()
    }
}

pub struct Iter {
    words: [u64; WORDS],
    w: usize,
}

impl Iterator for Iter {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        while self.w < WORDS {
            let word = self.words[self.w];
            if word != 0 {
                let b = word.trailing_zeros() as usize;
                self.words[self.w] &= word - 1;
                return Some(self.w * 64 + b);
            }
            self.w += 1;
        }
        None
    }
}

impl IntoIterator for &NodeSet {
    type Item = usize;
    type IntoIter = Iter;
    fn into_iter(self) -> Iter {
        self.iter()
    }
}

impl FromIterator<usize> for NodeSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = NodeSet::empty();
        for v in iter {
            s.insert(v);
        }
        s
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Renders 1-based labels, e.g. `{1,3}`.
impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, v) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", v + 1)?;
        }
        write!(f, "}}")
    }
}

impl Serialize for NodeSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_labels().serialize(s)
    }
}

impl<'de> Deserialize<'de> for NodeSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let labels = Vec::<usize>::deserialize(d)?;
        let mut s = NodeSet::empty();
        for l in labels {
            if l == 0 || l > MAX_VERTICES {
                return Err(serde::de::Error::custom(format!("node label {l} out of range")));
            }
            s.insert(l - 1);
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_and_bound() {
        assert_eq!(NodeSet::full(0).len(), 0);
        assert_eq!(NodeSet::full(70).len(), 70);
        assert_eq!(NodeSet::full(70).bound(), 70);
        assert_eq!(NodeSet::full(256).len(), 256);
        assert_eq!(NodeSet::empty().bound(), 0);
    }

    #[test]
    fn iteration_is_sorted_across_words() {
        let s: NodeSet = [200, 3, 64, 63].into_iter().collect();
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![3, 63, 64, 200]);
        assert_eq!(s.to_labels(), vec![4, 64, 65, 201]);
    }

    #[test]
    fn labels_reject_out_of_range_and_duplicates() {
        assert!(NodeSet::from_labels(&[0], 3).is_err());
        assert!(NodeSet::from_labels(&[4], 3).is_err());
        assert!(NodeSet::from_labels(&[2, 2], 3).is_err());
        assert_eq!(NodeSet::from_labels(&[3, 1], 3).unwrap().to_labels(), vec![1, 3]);
    }

    #[test]
    fn subsets_enumerates_power_set() {
        let s: NodeSet = [1, 4, 9].into_iter().collect();
        let subs = s.subsets();
        assert_eq!(subs.len(), 8);
        assert_eq!(subs[0], NodeSet::empty());
        assert!(subs.iter().all(|x| x.is_subset(&s)));
    }
}
