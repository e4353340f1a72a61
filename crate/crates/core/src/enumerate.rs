//! Exhaustive DAG enumeration on a handful of nodes, I-MEC partitions and a
//! cross-check of the equivalence criteria against each other.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::Hash;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::graph::{Dag, NodeSet};
use crate::interventions::{conservative_signature, imec_signature, perfect_signature, TargetFamily};
use crate::{Error, Result};

pub const MAX_P: usize = 5;
pub const MAX_P_OPT_IN: usize = 6;

/// Every labeled DAG on `p` nodes, sorted, with an index by skeleton.
#[derive(Clone, Debug)]
pub struct DagCatalog {
    p: usize,
    dags: Vec<Dag>,
    by_skeleton: BTreeMap<BTreeSet<(usize, usize)>, Vec<usize>>,
}

impl DagCatalog {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.dags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dags.is_empty()
    }

    pub fn dags(&self) -> &[Dag] {
        &self.dags
    }

    pub fn dag(&self, k: usize) -> &Dag {
        &self.dags[k]
    }

    /// Indices of the DAGs sharing each skeleton.
    pub fn by_skeleton(&self) -> &BTreeMap<BTreeSet<(usize, usize)>, Vec<usize>> {
        &self.by_skeleton
    }

    pub fn index_of(&self, g: &Dag) -> Option<usize> {
        self.dags.binary_search(g).ok()
    }
}

fn pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p).flat_map(|a| (a + 1..p).map(move |b| (a, b))).collect()
}

fn permutations(p: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                cur.push(v);
                rec(cur, used, out);
                cur.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(p), &mut vec![false; p], &mut out);
    out
}

/// Every order of the nodes times every subset of order-respecting pairs,
/// deduplicated.
pub fn dags_by_orders(p: usize) -> Result<Vec<Dag>> {
    let pr = pairs(p);
    let mut seen = BTreeSet::new();
    for order in permutations(p) {
        for mask in 0u32..(1 << pr.len()) {
            let edges = pr
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &(a, b))| (order[a], order[b]));
            seen.insert(Dag::new(p, edges)?);
        }
    }
    Ok(seen.into_iter().collect())
}

/// Every digraph without 2-cycles (each pair absent, forward or backward),
/// keeping the acyclic ones.
pub fn dags_by_filtering(p: usize) -> Vec<Dag> {
    let pr = pairs(p);
    let total = 3usize.pow(pr.len() as u32);
    let mut out = Vec::new();
    let mut edges = Vec::with_capacity(pr.len());
    for code in 0..total {
        edges.clear();
        let mut c = code;
        for &(a, b) in &pr {
            match c % 3 {
                1 => edges.push((a, b)),
                2 => edges.push((b, a)),
                _ => {}
            }
            c /= 3;
        }
        if let Ok(g) = Dag::new(p, edges.iter().copied()) {
            out.push(g);
        }
    }
    out.sort();
    out
}

/// All DAGs on `p ∈ 1..=5` nodes.
pub fn enumerate_dags(p: usize) -> Result<DagCatalog> {
    enumerate_dags_with(p, false)
}

/// As [`enumerate_dags`]; `allow_six` lifts the cap to 6 nodes (3781503
/// graphs).
pub fn enumerate_dags_with(p: usize, allow_six: bool) -> Result<DagCatalog> {
    let cap = if allow_six { MAX_P_OPT_IN } else { MAX_P };
    if p == 0 || p > cap {
        return Err(Error::invalid(format!("enumeration needs 1 <= p <= {cap}, got {p}")));
    }
    let dags = dags_by_filtering(p);
    let mut by_skeleton: BTreeMap<_, Vec<usize>> = BTreeMap::new();
    for (k, g) in dags.iter().enumerate() {
        by_skeleton.entry(g.skeleton()).or_default().push(k);
    }
    Ok(DagCatalog { p, dags, by_skeleton })
}

fn classes_by_key<K: Hash + Eq>(keys: Vec<K>) -> Vec<Vec<usize>> {
    let mut slot: HashMap<K, usize> = HashMap::new();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (k, key) in keys.into_iter().enumerate() {
        let c = *slot.entry(key).or_insert_with(|| {
            classes.push(Vec::new());
            classes.len() - 1
        });
        classes[c].push(k);
    }
    classes
}

fn check_family(cat: &DagCatalog, fam: &TargetFamily) -> Result<()> {
    if fam.p() != cat.p() {
        return Err(Error::invalid(format!(
            "family is over {} nodes, catalog over {}",
            fam.p(),
            cat.p()
        )));
    }
    Ok(())
}

/// I-MECs of the catalog as lists of indices, ordered by smallest member.
/// Families with ∅ use the I-DAG criterion; conservative families without
/// ∅ use the relabeled criterion.
pub fn partition_imec(cat: &DagCatalog, fam: &TargetFamily) -> Result<Vec<Vec<usize>>> {
    check_family(cat, fam)?;
    if fam.has_empty() {
        let keys = cat
            .dags
            .iter()
            .map(|g| imec_signature(g, fam))
            .collect::<Result<Vec<_>>>()?;
        Ok(classes_by_key(keys))
    } else if fam.is_conservative() {
        let keys = cat
            .dags
            .iter()
            .map(|g| conservative_signature(g, fam))
            .collect::<Result<Vec<_>>>()?;
        Ok(classes_by_key(keys))
    } else {
        Err(Error::UnsupportedFamily(format!(
            "{fam} has no empty target and is not conservative"
        )))
    }
}

/// Class id of every catalog entry.
fn class_ids(classes: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut id = vec![0; n];
    for (c, members) in classes.iter().enumerate() {
        for &k in members {
            id[k] = c;
        }
    }
    id
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Skeleton and v-structures of the I-DAGs (needs ∅).
    IDag,
    /// Relabeled families, one I-DAG comparison per target.
    Relabeled,
    /// Markov equivalence of every cut graph (perfect interventions).
    Perfect,
}

/// Two DAGs on which two criteria disagree.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mismatch {
    pub g1: Vec<[usize; 2]>,
    pub g2: Vec<[usize; 2]>,
    pub criteria: (Criterion, Criterion),
    /// Verdict of the first criterion.
    pub first_says_equivalent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyReport {
    pub targets: Vec<Vec<usize>>,
    pub comparisons: Vec<(Criterion, Criterion)>,
    pub pairs_checked: usize,
    pub mismatches: Vec<Mismatch>,
    /// Pairs where the I-DAG criterion, applied outside its domain (no ∅),
    /// disagrees with the relabeled one. Expected and not a failure.
    pub out_of_domain_divergences: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossValidationReport {
    pub p: usize,
    pub families: Vec<FamilyReport>,
    pub total_mismatches: usize,
}

impl CrossValidationReport {
    pub fn passed(&self) -> bool {
        self.total_mismatches == 0
    }
}

/// Mismatches recorded per family beyond this many are only counted.
const MISMATCH_SAMPLE: usize = 20;

fn compare(
    cat: &DagCatalog,
    a: &[usize],
    b: &[usize],
    criteria: (Criterion, Criterion),
) -> (usize, Vec<Mismatch>) {
    let n = cat.len();
    let found: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|x| {
            (x + 1..n)
                .filter(move |&y| (a[x] == a[y]) != (b[x] == b[y]))
                .map(move |y| (x, y))
        })
        .collect();
    let sample = found
        .iter()
        .take(MISMATCH_SAMPLE)
        .map(|&(x, y)| Mismatch {
            g1: cat.dags[x].to_json().edges,
            g2: cat.dags[y].to_json().edges,
            criteria,
            first_says_equivalent: a[x] == a[y],
        })
        .collect();
    (found.len(), sample)
}

/// Runs every applicable pair of criteria over all DAG pairs of the
/// catalog, for each family in the battery.
pub fn cross_validate_theorems(cat: &DagCatalog, battery: &[TargetFamily]) -> Result<CrossValidationReport> {
    let n = cat.len();
    let mut families = Vec::with_capacity(battery.len());
    let mut total = 0;
    for fam in battery {
        check_family(cat, fam)?;
        if !fam.is_conservative() {
            return Err(Error::UnsupportedFamily(format!("{fam} is not conservative")));
        }
        let relabeled = class_ids(
            &classes_by_key(
                cat.dags
                    .iter()
                    .map(|g| conservative_signature(g, fam))
                    .collect::<Result<Vec<_>>>()?,
            ),
            n,
        );
        let naive = class_ids(
            &classes_by_key(
                cat.dags
                    .iter()
                    .map(|g| crate::interventions::build_idag(g, fam).map(|d| d.signature()))
                    .collect::<Result<Vec<_>>>()?,
            ),
            n,
        );
        let mut comparisons = Vec::new();
        let mut mismatches = Vec::new();
        let mut count = 0;
        let mut out_of_domain = 0;
        if fam.has_empty() {
            let perfect = class_ids(
                &classes_by_key(cat.dags.iter().map(|g| perfect_signature(g, fam)).collect()),
                n,
            );
            for (b, crit) in [(&relabeled, Criterion::Relabeled), (&perfect, Criterion::Perfect)] {
                let (c, m) = compare(cat, &naive, b, (Criterion::IDag, crit));
                comparisons.push((Criterion::IDag, crit));
                count += c;
                mismatches.extend(m);
            }
        } else {
            out_of_domain = compare(cat, &naive, &relabeled, (Criterion::IDag, Criterion::Relabeled)).0;
        }
        total += count;
        families.push(FamilyReport {
            targets: fam.to_json().targets,
            comparisons,
            pairs_checked: n * n.saturating_sub(1) / 2,
            mismatches,
            out_of_domain_divergences: out_of_domain,
        });
    }
    Ok(CrossValidationReport {
        p: cat.p(),
        families,
        total_mismatches: total,
    })
}

/// `{∅} ∪ {{i} : i ∈ S}` for every subset `S` of the nodes.
pub fn singleton_families(p: usize) -> Vec<TargetFamily> {
    NodeSet::full(p)
        .subsets()
        .into_iter()
        .map(|s| {
            let mut t = vec![NodeSet::empty()];
            t.extend(s.iter().map(NodeSet::singleton));
            TargetFamily::new(p, t).expect("nodes in range")
        })
        .collect()
}

/// `{∅}` plus every subset of the two-node targets.
pub fn pair_families(p: usize) -> Vec<TargetFamily> {
    let pr: Vec<NodeSet> = pairs(p).into_iter().map(|(a, b)| [a, b].into_iter().collect()).collect();
    (0u32..(1 << pr.len()))
        .map(|mask| {
            let mut t = vec![NodeSet::empty()];
            t.extend((0..pr.len()).filter(|b| mask >> b & 1 == 1).map(|b| pr[b]));
            TargetFamily::new(p, t).expect("nodes in range")
        })
        .collect()
}

/// Random conservative family: 1 to `p + 1` non-empty targets drawn
/// uniformly among proper subsets, plus ∅ when `with_empty`. Without ∅,
/// draws repeat until the family is conservative. Needs `p >= 2`.
pub fn random_conservative_family<R: Rng + ?Sized>(p: usize, with_empty: bool, rng: &mut R) -> TargetFamily {
    assert!(p >= 2, "no proper non-empty target on {p} node(s)");
    loop {
        let k = rng.random_range(1..=p + 1);
        let mut t = Vec::with_capacity(k + 1);
        if with_empty {
            t.push(NodeSet::empty());
        }
        for _ in 0..k {
            loop {
                let s: NodeSet = (0..p).filter(|_| rng.random_bool(0.5)).collect();
                if !s.is_empty() && s.len() < p {
                    t.push(s);
                    break;
                }
            }
        }
        let fam = TargetFamily::new(p, t).expect("nodes in range");
        if fam.is_conservative() {
            return fam;
        }
    }
}

/// Singleton and pair families with ∅, and `random` random conservative
/// families (alternately with and without ∅) from `seed`. A single node has
/// no proper non-empty target, so `p = 1` gets no random families.
pub fn theorem_battery(p: usize, random: usize, seed: u64) -> Vec<TargetFamily> {
    let mut out = singleton_families(p);
    out.extend(pair_families(p));
    if p >= 2 {
        let mut rng = crate::semsim::rng_for(seed, p as u64);
        out.extend((0..random).map(|r| random_conservative_family(p, r % 2 == 0, &mut rng)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interventions::i_markov_equivalent;

    #[test]
    fn counts_from_both_generators() {
        for (p, want) in [(1, 1), (2, 3), (3, 25), (4, 543)] {
            let a = dags_by_orders(p).unwrap();
            let b = dags_by_filtering(p);
            assert_eq!(a.len(), want);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn five_nodes() {
        assert_eq!(enumerate_dags(5).unwrap().len(), 29281);
    }

    #[test]
    fn range_is_checked() {
        assert!(enumerate_dags(0).is_err());
        assert!(enumerate_dags(6).is_err());
    }

    #[test]
    fn two_node_catalog() {
        let cat = enumerate_dags(2).unwrap();
        let want = vec![
            Dag::empty(2).unwrap(),
            Dag::from_labels(2, &[(1, 2)]).unwrap(),
            Dag::from_labels(2, &[(2, 1)]).unwrap(),
        ];
        let mut got = cat.dags().to_vec();
        got.sort();
        let mut w = want.clone();
        w.sort();
        assert_eq!(got, w);
        let classes = partition_imec(&cat, &TargetFamily::from_labels(2, &[&[], &[1]]).unwrap()).unwrap();
        assert_eq!(classes.len(), 3);
    }

    #[test]
    fn observational_partition_is_the_mec_partition() {
        let cat = enumerate_dags(3).unwrap();
        let classes = partition_imec(&cat, &TargetFamily::observational(3)).unwrap();
        assert_eq!(classes.len(), 11);
        for c in &classes {
            for &x in c {
                assert!(cat.dag(x).markov_equivalent(cat.dag(c[0])).unwrap());
            }
        }
    }

    #[test]
    fn partition_agrees_with_pairwise_criterion() {
        let cat = enumerate_dags(3).unwrap();
        let fam = TargetFamily::from_labels(3, &[&[], &[1], &[2, 3]]).unwrap();
        let id = class_ids(&partition_imec(&cat, &fam).unwrap(), cat.len());
        for x in 0..cat.len() {
            for y in 0..cat.len() {
                assert_eq!(id[x] == id[y], i_markov_equivalent(cat.dag(x), cat.dag(y), &fam).unwrap());
            }
        }
    }

    #[test]
    fn unsupported_family() {
        let cat = enumerate_dags(2).unwrap();
        let fam = TargetFamily::from_labels(2, &[&[1, 2]]).unwrap();
        assert!(matches!(partition_imec(&cat, &fam), Err(Error::UnsupportedFamily(_))));
    }

    #[test]
    fn two_node_swap_family_diverges_only_out_of_domain() {
        let cat = enumerate_dags(2).unwrap();
        let fam = TargetFamily::from_labels(2, &[&[1], &[2]]).unwrap();
        let r = cross_validate_theorems(&cat, &[fam]).unwrap();
        assert!(r.passed());
        assert!(r.families[0].out_of_domain_divergences > 0);
    }

    #[test]
    fn battery_on_three_nodes() {
        let cat = enumerate_dags(3).unwrap();
        let r = cross_validate_theorems(&cat, &theorem_battery(3, 20, 1)).unwrap();
        assert!(r.passed(), "{:?}", r.families.iter().find(|f| !f.mismatches.is_empty()));
    }
}
