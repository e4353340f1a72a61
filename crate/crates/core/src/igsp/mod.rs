//! Greedy search over permutations with interventional data.
//!
//! Each permutation is scored by the size of its minimal I-map. From the
//! current permutation a depth-first search walks I-covered edge reversals,
//! trying I-contradictory ones first, until it finds a strictly sparser
//! I-map and restarts there. When no such map is reachable the search
//! returns, among the I-maps of the last search, the one with the fewest
//! I-contradictory edges.

mod edges;
mod imap;

pub use edges::{
    count_i_contradictory, is_i_contradictory_general, is_i_contradictory_single, is_i_covered,
    ContradictionRule, DEFAULT_DEGREE_CAP,
};
pub use imap::{minimal_imap, update_imap_after_reversal, MinimalIMap};

use std::collections::HashMap;

use serde::Serialize;

use crate::graph::{Dag, Permutation};
use crate::interventions::TargetFamily;
use crate::semsim::rng_for;
use crate::stats::Decider;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub fam: TargetFamily,
    pub rule: ContradictionRule,
    pub pool: bool,
    /// Reversals per search from one root; `None` means `p(p−1)/2`.
    pub dfs_depth_limit: Option<usize>,
    /// Random starting permutations used by [`igsp_learn`].
    pub restarts: usize,
    pub seed: u64,
}

impl SearchConfig {
    /// Uses the single-node contradiction rule when every target has at
    /// most one node.
    pub fn new(fam: TargetFamily) -> Result<Self> {
        if !fam.has_empty() {
            return Err(Error::PreconditionViolation(
                "the search needs an observational (empty) target".into(),
            ));
        }
        let rule = if fam.is_single_node() {
            ContradictionRule::SingleNode
        } else {
            ContradictionRule::General {
                degree_cap: DEFAULT_DEGREE_CAP,
            }
        };
        Ok(SearchConfig {
            fam,
            rule,
            pool: false,
            dfs_depth_limit: None,
            restarts: 1,
            seed: 0,
        })
    }

    pub fn with_rule(mut self, rule: ContradictionRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_pool(mut self, pool: bool) -> Self {
        self.pool = pool;
        self
    }

    pub fn with_depth_limit(mut self, limit: Option<usize>) -> Self {
        self.dfs_depth_limit = limit;
        self
    }

    pub fn with_restarts(mut self, restarts: usize, seed: u64) -> Self {
        self.restarts = restarts;
        self.seed = seed;
        self
    }

    fn depth_limit(&self) -> usize {
        let p = self.fam.p();
        self.dfs_depth_limit.unwrap_or(p * p.saturating_sub(1) / 2).max(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveClass {
    IContradictory,
    ICovered,
}

/// One reversal tried during a search.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceStep {
    /// Index of the search (0 for the first root, +1 per restart).
    pub round: usize,
    pub depth: usize,
    pub permutation: Vec<usize>,
    #[serde(serialize_with = "ser_dag")]
    pub host: Dag,
    pub host_edges: usize,
    pub host_contradictory: usize,
    /// Reversed edge as 1-based labels.
    pub reversed: (usize, usize),
    pub class: MoveClass,
    pub result_edges: usize,
}

fn ser_dag<S: serde::Serializer>(g: &Dag, s: S) -> std::result::Result<S::Ok, S::Error> {
    g.to_json().serialize(s)
}

/// Root of each search round.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundStart {
    pub permutation: Vec<usize>,
    pub edges: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SearchTrace {
    pub rounds: Vec<RoundStart>,
    pub steps: Vec<TraceStep>,
    /// Distinct I-maps of the final round.
    pub final_stratum: usize,
    pub final_contradictory: usize,
    /// Some branch was cut by the depth limit.
    pub truncated: bool,
}

impl SearchTrace {
    /// Root edge counts never increase from one round to the next.
    pub fn is_monotone(&self) -> bool {
        self.rounds.windows(2).all(|w| w[1].edges <= w[0].edges)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub pi: Permutation,
    pub dag: Dag,
    pub contradictory: usize,
    pub trace: SearchTrace,
}

struct Frame {
    imap: MinimalIMap,
    moves: Vec<(usize, usize, MoveClass)>,
    next: usize,
    depth: usize,
}

/// I-covered reversals of `g`, contradictory first, each group in
/// lexicographic `(source, sink)` order; also the host's contradictory count.
fn moves_of(g: &Dag, dec: &Decider, cfg: &SearchConfig) -> (Vec<(usize, usize, MoveClass)>, usize) {
    let mut contra = 0;
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for (i, j) in g.edges() {
        let c = cfg.rule.check(g, i, j, dec, &cfg.fam);
        contra += usize::from(c);
        if is_i_covered(g, i, j, dec, &cfg.fam) {
            if c {
                first.push((i, j, MoveClass::IContradictory));
            } else {
                second.push((i, j, MoveClass::ICovered));
            }
        }
    }
    first.extend(second);
    (first, contra)
}

enum RoundOutcome {
    Sparser(MinimalIMap),
    Stratum(Vec<(MinimalIMap, usize)>),
}

fn search_round(
    root: MinimalIMap,
    round: usize,
    dec: &Decider,
    cfg: &SearchConfig,
    trace: &mut SearchTrace,
) -> Result<RoundOutcome> {
    let limit = cfg.depth_limit();
    let pool = cfg.pool.then_some(&cfg.fam);
    let root_edges = root.edge_count();
    let mut visited: HashMap<Dag, usize> = HashMap::new();
    let mut order: Vec<Dag> = Vec::new();
    let mut stratum: HashMap<Dag, (MinimalIMap, usize)> = HashMap::new();

    let (moves, contra) = moves_of(&root.g, dec, cfg);
    visited.insert(root.g.clone(), 0);
    order.push(root.g.clone());
    stratum.insert(root.g.clone(), (root.clone(), contra));
    let mut stack = vec![Frame {
        imap: root,
        moves,
        next: 0,
        depth: 0,
    }];

    while let Some(top) = stack.last_mut() {
        if top.next == top.moves.len() {
            stack.pop();
            continue;
        }
        let (i, j, class) = top.moves[top.next];
        top.next += 1;
        let child = update_imap_after_reversal(&top.imap, i, j, dec, pool)?;
        let depth = top.depth + 1;
        let host_contradictory = stratum.get(&top.imap.g).map_or(0, |e| e.1);
        trace.steps.push(TraceStep {
            round,
            depth,
            permutation: top.imap.pi.to_labels(),
            host: top.imap.g.clone(),
            host_edges: top.imap.edge_count(),
            host_contradictory,
            reversed: (i + 1, j + 1),
            class,
            result_edges: child.edge_count(),
        });
        if child.edge_count() < root_edges {
            return Ok(RoundOutcome::Sparser(child));
        }
        if visited.get(&child.g).is_some_and(|&d| d <= depth) {
            continue;
        }
        if depth > limit {
            trace.truncated = true;
            continue;
        }
        visited.insert(child.g.clone(), depth);
        let (moves, contra) = moves_of(&child.g, dec, cfg);
        if !stratum.contains_key(&child.g) {
            order.push(child.g.clone());
            stratum.insert(child.g.clone(), (child.clone(), contra));
        }
        stack.push(Frame {
            imap: child,
            moves,
            next: 0,
            depth,
        });
    }
    Ok(RoundOutcome::Stratum(
        order.into_iter().map(|g| stratum.remove(&g).expect("recorded")).collect(),
    ))
}

/// Runs the search from `pi0`.
pub fn igsp_search(dec: &Decider, cfg: &SearchConfig, pi0: &Permutation) -> Result<SearchResult> {
    if pi0.len() != cfg.fam.p() {
        return Err(Error::invalid(format!(
            "starting permutation has {} nodes, family has {}",
            pi0.len(),
            cfg.fam.p()
        )));
    }
    let mut trace = SearchTrace::default();
    let mut current = minimal_imap(pi0, dec)?;
    for round in 0.. {
        trace.rounds.push(RoundStart {
            permutation: current.pi.to_labels(),
            edges: current.edge_count(),
        });
        match search_round(current, round, dec, cfg, &mut trace)? {
            RoundOutcome::Sparser(next) => current = next,
            RoundOutcome::Stratum(stratum) => {
                trace.final_stratum = stratum.len();
                let (best, contra) = stratum
                    .into_iter()
                    .min_by(|a, b| {
                        (a.1, a.0.g.edges(), a.0.pi.order()).cmp(&(b.1, b.0.g.edges(), b.0.pi.order()))
                    })
                    .expect("stratum holds the root");
                trace.final_contradictory = contra;
                return Ok(SearchResult {
                    pi: best.pi,
                    dag: best.g,
                    contradictory: contra,
                    trace,
                });
            }
        }
    }
    unreachable!("rounds strictly decrease the edge count")
}

/// `count` random starting permutations; start `r` uses stream `r` of `seed`.
pub fn random_starts(p: usize, count: usize, seed: u64) -> Vec<Permutation> {
    (0..count)
        .map(|r| Permutation::random(p, &mut rng_for(seed, r as u64)))
        .collect()
}

/// Runs one search per start and keeps the sparsest result, then the one
/// with fewest contradictory edges, then the earliest start.
pub fn igsp_search_multi(dec: &Decider, cfg: &SearchConfig, starts: &[Permutation]) -> Result<SearchResult> {
    let mut best: Option<SearchResult> = None;
    for pi0 in starts {
        let r = igsp_search(dec, cfg, pi0)?;
        let better = best.as_ref().is_none_or(|b| {
            (r.dag.edge_count(), r.contradictory) < (b.dag.edge_count(), b.contradictory)
        });
        if better {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::invalid("no starting permutation given"))
}

/// Searches from `cfg.restarts` random permutations drawn from `cfg.seed`.
pub fn igsp_learn(dec: &Decider, cfg: &SearchConfig) -> Result<SearchResult> {
    igsp_search_multi(dec, cfg, &random_starts(cfg.fam.p(), cfg.restarts.max(1), cfg.seed))
}
