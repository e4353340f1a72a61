use std::collections::HashMap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, RwLock};

use super::{CiTest, InvarianceTest, TestOutcome};
use crate::graph::NodeSet;
use crate::Result;

/// Canonical test identity. CI keys order the pair and sort the pool.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestKey {
    Ci {
        i: usize,
        j: usize,
        cond: NodeSet,
        pool: Vec<usize>,
    },
    Invariance {
        i: usize,
        cond: NodeSet,
        block: usize,
    },
}

impl TestKey {
    pub fn ci(i: usize, j: usize, cond: NodeSet, pool: &[usize]) -> Self {
        let mut pool = pool.to_vec();
        pool.sort_unstable();
        pool.dedup();
        TestKey::Ci {
            i: i.min(j),
            j: i.max(j),
            cond,
            pool,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestLogRow {
    pub key: TestKey,
    pub outcome: TestOutcome,
    pub accepted: bool,
}

impl TestLogRow {
    fn csv_line(&self) -> String {
        let cond = |c: &NodeSet| {
            c.to_labels()
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(";")
        };
        let (kind, i, other, c, decision) = match &self.key {
            TestKey::Ci { i, j, cond: c, pool } => {
                let kind = if pool.is_empty() {
                    "ci".to_string()
                } else {
                    let b: Vec<String> = pool.iter().map(usize::to_string).collect();
                    format!("ci_pooled:{}", b.join(";"))
                };
                let d = if self.accepted { "independent" } else { "dependent" };
                (kind, i + 1, j + 1, cond(c), d)
            }
            TestKey::Invariance { i, cond: c, block } => {
                let d = if self.accepted { "invariant" } else { "varying" };
                ("invariance".to_string(), i + 1, *block, cond(c), d)
            }
        };
        format!(
            "{kind},{i},{other},{c},{},{},{decision}",
            self.outcome.stat, self.outcome.p_value
        )
    }
}

/// Memo table shared by concurrent readers, with an append-only log of
/// fresh evaluations in insertion order.
#[derive(Debug, Default)]
pub struct TestCache {
    map: RwLock<HashMap<TestKey, TestOutcome>>,
    log: Mutex<Vec<TestLogRow>>,
}

impl TestCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &TestKey) -> Option<TestOutcome> {
        self.map.read().expect("cache lock").get(key).copied()
    }

    /// Stores `outcome` unless `key` is present; returns the stored value.
    pub fn insert(&self, key: TestKey, outcome: TestOutcome, accepted: bool) -> TestOutcome {
        let mut map = self.map.write().expect("cache lock");
        if let Some(v) = map.get(&key) {
            return *v;
        }
        map.insert(key.clone(), outcome);
        self.log.lock().expect("log lock").push(TestLogRow {
            key,
            outcome,
            accepted,
        });
        outcome
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn log(&self) -> Vec<TestLogRow> {
        self.log.lock().expect("log lock").clone()
    }

    /// Writes the log as `kind,i,j_or_block,cond,stat,p,decision`. Node
    /// labels are 1-based, blocks are 0-based family positions.
    pub fn write_log_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "kind,i,j_or_block,cond,stat,p,decision")?;
        for row in self.log.lock().expect("log lock").iter() {
            writeln!(w, "{}", row.csv_line())?;
        }
        Ok(())
    }
}

/// Counters of issued queries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct TestCounts {
    pub ci_queries: usize,
    pub ci_fresh: usize,
    pub invariance_queries: usize,
    pub invariance_fresh: usize,
    pub warnings: usize,
}

/// Binary decisions for the search, backed by a CI test, an optional
/// invariance test and a shared cache.
///
/// Failed tests are logged as warnings and answered conservatively
/// (dependent, varying).
pub struct Decider {
    ci: Box<dyn CiTest>,
    inv: Option<Box<dyn InvarianceTest>>,
    bonferroni: bool,
    cache: TestCache,
    ci_queries: AtomicUsize,
    inv_queries: AtomicUsize,
    warnings: AtomicUsize,
}

impl std::fmt::Debug for Decider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Decider")
            .field("ci", &self.ci.name())
            .field("inv", &self.inv.as_ref().map(|t| t.name()))
            .field("bonferroni", &self.bonferroni)
            .finish()
    }
}

impl Decider {
    pub fn new(ci: Box<dyn CiTest>, inv: Option<Box<dyn InvarianceTest>>) -> Self {
        Decider {
            ci,
            inv,
            bonferroni: false,
            cache: TestCache::new(),
            ci_queries: AtomicUsize::new(0),
            inv_queries: AtomicUsize::new(0),
            warnings: AtomicUsize::new(0),
        }
    }

    /// Divide the invariance level by the number of blocks in multi-block
    /// queries.
    pub fn with_bonferroni(mut self, on: bool) -> Self {
        self.bonferroni = on;
        self
    }

    pub fn ci_name(&self) -> &'static str {
        self.ci.name()
    }

    pub fn inv_name(&self) -> Option<&'static str> {
        self.inv.as_ref().map(|t| t.name())
    }

    pub fn has_invariance(&self) -> bool {
        self.inv.is_some()
    }

    pub fn cache(&self) -> &TestCache {
        &self.cache
    }

    pub fn counts(&self) -> TestCounts {
        let (mut ci_fresh, mut inv_fresh) = (0, 0);
        for row in self.cache.log.lock().expect("log lock").iter() {
            match row.key {
                TestKey::Ci { .. } => ci_fresh += 1,
                TestKey::Invariance { .. } => inv_fresh += 1,
            }
        }
        TestCounts {
            ci_queries: self.ci_queries.load(Ordering::Relaxed),
            ci_fresh,
            invariance_queries: self.inv_queries.load(Ordering::Relaxed),
            invariance_fresh: inv_fresh,
            warnings: self.warnings.load(Ordering::Relaxed),
        }
    }

    fn settle(&self, r: Result<TestOutcome>, what: &dyn Fn() -> String) -> TestOutcome {
        match r {
            Ok(o) => {
                if o.degenerate {
                    self.warnings.fetch_add(1, Ordering::Relaxed);
                }
                o
            }
            Err(e) => {
                self.warnings.fetch_add(1, Ordering::Relaxed);
                log::warn!("{} failed: {e}", what());
                TestOutcome::degenerate()
            }
        }
    }

    pub fn ci_outcome(&self, i: usize, j: usize, cond: &NodeSet, pool: &[usize]) -> TestOutcome {
        self.ci_queries.fetch_add(1, Ordering::Relaxed);
        let key = TestKey::ci(i, j, *cond, pool);
        if let Some(o) = self.cache.get(&key) {
            return o;
        }
        let TestKey::Ci { i, j, ref pool, .. } = key else { unreachable!() };
        let o = self.settle(self.ci.ci(i, j, cond, pool), &|| {
            format!("CI test ({}, {} | {cond})", i + 1, j + 1)
        });
        let accepted = o.accepts_null(self.ci.alpha());
        self.cache.insert(key, o, accepted)
    }

    /// `X_i ⫫ X_j | X_cond` on the observational block plus `pool`.
    pub fn independent(&self, i: usize, j: usize, cond: &NodeSet, pool: &[usize]) -> bool {
        self.ci_outcome(i, j, cond, pool).accepts_null(self.ci.alpha())
    }

    pub fn inv_outcome(&self, i: usize, cond: &NodeSet, block: usize) -> TestOutcome {
        let inv = self.inv.as_ref().expect("invariance test configured");
        self.inv_queries.fetch_add(1, Ordering::Relaxed);
        let key = TestKey::Invariance { i, cond: *cond, block };
        if let Some(o) = self.cache.get(&key) {
            return o;
        }
        let o = self.settle(inv.invariance(i, cond, block), &|| {
            format!("invariance test ({} | {cond}, block {block})", i + 1)
        });
        let accepted = o.accepts_null(inv.alpha());
        self.cache.insert(key, o, accepted)
    }

    /// `X_i | X_cond` is invariant in every listed block. Vacuously true
    /// for an empty list.
    pub fn invariant_all(&self, i: usize, cond: &NodeSet, blocks: &[usize]) -> bool {
        if blocks.is_empty() {
            return true;
        }
        let inv = self.inv.as_ref().expect("invariance test configured");
        let alpha = if self.bonferroni {
            inv.alpha() / blocks.len() as f64
        } else {
            inv.alpha()
        };
        blocks
            .iter()
            .all(|&b| self.inv_outcome(i, cond, b).accepts_null(alpha))
    }

    pub fn invariant(&self, i: usize, cond: &NodeSet, block: usize) -> bool {
        self.invariant_all(i, cond, &[block])
    }
}
