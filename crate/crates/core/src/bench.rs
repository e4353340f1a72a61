//! Simulation studies: draw random models, learn them, score by Hamming
//! distance and aggregate over replicates.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::index::sample;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::statistics::{Data, Distribution, Median, OrderStatistics};

use crate::graph::{Dag, NodeSet};
use crate::igsp::{igsp_learn, SearchConfig};
use crate::interventions::{i_markov_equivalent, TargetFamily};
use crate::semsim::{rng_for, sample_data, sample_random_dag, sample_weights, specs_for_family, InterventionKind};
use crate::stats::{
    Decider, DsepCi, GaussianCi, GaussianInvariance, HsicInvariance, IDagInvariance, InvarianceTest,
    TestCounts, DEFAULT_ALPHA_CI, DEFAULT_ALPHA_INV,
};
use crate::{Error, Result};

fn check_sizes(g1: &Dag, g2: &Dag) -> Result<()> {
    if g1.p() != g2.p() {
        return Err(Error::invalid(format!("graphs have {} and {} nodes", g1.p(), g2.p())));
    }
    Ok(())
}

/// Node pairs whose status (absent, `i -> j`, `j -> i`) differs; a
/// reversed edge counts once.
pub fn hamming_distance(g1: &Dag, g2: &Dag) -> Result<usize> {
    check_sizes(g1, g2)?;
    let p = g1.p();
    let mut d = 0;
    for i in 0..p {
        for j in i + 1..p {
            if (g1.has_edge(i, j), g1.has_edge(j, i)) != (g2.has_edge(i, j), g2.has_edge(j, i)) {
                d += 1;
            }
        }
    }
    Ok(d)
}

/// Node pairs adjacent in exactly one graph.
pub fn skeleton_hamming(g1: &Dag, g2: &Dag) -> Result<usize> {
    check_sizes(g1, g2)?;
    Ok(g1.skeleton().symmetric_difference(&g2.skeleton()).count())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyGenerator {
    Observational,
    AllSingletons,
    AllPairs,
    /// Single-node targets on `k` nodes drawn per replicate.
    KSubset { k: usize },
}

impl FamilyGenerator {
    pub fn family<R: RngCore>(&self, p: usize, rng: &mut R) -> Result<TargetFamily> {
        Ok(match *self {
            FamilyGenerator::Observational => TargetFamily::observational(p),
            FamilyGenerator::AllSingletons => TargetFamily::all_singletons(p),
            FamilyGenerator::AllPairs => TargetFamily::all_pairs(p),
            FamilyGenerator::KSubset { k } => {
                if k > p {
                    return Err(Error::invalid(format!("cannot pick {k} of {p} nodes")));
                }
                let mut nodes = sample(rng, p, k).into_vec();
                nodes.sort_unstable();
                let mut t = vec![NodeSet::empty()];
                t.extend(nodes.into_iter().map(NodeSet::singleton));
                TargetFamily::new(p, t)?
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvarianceKind {
    Gaussian,
    Hsic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DeciderConfig {
    /// d-separation in the true graph and its I-DAG; no data is drawn.
    Oracle,
    /// Fisher-z CI tests and the chosen invariance test on simulated data.
    Statistical {
        invariance: InvarianceKind,
        alpha_ci: f64,
        alpha_inv: f64,
        pool: bool,
        bonferroni: bool,
    },
}

impl DeciderConfig {
    pub fn statistical(invariance: InvarianceKind) -> Self {
        DeciderConfig::Statistical {
            invariance,
            alpha_ci: DEFAULT_ALPHA_CI,
            alpha_inv: DEFAULT_ALPHA_INV,
            pool: false,
            bonferroni: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub p: usize,
    pub avg_neighborhood: f64,
    pub n_per_block: usize,
    pub intervention: InterventionKind,
    pub family: FamilyGenerator,
    pub replicates: usize,
    pub seed: u64,
    pub decider: DeciderConfig,
    /// Random starting permutations per replicate.
    pub restarts: usize,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::invalid("plan needs p >= 2"));
        }
        if self.replicates == 0 || self.n_per_block == 0 || self.restarts == 0 {
            return Err(Error::invalid("replicates, n_per_block and restarts must be positive"));
        }
        self.intervention.validate()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let plan: ExperimentPlan =
            serde_json::from_str(text).map_err(|e| Error::parse(format!("line {}", e.line()), e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    /// SHA-256 of the compact JSON form.
    pub fn config_hash(&self) -> String {
        let text = serde_json::to_string(self).expect("plan serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub seed: u64,
    pub true_edges: usize,
    pub learned_edges: Option<usize>,
    pub hamming: Option<usize>,
    pub skeleton_hamming: Option<usize>,
    pub in_true_imec: Option<bool>,
    pub contradictory: Option<usize>,
    pub ci_tests: Option<usize>,
    pub invariance_tests: Option<usize>,
    pub truncated: Option<bool>,
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub mean: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut d = Data::new(values.to_vec());
        Some(Quartiles {
            q1: d.lower_quartile(),
            median: d.median(),
            q3: d.upper_quartile(),
            mean: d.mean().expect("non-empty"),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub completed: usize,
    pub failed: usize,
    pub hamming: Option<Quartiles>,
    pub skeleton_hamming: Option<Quartiles>,
    pub imec_rate: Option<f64>,
}

impl Summary {
    /// Recomputes the aggregates from the rows alone.
    pub fn from_rows(rows: &[ReplicateRow]) -> Self {
        let ok: Vec<&ReplicateRow> = rows.iter().filter(|r| r.error.is_none()).collect();
        let col = |f: fn(&ReplicateRow) -> Option<usize>| -> Vec<f64> {
            ok.iter().filter_map(|r| f(r)).map(|v| v as f64).collect()
        };
        let imec: Vec<bool> = ok.iter().filter_map(|r| r.in_true_imec).collect();
        Summary {
            completed: ok.len(),
            failed: rows.len() - ok.len(),
            hamming: Quartiles::of(&col(|r| r.hamming)),
            skeleton_hamming: Quartiles::of(&col(|r| r.skeleton_hamming)),
            imec_rate: (!imec.is_empty())
                .then(|| imec.iter().filter(|&&b| b).count() as f64 / imec.len() as f64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentResults {
    pub plan: ExperimentPlan,
    pub rows: Vec<ReplicateRow>,
    pub summary: Summary,
}

/// Seed of replicate `r`: the first draw of stream `r` of the plan seed.
pub fn replicate_seed(plan_seed: u64, r: usize) -> u64 {
    rng_for(plan_seed, r as u64).next_u64()
}

struct Learned {
    dag: Dag,
    fam: TargetFamily,
    contradictory: usize,
    counts: TestCounts,
    truncated: bool,
}

fn build_decider(plan: &ExperimentPlan, truth: &Dag, fam: &TargetFamily, seed: u64) -> Result<(Decider, bool)> {
    match plan.decider {
        DeciderConfig::Oracle => Ok((
            Decider::new(
                Box::new(DsepCi::new(truth.clone())),
                Some(Box::new(IDagInvariance::new(truth, fam)?)),
            ),
            false,
        )),
        DeciderConfig::Statistical {
            invariance,
            alpha_ci,
            alpha_inv,
            pool,
            bonferroni,
        } => {
            let model = sample_weights::<f64>(truth, seed.wrapping_add(1));
            let specs = specs_for_family(fam, plan.intervention)?;
            let data = sample_data(&model, &specs, plan.n_per_block, seed.wrapping_add(2))?;
            let inv: Box<dyn InvarianceTest> = match invariance {
                InvarianceKind::Gaussian => Box::new(GaussianInvariance::new(&data, alpha_inv)?),
                InvarianceKind::Hsic => Box::new(HsicInvariance::new(&data, alpha_inv)?),
            };
            let dec = Decider::new(Box::new(GaussianCi::new(&data, alpha_ci)?), Some(inv)).with_bonferroni(bonferroni);
            Ok((dec, pool))
        }
    }
}

fn learn(plan: &ExperimentPlan, truth: &Dag, seed: u64) -> Result<Learned> {
    let fam = plan.family.family(plan.p, &mut rng_for(seed, 3))?;
    let (dec, pool) = build_decider(plan, truth, &fam, seed)?;
    let cfg = SearchConfig::new(fam.clone())?
        .with_pool(pool)
        .with_restarts(plan.restarts, seed.wrapping_add(4));
    let r = igsp_learn(&dec, &cfg)?;
    Ok(Learned {
        dag: r.dag,
        fam,
        contradictory: r.contradictory,
        counts: dec.counts(),
        truncated: r.trace.truncated,
    })
}

/// One replicate. Failures after the graph is drawn are recorded in the
/// row rather than returned.
pub fn run_replicate(plan: &ExperimentPlan, r: usize) -> Result<ReplicateRow> {
    let start = Instant::now();
    let seed = replicate_seed(plan.seed, r);
    let truth = sample_random_dag(plan.p, plan.avg_neighborhood, seed)?;
    let mut row = ReplicateRow {
        replicate: r,
        seed,
        true_edges: truth.edge_count(),
        learned_edges: None,
        hamming: None,
        skeleton_hamming: None,
        in_true_imec: None,
        contradictory: None,
        ci_tests: None,
        invariance_tests: None,
        truncated: None,
        error: None,
        wall_ms: 0.0,
    };
    match learn(plan, &truth, seed) {
        Ok(l) => {
            row.learned_edges = Some(l.dag.edge_count());
            row.hamming = Some(hamming_distance(&truth, &l.dag)?);
            row.skeleton_hamming = Some(skeleton_hamming(&truth, &l.dag)?);
            row.in_true_imec = Some(i_markov_equivalent(&truth, &l.dag, &l.fam)?);
            row.contradictory = Some(l.contradictory);
            row.ci_tests = Some(l.counts.ci_queries);
            row.invariance_tests = Some(l.counts.invariance_queries);
            row.truncated = Some(l.truncated);
        }
        Err(e) => {
            log::warn!("replicate {r} failed: {e}");
            row.error = Some(e.to_string());
        }
    }
    row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(row)
}

/// All replicates, in parallel on the current rayon pool; rows come back
/// in replicate order.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResults> {
    plan.validate()?;
    let rows = (0..plan.replicates)
        .into_par_iter()
        .map(|r| {
            run_replicate(plan, r).unwrap_or_else(|e| ReplicateRow {
                replicate: r,
                seed: replicate_seed(plan.seed, r),
                true_edges: 0,
                learned_edges: None,
                hamming: None,
                skeleton_hamming: None,
                in_true_imec: None,
                contradictory: None,
                ci_tests: None,
                invariance_tests: None,
                truncated: None,
                error: Some(e.to_string()),
                wall_ms: 0.0,
            })
        })
        .collect::<Vec<_>>();
    let summary = Summary::from_rows(&rows);
    Ok(ExperimentResults {
        plan: plan.clone(),
        rows,
        summary,
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    config_hash: String,
    plan: &'a ExperimentPlan,
    summary: &'a Summary,
    results_csv: &'a str,
}

#[derive(Serialize)]
struct TimingRow {
    replicate: usize,
    wall_ms: f64,
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

impl ExperimentResults {
    pub fn rows_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(io_err)?;
        }
        String::from_utf8(w.into_inner().map_err(io_err)?).map_err(io_err)
    }

    pub fn manifest_json(&self) -> String {
        let m = Manifest {
            version: env!("CARGO_PKG_VERSION"),
            config_hash: self.plan.config_hash(),
            plan: &self.plan,
            summary: &self.summary,
            results_csv: "results.csv",
        };
        serde_json::to_string_pretty(&m).expect("manifest serializes")
    }

    /// Writes `results.csv` and `manifest.json`, which depend only on the
    /// plan, and `timings.csv`, which does not.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(io_err)?;
        fs::write(dir.join("results.csv"), self.rows_csv()?).map_err(io_err)?;
        fs::write(dir.join("manifest.json"), self.manifest_json()).map_err(io_err)?;
        let mut w = csv::Writer::from_path(dir.join("timings.csv")).map_err(io_err)?;
        for r in &self.rows {
            w.serialize(TimingRow {
                replicate: r.replicate,
                wall_ms: r.wall_ms,
            })
            .map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }
}
