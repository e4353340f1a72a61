//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p igsp --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use igsp::bench::{run_experiment, DeciderConfig, ExperimentPlan, FamilyGenerator, InvarianceKind};
use igsp::enumerate::{cross_validate_theorems, enumerate_dags, random_conservative_family, theorem_battery};
use igsp::igsp::{igsp_search, is_i_covered, random_starts, SearchConfig, SearchTrace};
use igsp::interventions::{build_idag, i_markov_equivalent, i_markov_equivalent_conservative};
use igsp::semsim::{rng_for, sample_data, sample_random_dag, sample_weights, specs_for_family, InterventionKind};
use igsp::stats::{
    fisher_z_ci, gaussian_invariance, hsic_index_invariance, pool_eligible_blocks, CiTest, Decider, DsepCi,
    GaussianCi, GaussianInvariance, IDagInvariance, InvarianceTest, TestOutcome,
};
use igsp::{Dag, NodeSet, Permutation, Result, SemModel64, TargetFamily};
use rand::Rng;

type Verdict = Result<(bool, String)>;

fn oracle(truth: &Dag, fam: &TargetFamily) -> Result<Decider> {
    Ok(Decider::new(
        Box::new(DsepCi::new(truth.clone())),
        Some(Box::new(IDagInvariance::new(truth, fam)?)),
    ))
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut families = 0;
    let mut pairs = 0;
    let mut mismatches = 0;
    for p in 1..=4 {
        let cat = enumerate_dags(p)?;
        let battery = theorem_battery(p, 20, 2024);
        families += battery.len();
        let report = cross_validate_theorems(&cat, &battery)?;
        pairs += report.families.iter().map(|f| f.pairs_checked).sum::<usize>();
        mismatches += report.total_mismatches;
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        mismatches == 0 && secs < 60.0,
        format!("{families} families, {pairs} DAG pairs, {mismatches} mismatches, {secs:.1}s"),
    ))
}

fn check(failures: &mut Vec<&'static str>, ok: bool, what: &'static str) {
    if !ok {
        failures.push(what);
    }
}

fn invariant(d: &IDagInvariance, i: usize, cond: &[usize], block: usize) -> Result<bool> {
    let c: NodeSet = cond.iter().map(|l| l - 1).collect();
    Ok(d.invariance(i - 1, &c, block)?.accepts_null(0.5))
}

fn criterion_2() -> Verdict {
    let mut failures = Vec::new();

    let chain = Dag::from_labels(3, &[(1, 2), (2, 3)])?;
    let fam = TargetFamily::from_labels(3, &[&[], &[2], &[3]])?;
    let idag = build_idag(&chain, &fam)?;
    check(
        &mut failures,
        idag.graph().edges() == vec![(0, 1), (1, 2), (3, 1), (4, 2)],
        "figure 1 I-DAG",
    );

    let inv = IDagInvariance::new(&chain, &fam)?;
    check(
        &mut failures,
        invariant(&inv, 1, &[], 1)? && invariant(&inv, 1, &[], 2)?,
        "X1 invariant under {2} and {3}",
    );
    check(&mut failures, invariant(&inv, 3, &[2], 1)?, "X3 | X2 invariant under {2}");
    check(&mut failures, invariant(&inv, 2, &[1], 2)?, "X2 | X1 invariant under {3}");
    check(&mut failures, !invariant(&inv, 2, &[1], 1)?, "X2 | X1 varies under {2}");
    check(&mut failures, !invariant(&inv, 3, &[], 1)?, "X3 varies under {2}");

    let a = Dag::from_labels(3, &[(1, 2), (2, 3)])?;
    let b = Dag::from_labels(3, &[(2, 1), (2, 3)])?;
    let c = Dag::from_labels(3, &[(3, 2), (2, 1)])?;
    let fam2 = TargetFamily::from_labels(3, &[&[], &[1], &[2, 3]])?;
    check(&mut failures, !i_markov_equivalent(&a, &b, &fam2)?, "figure 2 (a) vs (b)");
    check(&mut failures, i_markov_equivalent(&b, &c, &fam2)?, "figure 2 (b) vs (c)");

    let fam3 = TargetFamily::from_labels(3, &[&[2], &[3]])?;
    check(
        &mut failures,
        !i_markov_equivalent_conservative(&a, &b, &fam3)?,
        "figure 3 (a) vs (b)",
    );
    let relabeled = fam3.relabeled(0)?;
    check(
        &mut failures,
        relabeled.targets() == TargetFamily::from_labels(3, &[&[], &[2, 3]])?.targets(),
        "figure 3 relabeled family",
    );

    let fwd = Dag::from_labels(2, &[(1, 2)])?;
    let bwd = Dag::from_labels(2, &[(2, 1)])?;
    let swap = TargetFamily::from_labels(2, &[&[1], &[2]])?;
    check(
        &mut failures,
        i_markov_equivalent_conservative(&fwd, &bwd, &swap)?,
        "1->2 ~ 2->1 under {{1},{2}}",
    );

    let detail = if failures.is_empty() {
        "11 checks".to_string()
    } else {
        format!("failed: {}", failures.join("; "))
    };
    Ok((failures.is_empty(), detail))
}

struct Searched {
    in_imec: bool,
    trace: SearchTrace,
    truth: Dag,
    fam: TargetFamily,
}

fn oracle_searches() -> Result<Vec<Searched>> {
    let mut out = Vec::new();
    let mut rng = rng_for(12, 0);
    for k in 0..200usize {
        let p = [4, 5, 6][k % 3];
        let density = [1.0, 1.5][(k / 3) % 2];
        let truth = sample_random_dag(p, density, rng.random())?;
        let fam = random_conservative_family(p, true, &mut rng);
        let dec = oracle(&truth, &fam)?;
        let cfg = SearchConfig::new(fam.clone())?;
        for pi0 in random_starts(p, 5, rng.random()) {
            let r = igsp_search(&dec, &cfg, &pi0)?;
            out.push(Searched {
                in_imec: i_markov_equivalent(&r.dag, &truth, &fam)?,
                trace: r.trace,
                truth: truth.clone(),
                fam: fam.clone(),
            });
        }
    }
    Ok(out)
}

fn criterion_3(runs: &[Searched], secs: f64) -> Verdict {
    let instances = runs.len() / 5;
    let ok_instances = runs.chunks(5).filter(|c| c.iter().all(|s| s.in_imec)).count();
    let ok_searches = runs.iter().filter(|s| s.in_imec).count();
    Ok((
        ok_instances == instances && instances == 200 && secs < 300.0,
        format!(
            "{ok_instances}/{instances} instances, {ok_searches}/{} searches in the true I-MEC, {secs:.1}s",
            runs.len()
        ),
    ))
}

fn criterion_4(runs: &[Searched]) -> Verdict {
    let mut monotone = 0;
    let mut covered = 0;
    let mut steps = 0;
    for s in runs {
        monotone += usize::from(s.trace.is_monotone());
        let dec = oracle(&s.truth, &s.fam)?;
        let ok = s.trace.steps.iter().all(|st| {
            let (i, j) = st.reversed;
            is_i_covered(&st.host, i - 1, j - 1, &dec, &s.fam)
        });
        covered += usize::from(ok);
        steps += s.trace.steps.len();
    }
    let n = runs.len();
    Ok((
        monotone == n && covered == n,
        format!("{monotone}/{n} monotone, {covered}/{n} with only I-covered reversals ({steps} steps)"),
    ))
}

const TRIALS: u64 = 2000;
const ALPHAS: [f64; 2] = [0.01, 0.05];
const TOL: f64 = 0.025;

fn chain_model() -> Result<SemModel64> {
    let g = Dag::from_labels(3, &[(1, 2), (2, 3)])?;
    SemModel64::new(g, &[(0, 1, 0.8), (1, 2, 0.8)], vec![1.0; 3])
}

/// Rejection rate at each level in [`ALPHAS`].
fn rates(p_values: &[f64]) -> [f64; 2] {
    ALPHAS.map(|a| p_values.iter().filter(|&&p| p < a).count() as f64 / p_values.len() as f64)
}

fn calibrated(r: [f64; 2]) -> bool {
    r.iter().zip(ALPHAS).all(|(r, a)| (r - a).abs() <= TOL)
}

type TwoSample<'a> = dyn Fn(&igsp::Matrix64, &igsp::Matrix64) -> Result<TestOutcome> + 'a;

fn criterion_5() -> Verdict {
    let m = chain_model()?;
    let n = 1000;
    let s1 = NodeSet::singleton(1);
    let mut tests: Vec<(&str, Box<TwoSample>)> = vec![
        ("fisher_z X1⫫X3|X2", Box::new(|a, _| fisher_z_ci(a, 0, 2, &s1))),
        ("gaussian X2", Box::new(|a, b| gaussian_invariance(a, b, 1, &NodeSet::empty()))),
        ("gaussian X3|X2", Box::new(|a, b| gaussian_invariance(a, b, 2, &s1))),
        ("hsic X2", Box::new(|a, b| hsic_index_invariance(a, b, 1, &NodeSet::empty()))),
        ("hsic X3|X2", Box::new(|a, b| hsic_index_invariance(a, b, 2, &s1))),
    ];
    let mut p_values = vec![Vec::with_capacity(TRIALS as usize); tests.len()];
    for t in 0..TRIALS {
        let a = sample_data(&m, &[], n, 2 * t)?;
        let b = sample_data(&m, &[], n, 2 * t + 1)?;
        for (k, (_, f)) in tests.iter_mut().enumerate() {
            p_values[k].push(f(a.block(0), b.block(0))?.p_value);
        }
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for ((name, _), pv) in tests.iter().zip(&p_values) {
        let r = rates(pv);
        ok &= calibrated(r);
        parts.push(format!("{name} {:.4}/{:.4}", r[0], r[1]));
    }
    Ok((ok, format!("rejection at α=0.01/0.05, n={n}, {TRIALS} trials: {}", parts.join(", "))))
}

struct PoolFixture {
    name: &'static str,
    model: SemModel64,
    fam: TargetFamily,
    g_pi: Dag,
    i: usize,
    k: usize,
}

impl PoolFixture {
    fn cond(&self) -> NodeSet {
        self.g_pi.ancestors(self.i).without(self.k)
    }
}

fn pool_fixtures() -> Result<Vec<PoolFixture>> {
    let complete = Dag::from_labels(3, &[(1, 2), (1, 3), (2, 3)])?;
    let collider = Dag::from_labels(3, &[(1, 3), (2, 3)])?;
    Ok(vec![
        PoolFixture {
            name: "chain",
            model: chain_model()?,
            fam: TargetFamily::from_labels(3, &[&[], &[1], &[2], &[3], &[2, 3]])?,
            g_pi: complete.clone(),
            i: 2,
            k: 0,
        },
        PoolFixture {
            name: "collider",
            model: SemModel64::new(collider, &[(0, 2, 0.8), (1, 2, -0.6)], vec![1.0; 3])?,
            fam: TargetFamily::from_labels(3, &[&[], &[1], &[2], &[3], &[1, 2]])?,
            g_pi: complete,
            i: 1,
            k: 0,
        },
    ])
}

fn criterion_7() -> Verdict {
    let pi = Permutation::identity(3);
    let mut ok = true;
    let mut worst_ineligible = 0.0f64;
    let mut parts = Vec::new();
    for fx in pool_fixtures()? {
        let cond = fx.cond();
        let truth = fx.model.dag();
        let independent =
            truth.d_separated(&NodeSet::singleton(fx.i), &NodeSet::singleton(fx.k), &cond)?;
        ok &= independent;
        let eligible = pool_eligible_blocks(&fx.g_pi, &pi, &fx.fam, fx.i, fx.k)?;
        let specs = specs_for_family(&fx.fam, InterventionKind::Perfect)?;
        let blocks = fx.fam.len();
        let mut p_values = vec![Vec::with_capacity(TRIALS as usize); blocks];
        let mut all_eligible = Vec::with_capacity(TRIALS as usize);
        for t in 0..TRIALS {
            let data = sample_data(&fx.model, &specs, 1000, 7000 + t)?;
            let ci = GaussianCi::new(&data, 0.05)?;
            for (b, pv) in p_values.iter_mut().enumerate().skip(1) {
                pv.push(ci.ci(fx.i, fx.k, &cond, &[b])?.p_value);
            }
            all_eligible.push(ci.ci(fx.i, fx.k, &cond, &eligible)?.p_value);
        }
        ok &= !eligible.is_empty() && calibrated(rates(&all_eligible));
        for (b, pv) in p_values.iter().enumerate().skip(1) {
            let r = rates(pv);
            let label = fx.fam.target(b).to_labels();
            if eligible.contains(&b) {
                ok &= calibrated(r);
                parts.push(format!("{} {label:?} eligible {:.4}/{:.4}", fx.name, r[0], r[1]));
            } else {
                worst_ineligible = worst_ineligible.max(r[1] / 0.05);
                parts.push(format!("{} {label:?} ineligible {:.4}/{:.4}", fx.name, r[0], r[1]));
            }
        }
    }
    ok &= worst_ineligible > 3.0;
    Ok((
        ok,
        format!(
            "rejection at α=0.01/0.05: {}; largest ineligible rate {worst_ineligible:.1}×α at α=0.05",
            parts.join(", ")
        ),
    ))
}

fn golden() -> serde_json::Value {
    serde_json::from_str(include_str!("golden/criterion6.json")).expect("golden file parses")
}

fn criterion_6() -> Verdict {
    let g = golden();
    let gp = &g["plan"];
    let floor = g["imec_rate_floor"].as_f64().expect("floor");
    let base = ExperimentPlan {
        p: gp["p"].as_u64().expect("p") as usize,
        avg_neighborhood: gp["avg_neighborhood"].as_f64().expect("density"),
        n_per_block: 500,
        intervention: InterventionKind::Perfect,
        family: FamilyGenerator::AllSingletons,
        replicates: gp["replicates"].as_u64().expect("replicates") as usize,
        seed: gp["seed"].as_u64().expect("seed"),
        decider: DeciderConfig::Statistical {
            invariance: InvarianceKind::Gaussian,
            alpha_ci: gp["alpha_ci"].as_f64().expect("alpha"),
            alpha_inv: gp["alpha_inv"].as_f64().expect("alpha"),
            pool: gp["pool"].as_bool().expect("pool"),
            bonferroni: false,
        },
        restarts: gp["restarts"].as_u64().expect("restarts") as usize,
    };
    let summarize = |plan: ExperimentPlan| -> Result<(f64, f64)> {
        let s = run_experiment(&plan)?.summary;
        let h = s.hamming.expect("completed replicates");
        Ok((h.median, s.imec_rate.unwrap_or(0.0)))
    };
    let mut medians = Vec::new();
    let mut imec = 0.0;
    for n in [500, 2000, 10000] {
        let (m, r) = summarize(ExperimentPlan { n_per_block: n, ..base.clone() })?;
        medians.push(m);
        imec = r;
    }
    let at = |kind, family| ExperimentPlan {
        n_per_block: 10000,
        intervention: kind,
        family,
        ..base.clone()
    };
    let (inhib, _) = summarize(at(InterventionKind::inhibiting(), FamilyGenerator::AllSingletons))?;
    let (imperf, _) = summarize(at(InterventionKind::imperfect(), FamilyGenerator::AllSingletons))?;
    let (obs, _) = summarize(at(InterventionKind::Perfect, FamilyGenerator::Observational))?;
    let trend = medians.windows(2).all(|w| w[1] <= w[0]);
    let a = imec >= floor && trend;
    let b = inhib < obs && imperf < obs;
    Ok((
        a && b,
        format!(
            "(a) I-MEC rate {imec:.2} (floor {floor}), median Hamming over n=500/2000/10000 {medians:?}: {}; \
             (b) medians inhibiting {inhib}, imperfect {imperf}, observational {obs}: {}",
            if a { "ok" } else { "fail" },
            if b { "ok" } else { "fail" },
        ),
    ))
}

fn small_plan() -> ExperimentPlan {
    ExperimentPlan {
        p: 6,
        avg_neighborhood: 1.5,
        n_per_block: 400,
        intervention: InterventionKind::imperfect(),
        family: FamilyGenerator::KSubset { k: 3 },
        replicates: 6,
        seed: 77,
        decider: DeciderConfig::statistical(InvarianceKind::Hsic),
        restarts: 2,
    }
}

fn search_trace_json(seed: u64) -> Result<String> {
    let truth = sample_random_dag(7, 2.0, seed)?;
    let fam = TargetFamily::all_singletons(7);
    let model = sample_weights::<f64>(&truth, seed + 1);
    let data = sample_data(&model, &specs_for_family(&fam, InterventionKind::Perfect)?, 500, seed + 2)?;
    let dec = Decider::new(
        Box::new(GaussianCi::new(&data, 0.01)?),
        Some(Box::new(GaussianInvariance::new(&data, 0.01)?)),
    );
    let cfg = SearchConfig::new(fam)?.with_pool(true);
    let r = igsp_search(&dec, &cfg, &random_starts(7, 1, seed)[0])?;
    Ok(serde_json::to_string(&(r.dag.to_json(), r.pi.to_labels(), &r.trace)).expect("trace serializes"))
}

fn criterion_8() -> Verdict {
    let mut failures = Vec::new();

    let truth = sample_random_dag(6, 2.0, 5)?;
    let model = sample_weights::<f64>(&truth, 6);
    for kind in [InterventionKind::Perfect, InterventionKind::imperfect()] {
        let specs = specs_for_family(&TargetFamily::all_singletons(6), kind)?;
        let a = sample_data(&model, &specs, 300, 9)?.to_csv_string();
        let b = sample_data(&model, &specs, 300, 9)?.to_csv_string();
        check(&mut failures, a == b, "dataset CSV");
    }

    let plan = small_plan();
    let run_on = |threads: usize| -> Result<(String, String)> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        let r = pool.install(|| run_experiment(&plan))?;
        Ok((r.manifest_json(), r.rows_csv()?))
    };
    let one = run_on(1)?;
    let again = run_on(1)?;
    let four = run_on(4)?;
    check(&mut failures, one == again, "result JSON across runs");
    check(&mut failures, one == four, "result JSON across thread counts");

    check(&mut failures, search_trace_json(3)? == search_trace_json(3)?, "search trace");

    let detail = if failures.is_empty() {
        "dataset CSVs, results and traces identical across runs".to_string()
    } else {
        format!("differs: {}", failures.join("; "))
    };
    Ok((failures.is_empty(), detail))
}

fn report(n: usize, v: Verdict, all: &mut bool) {
    match v {
        Ok((ok, detail)) => {
            *all &= ok;
            println!("criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" });
        }
        Err(e) => {
            *all = false;
            println!("criterion {n}: FAIL error: {e}");
        }
    }
}

fn main() -> ExitCode {
    let mut all = true;
    report(1, criterion_1(), &mut all);
    report(2, criterion_2(), &mut all);
    let start = Instant::now();
    match oracle_searches() {
        Ok(runs) => {
            let secs = start.elapsed().as_secs_f64();
            report(3, criterion_3(&runs, secs), &mut all);
            report(4, criterion_4(&runs), &mut all);
        }
        Err(e) => {
            report(3, Err(e.clone()), &mut all);
            report(4, Err(e), &mut all);
        }
    }
    report(5, criterion_5(), &mut all);
    report(6, criterion_6(), &mut all);
    report(7, criterion_7(), &mut all);
    report(8, criterion_8(), &mut all);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
