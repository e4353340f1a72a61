use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use igsp::bench::{run_experiment, ExperimentPlan};
use igsp::enumerate::{cross_validate_theorems, enumerate_dags_with, partition_imec, theorem_battery};
use igsp::graph::{Dag, Permutation};
use igsp::igsp::{igsp_search, igsp_search_multi, random_starts, ContradictionRule, SearchConfig, DEFAULT_DEGREE_CAP};
use igsp::interventions::{
    i_markov_equivalent, i_markov_equivalent_conservative, perfect_i_mec_equivalent, TargetFamily,
};
use igsp::semsim::{
    sample_data, sample_random_dag, sample_weights, specs_for_family, InterventionKind, MultiDataset,
};
use igsp::stats::{
    Decider, DsepCi, GaussianCi, GaussianInvariance, HsicInvariance, IDagInvariance, InvarianceTest,
    DEFAULT_ALPHA_CI, DEFAULT_ALPHA_INV,
};

#[derive(Parser)]
#[command(name = "igsp", version, about = "Causal structure learning from interventional data")]
struct Cli {
    /// Base seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random linear Gaussian model and interventional data.
    Simulate(SimulateArgs),
    /// Learn a DAG with IGSP.
    Learn(LearnArgs),
    /// Decide whether two DAGs are in the same I-MEC.
    Equiv(EquivArgs),
    /// Enumerate all DAGs on p nodes and partition or cross-check them.
    Enumerate(EnumerateArgs),
    /// Run an experiment plan.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Obs,
    Singletons,
    Pairs,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Perfect,
    Inhibiting,
    Imperfect,
    Shift,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, default_value_t = 1.5)]
    density: f64,
    /// Use this graph instead of a random one.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, value_enum, default_value = "singletons")]
    family: FamilyArg,
    /// Target family JSON; overrides --family.
    #[arg(long)]
    targets: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "perfect")]
    kind: KindArg,
    #[arg(long, default_value_t = 10.0)]
    factor: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    extra_var: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    Gaussian,
    Hsic,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Auto,
    General,
    Single,
}

#[derive(clap::Args)]
struct LearnArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    /// Target family JSON; must match the data's blocks when both are given.
    #[arg(long)]
    targets: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA_CI)]
    alpha_ci: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA_INV)]
    alpha_inv: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    test: TestArg,
    /// Answer every test by d-separation in this graph.
    #[arg(long)]
    oracle_graph: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "off")]
    pool: Toggle,
    #[arg(long)]
    bonferroni: bool,
    #[arg(long, value_enum, default_value = "auto")]
    rule: RuleArg,
    /// `random` or `given:<labels>`, e.g. `given:3,1,2`.
    #[arg(long, default_value = "random")]
    pi0: String,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long)]
    depth_limit: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full search trace as JSON.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Every statistical decision as CSV.
    #[arg(long)]
    test_log: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Auto,
    Idag,
    Relabeled,
    Perfect,
}

#[derive(clap::Args)]
struct EquivArgs {
    #[arg(long)]
    g1: PathBuf,
    #[arg(long)]
    g2: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    criterion: CriterionArg,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum EmitArg {
    Classes,
    Report,
}

#[derive(clap::Args)]
struct EnumerateArgs {
    #[arg(long)]
    p: usize,
    /// Family to partition by, or the only family to cross-check.
    #[arg(long)]
    targets: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "classes")]
    emit: EmitArg,
    /// Random families added to the default battery.
    #[arg(long, default_value_t = 20)]
    random_families: usize,
    /// Allow p = 6.
    #[arg(long)]
    allow_six: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

enum Failure {
    Input(String),
    Internal(String),
}

impl From<igsp::Error> for Failure {
    fn from(e: igsp::Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, v: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).expect("json value") + "\n";
    match out {
        Some(p) => write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn read_dag(path: &Path) -> CliResult<Dag> {
    Ok(Dag::from_json_str(&read(path)?)?)
}

fn read_family(path: &Path) -> CliResult<TargetFamily> {
    Ok(TargetFamily::from_json_str(&read(path)?)?)
}

fn simulate(a: SimulateArgs, seed: u64) -> CliResult<()> {
    let g = match (&a.graph, a.p) {
        (Some(path), _) => read_dag(path)?,
        (None, Some(p)) => sample_random_dag(p, a.density, seed)?,
        (None, None) => return Err(Failure::Input("give --p or --graph".into())),
    };
    let p = g.p();
    let fam = match &a.targets {
        Some(path) => read_family(path)?,
        None => match a.family {
            FamilyArg::Obs => TargetFamily::observational(p),
            FamilyArg::Singletons => TargetFamily::all_singletons(p),
            FamilyArg::Pairs => TargetFamily::all_pairs(p),
        },
    };
    if fam.p() != p {
        return Err(Failure::Input(format!("targets are over {} nodes, graph has {p}", fam.p())));
    }
    let kind = match a.kind {
        KindArg::Perfect => InterventionKind::Perfect,
        KindArg::Inhibiting => InterventionKind::Inhibiting { factor: a.factor },
        KindArg::Imperfect => InterventionKind::Imperfect { alpha: a.alpha },
        KindArg::Shift => InterventionKind::Shift {
            extra_var: a.extra_var,
        },
    };
    let model = sample_weights::<f64>(&g, seed.wrapping_add(1));
    let data = sample_data(&model, &specs_for_family(&fam, kind)?, a.n, seed.wrapping_add(2))?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Failure::Input(e.to_string()))?;
    write(&a.out_dir.join("graph.json"), &pretty(&g.to_json()))?;
    write(&a.out_dir.join("model.json"), &pretty(&model.to_json()))?;
    write(&a.out_dir.join("targets.json"), &pretty(&data.fam().to_json()))?;
    write(&a.out_dir.join("data.csv"), &data.to_csv_string())?;
    log::info!("wrote {} blocks of {} rows to {}", data.fam().len(), a.n, a.out_dir.display());
    Ok(())
}


fn parse_pi0(spec: &str, p: usize) -> CliResult<Option<Permutation>> {
    if spec == "random" {
        return Ok(None);
    }
    let labels = spec
        .strip_prefix("given:")
        .ok_or_else(|| Failure::Input(format!("--pi0 must be `random` or `given:<labels>`, got `{spec}`")))?;
    let labels = labels
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Input(format!("--pi0: {e}")))?;
    let pi = Permutation::from_labels(&labels)?;
    if pi.len() != p {
        return Err(Failure::Input(format!("--pi0 has {} nodes, expected {p}", pi.len())));
    }
    Ok(Some(pi))
}

fn learn(a: LearnArgs, seed: u64) -> CliResult<()> {
    let data = a
        .data
        .as_deref()
        .map(|path| {
            let text = read(path)?;
            Ok::<_, Failure>(MultiDataset::<f64>::from_csv_str(&text)?)
        })
        .transpose()?;
    let fam = match (&a.targets, &data) {
        (Some(path), Some(d)) => {
            let f = read_family(path)?;
            if &f != d.fam() {
                return Err(Failure::Input(format!(
                    "targets {f} do not match the data blocks {}",
                    d.fam()
                )));
            }
            f
        }
        (Some(path), None) => read_family(path)?,
        (None, Some(d)) => d.fam().clone(),
        (None, None) => return Err(Failure::Input("give --data or --targets".into())),
    };
    let dec = if let Some(path) = &a.oracle_graph {
        let g = read_dag(path)?;
        Decider::new(Box::new(DsepCi::new(g.clone())), Some(Box::new(IDagInvariance::new(&g, &fam)?)))
    } else {
        let d = data
            .as_ref()
            .ok_or_else(|| Failure::Input("statistical tests need --data".into()))?;
        let inv: Box<dyn InvarianceTest> = match a.test {
            TestArg::Gaussian => Box::new(GaussianInvariance::new(d, a.alpha_inv)?),
            TestArg::Hsic => Box::new(HsicInvariance::new(d, a.alpha_inv)?),
        };
        Decider::new(Box::new(GaussianCi::new(d, a.alpha_ci)?), Some(inv))
    }
    .with_bonferroni(a.bonferroni);
    let mut cfg = SearchConfig::new(fam.clone())?
        .with_pool(a.pool == Toggle::On)
        .with_depth_limit(a.depth_limit)
        .with_restarts(a.restarts, seed);
    match a.rule {
        RuleArg::Auto => {}
        RuleArg::General => {
            cfg = cfg.with_rule(ContradictionRule::General {
                degree_cap: DEFAULT_DEGREE_CAP,
            })
        }
        RuleArg::Single => {
            if !fam.is_single_node() {
                return Err(Failure::Input("the single-node rule needs single-node targets".into()));
            }
            cfg = cfg.with_rule(ContradictionRule::SingleNode)
        }
    }
    let r = match parse_pi0(&a.pi0, fam.p())? {
        Some(pi) => igsp_search(&dec, &cfg, &pi)?,
        None => igsp_search_multi(&dec, &cfg, &random_starts(fam.p(), a.restarts.max(1), seed))?,
    };
    if !r.trace.is_monotone() {
        return Err(Failure::Internal("edge counts increased across restarts".into()));
    }
    if let Some(path) = &a.trace {
        write(path, &pretty(&r.trace))?;
    }
    if let Some(path) = &a.test_log {
        let mut buf = Vec::new();
        dec.cache().write_log_csv(&mut buf)?;
        write(path, &String::from_utf8(buf).expect("utf-8 log"))?;
    }
    let out = json!({
        "dag": r.dag.to_json(),
        "permutation": r.pi.to_labels(),
        "edges": r.dag.edge_count(),
        "contradictory": r.contradictory,
        "trace": {
            "rounds": r.trace.rounds.len(),
            "round_edges": r.trace.rounds.iter().map(|x| x.edges).collect::<Vec<_>>(),
            "steps": r.trace.steps.len(),
            "final_stratum": r.trace.final_stratum,
            "truncated": r.trace.truncated,
        },
        "tests": dec.counts(),
        "deciders": { "ci": dec.ci_name(), "invariance": dec.inv_name() },
    });
    emit(a.out.as_deref(), &out)
}

fn equiv(a: EquivArgs) -> CliResult<()> {
    let (g1, g2, fam) = (read_dag(&a.g1)?, read_dag(&a.g2)?, read_family(&a.targets)?);
    let (name, eq) = match a.criterion {
        CriterionArg::Auto if fam.has_empty() => ("idag", i_markov_equivalent(&g1, &g2, &fam)?),
        CriterionArg::Auto | CriterionArg::Relabeled => {
            ("relabeled", i_markov_equivalent_conservative(&g1, &g2, &fam)?)
        }
        CriterionArg::Idag => ("idag", i_markov_equivalent(&g1, &g2, &fam)?),
        CriterionArg::Perfect => ("perfect", perfect_i_mec_equivalent(&g1, &g2, &fam)?),
    };
    emit(None, &json!({ "criterion": name, "equivalent": eq }))
}

fn enumerate(a: EnumerateArgs, seed: u64) -> CliResult<()> {
    let cat = enumerate_dags_with(a.p, a.allow_six)?;
    let fam = a.targets.as_deref().map(read_family).transpose()?;
    match a.emit {
        EmitArg::Classes => {
            let fam = fam.unwrap_or_else(|| TargetFamily::observational(a.p));
            let classes = partition_imec(&cat, &fam)?;
            let listed: Vec<Vec<_>> = classes
                .iter()
                .map(|c| c.iter().map(|&k| cat.dag(k).to_json().edges).collect())
                .collect();
            emit(
                a.out.as_deref(),
                &json!({
                    "p": a.p,
                    "targets": fam.to_json().targets,
                    "dags": cat.len(),
                    "class_count": classes.len(),
                    "classes": listed,
                }),
            )
        }
        EmitArg::Report => {
            let battery = match fam {
                Some(f) => vec![f],
                None => theorem_battery(a.p, a.random_families, seed),
            };
            let report = cross_validate_theorems(&cat, &battery)?;
            emit(a.out.as_deref(), &serde_json::to_value(&report).expect("report"))?;
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Internal(format!(
                    "{} mismatches between equivalence criteria",
                    report.total_mismatches
                )))
            }
        }
    }
}

fn bench(a: BenchArgs) -> CliResult<()> {
    let plan = ExperimentPlan::from_json_str(&read(&a.plan)?)?;
    let results = run_experiment(&plan)?;
    results.write_to_dir(&a.out_dir)?;
    emit(None, &serde_json::to_value(&results.summary).expect("summary"))
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Internal(e.to_string()))?;
    }
    match cli.cmd {
        Command::Simulate(a) => simulate(a, cli.seed),
        Command::Learn(a) => learn(a, cli.seed),
        Command::Equiv(a) => equiv(a),
        Command::Enumerate(a) => enumerate(a, cli.seed),
        Command::Bench(a) => bench(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
    }
}
