use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn igsp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_igsp")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = igsp(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_then_learn_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&["--seed", "11", "simulate", "--p", "6", "--n", "500", "--kind", "imperfect", "--out-dir", p(d)]);
        ok(&[
            "--seed",
            "5",
            "learn",
            "--data",
            p(&d.join("data.csv")),
            "--targets",
            p(&d.join("targets.json")),
            "--pool",
            "on",
            "--restarts",
            "2",
            "--out",
            p(&d.join("out.json")),
            "--trace",
            p(&d.join("trace.json")),
        ]);
    }
    for f in ["data.csv", "model.json", "graph.json", "targets.json", "out.json", "trace.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let out: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("out.json")).unwrap()).unwrap();
    assert_eq!(out["dag"]["p"], 6);
    assert_eq!(out["deciders"]["invariance"], "gaussian");
}

#[test]
fn oracle_learn_recovers_the_chain() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.json");
    let t = dir.path().join("t.json");
    fs::write(&g, r#"{"p":3,"edges":[[1,2],[2,3]]}"#).unwrap();
    fs::write(&t, r#"{"p":3,"targets":[[],[2]]}"#).unwrap();
    let out = ok(&["learn", "--targets", p(&t), "--oracle-graph", p(&g), "--pi0", "given:3,2,1"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["dag"]["edges"], serde_json::json!([[1, 2], [2, 3]]));
    assert_eq!(v["contradictory"], 0);
}

#[test]
fn equiv_uses_the_criterion_in_domain() {
    let dir = tempfile::tempdir().unwrap();
    let (g1, g2, t) = (dir.path().join("g1"), dir.path().join("g2"), dir.path().join("t"));
    fs::write(&g1, r#"{"p":2,"edges":[[1,2]]}"#).unwrap();
    fs::write(&g2, r#"{"p":2,"edges":[[2,1]]}"#).unwrap();
    fs::write(&t, r#"{"p":2,"targets":[[1],[2]]}"#).unwrap();
    let v: serde_json::Value = serde_json::from_str(&ok(&["equiv", "--g1", p(&g1), "--g2", p(&g2), "--targets", p(&t)])).unwrap();
    assert_eq!(v["criterion"], "relabeled");
    assert_eq!(v["equivalent"], true);
    let out = igsp(&["equiv", "--g1", p(&g1), "--g2", p(&g2), "--targets", p(&t), "--criterion", "idag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn enumerate_classes_and_report() {
    let v: serde_json::Value = serde_json::from_str(&ok(&["enumerate", "--p", "3"])).unwrap();
    assert_eq!(v["dags"], 25);
    assert_eq!(v["class_count"], 11);
    let v: serde_json::Value = serde_json::from_str(&ok(&["enumerate", "--p", "3", "--emit", "report"])).unwrap();
    assert_eq!(v["total_mismatches"], 0);
    assert_eq!(igsp(&["enumerate", "--p", "7"]).status.code(), Some(2));
}

#[test]
fn bench_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    fs::write(
        &plan,
        r#"{"p":5,"avg_neighborhood":1.5,"n_per_block":200,"intervention":{"kind":"perfect"},
            "family":{"kind":"all_singletons"},"replicates":4,"seed":9,
            "decider":{"mode":"statistical","invariance":"gaussian","alpha_ci":0.001,"alpha_inv":0.001,
                       "pool":false,"bonferroni":false},"restarts":1}"#,
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["--threads", "2", "bench", "--plan", p(&plan), "--out-dir", p(&a)]);
    ok(&["bench", "--plan", p(&plan), "--out-dir", p(&b)]);
    for f in ["results.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(a.join("timings.csv").exists());
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "block,target,X1\n0,obs,notanumber\n").unwrap();
    assert_eq!(igsp(&["learn", "--data", p(&bad)]).status.code(), Some(2));
    assert_eq!(igsp(&["learn", "--pi0", "sideways"]).status.code(), Some(2));
    assert_eq!(igsp(&["simulate", "--out-dir", p(dir.path())]).status.code(), Some(2));
    assert_eq!(igsp(&["no-such-command"]).status.code(), Some(2));
}
