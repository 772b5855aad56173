use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
}

fn symsound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symsound"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn load_reports_graph_size() {
    let o = symsound(&["load", corpus("fig2.json").to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("21 nodes"), "{}", stdout(&o));
}

#[test]
fn load_rejects_missing_file() {
    let o = symsound(&["load", "/nonexistent/graph.json"]);
    assert!(!o.status.success());
}

#[test]
fn ground_contains_location_rule() {
    let m = corpus("fig2.manifest.json");
    let o = symsound(&["ground", "--manifest", m.to_str().unwrap()]);
    assert!(o.status.success());
    let task: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let ids: Vec<&str> = task["actions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["id"].as_str().unwrap())
        .collect();
    assert!(ids.contains(&"r_init-loc(64.233.167.26,US)"));
    assert!(ids.contains(&"r_init-dom(gmail-smtp-in.l.google.com,64.233.167.26)"));
}

#[test]
fn static_conditions_pass_on_fig2() {
    let m = corpus("fig2.manifest.json");
    let o = symsound(&[
        "check",
        "--manifest",
        m.to_str().unwrap(),
        "--conditions",
        "cs1,cs2,cs4",
    ]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("\"verdict\": \"pass\"").count(), 3);
}

#[test]
fn flags_override_manifest() {
    let m = corpus("fig2.manifest.json");
    let o = symsound(&[
        "check",
        "--manifest",
        m.to_str().unwrap(),
        "--conditions",
        "cs4",
        "--sigma",
        "C,unconf",
    ]);
    assert!(!o.status.success());
    assert!(stdout(&o).contains("\"verdict\": \"fail\""));
}

#[test]
fn plan_and_reward() {
    let m = corpus("fig2.manifest.json");
    let o = symsound(&[
        "plan",
        "--manifest",
        m.to_str().unwrap(),
        "--goal",
        "unconf(t-online.de,gmail.com)",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("r_compromise"), "{}", stdout(&o));
    let o = symsound(&["reward", "--manifest", m.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).trim().parse::<f64>().unwrap() > 0.0);
}

#[test]
fn schema_queries_emitted() {
    let m = corpus("fig2.manifest.json");
    let o = symsound(&["emit-queries", "--manifest", m.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("event(Unconf(m,n))\n    ==> "));
}

#[test]
fn compile_dumps_process() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.pi");
    let m = corpus("fig2.manifest.json");
    let o = symsound(&[
        "compile",
        "--manifest",
        m.to_str().unwrap(),
        "--dump-process",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.contains("Unconf"));
}

#[test]
fn run_with_depth_zero_warns() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus("empty.manifest.json");
    let o = symsound(&[
        "run",
        "--manifest",
        m.to_str().unwrap(),
        "--depth",
        "0",
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("warning: depth 0"));
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn legacy_run_fails_with_replayable_witness() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus("dnssec-route.legacy.manifest.json");
    let o = symsound(&[
        "run",
        "--manifest",
        m.to_str().unwrap(),
        "--depth",
        "5",
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stdout(&o).contains("soundness unsound"), "{}", stdout(&o));
    let w = std::fs::read_dir(dir.path().join("witnesses"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let o = symsound(&["replay", w.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn run_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let m = corpus("dnssec-route.manifest.json");
    for d in [&a, &b] {
        let o = symsound(&[
            "run",
            "--manifest",
            m.to_str().unwrap(),
            "--depth",
            "3",
            "--output",
            d.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stdout(&o));
    }
    for f in [
        "summary.json",
        "soundness.json",
        "plans.json",
        "queries/schema.pv",
        "queries/ground.pv",
        "conditions/cs5.json",
    ] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}
