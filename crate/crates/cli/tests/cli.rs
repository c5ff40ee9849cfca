use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn emac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emac")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const MODEL_AB: &str = r#"emacVersion: 1
leaves:
  A:
    availability: {point: 0.99}
    latency: {window: 1d, samples: 100, buckets: [{leMs: 10, count: 60}, {leMs: 30, count: 100}]}
  B:
    availability: {good: 980, total: 1000, window: 7d}
    latency: {window: 1d, samples: 100, buckets: [{leMs: 20, count: 100}]}
"#;

fn spec_doc(expression: &str, availability: &str) -> String {
    format!("emacVersion: 1\nname: pair\nexpression: \"{expression}\"\nobjective:\n  availability: {availability}\n")
}

#[test]
fn compile_checkout_writes_four_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let spec = fixture("checkout.spec.yaml");
    let model = fixture("checkout.model.yaml");
    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = emac(&["compile", path(&spec), "--model", path(&model), "--out", path(&out_dir)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let mut files: Vec<_> = fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        files.sort();
        assert_eq!(
            files,
            ["alerting-rules.yaml", "provenance.json", "recording-rules.yaml", "rollout-gate.yaml"]
        );
        runs.push(files.iter().map(|f| fs::read(out_dir.join(f)).unwrap()).collect::<Vec<_>>());
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn validate_reports_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.yaml");
    fs::write(&broken, spec_doc("KofN(4; A, B, C)", "99")).unwrap();
    let out = emac(&["validate", path(&broken)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("k-exceeds-n"), "{}", stderr(&out));

    let syntax = dir.path().join("syntax.yaml");
    fs::write(&syntax, spec_doc("Series(A, B", "99")).unwrap();
    assert_eq!(code(&emac(&["validate", path(&syntax)])), 1);

    let good = dir.path().join("good.yaml");
    fs::write(&good, spec_doc("Series(A, C)", "99")).unwrap();
    let model = dir.path().join("model.yaml");
    fs::write(&model, MODEL_AB).unwrap();
    assert_eq!(code(&emac(&["validate", path(&good)])), 0);
    let out = emac(&["validate", path(&good), "--model", path(&model)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("unbound-leaf"));
}

#[test]
fn enumerated_simulation_matches_compiled_availability() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.yaml");
    let model = dir.path().join("model.yaml");
    fs::write(&spec, spec_doc("Series(A, B)", "90")).unwrap();
    fs::write(&model, MODEL_AB).unwrap();
    let sim = emac(&["simulate", path(&spec), "--model", path(&model), "--enumerate"]);
    assert_eq!(code(&sim), 0, "{}", stderr(&sim));
    let sim: serde_json::Value = serde_json::from_str(&stdout(&sim)).unwrap();
    let explain = emac(&["explain", path(&spec), "--model", path(&model)]);
    let trace: serde_json::Value = serde_json::from_str(&stdout(&explain)).unwrap();
    let simulated = sim["availability"].as_f64().unwrap();
    assert!((simulated - trace["interval"]["optimistic"].as_f64().unwrap()).abs() < 1e-12);
    assert!((simulated - 0.99 * 0.98).abs() < 1e-12);

    let mc = emac(&[
        "simulate", path(&spec), "--model", path(&model), "--trials", "20000", "--seed", "7", "--workers", "2",
    ]);
    let again = emac(&[
        "simulate", path(&spec), "--model", path(&model), "--trials", "20000", "--seed", "7", "--workers", "1",
    ]);
    assert_eq!(stdout(&mc), stdout(&again));
}

#[test]
fn gate_exit_code_follows_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.yaml");
    let model = dir.path().join("model.yaml");
    fs::write(&spec, spec_doc("Series(A, B)", "99.9")).unwrap();
    fs::write(&model, MODEL_AB).unwrap();
    let out_dir = dir.path().join("out");
    let args = ["compile", path(&spec), "--model", path(&model), "--out", path(&out_dir)];
    let out = emac(&args);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("verdict: fail"));
    assert!(out_dir.join("provenance.json").exists());
    let mut no_gate = args.to_vec();
    no_gate.push("--no-gate");
    assert_eq!(code(&emac(&no_gate)), 0);

    fs::write(&spec, spec_doc("Series(A, B)", "90")).unwrap();
    assert_eq!(code(&emac(&args)), 0);
}

#[test]
fn expansion_limit_is_a_resource_error() {
    let dir = tempfile::tempdir().unwrap();
    let names: Vec<String> = (0..9).map(|i| format!("L{i}")).collect();
    let mut model = String::from("emacVersion: 1\nleaves:\n");
    for n in &names {
        model.push_str(&format!(
            "  {n}:\n    availability: {{point: 0.9}}\n    latency: {{window: 1d, samples: 10, buckets: [{{leMs: 5, count: 10}}]}}\n"
        ));
    }
    let spec = dir.path().join("spec.yaml");
    let model_path = dir.path().join("model.yaml");
    fs::write(&spec, spec_doc(&format!("KofN(2; {})", names.join(", ")), "50")).unwrap();
    fs::write(&model_path, model).unwrap();
    let out = emac(&["compile", path(&spec), "--model", path(&model_path), "--out", path(&dir.path().join("o"))]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).contains("resource limit"));
}

#[test]
fn whatif_and_explain_text() {
    let spec = fixture("checkout.spec.yaml");
    let model = fixture("checkout.model.yaml");
    let out = emac(&["whatif", path(&spec), path(&model), path(&spec), path(&model)]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["availability"]["lo"]["delta"], 0.0);
    assert_eq!(report["verdict"]["changed"], false);

    let out = emac(&["explain", path(&spec), "--model", path(&model), "--format", "text"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("verdict PASS"));
}

#[test]
fn parse_script_produces_a_loadable_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("checkout.yaml");
    let out = emac(&["parse-script", path(&fixture("checkout.emac")), "--out", path(&spec)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&spec).unwrap();
    assert!(text.contains("Timeout(200ms; Race(PayA, PayB), Queue)"));
    // the skeleton has no domains: PayA and PayB are treated as independent
    let out = emac(&[
        "compile",
        path(&spec),
        "--model",
        path(&fixture("checkout.model.yaml")),
        "--out",
        path(&dir.path().join("out")),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let bad = dir.path().join("bad.emac");
    fs::write(&bad, "checkout := Series(A,").unwrap();
    assert_eq!(code(&emac(&["parse-script", path(&bad)])), 1);
}
