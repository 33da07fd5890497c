use std::path::Path;
use std::process::{Command, Output};

fn artic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_artic"))
        .args(args)
        .env_remove("PARTIC_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = artic(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY: &str = "[model]
dim = 16
blocks = 1
heads = 2
max_parts = 8
feature_dim = 0
embed_hidden = 16
mlp_hidden = 16
head_hidden = 16

[train]
steps = 3
points = 64
warmup_steps = 1
";

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--kind", "mixed", "--count", "2", "--seed", "5", "--out", s(&data)]);
    let mesh = data.join("obj_0000.obj");
    let gt = data.join("obj_0000.json");
    assert!(mesh.exists() && gt.exists() && data.join("obj_0001.obj").exists());
    assert!(data.join("manifest.json").exists());

    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let ckpt = dir.path().join("m.ptwt");
    ok(&["train", "--data", s(&data), "--out", s(&ckpt), "--config", s(&cfg), "--seed", "1"]);
    assert!(ckpt.exists());
    let curve = std::fs::read_to_string(dir.path().join("m.ptwt.loss.csv")).unwrap();
    assert_eq!(curve.lines().count(), 4);

    let pred_dir = dir.path().join("pred");
    std::fs::create_dir(&pred_dir).unwrap();
    let pred = pred_dir.join("obj_0000.json");
    let urdf = dir.path().join("urdf");
    let table = ok(&[
        "infer", "--mesh", s(&mesh), "--ckpt", s(&ckpt), "--out", s(&pred), "--points", "2000", "--urdf",
        s(&urdf), "--seed", "2",
    ]);
    assert!(table.contains("parts from"), "{table}");
    assert!(urdf.join("model.urdf").exists() || std::fs::read_dir(&urdf).unwrap().count() > 0);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(pred_dir.join("obj_0000.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "infer");
    assert_eq!(manifest["seed"], 2);

    let report = dir.path().join("report.json");
    ok(&[
        "eval", "--pred", s(&pred), "--gt", s(&gt), "--mesh", s(&mesh), "--out", s(&report), "--points", "5000",
        "--seed", "3",
    ]);
    let csv = std::fs::read_to_string(dir.path().join("report.json.csv")).unwrap();
    assert!(csv.starts_with("instance_id,state,gIoU,mIoU,PC,OC"));
    assert_eq!(csv.lines().count(), 3);

    // directory mode: perfect predictions for both objects, scored on two threads
    let perfect = dir.path().join("perfect");
    std::fs::create_dir(&perfect).unwrap();
    for i in 0..2 {
        let name = format!("obj_{i:04}.json");
        std::fs::copy(data.join(&name), perfect.join(&name)).unwrap();
    }
    let report = dir.path().join("dir.json");
    ok(&[
        "eval", "--pred", s(&perfect), "--gt-dir", s(&data), "--out", s(&report), "--points", "5000", "--jobs",
        "2", "--seed", "3",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["summary"]["instances"], 2);
    let miou = doc["summary"]["rest"]["miou"].as_f64().unwrap();
    assert!((miou - 1.0).abs() < 1e-12, "{miou}");
}

#[test]
fn articulate_sample_and_export() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--kind", "cabinet", "--seed", "8", "--out", s(dir.path())]);
    let mesh = dir.path().join("obj_0000.obj");
    let artic_json = dir.path().join("obj_0000.json");
    let posed = dir.path().join("open.obj");
    let reposed = dir.path().join("open.json");
    ok(&[
        "articulate", "--mesh", s(&mesh), "--artic", s(&artic_json), "--state", "full", "--out", s(&posed),
        "--artic-out", s(&reposed),
    ]);
    assert!(posed.exists() && reposed.exists());
    ok(&[
        "articulate", "--mesh", s(&mesh), "--artic", s(&artic_json), "--state", "random", "--seed", "4", "--out",
        s(&dir.path().join("r.obj")),
    ]);

    let pc = dir.path().join("c.pcld");
    ok(&["sample", "--mesh", s(&mesh), "--points", "300", "--normalize", "--seed", "1", "--out", s(&pc)]);
    let again = dir.path().join("d.pcld");
    ok(&["sample", "--mesh", s(&mesh), "--points", "300", "--normalize", "--seed", "1", "--out", s(&again)]);
    assert_eq!(std::fs::read(&pc).unwrap(), std::fs::read(&again).unwrap());

    let bundle = dir.path().join("bundle");
    ok(&["export-urdf", "--mesh", s(&mesh), "--artic", s(&artic_json), "--out", s(&bundle)]);
    assert!(bundle.join("manifest.json").exists());
}

#[test]
fn missing_seed_is_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = artic(&["synth", "--kind", "mixed", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("artic-error kind=bad_input code=2"), "{err}");
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_artic"))
        .args(["synth", "--kind", "microwave", "--out", s(dir.path())])
        .env("PARTIC_SEED", "11")
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn missing_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = artic(&[
        "sample", "--mesh", s(&dir.path().join("nope.obj")), "--seed", "1", "--out", s(&dir.path().join("x")),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn gradcheck_passes() {
    let out = ok(&["gradcheck", "--instances", "1"]);
    assert!(out.contains("matmul") && out.contains("compute_loss"));
}
