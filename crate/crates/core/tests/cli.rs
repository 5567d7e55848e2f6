use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cadec::{ConstraintSet, FrameProbMatrix};
use serde_json::Value;

fn cadec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cadec"))
        .args(args)
        .env_remove(cadec::cli::SEED_ENV)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(path: &Path, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn toy_corpus(dir: &Path) {
    write(&dir.join("labels/v1.txt"), "A\nB\nA\nC\n");
    write(&dir.join("labels/v2.txt"), "A\nC\n");
    write(&dir.join("mapping.txt"), "A\t0\nB\t1\nC\t2\n");
}

#[test]
fn extract_counts_toy_corpus() {
    let dir = tempfile::tempdir().unwrap();
    toy_corpus(dir.path());
    let out_file = dir.path().join("cs.json");
    let out = cadec(&[
        "extract",
        "--labels",
        p(&dir.path().join("labels")),
        "--mapping",
        p(&dir.path().join("mapping.txt")),
        "--out",
        p(&out_file),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cs = ConstraintSet::load(&out_file).unwrap();
    assert_eq!(cs.transitions().get(0, 2), Some(2.0 / 3.0));
    assert_eq!(cs.class_names().unwrap(), &["A", "B", "C"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("transitions: 3"), "{stdout}");
    let manifest = json(&dir.path().join("cs.manifest.json"));
    assert_eq!(manifest["command"], "extract");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn extract_with_slack_widens_bounds() {
    let dir = tempfile::tempdir().unwrap();
    toy_corpus(dir.path());
    let run = |slack: &str, name: &str| {
        let f = dir.path().join(name);
        let out = cadec(&[
            "extract",
            "--labels",
            p(&dir.path().join("labels")),
            "--mapping",
            p(&dir.path().join("mapping.txt")),
            "--slack",
            slack,
            "--out",
            p(&f),
        ]);
        assert_eq!(code(&out), 0);
        ConstraintSet::load(&f).unwrap()
    };
    let tight = run("0", "a.json");
    let loose = run("0.1", "b.json");
    assert_eq!(loose, tight.with_slack(0.1));
    let b = loose.durations().get(0);
    let t = tight.durations().get(0);
    assert_eq!(b.d_min, t.d_min * 0.9);
    assert_eq!(b.d_max, (t.d_max * 1.1).min(1.0));
}

#[test]
fn extract_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("empty")).unwrap();
    let out = cadec(&[
        "extract",
        "--labels",
        p(&dir.path().join("empty")),
        "--out",
        p(&dir.path().join("x.json")),
    ]);
    assert_eq!(code(&out), 3);

    write(&dir.path().join("bad/v1.txt"), "0\nwalk\n");
    let out = cadec(&[
        "extract",
        "--labels",
        p(&dir.path().join("bad")),
        "--out",
        p(&dir.path().join("x.json")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("v1.txt:2"));
}

fn permissive_setup(dir: &Path) {
    ConstraintSet::permissive(2).save(&dir.join("cs.json")).unwrap();
    let probs = FrameProbMatrix::from_rows(&[vec![0.7, 0.3], vec![0.6, 0.4], vec![0.8, 0.2]]).unwrap();
    write(&dir.join("probs/v1.csv"), &probs.to_csv());
}

#[test]
fn decode_permissive_example() {
    let dir = tempfile::tempdir().unwrap();
    permissive_setup(dir.path());
    let out_dir = dir.path().join("out");
    let out = cadec(&[
        "decode",
        "--probs",
        p(&dir.path().join("probs")),
        "--constraints",
        p(&dir.path().join("cs.json")),
        "--out",
        p(&out_dir),
        "--jobs",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(out_dir.join("v1.txt")).unwrap(), "0\n0\n0\n");
    let manifest = json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["videos"][0]["feasible"], true);
    assert_eq!(manifest["videos"][0]["used_fallback"], false);
    assert_eq!(manifest["config"]["mode"], "hard");
}

#[test]
fn decode_exit_codes_and_fallback() {
    let dir = tempfile::tempdir().unwrap();
    permissive_setup(dir.path());
    let d = dir.path();

    ConstraintSet::permissive(3).save(&d.join("cs3.json")).unwrap();
    let out = cadec(&[
        "decode",
        "--probs",
        p(&d.join("probs/v1.csv")),
        "--constraints",
        p(&d.join("cs3.json")),
        "--out",
        p(&d.join("o1")),
    ]);
    assert_eq!(code(&out), 4);

    write(&d.join("bad/v.csv"), "0.5,0.5\n0.5\n");
    let out = cadec(&[
        "decode",
        "--probs",
        p(&d.join("bad")),
        "--constraints",
        p(&d.join("cs.json")),
        "--out",
        p(&d.join("o2")),
    ]);
    assert_eq!(code(&out), 2);

    // nothing may start
    let cs = ConstraintSet::permissive(2);
    let empty = ConstraintSet::new(
        2,
        Default::default(),
        cs.end_set().clone(),
        cs.transitions().clone(),
        cs.durations().clone(),
    )
    .unwrap();
    empty.save(&d.join("none.json")).unwrap();
    let (probs, none) = (d.join("probs"), d.join("none.json"));
    let base = ["decode", "--probs", p(&probs), "--constraints", p(&none)];
    let out = cadec(&[&base[..], &["--out", p(&d.join("o3"))]].concat());
    assert_eq!(code(&out), 5);

    let out = cadec(&[&base[..], &["--out", p(&d.join("o4")), "--fallback", "classical"]].concat());
    assert_eq!(code(&out), 0);
    let manifest = json(&d.join("o4/manifest.json"));
    assert_eq!(manifest["videos"][0]["used_fallback"], true);
    assert_eq!(manifest["videos"][0]["feasible"], false);

    let out = cadec(&[&base[..], &["--out", p(&d.join("o5")), "--mode", "classical"]].concat());
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read_to_string(d.join("o5/v1.txt")).unwrap(), "0\n0\n0\n");
}

#[test]
fn eval_reports_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(&d.join("gt/a.txt"), "0\n1\n1\n1\n");
    write(&d.join("pred/a.txt"), "0\n0\n1\n1\n");
    let out = cadec(&["eval", "--pred", p(&d.join("pred")), "--gt", p(&d.join("gt"))]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&d.join("pred/eval_report.json"));
    assert_eq!(report["acc"], 75.0);
    assert_eq!(report["edit"], 100.0);
    assert_eq!(report["schema_version"], 1);

    // segments [A, B, A] against [A, B]
    write(&d.join("gt2/a.txt"), "A\nB\nB\n");
    write(&d.join("pred2/a.txt"), "A\nB\nA\n");
    write(&d.join("map.txt"), "A\t0\nB\t1\n");
    let report_path = d.join("r2.json");
    let out = cadec(&[
        "eval",
        "--pred",
        p(&d.join("pred2")),
        "--gt",
        p(&d.join("gt2")),
        "--mapping",
        p(&d.join("map.txt")),
        "--out",
        p(&report_path),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(format!("{:.2}", json(&report_path)["edit"].as_f64().unwrap()), "66.67");

    let out = cadec(&[
        "eval",
        "--pred",
        p(&d.join("gt")),
        "--gt",
        p(&d.join("gt")),
        "--out",
        p(&d.join("same.json")),
    ]);
    assert_eq!(code(&out), 0);
    let same = json(&d.join("same.json"));
    for key in ["acc", "edit", "f1_10", "f1_25", "f1_50"] {
        assert_eq!(same[key], 100.0, "{key}");
    }

    write(&d.join("gt/b.txt"), "0\n");
    let out = cadec(&["eval", "--pred", p(&d.join("pred")), "--gt", p(&d.join("gt"))]);
    assert_eq!(code(&out), 6);

    write(&d.join("pred/b.txt"), "0\n0\n");
    let out = cadec(&["eval", "--pred", p(&d.join("pred")), "--gt", p(&d.join("gt"))]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains('b'));
}

#[test]
fn synth_writes_corpus_and_batch_decodes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = cadec(&[
        "synth",
        "--out",
        p(&d.join("corpus")),
        "--train",
        "5",
        "--test",
        "20",
        "--seed",
        "4",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let split = json(&d.join("corpus/split.json"));
    assert_eq!(split["train"].as_array().unwrap().len(), 5);
    assert_eq!(split["test"].as_array().unwrap().len(), 20);
    assert_eq!(json(&d.join("corpus/manifest.json"))["seed"], 4);

    let out = cadec(&[
        "extract",
        "--labels",
        p(&d.join("corpus/train")),
        "--classes",
        "10",
        "--out",
        p(&d.join("cs.json")),
    ]);
    assert_eq!(code(&out), 0);
    let out = cadec(&[
        "decode",
        "--probs",
        p(&d.join("corpus/test/probs")),
        "--constraints",
        p(&d.join("cs.json")),
        "--fallback",
        "classical",
        "--out",
        p(&d.join("pred")),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let written = cadec::io::list_files(&d.join("pred"), &["txt"]).unwrap();
    assert_eq!(written.len(), 20);
    assert_eq!(
        json(&d.join("pred/manifest.json"))["videos"].as_array().unwrap().len(),
        20
    );
}

#[test]
fn seed_comes_from_environment_when_not_given() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let with_flag = cadec(&[
        "synth",
        "--out",
        p(&d.join("a")),
        "--train",
        "2",
        "--test",
        "1",
        "--seed",
        "7",
    ]);
    assert_eq!(code(&with_flag), 0);
    let with_env = Command::new(env!("CARGO_BIN_EXE_cadec"))
        .args(["synth", "--out", p(&d.join("b")), "--train", "2", "--test", "1"])
        .env(cadec::cli::SEED_ENV, "7")
        .output()
        .unwrap();
    assert_eq!(code(&with_env), 0);
    for f in ["train/train_000.txt", "test/gt/test_000.txt", "test/probs/test_000.csv"] {
        assert_eq!(
            fs::read(d.join("a").join(f)).unwrap(),
            fs::read(d.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn config_file_and_manifest_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    toy_corpus(d);
    let cfg = d.join("extract.toml");
    write(
        &cfg,
        &format!(
            "labels = {:?}\nmapping = {:?}\nout = {:?}\nslack = 0.2\n",
            p(&d.join("labels")),
            p(&d.join("mapping.txt")),
            p(&d.join("cs.json"))
        ),
    );
    let out = cadec(&["extract", "--config", p(&cfg), "--slack", "0.1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = json(&d.join("cs.manifest.json"));
    assert_eq!(manifest["config"]["slack"], 0.1);
    let first = fs::read(d.join("cs.json")).unwrap();
    fs::remove_file(d.join("cs.json")).unwrap();

    let out = cadec(&["extract", "--config", p(&d.join("cs.manifest.json"))]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(d.join("cs.json")).unwrap(), first);

    let out = cadec(&["decode", "--config", p(&d.join("cs.manifest.json"))]);
    assert_eq!(code(&out), 1);
}

#[test]
fn bench_small_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = cadec(&[
        "bench",
        "--lengths",
        "100,200",
        "--classes",
        "4",
        "--transitions",
        "6",
        "--reps",
        "1",
        "--out",
        p(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("frames,constrained_ms"));

    let out = cadec(&["bench", "--lengths", "200,100", "--out", p(&csv)]);
    assert_eq!(code(&out), 1);
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["extract", "decode", "eval", "synth", "bench"] {
        let out = cadec(&[sub, "--help"]);
        assert_eq!(code(&out), 0, "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("--config"), "{sub}");
    }
    assert_eq!(code(&cadec(&["decode", "--no-such-flag"])), 2);
}
