mod common;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use maclr::synthetic::{PlantedTopics, SyntheticCorpus};

fn maclr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maclr"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_corpus(dir: &Path) -> PathBuf {
    let shape = PlantedTopics { topics: 8, instances: 200, test_instances: 60, ..PlantedTopics::default() };
    SyntheticCorpus::generate(&shape, 3).unwrap().write_to(dir).unwrap();
    let conf = dir.join("small.conf");
    std::fs::write(
        &conf,
        "instances = instances.jsonl\nlabels = labels.jsonl\npairs = train_pairs.tsv\n\
         test_instances = test_instances.jsonl\ntest_pairs = test_pairs.tsv\n\
         t_total = 120\nt_k = 30\nt_update = 20\nk0 = 2\nstage2_steps = 40\nfinetune_steps = 20\n",
    )
    .unwrap();
    conf
}

fn tree(dir: &Path) -> BTreeSet<PathBuf> {
    let mut out = BTreeSet::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(tree(&p));
        }
        out.insert(p);
    }
    out
}

#[test]
fn unknown_key_is_named_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "learnig_rate = 0.01\nseed = 1\n").unwrap();
    let o = maclr(&["--config", conf.to_str().unwrap(), "build-vocab"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("learnig_rate"), "{}", stderr(&o));
}

#[test]
fn bad_flag_exits_1() {
    assert_eq!(maclr(&["pretrain", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(maclr(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_required_path_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = maclr(&["--out-dir", dir.path().to_str().unwrap(), "pretrain"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("instances"), "{}", stderr(&o));
}

#[test]
fn unreadable_data_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("i.jsonl"), "{\"id\": 1, \"text\": \"a\"}\n{\"id\": 1, \"text\": \"b\"}\n").unwrap();
    std::fs::write(dir.path().join("l.jsonl"), "{\"id\": 1, \"text\": \"a\"}\n").unwrap();
    let out = dir.path().join("out");
    let o = maclr(&[
        "--out-dir",
        out.to_str().unwrap(),
        "--set",
        &format!("instances={}", dir.path().join("i.jsonl").display()),
        "--set",
        &format!("labels={}", dir.path().join("l.jsonl").display()),
        "build-vocab",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!out.join("vocab.txt").exists());
}

#[test]
fn diverging_training_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_corpus(dir.path());
    let out = dir.path().join("out");
    let (c, o) = (conf.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(maclr(&["--config", c, "--out-dir", o, "build-vocab"]).status.code(), Some(0));
    let r = maclr(&["--config", c, "--out-dir", o, "--set", "base_lr=1e30", "pretrain"]);
    assert_eq!(r.status.code(), Some(3), "{}", stderr(&r));
    assert!(!out.join("stage1.ckpt").exists());
}

#[test]
fn eval_on_hand_corpus_matches_hand_metrics() {
    let out = tempfile::tempdir().unwrap();
    let conf = common::hand_corpus_dir().join("run.conf");
    let args = |cmd: &'static str| -> Vec<String> {
        vec!["--config".into(), conf.display().to_string(), "--out-dir".into(), out.path().display().to_string(), cmd.into()]
    };
    for cmd in ["build-vocab", "tfidf"] {
        let a = args(cmd);
        let o = maclr(&a.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
    }
    let pred = out.path().join("tfidf_predictions.tsv");
    let mut a = args("eval");
    a.splice(4..4, ["--set".to_string(), format!("predictions={}", pred.display())]);
    let o = maclr(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.path().join("metrics.json")).unwrap()).unwrap();
    for (key, want) in [("P@1", 1.0), ("P@3", 7.0 / 15.0), ("P@5", 0.28), ("R@1", 0.8), ("R@3", 1.0), ("R@5", 1.0)] {
        assert!((m[key].as_f64().unwrap() - want).abs() < 1e-6, "{key}: {}", m[key]);
    }
    let baseline = std::fs::read_to_string(out.path().join("tfidf_metrics.json")).unwrap();
    assert_eq!(baseline, std::fs::read_to_string(out.path().join("metrics.json")).unwrap());
}

#[test]
fn pretrain_twice_gives_identical_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_corpus(dir.path());
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        for cmd in ["build-vocab", "pretrain"] {
            let o = maclr(&["--config", conf.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "--seed", "9", cmd]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        }
        bytes.push(std::fs::read(out.join("stage1.ckpt")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn full_run_writes_only_inside_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_corpus(dir.path());
    let before = tree(dir.path());
    let out = dir.path().join("out");
    let o = maclr(&["--config", conf.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "--workers", "2", "run"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let added: Vec<PathBuf> = tree(dir.path()).difference(&before).cloned().collect();
    assert!(added.iter().all(|p| p.starts_with(&out)), "{added:?}");
    for f in ["vocab.txt", "stage1.ckpt", "stage2.ckpt", "finetune.ckpt", "predictions.tsv", "metrics.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let stray: Vec<_> = added.iter().filter(|p| p.file_name().unwrap().to_string_lossy().contains("tmp")).collect();
    assert!(stray.is_empty(), "{stray:?}");
}
