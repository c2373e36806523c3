//! End-to-end tests of the `spider` binary: flags, artifacts, exit
//! codes, and determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn spider(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spider"))
        .args(args)
        .current_dir(dir)
        .env_remove("SPIDER_SEED")
        .output()
        .expect("spawn spider")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

const REFERENCE_ANSWER: &str = "[OUT] A cat is sitting on a couch. <IMAGE> A cat is sitting on a couch [IMAGE_0] </IMAGE>. <VIDEO> A cat is sitting on a couch [VIDEO_0] </VIDEO> [END]";

#[test]
fn parse_reference_answer_emits_json_with_two_groups() {
    let dir = tempfile::tempdir().unwrap();
    let out = spider(&["parse", "--answer", REFERENCE_ANSWER, "--json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(value["groups"].as_array().unwrap().len(), 2);
    assert_eq!(value["groups"][0]["modality"], "IMAGE");
}

#[test]
fn parse_errors_exit_2_and_usage_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    let out = spider(&["parse", "--answer", "[OUT] no end"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MissingEndSignal"));

    let out = spider(
        &["parse", "--question", "x", "--answer", "y"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(64));

    let out = spider(&["parse"], dir.path());
    assert_eq!(out.status.code(), Some(64));

    let out = spider(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn forge_is_deterministic_and_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = spider(
        &[
            "synth", "--what", "captions", "--source", "cc3m", "--count", "40", "--seed", "3",
            "--out", "caps.jsonl",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for run in ["a.jsonl", "b.jsonl"] {
        let out = spider(
            &[
                "forge", "--flavor", "t2txs-t2i", "--count", "100", "--seed", "11",
                "--captions", "caps.jsonl", "--out", run,
            ],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(dir.path().join("a.jsonl")).unwrap();
    let b = fs::read(dir.path().join("b.jsonl")).unwrap();
    assert_eq!(a, b, "same seed must forge identical bytes");
    assert_eq!(a.iter().filter(|&&c| c == b'\n').count(), 100);

    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("a.jsonl.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "forge");
    assert_eq!(manifest["seed"], 11);
}

#[test]
fn forge_with_explicit_pool_file_matches_builtin() {
    let dir = tempfile::tempdir().unwrap();
    spider(
        &[
            "synth", "--what", "captions", "--source", "webvid", "--count", "30", "--seed", "5",
            "--out", "caps.jsonl",
        ],
        dir.path(),
    );
    let out = spider(
        &["synth", "--what", "pool", "--flavor", "smmi", "--out", "pool.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let builtin = spider(
        &[
            "forge", "--flavor", "smmi", "--count", "25", "--seed", "2", "--captions",
            "caps.jsonl", "--out", "builtin.jsonl",
        ],
        dir.path(),
    );
    assert_eq!(builtin.status.code(), Some(0));
    let file = spider(
        &[
            "forge", "--flavor", "smmi", "--count", "25", "--seed", "2", "--captions",
            "caps.jsonl", "--pool", "pool.json", "--out", "file.jsonl",
        ],
        dir.path(),
    );
    assert_eq!(file.status.code(), Some(0));
    assert_eq!(
        fs::read(dir.path().join("builtin.jsonl")).unwrap(),
        fs::read(dir.path().join("file.jsonl")).unwrap()
    );
}

#[test]
fn mix_validates_stage_and_emits_names() {
    let dir = tempfile::tempdir().unwrap();
    let out = spider(
        &["mix", "--stage", "1", "--count", "500", "--seed", "4", "--out", "names.txt"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let names = fs::read_to_string(dir.path().join("names.txt")).unwrap();
    assert_eq!(names.lines().count(), 500);
    // Stage 1 never draws the text-formatted flavors.
    for line in names.lines() {
        assert!(!line.contains("t2txs") && !line.contains("x2txs"));
        assert!(!matches!(line, "smmi" | "spmi" | "tgi"));
    }

    let out = spider(
        &["mix", "--stage", "9", "--count", "10", "--seed", "1", "--out", "x.txt"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

/// Write a tiny gallery whose captions include the reference caption in
/// both target modalities.
fn write_demo_gallery(dir: &Path) {
    let mut lines = vec![
        r#"{"asset_ref":"img_cat","modality":"IMAGE","caption":"A cat is sitting on a couch"}"#
            .to_string(),
        r#"{"asset_ref":"vid_cat","modality":"VIDEO","caption":"A cat is sitting on a couch"}"#
            .to_string(),
    ];
    for (i, (m, p)) in [("IMAGE", "img"), ("VIDEO", "vid"), ("AUDIO", "aud"), ("BOX", "box"), ("MASK", "msk")]
        .iter()
        .cycle()
        .take(20)
        .enumerate()
    {
        lines.push(format!(
            r#"{{"asset_ref":"{p}_{i:03}","modality":"{m}","caption":"filler caption number {i} for {p}"}}"#
        ));
    }
    fs::write(dir.join("gallery.jsonl"), lines.join("\n") + "\n").unwrap();
}

#[test]
fn train_demo_and_pseudo_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    write_demo_gallery(dir.path());
    // Small alpha=0 configuration keeps the run fast and retrieval exact.
    fs::write(
        dir.path().join("config.json"),
        r#"{"D":16,"D_c":8,"K":2,"alpha":0.0,"router_hidden":8}"#,
    )
    .unwrap();
    let out = spider(
        &[
            "train", "--gallery", "gallery.jsonl", "--config", "config.json", "--steps", "25",
            "--seed", "6", "--ckpt", "model.ckpt", "--metrics", "metrics.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("model.ckpt").exists());
    assert!(dir.path().join("model.ckpt.json").exists());
    assert!(dir.path().join("model.ckpt.manifest.json").exists());

    // Metrics: header plus strictly increasing steps 1..=25.
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,loss_total,loss_align,loss_recon,mean_cos_align,mean_cos_recon"
    );
    let steps: Vec<usize> = lines
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(steps, (1..=25).collect::<Vec<_>>());

    // Demo with the reference question: alpha=0 plus caption-matching
    // gallery entries realize both groups at score 1.
    let out = spider(
        &[
            "demo", "--question",
            "[INPUT] [SMARTMULTIMODAL] Please generate an image and a video based on the following text: A cat is sitting on a couch",
            "--ckpt", "model.ckpt", "--gallery", "gallery.jsonl",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let result: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let realized = result["realized"].as_array().unwrap();
    assert_eq!(realized.len(), 2);
    assert_eq!(realized[0]["asset_ref"], "img_cat");
    assert_eq!(realized[1]["asset_ref"], "vid_cat");
    for r in realized {
        assert!((r["score"].as_f64().unwrap() - 1.0).abs() <= 1e-12);
    }
    // The emitted answer re-parses through cmd_parse.
    let answer_text = result["answer_text"].as_str().unwrap();
    let out = spider(&["parse", "--answer", answer_text, "--json"], dir.path());
    assert_eq!(out.status.code(), Some(0));

    // Unparseable question and unplannable instruction exit codes.
    let out = spider(
        &["demo", "--question", "hello", "--ckpt", "model.ckpt", "--gallery", "gallery.jsonl"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let out = spider(
        &[
            "demo", "--question", "[INPUT] [IMAGE] do something else entirely", "--ckpt",
            "model.ckpt", "--gallery", "gallery.jsonl",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));

    // Pseudo: deterministic emission, every record parses.
    for run in ["p1.jsonl", "p2.jsonl"] {
        let out = spider(
            &[
                "pseudo", "--flavor", "tgi", "--count", "15", "--ckpt", "model.ckpt",
                "--gallery", "gallery.jsonl", "--out", run, "--seed", "8",
            ],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(
        fs::read(dir.path().join("p1.jsonl")).unwrap(),
        fs::read(dir.path().join("p2.jsonl")).unwrap()
    );
    let pseudo = fs::read_to_string(dir.path().join("p1.jsonl")).unwrap();
    assert_eq!(pseudo.lines().count(), 15);
}

#[test]
fn gradcheck_exits_by_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let out = spider(&["gradcheck", "--seed", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("max relative error"));

    let out = spider(&["gradcheck", "--seed", "1", "--corrupt"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    // The report names the worst-offending parameter.
    assert!(stdout(&out).contains('`'));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    spider(
        &[
            "synth", "--what", "captions", "--source", "coco", "--count", "20", "--seed", "9",
            "--out", "flag.jsonl",
        ],
        dir.path(),
    );
    let out = Command::new(env!("CARGO_BIN_EXE_spider"))
        .args([
            "synth", "--what", "captions", "--source", "coco", "--count", "20", "--out",
            "env.jsonl",
        ])
        .current_dir(dir.path())
        .env("SPIDER_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        fs::read(dir.path().join("flag.jsonl")).unwrap(),
        fs::read(dir.path().join("env.jsonl")).unwrap()
    );
}
