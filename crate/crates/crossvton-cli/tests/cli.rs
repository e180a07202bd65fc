//! End-to-end tests of the `crossvton` binary via std::process.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crossvton"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn route_single_cells() {
    let out = run(&["route", "--pc", "upper/long", "--pg", "upper/short"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "pc=upper/long pg=upper/short method=IDM_S round=round1");

    let out = run(&["route", "--pc", "lower/short", "--pg", "upper/long"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "pc=lower/short pg=upper/long method=NA round=none");

    let out = run(&["route", "--pc", "dress/long", "--pg", "dress/long", "--json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["method"], "IDM");
    assert_eq!(v["round"], "round1");
}

#[test]
fn route_table_covers_all_36_cells() {
    let out = run(&["route", "--table"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 36);
    let idm = lines.iter().filter(|l| l.contains("method=IDM ")).count();
    let idm_s = lines.iter().filter(|l| l.contains("method=IDM_S ")).count();
    let cv = lines.iter().filter(|l| l.contains("method=CROSSVTON ")).count();
    let na = lines.iter().filter(|l| l.contains("method=NA ")).count();
    assert_eq!((idm, idm_s, cv, na), (14, 6, 8, 8));
}

#[test]
fn route_rejects_bad_spec_with_exit_2() {
    let out = run(&["route", "--pc", "bogus", "--pg", "upper/long"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["route"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["no-such-subcommand"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn construct_mock_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let result = run(&[
            "construct",
            "--mock",
            "--seed",
            "7",
            "--round1-trained",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
        assert!(stdout(&result).contains("records written: 28"));
    }
    for name in ["manifest.round1.jsonl", "manifest.round2.jsonl"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn construct_round2_requires_round1_trained() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "construct",
        "--mock",
        "--round",
        "2",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("round1_trained"));
}

#[test]
fn trizone_round1_matches_golden_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("tz.png");
    let out = run(&[
        "trizone",
        "--round",
        "1",
        "--pm",
        fixture("pm.png").to_str().unwrap(),
        "--palette",
        fixture("pm.palette.txt").to_str().unwrap(),
        "--garment-class",
        "upper_garment",
        "--fg",
        fixture("fg.png").to_str().unwrap(),
        "--gen",
        fixture("gen.png").to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let produced = std::fs::read(&out_path).unwrap();
    let golden = std::fs::read(fixture("trizone_round1_golden.png")).unwrap();
    assert_eq!(produced, golden, "tri-zone output drifted from the golden fixture");
    assert!(stdout(&out).contains("tryon=24 imagi=15 recon=217"));
}

#[test]
fn adjust_mask_shrink_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.png");
    let b = dir.path().join("b.png");
    for path in [&a, &b] {
        let out = run(&[
            "adjust-mask",
            "--mode",
            "shrink",
            "--gen",
            fixture("gen.png").to_str().unwrap(),
            "--seed",
            "5",
            "--out-adjusted",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let out = run(&[
        "adjust-mask",
        "--mode",
        "stretch",
        "--gen",
        fixture("gen.png").to_str().unwrap(),
        "--out-adjusted",
        dir.path().join("c.png").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "stretch without densepose inputs is a usage error");
}

#[test]
fn train_toy_zero_steps_reports_initial_loss() {
    let out = run(&["train-toy", "--steps", "0", "--stage2-steps", "0", "--quadruplets", "6"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("stage1: 0 steps"), "{text}");
    assert!(text.contains("stage2: 0 steps"), "{text}");
}

#[test]
fn eval_acc_scripted_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("judge.txt");
    std::fs::write(&script, "R\nR\nR\nU\n").unwrap();
    let json_path = dir.path().join("acc.json");
    let out = run(&[
        "eval-acc",
        "--mock-judge",
        script.to_str().unwrap(),
        "--json-out",
        json_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("acc: 0.7500"));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(v["total"], 4);
    assert_eq!(v["reasonable"], 3);
    assert!((v["acc"].as_f64().unwrap() - 0.75).abs() < 1e-12);
}

#[test]
fn ssim_of_identical_file_is_one() {
    let out = run(&[
        "ssim",
        fixture("pm.png").to_str().unwrap(),
        fixture("pm.png").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "1.000000");

    let out = run(&["ssim", fixture("pm.png").to_str().unwrap(), "/no/such/file.png"]);
    assert_eq!(out.status.code(), Some(1));
}
