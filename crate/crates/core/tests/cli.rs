use std::fs;
use std::path::Path;

use clap::Parser;
use lpaf::cli::{load_bundle, run, Cli, RunConfig};
use lpaf::Error;

fn exec(args: &[&str]) -> lpaf::Result<Vec<String>> {
    run(Cli::try_parse_from(std::iter::once("lpaf").chain(args.iter().copied())).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn gen_train_eval_heatmap_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, run_dir, eval, heat) = (
        tmp.path().join("data"),
        tmp.path().join("run"),
        tmp.path().join("eval"),
        tmp.path().join("heat"),
    );
    let out = exec(&[
        "gen",
        "--out",
        s(&data),
        "--j",
        "2",
        "--v",
        "2",
        "--horizon",
        "20",
        "--heldout-per-view",
        "2",
    ])
    .unwrap();
    assert!(out.iter().any(|l| l.starts_with("total: 18")), "{out:?}");
    exec(&[
        "train",
        "--data",
        s(&data),
        "--out",
        s(&run_dir),
        "--epochs1",
        "1",
        "--epochs2",
        "1",
        "--epochs3",
        "1",
    ])
    .unwrap();
    exec(&[
        "eval",
        "--run",
        s(&run_dir),
        "--data",
        s(&data),
        "--out",
        s(&eval),
        "--episodes",
        "2",
        "--views",
        "-30,0,30",
    ])
    .unwrap();
    exec(&[
        "heatmap",
        "--run",
        s(&run_dir),
        "--out",
        s(&heat),
        "--fused",
        "--thetas",
        "45",
    ])
    .unwrap();

    let bundle = load_bundle(&run_dir).unwrap();
    let digest = fs::read_to_string(run_dir.join("digest.txt")).unwrap();
    assert_eq!(digest.trim(), bundle.digest());
    assert!(heat.join("heatmap_45_fused.ppm").exists());

    // Replaying every persisted config reproduces every file byte for byte.
    for dir in [&data, &run_dir, &eval, &heat] {
        let before = snapshot(dir);
        fs::remove_dir_all(dir).unwrap();
        fs::create_dir_all(tmp.path().join("cfg")).unwrap();
        let cfg = tmp.path().join("cfg").join("config.json");
        fs::write(
            &cfg,
            &before.iter().find(|(n, _)| n == "config.json").unwrap().1,
        )
        .unwrap();
        exec(&["replay", s(&cfg)]).unwrap();
        assert_eq!(snapshot(dir), before, "{}", dir.display());
    }
}

#[test]
fn baseline_runs_have_no_fusion() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, run_dir) = (tmp.path().join("d"), tmp.path().join("r"));
    exec(&[
        "gen",
        "--out",
        s(&data),
        "--j",
        "1",
        "--v",
        "2",
        "--horizon",
        "30",
        "--heldout-per-view",
        "1",
    ])
    .unwrap();
    exec(&[
        "train",
        "--data",
        s(&data),
        "--out",
        s(&run_dir),
        "--arm",
        "ref-only",
        "--epochs1",
        "1",
    ])
    .unwrap();
    assert!(!run_dir.join("fusion.ckpt").exists());
    assert!(load_bundle(&run_dir).unwrap().fusion.is_none());
    let err = exec(&[
        "heatmap",
        "--run",
        s(&run_dir),
        "--out",
        s(&tmp.path().join("h")),
        "--fused",
    ])
    .unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
}

#[test]
fn failures_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nothing");
    let err = exec(&[
        "train",
        "--data",
        s(&missing),
        "--out",
        s(&tmp.path().join("r")),
    ])
    .unwrap_err();
    assert!(matches!(err, Error::MissingInput(_)));
    assert_eq!(err.exit_code(), 3);

    let err = exec(&["gen", "--out", s(&tmp.path().join("g")), "--a-deg", "120"]).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");

    let err = exec(&[
        "eval",
        "--out",
        s(&tmp.path().join("e")),
        "--views",
        "0,95",
        "--expert",
    ])
    .unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{\"command\":\"gen\"}").unwrap();
    assert_eq!(exec(&["replay", s(&bad)]).unwrap_err().exit_code(), 3);
}

#[test]
fn config_is_written_before_work_starts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let _ = exec(&[
        "train",
        "--data",
        s(&tmp.path().join("missing")),
        "--out",
        s(&out),
    ]);
    let cfg = RunConfig::load(&out.join("config.json")).unwrap();
    assert_eq!(cfg.out_dir(), out);
}

#[test]
fn expert_eval_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("e");
    let lines = exec(&["eval", "--out", s(&out), "--expert", "--episodes", "5"]).unwrap();
    assert_eq!(lines.last().unwrap(), "mean success 100.00%");
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 19);
}
