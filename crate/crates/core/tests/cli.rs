//! The `mtl` binary on a tiny world: stage chaining, ranking and error lines.

use std::path::Path;
use std::process::{Command, Output};
use std::sync::OnceLock;

const CONFIG: &str = r#"seed = 5

[sizes]
sources = 6
targets = 3
years = 1

[pgdl]
hidden = 4

[pgdl.pretrain]
epochs = 1

[pgdl.finetune]
epochs = 1

[ensemble]
tune = false
size = 3

[experiments]
exp2 = false
expand = false
"#;

fn mtl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtl")).args(args).env_remove("MTL_OUT").output().expect("run mtl")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Output directory after `all`, shared by the tests below.
fn run_dir() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("tiny.toml");
        std::fs::write(&cfg, CONFIG).unwrap();
        let out = dir.path().join("out");
        let o = mtl(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", "2", "all"]);
        assert!(o.status.success(), "{}", stderr(&o));
        dir
    })
    .path()
}

fn out_dir() -> String {
    run_dir().join("out").display().to_string()
}

#[test]
fn all_writes_reports_and_manifest() {
    let out = run_dir().join("out");
    for f in ["manifest.tsv", "config.toml", "reports/exp1_targets.csv", "reports/report.json", "matrix/pgdl.csv", "meta/pb.txt"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let manifest = std::fs::read_to_string(out.join("manifest.tsv")).unwrap();
    assert!(manifest.starts_with("artifact\tstage\tconfig_hash\tseed\tsha256\tinputs"));
}

#[test]
fn rank_known_target() {
    let o = mtl(&["--config", run_dir().join("tiny.toml").to_str().unwrap(), "--out", &out_dir(), "rank", "tgt_0000", "--family", "pb"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("src_0000") || text.contains("src_0001"), "{text}");
    assert!(run_dir().join("out/rank/tgt_0000_pb.csv").exists());
}

#[test]
fn rank_unknown_lake_names_the_id() {
    let o = mtl(&["--config", run_dir().join("tiny.toml").to_str().unwrap(), "--out", &out_dir(), "rank", "no_such_lake"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: unknown-lake:") && err.contains("no_such_lake"), "{err}");
}

#[test]
fn changed_config_is_refused() {
    let o = mtl(&["--config", run_dir().join("tiny.toml").to_str().unwrap(), "--seed", "6", "--out", &out_dir(), "exp1"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
}

#[test]
fn bad_subcommand_is_a_usage_error() {
    let o = mtl(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: usage:"), "{err}");
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("noseed.toml");
    std::fs::write(&cfg, "[sizes]\nsources = 3\n").unwrap();
    let o = mtl(&["--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap(), "synth"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("error: config:") && !err.contains("config error"), "{err}");
}

#[test]
fn help_exits_zero() {
    let o = mtl(&["--help"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("train-sources"));
}
