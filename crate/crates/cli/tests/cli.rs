use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_txembed"))
        .args(["--threads", "1", "--data-dir"])
        .arg(dir)
        .args(args)
        .output()
        .expect("spawn txembed")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn generated(clients: &str, seed: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen", "--out", "data", "--clients", clients, "--seed", seed]);
    dir
}

#[test]
fn exit_codes_distinguish_usage_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(run(dir.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["train", "--out", "m.bin"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["train", "--data", "x.csv", "--out", "m.bin", "--method", "nope"]).status.code(), Some(2));
    let missing = run(dir.path(), &["train", "--data", "missing.csv", "--out", "m.bin"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing.csv"));
}

#[test]
fn embedding_with_other_categories_fails_cleanly() {
    let dir = generated("200", "1");
    ok(dir.path(), &["gen", "--out", "narrow", "--clients", "50", "--categories", "40"]);
    ok(dir.path(), &["train", "--data", "data/transactions.csv", "--out", "m.bin"]);
    let out = run(dir.path(), &["embed", "--model", "m.bin", "--data", "narrow/transactions.csv", "--out", "e.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:") && !err.contains("panicked"), "{err}");
    assert!(!dir.path().join("e.csv").exists());
}

#[test]
fn retrieve_reports_every_requested_k() {
    let dir = generated("300", "2");
    ok(dir.path(), &["train", "--data", "data/transactions.csv", "--out", "m.bin"]);
    ok(dir.path(), &["embed", "--model", "m.bin", "--data", "data/transactions.csv", "--out", "e.csv"]);
    let stdout = ok(
        dir.path(),
        &[
            "retrieve", "--queries", "e.csv", "--database", "e.csv", "--relevance", "data/transactions.csv",
            "--descriptors", "CAT1", "--k", "5", "2E1", "1e2", "--out", "r.csv",
        ],
    );
    assert!(stdout.starts_with("MAP@5\tMAP@20\tMAP@100"), "{stdout}");
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    for k in [5, 20, 100] {
        assert!(csv.contains(&format!("\nmap,{k},")), "{csv}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["report"]["map"].as_array().unwrap().len(), 3);
    let too_many = run(
        dir.path(),
        &[
            "retrieve", "--queries", "e.csv", "--database", "e.csv", "--relevance", "data/transactions.csv",
            "--descriptors", "CAT1", "--k", "1E6", "--out", "r2.csv",
        ],
    );
    assert_ne!(too_many.status.code(), Some(0));
}

#[test]
fn config_file_and_best_toml_drive_commands() {
    let dir = generated("300", "3");
    std::fs::write(
        dir.path().join("run.toml"),
        "seed = 4\n[train]\nmethod = \"msda\"\npreproc = \"binarize\"\nnoise_p = 0.3\n",
    )
    .unwrap();
    let config = dir.path().join("run.toml");
    let stdout = ok(
        dir.path(),
        &["--config", config.to_str().unwrap(), "train", "--data", "data/transactions.csv", "--out", "m.bin"],
    );
    assert!(stdout.contains("p=0.3") && stdout.contains("preproc=binarize"), "{stdout}");

    ok(
        dir.path(),
        &[
            "tune", "--train", "data/transactions.csv", "--val", "data/transactions.csv", "--noise-p", "0.2,0.7",
            "--k", "4", "--targets", "CAT3", "--out-dir", "tune",
        ],
    );
    let best = dir.path().join("tune/best.toml");
    let stdout = ok(
        dir.path(),
        &["--config", best.to_str().unwrap(), "train", "--data", "data/transactions.csv", "--out", "best.bin"],
    );
    assert!(stdout.starts_with("trained msda:"), "{stdout}");

    std::fs::write(dir.path().join("bad.toml"), "[train]\nlayers = \"two\"\n").unwrap();
    let bad = dir.path().join("bad.toml");
    let out = run(
        dir.path(),
        &["--config", bad.to_str().unwrap(), "train", "--data", "data/transactions.csv", "--out", "x.bin"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn leaderboard_lists_every_combination() {
    let dir = generated("300", "5");
    ok(
        dir.path(),
        &[
            "tune", "--train", "data/transactions.csv", "--val", "data/transactions.csv", "--preproc",
            "log,binarize", "--noise-p", "0.1,0.5,0.9", "--k", "4", "--targets", "CAT3,CAT4", "--out-dir", "t",
        ],
    );
    let board = std::fs::read_to_string(dir.path().join("t/leaderboard.csv")).unwrap();
    let rows: Vec<&str> = board.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 6);
    let scores: Vec<f64> = rows.iter().map(|r| r.split(',').nth(3).unwrap().parse().unwrap()).collect();
    let sorted = {
        let mut s = scores.clone();
        s.sort_by(f64::total_cmp);
        s
    };
    assert_eq!(scores, sorted);
    assert!(!board.contains("runtime_s"));
}

#[test]
fn report_writes_one_block_per_selected_cluster() {
    let dir = generated("400", "6");
    ok(dir.path(), &["train", "--data", "data/transactions.csv", "--out", "m.bin"]);
    ok(dir.path(), &["embed", "--model", "m.bin", "--data", "data/transactions.csv", "--out", "e.csv"]);
    ok(
        dir.path(),
        &[
            "report", "--embeddings", "e.csv", "--data", "data/transactions.csv", "--k", "5", "--clusters", "3",
            "--members", "4", "--out", "rep.csv",
        ],
    );
    let text = std::fs::read_to_string(dir.path().join("rep.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("# cluster ")).count(), 3);
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 12);
}
