use std::path::Path;
use std::process::{Command, Output};

use ndo_tomo::checkpoint::load_checkpoint;
use ndo_tomo::dataset_io::load_dataset;
use ndo_tomo::report_io::load_report;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ndo-tomo"))
        .current_dir(dir)
        .env_remove("NDO_TOMO_JOBS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn gen_writes_nine_bases_of_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        dir.path(),
        &[
            "gen",
            "--target",
            "bell",
            "--p-dep",
            "0.5",
            "--n-samples",
            "1000",
            "--seed",
            "7",
            "--out",
            "d.txt",
        ],
    );
    let ds = load_dataset(&dir.path().join("d.txt")).unwrap();
    assert_eq!(ds.n_records(), 9000);
    assert_eq!(ds.groups().len(), 9);
    assert!(String::from_utf8_lossy(&out.stderr).contains("purity=0.437500"));
    let text = std::fs::read_to_string(dir.path().join("d.txt")).unwrap();
    assert!(text.starts_with("# ndo-dataset v1"));
}

#[test]
fn gen_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    for (name, seed) in [("a.txt", "3"), ("b.txt", "3"), ("c.txt", "4")] {
        ok(
            dir.path(),
            &[
                "gen",
                "--target",
                "psi_i",
                "--n-samples",
                "100",
                "--seed",
                seed,
                "--out",
                name,
            ],
        );
    }
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.txt"), read("b.txt"));
    assert_ne!(read("a.txt"), read("c.txt"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["gen", "--target", "bell"]).status.code(), Some(2));
    assert_eq!(
        run(dir.path(), &["gen", "--target", "nope", "--out", "x"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["eval"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.txt"), "ZZ 00\nXQ 01\n").unwrap();
    let out = run(dir.path(), &["train", "--data", "bad.txt", "--out-model", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.txt:2") && err.contains("'Q'"), "{err}");
    let out = run(dir.path(), &["eval", "--model", "missing.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "gen",
            "--target",
            "bell",
            "--n-samples",
            "50",
            "--seed",
            "1",
            "--out",
            "d.txt",
        ],
    );
    let train_args = [
        "train",
        "--data",
        "d.txt",
        "--epochs",
        "3",
        "--seed",
        "2",
        "--reference",
        "bell",
        "--out-model",
        "m.json",
        "--out-report",
        "r.csv",
    ];
    let out = ok(d, &train_args);
    let progress = String::from_utf8_lossy(&out.stderr);
    assert_eq!(progress.lines().filter(|l| l.starts_with("epoch ")).count(), 4);
    let report = load_report(&d.join("r.csv")).unwrap();
    assert_eq!(report.len(), 4);
    assert!(report.iter().all(|r| r.nll.is_some() && r.fidelity.is_some()));

    let first_model = std::fs::read(d.join("m.json")).unwrap();
    let first_report = std::fs::read(d.join("r.csv")).unwrap();
    ok(d, &train_args);
    assert_eq!(std::fs::read(d.join("m.json")).unwrap(), first_model);
    assert_eq!(std::fs::read(d.join("r.csv")).unwrap(), first_report);

    // a checkpoint compared with its own materialized state
    let out = ok(
        d,
        &[
            "eval",
            "--model",
            "m.json",
            "--reference",
            "bell",
            "--out-matrix",
            "rho.txt",
        ],
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let fid_line = text.lines().find(|l| l.starts_with("fidelity ")).unwrap();
    let decimals = fid_line.split('.').nth(1).unwrap().len();
    assert!(decimals >= 4);
    let numeric: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.contains(char::is_alphabetic))
        .collect();
    assert_eq!(numeric.len(), 8);
    assert!(numeric.iter().all(|l| l.split_whitespace().count() == 4));
    let out = ok(d, &["eval", "--matrix", "rho.txt", "--reference", "rho.txt"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("fidelity 1.000000"), "{text}");
    let params = load_checkpoint(&d.join("m.json")).unwrap();
    assert_eq!(params.shape().n_hidden, 1);
    assert_eq!(params.shape().n_aux, 2);
}

#[test]
fn maxlik_writes_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "gen",
            "--target",
            "bell",
            "--n-samples",
            "2000",
            "--seed",
            "5",
            "--out",
            "d.txt",
        ],
    );
    let out = ok(
        d,
        &["maxlik", "--data", "d.txt", "--reference", "bell", "--out", "ml.txt"],
    );
    let err = String::from_utf8_lossy(&out.stderr);
    let fid: f64 = err.split("fidelity ").nth(1).unwrap().trim().parse().unwrap();
    assert!(fid > 0.99, "{err}");
    let out = ok(d, &["eval", "--matrix", "ml.txt", "--reference", "bell"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("purity"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("c.toml"),
        "seed = 11\n[gen]\nn-samples = 7\nout = \"from_config.txt\"\n",
    )
    .unwrap();
    ok(d, &["gen", "--config", "c.toml"]);
    assert_eq!(load_dataset(&d.join("from_config.txt")).unwrap().n_records(), 63);
    ok(
        d,
        &["gen", "--config", "c.toml", "--n-samples", "3", "--out", "flag.txt"],
    );
    assert_eq!(load_dataset(&d.join("flag.txt")).unwrap().n_records(), 27);
    ok(d, &["gen", "--n-samples", "7", "--seed", "11", "--out", "plain.txt"]);
    assert_eq!(
        std::fs::read(d.join("plain.txt")).unwrap(),
        std::fs::read(d.join("from_config.txt")).unwrap()
    );
    std::fs::write(d.join("bad.toml"), "[gen]\nbogus = 1\n").unwrap();
    assert_eq!(
        run(d, &["gen", "--config", "bad.toml", "--out", "x"]).status.code(),
        Some(2)
    );
}

#[test]
fn sweep_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "sweep",
        "--p-dep-list",
        "0.5",
        "--ns-list",
        "20",
        "--n-aux-list",
        "2",
        "--repeats",
        "5",
        "--epochs",
        "2",
        "--seed",
        "9",
        "--jobs",
        "2",
        "--out-csv",
        "s.csv",
    ];
    ok(d, &args);
    let text = std::fs::read_to_string(d.join("s.csv")).unwrap();
    assert!(text.starts_with("# ndo-sweep v1"));
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header, ndo_tomo::sweep::COLUMNS);
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows.iter().filter(|x| &x[0] == "run").count(), 5);
    assert_eq!(&rows[5][0], "summary");
    let seeds: Vec<&str> = rows[..5].iter().map(|x| x.get(5).unwrap()).collect();
    assert_eq!(seeds, ["9", "10", "11", "12", "13"]);
    assert!(rows[..5]
        .iter()
        .all(|x| x[6].parse::<f64>().is_ok() && x[7].parse::<f64>().is_ok()));

    // job count does not change the output
    let mut one = args.to_vec();
    let n = one.len();
    one[n - 3] = "1";
    one[n - 1] = "s1.csv";
    ok(d, &one);
    assert_eq!(std::fs::read_to_string(d.join("s1.csv")).unwrap(), text);
}
