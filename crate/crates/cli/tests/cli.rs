use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn reweigh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reweigh"))
        .args(args)
        .output()
        .expect("run reweigh")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_sample_decode_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    assert!(reweigh(&["gen", "-d", "3", "-p", "0.01", "--out", d])
        .status
        .success());
    let dem = dir.path().join("model.dem");
    let out = reweigh(&[
        "sample",
        "--dem",
        path(&dem),
        "--shots",
        "300",
        "--seed",
        "4",
        "--out",
        d,
    ]);
    assert!(out.status.success());
    let shots = fs::read_to_string(dir.path().join("shots.txt")).unwrap();
    assert_eq!(shots.lines().count(), 300);

    let shots_path = dir.path().join("shots.txt");
    let out = reweigh(&[
        "decode",
        "--dem",
        path(&dem),
        "--input",
        path(&shots_path),
        "--out",
        d,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let decoded = fs::read_to_string(dir.path().join("decoded.txt")).unwrap();
    assert_eq!(decoded.lines().count(), 300);
    let ok = decoded.lines().filter(|l| l.contains(" ok:1 ")).count();
    assert!(ok >= 290, "{ok} of 300 decoded correctly");

    // Same seed, same dump.
    let again = reweigh(&[
        "sample",
        "--dem",
        path(&dem),
        "--shots",
        "300",
        "--seed",
        "4",
    ]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), shots);
}

#[test]
fn generated_model_matches_flags() {
    let a = reweigh(&[
        "gen",
        "-d",
        "3",
        "-p",
        "0.02",
        "--mismatch",
        "random:10",
        "--seed",
        "1",
    ]);
    let b = reweigh(&[
        "gen",
        "-d",
        "3",
        "-p",
        "0.02",
        "--mismatch",
        "random:10",
        "--seed",
        "1",
    ]);
    let plain = reweigh(&["gen", "-d", "3", "-p", "0.02"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, plain.stdout);
}

#[test]
fn bad_input_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "[code]\ndistance = 4\n").unwrap();
    assert_eq!(
        reweigh(&["bench", "--config", path(&cfg)]).status.code(),
        Some(2)
    );

    fs::write(&cfg, "[nonsense]\n").unwrap();
    let out = reweigh(&["bench", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config error"));

    assert_eq!(
        reweigh(&["gen", "--mismatch", "sideways:3"]).status.code(),
        Some(2)
    );
    let missing = dir.path().join("missing.cfg");
    assert_eq!(
        reweigh(&["bench", "--config", path(&missing)])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn bench_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "seed = 3\n[code]\ndistance = 3\np = 0.02\n[mismatch]\nkind = random\nstrength = 10\n\
         [shots]\ntrace = 5000\neval = 5000\n[output]\narms = oracle,mismatched,aligned\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = reweigh(&["bench", "--config", path(&cfg), "--out", path(&out_dir)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "arm,shots,errors,ler,ci_low,ci_high,trigger_rate,trace_trials"
    );
    assert!(lines[1].starts_with("oracle,5000,"));
    assert!(lines[3].starts_with("aligned,5000,"));
    assert_eq!(
        fs::read_to_string(out_dir.join("metrics.csv")).unwrap(),
        csv
    );
    assert!(out_dir.join("report.json").exists());

    // --seed overrides the file and changes the shots.
    let other = reweigh(&[
        "bench",
        "--config",
        path(&cfg),
        "--seed",
        "4",
        "--arms",
        "oracle",
    ]);
    let other = String::from_utf8(other.stdout).unwrap();
    assert_eq!(other.lines().count(), 2);
}
