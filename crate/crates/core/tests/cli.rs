use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], extra: &[&Path]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_triple-spread"))
        .args(args)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn construct_k21_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["construct", "--n", "21", "--seed", "3", "--out"], &[out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let got = fs::read_to_string(a.join("decomposition.txt")).unwrap();
    assert_eq!(got, fs::read_to_string(b.join("decomposition.txt")).unwrap());
    assert_eq!(
        fs::read(a.join("record.json")).unwrap(),
        fs::read(b.join("record.json")).unwrap()
    );
    let golden = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/k21_seed3.txt")).unwrap();
    assert_eq!(got, golden);

    let config: serde_json::Value = serde_json::from_slice(&fs::read(a.join("config.json")).unwrap()).unwrap();
    assert_eq!(config["command"], "construct");
    assert_eq!(config["args"]["seed"], 3);
}

#[test]
fn construct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["construct", "--n", "7", "--method", "oracle", "--out"], &[&dir.path().join("ok")]);
    assert_eq!(code(&o), 0);
    // K_5 has no decomposition
    let o = run(&["construct", "--n", "5", "--out"], &[&dir.path().join("bad")]);
    assert_eq!(code(&o), 2);
    // no triples available at all
    let o = run(&["construct", "--n", "9", "--p", "0", "--method", "oracle", "--out"], &[&dir.path().join("empty")]);
    assert_eq!(code(&o), 1);
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.txt");
    fs::write(&good, "n=7\n0 1 2\n0 3 4\n0 5 6\n1 3 5\n1 4 6\n2 3 6\n2 4 5\n").unwrap();
    assert_eq!(code(&run(&["verify"], &[&good])), 0);

    let dup = dir.path().join("dup.txt");
    fs::write(&dup, "n=7\n0 1 2\n0 1 2\n0 3 4\n0 5 6\n1 3 5\n1 4 6\n2 3 6\n").unwrap();
    assert_eq!(code(&run(&["verify"], &[&dup])), 1);

    let junk = dir.path().join("junk.txt");
    fs::write(&junk, "not a triple list\n").unwrap();
    assert_eq!(code(&run(&["verify"], &[&junk])), 2);

    let square = dir.path().join("square.txt");
    fs::write(&square, "0 1 2\n1 2 0\n2 0 1\n").unwrap();
    assert_eq!(code(&run(&["verify", "--target", "latin"], &[&square])), 0);
    let broken = dir.path().join("broken.txt");
    fs::write(&broken, "0 1 2\n1 2 0\n2 1 0\n").unwrap();
    assert_eq!(code(&run(&["verify", "--target", "latin"], &[&broken])), 1);
}

#[test]
fn constructed_latin_square_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("l");
    let o = run(&["construct", "--n", "7", "--target", "latin", "--seed", "2", "--out"], &[&out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&run(&["verify", "--target", "latin"], &[&out.join("decomposition.txt")])), 0);
}

#[test]
fn sweep_writes_config_and_saturates() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let o = run(&["sweep", "--n", "7", "--p-grid", "0,1", "--trials", "10", "--out"], &[&csv]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "n,p,trials,successes,frequency,ci_low,ci_high");
    assert!(rows[1].starts_with("7,0,10,0,0.000000,"));
    assert!(rows[2].starts_with("7,1,10,10,1.000000,"));
    assert!(dir.path().join("s.config.json").exists());

    let o = run(&["sweep", "--n", "8", "--p-grid", "0.5"], &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn spread_point_mass_and_pipeline() {
    let o = run(&["spread", "--n", "7", "--trials", "200", "--method", "point"], &[]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["q1"], 1.0);

    let o = run(&["spread", "--n", "21", "--trials", "200", "--method", "pipeline", "--seed", "4"], &[]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["successes"].as_u64().unwrap() > 100);
    assert!(r["q1"].as_f64().unwrap() < 1.0);
}

#[test]
fn oracle_counts_k9() {
    let o = run(&["oracle", "--n", "9"], &[]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("840"));
}
