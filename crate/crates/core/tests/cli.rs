use std::path::Path;
use std::process::{Command, Output};

use aircomp_core::harness::{read_csv, read_gain_table};

fn aircomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aircomp")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn plan_prints_one_row() {
    let out = aircomp(&["plan", "--n", "50", "--snr-db", "10", "--bits", "8", "--md", "64"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("n,snr_db,bits,"));
    assert!(lines[1].starts_with("50,10,8,"));
    assert!(lines[1].contains(",32,225,64,"), "{}", lines[1]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        aircomp(&["plan", "--n", "0", "--snr-db", "10", "--bits", "8"])
            .status
            .code(),
        Some(2)
    );

    let typo = write_config(dir.path(), "typo.toml", "trials = 3\nsnr_dbb = 4.0\n");
    let out = aircomp(&["run", "--config", path(&typo)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("snr_dbb"));

    let missing = dir.path().join("nope.toml");
    assert_eq!(aircomp(&["run", "--config", path(&missing)]).status.code(), Some(4));

    // A single regressor value has no spread to fit.
    let degenerate = write_config(
        dir.path(),
        "deg.toml",
        "function = \"regression\"\nn_sensors = 1\ntrials = 1\nnoiseless = true\n",
    );
    assert_eq!(aircomp(&["run", "--config", path(&degenerate)]).status.code(), Some(3));
}

#[test]
fn run_honours_seed_and_out() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "n_sensors = 20\nsnr_db = 6.0\ntrials = 4\n");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(
        aircomp(&["run", "--config", path(&cfg), "--seed", "5", "--out", path(&a)])
            .status
            .success()
    );
    assert!(
        aircomp(&["run", "--config", path(&cfg), "--seed", "6", "--out", path(&b)])
            .status
            .success()
    );
    let ra = read_csv(&a).unwrap();
    let rb = read_csv(&b).unwrap();
    assert_eq!(ra[0].summary.seed, 5);
    assert_eq!(rb[0].summary.seed, 6);
    assert_eq!(ra[0].trials.len(), 4);
    assert_ne!(ra[0].trials, rb[0].trials);

    let stdout = aircomp(&["run", "--config", path(&cfg), "--seed", "5"]);
    assert_eq!(stdout.stdout, std::fs::read(&a).unwrap());
}

#[test]
fn hundred_scenario_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "grid.toml",
        "trials = 1\nbits = 6\nn_sensors = { start = 20, stop = 200, step = 20 }\nsnr_db = { start = 6.0, stop = 24.0, step = 2.0 }\n",
    );
    let out = dir.path().join("out");
    assert!(aircomp(&["sweep", "--config", path(&cfg), "--out", path(&out)])
        .status
        .success());
    let runs = read_csv(&out.join("runs.csv")).unwrap();
    assert_eq!(runs.len(), 100);
    let gains = read_gain_table(&out.join("gain.csv")).unwrap();
    assert_eq!(gains.len(), 100);
    for (r, g) in runs.iter().zip(&gains) {
        assert_eq!((r.summary.n, r.summary.snr_db), (g.n, g.snr_db));
        assert_eq!((r.summary.m1, r.summary.m2), (g.m1, g.m2));
        assert_eq!(r.summary.gain_continuous, g.gain);
    }
}

#[test]
fn figures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "fig.toml",
        "trials = 20\nn_sensors = [24, 48]\nsnr_db = [3.5]\n",
    );
    for kind in ["gain-sum", "gain-max"] {
        let out = dir.path().join(format!("{kind}.csv"));
        assert!(aircomp(&["figure", kind, "--config", path(&cfg), "--out", path(&out)])
            .status
            .success());
        let rows = read_gain_table(&out).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].function.as_str(), &kind[5..]);
    }
    let out = dir.path().join("bits.csv");
    assert!(
        aircomp(&["figure", "bit-error", "--config", path(&cfg), "--out", path(&out)])
            .status
            .success()
    );
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("n,snr_db,bits,depth,bit,correct_fraction,rms_error\n"));
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 7));
    assert!(text.lines().count() > 1);
}
