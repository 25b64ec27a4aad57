use std::path::Path;
use std::process::{Command, Output};

fn privsched(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privsched"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn identical_config_gives_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "run",
        "--trace",
        "--set",
        "horizon=3000",
        "--set",
        "csi=imperfect",
        "--seed",
        "7",
    ];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(privsched(&a, &args).status.success());
    assert!(privsched(&b, &args).status.success());
    for f in ["run.csv", "run_nodes.csv", "trace.csv", "manifest.txt"] {
        assert_eq!(read(&a, f), read(&b, f), "{f} differs between runs");
    }
}

#[test]
fn worker_count_does_not_change_sweeps() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let args = [
        "preset",
        "sweep-gamma",
        "--set",
        "horizon=2000",
        "--set",
        "gamma=0.05,0.2",
    ];
    assert!(privsched(&a, &[&args[..], &["--workers", "1"]].concat())
        .status
        .success());
    assert!(privsched(&b, &[&args[..], &["--workers", "3"]].concat())
        .status
        .success());
    assert_eq!(
        read(&a, "sweep_gamma_imperfect.csv"),
        read(&b, "sweep_gamma_imperfect.csv")
    );
}

#[test]
fn invalid_gamma_exits_one_and_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let out = privsched(tmp.path(), &["run", "--set", "gamma=1.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`gamma`"));
}

#[test]
fn malformed_config_file_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "# comment\nsigma = -1\n").unwrap();
    let out = privsched(
        &tmp.path().join("o"),
        &["run", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`sigma`"));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = privsched(&blocker.join("sub"), &["pos", "--set", "horizon=100"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn overrides_layer_config_then_set_then_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.cfg");
    std::fs::write(&cfg, "V = 3\nseed = 4\nhorizon = 1000\nkappa = 2\n").unwrap();
    let out_dir = tmp.path().join("o");
    let out = privsched(
        &out_dir,
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "V=9",
            "--seed",
            "11",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest = String::from_utf8(read(&out_dir, "manifest.txt")).unwrap();
    for line in ["V=9", "seed=11", "kappa=2", "horizon=1000", "gamma=0.1"] {
        assert!(
            manifest.lines().any(|l| l == line),
            "missing {line} in\n{manifest}"
        );
    }
}

#[test]
fn sigma_preset_writes_reference_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = privsched(
        tmp.path(),
        &[
            "preset",
            "sweep-sigma",
            "--set",
            "horizon=1500",
            "--set",
            "sigma=0.25,0.5",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = String::from_utf8(read(tmp.path(), "sweep_sigma_reference.csv")).unwrap();
    let labels: Vec<_> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(labels, ["mean_only", "perfect"]);
    let sweep = String::from_utf8(read(tmp.path(), "sweep_sigma_imperfect.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);
}

#[test]
fn unknown_preset_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = privsched(tmp.path(), &["preset", "sweep-everything"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`preset`"));
}
