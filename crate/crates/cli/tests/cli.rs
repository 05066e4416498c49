use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
crystal.extent = 3
crystal.radius_nm = 0.6
model.basis = sp3s
model.u0_ev = 1.0
solver.k = 1
sweep.direction = 0,1,0
sweep.fields = 0,50,100
";

fn sidonor(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sidonor"))
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn config(dir: &Path, extra: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, format!("{SMALL}{extra}")).unwrap();
    p.to_string_lossy().into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn predict_reference_values() {
    let d = tempfile::tempdir().unwrap();
    let run = |site: &str, comp: &str| {
        let o = sidonor(d.path(), &["predict", "--site", site, "--component", comp, "--field", "4"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap().lines().next().unwrap().parse::<f64>().unwrap()
    };
    assert!((run("0,4,0", "beta") + 243.0).abs() < 1.0);
    assert!((run("0,-4,0", "beta") + 55.0).abs() < 1.0);
    assert!((run("0,0,4", "beta") + 161.0).abs() < 1.0);
    assert!((run("0,0,4", "B_zz") + 2.3).abs() < 1.0);
    let o = sidonor(d.path(), &["predict", "--site", "0,0,8", "--field", "4"]);
    assert_eq!(code(&o), 2);
    let o = sidonor(d.path(), &["predict", "--site", "0,4,0", "--field", "4", "--table", "missing.csv"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn config_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config(d.path(), "solver.bogus = 3\n");
    let o = sidonor(d.path(), &["--config", &cfg, "shells"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("solver.bogus"));

    let cfg = config(d.path(), "");
    let o = Command::new(env!("CARGO_BIN_EXE_sidonor"))
        .current_dir(d.path())
        .args(["--config", &cfg, "shells"])
        .env("SIDONOR_SOLVER_NOPE", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let o = sidonor(d.path(), &["--config", "absent.cfg", "shells"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn shells_split_under_field() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config(d.path(), "");
    fs::write(&cfg, SMALL.replace("0,1,0", "0,0,0")).unwrap();
    let o = sidonor(d.path(), &["--config", &cfg, "--out", "zero", "shells"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for r in csv_rows(&d.path().join("zero/shells.csv")) {
        assert_eq!(r[0], r[7]);
    }

    let cfg = config(d.path(), "");
    let o = sidonor(d.path(), &["--config", &cfg, "--out", "y", "shells"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&d.path().join("y/shells.csv"));
    let split = |class: &str, size: usize| {
        let shell = &rows.iter().find(|r| r[6] == class && {
            let id = &r[0];
            rows.iter().filter(|q| &q[0] == id).map(|q| q[5].parse::<usize>().unwrap()).sum::<usize>() == size
        }).unwrap()[0];
        let mut m: Vec<usize> = rows.iter().filter(|r| &r[0] == shell).map(|r| r[5].parse().unwrap()).collect();
        m.sort();
        m
    };
    assert_eq!(split("100", 6), vec![1, 1, 4]);
    assert_eq!(split("111", 4), vec![2, 2]);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(d.path().join("y/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["command"], "shells");
}

#[test]
fn sweep_is_cached_and_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config(d.path(), "");
    let o = sidonor(d.path(), &["--config", &cfg, "--out", "a", "sweep"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let outputs = ["table1.csv", "fig2.csv", "probes.csv", "convergence.log"];
    let first: Vec<Vec<u8>> = outputs.iter().map(|f| fs::read(d.path().join("a").join(f)).unwrap()).collect();
    let rows = csv_rows(&d.path().join("a/table1.csv"));
    assert!(rows.iter().any(|r| r[3] == "beta" && !r[5].is_empty()));
    assert!(fs::read_dir(d.path().join("a/cache")).unwrap().count() == 1);

    // rerun hits the cache
    let o = sidonor(d.path(), &["--config", &cfg, "--out", "a", "sweep"]);
    assert_eq!(code(&o), 0);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(d.path().join("a/manifest.json")).unwrap()).unwrap();
    assert!(manifest["solver"].as_array().unwrap().iter().all(|p| p["cache_hit"] == true));
    for (f, bytes) in outputs.iter().zip(&first) {
        assert_eq!(&fs::read(d.path().join("a").join(f)).unwrap(), bytes, "{f}");
    }

    // a fresh directory without cache gives the same bytes
    let o = sidonor(d.path(), &["--config", &cfg, "--out", "b", "sweep"]);
    assert_eq!(code(&o), 0);
    for (f, bytes) in outputs.iter().zip(&first) {
        assert_eq!(&fs::read(d.path().join("b").join(f)).unwrap(), bytes, "{f}");
    }

    // the seed is part of the hash
    let o = sidonor(d.path(), &["--config", &cfg, "--out", "a", "--seed", "7", "sweep"]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_dir(d.path().join("a/cache")).unwrap().count(), 2);
}

#[test]
fn lock_blocks_second_run() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config(d.path(), "");
    fs::create_dir_all(d.path().join("o")).unwrap();
    fs::write(d.path().join("o/.lock"), "pid 1\n").unwrap();
    let o = sidonor(d.path(), &["--config", &cfg, "--out", "o", "shells"]);
    assert_eq!(code(&o), 4);
    assert!(!d.path().join("o/shells.csv").exists());
    fs::remove_file(d.path().join("o/.lock")).unwrap();
    let o = sidonor(d.path(), &["--config", &cfg, "--out", "o", "shells"]);
    assert_eq!(code(&o), 0);
    assert!(!d.path().join("o/.lock").exists());
}

#[test]
fn env_override_changes_the_run() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config(d.path(), "");
    let o = Command::new(env!("CARGO_BIN_EXE_sidonor"))
        .current_dir(d.path())
        .args(["--config", &cfg, "--out", "e", "shells"])
        .env("SIDONOR_SWEEP_DIRECTION", "0,0,0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for r in csv_rows(&d.path().join("e/shells.csv")) {
        assert_eq!(r[0], r[7]);
    }
}

#[test]
fn unreachable_calibration_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config(d.path(), "");
    fs::write(&cfg, SMALL.replace("model.u0_ev = 1.0\n", "model.u0_range_ev = 1,1.5\n")).unwrap();
    let o = sidonor(d.path(), &["--config", &cfg, "--out", "c", "calibrate"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(d.path().join("c/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "failed");
}
