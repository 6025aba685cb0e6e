use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn peierls() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_peierls"));
    cmd.env_remove("PEIERLS__model__N");
    cmd
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const FREE: &str = "[experiment]\nmodel = free\nseed = 5\npairs = 4\n\n[model]\nn = 1\nT = 1\nN = 201\n";

#[test]
fn free_kernel_export() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "free.ini", FREE);
    let out = dir.path().join("out");
    let o = peierls().arg("run").arg(&cfg).arg("-o").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).lines().any(|l| l.starts_with("PASS kernel_closed_form")));

    let csv = fs::read_to_string(out.join("kernel.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "s,s_prime,mu,nu,value");
    let mut worst = 0.0f64;
    let mut rows = 0;
    for line in lines {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        worst = worst.max((f[4] - (f[0] - f[1])).abs());
        rows += 1;
    }
    assert_eq!(rows, 201 * 201);
    assert!(worst <= 1e-8, "{worst:e}");

    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["model"], "free");
    for check in summary["checks"].as_array().unwrap() {
        assert!(check["name"].is_string() && check["tolerance"].is_number() && check["measured"].is_number());
        assert_eq!(check["pass"], true);
    }
}

#[test]
fn runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    for (name, text) in [("free", FREE), ("qm", "[experiment]\nmodel = qm\nseed = 9\n\n[model]\nd = 3\nhamiltonian = random\n")] {
        let cfg = write_config(dir.path(), &format!("{name}.ini"), text);
        let (a, b) = (dir.path().join(format!("{name}-a")), dir.path().join(format!("{name}-b")));
        for out in [&a, &b] {
            let o = peierls().arg("run").arg(&cfg).arg("--out").arg(out).output().unwrap();
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        }
        let mut files: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        files.sort();
        assert!(!files.is_empty());
        for f in files {
            assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap(), "{name}: {f:?}");
        }
    }
}

#[test]
fn even_grid_is_a_configuration_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "even.ini", "[experiment]\nmodel = free\n\n[model]\nN = 200\n");
    let run = peierls().arg("run").arg(&cfg).arg("-o").arg(dir.path().join("x")).output().unwrap();
    let check = peierls().arg("check").arg(&cfg).output().unwrap();
    for o in [run, check] {
        assert_eq!(o.status.code(), Some(1));
        let err = stderr(&o);
        assert!(err.contains("line 5") && err.contains("`N`"), "{err}");
    }
    assert!(!dir.path().join("x").exists());
}

#[test]
fn unknown_keys_and_models_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cases = [
        "[experiment]\nmodel = free\n\n[model]\nomega = 2\n",
        "[experiment]\nmodel = pendulum\n",
        "[experiment]\nmodel = kg\n\n[model]\nM = 7\n",
        "[model]\nN = 201\n",
    ];
    for (k, text) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("c{k}.ini"), text);
        let o = peierls().arg("check").arg(&cfg).output().unwrap();
        assert_eq!(o.status.code(), Some(1), "{text}");
        assert!(stderr(&o).starts_with("configuration error"), "{}", stderr(&o));
    }
    let o = peierls().arg("check").arg(dir.path().join("missing.ini")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn overrides_from_environment_and_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "even.ini", "[experiment]\nmodel = free\n\n[model]\nN = 200\n");
    let o = peierls().arg("check").arg(&cfg).env("PEIERLS__model__N", "101").output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "ok: model free, seed 0");

    let o = peierls().arg("check").arg(&cfg).arg("--set").arg("model.N=51").arg("--set").arg("experiment.seed=12").output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "ok: model free, seed 12");

    // flags win over the environment
    let o = peierls().arg("check").arg(&cfg).env("PEIERLS__model__N", "101").arg("--set").arg("model.N=4").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn upstream_error_names_its_module() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "conj.ini", "[experiment]\nmodel = harmonic\n\n[model]\nT = 1.5707963267948966\nx_minus = 0\nx_plus = 0\n");
    let o = peierls().arg("run").arg(&cfg).arg("-o").arg(dir.path().join("out")).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("el-solver"), "{}", stderr(&o));
}

#[test]
fn invariant_breach_exits_with_two() {
    // On a coarse lattice the spacelike commutator does not yet decay.
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "kg.ini", "[experiment]\nmodel = kg\n\n[model]\nM = 16\n");
    let o = peierls().arg("run").arg(&cfg).arg("-o").arg(dir.path().join("out")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).lines().any(|l| l.starts_with("FAIL microcausality_decay")));
    assert!(dir.path().join("out/summary.json").exists());
}

#[test]
fn model_catalog_snapshot() {
    let o = peierls().arg("models").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text, include_str!("snapshots/models.txt"));
    let names: Vec<&str> = text.lines().filter(|l| !l.starts_with(' ')).map(|l| l.split(':').next().unwrap()).collect();
    assert_eq!(names, ["free", "harmonic", "sphere", "qm", "kg"]);
    assert!(text.contains("T            default 1 ") && text.contains("N            default 201 "));
}
