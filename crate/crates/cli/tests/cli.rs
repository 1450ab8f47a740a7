use std::path::Path;
use std::process::{Command, Output};

fn copy_demo(to: &Path) {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("demo");
    std::fs::create_dir_all(to).unwrap();
    for f in ["manifest.json", "space.json", "planted.json", "hexp.json"] {
        std::fs::copy(demo.join(f), to.join(f)).unwrap();
    }
}

fn pipeline(dir: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynbias"))
        .arg("--manifest")
        .arg(dir.join("manifest.json"))
        .args(extra)
        .arg("pipeline")
        .output()
        .unwrap()
}

#[test]
fn demo_pipeline_runs_and_is_incremental() {
    let tmp = tempfile::tempdir().unwrap();
    copy_demo(tmp.path());
    let first = pipeline(tmp.path(), &[]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));

    let out = tmp.path().join("out");
    for f in ["trials.jsonl", "folds.json", "dgp.json", "report/tau_sweep.csv", "report/tau_sweep.svg"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    assert!(std::fs::read_dir(out.join("reports")).unwrap().count() > 0);

    // tau_imp = 0 keeps every source
    let sweep = std::fs::read_to_string(out.join("report/tau_sweep.csv")).unwrap();
    let row = sweep.lines().filter(|l| !l.starts_with('#')).nth(1).unwrap();
    let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(cols[0], 0.0);
    assert_eq!(cols[3], 4.0);

    let second = pipeline(tmp.path(), &[]);
    assert!(second.status.success());
    let stdout = String::from_utf8_lossy(&second.stdout);
    assert!(stdout.lines().all(|l| l.ends_with("up-to-date") || l.ends_with("disabled")), "{stdout}");

    let forced = pipeline(tmp.path(), &["--force"]);
    assert!(String::from_utf8_lossy(&forced.stdout).contains("done"));
}

#[test]
fn missing_space_file_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    copy_demo(tmp.path());
    std::fs::remove_file(tmp.path().join("space.json")).unwrap();
    let out = pipeline(tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("space.json"));
}

#[test]
fn malformed_override_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let space = Path::new(env!("CARGO_MANIFEST_DIR")).join("demo/space.json");
    let out = Command::new(env!("CARGO_BIN_EXE_dynbias"))
        .args(["explore", "--space"])
        .arg(&space)
        .args(["--strategy", "random", "--budget", "1", "--set", "lr"])
        .arg("--out")
        .arg(tmp.path().join("t.jsonl"))
        .output()
        .unwrap();
    assert!(!out.status.success());
}
