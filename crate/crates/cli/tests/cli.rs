use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn relshock(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relshock"))
        .args(args)
        .arg("--output")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_epsilon_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = relshock(&["profile"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("epsilon"));
}

#[test]
fn unreadable_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.toml");
    let o = relshock(&["contract", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_value_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[problem]\nepsilon = 0.1\nlambda = 7.0\n").unwrap();
    let o = relshock(&["contract", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("line 3") && msg.contains("lambda"), "{msg}");
}

#[test]
fn burgers_profile_passes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = relshock(
        &["profile", "--flux", "burgers", "--entropy", "quadratic", "--eps", "0.5"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "xi,S,S_prime,S_double_prime,a,y");
    let json = fs::read_to_string(dir.path().join("profile.json")).unwrap();
    assert!(json.contains("\"pass\": true"));
}

#[test]
fn hypotheses_accept_quartic_and_reject_burgers() {
    let dir = tempfile::tempdir().unwrap();
    let ok = relshock(&["hypotheses"], dir.path());
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    let bad = relshock(
        &["hypotheses", "--flux", "burgers", "--entropy", "quadratic"],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("eta''''"));
}

#[test]
fn set_overrides_reach_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = relshock(
        &[
            "profile",
            "--eps",
            "0.2",
            "--set",
            "problem.flux=\"burgers\"",
            "--set",
            "problem.entropy=quadratic",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let bad = relshock(&["profile", "--eps", "0.2", "--set", "nonsense"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn poincare_output_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["poincare", "--trials", "50", "--seed", "3"];
    assert_eq!(relshock(&args, a.path()).status.code(), Some(0));
    assert_eq!(relshock(&args, b.path()).status.code(), Some(0));
    let read = |d: &Path| fs::read(d.join("poincare_argmax.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn short_contraction_run_writes_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let o = relshock(
        &[
            "contract",
            "--flux",
            "burgers",
            "--entropy",
            "quadratic",
            "--eps",
            "0.2",
            "--lambda",
            "0.3",
            "--t-final",
            "0.2",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("snapshots.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("t,X,Xdot,Y,B1"));
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn shipped_configs_load() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        let o = relshock(&["profile", "--config", path.to_str().unwrap()], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}: {}", path.display(), stderr(&o));
    }
}
