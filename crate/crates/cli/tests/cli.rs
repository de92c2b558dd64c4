use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_safeslide"))
}

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"))
}

/// Writes a copy of a bundled scenario with textual substitutions applied.
fn variant(dir: &Path, base: &str, edits: &[(&str, &str)]) -> PathBuf {
    let mut text = fs::read_to_string(bundled(base)).unwrap();
    for (from, to) in edits {
        assert!(text.contains(from), "{from} not in {base}");
        text = text.replace(from, to);
    }
    let path = dir.join(format!("{base}_variant.toml"));
    fs::write(&path, text).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_csvs_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("adaptive_gain");
    let o = bin()
        .args([
            "run",
            bundled("adaptive_gain").to_str().unwrap(),
            "--horizon",
            "0.5",
            "--parallel",
            "2",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));

    let csv = fs::read_to_string(out.join("traj_000.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "t,x1,x2,v1,v2,sigma_norm,h,h_gamma,gain,u1,u2"
    );
    assert!(out.join("traj_009.csv").exists());

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let eps = report["epsilon"].as_f64().unwrap();
    assert!((eps - 0.0781).abs() <= 5e-5);
    let runs = report["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 10);
    for r in runs {
        assert_eq!(r["status"], "pass");
        assert!(r["tau"].as_f64().is_some());
        assert!(r["constants"]["kappa"].as_f64().unwrap() > 0.0);
        assert!(r["constants"]["alpha_c"].as_f64().unwrap() > 0.0);
        assert_eq!(r["verdicts"].as_array().unwrap().len(), 4);
    }
}

#[test]
fn dt_override_changes_sample_count() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = bin()
        .args([
            "run",
            bundled("fixed_gain").to_str().unwrap(),
            "--dt",
            "1e-3",
            "--horizon",
            "0.2",
            "--parallel",
            "1",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let csv = fs::read_to_string(out.join("traj_000.csv")).unwrap();
    // header + one sample per step + the final state
    assert_eq!(csv.lines().count(), 1 + 200 + 1);
}

#[test]
fn resolve_prints_derived_constants() {
    let o = bin()
        .args(["resolve", bundled("adaptive_gain").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("epsilon: 0.078087"), "{text}");
    assert!(text.contains("eta: 6.403100 (literal)"), "{text}");
    assert!(text.contains("check input_uncertainty: holds"), "{text}");
    assert!(text.contains("runs: 10"), "{text}");
}

#[test]
fn resolve_with_computed_eta() {
    let tmp = tempfile::tempdir().unwrap();
    let path = variant(tmp.path(), "fixed_gain", &[("eta = 6.4031", "eta = \"computed\"")]);
    let o = bin().args(["resolve", path.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let expected = format!("eta: {:.6} (computed)", 2.0 * 34f64.sqrt());
    assert!(stdout(&o).contains(&expected), "{}", stdout(&o));
}

#[test]
fn check_reports_assumptions() {
    let o = bin()
        .args(["check", bundled("fixed_gain").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(
        text.contains("disturbance_bound: holds (250000 samples, 0 violations"),
        "{text}"
    );
    assert!(
        text.contains("input_uncertainty: holds (250000 samples, 0 violations"),
        "{text}"
    );
}

#[test]
fn initial_state_inside_obstacle_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let path = variant(tmp.path(), "fixed_gain", &[("x = [1.0, 0.0]", "x = [2.0, 3.5]")]);
    let o = bin().args(["run", path.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("initial[0].x"), "{}", stderr(&o));
}

#[test]
fn schema_violation_exits_2_with_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let path = variant(tmp.path(), "fixed_gain", &[("alpha = 1.0", "alpha = \"one\"")]);
    let o = bin().args(["resolve", path.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("filter.alpha"), "{}", stderr(&o));
}

#[test]
fn inadmissible_epsilon_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let path = variant(
        tmp.path(),
        "adaptive_gain",
        &[("epsilon = \"max_admissible\"", "epsilon = 0.1")],
    );
    let o = bin().args(["resolve", path.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("controller.epsilon"), "{}", stderr(&o));
}

#[test]
fn missing_file_exits_2() {
    let o = bin().args(["run", "/nonexistent/scenario.toml"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn underestimated_disturbance_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let path = variant(
        tmp.path(),
        "fixed_gain",
        &[
            (
                "disturbance = { kind = \"sinusoidal\", amplitude = 5.0, frequency = 5.0 }",
                "disturbance = { kind = \"sinusoidal\", amplitude = 60.0, frequency = 5.0 }",
            ),
            (
                "disturbance_bound = { kind = \"exact_norm\" }",
                "disturbance_bound = { kind = \"constant\", value = 0.0 }",
            ),
        ],
    );
    let o = bin()
        .args(["run", path.to_str().unwrap(), "--horizon", "1", "--out"])
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn divergence_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let path = variant(
        tmp.path(),
        "fixed_gain",
        &[(
            "disturbance = { kind = \"sinusoidal\", amplitude = 5.0, frequency = 5.0 }",
            "disturbance = { kind = \"constant\", value = [1e308, 1e308] }",
        )],
    );
    let out = tmp.path().join("o");
    let o = bin()
        .args(["run", path.to_str().unwrap(), "--horizon", "0.1", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    let report = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("\"diverged\""));
}
