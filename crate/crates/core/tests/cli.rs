use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_vibresc");

fn vibresc(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("VIBRESC_STRICT")
        .output()
        .unwrap()
}

fn write_defaults(dir: &Path, name: &str) -> String {
    let file = format!("{name}.cfg");
    let out = vibresc(dir, &["defaults", name, "-o", &file]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    file
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn mass_spring_run_settles_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_defaults(dir.path(), "mass_spring");
    let out = vibresc(dir.path(), &["run", &cfg, "outputs.stride=5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let csv = std::fs::read_to_string(dir.path().join("mass_spring.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 2 * (3 + 4));
    assert_eq!(
        &header[..9],
        &[
            "t",
            "q1",
            "qd1",
            "uhat",
            "J",
            "V",
            "Vdot",
            "u_applied",
            "avg_q1"
        ]
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let tail: Vec<f64> = rows.iter().filter(|r| r[0] >= 27.0).map(|r| r[1]).collect();
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    assert!((0.95..=1.05).contains(&mean), "mean {mean}");

    let svg = std::fs::read_to_string(dir.path().join("mass_spring.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    let summary = std::fs::read_to_string(dir.path().join("mass_spring.summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(v["completed"], true);
}

#[test]
fn overrides_accept_dashed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_defaults(dir.path(), "pendulum");
    let out = vibresc(
        dir.path(),
        &[
            "run",
            &cfg,
            "--integration.tf=2",
            "--outputs.csv=short.csv",
            "--outputs.svg=none",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(dir.path().join("short.csv").exists());
    assert!(!dir.path().join("pendulum.svg").exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.cfg"), "").unwrap();
    let out = vibresc(dir.path(), &["run", "empty.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing section [plant]"));

    let cfg = write_defaults(dir.path(), "mass_spring");
    let out = vibresc(dir.path(), &["run", &cfg, "gains.A=-0.3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("A must be positive"),
        "{}",
        stderr(&out)
    );

    let text = std::fs::read_to_string(dir.path().join(&cfg)).unwrap();
    std::fs::write(
        dir.path().join("typo.cfg"),
        text.replace("beta = 2", "betta = 2"),
    )
    .unwrap();
    let out = vibresc(dir.path(), &["run", "typo.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line"), "{}", stderr(&out));
}

#[test]
fn coarse_grid_refused_in_strict_mode_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_defaults(dir.path(), "mass_spring");
    let args = [
        "run",
        &cfg,
        "integration.steps_per_period=2",
        "integration.tf=1",
    ];
    let out = vibresc(dir.path(), &args);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("steps_per_period"));

    let out = Command::new(BIN)
        .args(args)
        .current_dir(dir.path())
        .env("VIBRESC_STRICT", "0")
        .output()
        .unwrap();
    assert_ne!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(
        stderr(&out).to_lowercase().contains("warn"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn diverging_baseline_exits_3_with_partial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_defaults(dir.path(), "comparison_suttner");
    let out = vibresc(dir.path(), &["run", &cfg, "integration.tf=2"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("comparison_suttner.csv")).unwrap();
    let rows = csv.lines().count() - 1;
    assert!(rows > 1);
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| l.split(',').all(|v| v.parse::<f64>().is_ok())));
}

#[test]
fn io_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = vibresc(dir.path(), &["run", "absent.cfg"]);
    assert_eq!(out.status.code(), Some(4));

    let cfg = write_defaults(dir.path(), "pendulum");
    std::fs::write(dir.path().join("blocker"), "").unwrap();
    let out = vibresc(
        dir.path(),
        &[
            "run",
            &cfg,
            "integration.tf=1",
            "outputs.csv=blocker/out.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn sweep_writes_one_file_per_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_defaults(dir.path(), "mass_spring");
    let out = vibresc(
        dir.path(),
        &[
            "sweep",
            &cfg,
            "--omega",
            "25,50",
            "--jobs",
            "2",
            "integration.tf=1",
            "outputs.svg=none",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(dir.path().join("mass_spring_w25.csv").exists());
    assert!(dir.path().join("mass_spring_w50.csv").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_defaults(dir.path(), "flapping");
    let args = ["run", &cfg, "integration.tf=0.5", "outputs.svg=none"];
    assert!(vibresc(dir.path(), &args).status.success());
    let first = std::fs::read(dir.path().join("flapping.csv")).unwrap();
    assert!(vibresc(dir.path(), &args).status.success());
    assert_eq!(
        first,
        std::fs::read(dir.path().join("flapping.csv")).unwrap()
    );
}

#[test]
fn acceptance_subset_prints_one_line_each() {
    let dir = tempfile::tempdir().unwrap();
    let out = vibresc(dir.path(), &["acceptance", "--only", "11,9"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("PASS [11]")));
    assert!(text.lines().any(|l| l.starts_with("PASS [9]")));
    let out = vibresc(dir.path(), &["acceptance", "--only", "99"]);
    assert_eq!(out.status.code(), Some(2));
}
