use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_immuno-turing");

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .env_remove("IMMUNO_TURING_OUT")
        .output()
        .expect("spawn binary")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn kv(text: &str, key: &str) -> Option<String> {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .map(str::to_owned)
}

fn row<'a>(text: &'a str, kind: &str) -> &'a str {
    text.lines()
        .find(|l| l.starts_with(kind))
        .unwrap_or_else(|| panic!("no {kind} row in\n{text}"))
}

#[test]
fn equilibria_reports_stable_untreated_cce() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "equilibria",
            "--scenario",
            "untreated",
            "--c",
            "0.25",
            "--p2",
            "0.5",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let cce = row(&text, "CCE");
    assert!(
        cce.contains("0.592878") && cce.contains("0.372148") && cce.contains("0.295647"),
        "{cce}"
    );
    assert!(cce.contains(" stable"), "{cce}");
    assert!(dir.path().join("equilibria/equilibria.csv").is_file());
}

#[test]
fn equilibria_marks_cfe_unstable() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "equilibria",
            "--scenario",
            "untreated",
            "--s1",
            "0",
            "--s3",
            "0",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let cfe = row(&text, "CFE");
    assert!(cfe.contains("unstable"), "{cfe}");
}

#[test]
fn unknown_flag_is_usage_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&out, &["equilibria", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_config_key_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "p2 = 0.5\nnot_a_key = 1\n").unwrap();
    let o = run(
        &dir.path().join("run"),
        &["equilibria", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn dispersion_zero_wavenumber_matches_ode_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["dispersion", "--k-max", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("dispersion/dispersion.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 1, "{csv}");
    let growth: f64 = rows[0].split(',').nth(1).unwrap().parse().unwrap();
    assert!((growth + 0.0121217944).abs() < 1e-9, "{growth}");
}

#[test]
fn dispersion_positive_d32_is_turing_unstable() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["dispersion", "--d32", "0.01"]);
    assert_eq!(o.status.code(), Some(0));
    let g: f64 = kv(&stdout(&o), "growth_max").unwrap().parse().unwrap();
    assert!(g > 0.0, "{g}");
}

#[test]
fn dispersion_threshold_report_compares_with_reference() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["dispersion", "--find-critical"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let reference: f64 = kv(&text, "reference_threshold").unwrap().parse().unwrap();
    assert_eq!(reference, -1.0668, "{text}");
    assert!(kv(&text, "critical_d32").is_some(), "{text}");
    assert!(dir
        .path()
        .join("dispersion/dispersion_report.txt")
        .is_file());
}

#[test]
fn hopf_critical_values() {
    for (scenario, target) in [("untreated", 0.520), ("treated", 0.498)] {
        let dir = tempfile::tempdir().unwrap();
        let o = run(dir.path(), &["hopf", "--scenario", scenario]);
        assert_eq!(o.status.code(), Some(0));
        let p2: f64 = kv(&stdout(&o), "p2_critical").unwrap().parse().unwrap();
        assert!((p2 - target).abs() <= 0.005, "{scenario}: {p2}");
    }
}

#[test]
fn hopf_without_crossing_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["hopf", "--p2-lo", "0.1", "--p2-hi", "0.2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no crossing"));
}

#[test]
fn region_default_grid_and_reference_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["region", "--scenario", "untreated"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("region/region.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2500);
    assert!(rows.iter().any(|r| r.ends_with(",true")));

    let o = run(
        dir.path(),
        &[
            "region", "--p2-min", "0.5", "--p2-max", "0.5", "--p2-n", "1", "--c-min", "0.25",
            "--c-max", "0.25", "--c-n", "1",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("region/region.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("0.500000000,0.250000000,true"));
}

#[test]
fn region_empty_grid_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["region", "--p2-n", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_refuses_unstable_step_with_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["simulate", "--dt", "0.01"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("stability bound 0.00100000000"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(BIN)
        .args(["equilibria"])
        .env("IMMUNO_TURING_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("equilibria/manifest.txt").is_file());
}

#[test]
fn manifest_is_written_first_and_records_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["ode", "--p2", "0.55", "--t-end", "200"]);
    assert_eq!(o.status.code(), Some(0));
    let manifest = dir.path().join("ode/manifest.txt");
    let traj = dir.path().join("ode/trajectory.csv");
    let m = fs::read_to_string(&manifest).unwrap();
    assert!(m.contains("subcommand") && m.contains("ode"), "{m}");
    assert!(m.contains("p2"), "{m}");
    let t_manifest = fs::metadata(&manifest).unwrap().modified().unwrap();
    let t_traj = fs::metadata(&traj).unwrap().modified().unwrap();
    assert!(t_manifest <= t_traj);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 3] = [
        (
            &["region", "--p2-n", "20", "--c-n", "20"],
            "region/region.csv",
        ),
        (
            &["ode", "--p2", "0.55", "--t-end", "100"],
            "ode/trajectory.csv",
        ),
        (
            &[
                "simulate",
                "--dims",
                "1",
                "--t-end",
                "5",
                "--snapshot-every",
                "1",
                "--negativity",
                "warn",
            ],
            "simulate/report.csv",
        ),
    ];
    for (args, file) in cases {
        assert_eq!(run(a.path(), args).status.code(), Some(0), "{args:?}");
        assert_eq!(run(b.path(), args).status.code(), Some(0), "{args:?}");
        let x = fs::read(a.path().join(file)).unwrap();
        let y = fs::read(b.path().join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{file} differs between runs");
    }
}

#[test]
fn sequential_flag_matches_parallel_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--dims",
        "2",
        "--t-end",
        "1",
        "--negativity",
        "warn",
        "--outputs",
        "final",
    ];
    assert_eq!(run(a.path(), &args).status.code(), Some(0));
    let mut seq = vec!["--sequential"];
    seq.extend(args);
    assert_eq!(run(b.path(), &seq).status.code(), Some(0));
    let x = fs::read(a.path().join("simulate/report.csv")).unwrap();
    let y = fs::read(b.path().join("simulate/report.csv")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn shipped_hopf_config_flags_oscillation() {
    for name in ["hopf_1d.cfg", "hopf_1d_treated.cfg"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run(
            dir.path(),
            &["simulate", "--config", config(name).to_str().unwrap()],
        );
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        assert_eq!(
            kv(&stdout(&o), "oscillating").as_deref(),
            Some("true"),
            "{name}"
        );
    }
}

#[test]
fn shipped_homogeneous_control_stays_flat() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "simulate",
            "--config",
            config("homogeneous_control.cfg").to_str().unwrap(),
            "--t-end",
            "20",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(
        kv(&text, "v_class").as_deref(),
        Some("homogeneous"),
        "{text}"
    );
}

/// Full 101x101 run to t = 200. The final report must show a heterogeneous
/// and stationary pattern.
#[test]
fn shipped_turing_config_is_heterogeneous_and_stationary() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "simulate",
            "--config",
            config("untreated_d32_neg.cfg").to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let var_v: f64 = kv(&text, "v_variance").unwrap().parse().unwrap();
    assert!(var_v > 1e-4, "{text}");
    assert_ne!(
        kv(&text, "v_class").as_deref(),
        Some("homogeneous"),
        "{text}"
    );
    let rate: f64 = kv(&text, "stationarity_rate").unwrap().parse().unwrap();
    assert!(
        rate < 1e-5,
        "not stationary at t = 200: rate {rate}\n{text}"
    );
}
