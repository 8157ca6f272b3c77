//! End-to-end checks of the compiled binary: every subcommand, the shipped
//! config files, output file formats, exit codes, and byte-level run-to-run
//! reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pilotlab::engine::SECurve;
use pilotlab::io::{sweep_points_from_csv, SPECTRUM_CSV_HEADER};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pilotlab")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Scratch directory, removed on drop so reruns start clean.
struct TestDir(PathBuf);

impl TestDir {
    fn new(tag: &str) -> TestDir {
        let dir = std::env::temp_dir().join(format!("pilotlab-cli-{}-{tag}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        TestDir(dir)
    }

    fn file(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> PathBuf {
        let path = self.file(name);
        std::fs::write(&path, contents).unwrap();
        path
    }
}

impl Drop for TestDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary spawns")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed with {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("process exits normally")
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

fn spectrum_eigenvalues(csv: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(SPECTRUM_CSV_HEADER));
    lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .collect()
}

const TWO_USER_SCENARIO: &str = r#"{
  "links": [
    { "snr_db": 0.0, "own_cell": true, "pilot_group": 0, "model": { "type": "exp_corr", "r": 0.5, "theta_deg": 40.0 } },
    { "snr_db": 0.0, "own_cell": false, "pilot_group": 0, "model": { "type": "exp_corr", "r": 0.9, "theta_deg": -17.0 } }
  ],
  "target_link": 0,
  "seed": 1
}"#;

fn small_sweep_config() -> String {
    format!("{{ \"scenario\": {TWO_USER_SCENARIO}, \"m_grid\": [8, 16], \"trials\": 25 }}")
}

#[test]
fn eigenspectrum_identity_is_flat() {
    let dir = TestDir::new("spectrum-identity");
    let out = dir.file("spectrum.csv");
    run_ok(&[
        "eigenspectrum",
        "--config",
        s(&configs().join("spectrum_identity.json")),
        "--out",
        s(&out),
    ]);
    let csv = read(&out);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(SPECTRUM_CSV_HEADER));
    for (i, line) in lines.filter(|l| !l.is_empty()).enumerate() {
        assert_eq!(line, format!("{i},1,scaled_identity"));
    }
    assert_eq!(spectrum_eigenvalues(&csv).len(), 8);
}

#[test]
fn eigenspectrum_sector_model_is_rank_deficient() {
    let dir = TestDir::new("spectrum-one-ring");
    let out = dir.file("spectrum.csv");
    let config = configs().join("spectrum_one_ring.json");
    run_ok(&["eigenspectrum", "--config", s(&config), "--out", s(&out), "--seed", "1"]);
    let eigenvalues = spectrum_eigenvalues(&read(&out));
    assert_eq!(eigenvalues.len(), 256);
    assert!(eigenvalues.windows(2).all(|w| w[0] >= w[1]), "spectrum must be descending");
    let near_zero = eigenvalues.iter().filter(|&&v| v < 1e-6).count();
    assert!(
        near_zero * 10 >= 256 * 3,
        "narrow scatterer sectors leave most of the space empty; got {near_zero}/256 below 1e-6"
    );

    // Same seed, same file, to the byte.
    let again = dir.file("again.csv");
    run_ok(&["eigenspectrum", "--config", s(&config), "--out", s(&again), "--seed", "1"]);
    assert_eq!(read(&out), read(&again));
}

#[test]
fn eigenspectrum_full_support_models_stay_positive() {
    let dir = TestDir::new("spectrum-full-support");
    for name in ["spectrum_exp_corr.json", "spectrum_lognormal.json"] {
        let out = dir.file(name);
        run_ok(&["eigenspectrum", "--config", s(&configs().join(name)), "--out", s(&out)]);
        let eigenvalues = spectrum_eigenvalues(&read(&out));
        assert_eq!(eigenvalues.len(), 64);
        assert!(eigenvalues.iter().all(|&v| v > 0.0), "{name}: spectrum must stay positive");
    }
}

#[test]
fn antenna_sweep_writes_curve_and_reruns_identically() {
    let dir = TestDir::new("sweep-antennas");
    let config = dir.write("run.json", &small_sweep_config());

    let first = dir.file("first.csv");
    run_ok(&["sweep-antennas", "--config", s(&config), "--out", s(&first), "--seed", "7"]);

    let points = sweep_points_from_csv(&read(&first)).unwrap();
    assert_eq!(points.len(), 6, "two grid points, three schemes");
    for p in &points {
        assert!(p.sweep_value == 8.0 || p.sweep_value == 16.0);
        assert_eq!(p.trials, 25);
        assert_eq!(p.seed, 7);
        assert!(p.se_bits.is_finite() && p.se_bits > 0.0);
        assert!(p.half_width.is_finite() && p.half_width > 0.0);
    }

    // A JSON twin with the same content accompanies the CSV.
    let twin: SECurve = serde_json::from_str(&read(&dir.file("first.json"))).unwrap();
    assert_eq!(twin.sweep_name, "antennas");
    assert_eq!(twin.points, points);

    let second = dir.file("second.csv");
    run_ok(&["sweep-antennas", "--config", s(&config), "--out", s(&second), "--seed", "7"]);
    assert_eq!(read(&first), read(&second), "same seed must reproduce bytes");

    let reseeded = dir.file("reseeded.csv");
    run_ok(&["sweep-antennas", "--config", s(&config), "--out", s(&reseeded), "--seed", "8"]);
    assert_ne!(read(&first), read(&reseeded), "a different seed must change the draw");
}

#[test]
fn sweep_output_is_thread_count_invariant() {
    let dir = TestDir::new("threads");
    let config = dir.write("run.json", &small_sweep_config());
    let one = dir.file("one.csv");
    let four = dir.file("four.csv");
    run_ok(&["sweep-antennas", "--config", s(&config), "--out", s(&one), "--threads", "1"]);
    run_ok(&["sweep-antennas", "--config", s(&config), "--out", s(&four), "--threads", "4"]);
    assert_eq!(read(&one), read(&four));
}

#[test]
fn sigma_sweep_walks_the_grid() {
    let dir = TestDir::new("sweep-sigma");
    let config = dir.write(
        "run.json",
        r#"{
          "scenario": {
            "links": [
              { "snr_db": 0.0, "own_cell": true, "pilot_group": 0, "model": { "type": "lognormal_diag", "sigma": 1.0 } },
              { "snr_db": -3.0, "own_cell": false, "pilot_group": 0, "model": { "type": "lognormal_diag", "sigma": 1.0 } }
            ],
            "seed": 3
          },
          "sigma_grid": [0.0, 0.5],
          "m": 16,
          "trials": 25
        }"#,
    );
    let out = dir.file("sigma.csv");
    run_ok(&["sweep-sigma", "--config", s(&config), "--out", s(&out)]);
    let points = sweep_points_from_csv(&read(&out)).unwrap();
    assert_eq!(points.len(), 6);
    assert!(points.iter().any(|p| p.sweep_value == 0.0));
    assert!(points.iter().any(|p| p.sweep_value == 0.5));
    let twin: SECurve = serde_json::from_str(&read(&dir.file("sigma.json"))).unwrap();
    assert_eq!(twin.sweep_name, "sigma");
}

#[test]
fn sigma_sweep_requires_gain_spread_models() {
    let dir = TestDir::new("sigma-wrong-model");
    let config = dir.write(
        "run.json",
        &format!(
            "{{ \"scenario\": {TWO_USER_SCENARIO}, \"sigma_grid\": [0.0, 0.5], \"m\": 16, \"trials\": 25 }}"
        ),
    );
    let out = dir.file("sigma.csv");
    assert_eq!(code(&["sweep-sigma", "--config", s(&config), "--out", s(&out)]), 2);
}

#[test]
fn check_asymptotics_classifies_the_shipped_scenarios() {
    let dir = TestDir::new("check-asymptotics");
    let verdict_of = |config: &str| -> String {
        let out = dir.file(&format!("{config}.out"));
        run_ok(&[
            "check-asymptotics",
            "--config",
            s(&configs().join(config)),
            "--out",
            s(&out),
        ]);
        let report: serde_json::Value = serde_json::from_str(&read(&out)).unwrap();
        let records = report["records"].as_array().unwrap();
        assert!(!records.is_empty());
        for r in records {
            assert_eq!(r["verdict"], report["verdict"], "records echo the overall verdict");
        }
        report["verdict"].as_str().unwrap().to_string()
    };

    assert_eq!(verdict_of("two_user_proportional.json"), "contamination-limited");
    assert_eq!(verdict_of("two_user.json"), "unbounded-growth-consistent");
    assert_eq!(verdict_of("block_gain_pair.json"), "unbounded-growth-consistent");
    assert_eq!(verdict_of("lognormal_pair.json"), "unbounded-growth-consistent");
}

#[test]
fn two_user_limit_reports_deterministic_records() {
    let dir = TestDir::new("two-user-limit");
    let config = configs().join("two_user.json");
    let first = dir.file("limit.json");
    run_ok(&[
        "two-user-limit",
        "--config",
        s(&config),
        "--out",
        s(&first),
        "--trials",
        "40",
        "--seed",
        "5",
    ]);
    let report: serde_json::Value = serde_json::from_str(&read(&first)).unwrap();
    assert_eq!(report["seed"], 5);
    let records = report["records"].as_array().unwrap();
    assert_eq!(records.len(), 3, "one record per antenna count in the grid");
    for r in records {
        assert_eq!(r["trials"], 40);
        assert!(r["mean_gamma"].as_f64().unwrap() > 0.0);
        assert!(r["delta"].as_f64().unwrap() > 0.0);
    }

    let second = dir.file("again.json");
    run_ok(&[
        "two-user-limit",
        "--config",
        s(&config),
        "--out",
        s(&second),
        "--trials",
        "40",
        "--seed",
        "5",
    ]);
    assert_eq!(read(&first), read(&second));
}

#[test]
fn scenario_path_is_resolved_relative_to_the_config() {
    let dir = TestDir::new("scenario-path");
    dir.write("scenario.json", TWO_USER_SCENARIO);
    let config = dir.write(
        "run.json",
        r#"{ "scenario_path": "scenario.json", "m_grid": [8], "trials": 10 }"#,
    );
    let out = dir.file("curve.csv");
    run_ok(&["sweep-antennas", "--config", s(&config), "--out", s(&out)]);
    assert_eq!(sweep_points_from_csv(&read(&out)).unwrap().len(), 3);
}

#[test]
fn usage_and_config_errors_use_distinct_exit_codes() {
    let dir = TestDir::new("exit-codes");
    let out = dir.file("out.csv");
    let valid = dir.write("valid.json", &small_sweep_config());

    // No subcommand at all: usage error from the argument parser.
    assert_eq!(code(&[]), 2);

    // Config file missing: an I/O failure, not a usage problem.
    assert_eq!(
        code(&["sweep-antennas", "--config", s(&dir.file("absent.json")), "--out", s(&out)]),
        4
    );

    // Unreadable JSON.
    let broken = dir.write("broken.json", "{ not json");
    assert_eq!(code(&["sweep-antennas", "--config", s(&broken), "--out", s(&out)]), 2);

    // A typo in a key is rejected rather than silently ignored.
    let typo = dir.write(
        "typo.json",
        &format!("{{ \"scenario\": {TWO_USER_SCENARIO}, \"m_gird\": [8] }}"),
    );
    assert_eq!(code(&["sweep-antennas", "--config", s(&typo), "--out", s(&out)]), 2);

    // Present but empty grid.
    let empty = dir.write(
        "empty.json",
        &format!("{{ \"scenario\": {TWO_USER_SCENARIO}, \"m_grid\": [] }}"),
    );
    assert_eq!(code(&["sweep-antennas", "--config", s(&empty), "--out", s(&out)]), 2);

    // Inline scenario and scenario_path together are ambiguous.
    let both = dir.write(
        "both.json",
        &format!(
            "{{ \"scenario\": {TWO_USER_SCENARIO}, \"scenario_path\": \"x.json\", \"m_grid\": [8] }}"
        ),
    );
    assert_eq!(code(&["sweep-antennas", "--config", s(&both), "--out", s(&out)]), 2);

    // Output directory does not exist; parents are never created implicitly.
    let orphan = dir.file("no-such-dir").join("out.csv");
    assert_eq!(code(&["sweep-antennas", "--config", s(&valid), "--out", s(&orphan)]), 4);

    // A .json sweep output would collide with the JSON twin.
    let collide = dir.file("curve.json");
    assert_eq!(code(&["sweep-antennas", "--config", s(&valid), "--out", s(&collide)]), 2);

    // Zero worker threads is meaningless.
    assert_eq!(
        code(&["sweep-antennas", "--config", s(&valid), "--out", s(&out), "--threads", "0"]),
        2
    );
}
