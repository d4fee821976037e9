use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pavbem::config::KEYS;

fn pavbem(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pavbem"))
        .current_dir(dir)
        .env_remove("PAVBEM_WORKERS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ula_config() -> String {
    format!("{}/../../configs/ula256.toml", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn help_lists_every_key_with_default() {
    let dir = tempfile::tempdir().unwrap();
    let out = pavbem(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for (key, default, _) in KEYS {
        let line = text
            .lines()
            .find(|l| l.trim_start().starts_with(key))
            .unwrap_or_else(|| panic!("{key} missing"));
        assert!(line.contains(default), "{line}");
    }
    assert!(text.contains("PAVBEM_WORKERS"));
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ula_config();
    let a = pavbem(
        dir.path(),
        &[
            "simulate",
            "--config",
            &cfg,
            "--seed",
            "4",
            "--out",
            "a.txt",
            "--truth-out",
            "ta.txt",
        ],
    );
    let b = pavbem(
        dir.path(),
        &[
            "--config",
            &cfg,
            "simulate",
            "--seed",
            "4",
            "--out",
            "b.txt",
            "--truth-out",
            "tb.txt",
        ],
    );
    assert_eq!(
        (a.status.code(), b.status.code()),
        (Some(0), Some(0)),
        "{}",
        stderr(&a)
    );
    assert!(stdout(&a).starts_with("seed: "));
    let obs = fs::read_to_string(dir.path().join("a.txt")).unwrap();
    assert_eq!(obs, fs::read_to_string(dir.path().join("b.txt")).unwrap());
    assert_eq!(obs.lines().filter(|l| !l.starts_with('#')).count(), 256);
    assert!(obs.contains("# columns: re im theta"));
    let truth = fs::read_to_string(dir.path().join("ta.txt")).unwrap();
    assert_eq!(truth.lines().filter(|l| !l.starts_with('#')).count(), 50);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = pavbem(dir.path(), &["simulate", "--k", "51"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("k = 51"), "{}", stderr(&out));

    fs::write(dir.path().join("bad.toml"), "n_sensor = 12\n").unwrap();
    let out = pavbem(dir.path(), &["simulate", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("n_sensor"), "{}", stderr(&out));

    let out = pavbem(dir.path(), &["simulate", "--set", "nope=1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = pavbem(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn estimate_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = pavbem(dir.path(), &["estimate", "missing.txt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("missing.txt"));

    assert_eq!(pavbem(dir.path(), &["simulate"]).status.code(), Some(0));
    let out = pavbem(
        dir.path(),
        &["estimate", "observation.txt", "--variant", "music"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("music"));

    let out = pavbem(
        dir.path(),
        &["estimate", "observation.txt", "--set", "n_sensors=128"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("n_sensors"), "{}", stderr(&out));
    let out = pavbem(
        dir.path(),
        &["estimate", "observation.txt", "--set", "grid_size=40"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("grid_size"), "{}", stderr(&out));
}

#[test]
fn beamforming_report_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        pavbem(dir.path(), &["simulate", "--seed", "8"])
            .status
            .code(),
        Some(0)
    );
    let run = || {
        pavbem(
            dir.path(),
            &["estimate", "observation.txt", "--variant", "beamforming"],
        )
    };
    let (a, b) = (run(), run());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("top-5 angles (deg):"));
    assert_eq!(
        stdout(&a)
            .lines()
            .filter(|l| l.split_whitespace().count() == 4)
            .count(),
        51
    );
}

#[test]
fn pavbem_recovers_planted_angle() {
    let dir = tempfile::tempdir().unwrap();
    let common = [
        "--k",
        "1",
        "--noise-var",
        "0",
        "--set",
        "phase_noise=false",
        "--seed",
        "3",
    ];
    let sim = pavbem(dir.path(), &[&["simulate"][..], &common].concat());
    assert_eq!(sim.status.code(), Some(0), "{}", stderr(&sim));
    let planted = stdout(&sim)
        .lines()
        .find_map(|l| l.strip_prefix("angles (deg): "))
        .unwrap()
        .to_string();

    let args = [
        &[
            "estimate",
            "observation.txt",
            "--truth",
            "truth.txt",
            "--diagnostics",
            "diag.log",
        ][..],
        &common,
    ]
    .concat();
    let est = pavbem(dir.path(), &args);
    assert_eq!(est.status.code(), Some(0), "{}", stderr(&est));
    let report = stdout(&est);
    let found = report
        .lines()
        .find_map(|l| l.strip_prefix("top-1 angles (deg): "))
        .unwrap();
    assert_eq!(found, planted, "{report}");
    let diag = fs::read_to_string(dir.path().join("diag.log")).unwrap();
    assert!(diag.contains("# columns: iteration noise_var total_occupancy max_change"));
    assert!(diag.lines().filter(|l| !l.starts_with('#')).count() >= 1);
}

#[test]
fn tiny_sweep_writes_one_dat_per_k() {
    let dir = tempfile::tempdir().unwrap();
    let out = pavbem(
        dir.path(),
        &[
            "sweep",
            "--config",
            &ula_config(),
            "--trials",
            "2",
            "--workers",
            "2",
            "--output-dir",
            "out",
            "--set",
            "noise_grid_spec=logspace:0.01:0.01:1",
            "--set",
            "algorithms=[\"beamforming\", \"pavbem\"]",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let mut names: Vec<String> = fs::read_dir(dir.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["corr_k2.dat", "corr_k5.dat"]);
    let text = fs::read_to_string(dir.path().join("out/corr_k2.dat")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("# sigma2 beamforming pavbem\n0.01 "));
    assert!(stdout(&out).contains("K=5 sigma2=1e-2"));
}
