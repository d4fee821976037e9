use std::fs;

use pavbem::error::Error;
use pavbem::estimators::{EstimatorConfig, Variant};
use pavbem::harness::{
    child_seed, read_dat, run_sweep, run_trial, write_dat, ModelSetup, SweepConfig, SweepRow,
    SweepTable, TrialSpec,
};
use pavbem::model::PhaseMarkovModel;

fn small_config(dir: &std::path::Path, workers: usize) -> SweepConfig {
    SweepConfig {
        model: ModelSetup {
            n_sensors: 32,
            grid_size: 12,
            spacing_ratio: 4.0,
            phase: PhaseMarkovModel::new(0.8, 1.0, 1e6).unwrap(),
            sigma_x_sq: 1.0,
            phase_noise: true,
        },
        k_values: vec![1, 3],
        noise_grid: vec![1e-2, 0.3],
        n_trials: 6,
        algorithms: Variant::ALL.to_vec(),
        base_seed: 17,
        output_dir: dir.to_path_buf(),
        workers,
        estimator: EstimatorConfig {
            max_iterations: 30,
            ..Default::default()
        },
        initial_noise_var: None,
        occupancy: None,
    }
}

#[test]
fn dat_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let table = SweepTable {
        k: 5,
        algorithms: vec![Variant::Beamforming, Variant::Pavbem],
        rows: vec![
            SweepRow {
                noise_var: 1e-3,
                mean_correlation: vec![0.1 + 0.2, 1.0 / 3.0],
                failed: vec![0, 0],
            },
            SweepRow {
                noise_var: 0.013894954943731374,
                mean_correlation: vec![5e-324, 0.999_999_999_999_999_9],
                failed: vec![0, 0],
            },
        ],
    };
    let path = dir.path().join(table.file_name());
    write_dat(&table, &path).unwrap();
    assert_eq!(path.file_name().unwrap(), "corr_k5.dat");
    assert_eq!(read_dat(&path, 5).unwrap(), table);
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "# sigma2 beamforming pavbem");
    assert!(!dir.path().join("corr_k5.dat.tmp").exists());
}

#[test]
fn one_by_one_table_has_two_lines() {
    let dir = tempfile::tempdir().unwrap();
    let table = SweepTable {
        k: 1,
        algorithms: vec![Variant::Beamforming],
        rows: vec![SweepRow {
            noise_var: 0.5,
            mean_correlation: vec![0.25],
            failed: vec![0],
        }],
    };
    let path = dir.path().join("t.dat");
    write_dat(&table, &path).unwrap();
    assert_eq!(
        fs::read_to_string(&path).unwrap(),
        "# sigma2 beamforming\n0.5 0.25\n"
    );
}

#[test]
fn parallel_equals_serial() {
    let (d1, d4) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let serial = run_sweep(&small_config(d1.path(), 1)).unwrap();
    let parallel = run_sweep(&small_config(d4.path(), 4)).unwrap();
    assert_eq!(serial, parallel);
    for k in [1, 3] {
        let name = format!("corr_k{k}.dat");
        assert_eq!(
            fs::read(d1.path().join(&name)).unwrap(),
            fs::read(d4.path().join(&name)).unwrap()
        );
    }
    for table in &serial {
        assert_eq!(table.rows.len(), 2);
        for row in &table.rows {
            assert!(row.failed.iter().all(|&f| f == 0));
            assert!(row.mean_correlation.iter().all(|c| (0.0..=1.0).contains(c)));
        }
    }
}

#[test]
fn trials_are_index_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), 1);
    cfg.algorithms = vec![Variant::Beamforming];
    let dict = cfg.model.dictionary().unwrap();
    let spec = TrialSpec {
        k: 3,
        noise_var: 0.3,
        k_index: 1,
        noise_index: 1,
        trial_index: 4,
    };
    let a = run_trial(&cfg, &dict, spec).unwrap();
    let b = run_trial(&cfg, &dict, spec).unwrap();
    assert_eq!(a.seed, child_seed(17, 1, 1, 4));
    assert_eq!((a.support.clone(), a.outcomes.len()), (b.support, 1));
    assert_eq!(a.outcomes[0].correlation, b.outcomes[0].correlation);
    assert_ne!(child_seed(17, 1, 1, 4), child_seed(17, 1, 1, 5));
    assert_ne!(child_seed(17, 0, 1, 4), child_seed(17, 1, 0, 4));

    let out_of_range = TrialSpec {
        trial_index: 6,
        ..spec
    };
    assert!(run_trial(&cfg, &dict, out_of_range).is_err());
}

#[test]
fn unwritable_output_fails_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let mut cfg = small_config(&blocker.join("sub"), 1);
    cfg.n_trials = 1_000_000;
    let t = std::time::Instant::now();
    let err = run_sweep(&cfg).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err}");
    assert!(t.elapsed().as_secs() < 5);
}

#[test]
fn invalid_sweeps_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let base = small_config(dir.path(), 1);
    let bad = [
        SweepConfig {
            n_trials: 0,
            ..base.clone()
        },
        SweepConfig {
            noise_grid: vec![],
            ..base.clone()
        },
        SweepConfig {
            noise_grid: vec![0.0],
            ..base.clone()
        },
        SweepConfig {
            k_values: vec![13],
            ..base.clone()
        },
        SweepConfig {
            workers: 0,
            ..base.clone()
        },
    ];
    for cfg in bad {
        assert!(matches!(run_sweep(&cfg), Err(Error::Config(_))));
    }
}
