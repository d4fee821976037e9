//! A reduced Monte Carlo sweep over the noise variance, written as .dat tables.
//!
//! `cargo run --release --example noise_sweep -- [output_dir] [trials]`

use pavbem::estimators::{EstimatorConfig, Variant};
use pavbem::harness::{log_grid, run_sweep_with, ModelSetup, SweepConfig};
use pavbem::model::PhaseMarkovModel;

fn main() -> pavbem::error::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let output_dir = args
        .first()
        .cloned()
        .unwrap_or_else(|| "sweep-example".into());
    let n_trials = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10);

    let config = SweepConfig {
        model: ModelSetup {
            n_sensors: 256,
            grid_size: 50,
            spacing_ratio: 4.0,
            phase: PhaseMarkovModel::new(0.8, 1.0, 1e6)?,
            sigma_x_sq: 1.0,
            phase_noise: true,
        },
        k_values: vec![2, 5],
        noise_grid: log_grid(1e-3, 1.0, 4)?,
        n_trials,
        algorithms: Variant::ALL.to_vec(),
        base_seed: 0,
        output_dir: output_dir.into(),
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        estimator: EstimatorConfig::default(),
        initial_noise_var: None,
        occupancy: None,
    };
    let tables = run_sweep_with(&config, |table, row| {
        let cells: Vec<String> = row
            .mean_correlation
            .iter()
            .map(|c| format!("{c:.3}"))
            .collect();
        println!(
            "K={} sigma2={:.0e}: {}",
            table.k,
            row.noise_var,
            cells.join(" ")
        );
    })?;
    for t in &tables {
        println!("wrote {}", config.output_dir.join(t.file_name()).display());
    }
    Ok(())
}
