//! Draws one array snapshot with phase noise and runs the four estimators on it.
//!
//! `cargo run --release --example compare_estimators -- [seed] [k] [noise_var]`

use pavbem::estimators::{estimate, extract_support, EstimatorConfig, Variant};
use pavbem::harness::{child_seed, draw_problem, normalized_correlation, ModelSetup};
use pavbem::model::{BernoulliGaussianPrior, PhaseMarkovModel};

fn main() -> pavbem::error::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed: u64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(1);
    let k: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let noise_var: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-2);

    let model = ModelSetup {
        n_sensors: 256,
        grid_size: 50,
        spacing_ratio: 4.0,
        phase: PhaseMarkovModel::new(0.8, 1.0, 1e6)?,
        sigma_x_sq: 1.0,
        phase_noise: true,
    };
    let dict = model.dictionary()?;
    let (truth, obs) = draw_problem(&model, &dict, k, noise_var, child_seed(seed, 0, 0, 0))?;
    let prior = BernoulliGaussianPrior::uniform(50, k as f64 / 50.0, 1.0)?;
    let deg = |idx: &[usize]| -> Vec<String> {
        idx.iter()
            .map(|&i| format!("{:.1}", dict.angles()[i].to_degrees()))
            .collect()
    };
    println!("true angles (deg): {}", deg(&truth.support).join(" "));

    for variant in Variant::ALL {
        let cfg = EstimatorConfig {
            variant,
            initial_noise_var: noise_var,
            ..Default::default()
        };
        let t = std::time::Instant::now();
        let est = estimate(&obs.y, &dict, &model.phase, &prior, &cfg)?;
        let mut support = extract_support(&est, &dict, k)?.indices;
        support.sort_unstable();
        println!(
            "{:<15} corr {:.4}  iters {:3}  {:>8.1?}  top-{k}: {}",
            variant.name(),
            normalized_correlation(&truth.z, &est.z_hat),
            est.iterations_used,
            t.elapsed(),
            deg(&support).join(" ")
        );
    }
    Ok(())
}
