//! Drives the variational loop one outer iteration at a time and prints the
//! noise-variance estimate, total occupancy, and the phase coherence |mean exp(j(m - theta))| after each step.

use num_complex::Complex64;
use pavbem::estimators::{EstimatorConfig, PhasePrior, Vbem};
use pavbem::harness::{draw_problem, ModelSetup};
use pavbem::model::{BernoulliGaussianPrior, PhaseMarkovModel};

fn main() -> pavbem::error::Result<()> {
    let model = ModelSetup {
        n_sensors: 256,
        grid_size: 50,
        spacing_ratio: 4.0,
        phase: PhaseMarkovModel::new(0.8, 1.0, 1e6)?,
        sigma_x_sq: 1.0,
        phase_noise: true,
    };
    let dict = model.dictionary()?;
    let noise_var = 1e-2;
    let (truth, obs) = draw_problem(&model, &dict, 2, noise_var, 42)?;
    let prior = BernoulliGaussianPrior::uniform(50, 2.0 / 50.0, 1.0)?;
    let cfg = EstimatorConfig {
        initial_noise_var: 0.1,
        ..Default::default()
    };

    let mut vbem = Vbem::new(&obs.y, &dict, PhasePrior::Markov(model.phase), &prior, &cfg)?;
    println!("iter  noise_var  occupancy  max_change  phase_coherence");
    for _ in 0..30 {
        let change = vbem.step()?;
        let phase = vbem.phase();
        let coherence = phase
            .means
            .iter()
            .zip(&truth.theta)
            .map(|(m, t)| Complex64::from_polar(1.0, m - t))
            .sum::<Complex64>()
            .norm()
            / 256.0;
        let occ: f64 = vbem.coefficients().spike_prob.iter().sum();
        println!(
            "{:4}  {:.3e}  {occ:9.3}  {change:.3e}  {coherence:.4}",
            vbem.iterations(),
            vbem.noise_var()
        );
    }
    println!(
        "true support {:?}, true noise variance {noise_var}",
        truth.support
    );
    Ok(())
}
