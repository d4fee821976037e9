//! Recovers an AR(1) phase trajectory from noisy wrapped measurements with the
//! Kalman/RTS smoother, and compares it with the raw per-sensor phases.

use num_complex::Complex64;
use pavbem::model::PhaseMarkovModel;
use pavbem::phase::{PhasePosterior, PseudoObservations};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> pavbem::error::Result<()> {
    let n = 256;
    let model = PhaseMarkovModel::new(0.8, 0.05, 0.05)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let theta = model.sample_trajectory(n, &mut rng);

    // eta_n = |s_n|^2 exp(j theta_n) + noise, as if <z> were exact
    let noise_var = 0.5;
    let w = Normal::new(0.0, (noise_var / 2.0_f64).sqrt()).unwrap();
    let eta: Vec<Complex64> = theta
        .iter()
        .map(|t| {
            Complex64::from_polar(1.0, *t) + Complex64::new(w.sample(&mut rng), w.sample(&mut rng))
        })
        .collect();

    let pseudo = PseudoObservations::from_eta(&eta, noise_var)?;
    let raw = PhasePosterior::uninformed(&pseudo)?;
    let smoothed = PhasePosterior::smoothed(&pseudo, &model)?;

    let rmse = |est: &[f64]| {
        (est.iter()
            .zip(&theta)
            .map(|(e, t)| (e - t).powi(2))
            .sum::<f64>()
            / n as f64)
            .sqrt()
    };
    println!("raw phase rmse      {:.4}", rmse(&raw.means));
    println!("smoothed phase rmse {:.4}", rmse(&smoothed.means));
    println!(
        "mean posterior variance {:.4}",
        smoothed.variances.iter().sum::<f64>() / n as f64
    );
    println!("n  theta  raw  smoothed  sd");
    for i in (0..n).step_by(32) {
        println!(
            "{i:3} {:+.3} {:+.3} {:+.3} {:.3}",
            theta[i],
            raw.means[i],
            smoothed.means[i],
            smoothed.variances[i].sqrt()
        );
    }
    Ok(())
}
