//! Reference computations shared by the integration and acceptance tests.
//! None of these reuse library numerics.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// `I1(x) / I0(x)` from the power series of both functions.
pub fn series_ratio(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut i0, mut i1) = (0.0, 0.0);
    let mut t = 1.0;
    let mut k = 0.0;
    loop {
        i0 += t;
        i1 += t * (x / 2.0) / (k + 1.0);
        k += 1.0;
        t *= q / (k * k);
        if t < 1e-18 * i0 {
            break;
        }
    }
    i1 / i0
}

/// Dense information-form solve of the phase chain: precision `prior + diag(prec)`,
/// information vector `prec * values`. Returns (means, marginal variances).
pub fn dense_phase_posterior(
    a: f64,
    sigma_theta_sq: f64,
    sigma_1_sq: f64,
    values: &[f64],
    precisions: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = values.len();
    let mut p = DMatrix::<f64>::zeros(n, n);
    // accumulate the AR(1) factors directly: theta_1 ~ N(0, s1), theta_t | theta_{t-1} ~ N(a theta_{t-1}, q)
    p[(0, 0)] += 1.0 / sigma_1_sq;
    for t in 1..n {
        let w = 1.0 / sigma_theta_sq;
        p[(t, t)] += w;
        p[(t - 1, t - 1)] += a * a * w;
        p[(t, t - 1)] -= a * w;
        p[(t - 1, t)] -= a * w;
    }
    for t in 0..n {
        p[(t, t)] += precisions[t];
    }
    let h = DVector::from_iterator(n, values.iter().zip(precisions).map(|(v, w)| v * w));
    let chol = p
        .cholesky()
        .expect("posterior precision is positive definite");
    let mean = chol.solve(&h);
    let cov = chol.inverse();
    (
        mean.iter().copied().collect(),
        (0..n).map(|i| cov[(i, i)]).collect(),
    )
}

/// Adaptive Simpson quadrature.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
            + rec(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, whole, m, fm, tol, 50)
}

/// `E[exp(j theta)]` for `theta ~ N(mean, var)` by quadrature of the density.
pub fn gaussian_moment_quadrature(mean: f64, var: f64) -> Complex64 {
    let sd = var.sqrt();
    let pdf = |t: f64| {
        (-(t - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    };
    let (lo, hi) = (mean - 14.0 * sd, mean + 14.0 * sd);
    let re = integrate(&|t| pdf(t) * t.cos(), lo, hi, 1e-13);
    let im = integrate(&|t| pdf(t) * t.sin(), lo, hi, 1e-13);
    Complex64::new(re, im)
}

/// Von Mises draw (Best and Fisher, 1979).
pub fn sample_von_mises<R: Rng + ?Sized>(mu: f64, kappa: f64, rng: &mut R) -> f64 {
    use std::f64::consts::PI;
    if kappa < 1e-8 {
        return mu + rng.random_range(-PI..PI);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        let u2: f64 = rng.random();
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.random();
            let sign = if u3 > 0.5 { 1.0 } else { -1.0 };
            return mu + sign * f.acos();
        }
    }
}

pub fn complex_normal<R: Rng + ?Sized>(var: f64, rng: &mut R) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Norm-wise relative error `max|a - b| / max|b|`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

/// Monte Carlo estimate of `(1/N) E ||y - P D z||^2` with `theta_n` drawn from a
/// von Mises of concentration `1 / var_n` and `z_i = s_i x_i` from the
/// Bernoulli-Gaussian factors. `columns[i]` is the steering vector of atom `i`.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_noise_variance<R: Rng + ?Sized>(
    y: &[Complex64],
    columns: &[Vec<Complex64>],
    spike_prob: &[f64],
    cond_mean: &[Complex64],
    cond_var: &[f64],
    phase_means: &[f64],
    phase_vars: &[f64],
    samples: usize,
    rng: &mut R,
) -> f64 {
    let n = y.len();
    let mut total = 0.0;
    let mut z = vec![Complex64::new(0.0, 0.0); columns.len()];
    for _ in 0..samples {
        for i in 0..columns.len() {
            z[i] = if rng.random::<f64>() < spike_prob[i] {
                cond_mean[i] + complex_normal(cond_var[i], rng)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        let mut err = 0.0;
        for t in 0..n {
            let theta = sample_von_mises(phase_means[t], 1.0 / phase_vars[t], rng);
            let dz: Complex64 = columns.iter().zip(&z).map(|(c, zi)| c[t] * zi).sum();
            err += (y[t] - Complex64::from_polar(1.0, theta) * dz).norm_sqr();
        }
        total += err / n as f64;
    }
    total / samples as f64
}

/// Every float of an estimate as raw bits, for bitwise comparisons.
pub fn estimate_bits(est: &pavbem::estimators::DoaEstimate) -> Vec<u64> {
    est.z_hat
        .iter()
        .flat_map(|z| [z.re, z.im])
        .chain(est.spike_probs.iter().copied())
        .chain(est.phase_means.iter().copied())
        .chain(est.phase_variances.iter().copied())
        .chain([est.final_noise_var, est.iterations_used as f64])
        .map(f64::to_bits)
        .collect()
}

/// Runs both variant-collapse identities on the instance drawn from `seed`:
/// (pavbem with p = 1 vs pavbem_relaxed, relaxed loop with a flat phase prior vs prvbem).
pub fn variant_collapse(seed: u64) -> (bool, bool) {
    use pavbem::estimators::{
        estimate, pavbem_relaxed, prvbem_baseline, EstimatorConfig, PhasePrior, Variant, Vbem,
    };
    use pavbem::harness::{draw_problem, ModelSetup};
    use pavbem::model::{BernoulliGaussianPrior, PhaseMarkovModel};
    use rand::SeedableRng;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let model = ModelSetup {
        n_sensors: rng.random_range(8..64),
        grid_size: rng.random_range(4..24),
        spacing_ratio: rng.random_range(0.5..4.0),
        phase: PhaseMarkovModel::new(
            rng.random_range(0.0..0.99),
            rng.random_range(0.05..2.0),
            1e6,
        )
        .unwrap(),
        sigma_x_sq: rng.random_range(0.5..2.0),
        phase_noise: true,
    };
    let dict = model.dictionary().unwrap();
    let k = rng.random_range(1..=3.min(model.grid_size));
    let noise_var = 10f64.powf(rng.random_range(-3.0..0.0));
    let (_, obs) = draw_problem(&model, &dict, k, noise_var, rng.random()).unwrap();
    let cfg = EstimatorConfig {
        max_iterations: 40,
        initial_noise_var: noise_var,
        ..Default::default()
    };

    let ones = BernoulliGaussianPrior::uniform(model.grid_size, 1.0, model.sigma_x_sq).unwrap();
    let full = estimate(
        &obs.y,
        &dict,
        &model.phase,
        &ones,
        &EstimatorConfig {
            variant: Variant::Pavbem,
            ..cfg.clone()
        },
    )
    .unwrap();
    let relaxed = pavbem_relaxed(&obs.y, &dict, &model.phase, model.sigma_x_sq, &cfg).unwrap();

    let flat = Vbem::new(&obs.y, &dict, PhasePrior::NonInformative, &ones, &cfg)
        .unwrap()
        .run()
        .unwrap();
    let baseline = prvbem_baseline(&obs.y, &dict, model.sigma_x_sq, &cfg).unwrap();

    (
        estimate_bits(&full) == estimate_bits(&relaxed),
        estimate_bits(&flat) == estimate_bits(&baseline),
    )
}
