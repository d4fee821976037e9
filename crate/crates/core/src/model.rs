//! Generative model: uniform-linear-array steering dictionary, Bernoulli-Gaussian
//! sources, and a Gauss-Markov (AR(1)) phase-noise chain along the array.
//!
//! ```text
//! y = P D z + w,    P = diag(exp(j theta_n)),   D[n, i] = exp(j 2 pi (Delta/lambda) n sin(phi_i))
//! theta_1 ~ N(0, sigma_1^2),   theta_n | theta_{n-1} ~ N(a theta_{n-1}, sigma_theta^2)
//! z_i = x_i s_i,   x_i ~ CN(0, sigma_x^2),   s_i ~ Ber(p_i)
//! ```
//!
//! Sensor indices run `1..=N` in the steering exponent.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

/// Complex `N x M` matrix of steering vectors, one column per candidate angle.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringDictionary {
    n_sensors: usize,
    spacing_ratio: f64,
    angles: Vec<f64>,
    // column-major, `columns[i * n_sensors + n]`
    columns: Vec<Complex64>,
    column_norms_sq: Vec<f64>,
}

impl SteeringDictionary {
    pub fn new(n_sensors: usize, spacing_ratio: f64, angles: &[f64]) -> Result<Self> {
        if n_sensors == 0 {
            return Err(Error::invalid("n_sensors must be at least 1"));
        }
        if angles.is_empty() {
            return Err(Error::invalid("angle grid is empty"));
        }
        if !spacing_ratio.is_finite() {
            return Err(Error::invalid(format!(
                "spacing_ratio must be finite, got {spacing_ratio}"
            )));
        }
        if let Some(bad) = angles
            .iter()
            .find(|phi| !phi.is_finite() || phi.abs() > FRAC_PI_2 + 1e-12)
        {
            return Err(Error::invalid(format!("angle {bad} outside [-pi/2, pi/2]")));
        }

        let mut columns = Vec::with_capacity(n_sensors * angles.len());
        let mut column_norms_sq = Vec::with_capacity(angles.len());
        for &phi in angles {
            let step = 2.0 * PI * spacing_ratio * phi.sin();
            let start = columns.len();
            columns.extend((1..=n_sensors).map(|n| Complex64::cis(step * n as f64)));
            column_norms_sq.push(columns[start..].iter().map(|d| d.norm_sqr()).sum());
        }

        Ok(Self {
            n_sensors,
            spacing_ratio,
            angles: angles.to_vec(),
            columns,
            column_norms_sq,
        })
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn n_atoms(&self) -> usize {
        self.angles.len()
    }

    pub fn spacing_ratio(&self) -> f64 {
        self.spacing_ratio
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn column(&self, i: usize) -> &[Complex64] {
        &self.columns[i * self.n_sensors..(i + 1) * self.n_sensors]
    }

    pub fn entry(&self, n: usize, i: usize) -> Complex64 {
        self.columns[i * self.n_sensors + n]
    }

    /// `d_i^H d_i`, summed once at construction.
    pub fn column_norm_sq(&self, i: usize) -> f64 {
        self.column_norms_sq[i]
    }

    /// `d_i^H v`.
    pub fn column_dot(&self, i: usize, v: &[Complex64]) -> Complex64 {
        self.column(i)
            .iter()
            .zip(v)
            .map(|(d, x)| d.conj() * x)
            .sum()
    }

    /// `D z`.
    pub fn apply(&self, z: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_sensors];
        for (i, &zi) in z.iter().enumerate() {
            if zi == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, d) in out.iter_mut().zip(self.column(i)) {
                *o += d * zi;
            }
        }
        out
    }

    /// `D^H y`.
    pub fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        (0..self.n_atoms()).map(|i| self.column_dot(i, y)).collect()
    }

    pub(crate) fn check_sensor_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.n_sensors {
            return Err(Error::dimension(format!(
                "{what} has length {len}, dictionary has {} sensors",
                self.n_sensors
            )));
        }
        Ok(())
    }

    pub(crate) fn check_atom_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.n_atoms() {
            return Err(Error::dimension(format!(
                "{what} has length {len}, dictionary has {} atoms",
                self.n_atoms()
            )));
        }
        Ok(())
    }
}

pub fn build_dictionary(
    n_sensors: usize,
    spacing_ratio: f64,
    angles: &[f64],
) -> Result<SteeringDictionary> {
    SteeringDictionary::new(n_sensors, spacing_ratio, angles)
}

/// `phi_i = -pi/2 + i pi / m` for `i = 1..=m`, so the grid covers `(-pi/2, pi/2]`.
pub fn default_angle_grid(m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::invalid("angle grid size must be at least 1"));
    }
    let step = PI / m as f64;
    Ok((1..=m).map(|i| -FRAC_PI_2 + i as f64 * step).collect())
}

/// Parameters of the AR(1) phase chain along the array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMarkovModel {
    a: f64,
    sigma_theta_sq: f64,
    sigma_1_sq: f64,
}

impl PhaseMarkovModel {
    pub fn new(a: f64, sigma_theta_sq: f64, sigma_1_sq: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::invalid(format!(
                "a must be finite and >= 0, got {a}"
            )));
        }
        if !(sigma_theta_sq.is_finite() && sigma_theta_sq > 0.0) {
            return Err(Error::invalid(format!(
                "sigma_theta_sq must be finite and > 0, got {sigma_theta_sq}"
            )));
        }
        if !(sigma_1_sq.is_finite() && sigma_1_sq > 0.0) {
            return Err(Error::invalid(format!(
                "sigma_1_sq must be finite and > 0, got {sigma_1_sq}"
            )));
        }
        Ok(Self {
            a,
            sigma_theta_sq,
            sigma_1_sq,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn sigma_theta_sq(&self) -> f64 {
        self.sigma_theta_sq
    }

    pub fn sigma_1_sq(&self) -> f64 {
        self.sigma_1_sq
    }

    /// Prior marginal variances `var(theta_n)`: `sigma_1^2`, then `a^2 v + sigma_theta^2`.
    pub fn prior_marginal_variances(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut v = self.sigma_1_sq;
        for _ in 0..n {
            out.push(v);
            v = self.a * self.a * v + self.sigma_theta_sq;
        }
        out
    }

    /// Draws `theta_1..theta_n`. Phases are not wrapped.
    pub fn sample_trajectory<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return out;
        }
        let z: f64 = StandardNormal.sample(rng);
        let mut theta = self.sigma_1_sq.sqrt() * z;
        out.push(theta);
        let step_sd = self.sigma_theta_sq.sqrt();
        for _ in 1..n {
            let w: f64 = StandardNormal.sample(rng);
            theta = self.a * theta + step_sd * w;
            out.push(theta);
        }
        out
    }
}

pub fn sample_phase_trajectory<R: Rng + ?Sized>(
    model: &PhaseMarkovModel,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("phase trajectory length must be at least 1"));
    }
    Ok(model.sample_trajectory(n, rng))
}

/// Spike-and-slab prior: `z_i = x_i s_i`, `x_i ~ CN(0, sigma_x^2)`, `s_i ~ Ber(p_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliGaussianPrior {
    sigma_x_sq: f64,
    occupancy: Vec<f64>,
}

impl BernoulliGaussianPrior {
    pub fn new(sigma_x_sq: f64, occupancy: Vec<f64>) -> Result<Self> {
        if !(sigma_x_sq.is_finite() && sigma_x_sq > 0.0) {
            return Err(Error::invalid(format!(
                "sigma_x_sq must be finite and > 0, got {sigma_x_sq}"
            )));
        }
        if let Some(p) = occupancy.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("occupancy {p} outside [0, 1]")));
        }
        Ok(Self {
            sigma_x_sq,
            occupancy,
        })
    }

    /// Same occupancy `p` for all `m` atoms.
    pub fn uniform(m: usize, p: f64, sigma_x_sq: f64) -> Result<Self> {
        Self::new(sigma_x_sq, vec![p; m])
    }

    /// Gaussian (non-sparse) prior: every atom always on.
    pub fn dense(m: usize, sigma_x_sq: f64) -> Result<Self> {
        Self::uniform(m, 1.0, sigma_x_sq)
    }

    pub fn sigma_x_sq(&self) -> f64 {
        self.sigma_x_sq
    }

    pub fn occupancy(&self) -> &[f64] {
        &self.occupancy
    }

    pub fn n_atoms(&self) -> usize {
        self.occupancy.len()
    }
}

/// One synthetic draw of the unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub z: Vec<Complex64>,
    /// Sorted atom indices of the nonzero entries of `z`.
    pub support: Vec<usize>,
    pub theta: Vec<f64>,
}

impl GroundTruth {
    pub fn k(&self) -> usize {
        self.support.len()
    }
}

/// Draws `k` active atoms uniformly without replacement with `CN(0, sigma_x^2)`
/// amplitudes. `theta` is drawn from `phase` when given, otherwise all zeros.
pub fn sample_ground_truth<R: Rng + ?Sized>(
    prior: &BernoulliGaussianPrior,
    k: usize,
    n_sensors: usize,
    phase: Option<&PhaseMarkovModel>,
    rng: &mut R,
) -> Result<GroundTruth> {
    let m = prior.n_atoms();
    if k > m {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the number of atoms {m}"
        )));
    }
    let mut support = rand::seq::index::sample(rng, m, k).into_vec();
    support.sort_unstable();

    let amp = Normal::new(0.0, (prior.sigma_x_sq() / 2.0).sqrt())
        .map_err(|e| Error::invalid(e.to_string()))?;
    let mut z = vec![Complex64::new(0.0, 0.0); m];
    for &i in &support {
        z[i] = Complex64::new(amp.sample(rng), amp.sample(rng));
    }

    let theta = match phase {
        Some(model) => model.sample_trajectory(n_sensors, rng),
        None => vec![0.0; n_sensors],
    };
    Ok(GroundTruth { z, support, theta })
}

/// Received snapshot across the array.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: Vec<Complex64>,
}

/// `y_n = exp(j theta_n) (D z)_n + w_n` with `w_n ~ CN(0, noise_var)`.
pub fn synthesize_observation<R: Rng + ?Sized>(
    dict: &SteeringDictionary,
    truth: &GroundTruth,
    noise_var: f64,
    rng: &mut R,
) -> Result<Observation> {
    dict.check_atom_len("z", truth.z.len())?;
    dict.check_sensor_len("theta", truth.theta.len())?;
    if !(noise_var.is_finite() && noise_var >= 0.0) {
        return Err(Error::invalid(format!(
            "noise variance must be finite and >= 0, got {noise_var}"
        )));
    }

    let clean = dict.apply(&truth.z);
    let sd = (noise_var / 2.0).sqrt();
    let y = clean
        .iter()
        .zip(&truth.theta)
        .map(|(dz, &theta)| {
            let mut v = Complex64::cis(theta) * dz;
            if noise_var > 0.0 {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                v += Complex64::new(sd * re, sd * im);
            }
            v
        })
        .collect();
    Ok(Observation { y })
}
