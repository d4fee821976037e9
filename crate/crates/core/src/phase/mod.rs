//! Variational factor of the phase noise.
//!
//! Given the current source means `<z>`, each sensor contributes a Von Mises
//! factor `exp((2|eta_n| / sigma^2) cos(theta_n - arg eta_n))` with
//! `eta_n = y_n conj((D <z>)_n)`. Matching that factor to a Gaussian turns the
//! phase posterior into a Gauss-Markov chain with pseudo-observations
//! `arg eta_n` of precision `2|eta_n| / sigma^2`, which a Kalman smoother
//! resolves in `O(N)`. The source updates then only need the circular moments
//! `<exp(j theta_n)> = (I1/I0)(1/var_n) exp(j m_n)`.

mod bessel;
mod smoother;

use num_complex::Complex64;

pub use bessel::bessel_ratio;
pub(crate) use bessel::ratio as bessel_ratio_unchecked;
pub use smoother::{prior_precision, smooth, PhasePrecision};

use crate::error::{Error, Result};
use crate::model::{PhaseMarkovModel, SteeringDictionary};

/// `eta_n = y_n * sum_i conj(<z_i>) conj(d_ni)`.
pub fn compute_eta(
    y: &[Complex64],
    dict: &SteeringDictionary,
    z_means: &[Complex64],
) -> Result<Vec<Complex64>> {
    dict.check_sensor_len("y", y.len())?;
    dict.check_atom_len("z_means", z_means.len())?;
    let dz = dict.apply(z_means);
    Ok(y.iter().zip(&dz).map(|(yn, s)| yn * s.conj()).collect())
}

/// Gaussian stand-ins for the per-sensor Von Mises likelihood factors.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObservations {
    /// `arg(eta_n)` in `(-pi, pi]`; 0 where `eta_n = 0`.
    pub values: Vec<f64>,
    /// `2 |eta_n| / sigma^2`; zero marks an uninformative sensor.
    pub precisions: Vec<f64>,
}

impl PseudoObservations {
    pub fn from_eta(eta: &[Complex64], noise_var: f64) -> Result<Self> {
        if !(noise_var.is_finite() && noise_var > 0.0) {
            return Err(Error::invalid(format!(
                "noise variance must be finite and > 0, got {noise_var}"
            )));
        }
        let mut values = Vec::with_capacity(eta.len());
        let mut precisions = Vec::with_capacity(eta.len());
        for e in eta {
            let mag = e.norm();
            if mag > 0.0 {
                values.push(e.arg());
                precisions.push(2.0 * mag / noise_var);
            } else {
                values.push(0.0);
                precisions.push(0.0);
            }
        }
        Ok(Self { values, precisions })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Gaussian marginals `q(theta_n) = N(m_n, var_n)` and their circular moments.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePosterior {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub moments: Vec<Complex64>,
}

impl PhasePosterior {
    /// Builds the posterior from means and variances. A variance of `+inf`
    /// (no information at all) yields a zero moment.
    pub fn new(means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if means.len() != variances.len() {
            return Err(Error::dimension(format!(
                "{} phase means but {} variances",
                means.len(),
                variances.len()
            )));
        }
        let moments = means
            .iter()
            .zip(&variances)
            .map(|(&m, &v)| circular_moment_unchecked(m, v))
            .collect::<Result<_>>()?;
        Ok(Self {
            means,
            variances,
            moments,
        })
    }

    /// Prior marginals with zero means; the state before any data is seen.
    pub fn prior(model: &PhaseMarkovModel, n: usize) -> Result<Self> {
        Self::new(vec![0.0; n], model.prior_marginal_variances(n))
    }

    /// Markov-prior posterior: Kalman smoothing of the pseudo-observations.
    pub fn smoothed(pseudo: &PseudoObservations, model: &PhaseMarkovModel) -> Result<Self> {
        let (means, variances) = smooth(pseudo, model)?;
        Self::new(means, variances)
    }

    /// Flat (non-informative) prior: every sensor stands alone, so the
    /// posterior is the pseudo-observation itself.
    pub fn uninformed(pseudo: &PseudoObservations) -> Result<Self> {
        let variances = pseudo
            .precisions
            .iter()
            .map(|&p| if p > 0.0 { 1.0 / p } else { f64::INFINITY })
            .collect();
        Self::new(pseudo.values.clone(), variances)
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

/// `<exp(j theta)>` for `theta ~ N(mean, variance)` under the Von Mises
/// matching `kappa = 1 / variance`.
pub fn circular_moment(mean: f64, variance: f64) -> Result<Complex64> {
    if variance.is_nan() || variance <= 0.0 || variance.is_infinite() {
        return Err(Error::invalid(format!(
            "circular moment needs a finite variance > 0, got {variance}"
        )));
    }
    circular_moment_unchecked(mean, variance)
}

fn circular_moment_unchecked(mean: f64, variance: f64) -> Result<Complex64> {
    if variance.is_nan() || variance <= 0.0 || !mean.is_finite() {
        return Err(Error::invalid(format!(
            "phase marginal (mean {mean}, variance {variance}) is not usable"
        )));
    }
    let rho = bessel_ratio_unchecked(1.0 / variance);
    Ok(Complex64::from_polar(rho, mean))
}
