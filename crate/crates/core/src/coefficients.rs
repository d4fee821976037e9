//! Bernoulli-Gaussian factors `q(z_i) = q(x_i | s_i) q(s_i)` and the noise M-step.
//!
//! For `s_i = 1` the slab posterior is
//!
//! ```text
//! var_i  = sigma^2 sigma_x^2 / (sigma^2 + sigma_x^2 d_i^H d_i)
//! mean_i = sigma_x^2 / (sigma^2 + sigma_x^2 d_i^H d_i) * d_i^H <r_i>
//! <r_i>  = y_bar - sum_{k != i} q(s_k = 1) mean_k d_k
//! ```
//!
//! where `y_bar` is the observation de-rotated by the phase posterior and
//! shrunk by its circular-moment modulus.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{BernoulliGaussianPrior, SteeringDictionary};
use crate::phase::PhasePosterior;

/// Per-atom variational parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPosterior {
    /// `q(s_i = 1)`
    pub spike_prob: Vec<f64>,
    /// Slab mean `m_{x_i}(s_i = 1)`.
    pub cond_mean: Vec<Complex64>,
    /// Slab variance `Sigma_{x_i}(s_i = 1)`.
    pub cond_var: Vec<f64>,
}

impl CoefficientPosterior {
    pub fn len(&self) -> usize {
        self.spike_prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spike_prob.is_empty()
    }

    /// `<z_i> = q(s_i = 1) m_{x_i}(1)`.
    pub fn mean(&self, i: usize) -> Complex64 {
        self.cond_mean[i] * self.spike_prob[i]
    }

    pub fn means(&self) -> Vec<Complex64> {
        (0..self.len()).map(|i| self.mean(i)).collect()
    }
}

/// `y_bar_n = y_n exp(-j m_n) (I1/I0)(1 / var_n)`, i.e. `y_n * conj(<exp(j theta_n)>)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCorrectedObservation(pub Vec<Complex64>);

impl PhaseCorrectedObservation {
    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }
}

pub fn phase_corrected_observation(
    y: &[Complex64],
    phase: &PhasePosterior,
) -> Result<PhaseCorrectedObservation> {
    if y.len() != phase.len() {
        return Err(Error::dimension(format!(
            "y has length {} but the phase posterior covers {} sensors",
            y.len(),
            phase.len()
        )));
    }
    Ok(PhaseCorrectedObservation(
        y.iter()
            .zip(&phase.moments)
            .map(|(yn, mom)| yn * mom.conj())
            .collect(),
    ))
}

fn check_noise_var(noise_var: f64) -> Result<()> {
    if !(noise_var.is_finite() && noise_var > 0.0) {
        return Err(Error::invalid(format!(
            "noise variance must be finite and > 0, got {noise_var}"
        )));
    }
    Ok(())
}

/// Numerically safe logistic function.
fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Replaces entry `i` given its residual `<r_i>` (data minus every other atom).
pub(crate) fn update_from_residual(
    i: usize,
    residual: &[Complex64],
    post: &mut CoefficientPosterior,
    dict: &SteeringDictionary,
    prior: &BernoulliGaussianPrior,
    noise_var: f64,
) {
    let sx = prior.sigma_x_sq();
    let dd = dict.column_norm_sq(i);
    let gain = sx / (noise_var + sx * dd);
    let var1 = noise_var * gain;
    let mean1 = dict.column_dot(i, residual) * gain;

    let p = prior.occupancy()[i];
    let spike = if p <= 0.0 {
        0.0
    } else if p >= 1.0 {
        1.0
    } else {
        let log_odds = 0.5 * (var1 / sx).ln() + mean1.norm_sqr() / var1 + (p / (1.0 - p)).ln();
        logistic(log_odds)
    };

    post.spike_prob[i] = spike;
    post.cond_mean[i] = mean1;
    post.cond_var[i] = var1;
}

/// Updates atom `i`, recomputing `<r_i>` from scratch in `O(N M)`.
pub fn update_atom(
    i: usize,
    y_bar: &PhaseCorrectedObservation,
    post: &mut CoefficientPosterior,
    dict: &SteeringDictionary,
    prior: &BernoulliGaussianPrior,
    noise_var: f64,
) -> Result<()> {
    check_noise_var(noise_var)?;
    check_shapes(y_bar, post, dict, prior)?;
    if i >= post.len() {
        return Err(Error::invalid(format!(
            "atom index {i} out of range for {} atoms",
            post.len()
        )));
    }
    let mut residual = y_bar.0.clone();
    for k in (0..post.len()).filter(|&k| k != i) {
        let zk = post.mean(k);
        for (r, d) in residual.iter_mut().zip(dict.column(k)) {
            *r -= d * zk;
        }
    }
    update_from_residual(i, &residual, post, dict, prior, noise_var);
    Ok(())
}

/// One pass of `update_atom` over every atom in `order`, keeping the residual
/// `y_bar - D <z>` up to date in `O(N)` per atom.
pub fn sweep_atoms(
    y_bar: &PhaseCorrectedObservation,
    post: &mut CoefficientPosterior,
    dict: &SteeringDictionary,
    prior: &BernoulliGaussianPrior,
    noise_var: f64,
    order: &[usize],
) -> Result<()> {
    check_noise_var(noise_var)?;
    check_shapes(y_bar, post, dict, prior)?;
    let m = post.len();
    let mut seen = vec![false; m];
    if order.len() != m
        || !order
            .iter()
            .all(|&i| i < m && !std::mem::replace(&mut seen[i], true))
    {
        return Err(Error::invalid(format!(
            "update order must be a permutation of 0..{m}"
        )));
    }

    let mut residual = y_bar.0.clone();
    for k in 0..m {
        let zk = post.mean(k);
        if zk != Complex64::new(0.0, 0.0) {
            for (r, d) in residual.iter_mut().zip(dict.column(k)) {
                *r -= d * zk;
            }
        }
    }

    for &i in order {
        let old = post.mean(i);
        let col = dict.column(i);
        for (r, d) in residual.iter_mut().zip(col) {
            *r += d * old;
        }
        update_from_residual(i, &residual, post, dict, prior, noise_var);
        let new = post.mean(i);
        for (r, d) in residual.iter_mut().zip(col) {
            *r -= d * new;
        }
    }
    Ok(())
}

/// Closed-form M-step for the additive noise variance.
///
/// ```text
/// N sigma^2 = y^H y - 2 Re{ y_bar^H D <z> } + ||D <z>||^2 - sum_i |<z_i>|^2 d_i^H d_i
///           + sum_i q(s_i = 1) (var_i + |mean_i|^2) d_i^H d_i
/// ```
///
/// The result is not floored; see [`noise_floor`].
pub fn estimate_noise_variance(
    y: &[Complex64],
    y_bar: &PhaseCorrectedObservation,
    post: &CoefficientPosterior,
    dict: &SteeringDictionary,
) -> Result<f64> {
    dict.check_sensor_len("y", y.len())?;
    dict.check_sensor_len("y_bar", y_bar.0.len())?;
    dict.check_atom_len("posterior", post.len())?;

    let energy: f64 = y.iter().map(|v| v.norm_sqr()).sum();
    let means = post.means();
    let dz = dict.apply(&means);
    let cross: f64 = y_bar
        .0
        .iter()
        .zip(&dz)
        .map(|(yb, s)| (yb.conj() * s).re)
        .sum();
    let model_energy: f64 = dz.iter().map(|v| v.norm_sqr()).sum();

    let diag: f64 = means
        .iter()
        .enumerate()
        .map(|(i, zi)| {
            let second = post.spike_prob[i] * (post.cond_var[i] + post.cond_mean[i].norm_sqr());
            (second - zi.norm_sqr()) * dict.column_norm_sq(i)
        })
        .sum();

    Ok((energy - 2.0 * cross + model_energy + diag) / y.len() as f64)
}

/// Lower clamp `1e-8 * y^H y / N` applied to the noise M-step.
pub fn noise_floor(y: &[Complex64]) -> f64 {
    1e-8 * y.iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len().max(1) as f64
}

fn check_shapes(
    y_bar: &PhaseCorrectedObservation,
    post: &CoefficientPosterior,
    dict: &SteeringDictionary,
    prior: &BernoulliGaussianPrior,
) -> Result<()> {
    dict.check_sensor_len("y_bar", y_bar.0.len())?;
    dict.check_atom_len("posterior", post.len())?;
    dict.check_atom_len("prior occupancy", prior.n_atoms())?;
    if post.cond_mean.len() != post.len() || post.cond_var.len() != post.len() {
        return Err(Error::dimension("posterior vectors have unequal lengths"));
    }
    Ok(())
}
