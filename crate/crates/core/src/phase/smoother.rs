use crate::error::{Error, Result};
use crate::model::PhaseMarkovModel;

use super::PseudoObservations;

/// Symmetric tridiagonal precision matrix of the phase chain prior.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePrecision {
    pub diagonal: Vec<f64>,
    pub off_diagonal: Vec<f64>,
}

impl PhasePrecision {
    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }
}

/// Inverse covariance of `(theta_1, ..., theta_n)` under the AR(1) prior.
pub fn prior_precision(model: &PhaseMarkovModel, n: usize) -> Result<PhasePrecision> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "phase chain precision needs n >= 2, got {n}"
        )));
    }
    let a = model.a();
    let q = model.sigma_theta_sq();
    let mut diagonal = vec![(1.0 + a * a) / q; n];
    diagonal[0] = 1.0 / model.sigma_1_sq() + a * a / q;
    diagonal[n - 1] = 1.0 / q;
    Ok(PhasePrecision {
        diagonal,
        off_diagonal: vec![-a / q; n - 1],
    })
}

/// Posterior means and marginal variances of the phase chain given Gaussian
/// pseudo-observations, via a forward Kalman filter and an RTS backward pass.
///
/// Sensors with zero precision are treated as missing.
pub fn smooth(
    pseudo: &PseudoObservations,
    model: &PhaseMarkovModel,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = pseudo.len();
    if n == 0 {
        return Err(Error::invalid("no pseudo-observations to smooth"));
    }
    if let Some((v, p)) = pseudo
        .values
        .iter()
        .zip(&pseudo.precisions)
        .find(|(v, p)| !v.is_finite() || !p.is_finite() || **p < 0.0)
    {
        return Err(Error::invalid(format!(
            "pseudo-observation (value {v}, precision {p}) is not usable"
        )));
    }

    let a = model.a();
    let q = model.sigma_theta_sq();

    let mut pred_mean = vec![0.0; n];
    let mut pred_var = vec![0.0; n];
    let mut filt_mean = vec![0.0; n];
    let mut filt_var = vec![0.0; n];

    let (mut m, mut p) = (0.0, model.sigma_1_sq());
    for t in 0..n {
        pred_mean[t] = m;
        pred_var[t] = p;
        let prec = pseudo.precisions[t];
        if prec > 0.0 {
            let gain = p * prec / (1.0 + p * prec);
            m += gain * (pseudo.values[t] - m);
            p /= 1.0 + p * prec;
        }
        filt_mean[t] = m;
        filt_var[t] = p;
        m *= a;
        p = a * a * p + q;
    }

    let mut means = filt_mean.clone();
    let mut vars = filt_var.clone();
    for t in (0..n - 1).rev() {
        let j = a * filt_var[t] / pred_var[t + 1];
        means[t] = filt_mean[t] + j * (means[t + 1] - pred_mean[t + 1]);
        vars[t] = filt_var[t] + j * j * (vars[t + 1] - pred_var[t + 1]);
    }
    Ok((means, vars))
}
