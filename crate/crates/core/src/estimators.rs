//! Front-end estimators.
//!
//! The three variational estimators share one loop and differ only in their priors:
//!
//! | variant          | phase prior   | source prior       |
//! |------------------|---------------|--------------------|
//! | `pavbem`         | AR(1) chain   | Bernoulli-Gaussian |
//! | `pavbem_relaxed` | AR(1) chain   | Gaussian (`p = 1`) |
//! | `prvbem`         | flat          | Gaussian (`p = 1`) |
//!
//! Conventional beamforming is the matched filter `D^H y / N`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coefficients::{
    estimate_noise_variance, noise_floor, phase_corrected_observation, sweep_atoms,
    CoefficientPosterior,
};
use crate::error::{Error, Result};
use crate::model::{BernoulliGaussianPrior, PhaseMarkovModel, SteeringDictionary};
use crate::phase::{compute_eta, PhasePosterior, PseudoObservations};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Beamforming,
    Prvbem,
    PavbemRelaxed,
    Pavbem,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Beamforming,
        Variant::Prvbem,
        Variant::PavbemRelaxed,
        Variant::Pavbem,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Beamforming => "beamforming",
            Variant::Prvbem => "prvbem",
            Variant::PavbemRelaxed => "pavbem_relaxed",
            Variant::Pavbem => "pavbem",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown variant `{s}` (expected one of beamforming, prvbem, pavbem_relaxed, pavbem)"
                ))
            })
    }
}

/// Order in which the atoms are visited within one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    /// Descending `|<z_i>|`, ties by index; recomputed every sweep.
    #[default]
    Energy,
    Index,
}

impl FromStr for SweepOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy" => Ok(SweepOrder::Energy),
            "index" => Ok(SweepOrder::Index),
            _ => Err(Error::Config(format!(
                "unknown order `{s}` (expected energy or index)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub variant: Variant,
    pub max_iterations: usize,
    /// Stop once the max-norm change of `<z>` over one outer iteration drops below this.
    pub convergence_tol: f64,
    pub estimate_noise: bool,
    pub initial_noise_var: f64,
    pub order: SweepOrder,
    /// Keep a per-iteration trace in the returned estimate.
    pub trace: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Pavbem,
            max_iterations: 200,
            convergence_tol: 1e-6,
            estimate_noise: true,
            initial_noise_var: 1e-2,
            order: SweepOrder::Energy,
            trace: false,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return Err(Error::Config(format!(
                "convergence_tol must be > 0, got {}",
                self.convergence_tol
            )));
        }
        if !(self.initial_noise_var.is_finite() && self.initial_noise_var > 0.0) {
            return Err(Error::Config(format!(
                "initial_noise_var must be > 0, got {}",
                self.initial_noise_var
            )));
        }
        Ok(())
    }
}

/// Prior placed on the phase noise by a variational estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhasePrior {
    Markov(PhaseMarkovModel),
    /// Flat prior: the chain precision is dropped entirely.
    NonInformative,
}

/// One outer iteration, recorded when [`EstimatorConfig::trace`] is set.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub iteration: usize,
    pub noise_var: f64,
    pub total_occupancy: f64,
    pub max_change: f64,
    pub phase_means: Vec<f64>,
    pub phase_variances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoaEstimate {
    /// Component-wise posterior mean of the sources.
    pub z_hat: Vec<Complex64>,
    pub spike_probs: Vec<f64>,
    pub phase_means: Vec<f64>,
    pub phase_variances: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    /// Noise variance in force at exit; `NaN` for beamforming, which does not model it.
    pub final_noise_var: f64,
    pub trace: Vec<IterationTrace>,
}

impl DoaEstimate {
    pub fn is_finite(&self) -> bool {
        self.z_hat
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// State of the variational loop between outer iterations.
#[derive(Debug, Clone)]
pub struct Vbem<'a> {
    y: &'a [Complex64],
    dict: &'a SteeringDictionary,
    phase_prior: PhasePrior,
    prior: BernoulliGaussianPrior,
    config: EstimatorConfig,
    noise_var: f64,
    floor: f64,
    coeffs: CoefficientPosterior,
    phase: PhasePosterior,
    iterations: usize,
    trace: Vec<IterationTrace>,
}

impl<'a> Vbem<'a> {
    /// Warm start: phase at its prior, sources from one beamforming pass
    /// (`q(s_i = 1) = p_i`, slab mean `d_i^H y / N`).
    pub fn new(
        y: &'a [Complex64],
        dict: &'a SteeringDictionary,
        phase_prior: PhasePrior,
        prior: &BernoulliGaussianPrior,
        config: &EstimatorConfig,
    ) -> Result<Self> {
        config.validate()?;
        dict.check_sensor_len("y", y.len())?;
        dict.check_atom_len("prior occupancy", prior.n_atoms())?;
        if let Some(v) = y.iter().find(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::invalid(format!("observation contains {v}")));
        }

        let n = dict.n_sensors();
        let m = dict.n_atoms();
        let noise_var = config.initial_noise_var;
        let sx = prior.sigma_x_sq();
        let scale = 1.0 / n as f64;
        let coeffs = CoefficientPosterior {
            spike_prob: prior.occupancy().to_vec(),
            cond_mean: dict.adjoint(y).into_iter().map(|v| v * scale).collect(),
            cond_var: (0..m)
                .map(|i| noise_var * sx / (noise_var + sx * dict.column_norm_sq(i)))
                .collect(),
        };
        let phase = match phase_prior {
            PhasePrior::Markov(model) => PhasePosterior::prior(&model, n)?,
            PhasePrior::NonInformative => {
                PhasePosterior::new(vec![0.0; n], vec![f64::INFINITY; n])?
            }
        };

        Ok(Self {
            y,
            dict,
            phase_prior,
            prior: prior.clone(),
            config: config.clone(),
            noise_var,
            floor: noise_floor(y),
            coeffs,
            phase,
            iterations: 0,
            trace: Vec::new(),
        })
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn coefficients(&self) -> &CoefficientPosterior {
        &self.coeffs
    }

    pub fn phase(&self) -> &PhasePosterior {
        &self.phase
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// One outer iteration: phase factor, atom sweep, then the optional noise
    /// M-step. Returns the max-norm change of `<z>`.
    pub fn step(&mut self) -> Result<f64> {
        let before = self.coeffs.means();

        let eta = compute_eta(self.y, self.dict, &before)?;
        let pseudo = PseudoObservations::from_eta(&eta, self.noise_var)?;
        self.phase = match &self.phase_prior {
            PhasePrior::Markov(model) => PhasePosterior::smoothed(&pseudo, model)?,
            PhasePrior::NonInformative => PhasePosterior::uninformed(&pseudo)?,
        };

        let y_bar = phase_corrected_observation(self.y, &self.phase)?;
        let order = self.sweep_order(&before);
        sweep_atoms(
            &y_bar,
            &mut self.coeffs,
            self.dict,
            &self.prior,
            self.noise_var,
            &order,
        )?;

        if self.config.estimate_noise {
            let est = estimate_noise_variance(self.y, &y_bar, &self.coeffs, self.dict)?;
            // y = 0 leaves no scale to floor against; keep the current value
            if self.floor > 0.0 {
                self.noise_var = est.max(self.floor);
            }
        }

        self.iterations += 1;
        let after = self.coeffs.means();
        let change = before
            .iter()
            .zip(&after)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);

        if self.config.trace {
            self.trace.push(IterationTrace {
                iteration: self.iterations,
                noise_var: self.noise_var,
                total_occupancy: self.coeffs.spike_prob.iter().sum(),
                max_change: change,
                phase_means: self.phase.means.clone(),
                phase_variances: self.phase.variances.clone(),
            });
        }
        Ok(change)
    }

    fn sweep_order(&self, means: &[Complex64]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..means.len()).collect();
        if self.config.order == SweepOrder::Energy {
            order.sort_by(|&a, &b| means[b].norm().total_cmp(&means[a].norm()).then(a.cmp(&b)));
        }
        order
    }

    /// Iterates until the change of `<z>` drops below the tolerance or the
    /// iteration budget runs out.
    pub fn run(mut self) -> Result<DoaEstimate> {
        let mut converged = false;
        while self.iterations < self.config.max_iterations {
            if self.step()? < self.config.convergence_tol {
                converged = true;
                break;
            }
        }
        Ok(self.finish(converged))
    }

    pub fn finish(self, converged: bool) -> DoaEstimate {
        DoaEstimate {
            z_hat: self.coeffs.means(),
            spike_probs: self.coeffs.spike_prob,
            phase_means: self.phase.means,
            phase_variances: self.phase.variances,
            iterations_used: self.iterations,
            converged,
            final_noise_var: self.noise_var,
            trace: self.trace,
        }
    }
}

/// Phase-aware VBEM: AR(1) phase prior and Bernoulli-Gaussian sources.
pub fn pavbem(
    y: &[Complex64],
    dict: &SteeringDictionary,
    phase_model: &PhaseMarkovModel,
    prior: &BernoulliGaussianPrior,
    config: &EstimatorConfig,
) -> Result<DoaEstimate> {
    Vbem::new(y, dict, PhasePrior::Markov(*phase_model), prior, config)?.run()
}

/// Phase-aware VBEM with a Gaussian source prior (every atom always on).
pub fn pavbem_relaxed(
    y: &[Complex64],
    dict: &SteeringDictionary,
    phase_model: &PhaseMarkovModel,
    sigma_x_sq: f64,
    config: &EstimatorConfig,
) -> Result<DoaEstimate> {
    let prior = BernoulliGaussianPrior::dense(dict.n_atoms(), sigma_x_sq)?;
    Vbem::new(y, dict, PhasePrior::Markov(*phase_model), &prior, config)?.run()
}

/// Phase-retrieval style baseline: flat phase prior and Gaussian sources.
pub fn prvbem_baseline(
    y: &[Complex64],
    dict: &SteeringDictionary,
    sigma_x_sq: f64,
    config: &EstimatorConfig,
) -> Result<DoaEstimate> {
    let prior = BernoulliGaussianPrior::dense(dict.n_atoms(), sigma_x_sq)?;
    Vbem::new(y, dict, PhasePrior::NonInformative, &prior, config)?.run()
}

/// Conventional beamforming, `z_hat = D^H y / N`.
pub fn beamforming(y: &[Complex64], dict: &SteeringDictionary) -> Result<DoaEstimate> {
    dict.check_sensor_len("y", y.len())?;
    let n = dict.n_sensors();
    let scale = 1.0 / n as f64;
    Ok(DoaEstimate {
        z_hat: dict.adjoint(y).into_iter().map(|v| v * scale).collect(),
        spike_probs: vec![1.0; dict.n_atoms()],
        phase_means: vec![0.0; n],
        phase_variances: vec![0.0; n],
        iterations_used: 0,
        converged: true,
        final_noise_var: f64::NAN,
        trace: Vec::new(),
    })
}

/// Runs `config.variant`. `prior` supplies `sigma_x^2` and, for `pavbem`, the occupancies.
pub fn estimate(
    y: &[Complex64],
    dict: &SteeringDictionary,
    phase_model: &PhaseMarkovModel,
    prior: &BernoulliGaussianPrior,
    config: &EstimatorConfig,
) -> Result<DoaEstimate> {
    match config.variant {
        Variant::Pavbem => pavbem(y, dict, phase_model, prior, config),
        Variant::PavbemRelaxed => pavbem_relaxed(y, dict, phase_model, prior.sigma_x_sq(), config),
        Variant::Prvbem => prvbem_baseline(y, dict, prior.sigma_x_sq(), config),
        Variant::Beamforming => beamforming(y, dict),
    }
}

/// Top-`k` atoms of an estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    /// Atom indices, strongest first.
    pub indices: Vec<usize>,
    /// Matching grid angles in radians.
    pub angles: Vec<f64>,
}

/// Indices of the `k` largest `|z_hat_i|`, ties broken by the lower index.
pub fn extract_support(
    estimate: &DoaEstimate,
    dict: &SteeringDictionary,
    k: usize,
) -> Result<Support> {
    let m = estimate.z_hat.len();
    dict.check_atom_len("z_hat", m)?;
    if k == 0 || k > m {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={m}")));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    let mag: Vec<f64> = estimate.z_hat.iter().map(|z| z.norm()).collect();
    idx.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));
    idx.truncate(k);
    let angles = idx.iter().map(|&i| dict.angles()[i]).collect();
    Ok(Support {
        indices: idx,
        angles,
    })
}
