//! Flat key/value run configuration, read from TOML and patched by overrides.
//!
//! Every key is optional in the file; [`KEYS`] lists them with their defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, SweepOrder, Variant};
use crate::harness::{log_grid, ModelSetup, SweepConfig};
use crate::model::{
    default_angle_grid, BernoulliGaussianPrior, PhaseMarkovModel, SteeringDictionary,
};

/// Environment variable consulted when `workers` is not configured.
pub const WORKERS_ENV: &str = "PAVBEM_WORKERS";

/// `(key, default, description)` for every configuration key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("n_sensors", "256", "number of array sensors N"),
    ("grid_size", "50", "number of grid angles M"),
    ("spacing_ratio", "4.0", "sensor spacing over wavelength"),
    ("a", "0.8", "AR(1) coefficient of the phase noise"),
    ("sigma_theta_sq", "1.0", "phase innovation variance"),
    ("sigma_1_sq", "1e6", "variance of the first sensor's phase"),
    ("sigma_x_sq", "1.0", "source amplitude variance"),
    ("k", "5", "number of sources (simulate, estimate)"),
    ("noise_var", "0.01", "additive noise variance (simulate)"),
    ("seed", "0", "base random seed"),
    (
        "phase_noise",
        "true",
        "draw phase noise when synthesizing data",
    ),
    ("variant", "\"pavbem\"", "estimator for `estimate`"),
    ("max_iterations", "200", "outer-iteration cap"),
    (
        "convergence_tol",
        "1e-6",
        "max-norm change of <z> that stops the loop",
    ),
    (
        "estimate_noise",
        "true",
        "re-estimate the noise variance each iteration",
    ),
    (
        "initial_noise_var",
        "noise_var",
        "starting noise variance; sweeps use each cell's value",
    ),
    ("order", "\"energy\"", "atom sweep order: energy or index"),
    (
        "occupancy",
        "k / grid_size",
        "prior occupancy p_i (0.1 when k = 0)",
    ),
    ("k_values", "[2, 5]", "source counts of a sweep"),
    ("noise_grid", "unset", "explicit noise variances of a sweep"),
    (
        "noise_grid_spec",
        "\"logspace:1e-3:1:8\"",
        "noise grid as logspace:lo:hi:n",
    ),
    ("n_trials", "50", "trials per sweep cell"),
    (
        "algorithms",
        "[\"beamforming\", \"prvbem\", \"pavbem_relaxed\", \"pavbem\"]",
        "estimators compared by a sweep, in column order",
    ),
    (
        "workers",
        "$PAVBEM_WORKERS or all cores",
        "sweep worker threads",
    ),
    (
        "output_dir",
        "\"results\"",
        "directory receiving the sweep .dat files",
    ),
];

const DEFAULT_NOISE_GRID_SPEC: &str = "logspace:1e-3:1:8";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub n_sensors: usize,
    pub grid_size: usize,
    pub spacing_ratio: f64,
    pub a: f64,
    pub sigma_theta_sq: f64,
    pub sigma_1_sq: f64,
    pub sigma_x_sq: f64,
    pub k: usize,
    pub noise_var: f64,
    pub seed: u64,
    pub phase_noise: bool,
    pub variant: Variant,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub estimate_noise: bool,
    pub initial_noise_var: Option<f64>,
    pub order: SweepOrder,
    pub occupancy: Option<f64>,
    pub k_values: Vec<usize>,
    pub noise_grid: Option<Vec<f64>>,
    pub noise_grid_spec: Option<String>,
    pub n_trials: usize,
    pub algorithms: Vec<Variant>,
    pub workers: Option<usize>,
    pub output_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            n_sensors: 256,
            grid_size: 50,
            spacing_ratio: 4.0,
            a: 0.8,
            sigma_theta_sq: 1.0,
            sigma_1_sq: 1e6,
            sigma_x_sq: 1.0,
            k: 5,
            noise_var: 1e-2,
            seed: 0,
            phase_noise: true,
            variant: Variant::Pavbem,
            max_iterations: 200,
            convergence_tol: 1e-6,
            estimate_noise: true,
            initial_noise_var: None,
            order: SweepOrder::Energy,
            occupancy: None,
            k_values: vec![2, 5],
            noise_grid: None,
            noise_grid_spec: None,
            n_trials: 50,
            algorithms: Variant::ALL.to_vec(),
            workers: None,
            output_dir: PathBuf::from("results"),
        }
    }
}

/// Splits `key=value`; the value is read as a TOML literal, falling back to a bare string.
pub fn parse_override(text: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{text}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override `{text}` has an empty key")));
    }
    let raw = raw.trim();
    let value = raw
        .parse::<toml::Value>()
        .unwrap_or_else(|_| toml::Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_table(parse_table(text)?)
    }

    /// Reads `path` (if any), applies `overrides` in order, and validates.
    pub fn load(path: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                parse_table(&text).map_err(|e| match e {
                    Error::Config(msg) => Error::Config(format!("{}: {msg}", p.display())),
                    other => other,
                })?
            }
            None => toml::Table::new(),
        };
        for (key, value) in overrides {
            table.insert(key.clone(), value.clone());
        }
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let config: Config = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().trim().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.phase_model()?;
        self.dictionary()?;
        if self.k > self.grid_size {
            return Err(Error::Config(format!(
                "k = {} exceeds grid_size = {}",
                self.k, self.grid_size
            )));
        }
        if !(self.sigma_x_sq.is_finite() && self.sigma_x_sq > 0.0) {
            return Err(Error::Config(format!(
                "sigma_x_sq must be > 0, got {}",
                self.sigma_x_sq
            )));
        }
        if !(self.noise_var.is_finite() && self.noise_var >= 0.0) {
            return Err(Error::Config(format!(
                "noise_var must be >= 0, got {}",
                self.noise_var
            )));
        }
        if let Some(p) = self.occupancy {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!(
                    "occupancy must lie in [0, 1], got {p}"
                )));
            }
        }
        if self.noise_grid.is_some() && self.noise_grid_spec.is_some() {
            return Err(Error::Config(
                "set either noise_grid or noise_grid_spec, not both".into(),
            ));
        }
        self.noise_grid()?;
        self.estimator_config(self.variant).validate()?;
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn phase_model(&self) -> Result<PhaseMarkovModel> {
        PhaseMarkovModel::new(self.a, self.sigma_theta_sq, self.sigma_1_sq)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn model_setup(&self) -> Result<ModelSetup> {
        Ok(ModelSetup {
            n_sensors: self.n_sensors,
            grid_size: self.grid_size,
            spacing_ratio: self.spacing_ratio,
            phase: self.phase_model()?,
            sigma_x_sq: self.sigma_x_sq,
            phase_noise: self.phase_noise,
        })
    }

    pub fn dictionary(&self) -> Result<SteeringDictionary> {
        default_angle_grid(self.grid_size)
            .and_then(|grid| SteeringDictionary::new(self.n_sensors, self.spacing_ratio, &grid))
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Estimator prior for `k` declared sources.
    pub fn source_prior(&self, k: usize) -> Result<BernoulliGaussianPrior> {
        let p = self.occupancy.unwrap_or(if k > 0 {
            k as f64 / self.grid_size as f64
        } else {
            0.1
        });
        BernoulliGaussianPrior::uniform(self.grid_size, p, self.sigma_x_sq)
    }

    /// Prior used to draw ground truths: exactly `k` atoms at unit occupancy scale.
    pub fn truth_prior(&self) -> Result<BernoulliGaussianPrior> {
        BernoulliGaussianPrior::uniform(
            self.grid_size,
            self.k as f64 / self.grid_size as f64,
            self.sigma_x_sq,
        )
    }

    pub fn estimator_config(&self, variant: Variant) -> EstimatorConfig {
        EstimatorConfig {
            variant,
            max_iterations: self.max_iterations,
            convergence_tol: self.convergence_tol,
            estimate_noise: self.estimate_noise,
            initial_noise_var: self.initial_noise_var.unwrap_or(if self.noise_var > 0.0 {
                self.noise_var
            } else {
                1e-2
            }),
            order: self.order,
            trace: false,
        }
    }

    pub fn noise_grid(&self) -> Result<Vec<f64>> {
        if let Some(grid) = &self.noise_grid {
            return Ok(grid.clone());
        }
        parse_grid_spec(
            self.noise_grid_spec
                .as_deref()
                .unwrap_or(DEFAULT_NOISE_GRID_SPEC),
        )
    }

    /// Configured worker count, else `$PAVBEM_WORKERS`, else the available parallelism.
    pub fn resolved_workers(&self) -> Result<usize> {
        if let Some(w) = self.workers {
            return Ok(w);
        }
        if let Ok(v) = std::env::var(WORKERS_ENV) {
            return match v.trim().parse::<usize>() {
                Ok(w) if w > 0 => Ok(w),
                _ => Err(Error::Config(format!(
                    "{WORKERS_ENV} must be a positive integer, got `{v}`"
                ))),
            };
        }
        Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let config = SweepConfig {
            model: self.model_setup()?,
            k_values: self.k_values.clone(),
            noise_grid: self.noise_grid()?,
            n_trials: self.n_trials,
            algorithms: self.algorithms.clone(),
            base_seed: self.seed,
            output_dir: self.output_dir.clone(),
            workers: self.resolved_workers()?,
            estimator: self.estimator_config(Variant::Pavbem),
            initial_noise_var: self.initial_noise_var,
            occupancy: self.occupancy,
        };
        config.validate()?;
        Ok(config)
    }
}

fn parse_table(text: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| Error::Config(e.message().trim().to_string()))
}

/// Parses `logspace:lo:hi:n`.
pub fn parse_grid_spec(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("noise_grid_spec `{spec}` is not logspace:lo:hi:n"));
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["logspace", lo, hi, n] => {
            let lo = lo.parse().map_err(|_| bad())?;
            let hi = hi.parse().map_err(|_| bad())?;
            let n = n.parse().map_err(|_| bad())?;
            log_grid(lo, hi, n)
        }
        _ => Err(bad()),
    }
}
