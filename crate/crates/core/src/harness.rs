//! Seeded Monte Carlo sweeps over the additive-noise level and the number of sources.
//!
//! Every trial owns a child seed derived from `(base_seed, k index, noise index,
//! trial index)` alone, so a sweep is a pure function of its configuration no
//! matter how many workers share the trials.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{self, EstimatorConfig, Variant};
use crate::io::write_atomic;
use crate::model::{
    default_angle_grid, sample_ground_truth, synthesize_observation, BernoulliGaussianPrior,
    GroundTruth, Observation, PhaseMarkovModel, SteeringDictionary,
};

/// `|z^H z_hat| / (||z|| ||z_hat||)`, or 0 when either vector vanishes.
pub fn normalized_correlation(z: &[Complex64], z_hat: &[Complex64]) -> f64 {
    let nz = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let nh = z_hat.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if nz == 0.0 || nh == 0.0 {
        return 0.0;
    }
    let inner: Complex64 = z.iter().zip(z_hat).map(|(a, b)| a.conj() * b).sum();
    (inner.norm() / (nz * nh)).min(1.0)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of one trial, mixed from the sweep's base seed and the cell/trial indices.
pub fn child_seed(base_seed: u64, k_index: usize, noise_index: usize, trial_index: usize) -> u64 {
    [k_index, noise_index, trial_index]
        .into_iter()
        .fold(splitmix64(base_seed), |acc, i| {
            splitmix64(acc ^ splitmix64(i as u64))
        })
}

/// Array geometry and the generative-model parameters shared by every trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSetup {
    pub n_sensors: usize,
    pub grid_size: usize,
    pub spacing_ratio: f64,
    pub phase: PhaseMarkovModel,
    pub sigma_x_sq: f64,
    /// Draw phase noise for the synthetic data; `false` gives `theta = 0`.
    pub phase_noise: bool,
}

impl ModelSetup {
    pub fn dictionary(&self) -> Result<SteeringDictionary> {
        SteeringDictionary::new(
            self.n_sensors,
            self.spacing_ratio,
            &default_angle_grid(self.grid_size)?,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub model: ModelSetup,
    pub k_values: Vec<usize>,
    pub noise_grid: Vec<f64>,
    pub n_trials: usize,
    pub algorithms: Vec<Variant>,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub workers: usize,
    /// Shared estimator settings; `variant` is overridden per algorithm.
    pub estimator: EstimatorConfig,
    /// Initial noise variance for the variational estimators; `None` starts
    /// each cell at its true noise level.
    pub initial_noise_var: Option<f64>,
    /// Occupancy `p_i`; `None` uses `K / M`.
    pub occupancy: Option<f64>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        if self.noise_grid.is_empty() {
            return Err(Error::Config("noise_grid is empty".into()));
        }
        if let Some(s) = self
            .noise_grid
            .iter()
            .find(|s| !(s.is_finite() && **s > 0.0))
        {
            return Err(Error::Config(format!(
                "noise_grid entries must be > 0, got {s}"
            )));
        }
        if self.k_values.is_empty() {
            return Err(Error::Config("k_values is empty".into()));
        }
        if let Some(k) = self.k_values.iter().find(|k| **k > self.model.grid_size) {
            return Err(Error::Config(format!(
                "k = {k} exceeds grid_size = {}",
                self.model.grid_size
            )));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("algorithms is empty".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.estimator.validate()
    }

    /// Source prior used by the estimators in a cell with `k` sources.
    pub fn estimator_prior(&self, k: usize) -> Result<BernoulliGaussianPrior> {
        let m = self.model.grid_size;
        let p = self
            .occupancy
            .unwrap_or(if k > 0 { k as f64 / m as f64 } else { 0.1 });
        BernoulliGaussianPrior::uniform(m, p, self.model.sigma_x_sq)
    }
}

/// Coordinates of a single trial inside a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSpec {
    pub k: usize,
    pub noise_var: f64,
    pub k_index: usize,
    pub noise_index: usize,
    pub trial_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmOutcome {
    pub variant: Variant,
    /// `None` when the estimator errored or produced non-finite output.
    pub correlation: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub runtime: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub spec: TrialSpec,
    pub support: Vec<usize>,
    pub outcomes: Vec<AlgorithmOutcome>,
}

/// Draws one synthetic problem from a child seed.
pub fn draw_problem(
    model: &ModelSetup,
    dict: &SteeringDictionary,
    k: usize,
    noise_var: f64,
    seed: u64,
) -> Result<(GroundTruth, Observation)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let source_prior = BernoulliGaussianPrior::uniform(
        model.grid_size,
        k as f64 / model.grid_size as f64,
        model.sigma_x_sq,
    )?;
    let phase = model.phase_noise.then_some(&model.phase);
    let truth = sample_ground_truth(&source_prior, k, model.n_sensors, phase, &mut rng)?;
    let obs = synthesize_observation(dict, &truth, noise_var, &mut rng)?;
    Ok((truth, obs))
}

/// Synthesizes one problem and runs every selected algorithm on the same data.
pub fn run_trial(
    config: &SweepConfig,
    dict: &SteeringDictionary,
    spec: TrialSpec,
) -> Result<TrialRecord> {
    if spec.trial_index >= config.n_trials {
        return Err(Error::invalid(format!(
            "trial index {} out of range for {} trials",
            spec.trial_index, config.n_trials
        )));
    }
    let seed = child_seed(
        config.base_seed,
        spec.k_index,
        spec.noise_index,
        spec.trial_index,
    );
    let (truth, obs) = draw_problem(&config.model, dict, spec.k, spec.noise_var, seed)?;
    let prior = config.estimator_prior(spec.k)?;

    let outcomes = config
        .algorithms
        .iter()
        .map(|&variant| {
            let est_cfg = EstimatorConfig {
                variant,
                initial_noise_var: config.initial_noise_var.unwrap_or(spec.noise_var),
                ..config.estimator.clone()
            };
            let start = Instant::now();
            let result = estimators::estimate(&obs.y, dict, &config.model.phase, &prior, &est_cfg);
            let runtime = start.elapsed();
            match result {
                Ok(est) if est.is_finite() => AlgorithmOutcome {
                    variant,
                    correlation: Some(normalized_correlation(&truth.z, &est.z_hat)),
                    iterations: est.iterations_used,
                    converged: est.converged,
                    runtime,
                },
                _ => AlgorithmOutcome {
                    variant,
                    correlation: None,
                    iterations: 0,
                    converged: false,
                    runtime,
                },
            }
        })
        .collect();

    Ok(TrialRecord {
        seed,
        spec,
        support: truth.support,
        outcomes,
    })
}

/// Mean correlation per algorithm for one noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub noise_var: f64,
    pub mean_correlation: Vec<f64>,
    pub failed: Vec<usize>,
}

/// All noise levels for one source count.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub k: usize,
    pub algorithms: Vec<Variant>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn file_name(&self) -> String {
        format!("corr_k{}.dat", self.k)
    }

    pub fn column(&self, variant: Variant) -> Option<Vec<f64>> {
        let j = self.algorithms.iter().position(|v| *v == variant)?;
        Some(self.rows.iter().map(|r| r.mean_correlation[j]).collect())
    }
}

/// Runs all trials of one `(k, noise)` cell and averages them.
pub fn run_cell(
    config: &SweepConfig,
    dict: &SteeringDictionary,
    k_index: usize,
    noise_index: usize,
) -> Result<(SweepRow, Vec<TrialRecord>)> {
    let spec = |trial_index| TrialSpec {
        k: config.k_values[k_index],
        noise_var: config.noise_grid[noise_index],
        k_index,
        noise_index,
        trial_index,
    };
    let records = (0..config.n_trials)
        .into_par_iter()
        .map(|t| run_trial(config, dict, spec(t)))
        .collect::<Result<Vec<_>>>()?;
    Ok((aggregate(config, noise_index, &records), records))
}

fn aggregate(config: &SweepConfig, noise_index: usize, records: &[TrialRecord]) -> SweepRow {
    let n_alg = config.algorithms.len();
    let mut sums = vec![0.0; n_alg];
    let mut counts = vec![0usize; n_alg];
    let mut failed = vec![0usize; n_alg];
    // serial in trial order, so the floating-point sum is schedule independent
    for rec in records {
        for (j, out) in rec.outcomes.iter().enumerate() {
            match out.correlation {
                Some(c) => {
                    sums[j] += c;
                    counts[j] += 1;
                }
                None => failed[j] += 1,
            }
        }
    }
    SweepRow {
        noise_var: config.noise_grid[noise_index],
        mean_correlation: sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
            .collect(),
        failed,
    }
}

/// Runs the full sweep, writes one `.dat` per source count, and returns the tables.
///
/// `progress` is called once per finished cell.
pub fn run_sweep_with<F>(config: &SweepConfig, mut progress: F) -> Result<Vec<SweepTable>>
where
    F: FnMut(&SweepTable, &SweepRow),
{
    config.validate()?;
    ensure_writable(&config.output_dir)?;
    let dict = config.model.dictionary()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;

    let mut tables = Vec::with_capacity(config.k_values.len());
    for (k_index, &k) in config.k_values.iter().enumerate() {
        let mut table = SweepTable {
            k,
            algorithms: config.algorithms.clone(),
            rows: Vec::with_capacity(config.noise_grid.len()),
        };
        for noise_index in 0..config.noise_grid.len() {
            let (row, _) = pool.install(|| run_cell(config, &dict, k_index, noise_index))?;
            progress(&table, &row);
            table.rows.push(row);
        }
        write_dat(&table, &config.output_dir.join(table.file_name()))?;
        tables.push(table);
    }
    Ok(tables)
}

pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepTable>> {
    run_sweep_with(config, |_, _| {})
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".pavbem-write-probe");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

/// Writes a sweep table as whitespace-separated text: a `#` header naming the
/// columns, then one row per noise level (`sigma2` followed by one mean
/// correlation per algorithm). Values use the shortest exact decimal form.
///
/// The file is written next to its destination and renamed into place.
pub fn write_dat(table: &SweepTable, path: &Path) -> Result<()> {
    if table.rows.is_empty() {
        return Err(Error::invalid("refusing to write an empty table"));
    }
    let mut text = String::from("# sigma2");
    for v in &table.algorithms {
        text.push(' ');
        text.push_str(v.name());
    }
    text.push('\n');
    for row in &table.rows {
        text.push_str(&format!("{:?}", row.noise_var));
        for c in &row.mean_correlation {
            text.push_str(&format!(" {c:?}"));
        }
        text.push('\n');
    }

    write_atomic(path, text.as_bytes())
}

/// Reads a table written by [`write_dat`]. Failure counts are not stored in the file.
pub fn read_dat(path: &Path, k: usize) -> Result<SweepTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    let algorithms = header
        .strip_prefix('#')
        .ok_or_else(|| parse_err(1, "missing header".into()))?
        .split_whitespace()
        .skip(1)
        .map(|s| s.parse::<Variant>())
        .collect::<Result<Vec<_>>>()
        .map_err(|e| parse_err(1, e.to_string()))?;

    let mut rows = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(no + 1, e.to_string()))?;
        if vals.len() != algorithms.len() + 1 {
            return Err(parse_err(
                no + 1,
                format!(
                    "expected {} columns, found {}",
                    algorithms.len() + 1,
                    vals.len()
                ),
            ));
        }
        rows.push(SweepRow {
            noise_var: vals[0],
            mean_correlation: vals[1..].to_vec(),
            failed: vec![0; algorithms.len()],
        });
    }
    Ok(SweepTable {
        k,
        algorithms,
        rows,
    })
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) || n == 0 {
        return Err(Error::Config(format!(
            "log grid needs 0 < lo <= hi and n >= 1, got ({lo}, {hi}, {n})"
        )));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect())
}
