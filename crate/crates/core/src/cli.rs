//! `pavbem simulate | estimate | sweep`.
//!
//! Every flag is sugar for a config key; the precedence is
//! defaults < `--config` file < `--set` < dedicated flags.

use std::ffi::OsString;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{parse_override, Config, KEYS, WORKERS_ENV};
use crate::error::{Error, Result};
use crate::estimators::{estimate, extract_support, DoaEstimate, Variant};
use crate::harness::{child_seed, normalized_correlation, run_sweep_with};
use crate::io::{read_truth, write_truth, ObservationRecord};
use crate::model::{sample_ground_truth, synthesize_observation, GroundTruth};

#[derive(Debug, Parser)]
#[command(
    name = "pavbem",
    version,
    about = "Direction-of-arrival estimation under sensor phase noise"
)]
pub struct Cli {
    /// TOML file of config keys (see the list below).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Override any config key, e.g. `--set a=0.9`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// beamforming, prvbem, pavbem_relaxed or pavbem.
    #[arg(long, global = true)]
    pub variant: Option<String>,

    #[arg(long, global = true)]
    pub k: Option<usize>,

    #[arg(long = "noise-var", global = true, value_name = "SIGMA2")]
    pub noise_var: Option<f64>,

    #[arg(long, global = true)]
    pub trials: Option<usize>,

    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[arg(long = "output-dir", global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,

    /// energy or index.
    #[arg(long, global = true)]
    pub order: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw one ground truth and its observation.
    Simulate {
        #[arg(long, default_value = "observation.txt")]
        out: PathBuf,
        #[arg(long = "truth-out", default_value = "truth.txt")]
        truth_out: PathBuf,
    },
    /// Run one estimator on an observation file.
    Estimate {
        observation: PathBuf,
        /// Ground truth to score against.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Append per-iteration noise variance and total occupancy to this log.
        #[arg(long, value_name = "PATH")]
        diagnostics: Option<PathBuf>,
        /// Also log the phase posterior means and variances.
        #[arg(long, requires = "diagnostics")]
        diagnostics_phase: bool,
    },
    /// Monte Carlo sweep over k_values x noise grid; writes corr_k<K>.dat files.
    Sweep,
}

impl Cli {
    fn overrides(&self) -> Result<Vec<(String, toml::Value)>> {
        let mut ov = self
            .set
            .iter()
            .map(|s| parse_override(s))
            .collect::<Result<Vec<_>>>()?;
        let int = |v: u64| toml::Value::Integer(v as i64);
        let flags = [
            ("seed", self.seed.map(int)),
            ("variant", self.variant.clone().map(toml::Value::String)),
            ("k", self.k.map(|v| int(v as u64))),
            ("noise_var", self.noise_var.map(toml::Value::Float)),
            ("n_trials", self.trials.map(|v| int(v as u64))),
            ("workers", self.workers.map(|v| int(v as u64))),
            (
                "output_dir",
                self.output_dir
                    .as_ref()
                    .map(|p| toml::Value::String(p.display().to_string())),
            ),
            ("order", self.order.clone().map(toml::Value::String)),
        ];
        ov.extend(
            flags
                .into_iter()
                .filter_map(|(k, v)| v.map(|v| (k.to_string(), v))),
        );
        Ok(ov)
    }
}

fn keys_help() -> String {
    let width = KEYS.iter().map(|k| k.0.len()).max().unwrap_or(0);
    let mut s = String::from("Config keys (default):\n");
    for (key, default, desc) in KEYS {
        s.push_str(&format!("  {key:<width$}  {desc} ({default})\n"));
    }
    s.push_str(&format!(
        "\nEnvironment:\n  {WORKERS_ENV}  default worker count when `workers` is unset\n\n\
         Exit status: 0 success, 1 runtime or I/O error, 2 usage error."
    ));
    s
}

/// Parses `args` (program name first), runs the command, and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command()
        .after_help(keys_help())
        .try_get_matches_from(args)
    {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match run(&cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for usage errors (bad keys or values), 1 for everything else.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        _ => 1,
    }
}

pub fn run(cli: &Cli, out: &mut impl Write) -> Result<()> {
    let config = Config::load(cli.config.as_deref(), &cli.overrides()?)?;
    match &cli.command {
        Command::Simulate {
            out: obs,
            truth_out,
        } => simulate(&config, obs, truth_out, out),
        Command::Estimate {
            observation,
            truth,
            diagnostics,
            diagnostics_phase,
        } => run_estimate(
            &config,
            observation,
            truth.as_deref(),
            diagnostics.as_deref().map(|p| (p, *diagnostics_phase)),
            out,
        ),
        Command::Sweep => sweep(&config, out),
    }
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

/// Simulation seed of a single draw: the sweep's first-trial child seed.
pub fn simulation_seed(config: &Config) -> u64 {
    child_seed(config.seed, 0, 0, 0)
}

pub fn simulate_problem(config: &Config) -> Result<(GroundTruth, ObservationRecord)> {
    let dict = config.dictionary()?;
    let phase = config.phase_model()?;
    let seed = simulation_seed(config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = sample_ground_truth(
        &config.truth_prior()?,
        config.k,
        config.n_sensors,
        config.phase_noise.then_some(&phase),
        &mut rng,
    )?;
    let obs = synthesize_observation(&dict, &truth, config.noise_var, &mut rng)?;
    let meta = vec![
        ("n_sensors".into(), config.n_sensors.to_string()),
        ("grid_size".into(), config.grid_size.to_string()),
        (
            "spacing_ratio".into(),
            format!("{:?}", config.spacing_ratio),
        ),
        ("k".into(), config.k.to_string()),
        ("noise_var".into(), format!("{:?}", config.noise_var)),
        ("phase_noise".into(), config.phase_noise.to_string()),
        ("seed".into(), config.seed.to_string()),
        ("child_seed".into(), seed.to_string()),
    ];
    let record = ObservationRecord {
        meta,
        y: obs.y,
        theta: truth.theta.clone(),
    };
    Ok((truth, record))
}

fn simulate(
    config: &Config,
    obs_path: &Path,
    truth_path: &Path,
    out: &mut impl Write,
) -> Result<()> {
    let (truth, record) = simulate_problem(config)?;
    record.write(obs_path)?;
    write_truth(truth_path, &record.meta, &truth)?;
    let dict = config.dictionary()?;
    let angles: Vec<String> = truth
        .support
        .iter()
        .map(|&i| format!("{:.4}", dict.angles()[i].to_degrees()))
        .collect();
    writeln!(out, "seed: {}", simulation_seed(config)).map_err(stdout_err)?;
    writeln!(out, "support: {:?}", truth.support).map_err(stdout_err)?;
    writeln!(out, "angles (deg): {}", angles.join(" ")).map_err(stdout_err)?;
    writeln!(
        out,
        "wrote {} and {}",
        obs_path.display(),
        truth_path.display()
    )
    .map_err(stdout_err)
}

fn check_meta(record: &ObservationRecord, key: &str, expected: usize, path: &Path) -> Result<()> {
    match record.meta.iter().find(|(k, _)| k == key) {
        Some((_, v)) if v.parse::<usize>().ok() != Some(expected) => {
            Err(Error::Dimension(format!(
                "{} was written with {key} = {v} but the config has {key} = {expected}",
                path.display()
            )))
        }
        _ => Ok(()),
    }
}

fn run_estimate(
    config: &Config,
    obs_path: &Path,
    truth_path: Option<&Path>,
    diagnostics: Option<(&Path, bool)>,
    out: &mut impl Write,
) -> Result<()> {
    let record = ObservationRecord::read(obs_path)?;
    if record.y.len() != config.n_sensors {
        return Err(Error::Dimension(format!(
            "{} has {} sensors but the config has n_sensors = {}",
            obs_path.display(),
            record.y.len(),
            config.n_sensors
        )));
    }
    check_meta(&record, "grid_size", config.grid_size, obs_path)?;
    let truth = truth_path.map(read_truth).transpose()?;
    if let Some(t) = &truth {
        if t.z.len() != config.grid_size {
            return Err(Error::Dimension(format!(
                "{} has {} atoms but the config has grid_size = {}",
                truth_path.unwrap_or(obs_path).display(),
                t.z.len(),
                config.grid_size
            )));
        }
    }

    let dict = config.dictionary()?;
    let mut est_cfg = config.estimator_config(config.variant);
    est_cfg.trace = diagnostics.is_some();
    let est = estimate(
        &record.y,
        &dict,
        &config.phase_model()?,
        &config.source_prior(config.k)?,
        &est_cfg,
    )?;
    if let Some((path, phase)) = diagnostics {
        append_diagnostics(path, config.variant, obs_path, &est, phase)?;
    }
    report(config, &dict, &est, truth.as_ref(), out)
}

fn report(
    config: &Config,
    dict: &crate::model::SteeringDictionary,
    est: &DoaEstimate,
    truth: Option<&GroundTruth>,
    out: &mut impl Write,
) -> Result<()> {
    let mut text = format!("variant: {}\n", config.variant);
    text.push_str(&format!(
        "iterations: {}{}\n",
        est.iterations_used,
        if est.converged { " (converged)" } else { "" }
    ));
    if config.variant != Variant::Beamforming {
        text.push_str(&format!(
            "final noise variance: {:e}\n",
            est.final_noise_var
        ));
    }
    if config.k > 0 {
        let support = extract_support(est, dict, config.k)?;
        let angles: Vec<String> = support
            .angles
            .iter()
            .map(|a| format!("{:.4}", a.to_degrees()))
            .collect();
        text.push_str(&format!(
            "top-{} angles (deg): {}\n",
            config.k,
            angles.join(" ")
        ));
        text.push_str(&format!("top-{} atoms: {:?}\n", config.k, support.indices));
    }
    if let Some(t) = truth {
        text.push_str(&format!(
            "normalized correlation: {:.6}\n",
            normalized_correlation(&t.z, &est.z_hat)
        ));
    }
    text.push_str("atom angle_deg abs_z_hat spike_prob\n");
    for (i, z) in est.z_hat.iter().enumerate() {
        text.push_str(&format!(
            "{i} {:.4} {:.6e} {:.6}\n",
            dict.angles()[i].to_degrees(),
            z.norm(),
            est.spike_probs[i]
        ));
    }
    out.write_all(text.as_bytes()).map_err(stdout_err)
}

fn append_diagnostics(
    path: &Path,
    variant: Variant,
    obs_path: &Path,
    est: &DoaEstimate,
    phase: bool,
) -> Result<()> {
    let mut text = format!(
        "# run: variant = {variant}, observation = {}\n",
        obs_path.display()
    );
    text.push_str("# columns: iteration noise_var total_occupancy max_change");
    if phase {
        text.push_str(" phase_means... phase_variances...");
    }
    text.push('\n');
    for t in &est.trace {
        text.push_str(&format!(
            "{} {:?} {:?} {:?}",
            t.iteration, t.noise_var, t.total_occupancy, t.max_change
        ));
        if phase {
            for v in t.phase_means.iter().chain(&t.phase_variances) {
                text.push_str(&format!(" {v:?}"));
            }
        }
        text.push('\n');
    }
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

fn sweep(config: &Config, out: &mut impl Write) -> Result<()> {
    let sweep = config.sweep_config()?;
    let names: Vec<&str> = sweep.algorithms.iter().map(|v| v.name()).collect();
    writeln!(
        out,
        "sweep: k = {:?}, {} noise levels, {} trials, {} workers",
        sweep.k_values,
        sweep.noise_grid.len(),
        sweep.n_trials,
        sweep.workers
    )
    .map_err(stdout_err)?;
    let mut progress_err = None;
    let tables = run_sweep_with(&sweep, |table, row| {
        let cells: Vec<String> = names
            .iter()
            .zip(&row.mean_correlation)
            .zip(&row.failed)
            .map(|((n, c), f)| {
                if *f > 0 {
                    format!("{n}={c:.4} ({f} failed)")
                } else {
                    format!("{n}={c:.4}")
                }
            })
            .collect();
        if let Err(e) = writeln!(
            out,
            "K={} sigma2={:e} {}",
            table.k,
            row.noise_var,
            cells.join(" ")
        ) {
            progress_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = progress_err {
        return Err(stdout_err(e));
    }

    let mut text = String::new();
    for table in &tables {
        text.push_str(&format!(
            "\nK = {} -> {}\n",
            table.k,
            sweep.output_dir.join(table.file_name()).display()
        ));
        text.push_str(&format!("{:>10}", "sigma2"));
        for n in &names {
            text.push_str(&format!(" {n:>15}"));
        }
        text.push('\n');
        for row in &table.rows {
            text.push_str(&format!("{:>10.3e}", row.noise_var));
            for c in &row.mean_correlation {
                text.push_str(&format!(" {c:>15.4}"));
            }
            text.push('\n');
        }
    }
    out.write_all(text.as_bytes()).map_err(stdout_err)
}
