//! Writes a simulated observation and its ground truth in the columnar text
//! format, reads them back, and scores a beamforming estimate against them.

use pavbem::config::Config;
use pavbem::estimators::beamforming;
use pavbem::harness::normalized_correlation;
use pavbem::io::{read_truth, write_truth, ObservationRecord};

fn main() -> pavbem::error::Result<()> {
    let config = Config::from_toml_str("k = 3\nnoise_var = 1e-3\nseed = 5\nphase_noise = false")?;
    let (truth, record) = pavbem::cli::simulate_problem(&config)?;

    let dir = std::env::temp_dir().join("pavbem-observation-files");
    std::fs::create_dir_all(&dir).map_err(|e| pavbem::error::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let (obs_path, truth_path) = (dir.join("observation.txt"), dir.join("truth.txt"));
    record.write(&obs_path)?;
    write_truth(&truth_path, &record.meta, &truth)?;

    let back = ObservationRecord::read(&obs_path)?;
    let truth_back = read_truth(&truth_path)?;
    assert_eq!(back.y, record.y);
    println!("{} rows in {}", back.y.len(), obs_path.display());
    for (k, v) in &back.meta {
        println!("  {k} = {v}");
    }

    let est = beamforming(&back.y, &config.dictionary()?)?;
    println!("support {:?}", truth_back.support);
    println!(
        "beamforming correlation without phase noise: {:.4}",
        normalized_correlation(&truth_back.z, &est.z_hat)
    );
    Ok(())
}
