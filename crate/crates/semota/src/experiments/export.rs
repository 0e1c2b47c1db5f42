//! Result serialization: CSV series, run manifests, and the channel
//! statistics cache.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! re-parsed file reproduces the in-memory values exactly. Unavailable
//! standard errors are written as empty fields. Output is fully
//! deterministic; the manifest additionally records wall time and is the
//! only file expected to differ between identical runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::SensorSuite;
use crate::scheduler::ChannelStats;

use super::config::{ExperimentConfig, PolicyKind};
use super::{MonteCarloResult, SweepResult};

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Per-slot series: `slot,mean_nmse,se_nmse,mean_power,se_power,mean_trace_sigma`.
pub fn write_slot_csv(path: &Path, result: &MonteCarloResult) -> Result<()> {
    let mut out = String::from("slot,mean_nmse,se_nmse,mean_power,se_power,mean_trace_sigma\n");
    for s in &result.per_slot {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.slot,
            fmt_f64(s.mean_nmse),
            fmt_opt(s.se_nmse),
            fmt_f64(s.mean_power),
            fmt_opt(s.se_power),
            fmt_f64(s.mean_trace_sigma)
        )
        .expect("string write");
    }
    write_file(path, &out)
}

/// Sweep rows: `M,policy,mean_nmse,se_nmse,mean_power,se_power,sigma1,sigma2`.
pub fn write_sweep_csv(path: &Path, result: &SweepResult) -> Result<()> {
    let mut out = String::from("M,policy,mean_nmse,se_nmse,mean_power,se_power,sigma1,sigma2\n");
    for r in &result.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.m,
            r.policy.name(),
            fmt_f64(r.mean_nmse),
            fmt_opt(r.se_nmse),
            fmt_f64(r.mean_power),
            fmt_opt(r.se_power),
            fmt_opt(r.sigma1),
            fmt_opt(r.sigma2)
        )
        .expect("string write");
    }
    write_file(path, &out)
}

/// Power series per policy: `slot,policy,mean_power,se_power`.
pub fn write_power_trace_csv(
    path: &Path,
    results: &[(PolicyKind, MonteCarloResult)],
) -> Result<()> {
    let mut out = String::from("slot,policy,mean_power,se_power\n");
    for (policy, result) in results {
        for s in &result.per_slot {
            writeln!(
                out,
                "{},{},{},{}",
                s.slot,
                policy.name(),
                fmt_f64(s.mean_power),
                fmt_opt(s.se_power)
            )
            .expect("string write");
        }
    }
    write_file(path, &out)
}

/// Everything needed to reproduce a run: config echo, seeds, tuned
/// thresholds, channel statistics, and provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub master_seed: u64,
    pub stats_seed: u64,
    pub wall_time_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuned_sigma1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuned_sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_bar: Option<f64>,
    pub outputs: Vec<String>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            master_seed: cfg.run.master_seed,
            stats_seed: cfg.stats_seed(),
            wall_time_secs: 0.0,
            tuned_sigma1: None,
            tuned_sigma2: None,
            alpha_bar: None,
            beta_bar: None,
            outputs: Vec::new(),
            config: cfg.clone(),
        }
    }

    pub fn with_stats(mut self, stats: &ChannelStats) -> Self {
        self.alpha_bar = Some(stats.alpha_bar);
        self.beta_bar = Some(stats.beta_bar);
        self
    }
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let text = toml::to_string_pretty(manifest)
        .map_err(|e| Error::config(format!("manifest serialization: {e}")))?;
    write_file(path, &text)
}

/// Content hash of a sensor fleet plus the receive-array size.
pub fn suite_cache_key(suite: &SensorSuite, n_r: usize) -> String {
    let mut hasher = Sha256::new();
    hasher.update((suite.len() as u64).to_le_bytes());
    hasher.update((suite.n_t() as u64).to_le_bytes());
    hasher.update((suite.state_dim() as u64).to_le_bytes());
    hasher.update((n_r as u64).to_le_bytes());
    for c in suite.observations() {
        for v in c.iter() {
            hasher.update(v.to_bits().to_le_bytes());
        }
    }
    let digest = hasher.finalize();
    digest.iter().fold(String::new(), |mut acc, b| {
        write!(acc, "{b:02x}").expect("string write");
        acc
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
struct StatsCacheFile {
    #[serde(default)]
    entry: Vec<StatsCacheEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StatsCacheEntry {
    key: String,
    n_samples: usize,
    seed: u64,
    alpha_bar: f64,
    beta_bar: f64,
    alpha_se: f64,
    beta_se: f64,
}

/// Looks up cached channel statistics for `(key, n_samples, seed)`.
pub fn load_cached_stats(
    path: &Path,
    key: &str,
    n_samples: usize,
    seed: u64,
) -> Result<Option<ChannelStats>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: StatsCacheFile = toml::from_str(&text)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    Ok(file
        .entry
        .into_iter()
        .find(|e| e.key == key && e.n_samples == n_samples && e.seed == seed)
        .map(|e| ChannelStats {
            alpha_bar: e.alpha_bar,
            beta_bar: e.beta_bar,
            alpha_se: e.alpha_se,
            beta_se: e.beta_se,
            n_samples: e.n_samples,
            seed: e.seed,
        }))
}

/// Appends (or replaces) a cache entry.
pub fn store_cached_stats(path: &Path, key: &str, stats: &ChannelStats) -> Result<()> {
    let mut file = if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?
    } else {
        StatsCacheFile::default()
    };
    file.entry
        .retain(|e| !(e.key == key && e.n_samples == stats.n_samples && e.seed == stats.seed));
    file.entry.push(StatsCacheEntry {
        key: key.to_string(),
        n_samples: stats.n_samples,
        seed: stats.seed,
        alpha_bar: stats.alpha_bar,
        beta_bar: stats.beta_bar,
        alpha_se: stats.alpha_se,
        beta_se: stats.beta_se,
    });
    let text = toml::to_string_pretty(&file)
        .map_err(|e| Error::config(format!("stats cache serialization: {e}")))?;
    write_file(path, &text)
}

/// Parses a CSV of floats back into columns, for round-trip checks.
pub fn parse_csv(text: &str) -> Vec<Vec<Option<f64>>> {
    text.lines()
        .skip(1)
        .map(|line| {
            line.split(',')
                .map(|field| {
                    if field.is_empty() {
                        None
                    } else {
                        field.parse::<f64>().ok()
                    }
                })
                .collect()
        })
        .collect()
}

/// Default output directory: the `SEMOTA_OUT_DIR` environment variable,
/// else `./out`. An explicit `--out` flag wins over both.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os("SEMOTA_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{monte_carlo, PolicyRuntime};

    #[test]
    fn slot_csv_round_trips_exactly() {
        let mut cfg = ExperimentConfig::default();
        cfg.run.horizon = 5;
        cfg.run.runs = 3;
        cfg.sensors.m = 2;
        cfg.stats.n_samples = 100;
        let model = cfg.plant_model().unwrap();
        let suite = cfg.suite_for(2).unwrap();
        let policy = PolicyRuntime::prepare(&cfg, PolicyKind::Ota, &model, &suite).unwrap();
        let result = monte_carlo(&cfg, &model, &suite, &policy, 1).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("slots.csv");
        write_slot_csv(&path, &result).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let rows = parse_csv(&text);
        assert_eq!(rows.len(), 5);
        for (k, row) in rows.iter().enumerate() {
            assert_eq!(row[0], Some(k as f64));
            assert_eq!(row[1], Some(result.per_slot[k].mean_nmse));
            assert_eq!(row[2], result.per_slot[k].se_nmse);
            assert_eq!(row[3], Some(result.per_slot[k].mean_power));
            assert_eq!(row[5], Some(result.per_slot[k].mean_trace_sigma));
        }
    }

    #[test]
    fn stats_cache_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stats-cache.toml");
        let stats = ChannelStats {
            alpha_bar: 0.5,
            beta_bar: 2.0,
            alpha_se: 0.01,
            beta_se: 0.2,
            n_samples: 100,
            seed: 7,
        };
        assert!(load_cached_stats(&path, "k", 100, 7).unwrap().is_none());
        store_cached_stats(&path, "k", &stats).unwrap();
        let loaded = load_cached_stats(&path, "k", 100, 7).unwrap().unwrap();
        assert_eq!(loaded, stats);
        // Different parameters miss.
        assert!(load_cached_stats(&path, "k", 200, 7).unwrap().is_none());
        assert!(load_cached_stats(&path, "other", 100, 7).unwrap().is_none());
    }

    #[test]
    fn cache_key_tracks_suite_content() {
        let cfg = ExperimentConfig::default();
        let a = cfg.suite_for(2).unwrap();
        let b = cfg.suite_for(2).unwrap();
        let c = cfg.suite_for(3).unwrap();
        assert_eq!(suite_cache_key(&a, 2), suite_cache_key(&b, 2));
        assert_ne!(suite_cache_key(&a, 2), suite_cache_key(&a, 3));
        assert_ne!(suite_cache_key(&a, 2), suite_cache_key(&c, 2));
    }

    #[test]
    fn manifest_echoes_the_config() {
        let cfg = ExperimentConfig::default();
        let manifest = Manifest::new("simulate", &cfg);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.toml");
        write_manifest(&path, &manifest).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let back: Manifest = toml::from_str(&text).unwrap();
        assert_eq!(back.config, cfg);
        assert_eq!(back.master_seed, cfg.run.master_seed);
    }
}
