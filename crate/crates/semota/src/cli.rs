//! Command-line front end.
//!
//! Subcommands: `simulate` (one policy, slot CSV), `sweep` (fleet-size
//! sweep with threshold tuning), `power-trace` (per-slot power by policy),
//! `stats` (channel statistics with caching), `grid-search` (baseline
//! threshold tuning), and `validate` (the invariant suites).
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 validation failure.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baselines::BaselineKind;
use crate::error::Result;
use crate::experiments::config::ExperimentConfig;
use crate::experiments::export::{
    default_out_dir, load_cached_stats, store_cached_stats, suite_cache_key, write_manifest,
    write_power_trace_csv, write_slot_csv, write_sweep_csv, Manifest,
};
use crate::experiments::{monte_carlo, power_trace, sweep_sensors, tune_threshold, PolicyRuntime};
use crate::scheduler::{estimate_channel_stats, ChannelStats};
use crate::validate::run_all;

#[derive(Debug, Parser)]
#[command(
    name = "semota",
    version,
    about = "Multi-sensor remote state estimation over fading channels with semantic \
             over-the-air scheduling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one policy over the configured horizon and export slot series.
    Simulate(CommonArgs),
    /// Sweep the fleet size across policies (tunes baseline thresholds).
    Sweep(CommonArgs),
    /// Export per-slot transmit power for each sweep policy.
    PowerTrace(CommonArgs),
    /// Estimate (or reuse cached) channel statistics.
    Stats(CommonArgs),
    /// Grid-search a baseline threshold.
    GridSearch(GridSearchArgs),
    /// Run the validation suites and print a pass/fail table.
    Validate(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Configuration file (TOML); defaults to the built-in study setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; `SEMOTA_OUT_DIR` or `./out` when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for episode batches.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Config override `KEY=VALUE` with dotted paths (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GridBaseline {
    Aloha,
    Tdma,
}

#[derive(Debug, Args)]
struct GridSearchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which baseline threshold to tune.
    #[arg(long, value_enum, default_value = "aloha")]
    baseline: GridBaseline,
}

impl CommonArgs {
    fn load_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_path(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply_overrides(&self.overrides)?;
        if let Some(seed) = self.seed {
            cfg.run.master_seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(default_out_dir)
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn run() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::PowerTrace(args) => cmd_power_trace(args),
        Command::Stats(args) => cmd_stats(args),
        Command::GridSearch(args) => cmd_grid_search(args),
        Command::Validate(args) => return run_validate(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Channel statistics with the configured cache in front.
fn stats_with_cache(
    cfg: &ExperimentConfig,
    out_dir: &std::path::Path,
    suite: &crate::model::SensorSuite,
) -> Result<(ChannelStats, bool)> {
    let cache_path = match &cfg.stats.cache {
        Some(p) => PathBuf::from(p),
        None => out_dir.join("stats-cache.toml"),
    };
    let key = suite_cache_key(suite, cfg.sensors.n_r);
    if let Some(stats) =
        load_cached_stats(&cache_path, &key, cfg.stats.n_samples, cfg.stats_seed())?
    {
        return Ok((stats, true));
    }
    let model = cfg.plant_model()?;
    let stats = estimate_channel_stats(
        &model,
        suite,
        cfg.sensors.n_r,
        cfg.stats.n_samples,
        cfg.stats_seed(),
    )?;
    store_cached_stats(&cache_path, &key, &stats)?;
    Ok((stats, false))
}

fn cmd_simulate(args: &CommonArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = args.load_config()?;
    let out = args.out_dir();
    let model = cfg.plant_model()?;
    let suite = cfg.suite_for(cfg.sensors.m)?;
    let policy = PolicyRuntime::prepare(&cfg, cfg.run.policy, &model, &suite)?;
    let result = monte_carlo(&cfg, &model, &suite, &policy, args.jobs)?;

    let csv_path = out.join("slots.csv");
    write_slot_csv(&csv_path, &result)?;
    let mut manifest = Manifest::new("simulate", &cfg);
    if let Some(stats) = &policy.stats {
        manifest = manifest.with_stats(stats);
    }
    manifest.outputs = vec![csv_path.display().to_string()];
    manifest.wall_time_secs = started.elapsed().as_secs_f64();
    write_manifest(&out.join("manifest.toml"), &manifest)?;
    println!(
        "simulate: policy {} over K={} x {} episodes -> mean NMSE {:.6e}, mean power {:.6e}",
        cfg.run.policy.name(),
        cfg.run.horizon,
        result.episodes,
        result.mean_nmse,
        result.mean_power
    );
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn cmd_sweep(args: &CommonArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = args.load_config()?;
    let out = args.out_dir();
    let result = sweep_sensors(&cfg, &cfg.sweep.m_list, &cfg.sweep.policies, args.jobs)?;
    let csv_path = out.join("sweep.csv");
    write_sweep_csv(&csv_path, &result)?;
    let mut manifest = Manifest::new("sweep", &cfg);
    manifest.outputs = vec![csv_path.display().to_string()];
    manifest.wall_time_secs = started.elapsed().as_secs_f64();
    write_manifest(&out.join("manifest.toml"), &manifest)?;
    for row in &result.rows {
        println!(
            "M={:>2} {:>13}: NMSE {:.6e}  power {:.6e}",
            row.m,
            row.policy.name(),
            row.mean_nmse,
            row.mean_power
        );
    }
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn cmd_power_trace(args: &CommonArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = args.load_config()?;
    let out = args.out_dir();
    let results = power_trace(&cfg, &cfg.sweep.policies, args.jobs)?;
    let csv_path = out.join("power_trace.csv");
    write_power_trace_csv(&csv_path, &results)?;
    let mut manifest = Manifest::new("power-trace", &cfg);
    manifest.outputs = vec![csv_path.display().to_string()];
    manifest.wall_time_secs = started.elapsed().as_secs_f64();
    write_manifest(&out.join("manifest.toml"), &manifest)?;
    for (policy, result) in &results {
        println!(
            "{:>13}: horizon-mean power {:.6e}",
            policy.name(),
            result.mean_power
        );
    }
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn cmd_stats(args: &CommonArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = args.load_config()?;
    let out = args.out_dir();
    let suite = cfg.suite_for(cfg.sensors.m)?;
    let (stats, cached) = stats_with_cache(&cfg, &out, &suite)?;
    println!(
        "channel stats ({}): alpha_bar = {} (se {}), beta_bar = {} (se {}), n = {}, seed = {}",
        if cached { "cached" } else { "computed" },
        stats.alpha_bar,
        stats.alpha_se,
        stats.beta_bar,
        stats.beta_se,
        stats.n_samples,
        stats.seed
    );
    let mut manifest = Manifest::new("stats", &cfg).with_stats(&stats);
    manifest.wall_time_secs = started.elapsed().as_secs_f64();
    write_manifest(&out.join("manifest.toml"), &manifest)?;
    Ok(())
}

fn cmd_grid_search(args: &GridSearchArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = args.common.load_config()?;
    let out = args.common.out_dir();
    let model = cfg.plant_model()?;
    let suite = cfg.suite_for(cfg.sensors.m)?;
    let kind = match args.baseline {
        GridBaseline::Aloha => BaselineKind::Aloha,
        GridBaseline::Tdma => BaselineKind::Tdma,
    };
    let best = tune_threshold(&cfg, &model, &suite, kind, args.common.jobs)?;
    let mut manifest = Manifest::new("grid-search", &cfg);
    match kind {
        BaselineKind::Aloha => {
            println!("tuned sigma1 = {best}");
            manifest.tuned_sigma1 = Some(best);
        }
        _ => {
            println!("tuned sigma2 = {best}");
            manifest.tuned_sigma2 = Some(best);
        }
    }
    manifest.wall_time_secs = started.elapsed().as_secs_f64();
    write_manifest(&out.join("manifest.toml"), &manifest)?;
    Ok(())
}

fn run_validate(args: &CommonArgs) -> i32 {
    let cfg = match args.load_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let started = Instant::now();
    let reports = run_all(cfg.validate.quick);
    let mut failures = 0;
    println!("{:<26} {:<6} detail", "check", "status");
    for r in &reports {
        if !r.pass {
            failures += 1;
        }
        println!(
            "{:<26} {:<6} {}",
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    println!(
        "{} checks, {} failed, {:.1}s",
        reports.len(),
        failures,
        started.elapsed().as_secs_f64()
    );
    if failures > 0 {
        4
    } else {
        0
    }
}
