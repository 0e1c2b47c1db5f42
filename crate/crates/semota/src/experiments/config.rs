//! Experiment configuration: TOML schema, defaults, and overrides.
//!
//! One structured file describes a whole experiment: plant, sensor fleet,
//! run shape, channel-statistics sampling, baseline thresholds, sweep
//! grid, and DP sizing. Every field has a default, so an empty file (or no
//! file) is a valid three-state study setup. Command-line overrides take
//! dotted paths (`run.horizon=500`) and are applied onto the parsed tree;
//! unknown keys are rejected, not ignored.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PlantModel, SensorSuite};
use crate::rng::RngStream;

/// Default 3-state plant dynamics used by the bundled study setup.
pub fn default_plant_a() -> Vec<Vec<f64>> {
    vec![
        vec![1.04, 0.03, 0.01],
        vec![0.22, 0.48, 0.03],
        vec![0.021, 0.004, 0.78],
    ]
}

const DEFAULT_MASTER_SEED: u64 = 20260810;

/// Scheduling policy selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    SemotaExact,
    SemotaGreedy,
    DpOracle,
    Aloha,
    Tdma,
    Ota,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::SemotaExact => "semota-exact",
            PolicyKind::SemotaGreedy => "semota-greedy",
            PolicyKind::DpOracle => "dp-oracle",
            PolicyKind::Aloha => "aloha",
            PolicyKind::Tdma => "tdma",
            PolicyKind::Ota => "ota",
        }
    }

    pub fn needs_channel_stats(&self) -> bool {
        matches!(self, PolicyKind::SemotaExact | PolicyKind::SemotaGreedy)
    }
}

/// Source of the observation matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CSource {
    RandomGaussian,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantSection {
    /// Row-major plant matrix `A`.
    pub a: Vec<Vec<f64>>,
    /// Process-noise covariance `W`; identity when omitted.
    pub w: Option<Vec<Vec<f64>>>,
    /// Fixed initial state; drawn `N(0, I)` per episode when omitted.
    pub x0: Option<Vec<f64>>,
    /// Initial estimate; zero vector when omitted.
    pub xhat0: Option<Vec<f64>>,
    /// Initial covariance; identity when omitted.
    pub sigma0: Option<Vec<Vec<f64>>>,
}

impl Default for PlantSection {
    fn default() -> Self {
        PlantSection {
            a: default_plant_a(),
            w: None,
            x0: None,
            xhat0: None,
            sigma0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSection {
    pub m: usize,
    pub n_t: usize,
    pub n_r: usize,
    pub c_source: CSource,
    /// Explicit observation matrices (row-major), required when
    /// `c_source = "explicit"`.
    pub c: Option<Vec<Vec<Vec<f64>>>>,
}

impl Default for SensorSection {
    fn default() -> Self {
        SensorSection {
            m: 8,
            n_t: 2,
            n_r: 2,
            c_source: CSource::RandomGaussian,
            c: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub horizon: usize,
    pub gamma: f64,
    pub runs: usize,
    pub master_seed: u64,
    pub policy: PolicyKind,
    /// Force `w = v = 0` without changing RNG consumption.
    pub zero_noise: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            horizon: 200,
            gamma: 0.4,
            runs: 50,
            master_seed: DEFAULT_MASTER_SEED,
            policy: PolicyKind::SemotaGreedy,
            zero_noise: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsSection {
    pub n_samples: usize,
    /// Seed for the channel-statistics stream; `run.master_seed` when
    /// omitted.
    pub seed: Option<u64>,
    /// Cache file reused across invocations; keyed by suite hash, receive
    /// antennas, sample count, and seed.
    pub cache: Option<String>,
}

impl Default for StatsSection {
    fn default() -> Self {
        StatsSection {
            n_samples: 10_000,
            seed: None,
            cache: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub sigma1: f64,
    pub sigma2: f64,
    pub aloha_tx_prob: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection {
            sigma1: 3.0,
            sigma2: 3.0,
            aloha_tx_prob: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub m_list: Vec<usize>,
    pub policies: Vec<PolicyKind>,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_step: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            m_list: vec![2, 4, 6, 8],
            policies: vec![
                PolicyKind::SemotaGreedy,
                PolicyKind::Aloha,
                PolicyKind::Tdma,
                PolicyKind::Ota,
            ],
            grid_lo: 1.0,
            grid_hi: 10.0,
            grid_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpSection {
    pub n_mc: usize,
    pub budget: f64,
    pub exhaustive_cap: usize,
    /// Greedy flip cap as a multiple of the fleet size.
    pub greedy_sweep_factor: usize,
}

impl Default for DpSection {
    fn default() -> Self {
        DpSection {
            n_mc: 64,
            budget: 1e7,
            exhaustive_cap: 15,
            greedy_sweep_factor: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    pub quick: bool,
}

/// Complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub plant: PlantSection,
    pub sensors: SensorSection,
    pub run: RunSection,
    pub stats: StatsSection,
    pub baseline: BaselineSection,
    pub sweep: SweepSection,
    pub dp: DpSection,
    pub validate: ValidateSection,
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::config(format!("{what}: empty matrix")));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::config(format!("{what}: ragged or empty rows")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(nrows, ncols, &flat))
}

impl ExperimentConfig {
    /// Parses a TOML file, rejecting unknown keys.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `KEY=VALUE` overrides with dotted paths onto the config.
    ///
    /// The parent path must already exist; the final key is validated by
    /// re-parsing the whole tree, so typos are rejected rather than
    /// silently ignored.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        if overrides.is_empty() {
            return Ok(());
        }
        let mut tree = toml::Value::try_from(&*self)
            .map_err(|e| Error::config(format!("config serialization: {e}")))?;
        for item in overrides {
            let (path, raw) = item.split_once('=').ok_or_else(|| {
                Error::config(format!("override '{item}' is not KEY=VALUE"))
            })?;
            let segments: Vec<&str> = path.split('.').collect();
            if segments.iter().any(|s| s.is_empty()) {
                return Err(Error::config(format!("override key '{path}' is malformed")));
            }
            let mut node = &mut tree;
            for seg in &segments[..segments.len() - 1] {
                node = node
                    .as_table_mut()
                    .and_then(|t| t.get_mut(*seg))
                    .ok_or_else(|| Error::config(format!("unknown config key '{path}'")))?;
            }
            let table = node
                .as_table_mut()
                .ok_or_else(|| Error::config(format!("'{path}' does not address a field")))?;
            let last = segments[segments.len() - 1];
            let parsed = parse_override_value(raw, table.get(last));
            table.insert(last.to_string(), parsed);
        }
        *self = tree
            .try_into()
            .map_err(|e| Error::config(format!("override rejected: {e}")))?;
        Ok(())
    }

    /// Structural validation beyond what parsing enforces.
    pub fn validate(&self) -> Result<()> {
        if self.run.horizon == 0 {
            return Err(Error::config("run.horizon must be at least 1"));
        }
        if self.run.runs == 0 {
            return Err(Error::config("run.runs must be at least 1"));
        }
        if self.sensors.m == 0 {
            return Err(Error::config("sensors.m must be at least 1"));
        }
        if self.sensors.n_t == 0 || self.sensors.n_r == 0 {
            return Err(Error::config("antenna counts must be positive"));
        }
        if self.run.gamma < 0.0 {
            return Err(Error::config("run.gamma must be nonnegative"));
        }
        if !(self.baseline.aloha_tx_prob > 0.0 && self.baseline.aloha_tx_prob <= 1.0) {
            return Err(Error::config("baseline.aloha_tx_prob must lie in (0, 1]"));
        }
        if self.baseline.sigma1 < 0.0 || self.baseline.sigma2 < 0.0 {
            return Err(Error::config("baseline thresholds must be nonnegative"));
        }
        if self.sensors.c_source == CSource::Explicit && self.sensors.c.is_none() {
            return Err(Error::config(
                "sensors.c_source = \"explicit\" requires sensors.c",
            ));
        }
        if self.sweep.m_list.iter().any(|&m| m == 0) {
            return Err(Error::config("sweep.m_list entries must be positive"));
        }
        self.plant_model()?;
        self.suite_for(self.sensors.m)?;
        Ok(())
    }

    /// Builds the plant model from the config.
    pub fn plant_model(&self) -> Result<PlantModel> {
        let a = matrix_from_rows(&self.plant.a, "plant.a")?;
        let s = a.nrows();
        let w = match &self.plant.w {
            Some(rows) => matrix_from_rows(rows, "plant.w")?,
            None => DMatrix::identity(s, s),
        };
        PlantModel::new(a, w).map_err(|e| Error::config(e.to_string()))
    }

    /// State dimension implied by the plant matrix.
    pub fn state_dim(&self) -> usize {
        self.plant.a.len()
    }

    /// The sensor fleet for a sweep point with `m` sensors.
    ///
    /// Random fleets are derived from `(master_seed, m)` only, so every
    /// policy compared at the same fleet size sees identical sensors.
    pub fn suite_for(&self, m: usize) -> Result<SensorSuite> {
        match self.sensors.c_source {
            CSource::Explicit => {
                let rows = self.sensors.c.as_ref().ok_or_else(|| {
                    Error::config("sensors.c_source = \"explicit\" requires sensors.c")
                })?;
                if rows.len() != m {
                    return Err(Error::config(format!(
                        "explicit sensor list has {} matrices, need {m}",
                        rows.len()
                    )));
                }
                let mats = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        let mat = matrix_from_rows(r, &format!("sensors.c[{i}]"))?;
                        if mat.nrows() != self.sensors.n_t || mat.ncols() != self.state_dim() {
                            return Err(Error::config(format!(
                                "sensors.c[{i}] is {}x{}, expected {}x{}",
                                mat.nrows(),
                                mat.ncols(),
                                self.sensors.n_t,
                                self.state_dim()
                            )));
                        }
                        Ok(mat)
                    })
                    .collect::<Result<Vec<_>>>()?;
                SensorSuite::new(mats).map_err(|e| Error::config(e.to_string()))
            }
            CSource::RandomGaussian => {
                let mut rng =
                    RngStream::new(self.run.master_seed, &format!("sensors/M{m}"));
                Ok(SensorSuite::random_gaussian(
                    m,
                    self.sensors.n_t,
                    self.state_dim(),
                    &mut rng,
                ))
            }
        }
    }

    pub fn stats_seed(&self) -> u64 {
        self.stats.seed.unwrap_or(self.run.master_seed)
    }

    pub fn initial_estimate(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let s = self.state_dim();
        let xhat0 = match &self.plant.xhat0 {
            Some(v) => {
                if v.len() != s {
                    return Err(Error::config(format!(
                        "plant.xhat0 has length {}, expected {s}",
                        v.len()
                    )));
                }
                DVector::from_vec(v.clone())
            }
            None => DVector::zeros(s),
        };
        let sigma0 = match &self.plant.sigma0 {
            Some(rows) => matrix_from_rows(rows, "plant.sigma0")?,
            None => DMatrix::identity(s, s),
        };
        Ok((xhat0, sigma0))
    }

    pub fn fixed_x0(&self) -> Result<Option<DVector<f64>>> {
        match &self.plant.x0 {
            None => Ok(None),
            Some(v) => {
                if v.len() != self.state_dim() {
                    return Err(Error::config(format!(
                        "plant.x0 has length {}, expected {}",
                        v.len(),
                        self.state_dim()
                    )));
                }
                Ok(Some(DVector::from_vec(v.clone())))
            }
        }
    }
}

/// Parses an override value, matching the type of the existing entry where
/// one exists (so `gamma=1` lands as a float when the field is a float).
fn parse_override_value(raw: &str, existing: Option<&toml::Value>) -> toml::Value {
    let parsed = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    coerce_like(parsed, existing)
}

fn coerce_like(value: toml::Value, existing: Option<&toml::Value>) -> toml::Value {
    match (&value, existing) {
        (toml::Value::Integer(i), Some(toml::Value::Float(_))) => toml::Value::Float(*i as f64),
        (toml::Value::Array(items), Some(toml::Value::Array(model))) => {
            let template = model.first();
            toml::Value::Array(
                items
                    .iter()
                    .map(|v| coerce_like(v.clone(), template))
                    .collect(),
            )
        }
        _ => value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(back.sensors.m, 8);
        assert_eq!(back.run.gamma, 0.4);
        assert_eq!(back.plant.a, default_plant_a());
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let err = ExperimentConfig::from_toml_str("[run]\nhorizons = 10\n");
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn overrides_apply_and_coerce() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_overrides(&[
            "run.horizon=25".into(),
            "run.gamma=1".into(), // integer literal onto a float field
            "run.policy=ota".into(),
            "baseline.sigma1=2.5".into(),
        ])
        .unwrap();
        assert_eq!(cfg.run.horizon, 25);
        assert_eq!(cfg.run.gamma, 1.0);
        assert_eq!(cfg.run.policy, PolicyKind::Ota);
        assert_eq!(cfg.baseline.sigma1, 2.5);
    }

    #[test]
    fn override_can_set_an_optional_field() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_overrides(&["plant.x0=[1.0, 0.0, 0.0]".into(), "stats.seed=7".into()])
            .unwrap();
        assert_eq!(cfg.plant.x0, Some(vec![1.0, 0.0, 0.0]));
        assert_eq!(cfg.stats.seed, Some(7));
    }

    #[test]
    fn unknown_override_keys_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        let err = cfg.apply_overrides(&["run.horizzon=10".into()]);
        assert!(matches!(err, Err(Error::Config(_))), "{err:?}");
        let err = cfg.apply_overrides(&["nosuch.key=1".into()]);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn random_fleet_depends_only_on_seed_and_size() {
        let mut a = ExperimentConfig::default();
        let mut b = ExperimentConfig::default();
        a.run.policy = PolicyKind::Ota;
        b.run.policy = PolicyKind::Aloha;
        b.run.horizon = 17;
        let sa = a.suite_for(4).unwrap();
        let sb = b.suite_for(4).unwrap();
        for m in 0..4 {
            assert_eq!(sa.observation(m), sb.observation(m));
        }
        // Different fleet size gives different sensors.
        let sc = a.suite_for(5).unwrap();
        assert_ne!(sa.observation(0), sc.observation(0));
    }

    #[test]
    fn explicit_sensors_are_checked() {
        let mut cfg = ExperimentConfig::default();
        cfg.sensors.m = 1;
        cfg.sensors.c_source = CSource::Explicit;
        assert!(cfg.validate().is_err());
        cfg.sensors.c = Some(vec![vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]]);
        cfg.validate().unwrap();
        let suite = cfg.suite_for(1).unwrap();
        assert_eq!(suite.n_t(), 2);
        assert_eq!(suite.state_dim(), 3);
    }
}
