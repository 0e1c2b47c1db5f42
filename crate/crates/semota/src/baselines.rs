//! Comparison policies: measurement-threshold ALOHA, covariance-threshold
//! random TDMA, and always-on OTA, plus the threshold grid search.
//!
//! ALOHA uses the classical slotted model: every sensor whose measurement
//! norm passes the threshold transmits independently with the configured
//! probability; two or more simultaneous transmissions collide, the slot
//! delivers nothing to the estimator, and every transmitter still pays its
//! power. TDMA picks one sensor uniformly whenever the prior covariance
//! norm passes its threshold, so the estimator never sees a superposed
//! multi-sensor signal under either baseline.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ScheduleDecision;
use crate::rng::RngStream;

/// Which baseline a configuration block describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Aloha,
    Tdma,
    Ota,
}

/// Thresholds and transmission probability for the baselines.
#[derive(Debug, Clone)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    /// Measurement-norm threshold for ALOHA eligibility.
    pub sigma1: f64,
    /// Covariance-spectral-norm threshold for TDMA triggering.
    pub sigma2: f64,
    /// Per-eligible-sensor transmit probability for ALOHA.
    pub aloha_tx_prob: f64,
}

impl BaselineConfig {
    pub fn new(kind: BaselineKind, sigma1: f64, sigma2: f64, aloha_tx_prob: f64) -> Result<Self> {
        if sigma1 < 0.0 || sigma2 < 0.0 {
            return Err(Error::config("baseline thresholds must be nonnegative"));
        }
        if !(aloha_tx_prob > 0.0 && aloha_tx_prob <= 1.0) {
            return Err(Error::config(format!(
                "ALOHA transmit probability must lie in (0, 1], got {aloha_tx_prob}"
            )));
        }
        Ok(BaselineConfig {
            kind,
            sigma1,
            sigma2,
            aloha_tx_prob,
        })
    }
}

/// Slotted-ALOHA decision from the sensors' current measurements.
///
/// Returns the transmitting set and whether the slot collided. On a
/// collision the estimator must skip its measurement update while the
/// transmitters' power is still charged.
pub fn aloha_schedule(
    z_all: &[DVector<f64>],
    cfg: &BaselineConfig,
    rng: &mut RngStream,
) -> Result<(ScheduleDecision, bool)> {
    if cfg.kind != BaselineKind::Aloha {
        return Err(Error::config("aloha_schedule needs an aloha configuration"));
    }
    let m = z_all.len();
    let mut delta = ScheduleDecision::all_off(m);
    let mut transmitters = 0usize;
    for (i, z) in z_all.iter().enumerate() {
        // Only eligible sensors flip a transmission coin.
        let eligible = z.norm() >= cfg.sigma1;
        if eligible && rng.bernoulli(cfg.aloha_tx_prob) {
            delta.set(i, true);
            transmitters += 1;
        }
    }
    Ok((delta, transmitters >= 2))
}

/// Random-TDMA decision from the prior covariance.
pub fn tdma_schedule(
    sigma: &DMatrix<f64>,
    cfg: &BaselineConfig,
    m: usize,
    rng: &mut RngStream,
) -> Result<ScheduleDecision> {
    if cfg.kind != BaselineKind::Tdma {
        return Err(Error::config("tdma_schedule needs a tdma configuration"));
    }
    let mut delta = ScheduleDecision::all_off(m);
    if m == 0 {
        return Ok(delta);
    }
    if linalg::spectral_norm(sigma) >= cfg.sigma2 {
        delta.set(rng.index(m), true);
    }
    Ok(delta)
}

/// Conventional OTA: everyone transmits, every slot.
pub fn ota_schedule(m: usize) -> ScheduleDecision {
    ScheduleDecision::all_on(m)
}

/// Grid search over `[lo, hi]` with the given step, minimizing `eval`.
///
/// Ties go to the smaller threshold. Fails if the objective is non-finite
/// at every grid point.
pub fn grid_search_threshold(
    lo: f64,
    hi: f64,
    step: f64,
    mut eval: impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    if !(step > 0.0) || lo > hi {
        return Err(Error::config(format!(
            "invalid grid: [{lo}, {hi}] step {step}"
        )));
    }
    let mut best: Option<(f64, f64)> = None;
    let mut i = 0u64;
    loop {
        let point = lo + i as f64 * step;
        if point > hi + 1e-9 * step {
            break;
        }
        let value = eval(point)?;
        if value.is_finite() {
            let better = match best {
                None => true,
                Some((bv, _)) => value < bv,
            };
            if better {
                best = Some((value, point));
            }
        }
        i += 1;
    }
    best.map(|(_, point)| point).ok_or_else(|| {
        Error::Search(format!(
            "objective non-finite at every grid point in [{lo}, {hi}]"
        ))
    })
}
