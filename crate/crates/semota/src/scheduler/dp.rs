//! Exact finite-horizon DP quantities, estimated by nested Monte Carlo.
//!
//! The Q-function of a state-action pair `(Sigma_k, H_k, delta_k)` is
//!
//! ```text
//! Q_k = Tr(Sigma_k) + gamma * p(delta_k) + Tr f(M_k) + (K-k) Tr(W)
//!     + Delta_k(M_k) * 1{k <= K-2}
//! ```
//!
//! where the future-cost correction satisfies `Delta_{K-1} = 0` and
//!
//! ```text
//! Delta_k = E[ min_{delta'} ( gamma * p(delta')
//!            + Tr f(f(M_k) + W, delta', H')
//!            + Delta_{k+1}(f(M_k) + W, delta', H') ) | M_k ].
//! ```
//!
//! Each expectation is sampled with `n_mc` channel draws and each minimum
//! enumerates all `2^M` next actions, so the work grows like
//! `(2^M n_mc)^(K-k-1)`; instances above the configured budget are refused
//! up front. Channel samples are derived from position-independent stream
//! labels shared across candidate actions (common random numbers), which
//! keeps action comparisons low-variance and the whole recursion
//! deterministic for a given stream.
//!
//! This is an oracle for validating the closed-form bound on small
//! instances, not a production scheduling path.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimator::{riccati_map, riccati_trace};
use crate::linalg;
use crate::model::{draw_channels, ChannelDraw, PlantModel, ScheduleDecision, SensorSuite};
use crate::rng::RngStream;

use super::HorizonContext;

/// Sampling and sizing knobs for the DP recursion.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarloConfig {
    /// Channel samples per expectation level.
    pub n_mc: usize,
    /// Maximum admissible `(2^M n_mc)^(K-k-1)` leaf evaluations.
    pub budget: f64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            n_mc: 64,
            budget: 1e7,
        }
    }
}

fn guard_budget(m: usize, mc: &MonteCarloConfig, levels: usize) -> Result<()> {
    let per_level = (1u64 << m) as f64 * mc.n_mc as f64;
    let work = per_level.powi(levels as i32);
    if !work.is_finite() || work > mc.budget {
        return Err(Error::Budget(format!(
            "DP recursion needs ({per_level})^{levels} leaf evaluations, budget is {}",
            mc.budget
        )));
    }
    Ok(())
}

/// Monte-Carlo estimate of the future-cost correction `Delta_k(M_k)`.
///
/// Returns exactly zero at the terminal decision slot.
pub fn dp_delta(
    sigma: &DMatrix<f64>,
    delta: &ScheduleDecision,
    draw: &ChannelDraw,
    model: &PlantModel,
    suite: &SensorSuite,
    ctx: &HorizonContext,
    mc: &MonteCarloConfig,
    rng: &RngStream,
) -> Result<f64> {
    let samples = dp_delta_samples(sigma, delta, draw, model, suite, ctx, mc, rng)?;
    if samples.is_empty() {
        return Ok(0.0);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// The per-sample values behind [`dp_delta`]; empty at the terminal slot.
#[allow(clippy::too_many_arguments)]
pub(crate) fn dp_delta_samples(
    sigma: &DMatrix<f64>,
    delta: &ScheduleDecision,
    draw: &ChannelDraw,
    model: &PlantModel,
    suite: &SensorSuite,
    ctx: &HorizonContext,
    mc: &MonteCarloConfig,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    let levels = ctx.remaining() - 1;
    guard_budget(suite.len(), mc, levels)?;
    if levels == 0 {
        return Ok(Vec::new());
    }
    let sigma_next = linalg::symmetrize(&(riccati_map(sigma, delta, draw, model)? + model.w()));
    expected_min_to_go(
        &sigma_next,
        ctx.slot() + 1,
        draw.n_r(),
        model,
        suite,
        ctx,
        mc,
        rng,
        "",
    )
}

/// Samples of `min_{delta'} [gamma p(delta') + Tr f(Sigma', delta', H')
/// + Delta_{slot}(...)]` over `n_mc` draws of `H'`.
#[allow(clippy::too_many_arguments)]
fn expected_min_to_go(
    sigma_prior: &DMatrix<f64>,
    slot: usize,
    n_r: usize,
    model: &PlantModel,
    suite: &SensorSuite,
    ctx: &HorizonContext,
    mc: &MonteCarloConfig,
    rng: &RngStream,
    path: &str,
) -> Result<Vec<f64>> {
    let m = suite.len();
    let horizon = ctx.horizon();
    let mut out = Vec::with_capacity(mc.n_mc);
    for j in 0..mc.n_mc {
        // The label carries the sample path but never the action, so every
        // candidate action sees the same future channels.
        let label = format!("{path}s{j}");
        let hdraw = draw_channels(suite, n_r, &mut rng.derive(&label));
        let mut best = f64::INFINITY;
        for mask in 0..(1u64 << m) {
            let action = ScheduleDecision::from_mask(mask as u32, m);
            let mut value = ctx.gamma * ctx.active_power(&action)
                + riccati_trace(sigma_prior, &action, &hdraw, model)?;
            if slot + 1 < horizon {
                let sigma_next = linalg::symmetrize(
                    &(riccati_map(sigma_prior, &action, &hdraw, model)? + model.w()),
                );
                let sub = expected_min_to_go(
                    &sigma_next,
                    slot + 1,
                    n_r,
                    model,
                    suite,
                    ctx,
                    mc,
                    rng,
                    &format!("{label}/"),
                )?;
                value += sub.iter().sum::<f64>() / sub.len() as f64;
            }
            if value < best {
                best = value;
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// A Q-function estimate with the standard error of its Monte-Carlo part.
#[derive(Debug, Clone, Copy)]
pub struct QValue {
    pub value: f64,
    pub std_err: f64,
}

/// The exact Q-function value of `(Sigma, H, delta)` at the context slot,
/// with Monte-Carlo `Delta` and its top-level standard error.
#[allow(clippy::too_many_arguments)]
pub fn q_value(
    sigma: &DMatrix<f64>,
    delta: &ScheduleDecision,
    draw: &ChannelDraw,
    model: &PlantModel,
    suite: &SensorSuite,
    ctx: &HorizonContext,
    mc: &MonteCarloConfig,
    rng: &RngStream,
) -> Result<QValue> {
    let base = sigma.trace()
        + ctx.gamma * ctx.active_power(delta)
        + riccati_trace(sigma, delta, draw, model)?
        + ctx.remaining() as f64 * ctx.tr_w;
    let samples = dp_delta_samples(sigma, delta, draw, model, suite, ctx, mc, rng)?;
    if samples.is_empty() {
        return Ok(QValue {
            value: base,
            std_err: 0.0,
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std_err = if samples.len() < 2 {
        0.0
    } else {
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    Ok(QValue {
        value: base + mean,
        std_err,
    })
}

/// Enumerates all actions and returns the Q-minimizing schedule.
///
/// Ties favor fewer active sensors, then the lexicographically smallest
/// vector.
pub fn dp_optimal_schedule(
    sigma: &DMatrix<f64>,
    draw: &ChannelDraw,
    model: &PlantModel,
    suite: &SensorSuite,
    ctx: &HorizonContext,
    mc: &MonteCarloConfig,
    rng: &RngStream,
) -> Result<ScheduleDecision> {
    let m = suite.len();
    guard_budget(m, mc, ctx.remaining() - 1)?;
    let mut best: Option<(f64, usize, ScheduleDecision)> = None;
    for mask in 0..(1u64 << m) {
        let delta = ScheduleDecision::from_mask(mask as u32, m);
        let q = q_value(sigma, &delta, draw, model, suite, ctx, mc, rng)?;
        let candidate = (q.value, delta.count_active(), delta);
        let better = match &best {
            None => true,
            Some((bv, bc, bd)) => {
                candidate.0 < *bv
                    || (candidate.0 == *bv && (candidate.1, &candidate.2) < (*bc, bd))
            }
        };
        if better {
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least the empty action").2)
}
