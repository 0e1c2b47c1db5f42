//! Sensor-scheduling policies built on the DP Q-function.
//!
//! Three layers live here:
//!
//! - [`gram`]: the PSD cone decomposition of the aggregated channel Gram
//!   matrix, the per-realization bound coefficients `alpha`/`beta`, their
//!   all-active expectations, and the covariance split used to verify the
//!   bound chain;
//! - [`qa`]: the closed-form upper bound `Q^a` on the Q-function and the
//!   SemOTA policy that minimizes it (exact enumeration or greedy
//!   coordinate descent);
//! - [`dp`]: the exact finite-horizon DP quantities (`Delta`, `Q`) with
//!   nested Monte-Carlo estimation, usable as an oracle on small
//!   instances.

mod dp;
mod gram;
mod qa;

pub use dp::{dp_delta, dp_optimal_schedule, q_value, MonteCarloConfig};
pub use gram::{
    appendix_split, estimate_channel_stats, gram_decompose, gram_decompose_matrix,
    AppendixSplit, DEFAULT_RANK_TOL,
};
pub use qa::{activation_margin, qa_value, semota_schedule, ScheduleMode};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ScheduleDecision;

/// Eigendecomposition of an aggregated-channel Gram matrix `G^T G`, with
/// eigenvalues sorted descending and a rank cut at a relative tolerance.
///
/// The orthogonal factor is stored row-wise: `G^T G = u^T diag(psi) u`.
#[derive(Debug, Clone)]
pub struct GramDecomposition {
    u: DMatrix<f64>,
    psi: Vec<f64>,
    rank: usize,
}

impl GramDecomposition {
    pub(crate) fn new(u: DMatrix<f64>, psi: Vec<f64>, rank: usize) -> Self {
        GramDecomposition { u, psi, rank }
    }

    /// Row-eigenvector matrix `U`.
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Eigenvalues, nonincreasing and nonnegative.
    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    /// Number of eigenvalues above the rank tolerance.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }

    /// Projector `Pi = diag(1, .., 1, 0, .., 0)` with `rank` ones.
    pub fn pi(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), self.dim(), |r, c| {
            if r == c && r < self.rank {
                1.0
            } else {
                0.0
            }
        })
    }

    /// `u^T diag(psi) u`, for reconstruction checks.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.psi.clone()));
        self.u.transpose() * diag * &self.u
    }
}

/// Monte-Carlo expectations of the bound coefficients under all-active
/// fading: `alpha_bar = E[alpha]`, `beta_bar = E[beta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub alpha_bar: f64,
    pub beta_bar: f64,
    pub alpha_se: f64,
    pub beta_se: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Per-slot scheduling context: horizon bookkeeping, the trade-off weight,
/// and the plant quantities the Q-function needs.
#[derive(Debug, Clone)]
pub struct HorizonContext {
    horizon: usize,
    slot: usize,
    pub gamma: f64,
    pub power_trace: Vec<f64>,
    pub tr_w: f64,
    a: DMatrix<f64>,
    a_norm_sq: f64,
}

impl HorizonContext {
    pub fn new(
        horizon: usize,
        slot: usize,
        gamma: f64,
        power_trace: Vec<f64>,
        tr_w: f64,
        a: DMatrix<f64>,
    ) -> Result<Self> {
        if horizon == 0 || slot >= horizon {
            return Err(Error::structural(format!(
                "slot {slot} outside horizon {horizon}"
            )));
        }
        if gamma < 0.0 {
            return Err(Error::structural("trade-off weight must be nonnegative"));
        }
        let a_norm_sq = linalg::spectral_norm_sq(&a);
        Ok(HorizonContext {
            horizon,
            slot,
            gamma,
            power_trace,
            tr_w,
            a,
            a_norm_sq,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    /// Move the context to another slot of the same horizon.
    pub fn set_slot(&mut self, slot: usize) -> Result<()> {
        if slot >= self.horizon {
            return Err(Error::structural(format!(
                "slot {slot} outside horizon {}",
                self.horizon
            )));
        }
        self.slot = slot;
        Ok(())
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Cached squared spectral norm of the plant matrix.
    pub fn a_norm_sq(&self) -> f64 {
        self.a_norm_sq
    }

    /// Slots remaining including the current one, `K - k`.
    pub fn remaining(&self) -> usize {
        self.horizon - self.slot
    }

    /// Power proxy charged by a schedule, `sum_m delta_m trace(C_m C_m^T)`.
    pub fn active_power(&self, delta: &ScheduleDecision) -> f64 {
        delta.actives().map(|m| self.power_trace[m]).sum()
    }

    pub fn total_power(&self) -> f64 {
        self.power_trace.iter().sum()
    }
}
