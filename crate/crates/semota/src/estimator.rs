//! Kalman filtering with over-the-air aggregated measurements.
//!
//! The estimator sees one fused measurement per slot, `y = G x + v` with
//! `G` the aggregated effective channel and unit receiver noise. The
//! covariance update uses the Joseph form
//!
//! ```text
//! Sigma_post = (I - K G) Sigma (I - K G)^T + K K^T
//! ```
//!
//! which preserves positive semidefiniteness; every produced covariance is
//! additionally symmetrized and passed through a relative eigenvalue floor
//! to keep floating-point drift from accumulating. The one-step
//! predicted-covariance operator (the Riccati map) is the information form
//! `f(Sigma, delta, H) = A (Sigma^{-1} + G^T G)^{-1} A^T`, which requires a
//! positive definite input; after any prediction `Sigma >= W > 0` so that
//! precondition holds along filter trajectories.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{aggregated_channel, ChannelDraw, PlantModel, ScheduleDecision};

/// Relative floor below which a covariance counts as singular for the
/// information-form operations.
const SINGULAR_REL_TOL: f64 = 1e-12;

/// Maximum tolerated relative residual of the gain solve.
const GAIN_RESIDUAL_TOL: f64 = 1e-6;

/// Prior and posterior estimate/covariance pairs for one slot.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    pub x_prior: DVector<f64>,
    pub sigma_prior: DMatrix<f64>,
    pub x_post: DVector<f64>,
    pub sigma_post: DMatrix<f64>,
}

impl EstimatorState {
    /// Initializes both pairs from the starting prior `(x0_hat, sigma0)`.
    pub fn init(x0_hat: DVector<f64>, sigma0: DMatrix<f64>) -> Result<Self> {
        let sigma0 = linalg::enforce_psd(&sigma0, "initial covariance")?;
        if sigma0.nrows() != x0_hat.len() {
            return Err(Error::structural(format!(
                "initial covariance is {}x{} but estimate has length {}",
                sigma0.nrows(),
                sigma0.ncols(),
                x0_hat.len()
            )));
        }
        Ok(EstimatorState {
            x_prior: x0_hat.clone(),
            sigma_prior: sigma0.clone(),
            x_post: x0_hat,
            sigma_post: sigma0,
        })
    }

    pub fn dim(&self) -> usize {
        self.x_prior.len()
    }
}

/// Time update: `x_prior = A x_post`, `Sigma_prior = A Sigma_post A^T + W`.
pub fn predict(est: &EstimatorState, model: &PlantModel) -> Result<EstimatorState> {
    if est.dim() != model.dim() {
        return Err(Error::structural(format!(
            "estimator dimension {} does not match plant dimension {}",
            est.dim(),
            model.dim()
        )));
    }
    let a = model.a();
    let sigma_prior = linalg::enforce_psd(
        &(a * &est.sigma_post * a.transpose() + model.w()),
        "predicted covariance",
    )?;
    Ok(EstimatorState {
        x_prior: a * &est.x_post,
        sigma_prior,
        x_post: est.x_post.clone(),
        sigma_post: est.sigma_post.clone(),
    })
}

/// Kalman gain `K = Sigma G^T (G Sigma G^T + I)^{-1}`.
///
/// The innovation covariance is at least the identity, so the solve cannot
/// be singular; a residual above [`GAIN_RESIDUAL_TOL`] is reported as a
/// numerical failure instead.
pub fn kalman_gain(
    sigma: &DMatrix<f64>,
    delta: &ScheduleDecision,
    draw: &ChannelDraw,
) -> Result<DMatrix<f64>> {
    let g = aggregated_channel(delta, draw);
    gain_for_channel(sigma, &g, draw.n_r())
}

fn gain_for_channel(sigma: &DMatrix<f64>, g: &DMatrix<f64>, n_r: usize) -> Result<DMatrix<f64>> {
    let s = sigma.nrows();
    if g.ncols() != s && !g.is_empty() {
        return Err(Error::structural(format!(
            "aggregated channel maps {} states, covariance is {s}x{s}",
            g.ncols()
        )));
    }
    if g.is_empty() {
        return Ok(DMatrix::zeros(s, n_r));
    }
    let innovation = g * sigma * g.transpose() + DMatrix::identity(n_r, n_r);
    let chol = linalg::cholesky_spd(&innovation, "innovation covariance")?;
    // K^T solves (G Sigma G^T + I) K^T = G Sigma.
    let rhs = g * sigma;
    let kt = chol.solve(&rhs);
    let residual = (&innovation * &kt - &rhs).norm();
    if residual > GAIN_RESIDUAL_TOL * rhs.norm().max(1.0) {
        return Err(Error::numerical(format!(
            "gain solve residual {residual:.3e} exceeds tolerance"
        )));
    }
    Ok(kt.transpose())
}

/// Measurement update with the received vector `y`.
///
/// `x_post = x_prior + K (y - G x_prior)` and the Joseph-form covariance.
pub fn update(
    est: &EstimatorState,
    y: &DVector<f64>,
    delta: &ScheduleDecision,
    draw: &ChannelDraw,
) -> Result<EstimatorState> {
    if y.len() != draw.n_r() {
        return Err(Error::structural(format!(
            "received vector has length {}, expected {}",
            y.len(),
            draw.n_r()
        )));
    }
    let s = est.dim();
    let g = aggregated_channel(delta, draw);
    if g.is_empty() || delta.count_active() == 0 {
        // No measurement: the posterior is the prior.
        return Ok(EstimatorState {
            x_prior: est.x_prior.clone(),
            sigma_prior: est.sigma_prior.clone(),
            x_post: est.x_prior.clone(),
            sigma_post: est.sigma_prior.clone(),
        });
    }
    let k = gain_for_channel(&est.sigma_prior, &g, draw.n_r())?;
    let innovation = y - &g * &est.x_prior;
    let x_post = &est.x_prior + &k * innovation;
    let ikg = DMatrix::identity(s, s) - &k * &g;
    let sigma_post = linalg::enforce_psd(
        &(&ikg * &est.sigma_prior * ikg.transpose() + &k * k.transpose()),
        "posterior covariance",
    )?;
    Ok(EstimatorState {
        x_prior: est.x_prior.clone(),
        sigma_prior: est.sigma_prior.clone(),
        x_post,
        sigma_post,
    })
}

/// One-step predicted-covariance operator
/// `f(Sigma, delta, H) = A (Sigma^{-1} + G^T G)^{-1} A^T`.
///
/// `Sigma` must be positive definite; callers propagate covariances of the
/// form `f(..) + W`, which always are.
pub fn riccati_map(
    sigma: &DMatrix<f64>,
    delta: &ScheduleDecision,
    draw: &ChannelDraw,
    model: &PlantModel,
) -> Result<DMatrix<f64>> {
    let posterior = information_update(sigma, delta, draw)?;
    let a = model.a();
    Ok(linalg::symmetrize(&(a * posterior * a.transpose())))
}

/// Trace of [`riccati_map`] without materializing the outer product.
pub fn riccati_trace(
    sigma: &DMatrix<f64>,
    delta: &ScheduleDecision,
    draw: &ChannelDraw,
    model: &PlantModel,
) -> Result<f64> {
    let posterior = information_update(sigma, delta, draw)?;
    let a = model.a();
    Ok((a.transpose() * a * posterior).trace())
}

/// Information-form posterior `(Sigma^{-1} + G^T G)^{-1}`.
///
/// Independent route to the Joseph-form posterior of [`update`]; the two
/// must agree whenever `Sigma` is positive definite.
pub fn information_update(
    sigma: &DMatrix<f64>,
    delta: &ScheduleDecision,
    draw: &ChannelDraw,
) -> Result<DMatrix<f64>> {
    let (hi, lo) = linalg::eig_extremes(sigma);
    if lo <= SINGULAR_REL_TOL * hi.max(0.0) || hi <= 0.0 {
        return Err(Error::structural(format!(
            "covariance is singular (eigenvalues in [{lo:.3e}, {hi:.3e}]); add process noise first"
        )));
    }
    let sigma_inv = linalg::spd_inverse(sigma, "prior covariance")?;
    let g = aggregated_channel(delta, draw);
    let info = if g.is_empty() {
        sigma_inv
    } else {
        sigma_inv + g.transpose() * &g
    };
    let posterior = linalg::spd_inverse(&linalg::symmetrize(&info), "information matrix")?;
    Ok(linalg::symmetrize(&posterior))
}
