//! Plant, sensing, and wireless channel models.
//!
//! The plant follows a linear time-invariant recursion `x' = A x + w` with
//! Gaussian process noise. Each of `M` sensors observes `z_m = C_m x`
//! (noiseless sensing) and, when scheduled, transmits the raw measurement
//! through its own MIMO fading channel. Active transmissions superpose at
//! the receiver:
//!
//! ```text
//! y = sum_m delta_m * H_m * z_m + v,   v ~ N(0, I)
//! ```
//!
//! so the effective observation matrix seen by the estimator is the
//! aggregated channel `G = sum_m delta_m * Hbar_m` with `Hbar_m = H_m C_m`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::RngStream;

/// Whether sampled noise is applied or forced to zero.
///
/// `Zero` still consumes the same RNG draws as `Noisy`, so noiseless and
/// noisy runs of the same seed stay phase-aligned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    Noisy,
    Zero,
}

impl NoiseMode {
    fn apply(self, v: DVector<f64>) -> DVector<f64> {
        match self {
            NoiseMode::Noisy => v,
            NoiseMode::Zero => DVector::zeros(v.len()),
        }
    }
}

/// Linear plant `x' = A x + w`, `w ~ N(0, W)`.
#[derive(Debug, Clone)]
pub struct PlantModel {
    a: DMatrix<f64>,
    w: DMatrix<f64>,
}

impl PlantModel {
    /// Validates that `A` is square and `W` is symmetric positive definite
    /// of matching dimension.
    pub fn new(a: DMatrix<f64>, w: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::structural(format!(
                "plant matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if w.nrows() != a.nrows() || w.ncols() != a.ncols() {
            return Err(Error::structural(format!(
                "noise covariance must be {0}x{0}, got {1}x{2}",
                a.nrows(),
                w.nrows(),
                w.ncols()
            )));
        }
        if (&w - w.transpose()).norm() > 1e-10 * w.norm().max(1.0) {
            return Err(Error::structural("noise covariance must be symmetric"));
        }
        let (_, lo) = linalg::eig_extremes(&w);
        if lo <= 0.0 {
            return Err(Error::structural(format!(
                "noise covariance must be positive definite (min eigenvalue {lo:.3e})"
            )));
        }
        Ok(PlantModel { a, w })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// State dimension `S`.
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// The sensor fleet: observation matrices and their power cost.
///
/// `power_trace[m] = trace(C_m C_m^T)` is the transmit-power proxy charged
/// per activation; it is recomputed on construction.
#[derive(Debug, Clone)]
pub struct SensorSuite {
    c: Vec<DMatrix<f64>>,
    n_t: usize,
    state_dim: usize,
    power_trace: Vec<f64>,
}

impl SensorSuite {
    /// Builds a suite from observation matrices that must all share the same
    /// `N_t x S` shape.
    pub fn new(c: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = c
            .first()
            .ok_or_else(|| Error::structural("empty sensor list; use SensorSuite::empty"))?;
        let (n_t, state_dim) = (first.nrows(), first.ncols());
        for (m, cm) in c.iter().enumerate() {
            if cm.nrows() != n_t || cm.ncols() != state_dim {
                return Err(Error::structural(format!(
                    "sensor {m} has shape {}x{}, expected {n_t}x{state_dim}",
                    cm.nrows(),
                    cm.ncols()
                )));
            }
        }
        let power_trace = c.iter().map(|cm| (cm * cm.transpose()).trace()).collect();
        Ok(SensorSuite {
            c,
            n_t,
            state_dim,
            power_trace,
        })
    }

    /// A suite with zero sensors (degenerate but valid).
    pub fn empty(n_t: usize, state_dim: usize) -> Self {
        SensorSuite {
            c: Vec::new(),
            n_t,
            state_dim,
            power_trace: Vec::new(),
        }
    }

    /// Draws `m` observation matrices with iid standard-normal entries.
    pub fn random_gaussian(m: usize, n_t: usize, state_dim: usize, rng: &mut RngStream) -> Self {
        let c: Vec<DMatrix<f64>> = (0..m).map(|_| rng.normal_matrix(n_t, state_dim)).collect();
        if c.is_empty() {
            SensorSuite::empty(n_t, state_dim)
        } else {
            SensorSuite::new(c).expect("generated sensors share one shape")
        }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn observation(&self, m: usize) -> &DMatrix<f64> {
        &self.c[m]
    }

    pub fn observations(&self) -> &[DMatrix<f64>] {
        &self.c
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Per-sensor transmit-power proxy `trace(C_m C_m^T)`.
    pub fn power_trace(&self) -> &[f64] {
        &self.power_trace
    }

    pub fn total_power_trace(&self) -> f64 {
        self.power_trace.iter().sum()
    }
}

/// One slot's channel realization: raw fading matrices and the effective
/// channels `Hbar_m = H_m C_m`.
#[derive(Debug, Clone)]
pub struct ChannelDraw {
    h: Vec<DMatrix<f64>>,
    hbar: Vec<DMatrix<f64>>,
    n_r: usize,
}

impl ChannelDraw {
    /// Builds a draw from raw fading matrices; the effective channels are
    /// computed here so the `Hbar_m = H_m C_m` invariant holds by
    /// construction.
    pub fn from_fading(h: Vec<DMatrix<f64>>, suite: &SensorSuite, n_r: usize) -> Result<Self> {
        if h.len() != suite.len() {
            return Err(Error::structural(format!(
                "{} fading matrices for {} sensors",
                h.len(),
                suite.len()
            )));
        }
        for (m, hm) in h.iter().enumerate() {
            if hm.nrows() != n_r || hm.ncols() != suite.n_t() {
                return Err(Error::structural(format!(
                    "fading matrix {m} has shape {}x{}, expected {n_r}x{}",
                    hm.nrows(),
                    hm.ncols(),
                    suite.n_t()
                )));
            }
        }
        let hbar = h
            .iter()
            .zip(suite.observations())
            .map(|(hm, cm)| hm * cm)
            .collect();
        Ok(ChannelDraw { h, hbar, n_r })
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn fading(&self, m: usize) -> &DMatrix<f64> {
        &self.h[m]
    }

    /// Effective channel `Hbar_m = H_m C_m`.
    pub fn effective(&self, m: usize) -> &DMatrix<f64> {
        &self.hbar[m]
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    /// State dimension the effective channels map from.
    pub fn state_dim(&self) -> usize {
        self.hbar.first().map_or(0, |m| m.ncols())
    }
}

/// Binary activation vector produced by any scheduling policy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScheduleDecision {
    delta: Vec<bool>,
}

impl ScheduleDecision {
    pub fn new(delta: Vec<bool>) -> Self {
        ScheduleDecision { delta }
    }

    pub fn all_off(m: usize) -> Self {
        ScheduleDecision {
            delta: vec![false; m],
        }
    }

    pub fn all_on(m: usize) -> Self {
        ScheduleDecision {
            delta: vec![true; m],
        }
    }

    /// Decodes a bitmask; bit `m` (LSB first) activates sensor `m`.
    pub fn from_mask(mask: u32, m: usize) -> Self {
        ScheduleDecision {
            delta: (0..m).map(|i| mask >> i & 1 == 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn is_active(&self, m: usize) -> bool {
        self.delta[m]
    }

    pub fn set(&mut self, m: usize, on: bool) {
        self.delta[m] = on;
    }

    pub fn with_flipped(&self, m: usize) -> Self {
        let mut out = self.clone();
        out.delta[m] = !out.delta[m];
        out
    }

    pub fn count_active(&self) -> usize {
        self.delta.iter().filter(|&&d| d).count()
    }

    pub fn actives(&self) -> impl Iterator<Item = usize> + '_ {
        self.delta
            .iter()
            .enumerate()
            .filter_map(|(m, &d)| d.then_some(m))
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.delta
    }
}

impl std::fmt::Display for ScheduleDecision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &d in &self.delta {
            write!(f, "{}", if d { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// True plant state plus the slot index.
#[derive(Debug, Clone)]
pub struct SimState {
    pub x: DVector<f64>,
    pub k: u64,
}

impl SimState {
    pub fn new(x: DVector<f64>) -> Self {
        SimState { x, k: 0 }
    }
}

/// Advances the plant one slot: `x' = A x + w`, `k += 1`.
pub fn plant_step(
    state: &SimState,
    model: &PlantModel,
    rng: &mut RngStream,
    noise: NoiseMode,
) -> Result<SimState> {
    if state.x.len() != model.dim() {
        return Err(Error::structural(format!(
            "state has length {}, plant dimension is {}",
            state.x.len(),
            model.dim()
        )));
    }
    let w = noise.apply(sample_gaussian(model.w(), rng, "process noise")?);
    Ok(SimState {
        x: model.a() * &state.x + w,
        k: state.k + 1,
    })
}

/// Noiseless sensing `z = C_m x`.
pub fn sense(x: &DVector<f64>, c_m: &DMatrix<f64>) -> Result<DVector<f64>> {
    if c_m.ncols() != x.len() {
        return Err(Error::structural(format!(
            "observation matrix is {}x{} but state has length {}",
            c_m.nrows(),
            c_m.ncols(),
            x.len()
        )));
    }
    Ok(c_m * x)
}

/// Samples one slot of iid standard-normal fading for every sensor.
pub fn draw_channels(suite: &SensorSuite, n_r: usize, rng: &mut RngStream) -> ChannelDraw {
    assert!(n_r >= 1, "need at least one receive antenna");
    let h: Vec<DMatrix<f64>> = (0..suite.len())
        .map(|_| rng.normal_matrix(n_r, suite.n_t()))
        .collect();
    ChannelDraw::from_fading(h, suite, n_r).expect("drawn fading matches the suite")
}

/// Aggregated effective channel `G = sum_m delta_m Hbar_m` (`N_r x S`).
pub fn aggregated_channel(delta: &ScheduleDecision, draw: &ChannelDraw) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(draw.n_r(), draw.state_dim().max(1));
    if draw.is_empty() {
        return DMatrix::zeros(draw.n_r(), 0);
    }
    for m in delta.actives() {
        g += draw.effective(m);
    }
    g
}

/// Received superposition `y = sum_m delta_m H_m z_m + v` with `v ~ N(0, I)`.
pub fn aggregate_receive(
    x: &DVector<f64>,
    delta: &ScheduleDecision,
    draw: &ChannelDraw,
    suite: &SensorSuite,
    rng: &mut RngStream,
    noise: NoiseMode,
) -> Result<DVector<f64>> {
    if delta.len() != suite.len() || draw.len() != suite.len() {
        return Err(Error::structural(format!(
            "schedule has {} entries, draw {}, suite {}",
            delta.len(),
            draw.len(),
            suite.len()
        )));
    }
    let v = noise.apply(sample_gaussian(
        &DMatrix::identity(draw.n_r(), draw.n_r()),
        rng,
        "receiver noise",
    )?);
    let mut y = v;
    for m in delta.actives() {
        let z = sense(x, suite.observation(m))?;
        y += draw.fading(m) * z;
    }
    Ok(y)
}

/// Draws `N(0, cov)` by scaling iid standard normals with the Cholesky
/// factor of `cov`. Identity covariances skip the factorization.
fn sample_gaussian(cov: &DMatrix<f64>, rng: &mut RngStream, what: &str) -> Result<DVector<f64>> {
    let z = rng.normal_vector(cov.nrows());
    if cov == &DMatrix::identity(cov.nrows(), cov.ncols()) {
        return Ok(z);
    }
    let chol = linalg::cholesky_spd(cov, what)?;
    Ok(chol.l() * z)
}
