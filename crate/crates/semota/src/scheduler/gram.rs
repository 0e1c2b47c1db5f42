//! PSD cone decomposition of the aggregated channel and the derived bound
//! coefficients.
//!
//! For a schedule `delta` and fading draw `H`, the aggregated channel
//! `G = sum_m delta_m Hbar_m` carries all the information the receiver
//! gets in one slot. Its Gram matrix `G^T G` is eigendecomposed as
//! `U^T Psi U` with eigenvalues sorted descending; the rank projector
//! splits the state space into the observed cone and its complement. The
//! coefficients
//!
//! ```text
//! alpha = || (A U^T (I - Pi) U) (.)^T ||      (unobserved-cone growth)
//! beta  = ||A||^2 * trace([Psi]_rank^{-1})    (observed-cone noise floor)
//! ```
//!
//! bound the one-step predicted error trace by
//! `Tr f(Sigma, delta, H) <= alpha * Tr(Sigma) + beta`, and their
//! all-active expectations `alpha_bar`, `beta_bar` drive the closed-form
//! Q-function bound.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{aggregated_channel, draw_channels, ChannelDraw, PlantModel, ScheduleDecision, SensorSuite};
use crate::rng::RngStream;

use super::{ChannelStats, GramDecomposition};

/// Default relative eigenvalue cut for the Gram rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Absolute floor used when the largest eigenvalue is exactly zero.
const ZERO_GRAM_FLOOR: f64 = 1e-12;

/// Eigendecomposition of the aggregated channel Gram matrix for a schedule.
pub fn gram_decompose(
    delta: &ScheduleDecision,
    draw: &ChannelDraw,
    rank_tol: f64,
) -> Result<GramDecomposition> {
    if draw.is_empty() {
        return Err(Error::structural(
            "cannot decompose the Gram of an empty channel draw",
        ));
    }
    if delta.len() != draw.len() {
        return Err(Error::structural(format!(
            "schedule has {} entries for {} sensors",
            delta.len(),
            draw.len()
        )));
    }
    let g = aggregated_channel(delta, draw);
    gram_decompose_matrix(&(g.transpose() * &g), rank_tol)
}

/// Eigendecomposition of an explicit `S x S` Gram matrix.
pub fn gram_decompose_matrix(gram: &DMatrix<f64>, rank_tol: f64) -> Result<GramDecomposition> {
    if !(0.0..1.0).contains(&rank_tol) || rank_tol <= 0.0 {
        return Err(Error::structural(format!(
            "rank tolerance must lie in (0, 1), got {rank_tol}"
        )));
    }
    let s = gram.nrows();
    if gram.iter().all(|&v| v == 0.0) {
        // Zero Gram: deterministic identity basis, rank zero.
        return Ok(GramDecomposition::new(
            DMatrix::identity(s, s),
            vec![0.0; s],
            0,
        ));
    }
    let (mut psi, u) = linalg::sym_eigen_desc(gram);
    if psi.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(
            "Gram eigendecomposition produced a non-finite eigenvalue",
        ));
    }
    let top = psi.first().copied().unwrap_or(0.0).max(0.0);
    // A Gram matrix is PSD; small negative eigenvalues are roundoff.
    for v in psi.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let threshold = if top > 0.0 {
        rank_tol * top
    } else {
        ZERO_GRAM_FLOOR
    };
    let rank = psi.iter().filter(|&&v| v > threshold).count();
    Ok(GramDecomposition::new(u, psi, rank))
}

/// `alpha = ||M M^T||` with `M = A U^T (I - Pi) U`.
pub fn alpha_of(decomp: &GramDecomposition, a: &DMatrix<f64>) -> f64 {
    let s = decomp.dim();
    if decomp.rank() == s {
        return 0.0;
    }
    if decomp.rank() == 0 {
        return linalg::spectral_norm_sq(a);
    }
    let complement = DMatrix::identity(s, s) - decomp.pi();
    let m = a * decomp.u().transpose() * complement * decomp.u();
    linalg::spectral_norm_sq(&m)
}

/// `beta = ||A||^2 * sum of reciprocals of the top-`rank` eigenvalues`.
///
/// By convention the empty sum at rank zero gives `beta = 0`.
pub fn beta_of(decomp: &GramDecomposition, a: &DMatrix<f64>) -> f64 {
    if decomp.rank() == 0 {
        return 0.0;
    }
    let inv_sum: f64 = decomp.psi()[..decomp.rank()].iter().map(|&v| 1.0 / v).sum();
    linalg::spectral_norm_sq(a) * inv_sum
}

/// Monte-Carlo estimate of `alpha_bar = E[alpha]`, `beta_bar = E[beta]`
/// under all-sensors-active fading. Deterministic given `(seed, n_samples)`.
pub fn estimate_channel_stats(
    model: &PlantModel,
    suite: &SensorSuite,
    n_r: usize,
    n_samples: usize,
    seed: u64,
) -> Result<ChannelStats> {
    if n_samples == 0 {
        return Err(Error::structural("need at least one sample"));
    }
    if suite.is_empty() {
        return Err(Error::structural("channel statistics need sensors"));
    }
    let mut stream = RngStream::new(seed, "channel-stats");
    let all_on = ScheduleDecision::all_on(suite.len());
    let a = model.a();
    let mut alpha_sum = 0.0;
    let mut alpha_sumsq = 0.0;
    let mut beta_sum = 0.0;
    let mut beta_sumsq = 0.0;
    for _ in 0..n_samples {
        let draw = draw_channels(suite, n_r, &mut stream);
        let decomp = gram_decompose(&all_on, &draw, DEFAULT_RANK_TOL)?;
        let alpha = alpha_of(&decomp, a);
        let beta = beta_of(&decomp, a);
        alpha_sum += alpha;
        alpha_sumsq += alpha * alpha;
        beta_sum += beta;
        beta_sumsq += beta * beta;
    }
    let n = n_samples as f64;
    let alpha_bar = alpha_sum / n;
    let beta_bar = beta_sum / n;
    let se = |sum: f64, sumsq: f64, mean: f64| {
        if n_samples < 2 {
            return 0.0;
        }
        let var = ((sumsq - sum * mean).max(0.0)) / (n - 1.0);
        (var / n).sqrt()
    };
    if alpha_bar >= 1.0 {
        log::warn!(
            "alpha_bar = {alpha_bar:.4} >= 1: the Q-function bound loosens with the horizon"
        );
    }
    Ok(ChannelStats {
        alpha_bar,
        beta_bar,
        alpha_se: se(alpha_sum, alpha_sumsq, alpha_bar),
        beta_se: se(beta_sum, beta_sumsq, beta_bar),
        n_samples,
        seed,
    })
}

/// The covariance split `Sigma = Sigma^o + Sigma^u` with respect to an
/// all-active Gram decomposition.
///
/// In the decomposition basis, `Sigma^o` keeps the observed leading block
/// together with its coupling into the unobserved directions, and
/// `Sigma^u` is the Schur-complement remainder, which satisfies
/// `diag(Psi) * (rotated Sigma^u) = 0`.
#[derive(Debug, Clone)]
pub struct AppendixSplit {
    pub sigma_o: DMatrix<f64>,
    pub sigma_u: DMatrix<f64>,
    /// Coupling `L = (Sigma_rot)_r^{-1} (Sigma_rot)_{1:r, r+1:S}`, `r x (S-r)`.
    pub coupling: DMatrix<f64>,
}

/// Splits a positive definite covariance along the observed/unobserved
/// cones of `decomp` (expected to come from the all-active schedule).
pub fn appendix_split(sigma: &DMatrix<f64>, decomp: &GramDecomposition) -> Result<AppendixSplit> {
    let s = sigma.nrows();
    if decomp.dim() != s {
        return Err(Error::structural(format!(
            "decomposition dimension {} does not match covariance {s}x{s}",
            decomp.dim()
        )));
    }
    let (hi, lo) = linalg::eig_extremes(sigma);
    if lo <= 1e-12 * hi.max(0.0) || hi <= 0.0 {
        return Err(Error::structural(
            "covariance must be positive definite for the split",
        ));
    }
    let r = decomp.rank();
    let u = decomp.u();
    let sigma_rot = u * sigma * u.transpose();

    if r == s {
        return Ok(AppendixSplit {
            sigma_o: sigma.clone(),
            sigma_u: DMatrix::zeros(s, s),
            coupling: DMatrix::zeros(s, 0),
        });
    }
    if r == 0 {
        return Ok(AppendixSplit {
            sigma_o: DMatrix::zeros(s, s),
            sigma_u: sigma.clone(),
            coupling: DMatrix::zeros(0, s),
        });
    }

    let s11 = sigma_rot.view((0, 0), (r, r)).into_owned();
    let s12 = sigma_rot.view((0, r), (r, s - r)).into_owned();
    // L solves (Sigma_rot)_r L = (Sigma_rot)_{1:r, r+1:S}; the leading block
    // of a positive definite matrix is itself positive definite.
    let chol = linalg::cholesky_spd(&s11, "leading covariance block")?;
    let coupling = chol.solve(&s12);

    let mut so_rot = DMatrix::zeros(s, s);
    so_rot.view_mut((0, 0), (r, r)).copy_from(&s11);
    so_rot.view_mut((0, r), (r, s - r)).copy_from(&s12);
    so_rot
        .view_mut((r, 0), (s - r, r))
        .copy_from(&s12.transpose());
    so_rot
        .view_mut((r, r), (s - r, s - r))
        .copy_from(&(coupling.transpose() * &s11 * &coupling));

    let sigma_o = linalg::symmetrize(&(u.transpose() * so_rot * u));
    let sigma_u = sigma - &sigma_o;
    Ok(AppendixSplit {
        sigma_o,
        sigma_u,
        coupling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn suite_and_draw(
        m: usize,
        n_t: usize,
        s: usize,
        n_r: usize,
        seed: u64,
    ) -> (SensorSuite, ChannelDraw) {
        let suite = SensorSuite::random_gaussian(m, n_t, s, &mut RngStream::new(seed, "sensors"));
        let draw = draw_channels(&suite, n_r, &mut RngStream::new(seed, "channel"));
        (suite, draw)
    }

    #[test]
    fn zero_schedule_gives_zero_gram() {
        let (_, draw) = suite_and_draw(3, 2, 3, 2, 1);
        let d = gram_decompose(&ScheduleDecision::all_off(3), &draw, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(d.rank(), 0);
        assert!(d.psi().iter().all(|&v| v == 0.0));
        assert_eq!(d.pi(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn explicit_rank_one_gram() {
        let suite = SensorSuite::new(vec![DMatrix::identity(2, 2)]).unwrap();
        let h = dmatrix![1.0, 0.0; 0.0, 0.0];
        let draw = ChannelDraw::from_fading(vec![h], &suite, 2).unwrap();
        let d = gram_decompose(&ScheduleDecision::all_on(1), &draw, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(d.rank(), 1);
        assert!((d.psi()[0] - 1.0).abs() < 1e-12);
        assert!(d.psi()[1].abs() < 1e-12);
        assert_eq!(d.pi(), dmatrix![1.0, 0.0; 0.0, 0.0]);
    }

    #[test]
    fn diagonal_gram_sorted_descending() {
        let g = dmatrix![2.0, 0.0; 0.0, 3.0];
        let d = gram_decompose_matrix(&(g.transpose() * &g), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(d.rank(), 2);
        assert!((d.psi()[0] - 9.0).abs() < 1e-12);
        assert!((d.psi()[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_examples() {
        // Full rank: alpha = 0.
        let full = GramDecomposition::new(DMatrix::identity(2, 2), vec![2.0, 1.0], 2);
        assert_eq!(alpha_of(&full, &dmatrix![5.0, 0.0; 0.0, 1.0]), 0.0);
        // Rank zero: alpha = ||A||^2.
        let none = GramDecomposition::new(DMatrix::identity(2, 2), vec![0.0, 0.0], 0);
        assert!((alpha_of(&none, &dmatrix![3.0, 0.0; 0.0, 1.0]) - 9.0).abs() < 1e-10);
        // Hand case: A = 2I, Pi = diag(1, 0), U = I.
        let half = GramDecomposition::new(DMatrix::identity(2, 2), vec![1.0, 0.0], 1);
        let a = DMatrix::identity(2, 2) * 2.0;
        assert!((alpha_of(&half, &a) - 4.0).abs() < 1e-10);
    }

    #[test]
    fn beta_examples() {
        let none = GramDecomposition::new(DMatrix::identity(2, 2), vec![0.0, 0.0], 0);
        assert_eq!(beta_of(&none, &DMatrix::identity(2, 2)), 0.0);

        let one = GramDecomposition::new(DMatrix::identity(1, 1), vec![4.0], 1);
        assert!((beta_of(&one, &dmatrix![2.0]) - 1.0).abs() < 1e-12);

        let two = GramDecomposition::new(DMatrix::identity(2, 2), vec![2.0, 1.0], 2);
        assert!((beta_of(&two, &DMatrix::identity(2, 2)) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_is_faithful() {
        for seed in 0..200 {
            let (_, draw) = suite_and_draw(2, 2, 3, 2, seed);
            let delta = ScheduleDecision::all_on(2);
            let g = aggregated_channel(&delta, &draw);
            let gram = g.transpose() * &g;
            let d = gram_decompose(&delta, &draw, DEFAULT_RANK_TOL).unwrap();
            let rel = (d.reconstruct() - &gram).norm() / gram.norm().max(1e-300);
            assert!(rel < 1e-8, "seed {seed}: reconstruction gap {rel}");
            let floor = -1e-9 * d.psi().first().copied().unwrap_or(0.0);
            assert!(d.psi().iter().all(|&v| v >= floor));
        }
    }

    #[test]
    fn stats_are_deterministic() {
        let model = PlantModel::new(DMatrix::identity(3, 3), DMatrix::identity(3, 3)).unwrap();
        let suite = SensorSuite::random_gaussian(2, 2, 3, &mut RngStream::new(4, "sensors"));
        let a = estimate_channel_stats(&model, &suite, 2, 500, 99).unwrap();
        let b = estimate_channel_stats(&model, &suite, 2, 500, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn alpha_bar_vanishes_when_every_draw_has_full_rank() {
        // N_r >= S makes the aggregated Gram generically full rank, so every
        // sample contributes alpha = 0 exactly.
        let model = PlantModel::new(DMatrix::identity(2, 2), DMatrix::identity(2, 2)).unwrap();
        let suite = SensorSuite::random_gaussian(2, 2, 2, &mut RngStream::new(5, "sensors"));
        let stats = estimate_channel_stats(&model, &suite, 3, 2_000, 7).unwrap();
        assert!(stats.alpha_bar <= 1e-9, "alpha_bar {}", stats.alpha_bar);
    }

    #[test]
    fn stats_running_mean_stabilizes() {
        let model = PlantModel::new(DMatrix::identity(2, 2) * 0.9, DMatrix::identity(2, 2)).unwrap();
        // A wide receive array keeps the smallest Gram eigenvalue away from
        // zero, so the beta average settles quickly.
        let suite = SensorSuite::random_gaussian(3, 2, 2, &mut RngStream::new(6, "sensors"));
        let half = estimate_channel_stats(&model, &suite, 6, 10_000, 123).unwrap();
        let full = estimate_channel_stats(&model, &suite, 6, 20_000, 123).unwrap();
        let rel_beta = (full.beta_bar - half.beta_bar).abs() / half.beta_bar.max(1e-300);
        assert!(rel_beta <= 0.05, "beta_bar moved by {rel_beta}");
    }

    #[test]
    fn split_edges() {
        let sigma = dmatrix![2.0, 0.3; 0.3, 1.0];
        let full = GramDecomposition::new(DMatrix::identity(2, 2), vec![2.0, 1.0], 2);
        let out = appendix_split(&sigma, &full).unwrap();
        assert_eq!(out.sigma_o, sigma);
        assert_eq!(out.sigma_u, DMatrix::zeros(2, 2));

        let none = GramDecomposition::new(DMatrix::identity(2, 2), vec![0.0, 0.0], 0);
        let out = appendix_split(&sigma, &none).unwrap();
        assert_eq!(out.sigma_o, DMatrix::zeros(2, 2));
        assert_eq!(out.sigma_u, sigma);
    }

    #[test]
    fn split_matches_independent_block_algebra() {
        for seed in 0..40 {
            let mut rng = RngStream::new(seed, "split");
            let s = 3;
            let x = rng.normal_matrix(s, s);
            let sigma = linalg::symmetrize(&(&x * x.transpose())) + DMatrix::identity(s, s) * 0.3;
            let (_, draw) = suite_and_draw(2, 1, 3, 2, seed + 1000);
            let decomp = gram_decompose(&ScheduleDecision::all_on(2), &draw, DEFAULT_RANK_TOL).unwrap();
            let r = decomp.rank();
            assert!(r > 0 && r < s, "want a proper split, got rank {r}");

            let out = appendix_split(&sigma, &decomp).unwrap();
            // Additivity.
            let rel = (&out.sigma_o + &out.sigma_u - &sigma).norm() / sigma.norm();
            assert!(rel < 1e-8, "seed {seed}: additivity gap {rel}");

            // Independent route: in the rotated basis the remainder must be
            // the Schur complement in the trailing block and zero elsewhere.
            let u = decomp.u();
            let rot = u * &sigma * u.transpose();
            let s11 = rot.view((0, 0), (r, r)).into_owned();
            let s12 = rot.view((0, r), (r, s - r)).into_owned();
            let s22 = rot.view((r, r), (s - r, s - r)).into_owned();
            let schur = &s22
                - s12.transpose() * linalg::spd_inverse(&s11, "s11").unwrap() * &s12;
            let su_rot = u * &out.sigma_u * u.transpose();
            let lead = su_rot.view((0, 0), (r, r)).norm();
            assert!(lead < 1e-8 * sigma.norm(), "leading block {lead}");
            let tail_gap = (su_rot.view((r, r), (s - r, s - r)).into_owned() - schur).norm();
            assert!(tail_gap < 1e-8 * sigma.norm());

            // The appendix identity diag(Psi) * rotated(Sigma^u) = 0.
            let psi = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(decomp.psi().to_vec()));
            let prod = psi * &su_rot;
            assert!(prod.norm() <= 1e-8 * sigma.norm() * decomp.psi()[0].max(1.0));
        }
    }
}
