//! Uplink pilot phase and MMSE channel estimation.
//!
//! All K users send orthonormal length-K pilots at once. The pilot book is the
//! identity, so projecting onto pilot k selects column k of the observation.
//! A projection equals `sqrt(pK)·channel + CN(0, σ²)` noise.

use nalgebra::DMatrix;
use rand::Rng;

use crate::geometry::{ChannelRealization, NetworkScenario};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::{Error, Result};

/// Residual bound for the Ψ_k inverse.
pub const PSI_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    /// N×K; row n is the pilot signal received at AP n.
    pub y_ap: DMatrix<C64>,
    /// M×K pilot signal received at the satellite.
    pub y_sat: CMatrix,
}

impl PilotObservation {
    /// `y_pn ψ_k`.
    pub fn ap_projection(&self, ap: usize, user: usize) -> C64 {
        self.y_ap[(ap, user)]
    }

    /// `Y_p ψ_k`.
    pub fn sat_projection(&self, user: usize) -> CVector {
        self.y_sat.column(user).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    /// K×N estimates ĝ_nk.
    pub g_hat: DMatrix<C64>,
    pub h_hat: Vec<CVector>,
}

/// Second-order statistics of the estimates; independent of any realization.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationStatistics {
    /// K×N estimate variances ϱ_nk.
    pub varrho: DMatrix<f64>,
    /// Ψ_k = (pK R_k + σ_s² I)⁻¹.
    pub psi: Vec<CMatrix>,
    /// Θ_k = R_k Ψ_k R_k; the estimate covariance is pK Θ_k.
    pub theta: Vec<CMatrix>,
    /// Satellite estimator gain sqrt(pK) R_k Ψ_k.
    pub sat_gain: Vec<CMatrix>,
    /// K×N scalar gains sqrt(pK) β/(pK β + σ_a²).
    pub ap_gain: DMatrix<f64>,
    /// Total pilot energy per user, pK.
    pub pilot_energy: f64,
}

impl EstimationStatistics {
    pub fn new(scenario: &NetworkScenario) -> Result<Self> {
        let c = &scenario.constants;
        let (k, n) = (scenario.num_users(), scenario.num_aps());
        let pk = c.pilot_power_w * k as f64;
        let varrho = DMatrix::from_fn(k, n, |u, a| {
            estimation_variance(scenario.beta_terrestrial[(u, a)], c.pilot_power_w, k, c.noise_var_ap_w)
        });
        let ap_gain = DMatrix::from_fn(k, n, |u, a| {
            let b = scenario.beta_terrestrial[(u, a)];
            pk.sqrt() * b / (pk * b + c.noise_var_ap_w)
        });
        let mut psi = Vec::with_capacity(k);
        let mut theta = Vec::with_capacity(k);
        let mut sat_gain = Vec::with_capacity(k);
        for r in &scenario.correlation {
            let p = psi_matrix(r, c.pilot_power_w, k, c.noise_var_sat_w)?;
            let rp = r * &p;
            let t = &rp * r;
            theta.push((&t + t.adjoint()).scale(0.5));
            sat_gain.push(rp.scale(pk.sqrt()));
            psi.push(p);
        }
        Ok(EstimationStatistics {
            varrho,
            psi,
            theta,
            sat_gain,
            ap_gain,
            pilot_energy: pk,
        })
    }

    /// Runs the estimator on one pilot observation.
    pub fn estimate(&self, scenario: &NetworkScenario, obs: &PilotObservation) -> ChannelEstimate {
        ChannelEstimate {
            g_hat: mmse_estimate_terrestrial(obs, self),
            h_hat: mmse_estimate_satellite(obs, scenario, self),
        }
    }
}

/// `ϱ = pKβ²/(pKβ + σ²)`.
pub fn estimation_variance(beta: f64, pilot_power: f64, num_users: usize, noise_var: f64) -> f64 {
    let pkb = pilot_power * num_users as f64 * beta;
    pkb * beta / (pkb + noise_var)
}

/// `Ψ = (pK R + σ² I)⁻¹`, residual-checked.
pub fn psi_matrix(r: &CMatrix, pilot_power: f64, num_users: usize, noise_var: f64) -> Result<CMatrix> {
    if !(noise_var > 0.0) {
        return Err(Error::invalid("noise_var_sat_w", "must be positive"));
    }
    let m = r.nrows();
    let pk = pilot_power * num_users as f64;
    let a = r.scale(pk) + CMatrix::identity(m, m).scale(noise_var);
    if r.norm() == 0.0 {
        return Ok(CMatrix::identity(m, m).scale(1.0 / noise_var));
    }
    // Relative residual: scale the tolerance by the conditioning of the problem.
    let cond = a.norm() / noise_var;
    linalg::hermitian_pd_inverse(&a, PSI_RESIDUAL_TOL * cond.max(1.0))
}

/// Simulates the pilot phase for one channel realization.
pub fn receive_pilots<R: Rng + ?Sized>(
    scenario: &NetworkScenario,
    channels: &ChannelRealization,
    rng: &mut R,
) -> PilotObservation {
    let c = &scenario.constants;
    let (k, n, m) = (scenario.num_users(), scenario.num_aps(), scenario.num_antennas());
    let amp = (c.pilot_power_w * k as f64).sqrt();
    let y_ap = DMatrix::from_fn(n, k, |a, u| {
        channels.g[(u, a)] * amp + linalg::complex_normal(rng, c.noise_var_ap_w)
    });
    let y_sat = CMatrix::from_fn(m, k, |i, u| {
        channels.h[u][i] * amp + linalg::complex_normal(rng, c.noise_var_sat_w)
    });
    PilotObservation { y_ap, y_sat }
}

/// `ĝ_nk = sqrt(pK)β/(pKβ + σ_a²) · y_pn ψ_k`.
pub fn mmse_estimate_terrestrial(obs: &PilotObservation, stats: &EstimationStatistics) -> DMatrix<C64> {
    let (k, n) = stats.ap_gain.shape();
    DMatrix::from_fn(k, n, |u, a| obs.ap_projection(a, u) * stats.ap_gain[(u, a)])
}

/// `ĥ_k = h̄_k + sqrt(pK) R_k Ψ_k (Y_p ψ_k − sqrt(pK) h̄_k)`.
pub fn mmse_estimate_satellite(
    obs: &PilotObservation,
    scenario: &NetworkScenario,
    stats: &EstimationStatistics,
) -> Vec<CVector> {
    let amp = stats.pilot_energy.sqrt();
    scenario
        .los_vectors
        .iter()
        .enumerate()
        .map(|(u, mean)| {
            let innovation = obs.sat_projection(u) - mean.scale(amp);
            mean + &stats.sat_gain[u] * innovation
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_scenario, tests::small_config, ChannelSampler};
    use crate::io::stream::seeded_stream;

    fn scenario(k: usize, n: usize, m: usize) -> NetworkScenario {
        generate_scenario(&small_config(k, n, m), 21).unwrap()
    }

    #[test]
    fn variance_examples() {
        assert_eq!(estimation_variance(2.0, 0.0, 4, 1.0), 0.0);
        // pKβ = σ².
        assert!((estimation_variance(0.5, 1.0, 2, 1.0) - 0.25).abs() < 1e-15);
        let beta = 3e-13;
        let near = estimation_variance(beta, 1e12, 10, 1e-12);
        assert!((near - beta).abs() / beta < 1e-6);
        let mut prev = 0.0;
        for p in [0.0, 1e-3, 1.0, 10.0, 1e4] {
            let v = estimation_variance(beta, p, 10, 1.6e-12);
            assert!(v >= prev && v <= beta);
            prev = v;
        }
    }

    #[test]
    fn psi_examples() {
        let zero = CMatrix::zeros(3, 3);
        let p = psi_matrix(&zero, 5.0, 2, 0.5).unwrap();
        assert!((p - CMatrix::identity(3, 3).scale(2.0)).norm() < 1e-15);
        let p = psi_matrix(&CMatrix::identity(2, 2), 1.0, 1, 1.0).unwrap();
        assert!((p - CMatrix::identity(2, 2).scale(0.5)).norm() < 1e-15);
        let s = scenario(3, 2, 8);
        let c = &s.constants;
        for r in &s.correlation {
            let p = psi_matrix(r, c.pilot_power_w, 3, c.noise_var_sat_w).unwrap();
            let a = r.scale(c.pilot_power_w * 3.0) + CMatrix::identity(8, 8).scale(c.noise_var_sat_w);
            assert!((&a * &p - CMatrix::identity(8, 8)).norm() < 1e-10);
            assert!(linalg::hermitian_deviation(&p) < 1e-10 * p.norm());
        }
        assert!(psi_matrix(&zero, 1.0, 1, 0.0).is_err());
    }

    #[test]
    fn noiseless_pilots_project_exactly() {
        let mut s = scenario(3, 2, 4);
        s.constants.noise_var_ap_w = 1e-300;
        s.constants.noise_var_sat_w = 1e-300;
        let mut rng = seeded_stream(3, "test");
        let ch = ChannelSampler::new(&s).unwrap().sample(&mut rng);
        let obs = receive_pilots(&s, &ch, &mut rng);
        let amp = (s.constants.pilot_power_w * 3.0).sqrt();
        for u in 0..3 {
            for a in 0..2 {
                let err = (obs.ap_projection(a, u) - ch.g[(u, a)] * amp).norm();
                assert!(err < 1e-12 * amp * ch.g[(u, a)].norm());
            }
        }
        let stats = EstimationStatistics::new(&s).unwrap();
        let g_hat = mmse_estimate_terrestrial(&obs, &stats);
        assert!((&g_hat - &ch.g).norm() < 1e-9 * ch.g.norm());
    }

    #[test]
    fn zero_pilot_power_gives_noise_and_prior_mean() {
        let mut s = scenario(2, 3, 4);
        s.constants.pilot_power_w = 0.0;
        let stats = EstimationStatistics::new(&s).unwrap();
        let sampler = ChannelSampler::new(&s).unwrap();
        let mut rng = seeded_stream(8, "test");
        let mut acc = 0.0;
        let draws = 5_000;
        for _ in 0..draws {
            let ch = sampler.sample(&mut rng);
            let obs = receive_pilots(&s, &ch, &mut rng);
            acc += obs.y_ap.iter().map(|z| z.norm_sqr()).sum::<f64>() / 6.0;
            let est = stats.estimate(&s, &obs);
            assert_eq!(est.h_hat, s.los_vectors);
            assert!(est.g_hat.iter().all(|z| *z == C64::new(0.0, 0.0)));
        }
        let var = acc / draws as f64;
        assert!((var / s.constants.noise_var_ap_w - 1.0).abs() < 0.03);
    }

    #[test]
    fn satellite_projection_noise_has_m_sigma2() {
        let s = scenario(2, 1, 6);
        let sampler = ChannelSampler::new(&s).unwrap();
        let mut rng = seeded_stream(4, "test");
        let amp = (s.constants.pilot_power_w * 2.0).sqrt();
        let draws = 10_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let ch = sampler.sample(&mut rng);
            let obs = receive_pilots(&s, &ch, &mut rng);
            acc += (obs.sat_projection(1) - ch.h[1].scale(amp)).norm_squared();
        }
        let expected = 6.0 * s.constants.noise_var_sat_w;
        assert!((acc / draws as f64 / expected - 1.0).abs() < 0.03);
    }

    #[test]
    fn terrestrial_estimate_statistics() {
        let s = scenario(2, 2, 2);
        let stats = EstimationStatistics::new(&s).unwrap();
        let sampler = ChannelSampler::new(&s).unwrap();
        let mut rng = seeded_stream(5, "test");
        let draws = 100_000;
        let (mut var_hat, mut var_err, mut cross) = (
            DMatrix::<f64>::zeros(2, 2),
            DMatrix::<f64>::zeros(2, 2),
            DMatrix::<C64>::zeros(2, 2),
        );
        for _ in 0..draws {
            let ch = sampler.sample(&mut rng);
            let obs = receive_pilots(&s, &ch, &mut rng);
            let g_hat = mmse_estimate_terrestrial(&obs, &stats);
            for u in 0..2 {
                for a in 0..2 {
                    let e = ch.g[(u, a)] - g_hat[(u, a)];
                    var_hat[(u, a)] += g_hat[(u, a)].norm_sqr();
                    var_err[(u, a)] += e.norm_sqr();
                    cross[(u, a)] += g_hat[(u, a)] * e.conj();
                }
            }
        }
        let d = draws as f64;
        for u in 0..2 {
            for a in 0..2 {
                let rho = stats.varrho[(u, a)];
                let beta = s.beta_terrestrial[(u, a)];
                assert!(rho <= beta);
                assert!((var_hat[(u, a)] / d / rho - 1.0).abs() < 0.02);
                assert!((var_err[(u, a)] / d / (beta - rho) - 1.0).abs() < 0.03);
                let corr = cross[(u, a)].norm() / (var_hat[(u, a)] * var_err[(u, a)]).sqrt();
                assert!(corr < 0.02, "corr {corr}");
            }
        }
    }

    #[test]
    fn satellite_estimate_covariances() {
        let s = scenario(2, 1, 4);
        let stats = EstimationStatistics::new(&s).unwrap();
        let sampler = ChannelSampler::new(&s).unwrap();
        let mut rng = seeded_stream(6, "test");
        let draws = 10_000;
        let m = 4;
        let mut cov_hat = vec![CMatrix::zeros(m, m); 2];
        let mut cov_err = vec![CMatrix::zeros(m, m); 2];
        for _ in 0..draws {
            let ch = sampler.sample(&mut rng);
            let obs = receive_pilots(&s, &ch, &mut rng);
            let h_hat = mmse_estimate_satellite(&obs, &s, &stats);
            for u in 0..2 {
                let d = &h_hat[u] - &s.los_vectors[u];
                let e = &ch.h[u] - &h_hat[u];
                cov_hat[u] += &d * d.adjoint();
                cov_err[u] += &e * e.adjoint();
            }
        }
        for u in 0..2 {
            let want = stats.theta[u].scale(stats.pilot_energy);
            let got = cov_hat[u].unscale(draws as f64);
            assert!((&got - &want).norm() / want.norm() < 0.05);
            let want_err = &s.correlation[u] - &want;
            let got_err = cov_err[u].unscale(draws as f64);
            assert!((&got_err - &want_err).norm() / want_err.norm() < 0.05);
        }
    }

    #[test]
    fn noiseless_single_user_satellite_estimate_is_exact() {
        let mut s = scenario(1, 1, 4);
        s.constants.noise_var_sat_w = 1e-30;
        let stats = EstimationStatistics::new(&s).unwrap();
        let mut rng = seeded_stream(7, "test");
        let ch = ChannelSampler::new(&s).unwrap().sample(&mut rng);
        let obs = receive_pilots(&s, &ch, &mut rng);
        let h_hat = mmse_estimate_satellite(&obs, &s, &stats);
        assert!((&h_hat[0] - &ch.h[0]).norm() < 1e-6 * ch.h[0].norm());
    }

    #[test]
    fn terrestrial_estimate_is_linear() {
        let s = scenario(2, 2, 2);
        let stats = EstimationStatistics::new(&s).unwrap();
        let obs = PilotObservation {
            y_ap: DMatrix::from_fn(2, 2, |a, u| C64::new(a as f64 + 1.0, u as f64 - 0.5)),
            y_sat: CMatrix::zeros(2, 2),
        };
        let scaled = PilotObservation {
            y_ap: obs.y_ap.scale(3.5),
            y_sat: obs.y_sat.clone(),
        };
        let a = mmse_estimate_terrestrial(&obs, &stats);
        let b = mmse_estimate_terrestrial(&scaled, &stats);
        assert!((a.scale(3.5) - b).norm() < 1e-15 * a.norm().max(1e-300));
    }
}
