//! Uplink ergodic throughput with MRC combining.
//!
//! Two independent routes to the same quantity:
//!
//! * [`LinkStatistics`] evaluates the closed-form SINR from second-order
//!   statistics. After the O(K²M²) precomputation each evaluation is O(K²),
//!   which is what the optimizers use as their objective.
//! * [`sinr_monte_carlo`] simulates channels, pilots, estimates and the combined
//!   signal, then assembles the use-and-then-forget SINR from sample means.
//!
//! The combined signal of user k from user k′ is
//! `o_kk′ = α̃_k α̃_k′ ĥ_kᴴ h_k′ + α_k α_k′ Σ_n ĝ_nk* g_nk′`,
//! so a receiver only collects interference from users it serves.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::estimation::{self, ChannelEstimate, EstimationStatistics};
use crate::geometry::{ChannelSampler, NetworkScenario, RadioConstants};
use crate::io::stream::indexed_stream;
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::{Error, Result};

/// Realizations below which Monte-Carlo reports carry a warning.
pub const MIN_MC_REALIZATIONS: usize = 1_000;
const MC_BLOCK: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssociationPattern {
    /// AP service flags α_k.
    pub alpha: Vec<bool>,
    /// Satellite service flags α̃_k.
    pub alpha_tilde: Vec<bool>,
}

impl AssociationPattern {
    pub fn full(k: usize) -> Self {
        AssociationPattern {
            alpha: vec![true; k],
            alpha_tilde: vec![true; k],
        }
    }

    pub fn aps_only(k: usize) -> Self {
        AssociationPattern {
            alpha: vec![true; k],
            alpha_tilde: vec![false; k],
        }
    }

    pub fn satellite_only(k: usize) -> Self {
        AssociationPattern {
            alpha: vec![false; k],
            alpha_tilde: vec![true; k],
        }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn is_served(&self, k: usize) -> bool {
        self.alpha[k] || self.alpha_tilde[k]
    }

    fn check(&self, k: usize) -> Result<()> {
        if self.alpha.len() != k || self.alpha_tilde.len() != k {
            return Err(Error::invalid(
                "association",
                format!(
                    "expected {k} users, got {}/{}",
                    self.alpha.len(),
                    self.alpha_tilde.len()
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerAllocation {
    /// Normalized powers ξ_k ∈ [0, 1].
    pub xi: Vec<f64>,
    pub p_max: Vec<f64>,
}

impl PowerAllocation {
    /// Every user at its maximum power.
    pub fn full(constants: &RadioConstants) -> Self {
        PowerAllocation {
            xi: vec![1.0; constants.num_users],
            p_max: vec![constants.data_power_max_w; constants.num_users],
        }
    }

    pub fn with_xi(constants: &RadioConstants, xi: Vec<f64>) -> Result<Self> {
        let alloc = PowerAllocation {
            p_max: vec![constants.data_power_max_w; xi.len()],
            xi,
        };
        alloc.check(constants.num_users)?;
        Ok(alloc)
    }

    pub fn power(&self, k: usize) -> f64 {
        self.xi[k] * self.p_max[k]
    }

    pub fn powers(&self) -> Vec<f64> {
        (0..self.xi.len()).map(|k| self.power(k)).collect()
    }

    fn check(&self, k: usize) -> Result<()> {
        if self.xi.len() != k || self.p_max.len() != k {
            return Err(Error::invalid(
                "powers",
                format!("expected {k} users, got {}", self.xi.len()),
            ));
        }
        if let Some(x) = self.xi.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::invalid("xi", format!("{x} outside [0, 1]")));
        }
        if let Some(p) = self.p_max.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::invalid("p_max", format!("{p} is not a valid power")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMethod {
    ClosedForm,
    MonteCarlo { realizations: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub sinr: Vec<f64>,
    pub rate_mbps: Vec<f64>,
    pub method: &'static str,
    pub mc_realizations: usize,
    pub warnings: Vec<String>,
}

/// `B (1 − K/τ_c) log2(1 + sinr)` in Mbps.
pub fn rate_from_sinr(sinr: f64, constants: &RadioConstants) -> Result<f64> {
    if constants.coherence_symbols <= constants.num_users {
        return Err(Error::invalid(
            "coherence_symbols",
            format!(
                "tau_c = {} must exceed K = {}",
                constants.coherence_symbols, constants.num_users
            ),
        ));
    }
    if !(sinr >= 0.0) {
        return Err(Error::invalid("sinr", format!("must be non-negative, got {sinr}")));
    }
    Ok(constants.bandwidth_hz / 1e6 * constants.prelog() * (1.0 + sinr).log2())
}

fn report(
    constants: &RadioConstants,
    sinr: Vec<f64>,
    method: &'static str,
    realizations: usize,
    warnings: Vec<String>,
) -> Result<RateReport> {
    let rate_mbps = sinr
        .iter()
        .map(|&s| rate_from_sinr(s, constants))
        .collect::<Result<Vec<_>>>()?;
    Ok(RateReport {
        sinr,
        rate_mbps,
        method,
        mc_realizations: realizations,
        warnings,
    })
}

/// Precomputed second-order terms of the closed-form SINR.
#[derive(Debug, Clone)]
pub struct LinkStatistics {
    pub constants: RadioConstants,
    /// `‖h̄_k‖² + pK tr(Θ_k)` = E‖ĥ_k‖².
    pub sat_gain: Vec<f64>,
    /// `Σ_n ϱ_nk`.
    pub ap_gain: Vec<f64>,
    /// Satellite interference `S[k, k′]` = E|ĥ_kᴴ h_k′|², centred when k′ = k.
    pub sat_interference: DMatrix<f64>,
    /// AP interference `A[k, k′] = Σ_n ϱ_nk β_nk′`.
    pub ap_interference: DMatrix<f64>,
}

impl LinkStatistics {
    pub fn new(scenario: &NetworkScenario) -> Result<Self> {
        let est = EstimationStatistics::new(scenario)?;
        Ok(Self::from_estimation(scenario, &est))
    }

    pub fn from_estimation(scenario: &NetworkScenario, est: &EstimationStatistics) -> Self {
        let k = scenario.num_users();
        let m = scenario.num_antennas();
        let pk = est.pilot_energy;
        let h_bar = CMatrix::from_fn(m, k, |i, u| scenario.los_vectors[u][i]);
        let gram = h_bar.adjoint() * &h_bar;

        // Per-user products with all LoS vectors: columns k′ of Θ_k H̄ and R_k H̄.
        let per_user: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..k)
            .into_par_iter()
            .map(|u| {
                let th = &est.theta[u] * &h_bar;
                let rh = &scenario.correlation[u] * &h_bar;
                // h̄_k′ᴴ Θ_u h̄_k′ and h̄_k′ᴴ R_u h̄_k′ for every k′.
                let theta_q = (0..k).map(|v| h_bar.column(v).dotc(&th.column(v)).re).collect();
                let r_q = (0..k).map(|v| h_bar.column(v).dotc(&rh.column(v)).re).collect();
                // tr(R_k′ Θ_u) for every k′.
                let tr = (0..k)
                    .map(|v| linalg::trace_of_product(&scenario.correlation[v], &est.theta[u]).re)
                    .collect();
                (theta_q, r_q, tr)
            })
            .collect();

        let sat_gain: Vec<f64> = (0..k)
            .map(|u| gram[(u, u)].re + pk * linalg::trace(&est.theta[u]).re)
            .collect();
        let ap_gain: Vec<f64> = (0..k).map(|u| est.varrho.row(u).sum()).collect();

        let sat_interference = DMatrix::from_fn(k, k, |u, v| {
            let (theta_q, _, tr) = &per_user[u];
            // h̄_uᴴ R_v h̄_u comes from user v's table.
            let r_q = per_user[v].1[u];
            let mean = if u == v { 0.0 } else { gram[(u, v)].norm_sqr() };
            mean + pk * theta_q[v] + r_q + pk * tr[v]
        });
        let ap_interference = &est.varrho * scenario.beta_terrestrial.transpose();

        LinkStatistics {
            constants: scenario.constants.clone(),
            sat_gain,
            ap_gain,
            sat_interference,
            ap_interference,
        }
    }

    pub fn num_users(&self) -> usize {
        self.sat_gain.len()
    }

    fn check(&self, assoc: &AssociationPattern, powers: &PowerAllocation) -> Result<()> {
        assoc.check(self.num_users())?;
        powers.check(self.num_users())
    }

    /// Closed-form SINR of user `k`; 0 for an unserved user.
    pub fn sinr(&self, assoc: &AssociationPattern, powers: &[f64], k: usize) -> f64 {
        let (a, at) = (assoc.alpha[k], assoc.alpha_tilde[k]);
        if !(a || at) || powers[k] == 0.0 {
            return 0.0;
        }
        let sat = if at { self.sat_gain[k] } else { 0.0 };
        let ap = if a { self.ap_gain[k] } else { 0.0 };
        let signal = powers[k] * (sat + ap).powi(2);
        let mut interference = 0.0;
        for (v, &p) in powers.iter().enumerate() {
            if at && assoc.alpha_tilde[v] {
                interference += p * self.sat_interference[(k, v)];
            }
            if a && assoc.alpha[v] {
                interference += p * self.ap_interference[(k, v)];
            }
        }
        let noise = self.constants.noise_var_sat_w * sat + self.constants.noise_var_ap_w * ap;
        signal / (interference + noise)
    }

    pub fn sinr_all(&self, assoc: &AssociationPattern, powers: &PowerAllocation) -> Result<Vec<f64>> {
        self.check(assoc, powers)?;
        let p = powers.powers();
        Ok((0..self.num_users()).map(|k| self.sinr(assoc, &p, k)).collect())
    }

    /// Per-user rates in Mbps, unchecked; the inputs must have K entries.
    pub fn rates_unchecked(&self, assoc: &AssociationPattern, powers: &[f64]) -> Vec<f64> {
        let scale = self.constants.bandwidth_hz / 1e6 * self.constants.prelog();
        (0..self.num_users())
            .map(|k| scale * (1.0 + self.sinr(assoc, powers, k)).log2())
            .collect()
    }

    pub fn report(&self, assoc: &AssociationPattern, powers: &PowerAllocation) -> Result<RateReport> {
        let sinr = self.sinr_all(assoc, powers)?;
        report(&self.constants, sinr, "closed-form", 0, Vec::new())
    }
}

/// Closed-form SINR of one user.
pub fn sinr_closed_form(
    stats: &LinkStatistics,
    assoc: &AssociationPattern,
    powers: &PowerAllocation,
    k: usize,
) -> Result<f64> {
    stats.check(assoc, powers)?;
    if k >= stats.num_users() {
        return Err(Error::invalid("user", format!("{k} out of range")));
    }
    Ok(stats.sinr(assoc, &powers.powers(), k))
}

/// MRC detectors: the channel estimates themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct MrcDetectors {
    /// K×N AP detectors w_nk = ĝ_nk.
    pub ap: DMatrix<C64>,
    /// Satellite detectors w_k = ĥ_k.
    pub sat: Vec<CVector>,
}

pub fn mrc_detectors(estimate: &ChannelEstimate) -> MrcDetectors {
    MrcDetectors {
        ap: estimate.g_hat.clone(),
        sat: estimate.h_hat.clone(),
    }
}

/// Running sums over a block of realizations.
#[derive(Debug, Clone)]
struct McBlock {
    count: f64,
    /// Mean of o_kk.
    mean: Vec<C64>,
    /// Σ |o_kk − mean|² (Welford).
    m2: Vec<f64>,
    /// Σ |o_kk′|² for k′ ≠ k.
    power: DMatrix<f64>,
    /// Σ of the combined noise power.
    noise: Vec<f64>,
}

impl McBlock {
    fn new(k: usize) -> Self {
        McBlock {
            count: 0.0,
            mean: vec![C64::new(0.0, 0.0); k],
            m2: vec![0.0; k],
            power: DMatrix::zeros(k, k),
            noise: vec![0.0; k],
        }
    }

    fn push_self(&mut self, k: usize, o: C64) {
        let delta = o - self.mean[k];
        self.mean[k] += delta / self.count;
        self.m2[k] += (delta.conj() * (o - self.mean[k])).re;
    }

    /// Chan et al. pairwise combination; deterministic given the merge order.
    fn merge(mut self, other: &McBlock) -> McBlock {
        let n = self.count + other.count;
        for k in 0..self.mean.len() {
            let delta = other.mean[k] - self.mean[k];
            self.m2[k] += other.m2[k] + delta.norm_sqr() * self.count * other.count / n;
            self.mean[k] += delta * (other.count / n);
            self.noise[k] += other.noise[k];
        }
        self.power += &other.power;
        self.count = n;
        self
    }
}

/// Use-and-then-forget SINR estimated by simulation.
///
/// Realizations are split into blocks of 1000 with their own labeled streams.
/// Blocks run in parallel and merge in index order, so results do not depend on
/// the number of worker threads.
pub fn sinr_monte_carlo(
    scenario: &NetworkScenario,
    assoc: &AssociationPattern,
    powers: &PowerAllocation,
    n_real: usize,
    seed: u64,
) -> Result<RateReport> {
    let k = scenario.num_users();
    assoc.check(k)?;
    powers.check(k)?;
    if n_real == 0 {
        return Err(Error::invalid("realizations", "must be at least 1"));
    }
    let est = EstimationStatistics::new(scenario)?;
    let sampler = ChannelSampler::new(scenario)?;
    let p = powers.powers();
    let c = &scenario.constants;
    let sat_w: Vec<f64> = assoc.alpha_tilde.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let ap_w: Vec<f64> = assoc.alpha.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();

    let blocks = n_real.div_ceil(MC_BLOCK);
    let partial: Vec<McBlock> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = indexed_stream(seed, "mc/block", b);
            let len = MC_BLOCK.min(n_real - b * MC_BLOCK);
            let mut acc = McBlock::new(k);
            for _ in 0..len {
                let ch = sampler.sample(&mut rng);
                let obs = estimation::receive_pilots(scenario, &ch, &mut rng);
                let det = mrc_detectors(&est.estimate(scenario, &obs));
                let w_sat = CMatrix::from_fn(scenario.num_antennas(), k, |i, u| det.sat[u][i]);
                let h = CMatrix::from_fn(scenario.num_antennas(), k, |i, u| ch.h[u][i]);
                // sat[(u, v)] = ĥ_uᴴ h_v; ap[(u, v)] = Σ_n ĝ_nu* g_nv.
                let sat = w_sat.adjoint() * &h;
                let ap = det.ap.conjugate() * ch.g.transpose();
                acc.count += 1.0;
                for u in 0..k {
                    for v in 0..k {
                        let o = sat[(u, v)] * (sat_w[u] * sat_w[v]) + ap[(u, v)] * (ap_w[u] * ap_w[v]);
                        if u == v {
                            acc.push_self(u, o);
                        } else {
                            acc.power[(u, v)] += o.norm_sqr();
                        }
                    }
                    acc.noise[u] += sat_w[u] * det.sat[u].norm_squared() * c.noise_var_sat_w
                        + ap_w[u] * det.ap.row(u).norm_squared() * c.noise_var_ap_w;
                }
            }
            acc
        })
        .collect();
    let total = partial.iter().skip(1).fold(partial[0].clone(), |acc, b| acc.merge(b));

    let n = total.count;
    let sinr = (0..k)
        .map(|u| {
            if !assoc.is_served(u) || p[u] == 0.0 {
                return 0.0;
            }
            let signal = p[u] * total.mean[u].norm_sqr();
            let mut interference = p[u] * total.m2[u] / n;
            for v in (0..k).filter(|&v| v != u) {
                interference += p[v] * total.power[(u, v)] / n;
            }
            signal / (interference + total.noise[u] / n)
        })
        .collect();
    let mut warnings = Vec::new();
    if n_real < MIN_MC_REALIZATIONS {
        warnings.push(format!(
            "only {n_real} Monte-Carlo realizations (at least {MIN_MC_REALIZATIONS} recommended)"
        ));
    }
    report(c, sinr, "monte-carlo", n_real, warnings)
}

/// Rates of every user by the chosen method.
pub fn all_rates(
    scenario: &NetworkScenario,
    assoc: &AssociationPattern,
    powers: &PowerAllocation,
    method: RateMethod,
) -> Result<RateReport> {
    match method {
        RateMethod::ClosedForm => LinkStatistics::new(scenario)?.report(assoc, powers),
        RateMethod::MonteCarlo { realizations, seed } => sinr_monte_carlo(scenario, assoc, powers, realizations, seed),
    }
}
