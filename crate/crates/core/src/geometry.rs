//! Network layout, large-scale channel statistics and small-scale fading.
//!
//! Terrestrial links follow a rural log-distance law with log-normal shadowing.
//! The satellite link combines free-space loss over the slant range with the
//! normalized circular-aperture beam pattern. Satellite small-scale fading is
//! Rician: the LoS part is a scaled uniform-linear-array steering vector and the
//! NLoS part has an exponential correlation matrix, with the power split fixed by
//! the Rician factor so that `‖h̄_k‖² + tr(R_k) = M β_k`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::io::stream::indexed_stream;
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type Point = [f64; 3];

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Thermal noise power in watts: `-174 dBm/Hz + 10 log10(B) + NF`.
pub fn noise_variance_w(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    let dbm = -174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db;
    db_to_linear(dbm - 30.0)
}

fn distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConstants {
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub coherence_symbols: usize,
    pub num_users: usize,
    pub num_aps: usize,
    pub num_sat_antennas: usize,
    pub pilot_power_w: f64,
    pub data_power_max_w: f64,
    pub noise_var_ap_w: f64,
    pub noise_var_sat_w: f64,
    pub ap_antenna_gain_dbi: f64,
    pub user_antenna_gain_dbi: f64,
    pub sat_antenna_gain_dbi: f64,
    pub aperture_radius_m: f64,
    pub sat_altitude_m: f64,
    pub earth_radius_m: f64,
}

impl RadioConstants {
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Fraction of the coherence block left for data, `1 - K/τ_c`.
    pub fn prelog(&self) -> f64 {
        1.0 - self.num_users as f64 / self.coherence_symbols as f64
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
            }
        }
        fn non_negative(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be non-negative, got {v}")))
            }
        }
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("carrier_hz", self.carrier_hz)?;
        for (name, v) in [
            ("num_users", self.num_users),
            ("num_aps", self.num_aps),
            ("num_sat_antennas", self.num_sat_antennas),
        ] {
            if v == 0 {
                return Err(Error::invalid(name, "must be at least 1"));
            }
        }
        if self.coherence_symbols <= self.num_users {
            return Err(Error::invalid(
                "coherence_symbols",
                format!(
                    "tau_c = {} must exceed the number of users K = {} (pilot phase leaves no data symbols)",
                    self.coherence_symbols, self.num_users
                ),
            ));
        }
        non_negative("pilot_power_w", self.pilot_power_w)?;
        non_negative("data_power_max_w", self.data_power_max_w)?;
        positive("noise_var_ap_w", self.noise_var_ap_w)?;
        positive("noise_var_sat_w", self.noise_var_sat_w)?;
        non_negative("aperture_radius_m", self.aperture_radius_m)?;
        positive("sat_altitude_m", self.sat_altitude_m)?;
        positive("earth_radius_m", self.earth_radius_m)?;
        for (name, v) in [
            ("ap_antenna_gain_dbi", self.ap_antenna_gain_dbi),
            ("user_antenna_gain_dbi", self.user_antenna_gain_dbi),
            ("sat_antenna_gain_dbi", self.sat_antenna_gain_dbi),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    pub area_x_m: f64,
    pub area_y_m: f64,
    pub ap_height_m: f64,
    pub user_height_m: f64,
    pub sat_position: Point,
    /// Ground point the satellite beam is steered to.
    pub beam_center: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub shadow_std_ap_db: f64,
    pub shadow_std_sat_db: f64,
    /// LoS-to-NLoS power ratio κ of the satellite link; `f64::INFINITY` is pure LoS.
    pub rician_k: f64,
    /// Exponential correlation coefficient ρ ∈ [0, 1).
    pub correlation_rho: f64,
    pub min_distance_m: f64,
}

impl ChannelParams {
    pub fn los_fraction(&self) -> f64 {
        if self.rician_k.is_infinite() {
            1.0
        } else {
            self.rician_k / (1.0 + self.rician_k)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shadow_std_ap_db >= 0.0 && self.shadow_std_ap_db.is_finite()) {
            return Err(Error::invalid("shadow_std_ap_db", "must be non-negative"));
        }
        if !(self.shadow_std_sat_db >= 0.0 && self.shadow_std_sat_db.is_finite()) {
            return Err(Error::invalid("shadow_std_sat_db", "must be non-negative"));
        }
        if !(self.rician_k >= 0.0) {
            return Err(Error::invalid("rician_k", "must be non-negative (inf allowed)"));
        }
        if !(0.0..1.0).contains(&self.correlation_rho) {
            return Err(Error::invalid("correlation_rho", "must lie in [0, 1)"));
        }
        if !(self.min_distance_m > 0.0) {
            return Err(Error::invalid("min_distance_m", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub radio: RadioConstants,
    pub layout: LayoutParams,
    pub channel: ChannelParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub ap_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
    pub sat_position: Point,
    pub beam_center: Point,
}

impl Geometry {
    /// Cosine of the angle between the satellite→user direction and the array axis (x).
    pub fn array_cosine(&self, user: usize) -> f64 {
        let v = sub(&self.user_positions[user], &self.sat_position);
        v[0] / dot(&v, &v).sqrt()
    }

    /// Elevation of the satellite seen from the user, in radians.
    pub fn elevation(&self, user: usize) -> f64 {
        let v = sub(&self.sat_position, &self.user_positions[user]);
        (v[2] / dot(&v, &v).sqrt()).asin()
    }

    /// Angle at the satellite between the beam centre and the user.
    pub fn beam_offset_angle(&self, user: usize) -> f64 {
        let to_center = sub(&self.beam_center, &self.sat_position);
        let to_user = sub(&self.user_positions[user], &self.sat_position);
        let c = dot(&to_center, &to_user) / (dot(&to_center, &to_center) * dot(&to_user, &to_user)).sqrt();
        c.clamp(-1.0, 1.0).acos()
    }

    pub fn ap_user_distance(&self, ap: usize, user: usize) -> f64 {
        distance(&self.ap_positions[ap], &self.user_positions[user])
    }
}

/// Per-user satellite link diagnostics kept alongside the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatelliteLink {
    pub elevation_rad: f64,
    pub slant_range_m: f64,
    pub beam_gain_db: f64,
    pub pathloss_db: f64,
}

/// Deterministic statistics layer of one network draw.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkScenario {
    pub constants: RadioConstants,
    pub geometry: Geometry,
    /// K×N linear large-scale gains β_nk (row = user, column = AP).
    pub beta_terrestrial: DMatrix<f64>,
    pub beta_sat: Vec<f64>,
    pub los_vectors: Vec<CVector>,
    pub correlation: Vec<CMatrix>,
    pub sat_links: Vec<SatelliteLink>,
}

impl NetworkScenario {
    pub fn num_users(&self) -> usize {
        self.constants.num_users
    }

    pub fn num_aps(&self) -> usize {
        self.constants.num_aps
    }

    pub fn num_antennas(&self) -> usize {
        self.constants.num_sat_antennas
    }

    /// Checks dimensions, positivity and PSD invariants.
    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        let (k, n, m) = (self.num_users(), self.num_aps(), self.num_antennas());
        if self.beta_terrestrial.nrows() != k || self.beta_terrestrial.ncols() != n {
            return Err(Error::Internal("beta_terrestrial has wrong shape".into()));
        }
        if self.beta_sat.len() != k || self.los_vectors.len() != k || self.correlation.len() != k {
            return Err(Error::Internal(
                "per-user satellite statistics have wrong length".into(),
            ));
        }
        if self.beta_terrestrial.iter().any(|b| !(b.is_finite() && *b > 0.0))
            || self.beta_sat.iter().any(|b| !(b.is_finite() && *b > 0.0))
        {
            return Err(Error::Internal("large-scale gains must be positive".into()));
        }
        for (h, r) in self.los_vectors.iter().zip(&self.correlation) {
            if h.len() != m || r.nrows() != m || r.ncols() != m {
                return Err(Error::Internal("satellite statistics have wrong dimension".into()));
            }
            if !h.norm_squared().is_finite() {
                return Err(Error::Internal("LoS vector is not finite".into()));
            }
            let scale = linalg::trace(r).re.abs().max(r.norm());
            if linalg::hermitian_deviation(r) > 1e-10 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Internal("correlation matrix is not Hermitian".into()));
            }
        }
        Ok(())
    }
}

/// One draw of all small-scale channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// K×N terrestrial channels g_nk.
    pub g: DMatrix<C64>,
    pub h: Vec<CVector>,
}

/// Rural terrestrial path loss in dB (carrier in GHz, distance in m).
pub fn terrestrial_pathloss_db(
    ap_gain_dbi: f64,
    user_gain_dbi: f64,
    carrier_hz: f64,
    distance_m: f64,
    shadow_db: f64,
) -> Result<f64> {
    if !(carrier_hz > 0.0) {
        return Err(Error::invalid("carrier_hz", "must be positive"));
    }
    if !(distance_m > 0.0) {
        return Err(Error::invalid("distance_m", "must be positive"));
    }
    let d = distance_m.max(1.0);
    let f_ghz = carrier_hz / 1e9;
    Ok(ap_gain_dbi + user_gain_dbi - 8.50 - 20.0 * f_ghz.log10() - 38.63 * d.log10() + shadow_db)
}

/// Satellite large-scale fading in dB (carrier in GHz, slant range in m).
pub fn satellite_pathloss_db(
    sat_gain_dbi: f64,
    user_gain_dbi: f64,
    beam_gain_db: f64,
    carrier_hz: f64,
    slant_range_m: f64,
    shadow_db: f64,
) -> Result<f64> {
    if !(carrier_hz > 0.0) {
        return Err(Error::invalid("carrier_hz", "must be positive"));
    }
    if !(slant_range_m > 0.0) {
        return Err(Error::invalid("slant_range_m", "must be positive"));
    }
    let f_ghz = carrier_hz / 1e9;
    Ok(sat_gain_dbi + user_gain_dbi + beam_gain_db - 32.45 - 20.0 * (f_ghz * slant_range_m).log10() + shadow_db)
}

/// `4 |J1(x)/x|²` with the boresight limit 1 at `x = 0`.
pub fn beam_pattern_normalized(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        return 1.0;
    }
    let r = libm::j1(x) / x;
    4.0 * r * r
}

pub fn beam_pattern_gain(angle_rad: f64, aperture_radius_m: f64, wavelength_m: f64) -> Result<f64> {
    if !(0.0..=PI / 2.0).contains(&angle_rad) {
        return Err(Error::invalid("angle_rad", format!("{angle_rad} outside [0, pi/2]")));
    }
    if !(wavelength_m > 0.0) {
        return Err(Error::invalid("wavelength_m", "must be positive"));
    }
    let x = 2.0 * PI / wavelength_m * aperture_radius_m * angle_rad.sin();
    Ok(beam_pattern_normalized(x))
}

/// Distance from a ground user to a satellite at `altitude_m`, seen at elevation ε.
pub fn slant_range(elevation_rad: f64, altitude_m: f64, earth_radius_m: f64) -> Result<f64> {
    if !(elevation_rad > 0.0 && elevation_rad <= PI / 2.0) {
        return Err(Error::invalid(
            "elevation_rad",
            format!("{elevation_rad} outside (0, pi/2]"),
        ));
    }
    let rs = earth_radius_m * elevation_rad.sin();
    Ok((rs * rs + altitude_m * altitude_m + 2.0 * altitude_m * earth_radius_m).sqrt() - rs)
}

/// Phase progression of the half-wavelength ULA for a given array cosine.
fn ula_phase(array_cosine: f64) -> f64 {
    PI * array_cosine
}

/// NLoS correlation `R_k = β_k/(1+κ) · C(ρ)` with `C[i,j] = ρ^|i-j| e^{jθ(i-j)}`.
pub fn build_spatial_correlation(
    user_index: usize,
    geometry: &Geometry,
    params: &ChannelParams,
    beta_sat: f64,
    num_antennas: usize,
) -> CMatrix {
    let nlos_power = beta_sat * (1.0 - params.los_fraction());
    if nlos_power == 0.0 {
        return CMatrix::zeros(num_antennas, num_antennas);
    }
    let theta = ula_phase(geometry.array_cosine(user_index));
    let rho = params.correlation_rho;
    CMatrix::from_fn(num_antennas, num_antennas, |i, j| {
        let lag = i as i64 - j as i64;
        let mag = if lag == 0 {
            1.0
        } else {
            rho.powi(lag.unsigned_abs() as i32)
        };
        C64::from_polar(nlos_power * mag, theta * lag as f64)
    })
}

/// LoS mean `h̄_k = sqrt(β_k κ/(1+κ)) a(θ_k)` with a unit-modulus ULA steering vector.
pub fn build_los_vector(
    user_index: usize,
    geometry: &Geometry,
    params: &ChannelParams,
    beta_sat: f64,
    num_antennas: usize,
) -> CVector {
    let amplitude = (beta_sat * params.los_fraction()).sqrt();
    let theta = ula_phase(geometry.array_cosine(user_index));
    CVector::from_fn(num_antennas, |m, _| C64::from_polar(amplitude, theta * m as f64))
}

fn normal(std: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, std).map_err(|e| Error::invalid("shadow_std", e.to_string()))
}

/// Builds a scenario from a configuration and a master seed.
///
/// Each user and each AP owns a labeled sub-stream, so growing `K` or `N` keeps the
/// existing users, APs and their shadowing unchanged.
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<NetworkScenario> {
    let radio = &config.radio;
    radio.validate()?;
    config.channel.validate()?;
    let layout = &config.layout;
    if !(layout.area_x_m > 0.0 && layout.area_y_m > 0.0) {
        return Err(Error::invalid("area", "extents must be positive"));
    }
    let (k, n, m) = (radio.num_users, radio.num_aps, radio.num_sat_antennas);
    let shadow_ap = normal(config.channel.shadow_std_ap_db)?;
    let shadow_sat = normal(config.channel.shadow_std_sat_db)?;

    let ap_positions: Vec<Point> = (0..n)
        .map(|i| {
            let mut rng = indexed_stream(seed, "scenario/ap", i);
            [
                rng.random::<f64>() * layout.area_x_m,
                rng.random::<f64>() * layout.area_y_m,
                layout.ap_height_m,
            ]
        })
        .collect();

    let mut user_positions = Vec::with_capacity(k);
    let mut sat_shadow = Vec::with_capacity(k);
    let mut ap_shadow = DMatrix::<f64>::zeros(k, n);
    for u in 0..k {
        let mut rng = indexed_stream(seed, "scenario/user", u);
        user_positions.push([
            rng.random::<f64>() * layout.area_x_m,
            rng.random::<f64>() * layout.area_y_m,
            layout.user_height_m,
        ]);
        sat_shadow.push(shadow_sat.sample(&mut rng));
        for a in 0..n {
            ap_shadow[(u, a)] = shadow_ap.sample(&mut rng);
        }
    }

    let geometry = Geometry {
        ap_positions,
        user_positions,
        sat_position: layout.sat_position,
        beam_center: layout.beam_center,
    };

    let mut beta_terrestrial = DMatrix::<f64>::zeros(k, n);
    for u in 0..k {
        for a in 0..n {
            let d = geometry.ap_user_distance(a, u).max(config.channel.min_distance_m);
            let db = terrestrial_pathloss_db(
                radio.ap_antenna_gain_dbi,
                radio.user_antenna_gain_dbi,
                radio.carrier_hz,
                d,
                ap_shadow[(u, a)],
            )?;
            beta_terrestrial[(u, a)] = db_to_linear(db);
        }
    }

    let wavelength = radio.wavelength_m();
    let mut sat_links = Vec::with_capacity(k);
    let mut beta_sat = Vec::with_capacity(k);
    for u in 0..k {
        let elevation = geometry.elevation(u);
        let range = slant_range(elevation, radio.sat_altitude_m, radio.earth_radius_m)?;
        let angle = geometry.beam_offset_angle(u).min(PI / 2.0);
        let gain = beam_pattern_gain(angle, radio.aperture_radius_m, wavelength)?;
        let beam_gain_db = linear_to_db(gain.max(1e-30));
        let pathloss_db = satellite_pathloss_db(
            radio.sat_antenna_gain_dbi,
            radio.user_antenna_gain_dbi,
            beam_gain_db,
            radio.carrier_hz,
            range,
            sat_shadow[u],
        )?;
        beta_sat.push(db_to_linear(pathloss_db));
        sat_links.push(SatelliteLink {
            elevation_rad: elevation,
            slant_range_m: range,
            beam_gain_db,
            pathloss_db,
        });
    }

    let los_vectors = (0..k)
        .map(|u| build_los_vector(u, &geometry, &config.channel, beta_sat[u], m))
        .collect();
    let correlation = (0..k)
        .map(|u| build_spatial_correlation(u, &geometry, &config.channel, beta_sat[u], m))
        .collect();

    let scenario = NetworkScenario {
        constants: radio.clone(),
        geometry,
        beta_terrestrial,
        beta_sat,
        los_vectors,
        correlation,
        sat_links,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Samples channels with precomputed correlation roots; reuse across many draws.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    sqrt_beta: DMatrix<f64>,
    los: Vec<CVector>,
    roots: Vec<Option<CMatrix>>,
}

impl ChannelSampler {
    pub fn new(scenario: &NetworkScenario) -> Result<Self> {
        let roots = scenario
            .correlation
            .iter()
            .map(|r| {
                if r.norm() == 0.0 {
                    Ok(None)
                } else {
                    linalg::psd_sqrt(r).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ChannelSampler {
            sqrt_beta: scenario.beta_terrestrial.map(f64::sqrt),
            los: scenario.los_vectors.clone(),
            roots,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let g = DMatrix::from_fn(self.sqrt_beta.nrows(), self.sqrt_beta.ncols(), |k, n| {
            linalg::complex_normal(rng, 1.0) * self.sqrt_beta[(k, n)]
        });
        let h = self
            .los
            .iter()
            .zip(&self.roots)
            .map(|(mean, root)| match root {
                Some(l) => mean + l * linalg::standard_complex_vector(rng, mean.len()),
                None => mean.clone(),
            })
            .collect();
        ChannelRealization { g, h }
    }
}

pub fn sample_channels<R: Rng + ?Sized>(scenario: &NetworkScenario, rng: &mut R) -> Result<ChannelRealization> {
    Ok(ChannelSampler::new(scenario)?.sample(rng))
}
