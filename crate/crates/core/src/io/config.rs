//! Line-based `key = value` configuration with dotted section keys.
//!
//! ```text
//! # comments start with '#'
//! radio.num_users = 20
//! radio.num_aps = 10
//! ga.population = 50
//! utility.kind = maxmin
//! ```
//!
//! Every key has a default, so an empty file is a complete configuration.
//! [`SimConfig::emit`] writes every key back out and reparses to an equal value.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::fairness::UtilityKind;
use crate::ga::{GaConfig, ParentSelection};
use crate::geometry::{self, ChannelParams, LayoutParams, RadioConstants, ScenarioConfig};
use crate::hga::HgaConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Bcga,
    Hga,
    Exhaustive,
}

impl OptimizerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizerKind::Bcga => "bcga",
            OptimizerKind::Hga => "hga",
            OptimizerKind::Exhaustive => "exhaustive",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bcga" | "ga" => Ok(OptimizerKind::Bcga),
            "hga" => Ok(OptimizerKind::Hga),
            "exhaustive" => Ok(OptimizerKind::Exhaustive),
            other => Err(format!(
                "unknown optimizer `{other}` (expected bcga, hga or exhaustive)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadioSection {
    pub bandwidth_mhz: f64,
    pub carrier_ghz: f64,
    pub tau_c: usize,
    pub num_users: usize,
    pub num_aps: usize,
    pub num_sat_antennas: usize,
    pub data_power_dbw: f64,
    /// Defaults to the data power when unset.
    pub pilot_power_dbw: Option<f64>,
    pub noise_figure_ap_db: f64,
    pub noise_figure_sat_db: f64,
    pub ap_gain_dbi: f64,
    pub user_gain_dbi: f64,
    pub sat_gain_dbi: f64,
    pub aperture_radius_m: f64,
    pub earth_radius_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaSection {
    pub x_km: f64,
    pub y_km: f64,
    pub ap_height_m: f64,
    pub user_height_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SatelliteSection {
    pub x_km: f64,
    pub y_km: f64,
    pub z_km: f64,
    /// Beam centre relative to the centre of the area, on the ground.
    pub beam_offset_x_km: f64,
    pub beam_offset_y_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HgaSection {
    pub eta_c: f64,
    pub eta_m: f64,
    pub real_mutation_rate: f64,
    pub literal_counts: bool,
    /// Run the BCGA first and seed its best association into the HGA.
    pub warm_start: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub radio: RadioSection,
    pub area: AreaSection,
    pub satellite: SatelliteSection,
    pub channel: ChannelParams,
    pub utility: UtilityKind,
    pub optimizer: OptimizerKind,
    pub ga: GaConfig,
    pub hga: HgaSection,
    pub exhaustive_include_zero: bool,
    pub exhaustive_max_bits: usize,
    pub mc_realizations: usize,
    pub validate_tolerance: f64,
    /// Association bit string checked by `validate`; full association when unset.
    pub validate_pattern: Option<String>,
    pub seed: u64,
    pub output_dir: String,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            radio: RadioSection {
                bandwidth_mhz: 100.0,
                carrier_ghz: 20.0,
                tau_c: 10_000,
                num_users: 15,
                num_aps: 15,
                num_sat_antennas: 100,
                data_power_dbw: 20.0,
                pilot_power_dbw: None,
                noise_figure_ap_db: 6.0,
                noise_figure_sat_db: 1.3,
                ap_gain_dbi: 10.0,
                user_gain_dbi: 10.0,
                sat_gain_dbi: 26.9,
                aperture_radius_m: 0.25,
                earth_radius_km: 6371.0,
            },
            area: AreaSection {
                // 15 km² square.
                x_km: 15f64.sqrt(),
                y_km: 15f64.sqrt(),
                ap_height_m: 10.0,
                user_height_m: 1.5,
            },
            satellite: SatelliteSection {
                x_km: 300.0,
                y_km: 350.0,
                z_km: 400.0,
                beam_offset_x_km: 0.0,
                beam_offset_y_km: 0.0,
            },
            channel: ChannelParams {
                shadow_std_ap_db: 7.0,
                shadow_std_sat_db: 4.0,
                rician_k: 10.0,
                correlation_rho: 0.5,
                min_distance_m: 1.0,
            },
            utility: UtilityKind::Arithmetic,
            optimizer: OptimizerKind::Bcga,
            ga: GaConfig::default(),
            hga: HgaSection {
                eta_c: 15.0,
                eta_m: 20.0,
                real_mutation_rate: 1.0,
                literal_counts: false,
                warm_start: false,
            },
            exhaustive_include_zero: true,
            exhaustive_max_bits: 26,
            mc_realizations: 50_000,
            validate_tolerance: 0.02,
            validate_pattern: None,
            seed: 1,
            output_dir: "out".into(),
        }
    }
}

fn parse_f64(v: &str) -> std::result::Result<f64, String> {
    v.parse::<f64>().map_err(|_| format!("expected a number, got `{v}`"))
}

fn parse_usize(v: &str) -> std::result::Result<usize, String> {
    v.parse::<usize>()
        .map_err(|_| format!("expected a non-negative integer, got `{v}`"))
}

fn parse_u64(v: &str) -> std::result::Result<u64, String> {
    v.parse::<u64>()
        .map_err(|_| format!("expected a non-negative integer, got `{v}`"))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

impl SimConfig {
    /// Sets one key; the error is the bare message (no location).
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = unquote(value.trim());
        match key {
            "radio.bandwidth_mhz" => self.radio.bandwidth_mhz = parse_f64(v)?,
            "radio.carrier_ghz" => self.radio.carrier_ghz = parse_f64(v)?,
            "radio.tau_c" => self.radio.tau_c = parse_usize(v)?,
            "radio.num_users" => self.radio.num_users = parse_usize(v)?,
            "radio.num_aps" => self.radio.num_aps = parse_usize(v)?,
            "radio.num_sat_antennas" => self.radio.num_sat_antennas = parse_usize(v)?,
            "radio.data_power_dbw" => self.radio.data_power_dbw = parse_f64(v)?,
            "radio.pilot_power_dbw" => self.radio.pilot_power_dbw = Some(parse_f64(v)?),
            "radio.noise_figure_ap_db" => self.radio.noise_figure_ap_db = parse_f64(v)?,
            "radio.noise_figure_sat_db" => self.radio.noise_figure_sat_db = parse_f64(v)?,
            "radio.ap_gain_dbi" => self.radio.ap_gain_dbi = parse_f64(v)?,
            "radio.user_gain_dbi" => self.radio.user_gain_dbi = parse_f64(v)?,
            "radio.sat_gain_dbi" => self.radio.sat_gain_dbi = parse_f64(v)?,
            "radio.aperture_radius_m" => self.radio.aperture_radius_m = parse_f64(v)?,
            "radio.earth_radius_km" => self.radio.earth_radius_km = parse_f64(v)?,
            "area.x_km" => self.area.x_km = parse_f64(v)?,
            "area.y_km" => self.area.y_km = parse_f64(v)?,
            "area.ap_height_m" => self.area.ap_height_m = parse_f64(v)?,
            "area.user_height_m" => self.area.user_height_m = parse_f64(v)?,
            "satellite.x_km" => self.satellite.x_km = parse_f64(v)?,
            "satellite.y_km" => self.satellite.y_km = parse_f64(v)?,
            "satellite.z_km" => self.satellite.z_km = parse_f64(v)?,
            "satellite.beam_offset_x_km" => self.satellite.beam_offset_x_km = parse_f64(v)?,
            "satellite.beam_offset_y_km" => self.satellite.beam_offset_y_km = parse_f64(v)?,
            "channel.shadow_std_ap_db" => self.channel.shadow_std_ap_db = parse_f64(v)?,
            "channel.shadow_std_sat_db" => self.channel.shadow_std_sat_db = parse_f64(v)?,
            "channel.rician_k" => self.channel.rician_k = parse_f64(v)?,
            "channel.correlation_rho" => self.channel.correlation_rho = parse_f64(v)?,
            "channel.min_distance_m" => self.channel.min_distance_m = parse_f64(v)?,
            "utility.kind" => self.utility = v.parse()?,
            "optimizer.kind" => self.optimizer = v.parse()?,
            "ga.population" => self.ga.population = parse_usize(v)?,
            "ga.generations" => self.ga.max_generations = parse_usize(v)?,
            "ga.crossover_rate" => self.ga.crossover_rate = parse_f64(v)?,
            "ga.mutation_rate" => self.ga.mutation_rate = parse_f64(v)?,
            "ga.eps_one_point" => self.ga.eps_one_point = parse_f64(v)?,
            "ga.eps_two_point" => self.ga.eps_two_point = parse_f64(v)?,
            "ga.adaptive_eps" => self.ga.adaptive_eps = parse_bool(v)?,
            "ga.mutate_max_fraction" => self.ga.mutate_max_fraction = parse_f64(v)?,
            "ga.flip_count" => self.ga.flip_count = v.parse()?,
            "ga.parent_selection" => self.ga.parent_selection = v.parse()?,
            "hga.eta_c" => self.hga.eta_c = parse_f64(v)?,
            "hga.eta_m" => self.hga.eta_m = parse_f64(v)?,
            "hga.real_mutation_rate" => self.hga.real_mutation_rate = parse_f64(v)?,
            "hga.literal_counts" => self.hga.literal_counts = parse_bool(v)?,
            "hga.warm_start" => self.hga.warm_start = parse_bool(v)?,
            "exhaustive.include_zero" => self.exhaustive_include_zero = parse_bool(v)?,
            "exhaustive.max_bits" => self.exhaustive_max_bits = parse_usize(v)?,
            "mc.realizations" => self.mc_realizations = parse_usize(v)?,
            "validate.tolerance" => self.validate_tolerance = parse_f64(v)?,
            "validate.pattern" => {
                if v.is_empty() || !v.chars().all(|c| c == '0' || c == '1') {
                    return Err(format!("expected a string of 0/1 flags, got `{v}`"));
                }
                self.validate_pattern = Some(v.to_string());
            }
            "run.seed" => self.seed = parse_u64(v)?,
            "output.dir" => self.output_dir = v.to_string(),
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let r = &self.radio;
        let mut out = vec![
            ("radio.bandwidth_mhz", r.bandwidth_mhz.to_string()),
            ("radio.carrier_ghz", r.carrier_ghz.to_string()),
            ("radio.tau_c", r.tau_c.to_string()),
            ("radio.num_users", r.num_users.to_string()),
            ("radio.num_aps", r.num_aps.to_string()),
            ("radio.num_sat_antennas", r.num_sat_antennas.to_string()),
            ("radio.data_power_dbw", r.data_power_dbw.to_string()),
        ];
        if let Some(p) = r.pilot_power_dbw {
            out.push(("radio.pilot_power_dbw", p.to_string()));
        }
        out.extend([
            ("radio.noise_figure_ap_db", r.noise_figure_ap_db.to_string()),
            ("radio.noise_figure_sat_db", r.noise_figure_sat_db.to_string()),
            ("radio.ap_gain_dbi", r.ap_gain_dbi.to_string()),
            ("radio.user_gain_dbi", r.user_gain_dbi.to_string()),
            ("radio.sat_gain_dbi", r.sat_gain_dbi.to_string()),
            ("radio.aperture_radius_m", r.aperture_radius_m.to_string()),
            ("radio.earth_radius_km", r.earth_radius_km.to_string()),
            ("area.x_km", self.area.x_km.to_string()),
            ("area.y_km", self.area.y_km.to_string()),
            ("area.ap_height_m", self.area.ap_height_m.to_string()),
            ("area.user_height_m", self.area.user_height_m.to_string()),
            ("satellite.x_km", self.satellite.x_km.to_string()),
            ("satellite.y_km", self.satellite.y_km.to_string()),
            ("satellite.z_km", self.satellite.z_km.to_string()),
            (
                "satellite.beam_offset_x_km",
                self.satellite.beam_offset_x_km.to_string(),
            ),
            (
                "satellite.beam_offset_y_km",
                self.satellite.beam_offset_y_km.to_string(),
            ),
            ("channel.shadow_std_ap_db", self.channel.shadow_std_ap_db.to_string()),
            ("channel.shadow_std_sat_db", self.channel.shadow_std_sat_db.to_string()),
            ("channel.rician_k", self.channel.rician_k.to_string()),
            ("channel.correlation_rho", self.channel.correlation_rho.to_string()),
            ("channel.min_distance_m", self.channel.min_distance_m.to_string()),
            ("utility.kind", self.utility.as_str().to_string()),
            ("optimizer.kind", self.optimizer.as_str().to_string()),
            ("ga.population", self.ga.population.to_string()),
            ("ga.generations", self.ga.max_generations.to_string()),
            ("ga.crossover_rate", self.ga.crossover_rate.to_string()),
            ("ga.mutation_rate", self.ga.mutation_rate.to_string()),
            ("ga.eps_one_point", self.ga.eps_one_point.to_string()),
            ("ga.eps_two_point", self.ga.eps_two_point.to_string()),
            ("ga.adaptive_eps", self.ga.adaptive_eps.to_string()),
            ("ga.mutate_max_fraction", self.ga.mutate_max_fraction.to_string()),
            ("ga.flip_count", self.ga.flip_count.as_str().to_string()),
            ("ga.parent_selection", self.ga.parent_selection.as_str().to_string()),
            ("hga.eta_c", self.hga.eta_c.to_string()),
            ("hga.eta_m", self.hga.eta_m.to_string()),
            ("hga.real_mutation_rate", self.hga.real_mutation_rate.to_string()),
            ("hga.literal_counts", self.hga.literal_counts.to_string()),
            ("hga.warm_start", self.hga.warm_start.to_string()),
            ("exhaustive.include_zero", self.exhaustive_include_zero.to_string()),
            ("exhaustive.max_bits", self.exhaustive_max_bits.to_string()),
            ("mc.realizations", self.mc_realizations.to_string()),
            ("validate.tolerance", self.validate_tolerance.to_string()),
            ("run.seed", self.seed.to_string()),
            ("output.dir", format!("\"{}\"", self.output_dir)),
        ]);
        if let Some(p) = &self.validate_pattern {
            out.push(("validate.pattern", p.clone()));
        }
        out
    }

    pub fn emit(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Parses and validates configuration text on top of the defaults.
    pub fn load(text: &str) -> Result<SimConfig> {
        SimConfig::default().apply_text(text)
    }

    /// Parses `text` over `self`, then validates.
    pub fn apply_text(mut self, text: &str) -> Result<SimConfig> {
        let mut lines: HashMap<String, usize> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) if !raw[..pos].contains('"') => &raw[..pos],
                _ => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                key: line.to_string(),
                message: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            self.set(key, value).map_err(|message| Error::Config {
                line: line_no,
                key: key.to_string(),
                message,
            })?;
            lines.insert(key.to_string(), line_no);
        }
        self.validate_with_lines(&lines)?;
        Ok(self)
    }

    /// Applies `key=value` overrides (CLI `--set`), validating afterwards.
    pub fn apply_overrides<S: AsRef<str>>(mut self, overrides: &[S]) -> Result<SimConfig> {
        let mut lines = HashMap::new();
        for (i, item) in overrides.iter().enumerate() {
            let item = item.as_ref();
            let (key, value) = item.split_once('=').ok_or_else(|| Error::Config {
                line: 0,
                key: item.to_string(),
                message: "override must be `key=value`".into(),
            })?;
            let key = key.trim();
            self.set(key, value).map_err(|message| Error::Config {
                line: 0,
                key: key.to_string(),
                message: format!("(override #{}) {message}", i + 1),
            })?;
            lines.insert(key.to_string(), 0);
        }
        self.validate_with_lines(&lines)?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_lines(&HashMap::new())
    }

    fn validate_with_lines(&self, lines: &HashMap<String, usize>) -> Result<()> {
        let locate = |key: &str, message: String| Error::Config {
            line: lines.get(key).copied().unwrap_or(0),
            key: key.to_string(),
            message,
        };
        if let Err(Error::InvalidParameter { name, reason }) = self.radio_constants().and_then(|r| r.validate()) {
            let key = match name {
                "bandwidth_hz" => "radio.bandwidth_mhz",
                "carrier_hz" => "radio.carrier_ghz",
                "coherence_symbols" => "radio.tau_c",
                "num_users" => "radio.num_users",
                "num_aps" => "radio.num_aps",
                "num_sat_antennas" => "radio.num_sat_antennas",
                "pilot_power_w" => "radio.pilot_power_dbw",
                "data_power_max_w" => "radio.data_power_dbw",
                "noise_var_ap_w" => "radio.noise_figure_ap_db",
                "noise_var_sat_w" => "radio.noise_figure_sat_db",
                "aperture_radius_m" => "radio.aperture_radius_m",
                "sat_altitude_m" => "satellite.z_km",
                "earth_radius_m" => "radio.earth_radius_km",
                "ap_antenna_gain_dbi" => "radio.ap_gain_dbi",
                "user_antenna_gain_dbi" => "radio.user_gain_dbi",
                _ => "radio.sat_gain_dbi",
            };
            // The tau_c/K invariant may have been broken by either key.
            let key = if key == "radio.tau_c" && !lines.contains_key(key) {
                "radio.num_users"
            } else {
                key
            };
            return Err(locate(key, reason));
        }
        if let Err(Error::InvalidParameter { name, reason }) = self.channel.validate() {
            return Err(locate(&format!("channel.{name}"), reason));
        }
        for (key, v) in [("area.x_km", self.area.x_km), ("area.y_km", self.area.y_km)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(locate(key, "must be positive".into()));
            }
        }
        if let Err(Error::InvalidParameter { name, reason }) = self.ga.validate() {
            return Err(locate(&format!("ga.{name}"), reason));
        }
        if let Err(Error::InvalidParameter { name, reason }) = self.hga_config().validate() {
            return Err(locate(&format!("hga.{name}"), reason));
        }
        if !(self.validate_tolerance > 0.0) {
            return Err(locate("validate.tolerance", "must be positive".into()));
        }
        if let Some(p) = &self.validate_pattern {
            if p.len() != 2 * self.radio.num_users {
                return Err(locate(
                    "validate.pattern",
                    format!("{} flags for K = {} users (expected 2K)", p.len(), self.radio.num_users),
                ));
            }
        }
        Ok(())
    }

    pub fn radio_constants(&self) -> Result<RadioConstants> {
        let r = &self.radio;
        let data_w = geometry::db_to_linear(r.data_power_dbw);
        let pilot_w = r.pilot_power_dbw.map(geometry::db_to_linear).unwrap_or(data_w);
        let bandwidth_hz = r.bandwidth_mhz * 1e6;
        Ok(RadioConstants {
            bandwidth_hz,
            carrier_hz: r.carrier_ghz * 1e9,
            coherence_symbols: r.tau_c,
            num_users: r.num_users,
            num_aps: r.num_aps,
            num_sat_antennas: r.num_sat_antennas,
            pilot_power_w: pilot_w,
            data_power_max_w: data_w,
            noise_var_ap_w: geometry::noise_variance_w(bandwidth_hz, r.noise_figure_ap_db),
            noise_var_sat_w: geometry::noise_variance_w(bandwidth_hz, r.noise_figure_sat_db),
            ap_antenna_gain_dbi: r.ap_gain_dbi,
            user_antenna_gain_dbi: r.user_gain_dbi,
            sat_antenna_gain_dbi: r.sat_gain_dbi,
            aperture_radius_m: r.aperture_radius_m,
            sat_altitude_m: self.satellite.z_km * 1e3,
            earth_radius_m: r.earth_radius_km * 1e3,
        })
    }

    pub fn scenario_config(&self) -> Result<ScenarioConfig> {
        let x = self.area.x_km * 1e3;
        let y = self.area.y_km * 1e3;
        Ok(ScenarioConfig {
            radio: self.radio_constants()?,
            layout: LayoutParams {
                area_x_m: x,
                area_y_m: y,
                ap_height_m: self.area.ap_height_m,
                user_height_m: self.area.user_height_m,
                sat_position: [
                    self.satellite.x_km * 1e3,
                    self.satellite.y_km * 1e3,
                    self.satellite.z_km * 1e3,
                ],
                beam_center: [
                    x / 2.0 + self.satellite.beam_offset_x_km * 1e3,
                    y / 2.0 + self.satellite.beam_offset_y_km * 1e3,
                    0.0,
                ],
            },
            channel: self.channel.clone(),
        })
    }

    pub fn ga_config(&self) -> GaConfig {
        GaConfig {
            seed: self.seed,
            ..self.ga.clone()
        }
    }

    pub fn hga_config(&self) -> HgaConfig {
        HgaConfig {
            ga: self.ga_config(),
            sbx_eta: self.hga.eta_c,
            polymut_eta: self.hga.eta_m,
            real_mutation_rate: self.hga.real_mutation_rate,
            literal_counts: self.hga.literal_counts,
        }
    }
}

impl std::str::FromStr for ParentSelection {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uniform" => Ok(ParentSelection::Uniform),
            "tournament" => Ok(ParentSelection::Tournament),
            other => Err(format!(
                "unknown parent selection `{other}` (expected uniform or tournament)"
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = SimConfig::load("").unwrap();
        assert_eq!(cfg, SimConfig::default());
        let r = cfg.radio_constants().unwrap();
        assert_eq!(r.bandwidth_hz, 100e6);
        assert_eq!(r.carrier_hz, 20e9);
        assert_eq!(r.num_sat_antennas, 100);
        assert_eq!(r.coherence_symbols, 10_000);
        assert_eq!(r.sat_antenna_gain_dbi, 26.9);
        assert_eq!(r.ap_antenna_gain_dbi, 10.0);
        assert_eq!(r.user_antenna_gain_dbi, 10.0);
        assert!((r.data_power_max_w - 100.0).abs() < 1e-12);
        assert_eq!(r.pilot_power_w, r.data_power_max_w);
        assert!((geometry::linear_to_db(r.noise_var_ap_w) + 30.0 - -88.0).abs() < 1e-9);
        assert!((geometry::linear_to_db(r.noise_var_sat_w) + 30.0 - -92.7).abs() < 1e-9);
        assert_eq!(
            cfg.scenario_config().unwrap().layout.sat_position,
            [300e3, 350e3, 400e3]
        );
    }

    #[test]
    fn prelog_violation_names_key_and_line() {
        let err = SimConfig::load("radio.num_users = 100\n# comment\nradio.tau_c = 50\n").unwrap_err();
        match err {
            Error::Config { line, key, .. } => {
                assert_eq!(key, "radio.tau_c");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_key_and_type_mismatch() {
        match SimConfig::load("\nradio.bogus = 1").unwrap_err() {
            Error::Config { line, key, message } => {
                assert_eq!((line, key.as_str()), (2, "radio.bogus"));
                assert!(message.contains("unknown"));
            }
            other => panic!("unexpected {other}"),
        }
        match SimConfig::load("ga.population = 1.5").unwrap_err() {
            Error::Config { line, key, .. } => assert_eq!((line, key.as_str()), (1, "ga.population")),
            other => panic!("unexpected {other}"),
        }
        assert!(SimConfig::load("just words").is_err());
    }

    #[test]
    fn emit_round_trips() {
        let cfg = SimConfig::load(
            "radio.num_users = 7 # trailing comment\nutility.kind = geometric\nchannel.rician_k = inf\n\
             radio.pilot_power_dbw = 10\noutput.dir = \"results/a b\"\nga.adaptive_eps = true\n",
        )
        .unwrap();
        let again = SimConfig::load(&cfg.emit()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.output_dir, "results/a b");
        assert!(again.channel.rician_k.is_infinite());
    }

    #[test]
    fn overrides_use_the_same_validator() {
        let cfg = SimConfig::default()
            .apply_overrides(&["radio.num_users=4", "run.seed=9"])
            .unwrap();
        assert_eq!((cfg.radio.num_users, cfg.seed), (4, 9));
        assert!(SimConfig::default().apply_overrides(&["radio.tau_c=3"]).is_err());
        assert!(SimConfig::default().apply_overrides(&["nonsense"]).is_err());
    }
}
