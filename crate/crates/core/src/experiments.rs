//! Experiment drivers behind the command-line subcommands.
//!
//! Each driver is a pure function of the configuration (wall-clock fields aside)
//! and returns plain data; file output lives in the CLI.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::exhaustive::{exhaustive_search, ExhaustiveOptions, SearchResult};
use crate::fairness::{FitnessEvaluator, Genome, UtilityKind};
use crate::ga::{self, BitConstraint, GaOutcome, HistoryRow};
use crate::geometry::{generate_scenario, NetworkScenario};
use crate::hga;
use crate::io::config::{OptimizerKind, SimConfig};
use crate::io::report::{self, ModeShares, RunReport, UtilityValues};
use crate::io::stream::indexed_stream;
use crate::throughput::sinr_monte_carlo;
use crate::{Error, Result};

/// Largest scenario accepted by [`validate`].
pub const VALIDATE_LIMITS: (usize, usize, usize) = (6, 8, 16);
/// Largest K accepted by [`hitting_time`].
pub const HITTING_MAX_USERS: usize = 3;

pub fn build_scenario(cfg: &SimConfig) -> Result<NetworkScenario> {
    generate_scenario(&cfg.scenario_config()?, cfg.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateRow {
    pub user_id: usize,
    pub closed_form: f64,
    pub monte_carlo: f64,
    pub rel_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateOutcome {
    pub scenario_digest: String,
    pub pattern: String,
    pub realizations: usize,
    pub tolerance: f64,
    pub rows: Vec<ValidateRow>,
    pub worst_user: usize,
    pub max_rel_error: f64,
    pub pass: bool,
    pub warnings: Vec<String>,
}

fn parse_pattern(bits: &str) -> Genome {
    Genome::binary(bits.chars().map(|c| c == '1').collect())
}

/// Closed form against Monte Carlo on a small scenario.
pub fn validate(cfg: &SimConfig) -> Result<ValidateOutcome> {
    let (k_max, n_max, m_max) = VALIDATE_LIMITS;
    let r = &cfg.radio;
    if r.num_users > k_max || r.num_aps > n_max || r.num_sat_antennas > m_max {
        return Err(Error::invalid(
            "validate",
            format!(
                "scenario K={}, N={}, M={} exceeds the validation limit K ≤ {k_max}, N ≤ {n_max}, M ≤ {m_max}",
                r.num_users, r.num_aps, r.num_sat_antennas
            ),
        ));
    }
    let scenario = build_scenario(cfg)?;
    let genome = match &cfg.validate_pattern {
        Some(p) => parse_pattern(p),
        None => Genome::all_ones(r.num_users),
    };
    let (assoc, _) = genome.decode()?;
    let eval = FitnessEvaluator::new(&scenario, UtilityKind::Arithmetic)?;
    let powers = eval.power_allocation(&genome);
    let closed = eval.statistics().sinr_all(&assoc, &powers)?;
    let mc = sinr_monte_carlo(&scenario, &assoc, &powers, cfg.mc_realizations, cfg.seed)?;
    let rows: Vec<ValidateRow> = closed
        .iter()
        .zip(&mc.sinr)
        .enumerate()
        .map(|(k, (&c, &m))| {
            let rel_error = if c == 0.0 && m == 0.0 {
                0.0
            } else {
                (c - m).abs() / c.abs().max(f64::MIN_POSITIVE)
            };
            ValidateRow {
                user_id: k,
                closed_form: c,
                monte_carlo: m,
                rel_error,
                pass: rel_error <= cfg.validate_tolerance,
            }
        })
        .collect();
    let worst = rows
        .iter()
        .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
        .map(|r| (r.user_id, r.rel_error))
        .unwrap_or((0, 0.0));
    Ok(ValidateOutcome {
        scenario_digest: report::scenario_digest(&scenario),
        pattern: genome.bit_string(),
        realizations: cfg.mc_realizations,
        tolerance: cfg.validate_tolerance,
        pass: rows.iter().all(|r| r.pass),
        rows,
        worst_user: worst.0,
        max_rel_error: worst.1,
        warnings: mc.warnings,
    })
}

/// Runs the configured optimizer for `evaluator`'s utility.
pub fn run_optimizer(
    evaluator: &FitnessEvaluator,
    cfg: &SimConfig,
    optimizer: OptimizerKind,
    constraint: BitConstraint,
) -> Result<GaOutcome> {
    match optimizer {
        OptimizerKind::Bcga => ga::run_bcga_constrained(evaluator, &cfg.ga_config(), constraint),
        OptimizerKind::Hga if cfg.hga.warm_start => {
            let fixed = ga::run_bcga_constrained(evaluator, &cfg.ga_config(), constraint)?;
            let seeds = [fixed.result.best_genome.bits];
            let mut out = hga::run_hga_seeded(evaluator, &cfg.hga_config(), constraint, false, &seeds)?;
            out.result.evaluations += fixed.result.evaluations;
            Ok(out)
        }
        OptimizerKind::Hga => hga::run_hga_with(evaluator, &cfg.hga_config(), constraint, false),
        OptimizerKind::Exhaustive => {
            let result = exhaustive_search(
                evaluator,
                ExhaustiveOptions {
                    include_zero: cfg.exhaustive_include_zero,
                    max_bits: cfg.exhaustive_max_bits,
                    constraint,
                },
            )?;
            Ok(single_step_outcome(result))
        }
    }
}

fn single_step_outcome(result: SearchResult) -> GaOutcome {
    GaOutcome {
        history: vec![HistoryRow {
            generation: 0,
            best_fitness: result.best_value,
            mean_fitness: result.best_value,
            evals_cum: result.evaluations,
        }],
        best_generation: 0,
        result,
    }
}

fn timing(name: &str, start: Instant, into: &mut BTreeMap<String, f64>) {
    into.insert(name.to_string(), start.elapsed().as_secs_f64());
}

/// One optimization run with its full-association baseline.
pub fn optimize_on(
    scenario: &NetworkScenario,
    cfg: &SimConfig,
    kind: UtilityKind,
    optimizer: OptimizerKind,
    command: &str,
) -> Result<RunReport> {
    let mut timings = BTreeMap::new();
    let t0 = Instant::now();
    let eval = FitnessEvaluator::new(scenario, kind)?;
    timing("statistics_s", t0, &mut timings);
    let t1 = Instant::now();
    let outcome = run_optimizer(&eval, cfg, optimizer, BitConstraint::None)?;
    timing("optimizer_s", t1, &mut timings);
    let best = &outcome.result.best_genome;
    let rates = eval.rates(best)?;
    let baseline = eval.rates(&Genome::all_ones(scenario.num_users()))?;
    Ok(RunReport {
        command: command.to_string(),
        config: cfg.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        scenario_digest: report::scenario_digest(scenario),
        optimizer: optimizer.as_str().to_string(),
        utility: kind,
        best_value: outcome.result.best_value,
        best_genome: best.bit_string(),
        best_xi: best.xi.clone(),
        utilities: UtilityValues::of(&rates)?,
        baseline: UtilityValues::of(&baseline)?,
        modes: ModeShares::of(best),
        evaluations: outcome.result.evaluations,
        users: report::user_rows(scenario, &eval, best)?,
        history: outcome.history,
        timings,
    })
}

pub fn optimize(cfg: &SimConfig) -> Result<RunReport> {
    let scenario = build_scenario(cfg)?;
    optimize_on(&scenario, cfg, cfg.utility, cfg.optimizer, "optimize")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NumUsers,
    NumAps,
    Generations,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::NumUsers => "num_users",
            SweepAxis::NumAps => "num_aps",
            SweepAxis::Generations => "generations",
        }
    }

    fn key(&self) -> &'static str {
        match self {
            SweepAxis::NumUsers => "radio.num_users",
            SweepAxis::NumAps => "radio.num_aps",
            SweepAxis::Generations => "ga.generations",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "num_users" | "users" | "k" => Ok(SweepAxis::NumUsers),
            "num_aps" | "aps" | "n" => Ok(SweepAxis::NumAps),
            "generations" => Ok(SweepAxis::Generations),
            other => Err(format!(
                "unknown sweep axis `{other}` (expected num_users, num_aps or generations)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: &'static str,
    pub axis_value: usize,
    pub seed: u64,
    pub utility_kind: UtilityKind,
    pub best_fitness: f64,
    pub baseline_fitness: f64,
}

/// One optimize run per (value, seed, utility); rows sorted by that key.
pub fn sweep(
    cfg: &SimConfig,
    axis: SweepAxis,
    values: &[usize],
    seeds: &[u64],
    kinds: &[UtilityKind],
) -> Result<Vec<SweepRow>> {
    let mut points = Vec::new();
    for &v in values {
        for &seed in seeds {
            points.push((v, seed));
        }
    }
    let per_point: Vec<Vec<SweepRow>> = points
        .par_iter()
        .map(|&(v, seed)| -> Result<Vec<SweepRow>> {
            let mut point = cfg.clone().apply_overrides(&[format!("{}={v}", axis.key())])?;
            point.seed = seed;
            let scenario = build_scenario(&point)?;
            kinds
                .iter()
                .map(|&kind| {
                    let eval = FitnessEvaluator::new(&scenario, kind)?;
                    let out = run_optimizer(&eval, &point, point.optimizer, BitConstraint::None)?;
                    Ok(SweepRow {
                        axis: axis.as_str(),
                        axis_value: v,
                        seed,
                        utility_kind: kind,
                        best_fitness: out.result.best_value,
                        baseline_fitness: eval.fitness(&Genome::all_ones(scenario.num_users()))?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<SweepRow> = per_point.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        (a.axis_value, a.utility_kind as u8, a.seed).cmp(&(b.axis_value, b.utility_kind as u8, b.seed))
    });
    Ok(rows)
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median best fitness per (axis value, utility), in sweep order.
pub fn sweep_medians(rows: &[SweepRow]) -> Vec<(usize, UtilityKind, f64)> {
    let mut groups: BTreeMap<(usize, u8), (UtilityKind, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.axis_value, r.utility_kind as u8))
            .or_insert_with(|| (r.utility_kind, Vec::new()))
            .1
            .push(r.best_fitness);
    }
    groups
        .into_iter()
        .map(|((v, _), (kind, mut xs))| (v, kind, median(&mut xs)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSummary {
    pub mode: &'static str,
    pub best_value: f64,
    pub best_genome: String,
    pub min_rate: f64,
    pub median_rate: f64,
    pub max_rate: f64,
    pub total_mbps: f64,
}

/// Optimizes with satellite-only, APs-only and unconstrained genomes.
pub fn compare_modes(cfg: &SimConfig) -> Result<Vec<ModeSummary>> {
    let scenario = build_scenario(cfg)?;
    compare_modes_on(&scenario, cfg, cfg.utility)
}

pub fn compare_modes_on(scenario: &NetworkScenario, cfg: &SimConfig, kind: UtilityKind) -> Result<Vec<ModeSummary>> {
    let eval = FitnessEvaluator::new(scenario, kind)?;
    [
        ("satellite-only", BitConstraint::SatelliteOnly),
        ("aps-only", BitConstraint::ApOnly),
        ("hybrid", BitConstraint::None),
    ]
    .into_iter()
    .map(|(mode, constraint)| {
        let out = run_optimizer(&eval, cfg, cfg.optimizer, constraint)?;
        let mut rates = eval.rates(&out.result.best_genome)?;
        let total = rates.iter().sum();
        let med = median(&mut rates);
        Ok(ModeSummary {
            mode,
            best_value: out.result.best_value,
            best_genome: out.result.best_genome.bit_string(),
            min_rate: rates[0],
            median_rate: med,
            max_rate: *rates.last().unwrap_or(&0.0),
            total_mbps: total,
        })
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingStats {
    pub mutation_rate: f64,
    pub trials: usize,
    pub hits: usize,
    pub censored: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    /// `c (1 − p_m)^{−2K} / K`.
    pub bound: f64,
    /// First hitting generation per trial; `None` when censored.
    pub generations: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingTimeReport {
    pub scenario_digest: String,
    pub utility: UtilityKind,
    pub optimum: f64,
    pub max_generations: usize,
    pub bound_constant: f64,
    pub per_rate: Vec<HittingStats>,
}

pub fn hitting_bound(c: f64, p_m: f64, k: usize) -> f64 {
    c * (1.0 - p_m).powi(-2 * k as i32) / k as f64
}

/// Repeated BCGA runs on a tiny instance, timed against the exhaustive optimum.
pub fn hitting_time(
    cfg: &SimConfig,
    trials: usize,
    mutation_rates: &[f64],
    bound_constant: f64,
) -> Result<HittingTimeReport> {
    let k = cfg.radio.num_users;
    if k > HITTING_MAX_USERS {
        return Err(Error::invalid(
            "hitting_time",
            format!("K = {k} exceeds {HITTING_MAX_USERS}; the optimum must come from exhaustive search"),
        ));
    }
    let scenario = build_scenario(cfg)?;
    let eval = FitnessEvaluator::new(&scenario, cfg.utility)?;
    let optimum = exhaustive_search(&eval, ExhaustiveOptions::default())?.best_value;
    let per_rate = mutation_rates
        .iter()
        .map(|&p_m| -> Result<HittingStats> {
            let generations: Vec<Option<usize>> = (0..trials)
                .into_par_iter()
                .map(|t| -> Result<Option<usize>> {
                    let mut ga_cfg = cfg.ga_config();
                    ga_cfg.mutation_rate = p_m;
                    ga_cfg.seed = indexed_stream(cfg.seed, "hitting/trial", t).random();
                    Ok(ga::run_bcga(&eval, &ga_cfg)?.hitting_generation(optimum))
                })
                .collect::<Result<_>>()?;
            let mut hit: Vec<f64> = generations.iter().flatten().map(|&g| g as f64).collect();
            let n = hit.len() as f64;
            let mean = hit.iter().sum::<f64>() / n;
            let std = (hit.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n).sqrt();
            Ok(HittingStats {
                mutation_rate: p_m,
                trials,
                hits: hit.len(),
                censored: trials - hit.len(),
                mean,
                median: median(&mut hit),
                std,
                bound: hitting_bound(bound_constant, p_m, k),
                generations,
            })
        })
        .collect::<Result<_>>()?;
    Ok(HittingTimeReport {
        scenario_digest: report::scenario_digest(&scenario),
        utility: cfg.utility,
        optimum,
        max_generations: cfg.ga.max_generations,
        bound_constant,
        per_rate,
    })
}

/// Exhaustive optimum as a report (the `exhaustive` subcommand).
pub fn exhaustive(cfg: &SimConfig) -> Result<RunReport> {
    let scenario = build_scenario(cfg)?;
    optimize_on(&scenario, cfg, cfg.utility, OptimizerKind::Exhaustive, "exhaustive")
}
