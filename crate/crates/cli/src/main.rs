use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use simfair::experiments::{self, HittingTimeReport, ModeSummary, SweepAxis, SweepRow, ValidateOutcome};
use simfair::io::config::SimConfig;
use simfair::io::report::{self, fmt_sig, CsvTable, RunReport};
use simfair::UtilityKind;

#[derive(Parser, Debug)]
#[command(
    name = "simfair",
    version,
    about = "Uplink fairness experiments for satellite + cell-free massive MIMO"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Configuration file (`key = value` lines); defaults apply to missing keys.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set ga.population=80`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; falls back to SIMFAIR_OUT, then `output.dir`.
    #[arg(long, env = "SIMFAIR_OUT")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form SINR against Monte Carlo on a small scenario.
    Validate(Common),
    /// Exhaustive search over all association patterns.
    Exhaustive(Common),
    /// Run the configured optimizer.
    Optimize(Common),
    /// One optimization per axis value, seed and utility.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        /// Seeds per point; defaults to the configured seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Utilities per point; defaults to all three.
        #[arg(long, value_delimiter = ',')]
        utilities: Vec<UtilityKind>,
    },
    /// Satellite-only, APs-only and hybrid association.
    CompareModes(Common),
    /// First hitting generation of the BCGA on a tiny instance.
    HittingTime {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Mutation rates; defaults to the configured `ga.mutation_rate`.
        #[arg(long = "pm", value_delimiter = ',')]
        mutation_rates: Vec<f64>,
        /// Constant c of the reference curve c (1 - p_m)^(-2K) / K.
        #[arg(long, default_value_t = 1.0)]
        bound_c: f64,
    },
}

impl Common {
    fn load(&self) -> Result<SimConfig> {
        let base = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                SimConfig::load(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => SimConfig::default(),
        };
        let mut cfg = base.apply_overrides(&self.overrides)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &SimConfig) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` means a tolerance failed.
fn run(command: Command) -> Result<bool> {
    match command {
        Command::Validate(c) => {
            let cfg = c.load()?;
            let out = experiments::validate(&cfg)?;
            let dir = c.out_dir(&cfg)?;
            report::write_table(&dir.join("validate.csv"), &validate_table(&out))?;
            report::write_json(&dir.join("validate.json"), &out)?;
            print_validate(&out);
            Ok(out.pass)
        }
        Command::Exhaustive(c) => {
            let cfg = c.load()?;
            finish_run(&experiments::exhaustive(&cfg)?, &c.out_dir(&cfg)?)
        }
        Command::Optimize(c) => {
            let cfg = c.load()?;
            finish_run(&experiments::optimize(&cfg)?, &c.out_dir(&cfg)?)
        }
        Command::Sweep {
            common,
            axis,
            values,
            seeds,
            utilities,
        } => {
            let cfg = common.load()?;
            let seeds = if seeds.is_empty() { vec![cfg.seed] } else { seeds };
            let kinds = if utilities.is_empty() {
                UtilityKind::ALL.to_vec()
            } else {
                utilities
            };
            let rows = experiments::sweep(&cfg, axis, &values, &seeds, &kinds)?;
            let dir = common.out_dir(&cfg)?;
            report::write_table(&dir.join("sweep.csv"), &sweep_table(&rows))?;
            println!("{:>12} {:>11} {:>14}", axis.as_str(), "utility", "median_best");
            for (v, kind, m) in experiments::sweep_medians(&rows) {
                println!("{v:>12} {:>11} {:>14}", kind.as_str(), fmt_sig(m));
            }
            Ok(true)
        }
        Command::CompareModes(c) => {
            let cfg = c.load()?;
            let modes = experiments::compare_modes(&cfg)?;
            let dir = c.out_dir(&cfg)?;
            report::write_table(&dir.join("modes.csv"), &modes_table(&modes))?;
            report::write_json(&dir.join("modes.json"), &modes)?;
            println!("utility {} ({})", cfg.utility, cfg.optimizer.as_str());
            println!(
                "{:>15} {:>14} {:>12} {:>12} {:>12} {:>12}",
                "mode", "best", "min", "median", "max", "total"
            );
            for m in &modes {
                println!(
                    "{:>15} {:>14} {:>12} {:>12} {:>12} {:>12}",
                    m.mode,
                    fmt_sig(m.best_value),
                    fmt_sig(m.min_rate),
                    fmt_sig(m.median_rate),
                    fmt_sig(m.max_rate),
                    fmt_sig(m.total_mbps)
                );
            }
            Ok(true)
        }
        Command::HittingTime {
            common,
            trials,
            mutation_rates,
            bound_c,
        } => {
            let cfg = common.load()?;
            if trials == 0 {
                bail!("--trials must be positive");
            }
            let rates = if mutation_rates.is_empty() {
                vec![cfg.ga.mutation_rate]
            } else {
                mutation_rates
            };
            let rep = experiments::hitting_time(&cfg, trials, &rates, bound_c)?;
            let dir = common.out_dir(&cfg)?;
            let (summary, per_trial) = hitting_tables(&rep);
            report::write_table(&dir.join("hitting_time.csv"), &summary)?;
            report::write_table(&dir.join("hitting_trials.csv"), &per_trial)?;
            report::write_table(
                &dir.join("hitting_bound.csv"),
                &bound_curve(bound_c, cfg.radio.num_users),
            )?;
            report::write_json(&dir.join("hitting_time.json"), &rep)?;
            println!(
                "optimum {} ({}), S_MAX = {}",
                fmt_sig(rep.optimum),
                rep.utility,
                rep.max_generations
            );
            for s in &rep.per_rate {
                println!(
                    "p_m={} hits={}/{} censored={} mean={} median={} std={} bound={}",
                    fmt_sig(s.mutation_rate),
                    s.hits,
                    s.trials,
                    s.censored,
                    fmt_sig(s.mean),
                    fmt_sig(s.median),
                    fmt_sig(s.std),
                    fmt_sig(s.bound)
                );
            }
            Ok(true)
        }
    }
}

fn finish_run(rep: &RunReport, dir: &Path) -> Result<bool> {
    report::write_run(rep, dir)?;
    println!(
        "{} {} on {} users: best {} = {} (genome {})",
        rep.command,
        rep.optimizer,
        rep.users.len(),
        rep.utility,
        fmt_sig(rep.best_value),
        rep.best_genome
    );
    println!("{:>12} {:>14} {:>14}", "utility", "optimized", "full-assoc");
    for kind in UtilityKind::ALL {
        println!(
            "{:>12} {:>14} {:>14}",
            kind.as_str(),
            fmt_sig(rep.utilities.get(kind)),
            fmt_sig(rep.baseline.get(kind))
        );
    }
    println!(
        "{:>12} {:>14} {:>14}",
        "total",
        fmt_sig(rep.utilities.total_mbps),
        fmt_sig(rep.baseline.total_mbps)
    );
    let m = &rep.modes;
    println!(
        "connections %: satellite-only {} | APs-only {} | both {} | unserved {}",
        fmt_sig(m.satellite_only_pct),
        fmt_sig(m.aps_only_pct),
        fmt_sig(m.both_pct),
        fmt_sig(m.unserved_pct)
    );
    println!("evaluations {}; wrote {}", rep.evaluations, dir.display());
    Ok(true)
}

fn validate_table(out: &ValidateOutcome) -> CsvTable {
    let mut t = CsvTable::new(&["user_id", "sinr_closed_form", "sinr_monte_carlo", "rel_error", "pass"]);
    for r in &out.rows {
        t.push(vec![
            r.user_id.to_string(),
            fmt_sig(r.closed_form),
            fmt_sig(r.monte_carlo),
            fmt_sig(r.rel_error),
            r.pass.to_string(),
        ]);
    }
    t
}

fn print_validate(out: &ValidateOutcome) {
    println!(
        "pattern {} with {} realizations, tolerance {}",
        out.pattern,
        out.realizations,
        fmt_sig(out.tolerance)
    );
    println!(
        "{:>5} {:>16} {:>16} {:>12}  ",
        "user", "closed-form", "monte-carlo", "rel-error"
    );
    for r in &out.rows {
        println!(
            "{:>5} {:>16} {:>16} {:>12}  {}",
            r.user_id,
            fmt_sig(r.closed_form),
            fmt_sig(r.monte_carlo),
            fmt_sig(r.rel_error),
            if r.pass { "ok" } else { "FAIL" }
        );
    }
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    if out.pass {
        println!("all users within tolerance (max error {})", fmt_sig(out.max_rel_error));
    } else {
        eprintln!(
            "tolerance breached: worst user {} with relative error {}",
            out.worst_user,
            fmt_sig(out.max_rel_error)
        );
    }
}

fn sweep_table(rows: &[SweepRow]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "axis",
        "axis_value",
        "seed",
        "utility_kind",
        "best_fitness",
        "baseline_fitness",
    ]);
    for r in rows {
        t.push(vec![
            r.axis.to_string(),
            r.axis_value.to_string(),
            r.seed.to_string(),
            r.utility_kind.to_string(),
            fmt_sig(r.best_fitness),
            fmt_sig(r.baseline_fitness),
        ]);
    }
    t
}

fn modes_table(modes: &[ModeSummary]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "mode",
        "best_value",
        "min_rate",
        "median_rate",
        "max_rate",
        "total_mbps",
        "genome",
    ]);
    for m in modes {
        t.push(vec![
            m.mode.to_string(),
            fmt_sig(m.best_value),
            fmt_sig(m.min_rate),
            fmt_sig(m.median_rate),
            fmt_sig(m.max_rate),
            fmt_sig(m.total_mbps),
            m.best_genome.clone(),
        ]);
    }
    t
}

fn hitting_tables(rep: &HittingTimeReport) -> (CsvTable, CsvTable) {
    let mut summary = CsvTable::new(&[
        "mutation_rate",
        "trials",
        "hits",
        "censored",
        "mean",
        "median",
        "std",
        "bound",
    ]);
    let mut per_trial = CsvTable::new(&["mutation_rate", "trial", "hit_generation", "censored"]);
    for s in &rep.per_rate {
        summary.push(vec![
            fmt_sig(s.mutation_rate),
            s.trials.to_string(),
            s.hits.to_string(),
            s.censored.to_string(),
            fmt_sig(s.mean),
            fmt_sig(s.median),
            fmt_sig(s.std),
            fmt_sig(s.bound),
        ]);
        for (t, g) in s.generations.iter().enumerate() {
            per_trial.push(vec![
                fmt_sig(s.mutation_rate),
                t.to_string(),
                g.map(|g| g.to_string()).unwrap_or_default(),
                g.is_none().to_string(),
            ]);
        }
    }
    (summary, per_trial)
}

/// Reference curve over p_m ∈ {0.01, …, 0.5}.
fn bound_curve(c: f64, k: usize) -> CsvTable {
    let mut t = CsvTable::new(&["mutation_rate", "bound"]);
    for i in 1..=50 {
        let p = i as f64 / 100.0;
        t.push(vec![fmt_sig(p), fmt_sig(experiments::hitting_bound(c, p, k))]);
    }
    t
}
