//! Run reports and their CSV/JSON files.
//!
//! Floats are written with 9 significant digits and every collection has a fixed
//! order, so rewriting an identical report gives identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::fairness::{utility, FitnessEvaluator, Genome, UtilityKind};
use crate::ga::HistoryRow;
use crate::geometry::NetworkScenario;
use crate::{Error, Result};

/// Rounds to 9 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

pub fn fmt_sig(x: f64) -> String {
    round_sig(x).to_string()
}

/// SHA-256 over the large-scale statistics in a canonical little-endian layout.
pub fn scenario_digest(scenario: &NetworkScenario) -> String {
    let mut h = Sha256::new();
    for d in [scenario.num_users(), scenario.num_aps(), scenario.num_antennas()] {
        h.update((d as u64).to_le_bytes());
    }
    // Row-major K×N.
    for u in 0..scenario.num_users() {
        for a in 0..scenario.num_aps() {
            h.update(scenario.beta_terrestrial[(u, a)].to_le_bytes());
        }
    }
    for b in &scenario.beta_sat {
        h.update(b.to_le_bytes());
    }
    for z in scenario.los_vectors.iter().flat_map(|v| v.iter()) {
        h.update(z.re.to_le_bytes());
        h.update(z.im.to_le_bytes());
    }
    for z in scenario.correlation.iter().flat_map(|r| r.iter()) {
        h.update(z.re.to_le_bytes());
        h.update(z.im.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserRow {
    pub user_id: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub alpha: u8,
    pub alpha_tilde: u8,
    pub xi: f64,
    pub p_w: f64,
    pub sinr: f64,
    pub rate_mbps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtilityValues {
    pub arithmetic: f64,
    pub geometric: f64,
    pub maxmin: f64,
    pub total_mbps: f64,
}

impl UtilityValues {
    pub fn of(rates: &[f64]) -> Result<Self> {
        Ok(UtilityValues {
            arithmetic: utility(rates, UtilityKind::Arithmetic)?,
            geometric: utility(rates, UtilityKind::Geometric)?,
            maxmin: utility(rates, UtilityKind::Maxmin)?,
            total_mbps: rates.iter().sum(),
        })
    }

    pub fn get(&self, kind: UtilityKind) -> f64 {
        match kind {
            UtilityKind::Arithmetic => self.arithmetic,
            UtilityKind::Geometric => self.geometric,
            UtilityKind::Maxmin => self.maxmin,
        }
    }
}

/// Share of users in each connection mode, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeShares {
    pub satellite_only_pct: f64,
    pub aps_only_pct: f64,
    pub both_pct: f64,
    pub unserved_pct: f64,
}

impl ModeShares {
    pub fn of(genome: &Genome) -> Self {
        let k = genome.num_users().max(1) as f64;
        let (mut sat, mut ap, mut both) = (0usize, 0usize, 0usize);
        for pair in genome.bits.chunks(2) {
            match (pair[0], pair[1]) {
                (true, true) => both += 1,
                (true, false) => ap += 1,
                (false, true) => sat += 1,
                (false, false) => {}
            }
        }
        let pct = |n: usize| 100.0 * n as f64 / k;
        ModeShares {
            satellite_only_pct: pct(sat),
            aps_only_pct: pct(ap),
            both_pct: pct(both),
            unserved_pct: pct(genome.num_users() - sat - ap - both),
        }
    }
}

/// Per-user table of a genome under the closed-form rates.
pub fn user_rows(scenario: &NetworkScenario, evaluator: &FitnessEvaluator, genome: &Genome) -> Result<Vec<UserRow>> {
    let (assoc, _) = genome.decode()?;
    let powers = evaluator.power_allocation(genome);
    let report = evaluator.statistics().report(&assoc, &powers)?;
    Ok((0..scenario.num_users())
        .map(|k| {
            let pos = scenario.geometry.user_positions[k];
            UserRow {
                user_id: k,
                x_m: pos[0],
                y_m: pos[1],
                alpha: assoc.alpha[k] as u8,
                alpha_tilde: assoc.alpha_tilde[k] as u8,
                xi: powers.xi[k],
                p_w: powers.power(k),
                sinr: report.sinr[k],
                rate_mbps: report.rate_mbps[k],
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub scenario_digest: String,
    pub optimizer: String,
    pub utility: UtilityKind,
    pub best_value: f64,
    pub best_genome: String,
    pub best_xi: Option<Vec<f64>>,
    pub utilities: UtilityValues,
    pub baseline: UtilityValues,
    pub modes: ModeShares,
    pub evaluations: usize,
    pub users: Vec<UserRow>,
    pub history: Vec<HistoryRow>,
    /// Wall-clock seconds per phase; the only non-deterministic fields.
    pub timings: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// users.csv
    UsersCsv,
    /// history.csv
    HistoryCsv,
    /// summary.json
    Json,
}

/// Header plus preformatted rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

pub fn users_table(users: &[UserRow]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "user_id",
        "x_m",
        "y_m",
        "alpha",
        "alpha_tilde",
        "xi",
        "p_w",
        "sinr",
        "rate_mbps",
    ]);
    for u in users {
        t.push(vec![
            u.user_id.to_string(),
            fmt_sig(u.x_m),
            fmt_sig(u.y_m),
            u.alpha.to_string(),
            u.alpha_tilde.to_string(),
            fmt_sig(u.xi),
            fmt_sig(u.p_w),
            fmt_sig(u.sinr),
            fmt_sig(u.rate_mbps),
        ]);
    }
    t
}

pub fn history_table(history: &[HistoryRow]) -> CsvTable {
    let mut t = CsvTable::new(&["generation", "best_fitness", "mean_fitness", "evals_cum"]);
    for h in history {
        t.push(vec![
            h.generation.to_string(),
            fmt_sig(h.best_fitness),
            fmt_sig(h.mean_fitness),
            h.evals_cum.to_string(),
        ]);
    }
    t
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| io_error(dir, e)),
        _ => Ok(()),
    }
}

pub fn table_to_string(table: &CsvTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Csv {
        path: PathBuf::from("<memory>"),
        source: e,
    };
    w.write_record(&table.header).map_err(err)?;
    for row in &table.rows {
        w.write_record(row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

pub fn write_table(path: &Path, table: &CsvTable) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })?;
    let wrap = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    w.write_record(&table.header).map_err(wrap)?;
    for row in &table.rows {
        w.write_record(row).map_err(wrap)?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_sig(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with floats rounded to 9 significant digits.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut tree = serde_json::to_value(value)?;
    round_value(&mut tree);
    let mut s = serde_json::to_string_pretty(&tree)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, to_json_string(value)?).map_err(|e| io_error(path, e))
}

pub fn write_report(report: &RunReport, format: ReportFormat, path: &Path) -> Result<()> {
    match format {
        ReportFormat::UsersCsv => write_table(path, &users_table(&report.users)),
        ReportFormat::HistoryCsv => write_table(path, &history_table(&report.history)),
        ReportFormat::Json => write_json(path, report),
    }
}

/// Writes users.csv, history.csv and summary.json into `dir`.
pub fn write_run(report: &RunReport, dir: &Path) -> Result<()> {
    write_report(report, ReportFormat::UsersCsv, &dir.join("users.csv"))?;
    write_report(report, ReportFormat::HistoryCsv, &dir.join("history.csv"))?;
    write_report(report, ReportFormat::Json, &dir.join("summary.json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_scenario, tests::small_config};

    #[test]
    fn rounding() {
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(123.456789012345), "123.456789");
        assert_eq!(fmt_sig(-2.0e-13 / 3.0), "-0.0000000000000666666667");
        assert_eq!(round_sig(0.0), 0.0);
        assert!(round_sig(f64::NAN).is_nan());
    }

    #[test]
    fn digest_tracks_statistics() {
        let cfg = small_config(3, 2, 4);
        let a = generate_scenario(&cfg, 1).unwrap();
        let b = generate_scenario(&cfg, 1).unwrap();
        let c = generate_scenario(&cfg, 2).unwrap();
        assert_eq!(scenario_digest(&a), scenario_digest(&b));
        assert_ne!(scenario_digest(&a), scenario_digest(&c));
        assert_eq!(scenario_digest(&a).len(), 64);
    }

    #[test]
    fn mode_shares_partition() {
        let g = Genome::binary(vec![true, true, true, false, false, true, false, false]);
        let m = ModeShares::of(&g);
        assert_eq!(
            (m.both_pct, m.aps_only_pct, m.satellite_only_pct, m.unserved_pct),
            (25.0, 25.0, 25.0, 25.0)
        );
    }

    #[test]
    fn history_and_users_files() {
        let dir = tempfile::tempdir().unwrap();
        let s = generate_scenario(&small_config(3, 2, 4), 1).unwrap();
        let eval = FitnessEvaluator::new(&s, UtilityKind::Arithmetic).unwrap();
        let g = Genome::all_ones(3);
        let users = user_rows(&s, &eval, &g).unwrap();
        let path = dir.path().join("nested/users.csv");
        write_table(&path, &users_table(&users)).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "user_id,x_m,y_m,alpha,alpha_tilde,xi,p_w,sinr,rate_mbps");

        let bad = Path::new("/proc/definitely/not/here.csv");
        match write_table(bad, &users_table(&users)) {
            Err(e) => assert!(e.to_string().contains("/proc/definitely")),
            Ok(()) => panic!("write should fail"),
        }
    }
}
