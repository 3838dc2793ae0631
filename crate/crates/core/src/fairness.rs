//! Fairness utilities and the genome → fitness pipeline.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::NetworkScenario;
use crate::throughput::{AssociationPattern, LinkStatistics, PowerAllocation};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityKind {
    Arithmetic,
    Geometric,
    Maxmin,
}

impl UtilityKind {
    pub const ALL: [UtilityKind; 3] = [UtilityKind::Arithmetic, UtilityKind::Geometric, UtilityKind::Maxmin];

    pub fn as_str(&self) -> &'static str {
        match self {
            UtilityKind::Arithmetic => "arithmetic",
            UtilityKind::Geometric => "geometric",
            UtilityKind::Maxmin => "maxmin",
        }
    }
}

impl std::str::FromStr for UtilityKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "arithmetic" | "am" => Ok(UtilityKind::Arithmetic),
            "geometric" | "gm" => Ok(UtilityKind::Geometric),
            "maxmin" | "max-min" | "min" => Ok(UtilityKind::Maxmin),
            other => Err(format!(
                "unknown utility `{other}` (expected arithmetic, geometric or maxmin)"
            )),
        }
    }
}

impl std::fmt::Display for UtilityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Value of `kind` on a rate vector.
pub fn utility(rates: &[f64], kind: UtilityKind) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::invalid("rates", "empty rate vector"));
    }
    Ok(utility_unchecked(rates, kind))
}

fn utility_unchecked(rates: &[f64], kind: UtilityKind) -> f64 {
    let n = rates.len() as f64;
    match kind {
        UtilityKind::Arithmetic => rates.iter().sum::<f64>() / n,
        UtilityKind::Geometric => {
            if rates.iter().any(|&r| r <= 0.0) {
                0.0
            } else {
                // Clamp into [min, max]; exp/ln rounding can step just outside.
                let (lo, hi) = rates
                    .iter()
                    .fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
                (rates.iter().map(|r| r.ln()).sum::<f64>() / n).exp().clamp(lo, hi)
            }
        }
        UtilityKind::Maxmin => rates.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Association bits plus an optional power tail.
///
/// Bits are user-major pairs: `bits[2j]` is the AP flag and `bits[2j + 1]` the
/// satellite flag of user j.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Genome {
    pub bits: Vec<bool>,
    pub xi: Option<Vec<f64>>,
}

impl Genome {
    pub fn binary(bits: Vec<bool>) -> Self {
        Genome { bits, xi: None }
    }

    pub fn all_ones(k: usize) -> Self {
        Genome::binary(vec![true; 2 * k])
    }

    pub fn num_users(&self) -> usize {
        self.bits.len() / 2
    }

    pub fn encode(assoc: &AssociationPattern, xi: Option<Vec<f64>>) -> Self {
        let bits = assoc
            .alpha
            .iter()
            .zip(&assoc.alpha_tilde)
            .flat_map(|(&a, &s)| [a, s])
            .collect();
        Genome { bits, xi }
    }

    pub fn decode(&self) -> Result<(AssociationPattern, Option<Vec<f64>>)> {
        if !self.bits.len().is_multiple_of(2) || self.bits.is_empty() {
            return Err(Error::invalid(
                "genome",
                format!("bit length {} is not 2K for K ≥ 1", self.bits.len()),
            ));
        }
        let k = self.num_users();
        if let Some(xi) = &self.xi {
            if xi.len() != k {
                return Err(Error::invalid(
                    "genome",
                    format!("{} power genes for {k} users", xi.len()),
                ));
            }
            if let Some(x) = xi.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::invalid("genome", format!("power gene {x} outside [0, 1]")));
            }
        }
        Ok((self.association(), self.xi.clone()))
    }

    fn association(&self) -> AssociationPattern {
        AssociationPattern {
            alpha: self.bits.iter().step_by(2).copied().collect(),
            alpha_tilde: self.bits.iter().skip(1).step_by(2).copied().collect(),
        }
    }

    pub fn bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// Closed-form fitness of genomes on one scenario.
#[derive(Debug)]
pub struct FitnessEvaluator {
    stats: LinkStatistics,
    kind: UtilityKind,
    evaluations: AtomicUsize,
}

impl FitnessEvaluator {
    pub fn new(scenario: &NetworkScenario, kind: UtilityKind) -> Result<Self> {
        Ok(Self::from_statistics(LinkStatistics::new(scenario)?, kind))
    }

    pub fn from_statistics(stats: LinkStatistics, kind: UtilityKind) -> Self {
        FitnessEvaluator {
            stats,
            kind,
            evaluations: AtomicUsize::new(0),
        }
    }

    pub fn with_kind(&self, kind: UtilityKind) -> Self {
        Self::from_statistics(self.stats.clone(), kind)
    }

    pub fn kind(&self) -> UtilityKind {
        self.kind
    }

    pub fn statistics(&self) -> &LinkStatistics {
        &self.stats
    }

    pub fn num_users(&self) -> usize {
        self.stats.num_users()
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    fn powers(&self, xi: Option<&[f64]>) -> Vec<f64> {
        let p = self.stats.constants.data_power_max_w;
        match xi {
            Some(xi) => xi.iter().map(|x| x * p).collect(),
            None => vec![p; self.num_users()],
        }
    }

    /// Per-user rates (Mbps) of a genome.
    pub fn rates(&self, genome: &Genome) -> Result<Vec<f64>> {
        let (assoc, xi) = genome.decode()?;
        if assoc.len() != self.num_users() {
            return Err(Error::invalid(
                "genome",
                format!("{} users encoded, scenario has {}", assoc.len(), self.num_users()),
            ));
        }
        Ok(self.stats.rates_unchecked(&assoc, &self.powers(xi.as_deref())))
    }

    pub fn power_allocation(&self, genome: &Genome) -> PowerAllocation {
        let k = self.num_users();
        PowerAllocation {
            xi: genome.xi.clone().unwrap_or_else(|| vec![1.0; k]),
            p_max: vec![self.stats.constants.data_power_max_w; k],
        }
    }

    pub fn fitness(&self, genome: &Genome) -> Result<f64> {
        let rates = self.rates(genome)?;
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        Ok(utility_unchecked(&rates, self.kind))
    }

    /// Fitness of every genome, evaluated in parallel; order matches the input.
    pub fn evaluate_all(&self, genomes: &[Genome]) -> Result<Vec<f64>> {
        genomes.par_iter().map(|g| self.fitness(g)).collect()
    }
}

/// Fitness of one genome under the closed-form rates.
pub fn fitness(genome: &Genome, scenario: &NetworkScenario, kind: UtilityKind) -> Result<f64> {
    FitnessEvaluator::new(scenario, kind)?.fitness(genome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_scenario, tests::small_config};

    #[test]
    fn utility_examples() {
        let r = [2.0, 8.0];
        assert_eq!(utility(&r, UtilityKind::Arithmetic).unwrap(), 5.0);
        assert!((utility(&r, UtilityKind::Geometric).unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(utility(&r, UtilityKind::Maxmin).unwrap(), 2.0);
        for kind in UtilityKind::ALL {
            assert_eq!(utility(&[3.5; 7], kind).unwrap(), 3.5);
            assert!(utility(&[], kind).is_err());
        }
        assert_eq!(utility(&[1.0, 0.0, 4.0], UtilityKind::Geometric).unwrap(), 0.0);
        // Large K stays finite.
        let big = vec![1e200; 500];
        assert!((utility(&big, UtilityKind::Geometric).unwrap() / 1e200 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decode_layout() {
        let g = Genome::binary(vec![true, false, false, true]);
        let (a, xi) = g.decode().unwrap();
        assert_eq!(a.alpha, vec![true, false]);
        assert_eq!(a.alpha_tilde, vec![false, true]);
        assert!(xi.is_none());
        assert_eq!(Genome::encode(&a, None), g);
        let (full, _) = Genome::all_ones(3).decode().unwrap();
        assert_eq!(full, AssociationPattern::full(3));
        assert!(Genome::binary(vec![true; 3]).decode().is_err());
        let bad = Genome {
            bits: vec![true; 4],
            xi: Some(vec![0.5]),
        };
        assert!(bad.decode().is_err());
    }

    #[test]
    fn fitness_examples() {
        let s = generate_scenario(&small_config(4, 3, 4), 3).unwrap();
        for kind in UtilityKind::ALL {
            let eval = FitnessEvaluator::new(&s, kind).unwrap();
            assert_eq!(eval.fitness(&Genome::binary(vec![false; 8])).unwrap(), 0.0);
            let full = Genome::all_ones(4);
            let a = eval.fitness(&full).unwrap();
            assert_eq!(a, eval.fitness(&full).unwrap());
            assert_eq!(a, fitness(&full, &s, kind).unwrap());
            let with_xi = Genome {
                bits: full.bits.clone(),
                xi: Some(vec![1.0; 4]),
            };
            assert_eq!(a, eval.fitness(&with_xi).unwrap());
            assert_eq!(eval.evaluations(), 4);
        }
    }
}
