//! Hybrid genetic algorithm: association bits plus normalized powers ξ ∈ [0, 1]^K.
//!
//! Bits use the binary operators of [`crate::ga`]. Powers use bounded simulated
//! binary crossover and polynomial mutation. Member 0 starts at full
//! association and full power, so the fixed-power optimum is always reachable.

use rand::Rng;
use serde::Serialize;

use crate::fairness::FitnessEvaluator;
use crate::ga::{self, BitConstraint, EvolveSpec, GaConfig, GaOutcome, RealGenes};
use crate::io::stream::Stream;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HgaConfig {
    pub ga: GaConfig,
    /// SBX distribution index η_c.
    pub sbx_eta: f64,
    /// Polynomial-mutation distribution index η_m.
    pub polymut_eta: f64,
    /// Per-coordinate probability of mutating a power gene in a mutant.
    pub real_mutation_rate: f64,
    /// Use the operator counts `2⌊(p_c+η_c)Q/4⌋` and `⌊(p_m+η_m)Q/2⌋` as listed.
    pub literal_counts: bool,
}

impl Default for HgaConfig {
    fn default() -> Self {
        HgaConfig {
            ga: GaConfig::default(),
            sbx_eta: 15.0,
            polymut_eta: 20.0,
            real_mutation_rate: 1.0,
            literal_counts: false,
        }
    }
}

impl HgaConfig {
    pub fn validate(&self) -> Result<()> {
        self.ga.validate()?;
        if !(self.sbx_eta > 0.0 && self.sbx_eta.is_finite()) {
            return Err(Error::invalid("eta_c", "must be positive"));
        }
        if !(self.polymut_eta > 0.0 && self.polymut_eta.is_finite()) {
            return Err(Error::invalid("eta_m", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.real_mutation_rate) {
            return Err(Error::invalid("real_mutation_rate", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn counts(&self) -> (usize, usize) {
        if self.literal_counts {
            let q = self.ga.population as f64;
            let c = 2 * ((self.ga.crossover_rate + self.sbx_eta) * q / 4.0).floor() as usize;
            let m = ((self.ga.mutation_rate + self.polymut_eta) * q / 2.0).floor() as usize;
            (c, m)
        } else {
            (self.ga.offspring_count(), self.ga.mutant_count())
        }
    }
}

/// `ξ = p / P_max`.
pub fn normalize_power(p: f64, p_max: f64) -> Result<f64> {
    if !(p_max > 0.0) {
        return Err(Error::invalid("p_max", "must be positive"));
    }
    if !(0.0..=p_max).contains(&p) {
        return Err(Error::invalid("power", format!("{p} outside [0, {p_max}]")));
    }
    Ok(p / p_max)
}

/// `p = ξ P_max`.
pub fn denormalize_power(xi: f64, p_max: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::invalid("xi", format!("{xi} outside [0, 1]")));
    }
    Ok(xi * p_max)
}

/// Spread factor of bounded SBX for a uniform draw `mu` and spread bound `eps`.
pub fn sbx_spread(mu: f64, eps: f64, eta: f64) -> f64 {
    let e = eta + 1.0;
    let theta = 2.0 - eps.powf(-e);
    if mu <= 1.0 / theta {
        (theta * mu).powf(1.0 / e)
    } else {
        (1.0 / (2.0 - theta * mu)).powf(1.0 / e)
    }
}

/// Unclamped SBX children of one coordinate; returned in the parents' order.
pub fn sbx_pair(a: f64, b: f64, eta: f64, mu: f64) -> (f64, f64) {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let d = hi - lo;
    if d < 1e-14 {
        return (a, b);
    }
    // The tighter of the two boundary bounds keeps both children inside [0, 1].
    let eps = (1.0 + 2.0 * lo / d).min(1.0 + 2.0 * (1.0 - hi) / d);
    let spread = sbx_spread(mu, eps, eta);
    let mid = 0.5 * (lo + hi);
    let (c_lo, c_hi) = (mid - 0.5 * spread * d, mid + 0.5 * spread * d);
    if a <= b {
        (c_lo, c_hi)
    } else {
        (c_hi, c_lo)
    }
}

pub fn sbx_crossover<R: Rng + ?Sized>(p1: &[f64], p2: &[f64], eta: f64, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    p1.iter()
        .zip(p2)
        .map(|(&a, &b)| {
            let mu: f64 = rng.random();
            let (c1, c2) = sbx_pair(a, b, eta, mu);
            (c1.clamp(0.0, 1.0), c2.clamp(0.0, 1.0))
        })
        .unzip()
}

/// Polynomial perturbation δ̄ for a uniform draw `mu`.
pub fn polynomial_delta(xi: f64, mu: f64, eta: f64) -> f64 {
    let e = eta + 1.0;
    let delta = xi.min(1.0 - xi).max(0.0);
    let tail = (1.0 - delta).powf(e);
    if mu <= 0.5 {
        (2.0 * mu + (1.0 - 2.0 * mu) * tail).powf(1.0 / e) - 1.0
    } else {
        1.0 - (2.0 * (1.0 - mu) + 2.0 * (mu - 0.5) * tail).powf(1.0 / e)
    }
}

pub fn polynomial_mutation<R: Rng + ?Sized>(xi: f64, eta: f64, rng: &mut R) -> f64 {
    let mu: f64 = rng.random();
    (xi + polynomial_delta(xi, mu, eta)).clamp(0.0, 1.0)
}

struct PowerGenes<'a> {
    config: &'a HgaConfig,
    /// Keep every ξ at one and draw nothing.
    frozen: bool,
}

impl RealGenes for PowerGenes<'_> {
    fn init(&self, k: usize, special: bool, rng: &mut Stream) -> Option<Vec<f64>> {
        if special || self.frozen {
            Some(vec![1.0; k])
        } else {
            Some((0..k).map(|_| rng.random::<f64>()).collect())
        }
    }

    fn crossover(&self, a: &[f64], b: &[f64], rng: &mut Stream) -> (Vec<f64>, Vec<f64>) {
        if self.frozen {
            return (a.to_vec(), b.to_vec());
        }
        sbx_crossover(a, b, self.config.sbx_eta, rng)
    }

    fn mutate(&self, xi: &[f64], rng: &mut Stream) -> Vec<f64> {
        if self.frozen {
            return xi.to_vec();
        }
        xi.iter()
            .map(|&x| {
                if rng.random::<f64>() < self.config.real_mutation_rate {
                    polynomial_mutation(x, self.config.polymut_eta, rng)
                } else {
                    x
                }
            })
            .collect()
    }
}

pub fn run_hga(evaluator: &FitnessEvaluator, config: &HgaConfig) -> Result<GaOutcome> {
    run_hga_with(evaluator, config, BitConstraint::None, false)
}

/// `frozen_power` pins ξ at one, which reduces the search to the fixed-power problem.
pub fn run_hga_with(
    evaluator: &FitnessEvaluator,
    config: &HgaConfig,
    constraint: BitConstraint,
    frozen_power: bool,
) -> Result<GaOutcome> {
    run_hga_seeded(evaluator, config, constraint, frozen_power, &[])
}

/// As [`run_hga_with`], with `seeds` placed at full power into the initial population.
///
/// Seeding with the best fixed-power association makes the result at least
/// that association's fitness.
pub fn run_hga_seeded(
    evaluator: &FitnessEvaluator,
    config: &HgaConfig,
    constraint: BitConstraint,
    frozen_power: bool,
    seeds: &[Vec<bool>],
) -> Result<GaOutcome> {
    config.validate()?;
    let bits = 2 * evaluator.num_users();
    if let Some(s) = seeds.iter().find(|s| s.len() != bits) {
        return Err(Error::invalid(
            "seeds",
            format!("seed of {} bits for a {bits}-bit genome", s.len()),
        ));
    }
    let (offspring, mutants) = config.counts();
    let spec = EvolveSpec {
        config: &config.ga,
        offspring,
        mutants,
        constraint,
        // Frozen runs share the binary stream so they replay the BCGA exactly.
        label: if frozen_power { "ga" } else { "hga" },
        seeds,
    };
    ga::evolve(
        evaluator,
        &spec,
        &PowerGenes {
            config,
            frozen: frozen_power,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::{Genome, UtilityKind};
    use crate::geometry::{generate_scenario, tests::small_config};
    use crate::io::stream::seeded_stream;

    #[test]
    fn power_map_examples() {
        assert_eq!(denormalize_power(1.0, 100.0).unwrap(), 100.0);
        assert_eq!(denormalize_power(0.0, 100.0).unwrap(), 0.0);
        let xi = normalize_power(37.5, 100.0).unwrap();
        assert!((denormalize_power(xi, 100.0).unwrap() - 37.5).abs() < 1e-15 * 37.5);
        assert!(normalize_power(101.0, 100.0).is_err());
        assert!(denormalize_power(-0.1, 100.0).is_err());
    }

    #[test]
    fn sbx_examples() {
        assert_eq!(sbx_pair(0.4, 0.4, 15.0, 0.3), (0.4, 0.4));
        let mut rng = seeded_stream(1, "test");
        for _ in 0..10_000 {
            let (a, b): (f64, f64) = (rng.random(), rng.random());
            let mu: f64 = rng.random();
            let (c1, c2) = sbx_pair(a, b, 15.0, mu);
            assert!((c1 + c2 - a - b).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&c1) && (0.0..=1.0).contains(&c2));
            let (s1, s2) = sbx_pair(b, a, 15.0, mu);
            assert_eq!((s1, s2), (c2, c1));
        }
    }

    #[test]
    fn polynomial_mutation_examples() {
        for xi in [0.0, 0.2, 0.5, 0.93, 1.0] {
            assert_eq!(polynomial_delta(xi, 0.5, 20.0), 0.0);
        }
        for mu in [0.01, 0.2, 0.49] {
            assert!(polynomial_delta(0.0, mu, 20.0) >= 0.0);
        }
        let mut rng = seeded_stream(2, "test");
        for _ in 0..10_000 {
            let xi: f64 = rng.random();
            let eta = rng.random_range(0.5..50.0);
            let out = polynomial_mutation(xi, eta, &mut rng);
            assert!((0.0..=1.0).contains(&out));
        }
    }

    #[test]
    fn literal_counts() {
        let cfg = HgaConfig {
            literal_counts: true,
            ..HgaConfig::default()
        };
        assert_eq!(cfg.counts(), (2 * ((0.9 + 15.0) * 50.0 / 4.0f64).floor() as usize, 505));
        assert_eq!(HgaConfig::default().counts(), (44, 10));
    }

    #[test]
    fn frozen_power_replays_bcga_and_free_power_dominates() {
        let s = generate_scenario(&small_config(5, 3, 4), 6).unwrap();
        let eval = FitnessEvaluator::new(&s, UtilityKind::Maxmin).unwrap();
        let cfg = HgaConfig {
            ga: GaConfig {
                max_generations: 30,
                seed: 3,
                ..GaConfig::default()
            },
            ..HgaConfig::default()
        };
        let bcga = ga::run_bcga(&eval, &cfg.ga).unwrap();
        let frozen = run_hga_with(&eval, &cfg, BitConstraint::None, true).unwrap();
        assert_eq!(bcga.history, frozen.history);
        assert_eq!(bcga.result.best_genome.bits, frozen.result.best_genome.bits);

        let free = run_hga(&eval, &cfg).unwrap();
        assert!(free.history.windows(2).all(|w| w[1].best_fitness >= w[0].best_fitness));
        let start = Genome {
            bits: vec![true; 10],
            xi: Some(vec![1.0; 5]),
        };
        assert!(free.result.best_value >= eval.fitness(&start).unwrap());
        let xi = free.result.best_genome.xi.as_ref().unwrap();
        assert!(xi.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn seeded_run_dominates_its_seed() {
        let s = generate_scenario(&small_config(6, 3, 4), 8).unwrap();
        let eval = FitnessEvaluator::new(&s, UtilityKind::Geometric).unwrap();
        let cfg = HgaConfig {
            ga: GaConfig {
                max_generations: 10,
                ..GaConfig::default()
            },
            ..HgaConfig::default()
        };
        let bcga = ga::run_bcga(&eval, &cfg.ga).unwrap();
        let seed = bcga.result.best_genome.bits.clone();
        let warm = run_hga_seeded(&eval, &cfg, BitConstraint::None, false, std::slice::from_ref(&seed)).unwrap();
        assert!(warm.result.best_value >= bcga.result.best_value);
        assert!(warm.history[0].best_fitness >= bcga.result.best_value);
        assert!(run_hga_seeded(&eval, &cfg, BitConstraint::None, false, &[vec![true; 3]]).is_err());
    }
}
