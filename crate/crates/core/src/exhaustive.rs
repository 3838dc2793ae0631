//! Exhaustive search over all 4^K association patterns.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::fairness::{FitnessEvaluator, Genome};
use crate::ga::BitConstraint;
use crate::{Error, Result};

/// Hard cap on the genome length for enumeration.
pub const MAX_EXHAUSTIVE_BITS: usize = 26;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub best_genome: Genome,
    pub best_value: f64,
    pub evaluations: usize,
    pub wall_time_s: f64,
}

/// Genome for enumeration index `index`, most significant bit first.
pub fn index_to_genome(index: u64, bits: usize) -> Genome {
    Genome::binary((0..bits).map(|j| (index >> (bits - 1 - j)) & 1 == 1).collect())
}

#[derive(Debug, Clone, Copy)]
pub struct ExhaustiveOptions {
    /// Include the all-zero pattern; enumeration otherwise starts at index 1.
    pub include_zero: bool,
    pub max_bits: usize,
    /// Patterns the constraint would change are skipped.
    pub constraint: BitConstraint,
}

impl Default for ExhaustiveOptions {
    fn default() -> Self {
        ExhaustiveOptions {
            include_zero: true,
            max_bits: MAX_EXHAUSTIVE_BITS,
            constraint: BitConstraint::None,
        }
    }
}

pub fn exhaustive_search(evaluator: &FitnessEvaluator, options: ExhaustiveOptions) -> Result<SearchResult> {
    let bits = 2 * evaluator.num_users();
    let cap = options.max_bits.min(MAX_EXHAUSTIVE_BITS);
    if bits > cap {
        return Err(Error::Capacity { bits, cap });
    }
    let start = Instant::now();
    let first: u64 = if options.include_zero { 0 } else { 1 };
    let end: u64 = 1 << bits;
    if first >= end {
        return Err(Error::invalid("exhaustive", "empty enumeration range"));
    }
    const CHUNK: u64 = 4096;
    let chunks = (end - first).div_ceil(CHUNK);
    let best = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<(f64, u64, usize)> {
            let lo = first + c * CHUNK;
            let hi = (lo + CHUNK).min(end);
            let mut best = (f64::NEG_INFINITY, lo, 0);
            for i in lo..hi {
                let genome = index_to_genome(i, bits);
                if !options.constraint.admits(&genome.bits) {
                    continue;
                }
                let v = evaluator.fitness(&genome)?;
                best.2 += 1;
                if v > best.0 {
                    best = (v, i, best.2);
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;
    let evaluations = best.iter().map(|b| b.2).sum();
    // Chunks are in index order, so a strict comparison keeps the lowest index.
    let best = best.into_iter().fold(
        (f64::NEG_INFINITY, first),
        |acc, b| if b.0 > acc.0 { (b.0, b.1) } else { acc },
    );
    Ok(SearchResult {
        best_genome: index_to_genome(best.1, bits),
        best_value: best.0,
        evaluations,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::UtilityKind;
    use crate::geometry::{generate_scenario, tests::small_config};

    fn evaluator(k: usize, kind: UtilityKind) -> FitnessEvaluator {
        FitnessEvaluator::new(&generate_scenario(&small_config(k, 3, 4), 13).unwrap(), kind).unwrap()
    }

    #[test]
    fn index_mapping_is_msb_first() {
        assert_eq!(index_to_genome(0b1001, 4).bit_string(), "1001");
        assert_eq!(index_to_genome(1, 4).bit_string(), "0001");
        assert_eq!(index_to_genome(15, 4), Genome::all_ones(2));
    }

    #[test]
    fn single_user_counts() {
        let e = evaluator(1, UtilityKind::Arithmetic);
        let all = exhaustive_search(&e, ExhaustiveOptions::default()).unwrap();
        assert_eq!(all.evaluations, 4);
        let skip = exhaustive_search(
            &e,
            ExhaustiveOptions {
                include_zero: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(skip.evaluations, 3);
        assert_eq!(all.best_value, skip.best_value);
    }

    #[test]
    fn matches_nested_loop_enumerator() {
        for kind in UtilityKind::ALL {
            let e = evaluator(3, kind);
            let res = exhaustive_search(&e, ExhaustiveOptions::default()).unwrap();
            // Independent enumeration over per-user modes (AP flag, satellite flag).
            let mut best = f64::NEG_INFINITY;
            for m0 in 0..4 {
                for m1 in 0..4 {
                    for m2 in 0..4 {
                        let bits = [m0, m1, m2].iter().flat_map(|m| [m & 2 != 0, m & 1 != 0]).collect();
                        best = best.max(e.fitness(&Genome::binary(bits)).unwrap());
                    }
                }
            }
            assert_eq!(res.best_value, best);
            assert_eq!(e.fitness(&res.best_genome).unwrap(), res.best_value);
            assert!(res.best_value >= e.fitness(&Genome::all_ones(3)).unwrap());
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        // Maxmin with a zero-rate pattern everywhere: the all-zero genome wins.
        let e = evaluator(2, UtilityKind::Maxmin);
        let res = exhaustive_search(&e, ExhaustiveOptions::default()).unwrap();
        let again = exhaustive_search(&e, ExhaustiveOptions::default()).unwrap();
        assert_eq!(res.best_genome, again.best_genome);
        // The winner is the first index with the maximal value.
        let first = (0..16u64)
            .find(|&i| e.fitness(&index_to_genome(i, 4)).unwrap() == res.best_value)
            .unwrap();
        assert_eq!(index_to_genome(first, 4), res.best_genome);
    }

    #[test]
    fn capacity_is_enforced() {
        let e = evaluator(14, UtilityKind::Arithmetic);
        assert!(matches!(
            exhaustive_search(&e, ExhaustiveOptions::default()),
            Err(Error::Capacity { bits: 28, cap: 26 })
        ));
        let e = evaluator(3, UtilityKind::Arithmetic);
        let small_cap = ExhaustiveOptions {
            max_bits: 4,
            ..Default::default()
        };
        assert!(exhaustive_search(&e, small_cap).is_err());
    }

    #[test]
    fn constrained_enumeration() {
        let e = evaluator(3, UtilityKind::Arithmetic);
        let free = exhaustive_search(&e, ExhaustiveOptions::default()).unwrap();
        for constraint in [BitConstraint::SatelliteOnly, BitConstraint::ApOnly] {
            let res = exhaustive_search(
                &e,
                ExhaustiveOptions {
                    constraint,
                    ..Default::default()
                },
            )
            .unwrap();
            assert_eq!(res.evaluations, 8);
            assert!(constraint.admits(&res.best_genome.bits));
            assert!(res.best_value <= free.best_value);
        }
    }
}
