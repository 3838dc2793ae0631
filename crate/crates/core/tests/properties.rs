use proptest::prelude::*;

use simfair::exhaustive::{exhaustive_search, index_to_genome, ExhaustiveOptions};
use simfair::fairness::{utility, FitnessEvaluator, Genome, UtilityKind};
use simfair::ga::{
    bitwise_mutation, make_mask, masked_crossover, survival_select, BitConstraint, GaConfig, Individual, MaskKind,
};
use simfair::geometry::{generate_scenario, RadioConstants, ScenarioConfig};
use simfair::hga::{denormalize_power, normalize_power, polynomial_delta, sbx_pair};
use simfair::io::config::SimConfig;
use simfair::io::report::{round_sig, ModeShares};
use simfair::io::stream::seeded_stream;
use simfair::throughput::{AssociationPattern, LinkStatistics};

fn scenario_config(k: usize, n: usize, m: usize) -> ScenarioConfig {
    let mut cfg = SimConfig::default();
    cfg.radio.num_users = k;
    cfg.radio.num_aps = n;
    cfg.radio.num_sat_antennas = m;
    cfg.scenario_config().unwrap()
}

fn mask_kind() -> impl Strategy<Value = MaskKind> {
    prop_oneof![
        Just(MaskKind::OnePoint),
        Just(MaskKind::TwoPoint),
        Just(MaskKind::Uniform)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn utility_chain(rates in prop::collection::vec(1e-9f64..1e6, 1..64)) {
        let min = utility(&rates, UtilityKind::Maxmin).unwrap();
        let gm = utility(&rates, UtilityKind::Geometric).unwrap();
        let am = utility(&rates, UtilityKind::Arithmetic).unwrap();
        let tol = 1e-12 * am;
        prop_assert!(min <= gm + tol);
        prop_assert!(gm <= am + tol);
    }

    #[test]
    fn utilities_are_symmetric(mut rates in prop::collection::vec(0.0f64..1e4, 1..32), seed in any::<u64>()) {
        let before: Vec<f64> = UtilityKind::ALL.iter().map(|&k| utility(&rates, k).unwrap()).collect();
        let mut rng = seeded_stream(seed, "perm");
        use rand::seq::SliceRandom;
        rates.shuffle(&mut rng);
        for (i, &k) in UtilityKind::ALL.iter().enumerate() {
            let after = utility(&rates, k).unwrap();
            prop_assert!((after - before[i]).abs() <= 1e-12 * before[i].abs().max(1.0));
        }
    }

    #[test]
    fn sbx_mean_preserved_and_symmetric(a in 0.0f64..=1.0, b in 0.0f64..=1.0, mu in 0.0f64..1.0, eta in 0.5f64..60.0) {
        let (c1, c2) = sbx_pair(a, b, eta, mu);
        prop_assert!((c1 + c2 - a - b).abs() < 1e-12);
        let (s1, s2) = sbx_pair(b, a, eta, mu);
        prop_assert_eq!((s1, s2), (c2, c1));
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&c1));
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&c2));
    }

    #[test]
    fn polynomial_mutation_in_bounds(xi in 0.0f64..=1.0, mu in 0.0f64..1.0, eta in 0.1f64..100.0) {
        let out = xi + polynomial_delta(xi, mu, eta);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&out));
    }

    #[test]
    fn power_map_round_trip(xi in 0.0f64..=1.0, p_max in 1e-3f64..1e3) {
        let p = denormalize_power(xi, p_max).unwrap();
        let back = normalize_power(p, p_max).unwrap();
        prop_assert!((back - xi).abs() <= 1e-15 * xi.max(1e-300) + 1e-300);
    }

    #[test]
    fn crossover_conserves_genes(
        pair in (1usize..40).prop_flat_map(|k| (prop::collection::vec(any::<bool>(), 2 * k), prop::collection::vec(any::<bool>(), 2 * k))),
        kind in mask_kind(),
        seed in any::<u64>(),
    ) {
        let (p1, p2) = pair;
        let mask = make_mask(kind, p1.len(), &mut seeded_stream(seed, "mask")).unwrap();
        let (c1, c2) = masked_crossover(&p1, &p2, &mask).unwrap();
        for j in 0..p1.len() {
            prop_assert_eq!(c1[j] as u8 + c2[j] as u8, p1[j] as u8 + p2[j] as u8);
        }
        if kind == MaskKind::OnePoint {
            // One cut: the mask is a single run of zeros then ones.
            prop_assert!(mask.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn mutation_hamming_distance(bits in prop::collection::vec(any::<bool>(), 1..80), frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let count = 1 + ((bits.len() - 1) as f64 * frac) as usize;
        let m = bitwise_mutation(&bits, count, &mut seeded_stream(seed, "mut")).unwrap();
        prop_assert_eq!(bits.iter().zip(&m).filter(|(a, b)| a != b).count(), count);
    }

    #[test]
    fn flip_draws_in_range(bits in 2usize..60, seed in any::<u64>(), per_bit in any::<bool>()) {
        let cfg = GaConfig {
            flip_count: if per_bit { simfair::ga::FlipCount::PerBit } else { simfair::ga::FlipCount::Uniform },
            ..GaConfig::default()
        };
        let mut rng = seeded_stream(seed, "flips");
        for _ in 0..20 {
            let c = cfg.draw_flips(bits, &mut rng);
            prop_assert!(c >= 1 && c <= bits);
            if !per_bit {
                prop_assert!(c <= cfg.max_flips(bits));
            }
        }
    }

    #[test]
    fn survival_keeps_the_best(fits in prop::collection::vec(-1e3f64..1e3, 2..60), q in 1usize..40) {
        let pool: Vec<Individual> = fits
            .iter()
            .enumerate()
            .map(|(i, &f)| Individual { genome: Genome::all_ones(1), fitness: f, born: i % 3 })
            .collect();
        let best = fits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let kept = survival_select(pool, q);
        prop_assert_eq!(kept.len(), q.min(fits.len()));
        prop_assert_eq!(kept[0].fitness, best);
        prop_assert!(kept.windows(2).all(|w| w[0].fitness >= w[1].fitness));
    }

    #[test]
    fn constraints_are_idempotent(bits in prop::collection::vec(any::<bool>(), 2..40)) {
        let bits = if bits.len() % 2 == 1 { bits[1..].to_vec() } else { bits };
        for c in [BitConstraint::None, BitConstraint::SatelliteOnly, BitConstraint::ApOnly] {
            let mut once = bits.clone();
            c.apply(&mut once);
            prop_assert!(c.admits(&once));
            let mut twice = once.clone();
            c.apply(&mut twice);
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn genome_encode_decode(bits in prop::collection::vec(any::<bool>(), 1..30)) {
        let bits: Vec<bool> = bits.iter().chain(bits.iter()).copied().collect();
        let g = Genome::binary(bits);
        let (assoc, _) = g.decode().unwrap();
        prop_assert_eq!(Genome::encode(&assoc, None), g.clone());
        let m = ModeShares::of(&g);
        let total = m.satellite_only_pct + m.aps_only_pct + m.both_pct + m.unserved_pct;
        prop_assert!((total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn rounding_is_idempotent(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let r = round_sig(x);
        prop_assert_eq!(round_sig(r), r);
        prop_assert!((r - x).abs() <= 1e-8 * x.abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sinr_properties(seed in 0u64..1_000, k in 1usize..5, n in 1usize..5, scale in 0.05f64..1.0) {
        let s = generate_scenario(&scenario_config(k, n, 4), seed).unwrap();
        let stats = LinkStatistics::new(&s).unwrap();
        let p = s.constants.data_power_max_w;
        let full = AssociationPattern::full(k);
        let none = AssociationPattern { alpha: vec![false; k], alpha_tilde: vec![false; k] };
        for u in 0..k {
            let sinr = stats.sinr(&full, &vec![p; k], u);
            prop_assert!(sinr.is_finite() && sinr > 0.0);
            prop_assert_eq!(stats.sinr(&none, &vec![p; k], u), 0.0);
            // Lowering everyone else's power cannot hurt user u.
            let mut quiet = vec![p * scale; k];
            quiet[u] = p;
            prop_assert!(stats.sinr(&full, &quiet, u) >= sinr * (1.0 - 1e-12));
        }
    }

    #[test]
    fn scenario_is_seed_deterministic(seed in any::<u64>()) {
        let cfg = scenario_config(3, 2, 4);
        let a = generate_scenario(&cfg, seed).unwrap();
        let b = generate_scenario(&cfg, seed).unwrap();
        prop_assert_eq!(simfair::io::report::scenario_digest(&a), simfair::io::report::scenario_digest(&b));
        for row in a.beta_terrestrial.iter() {
            prop_assert!(*row > 0.0);
        }
    }

    #[test]
    fn exhaustive_dominates_every_pattern(seed in 0u64..500, kind_idx in 0usize..3) {
        let s = generate_scenario(&scenario_config(3, 2, 4), seed).unwrap();
        let eval = FitnessEvaluator::new(&s, UtilityKind::ALL[kind_idx]).unwrap();
        let best = exhaustive_search(&eval, ExhaustiveOptions::default()).unwrap();
        for i in 0..64u64 {
            prop_assert!(eval.fitness(&index_to_genome(i, 6)).unwrap() <= best.best_value);
        }
    }
}

#[test]
fn config_round_trip() {
    let mut cfg = SimConfig::default();
    cfg.ga.population = 37;
    cfg.hga.warm_start = true;
    cfg.validate_pattern = Some("1001".into());
    cfg.radio.num_users = 2;
    let again = SimConfig::load(&cfg.emit()).unwrap();
    assert_eq!(again.emit(), cfg.emit());
}

#[test]
fn radio_constants_reject_short_coherence() {
    let err = SimConfig::load("radio.num_users = 100\nradio.tau_c = 50\n")
        .unwrap_err()
        .to_string();
    assert!(err.contains("line 2") && err.contains("radio.tau_c"), "{err}");
    let mut c: RadioConstants = SimConfig::default().radio_constants().unwrap();
    assert!(c.validate().is_ok());
    c.coherence_symbols = c.num_users;
    assert!(c.validate().is_err());
}
