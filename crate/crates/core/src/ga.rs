//! Binary-coded genetic algorithm over association genomes.
//!
//! One generation: pick `n_c/2` parent pairs and cross them with a random mask,
//! mutate `n_m` individuals drawn from the offspring, then keep the best `Q` of
//! parents and offspring together. Every random draw comes from one per-run
//! stream in a fixed order; fitness evaluation runs in parallel and never
//! touches it.
//!
//! [`evolve`] is shared with the hybrid algorithm, which adds real-valued
//! power genes with their own operators.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use crate::exhaustive::SearchResult;
use crate::fairness::{FitnessEvaluator, Genome};
use crate::io::stream::{seeded_stream, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParentSelection {
    Uniform,
    Tournament,
}

impl ParentSelection {
    pub fn as_str(&self) -> &'static str {
        match self {
            ParentSelection::Uniform => "uniform",
            ParentSelection::Tournament => "tournament",
        }
    }
}

/// Restriction of the feasible association patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BitConstraint {
    None,
    SatelliteOnly,
    ApOnly,
}

impl BitConstraint {
    pub fn apply(&self, bits: &mut [bool]) {
        let forbidden = match self {
            BitConstraint::None => return,
            BitConstraint::SatelliteOnly => 0,
            BitConstraint::ApOnly => 1,
        };
        for pair in bits.chunks_mut(2) {
            pair[forbidden] = false;
        }
    }

    pub fn admits(&self, bits: &[bool]) -> bool {
        let mut copy = bits.to_vec();
        self.apply(&mut copy);
        copy == bits
    }
}

/// Distribution of the number of bits one mutation flips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlipCount {
    /// `c ~ U{1..⌈fraction·2K⌉}`.
    Uniform,
    /// Each bit flips with probability p_m, conditioned on at least one flip.
    PerBit,
}

impl FlipCount {
    pub fn as_str(&self) -> &'static str {
        match self {
            FlipCount::Uniform => "uniform",
            FlipCount::PerBit => "per-bit",
        }
    }
}

impl std::str::FromStr for FlipCount {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uniform" => Ok(FlipCount::Uniform),
            "per-bit" | "per_bit" | "bernoulli" => Ok(FlipCount::PerBit),
            other => Err(format!("unknown flip count `{other}` (expected uniform or per-bit)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaConfig {
    pub population: usize,
    pub max_generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Probability of a one-point mask.
    pub eps_one_point: f64,
    /// Probability of a two-point mask; uniform masks take the rest.
    pub eps_two_point: f64,
    /// Re-weight the mask kinds by recent success (10-generation window).
    pub adaptive_eps: bool,
    /// Upper end of the uniform flip count, as a fraction of 2K.
    pub mutate_max_fraction: f64,
    pub flip_count: FlipCount,
    pub parent_selection: ParentSelection,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 50,
            max_generations: 300,
            crossover_rate: 0.9,
            mutation_rate: 0.2,
            eps_one_point: 1.0 / 3.0,
            eps_two_point: 1.0 / 3.0,
            adaptive_eps: false,
            mutate_max_fraction: 0.1,
            flip_count: FlipCount::Uniform,
            parent_selection: ParentSelection::Uniform,
            seed: 1,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::invalid("population", "must be at least 2"));
        }
        for (name, v) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(name, format!("{v} outside (0, 1]")));
            }
        }
        for (name, v) in [
            ("eps_one_point", self.eps_one_point),
            ("eps_two_point", self.eps_two_point),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(name, format!("{v} outside [0, 1]")));
            }
        }
        if self.eps_one_point + self.eps_two_point > 1.0 + 1e-12 {
            return Err(Error::invalid(
                "eps_two_point",
                "eps_one_point + eps_two_point exceeds 1",
            ));
        }
        if !(self.mutate_max_fraction > 0.0 && self.mutate_max_fraction <= 1.0) {
            return Err(Error::invalid("mutate_max_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Offspring count `n_c = 2⌊p_c Q / 2⌋`.
    pub fn offspring_count(&self) -> usize {
        2 * (self.crossover_rate * self.population as f64 / 2.0).floor() as usize
    }

    /// Mutant count `n_m = ⌊p_m Q⌋`.
    pub fn mutant_count(&self) -> usize {
        (self.mutation_rate * self.population as f64).floor() as usize
    }

    /// Largest number of flipped bits for a genome of `bits` bits.
    pub fn max_flips(&self, bits: usize) -> usize {
        ((self.mutate_max_fraction * bits as f64).ceil() as usize).clamp(1, bits.max(1))
    }

    /// Draws the flip count of one mutation on a `bits`-bit genome.
    pub fn draw_flips<R: Rng + ?Sized>(&self, bits: usize, rng: &mut R) -> usize {
        match self.flip_count {
            FlipCount::Uniform => rng.random_range(1..=self.max_flips(bits)),
            FlipCount::PerBit => loop {
                let c = (0..bits).filter(|_| rng.random::<f64>() < self.mutation_rate).count();
                if c > 0 {
                    break c;
                }
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskKind {
    OnePoint,
    TwoPoint,
    Uniform,
}

impl MaskKind {
    fn slot(self) -> usize {
        match self {
            MaskKind::OnePoint => 0,
            MaskKind::TwoPoint => 1,
            MaskKind::Uniform => 2,
        }
    }
}

/// `mask[i] = i ≥ cp`.
pub fn one_point_mask(len: usize, cp: usize) -> Vec<bool> {
    (0..len).map(|i| i >= cp).collect()
}

/// Zero on `[cp1, cp2)`, one elsewhere.
pub fn two_point_mask(len: usize, cp1: usize, cp2: usize) -> Vec<bool> {
    (0..len).map(|i| !(cp1..cp2).contains(&i)).collect()
}

pub fn make_mask<R: Rng + ?Sized>(kind: MaskKind, len: usize, rng: &mut R) -> Result<Vec<bool>> {
    if len < 2 {
        return Err(Error::invalid("mask_length", format!("{len} is below 2")));
    }
    Ok(match kind {
        MaskKind::OnePoint => one_point_mask(len, rng.random_range(1..len)),
        MaskKind::TwoPoint => {
            if len == 2 {
                // The only ordered pair in {1}: fall back to the single cut.
                one_point_mask(len, 1)
            } else {
                let picks = index::sample(rng, len - 1, 2);
                let (a, b) = (picks.index(0) + 1, picks.index(1) + 1);
                two_point_mask(len, a.min(b), a.max(b))
            }
        }
        MaskKind::Uniform => (0..len).map(|_| rng.random::<f64>() < 0.5).collect(),
    })
}

/// `c1 = mask ∧ p1 ∨ ¬mask ∧ p2`; `c2` the other way round.
pub fn masked_crossover(p1: &[bool], p2: &[bool], mask: &[bool]) -> Result<(Vec<bool>, Vec<bool>)> {
    if p1.len() != p2.len() || p1.len() != mask.len() {
        return Err(Error::invalid(
            "crossover",
            format!("lengths {} / {} / mask {}", p1.len(), p2.len(), mask.len()),
        ));
    }
    let c1 = (0..p1.len()).map(|i| if mask[i] { p1[i] } else { p2[i] }).collect();
    let c2 = (0..p1.len()).map(|i| if mask[i] { p2[i] } else { p1[i] }).collect();
    Ok((c1, c2))
}

/// XOR with a mask of exactly `count` distinct positions.
pub fn mutation_mask<R: Rng + ?Sized>(len: usize, count: usize, rng: &mut R) -> Result<Vec<bool>> {
    if count == 0 || count > len {
        return Err(Error::invalid("mutate_count", format!("{count} outside 1..={len}")));
    }
    let mut mask = vec![false; len];
    for i in index::sample(rng, len, count) {
        mask[i] = true;
    }
    Ok(mask)
}

pub fn bitwise_mutation<R: Rng + ?Sized>(bits: &[bool], count: usize, rng: &mut R) -> Result<Vec<bool>> {
    let mask = mutation_mask(bits.len(), count, rng)?;
    Ok(bits.iter().zip(&mask).map(|(b, m)| b ^ m).collect())
}

/// Member 0 is the all-ones genome; the rest are Bernoulli(0.5) bit strings.
pub fn init_population<R: Rng + ?Sized>(q: usize, k_users: usize, rng: &mut R) -> Result<Vec<Genome>> {
    if q < 2 {
        return Err(Error::invalid("population", "must be at least 2"));
    }
    let mut members = vec![Genome::all_ones(k_users)];
    for _ in 1..q {
        members.push(random_bits(2 * k_users, rng));
    }
    Ok(members)
}

fn random_bits<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Genome {
    Genome::binary((0..len).map(|_| rng.random::<f64>() >= 0.5).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Individual {
    pub genome: Genome,
    pub fitness: f64,
    /// Generation the individual was created in.
    pub born: usize,
}

fn rank(a: &Individual, b: &Individual) -> Ordering {
    b.fitness
        .partial_cmp(&a.fitness)
        .unwrap_or(Ordering::Equal)
        .then(a.born.cmp(&b.born))
}

/// Best `q` of the pool: fitness descending, then older first, then pool order.
pub fn survival_select(mut pool: Vec<Individual>, q: usize) -> Vec<Individual> {
    // Stable sort keeps pool order among exact ties.
    pool.sort_by(rank);
    pool.truncate(q);
    pool
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Population {
    pub members: Vec<Individual>,
    pub generation: usize,
    pub best: Individual,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryRow {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub evals_cum: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaOutcome {
    pub result: SearchResult,
    pub history: Vec<HistoryRow>,
    /// Generation in which the returned best was created.
    pub best_generation: usize,
}

impl GaOutcome {
    /// First generation whose best reaches `target` (relative slack 1e-12).
    pub fn hitting_generation(&self, target: f64) -> Option<usize> {
        let threshold = target - 1e-12 * target.abs();
        self.history
            .iter()
            .find(|r| r.best_fitness >= threshold)
            .map(|r| r.generation)
    }
}

/// Hooks for real-valued power genes.
pub(crate) trait RealGenes: Sync {
    fn init(&self, k: usize, special: bool, rng: &mut Stream) -> Option<Vec<f64>>;
    fn crossover(&self, a: &[f64], b: &[f64], rng: &mut Stream) -> (Vec<f64>, Vec<f64>);
    fn mutate(&self, xi: &[f64], rng: &mut Stream) -> Vec<f64>;
}

struct NoRealGenes;

impl RealGenes for NoRealGenes {
    fn init(&self, _: usize, _: bool, _: &mut Stream) -> Option<Vec<f64>> {
        None
    }
    fn crossover(&self, a: &[f64], b: &[f64], _: &mut Stream) -> (Vec<f64>, Vec<f64>) {
        (a.to_vec(), b.to_vec())
    }
    fn mutate(&self, xi: &[f64], _: &mut Stream) -> Vec<f64> {
        xi.to_vec()
    }
}

/// Success-rate weighting of the mask kinds over a sliding window.
struct MaskWeights {
    fixed: [f64; 3],
    adaptive: bool,
    window: VecDeque<([usize; 3], [usize; 3])>,
}

impl MaskWeights {
    const WINDOW: usize = 10;

    fn new(config: &GaConfig) -> Self {
        let (e1, e2) = (config.eps_one_point, config.eps_two_point);
        MaskWeights {
            fixed: [e1, e2, (1.0 - e1 - e2).max(0.0)],
            adaptive: config.adaptive_eps,
            window: VecDeque::new(),
        }
    }

    fn probabilities(&self) -> [f64; 3] {
        if !self.adaptive || self.window.is_empty() {
            return self.fixed;
        }
        let mut w = [0.0; 3];
        for slot in 0..3 {
            let (wins, uses) = self
                .window
                .iter()
                .fold((0, 0), |(s, u), (ws, us)| (s + ws[slot], u + us[slot]));
            w[slot] = (wins as f64 + 1.0) / (uses as f64 + 2.0);
        }
        let total: f64 = w.iter().sum();
        w.map(|x| x / total)
    }

    fn draw(&self, rng: &mut Stream) -> MaskKind {
        let p = self.probabilities();
        let u: f64 = rng.random();
        if u < p[0] {
            MaskKind::OnePoint
        } else if u < p[0] + p[1] {
            MaskKind::TwoPoint
        } else {
            MaskKind::Uniform
        }
    }

    fn record(&mut self, wins: [usize; 3], uses: [usize; 3]) {
        if !self.adaptive {
            return;
        }
        self.window.push_back((wins, uses));
        if self.window.len() > Self::WINDOW {
            self.window.pop_front();
        }
    }
}

fn pick_parent(members: &[Individual], selection: ParentSelection, rng: &mut Stream) -> usize {
    let q = members.len();
    match selection {
        ParentSelection::Uniform => rng.random_range(0..q),
        ParentSelection::Tournament => {
            let (a, b) = (rng.random_range(0..q), rng.random_range(0..q));
            if rank(&members[a], &members[b]) == Ordering::Greater {
                b
            } else {
                a
            }
        }
    }
}

fn pick_pair(members: &[Individual], selection: ParentSelection, rng: &mut Stream) -> (usize, usize) {
    match selection {
        ParentSelection::Uniform => {
            let q = members.len();
            let i = rng.random_range(0..q);
            let mut j = rng.random_range(0..q - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        }
        ParentSelection::Tournament => {
            let i = pick_parent(members, selection, rng);
            loop {
                let j = pick_parent(members, selection, rng);
                if j != i {
                    return (i, j);
                }
            }
        }
    }
}

pub(crate) struct EvolveSpec<'a> {
    pub config: &'a GaConfig,
    pub offspring: usize,
    pub mutants: usize,
    pub constraint: BitConstraint,
    pub label: &'static str,
    /// Bit patterns that replace members 1, 2, … of the initial population.
    pub seeds: &'a [Vec<bool>],
}

pub(crate) fn evolve(evaluator: &FitnessEvaluator, spec: &EvolveSpec<'_>, real: &dyn RealGenes) -> Result<GaOutcome> {
    let config = spec.config;
    config.validate()?;
    let start = Instant::now();
    let k = evaluator.num_users();
    let len = 2 * k;
    let q = config.population;
    let mut rng = seeded_stream(config.seed, spec.label);

    let mut genomes = init_population(q, k, &mut rng)?;
    for (i, g) in genomes.iter_mut().enumerate() {
        g.xi = real.init(k, i == 0, &mut rng);
        spec.constraint.apply(&mut g.bits);
    }
    // Seeded members keep full power; the stream is consumed as without seeds.
    for (g, bits) in genomes.iter_mut().skip(1).zip(spec.seeds) {
        g.bits = bits.clone();
        spec.constraint.apply(&mut g.bits);
        if let Some(xi) = &mut g.xi {
            xi.iter_mut().for_each(|x| *x = 1.0);
        }
    }
    let fitness = evaluator.evaluate_all(&genomes)?;
    let mut members: Vec<Individual> = genomes
        .into_iter()
        .zip(fitness)
        .map(|(genome, fitness)| Individual {
            genome,
            fitness,
            born: 0,
        })
        .collect();
    members = survival_select(members, q);
    let mut evals = q;
    let mut best = members[0].clone();
    let mut history = vec![history_row(0, &best, &members, evals)];
    let mut weights = MaskWeights::new(config);

    for generation in 1..=config.max_generations {
        let mut children: Vec<Genome> = Vec::with_capacity(spec.offspring + spec.mutants);
        let mut lineage: Vec<(MaskKind, f64)> = Vec::with_capacity(spec.offspring);
        for _ in 0..spec.offspring / 2 {
            let (i, j) = pick_pair(&members, config.parent_selection, &mut rng);
            let (p1, p2) = (&members[i].genome, &members[j].genome);
            let kind = weights.draw(&mut rng);
            let mask = make_mask(kind, len, &mut rng)?;
            let (mut b1, mut b2) = masked_crossover(&p1.bits, &p2.bits, &mask)?;
            spec.constraint.apply(&mut b1);
            spec.constraint.apply(&mut b2);
            let (x1, x2) = match (&p1.xi, &p2.xi) {
                (Some(a), Some(b)) => {
                    let (x1, x2) = real.crossover(a, b, &mut rng);
                    (Some(x1), Some(x2))
                }
                _ => (None, None),
            };
            let parent_best = members[i].fitness.max(members[j].fitness);
            children.push(Genome { bits: b1, xi: x1 });
            children.push(Genome { bits: b2, xi: x2 });
            lineage.push((kind, parent_best));
            lineage.push((kind, parent_best));
        }
        let crossed = children.len();
        for _ in 0..spec.mutants {
            // Mutants come from the offspring; without offspring, from the population.
            let source = if crossed > 0 {
                children[rng.random_range(0..crossed)].clone()
            } else {
                members[rng.random_range(0..members.len())].genome.clone()
            };
            let flips = config.draw_flips(len, &mut rng);
            let mut bits = bitwise_mutation(&source.bits, flips, &mut rng)?;
            spec.constraint.apply(&mut bits);
            let xi = source.xi.as_deref().map(|x| real.mutate(x, &mut rng));
            children.push(Genome { bits, xi });
        }

        let fitness = evaluator.evaluate_all(&children)?;
        evals += children.len();
        if config.adaptive_eps {
            let (mut wins, mut uses) = ([0; 3], [0; 3]);
            for ((kind, parent_best), f) in lineage.iter().zip(&fitness) {
                uses[kind.slot()] += 1;
                if *f > *parent_best {
                    wins[kind.slot()] += 1;
                }
            }
            weights.record(wins, uses);
        }
        let mut pool = members;
        pool.extend(children.into_iter().zip(fitness).map(|(genome, fitness)| Individual {
            genome,
            fitness,
            born: generation,
        }));
        members = survival_select(pool, q);
        if members[0].fitness > best.fitness {
            best = members[0].clone();
        }
        history.push(history_row(generation, &best, &members, evals));
    }

    Ok(GaOutcome {
        best_generation: best.born,
        result: SearchResult {
            best_value: best.fitness,
            best_genome: best.genome,
            evaluations: evals,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        history,
    })
}

fn history_row(generation: usize, best: &Individual, members: &[Individual], evals: usize) -> HistoryRow {
    HistoryRow {
        generation,
        best_fitness: best.fitness,
        mean_fitness: members.iter().map(|m| m.fitness).sum::<f64>() / members.len() as f64,
        evals_cum: evals,
    }
}

pub fn run_bcga(evaluator: &FitnessEvaluator, config: &GaConfig) -> Result<GaOutcome> {
    run_bcga_constrained(evaluator, config, BitConstraint::None)
}

pub fn run_bcga_constrained(
    evaluator: &FitnessEvaluator,
    config: &GaConfig,
    constraint: BitConstraint,
) -> Result<GaOutcome> {
    let spec = EvolveSpec {
        config,
        offspring: config.offspring_count(),
        mutants: config.mutant_count(),
        constraint,
        label: "ga",
        seeds: &[],
    };
    evolve(evaluator, &spec, &NoRealGenes)
}
