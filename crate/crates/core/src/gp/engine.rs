//! The (μ, λ) evolution loop.
//!
//! Each generation the μ parents breed λ offspring (tournament selection,
//! one variation operator per offspring), the offspring are evaluated on the
//! active training subset, and the best μ replace the parents outright.
//! Epochs of `epoch_length` generations tie the loop to a [`Scheduler`]: at
//! every boundary the closing epoch updates the subset weights and the
//! scheduler picks the next training subset.
//!
//! Determinism contract: all randomness is drawn from one seeded generator,
//! strictly during initialization and breeding. Evaluation draws nothing and
//! each individual's error is accumulated in its own case order, so runs are
//! bit-for-bit reproducible regardless of how evaluation is parallelized.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub use crate::pipeline::SubsetData;

use crate::pipeline::FitnessCase;
use crate::scheduler::{Scheduler, SchedulerConfig, SchedulerError, SubsetId, TraceRow};

use super::tree::{CompiledExpr, ExprTree, VALUE_CAP};
use super::variation::{
    branch_mutation, crossover, expansion_mutation, point_mutation, MAX_DEPTH,
};

/// Evolution-loop parameters. Defaults are the reference configuration the
/// replication experiments use.
#[derive(Debug, Clone, PartialEq)]
pub struct GpParams {
    /// μ, the population size.
    pub population_size: usize,
    /// λ, offspring bred per generation; the best μ of them survive.
    pub offspring_count: usize,
    /// Generations for a static (single-subset) run.
    pub generations_static: usize,
    /// Generations for a dynamic (scheduled) run.
    pub generations_dynamic: usize,
    /// Generations per scheduling epoch.
    pub epoch_length: usize,
    pub tournament_size: usize,
    pub p_crossover: f64,
    pub p_branch_mutation: f64,
    pub p_point_mutation: f64,
    pub p_expansion_mutation: f64,
    /// Ramped half-and-half initialization depths, inclusive.
    pub init_depth_min: usize,
    pub init_depth_max: usize,
    pub seed: u64,
}

impl Default for GpParams {
    fn default() -> Self {
        Self {
            population_size: 100,
            offspring_count: 200,
            generations_static: 400,
            generations_dynamic: 1000,
            epoch_length: 50,
            tournament_size: 4,
            p_crossover: 0.60,
            p_branch_mutation: 0.20,
            p_point_mutation: 0.10,
            p_expansion_mutation: 0.10,
            init_depth_min: 2,
            init_depth_max: 6,
            seed: 0,
        }
    }
}

impl GpParams {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |msg: String| Err(EngineError::BadParams(msg));
        if self.population_size == 0 {
            return bad("population_size must be positive".into());
        }
        if self.offspring_count < self.population_size {
            return bad(format!(
                "offspring_count ({}) must be at least population_size ({})",
                self.offspring_count, self.population_size
            ));
        }
        if self.tournament_size == 0 {
            return bad("tournament_size must be positive".into());
        }
        if self.epoch_length == 0 {
            return bad("epoch_length must be positive".into());
        }
        if self.generations_static == 0 || self.generations_dynamic == 0 {
            return bad("generation counts must be positive".into());
        }
        let probs = [
            self.p_crossover,
            self.p_branch_mutation,
            self.p_point_mutation,
            self.p_expansion_mutation,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("operator probabilities must lie in [0, 1]".into());
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("operator probabilities must sum to 1, got {sum}"));
        }
        if self.init_depth_min > self.init_depth_max {
            return bad("init_depth_min must not exceed init_depth_max".into());
        }
        if self.init_depth_max > MAX_DEPTH {
            return bad(format!("init_depth_max must not exceed the depth cap {MAX_DEPTH}"));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("no training subsets supplied")]
    NoSubsets,
    #[error("training subset `{0}` has no cases")]
    EmptySubset(String),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
}

/// Everything one evolution run needs.
#[derive(Debug, Clone)]
pub struct EvolutionInput<'a> {
    pub subsets: &'a [SubsetData],
    /// Held-out cases the final best model is scored on.
    pub test_cases: &'a [FitnessCase],
    pub params: &'a GpParams,
    pub scheduler: SchedulerConfig,
}

/// One line of the per-generation log. Generation 0 is the evaluated initial
/// population; each later row is the population after one breeding cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub generation: usize,
    pub subset: SubsetId,
    pub best_mse: f64,
    pub mean_mse: f64,
    pub best_depth: usize,
    /// Deepest tree in the population at this generation.
    pub max_depth: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub best_tree: ExprTree,
    /// Lowest population-best training error observed anywhere in the run.
    /// Under a dynamic schedule the value is compared across subsets, so it
    /// reflects the easiest subset the winning model was trained on.
    pub best_train_mse: f64,
    /// Error of `best_tree` on the held-out cases; NaN when none were given.
    pub test_mse: f64,
    /// Breeding cycles executed.
    pub generations: usize,
    pub history: Vec<HistoryRow>,
    pub trace: Vec<TraceRow>,
    pub subset_labels: Vec<String>,
    pub final_weights: Vec<f64>,
    /// Deepest tree ever created during the run (initial or offspring).
    pub max_depth_seen: usize,
}

/// A scored population member.
#[derive(Debug, Clone)]
pub struct Individual {
    pub tree: ExprTree,
    pub mse: f64,
}

/// Mean of `(target - prediction)²` with each term capped at [`VALUE_CAP`]
/// so a single blown-up case cannot turn the fitness non-finite.
fn eval_mse(compiled: &CompiledExpr, cases: &[FitnessCase], stack: &mut Vec<f64>) -> f64 {
    let mut acc = 0.0;
    for case in cases {
        let err = case.target_sigma - compiled.eval_with(case, stack);
        acc += (err * err).min(VALUE_CAP);
    }
    acc / cases.len() as f64
}

/// Training error of one tree on a case set, as the engine computes it.
pub fn tree_mse(tree: &ExprTree, cases: &[FitnessCase]) -> f64 {
    let mut stack = Vec::new();
    eval_mse(&tree.compile(), cases, &mut stack)
}

fn evaluate_all(population: &mut [Individual], cases: &[FitnessCase]) {
    population.par_iter_mut().for_each(|ind| {
        let compiled = ind.tree.compile();
        let mut stack = Vec::with_capacity(ind.tree.depth() + 1);
        ind.mse = eval_mse(&compiled, cases, &mut stack);
    });
}

/// Sorts best-first; equal errors keep their current order, so lower indices
/// win ties everywhere downstream.
fn sort_by_mse(population: &mut [Individual]) {
    population.sort_by(|a, b| a.mse.total_cmp(&b.mse));
}

/// Winner of one tournament: among the drawn indices, the lowest error wins
/// and ties go to the earlier population position.
pub fn tournament_winner(errors: &[f64], draws: &[usize]) -> usize {
    let mut best = draws[0];
    for &i in &draws[1..] {
        if errors[i] < errors[best] || (errors[i] == errors[best] && i < best) {
            best = i;
        }
    }
    best
}

fn run_tournament<R: Rng>(rng: &mut R, population: &[Individual], size: usize) -> usize {
    let draws: Vec<usize> =
        (0..size).map(|_| rng.random_range(0..population.len())).collect();
    let errors: Vec<f64> = population.iter().map(|p| p.mse).collect();
    tournament_winner(&errors, &draws)
}

/// Ramped half-and-half: the population is spread evenly over the initial
/// depth levels (earlier levels absorb the remainder) and each level is half
/// full trees, half grow trees, the odd one going to full.
fn initial_population<R: Rng>(rng: &mut R, params: &GpParams) -> Vec<ExprTree> {
    let levels: Vec<usize> = (params.init_depth_min..=params.init_depth_max).collect();
    let per = params.population_size / levels.len();
    let extra = params.population_size % levels.len();
    let mut trees = Vec::with_capacity(params.population_size);
    for (i, &depth) in levels.iter().enumerate() {
        let count = per + usize::from(i < extra);
        let fulls = count.div_ceil(2);
        for _ in 0..fulls {
            trees.push(ExprTree::full(rng, depth));
        }
        for _ in fulls..count {
            trees.push(ExprTree::grow(rng, depth));
        }
    }
    trees
}

fn breed_one<R: Rng>(rng: &mut R, population: &[Individual], params: &GpParams) -> ExprTree {
    let u: f64 = rng.random();
    if u < params.p_crossover {
        let p1 = run_tournament(rng, population, params.tournament_size);
        let p2 = run_tournament(rng, population, params.tournament_size);
        crossover(rng, &population[p1].tree, &population[p2].tree)
    } else if u < params.p_crossover + params.p_branch_mutation {
        let p = run_tournament(rng, population, params.tournament_size);
        branch_mutation(rng, &population[p].tree)
    } else if u < params.p_crossover + params.p_branch_mutation + params.p_point_mutation {
        let p = run_tournament(rng, population, params.tournament_size);
        point_mutation(rng, &population[p].tree)
    } else {
        let p = run_tournament(rng, population, params.tournament_size);
        expansion_mutation(rng, &population[p].tree)
    }
}

/// Comma replacement: the best μ of the λ offspring become the next
/// generation; parents are discarded. The sort is stable, so among equal
/// errors earlier-bred offspring survive first.
pub fn replace_comma(mut offspring: Vec<Individual>, mu: usize) -> Vec<Individual> {
    sort_by_mse(&mut offspring);
    offspring.truncate(mu);
    offspring
}

fn history_row(generation: usize, subset: SubsetId, population: &[Individual]) -> HistoryRow {
    let mean = population.iter().map(|p| p.mse).sum::<f64>() / population.len() as f64;
    HistoryRow {
        generation,
        subset,
        best_mse: population[0].mse,
        mean_mse: mean,
        best_depth: population[0].tree.depth(),
        max_depth: population.iter().map(|p| p.tree.depth()).max().unwrap_or(0),
    }
}

/// Runs one full evolution. Static schedules run `generations_static`
/// breeding cycles, dynamic ones `generations_dynamic`.
pub fn run_evolution(input: &EvolutionInput) -> Result<RunOutcome, EngineError> {
    let params = input.params;
    params.validate()?;
    if input.subsets.is_empty() {
        return Err(EngineError::NoSubsets);
    }
    if let Some(empty) = input.subsets.iter().find(|s| s.cases.is_empty()) {
        return Err(EngineError::EmptySubset(empty.label.clone()));
    }

    let labels: Vec<String> = input.subsets.iter().map(|s| s.label.clone()).collect();
    let mut scheduler = Scheduler::new(&input.scheduler, labels.clone(), params.epoch_length)?;
    let total_generations = if input.scheduler.method.is_dynamic() {
        params.generations_dynamic
    } else {
        params.generations_static
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut active = scheduler.next_subset();

    let mut population: Vec<Individual> = initial_population(&mut rng, params)
        .into_iter()
        .map(|tree| Individual { tree, mse: f64::NAN })
        .collect();
    let mut max_depth_seen = population.iter().map(|p| p.tree.depth()).max().unwrap_or(0);
    evaluate_all(&mut population, &input.subsets[active].cases);
    sort_by_mse(&mut population);

    let mut best = population[0].clone();
    let mut history = Vec::with_capacity(total_generations + 1);
    history.push(history_row(0, active, &population));

    // Evaluates the current front-runner on every subset, for best-on-all
    // weight updates.
    let best_on_all = |population: &[Individual]| -> Vec<f64> {
        let compiled = population[0].tree.compile();
        let mut stack = Vec::new();
        input
            .subsets
            .iter()
            .map(|s| eval_mse(&compiled, &s.cases, &mut stack))
            .collect()
    };

    for cycle in 0..total_generations {
        if cycle > 0 && cycle % params.epoch_length == 0 {
            match input.scheduler.weight_mode {
                crate::scheduler::WeightMode::TrainedSubsetMean => scheduler.close_epoch(None)?,
                crate::scheduler::WeightMode::BestOnAll => {
                    scheduler.close_epoch(Some(&best_on_all(&population)))?
                }
            }
            let next = scheduler.next_subset();
            if next != active {
                active = next;
                evaluate_all(&mut population, &input.subsets[active].cases);
                sort_by_mse(&mut population);
                if population[0].mse < best.mse {
                    best = population[0].clone();
                }
            }
        }

        let parent_errors: Vec<f64> = population.iter().map(|p| p.mse).collect();
        scheduler.log_generation(&parent_errors)?;

        let mut offspring: Vec<Individual> = (0..params.offspring_count)
            .map(|_| Individual { tree: breed_one(&mut rng, &population, params), mse: f64::NAN })
            .collect();
        for o in &offspring {
            max_depth_seen = max_depth_seen.max(o.tree.depth());
        }
        evaluate_all(&mut offspring, &input.subsets[active].cases);
        population = replace_comma(offspring, params.population_size);

        if population[0].mse < best.mse {
            best = population[0].clone();
        }
        history.push(history_row(cycle + 1, active, &population));
    }

    // The weight picture is completed when the run ends exactly on an epoch
    // boundary; a partial final epoch leaves the weights as they were.
    if scheduler.fitness_rows() == params.epoch_length {
        let values;
        let update = match input.scheduler.weight_mode {
            crate::scheduler::WeightMode::TrainedSubsetMean => None,
            crate::scheduler::WeightMode::BestOnAll => {
                values = best_on_all(&population);
                Some(values.as_slice())
            }
        };
        scheduler.close_epoch(update)?;
    }

    let test_mse = if input.test_cases.is_empty() {
        f64::NAN
    } else {
        tree_mse(&best.tree, input.test_cases)
    };
    let final_weights = scheduler.weights().to_vec();
    Ok(RunOutcome {
        best_tree: best.tree,
        best_train_mse: best.mse,
        test_mse,
        generations: total_generations,
        history,
        trace: scheduler.into_trace(),
        subset_labels: labels,
        final_weights,
        max_depth_seen,
    })
}
