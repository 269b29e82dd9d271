//! Training-subset scheduling.
//!
//! Evolution proceeds in epochs of a fixed number of generations; at every
//! epoch boundary a scheduler picks which training subset the population
//! sees next:
//!
//! * `STATIC` — a single subset throughout (the classical setup).
//! * `RSS` — uniform random subset each epoch.
//! * `SSS` — subsets in fixed round-robin order.
//! * `ASSS` — each subset once in order, then always the one with the
//!   highest weight (the hardest so far).
//! * `ARSS` — random weight initialization, random choice for the first
//!   `k` epochs, then highest weight.
//!
//! Weights estimate how poorly the population handles a subset: either the
//! mean population error on the trained subset over the closing epoch, or
//! the epoch-best individual's error on every subset. Selecting the maximum
//! steers training toward the data the current models fit worst.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Index of a training subset within a run's subset list.
pub type SubsetId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchedulerMethod {
    Static,
    Rss,
    Sss,
    Asss,
    Arss,
}

impl SchedulerMethod {
    pub const ALL: [SchedulerMethod; 5] = [
        SchedulerMethod::Static,
        SchedulerMethod::Rss,
        SchedulerMethod::Sss,
        SchedulerMethod::Asss,
        SchedulerMethod::Arss,
    ];

    pub const DYNAMIC: [SchedulerMethod; 4] = [
        SchedulerMethod::Rss,
        SchedulerMethod::Sss,
        SchedulerMethod::Asss,
        SchedulerMethod::Arss,
    ];

    pub fn is_dynamic(self) -> bool {
        !matches!(self, SchedulerMethod::Static)
    }

    pub fn label(self) -> &'static str {
        match self {
            SchedulerMethod::Static => "STATIC",
            SchedulerMethod::Rss => "RSS",
            SchedulerMethod::Sss => "SSS",
            SchedulerMethod::Asss => "ASSS",
            SchedulerMethod::Arss => "ARSS",
        }
    }
}

impl fmt::Display for SchedulerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SchedulerMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown scheduling method `{s}` (expected STATIC, RSS, SSS, ASSS or ARSS)"))
    }
}

/// How subset weights are refreshed when an epoch closes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// Weight of the trained subset becomes the mean population error on it
    /// over the whole epoch; other weights keep their values.
    #[default]
    TrainedSubsetMean,
    /// The epoch's best individual is evaluated on every subset and all
    /// weights are replaced at once.
    BestOnAll,
}

impl WeightMode {
    pub fn label(self) -> &'static str {
        match self {
            WeightMode::TrainedSubsetMean => "trained-mean",
            WeightMode::BestOnAll => "best-on-all",
        }
    }
}

impl fmt::Display for WeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for WeightMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "trained-mean" | "trained_mean" => Ok(WeightMode::TrainedSubsetMean),
            "best-on-all" | "best_on_all" => Ok(WeightMode::BestOnAll),
            _ => Err(format!("unknown weight mode `{s}` (expected trained-mean or best-on-all)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedulerConfig {
    pub method: SchedulerMethod,
    pub weight_mode: WeightMode,
    pub seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SchedulerError {
    #[error("static scheduling requires exactly one subset, got {0}")]
    StaticNeedsOneSubset(usize),
    #[error("at least one training subset is required")]
    NoSubsets,
    #[error("no epoch is active yet")]
    NoActiveEpoch,
    #[error("fitness row is empty")]
    EmptyFitnessRow,
    #[error("fitness row width {got} differs from the epoch's first row ({expected})")]
    RaggedLog { got: usize, expected: usize },
    #[error("epoch log holds {got} generations, expected {expected}")]
    IncompleteLog { got: usize, expected: usize },
    #[error("per-subset errors: got {got} values for {expected} subsets")]
    WeightCount { got: usize, expected: usize },
    #[error("weight update input does not match mode {0}")]
    WrongWeightInput(&'static str),
}

/// One scheduling decision: the weights are the values the choice was made
/// with.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub chosen: SubsetId,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    method: SchedulerMethod,
    weight_mode: WeightMode,
    labels: Vec<String>,
    epoch_length: usize,
    weights: Vec<f64>,
    /// Epoch at which each subset was last chosen; -1 means never.
    last_selected: Vec<i64>,
    epoch: usize,
    active: Option<SubsetId>,
    fitness_log: Vec<Vec<f64>>,
    trace: Vec<TraceRow>,
    rng: ChaCha8Rng,
}

impl Scheduler {
    /// `epoch_length` is the number of generations per epoch, i.e. the
    /// number of fitness rows a complete epoch logs.
    pub fn new(
        config: &SchedulerConfig,
        labels: Vec<String>,
        epoch_length: usize,
    ) -> Result<Self, SchedulerError> {
        let k = labels.len();
        if k == 0 {
            return Err(SchedulerError::NoSubsets);
        }
        if config.method == SchedulerMethod::Static && k != 1 {
            return Err(SchedulerError::StaticNeedsOneSubset(k));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let weights = match config.method {
            SchedulerMethod::Asss => vec![1.0; k],
            SchedulerMethod::Arss => (0..k).map(|_| rng.random::<f64>()).collect(),
            _ => vec![0.0; k],
        };
        Ok(Self {
            method: config.method,
            weight_mode: config.weight_mode,
            labels,
            epoch_length,
            weights,
            last_selected: vec![-1; k],
            epoch: 0,
            active: None,
            fitness_log: Vec::new(),
            trace: Vec::new(),
            rng,
        })
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn active(&self) -> Option<SubsetId> {
        self.active
    }

    /// Number of scheduling decisions made so far.
    pub fn epochs_started(&self) -> usize {
        self.epoch
    }

    /// Generations logged in the epoch currently underway.
    pub fn fitness_rows(&self) -> usize {
        self.fitness_log.len()
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<TraceRow> {
        self.trace
    }

    /// Records one generation's population errors on the active subset.
    pub fn log_generation(&mut self, population_errors: &[f64]) -> Result<(), SchedulerError> {
        if self.active.is_none() {
            return Err(SchedulerError::NoActiveEpoch);
        }
        if population_errors.is_empty() {
            return Err(SchedulerError::EmptyFitnessRow);
        }
        if let Some(first) = self.fitness_log.first() {
            if first.len() != population_errors.len() {
                return Err(SchedulerError::RaggedLog {
                    got: population_errors.len(),
                    expected: first.len(),
                });
            }
        }
        self.fitness_log.push(population_errors.to_vec());
        Ok(())
    }

    /// Refreshes the weights for the epoch that just finished.
    ///
    /// In [`WeightMode::TrainedSubsetMean`] the call takes no input and
    /// requires a complete log (one row per generation of the epoch); the
    /// active subset's weight becomes the flat mean of all logged errors.
    /// In [`WeightMode::BestOnAll`] the caller passes the epoch-best
    /// individual's error on every subset and all weights are replaced.
    pub fn close_epoch(&mut self, best_on_all: Option<&[f64]>) -> Result<(), SchedulerError> {
        let active = self.active.ok_or(SchedulerError::NoActiveEpoch)?;
        match (self.weight_mode, best_on_all) {
            (WeightMode::TrainedSubsetMean, None) => {
                if self.fitness_log.len() != self.epoch_length {
                    return Err(SchedulerError::IncompleteLog {
                        got: self.fitness_log.len(),
                        expected: self.epoch_length,
                    });
                }
                let width = self.fitness_log[0].len();
                let total: f64 = self.fitness_log.iter().flatten().sum();
                self.weights[active] = total / (self.epoch_length * width) as f64;
                Ok(())
            }
            (WeightMode::BestOnAll, Some(values)) => {
                if values.len() != self.k() {
                    return Err(SchedulerError::WeightCount {
                        got: values.len(),
                        expected: self.k(),
                    });
                }
                self.weights.copy_from_slice(values);
                Ok(())
            }
            (WeightMode::TrainedSubsetMean, Some(_)) => {
                Err(SchedulerError::WrongWeightInput("trained-mean takes no per-subset errors"))
            }
            (WeightMode::BestOnAll, None) => {
                Err(SchedulerError::WrongWeightInput("best-on-all requires per-subset errors"))
            }
        }
    }

    /// Picks the subset for the next epoch and starts it: the decision is
    /// traced together with the weights it was made with, the choice is
    /// stamped as most recently selected, and the fitness log is cleared.
    pub fn next_subset(&mut self) -> SubsetId {
        let k = self.k();
        let chosen = match self.method {
            SchedulerMethod::Static => 0,
            SchedulerMethod::Rss => self.rng.random_range(0..k),
            SchedulerMethod::Sss => self.epoch % k,
            SchedulerMethod::Asss => {
                if self.epoch < k {
                    self.epoch
                } else {
                    self.argmax_weight()
                }
            }
            SchedulerMethod::Arss => {
                if self.epoch < k {
                    self.rng.random_range(0..k)
                } else {
                    self.argmax_weight()
                }
            }
        };
        self.trace.push(TraceRow {
            epoch: self.epoch,
            chosen,
            weights: self.weights.clone(),
        });
        self.last_selected[chosen] = self.epoch as i64;
        self.epoch += 1;
        self.active = Some(chosen);
        self.fitness_log.clear();
        chosen
    }

    /// Highest weight wins; ties go to the least recently selected subset
    /// (never-selected counts as least recent), then to the lowest index.
    fn argmax_weight(&self) -> SubsetId {
        let mut best = 0;
        for i in 1..self.weights.len() {
            let better = self.weights[i] > self.weights[best]
                || (self.weights[i] == self.weights[best]
                    && self.last_selected[i] < self.last_selected[best]);
            if better {
                best = i;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("S{}", i + 1)).collect()
    }

    fn config(method: SchedulerMethod, seed: u64) -> SchedulerConfig {
        SchedulerConfig { method, weight_mode: WeightMode::TrainedSubsetMean, seed }
    }

    #[test]
    fn static_scheduling_needs_exactly_one_subset() {
        let err = Scheduler::new(&config(SchedulerMethod::Static, 0), labels(3), 10).unwrap_err();
        assert_eq!(err, SchedulerError::StaticNeedsOneSubset(3));
        assert_eq!(
            Scheduler::new(&config(SchedulerMethod::Rss, 0), vec![], 10).unwrap_err(),
            SchedulerError::NoSubsets
        );

        let mut s = Scheduler::new(&config(SchedulerMethod::Static, 0), labels(1), 10).unwrap();
        for _ in 0..5 {
            assert_eq!(s.next_subset(), 0);
        }
    }

    #[test]
    fn sss_cycles_through_subsets_in_order() {
        let mut s = Scheduler::new(&config(SchedulerMethod::Sss, 0), labels(3), 10).unwrap();
        let picks: Vec<_> = (0..7).map(|_| s.next_subset()).collect();
        assert_eq!(picks, vec![0, 1, 2, 0, 1, 2, 0]);
    }

    #[test]
    fn rss_is_seeded_uniform_sampling() {
        let draw = |seed: u64| {
            let mut s = Scheduler::new(&config(SchedulerMethod::Rss, seed), labels(4), 10).unwrap();
            (0..400).map(|_| s.next_subset()).collect::<Vec<_>>()
        };
        let a = draw(7);
        assert_eq!(a, draw(7));
        assert_ne!(a, draw(8));
        assert!(a.iter().all(|&i| i < 4));
        for subset in 0..4 {
            let hits = a.iter().filter(|&&i| i == subset).count();
            assert!(hits > 50, "subset {subset} drawn only {hits} times in 400");
        }
    }

    #[test]
    fn trained_mean_weight_is_the_flat_mean_of_the_epoch_log() {
        let mut s = Scheduler::new(&config(SchedulerMethod::Asss, 0), labels(2), 2).unwrap();
        assert_eq!(s.next_subset(), 0);
        s.log_generation(&[1.0, 2.0]).unwrap();
        s.log_generation(&[3.0, 4.0]).unwrap();
        s.close_epoch(None).unwrap();
        assert_eq!(s.weights(), &[2.5, 1.0]);
    }

    #[test]
    fn asss_probes_in_order_then_trains_the_heaviest() {
        let mut s = Scheduler::new(&config(SchedulerMethod::Asss, 0), labels(3), 1).unwrap();
        let mut probe = |expect: SubsetId, mean: f64| {
            assert_eq!(s.next_subset(), expect);
            s.log_generation(&[mean]).unwrap();
            s.close_epoch(None).unwrap();
        };
        probe(0, 5.0);
        probe(1, 9.0);
        probe(2, 2.0);
        // Weights now [5, 9, 2]: subset 1 is hardest.
        probe(1, 1.0);
        // Retraining dropped its weight to 1: subset 0 takes over.
        probe(0, 0.5);
        // Weights now [0.5, 1, 2]: the never-retrained subset 2 is next.
        assert_eq!(s.next_subset(), 2);
    }

    #[test]
    fn best_on_all_replaces_every_weight() {
        let cfg = SchedulerConfig {
            method: SchedulerMethod::Asss,
            weight_mode: WeightMode::BestOnAll,
            seed: 0,
        };
        let mut s = Scheduler::new(&cfg, labels(3), 1).unwrap();
        for expect in 0..3 {
            assert_eq!(s.next_subset(), expect);
            s.close_epoch(Some(&[0.4, 0.1, 0.7])).unwrap();
        }
        assert_eq!(s.weights(), &[0.4, 0.1, 0.7]);
        assert_eq!(s.next_subset(), 2);

        assert_eq!(
            s.close_epoch(Some(&[0.1, 0.2])).unwrap_err(),
            SchedulerError::WeightCount { got: 2, expected: 3 }
        );
        assert!(matches!(s.close_epoch(None), Err(SchedulerError::WrongWeightInput(_))));
    }

    #[test]
    fn weight_ties_fall_to_the_least_recently_selected() {
        let cfg = SchedulerConfig {
            method: SchedulerMethod::Asss,
            weight_mode: WeightMode::BestOnAll,
            seed: 0,
        };
        let mut s = Scheduler::new(&cfg, labels(3), 1).unwrap();
        for expect in 0..3 {
            assert_eq!(s.next_subset(), expect);
            s.close_epoch(Some(&[7.0, 7.0, 3.0])).unwrap();
        }
        // Tie between 0 and 1: 0 was selected at epoch 0, 1 at epoch 1.
        assert_eq!(s.next_subset(), 0);
        s.close_epoch(Some(&[7.0, 7.0, 3.0])).unwrap();
        // Now 0 is the most recent of the tied pair.
        assert_eq!(s.next_subset(), 1);
        s.close_epoch(Some(&[5.0, 5.0, 5.0])).unwrap();
        // Three-way tie: 2 is the stalest (epoch 2).
        assert_eq!(s.next_subset(), 2);
    }

    #[test]
    fn never_selected_subsets_win_weight_ties() {
        // Find a seed whose first two ARSS draws both pick subset 0, leaving
        // subset 1 untouched when exploitation starts.
        let cfg_for = |seed| SchedulerConfig {
            method: SchedulerMethod::Arss,
            weight_mode: WeightMode::BestOnAll,
            seed,
        };
        let seed = (0..1000u64)
            .find(|&seed| {
                let mut s = Scheduler::new(&cfg_for(seed), labels(2), 1).unwrap();
                s.next_subset() == 0 && {
                    s.close_epoch(Some(&[1.0, 1.0])).unwrap();
                    s.next_subset() == 0
                }
            })
            .expect("some seed draws subset 0 twice");
        let mut s = Scheduler::new(&cfg_for(seed), labels(2), 1).unwrap();
        s.next_subset();
        s.close_epoch(Some(&[1.0, 1.0])).unwrap();
        s.next_subset();
        s.close_epoch(Some(&[1.0, 1.0])).unwrap();
        // Equal weights, but subset 1 has never been selected.
        assert_eq!(s.next_subset(), 1);
    }

    #[test]
    fn arss_starts_from_random_weights_and_random_picks() {
        let mut s = Scheduler::new(&config(SchedulerMethod::Arss, 11), labels(4), 1).unwrap();
        let w0 = s.weights().to_vec();
        assert!(w0.iter().all(|&w| (0.0..1.0).contains(&w)));
        assert!(w0.windows(2).any(|p| p[0] != p[1]), "constant init {w0:?}");

        // First k epochs are random; afterwards the choice is the argmax of
        // the weights under the tie rules.
        for _ in 0..4 {
            s.next_subset();
            s.log_generation(&[1.0]).unwrap();
            s.close_epoch(None).unwrap();
        }
        let weights = s.weights().to_vec();
        let chosen = s.next_subset();
        let max = weights.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(weights[chosen], max);

        let replay = {
            let mut t = Scheduler::new(&config(SchedulerMethod::Arss, 11), labels(4), 1).unwrap();
            (0..4).map(|_| t.next_subset()).collect::<Vec<_>>()
        };
        let replay2 = {
            let mut t = Scheduler::new(&config(SchedulerMethod::Arss, 11), labels(4), 1).unwrap();
            (0..4).map(|_| t.next_subset()).collect::<Vec<_>>()
        };
        assert_eq!(replay, replay2);
    }

    #[test]
    fn epoch_log_bookkeeping_is_strict() {
        let mut s = Scheduler::new(&config(SchedulerMethod::Sss, 0), labels(2), 3).unwrap();
        assert_eq!(s.log_generation(&[1.0]).unwrap_err(), SchedulerError::NoActiveEpoch);
        assert_eq!(s.close_epoch(None).unwrap_err(), SchedulerError::NoActiveEpoch);

        s.next_subset();
        assert_eq!(s.log_generation(&[]).unwrap_err(), SchedulerError::EmptyFitnessRow);
        s.log_generation(&[1.0, 2.0]).unwrap();
        assert_eq!(
            s.log_generation(&[1.0]).unwrap_err(),
            SchedulerError::RaggedLog { got: 1, expected: 2 }
        );
        assert_eq!(
            s.close_epoch(None).unwrap_err(),
            SchedulerError::IncompleteLog { got: 1, expected: 3 }
        );

        // A new epoch clears the log.
        s.next_subset();
        assert_eq!(s.fitness_rows(), 0);
    }

    #[test]
    fn trace_captures_the_weights_behind_each_decision() {
        let mut s = Scheduler::new(&config(SchedulerMethod::Asss, 0), labels(2), 1).unwrap();
        s.next_subset();
        s.log_generation(&[4.0]).unwrap();
        s.close_epoch(None).unwrap();
        s.next_subset();
        s.log_generation(&[6.0]).unwrap();
        s.close_epoch(None).unwrap();
        s.next_subset();

        let trace = s.trace();
        assert_eq!(trace.len(), 3);
        assert_eq!((trace[0].epoch, trace[0].chosen), (0, 0));
        assert_eq!(trace[0].weights, vec![1.0, 1.0]);
        assert_eq!((trace[1].epoch, trace[1].chosen), (1, 1));
        assert_eq!(trace[1].weights, vec![4.0, 1.0]);
        // Subset 1 came out heavier, so epoch 2 trains it again.
        assert_eq!((trace[2].epoch, trace[2].chosen), (2, 1));
        assert_eq!(trace[2].weights, vec![4.0, 6.0]);
    }

    #[test]
    fn method_names_parse_case_insensitively() {
        assert_eq!("rss".parse::<SchedulerMethod>().unwrap(), SchedulerMethod::Rss);
        assert_eq!("ASSS".parse::<SchedulerMethod>().unwrap(), SchedulerMethod::Asss);
        assert_eq!("Static".parse::<SchedulerMethod>().unwrap(), SchedulerMethod::Static);
        assert!("abc".parse::<SchedulerMethod>().is_err());
        assert_eq!("best-on-all".parse::<WeightMode>().unwrap(), WeightMode::BestOnAll);
        assert_eq!("trained_mean".parse::<WeightMode>().unwrap(), WeightMode::TrainedSubsetMean);
        assert!("x".parse::<WeightMode>().is_err());
    }
}
