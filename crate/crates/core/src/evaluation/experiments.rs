//! The replication experiment grid: which subsets train, which cases test,
//! how models are named, and how multi-seed suites are aggregated.
//!
//! Static protocols train on one subset. `StaticTs(i)` trains on block
//! `S{i+1}` and tests on the next block; `StaticMtm(i)` trains on a class's
//! learning half and tests on its testing half. Dynamic protocols hand a
//! whole subset family to the scheduler: the TS series (all blocks but the
//! last, which tests), the MTM learning halves (testing halves test), or
//! both families at once (`Global`).

use rayon::prelude::*;

use crate::gp::engine::{
    run_evolution, EngineError, EvolutionInput, GpParams, HistoryRow, RunOutcome,
};
use crate::pipeline::{FitnessCase, Partition, SubsetData};
use crate::scheduler::{SchedulerConfig, SchedulerMethod, TraceRow, WeightMode};

use super::{mse_stats, nfo_percentage, NFO_THRESHOLD};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentSet {
    /// Chronological blocks S1…S(k-1); the last block tests.
    TsSeries,
    /// Class learning halves C1L…C9L; the testing halves test.
    MtmClasses,
    /// Both families together.
    Global,
}

impl ExperimentSet {
    fn letter(self) -> char {
        match self {
            ExperimentSet::TsSeries => 'S',
            ExperimentSet::MtmClasses => 'C',
            ExperimentSet::Global => 'G',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Train on TS block `i` (0-based), test on block `i+1`.
    StaticTs(usize),
    /// Train on class `i`'s learning half, test on its testing half.
    StaticMtm(usize),
    Dynamic(ExperimentSet),
}

fn method_suffix(method: SchedulerMethod) -> &'static str {
    match method {
        SchedulerMethod::Rss => "R",
        SchedulerMethod::Sss => "S",
        SchedulerMethod::Asss => "AS",
        SchedulerMethod::Arss => "AR",
        SchedulerMethod::Static => "",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSpec {
    pub protocol: Protocol,
    pub method: SchedulerMethod,
    pub weight_mode: WeightMode,
}

impl RunSpec {
    pub fn static_ts(i: usize) -> Self {
        Self {
            protocol: Protocol::StaticTs(i),
            method: SchedulerMethod::Static,
            weight_mode: WeightMode::default(),
        }
    }

    pub fn static_mtm(i: usize) -> Self {
        Self {
            protocol: Protocol::StaticMtm(i),
            method: SchedulerMethod::Static,
            weight_mode: WeightMode::default(),
        }
    }

    pub fn dynamic(set: ExperimentSet, method: SchedulerMethod) -> Self {
        Self { protocol: Protocol::Dynamic(set), method, weight_mode: WeightMode::default() }
    }

    /// Model name: `M3S3` (trained on S3), `M5C5` (trained on C5L), or
    /// `MGAS` (global subsets under ASSS) style.
    pub fn model_name(&self) -> String {
        match self.protocol {
            Protocol::StaticTs(i) => format!("M{}S{}", i + 1, i + 1),
            Protocol::StaticMtm(i) => format!("M{}C{}", i + 1, i + 1),
            Protocol::Dynamic(set) => format!("M{}{}", set.letter(), method_suffix(self.method)),
        }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        let is_static_protocol = matches!(self.protocol, Protocol::StaticTs(_) | Protocol::StaticMtm(_));
        if is_static_protocol != !self.method.is_dynamic() {
            return Err(ExperimentError::SpecMismatch(format!(
                "protocol {:?} cannot run under method {}",
                self.protocol, self.method
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{0}")]
    SpecMismatch(String),
    #[error("{0}")]
    Data(String),
}

/// Training subsets, test cases, and a dataset label for one protocol.
pub fn training_input(
    partition: &Partition,
    protocol: &Protocol,
) -> Result<(Vec<SubsetData>, Vec<FitnessCase>, String), ExperimentError> {
    let k = partition.ts_block_count();
    match *protocol {
        Protocol::StaticTs(i) => {
            if i + 2 > k {
                return Err(ExperimentError::Data(format!(
                    "static TS training on block {} needs block {} to test, but only {k} exist",
                    i + 1,
                    i + 2
                )));
            }
            let train = partition.ts_subset(i);
            let test = partition.ts_subset(i + 1);
            let label = format!("{}/{}", train.label, test.label);
            Ok((vec![train], test.cases, label))
        }
        Protocol::StaticMtm(i) => {
            let train = partition.mtm_train_subset(i).ok_or_else(|| {
                ExperimentError::Data(format!("class C{} has no learning half", i + 1))
            })?;
            let test = partition.mtm_test_subset(i).ok_or_else(|| {
                ExperimentError::Data(format!("class C{} has no testing half", i + 1))
            })?;
            let label = format!("{}/{}", train.label, test.label);
            Ok((vec![train], test.cases, label))
        }
        Protocol::Dynamic(set) => {
            let ts_part = || -> Result<(Vec<SubsetData>, Vec<FitnessCase>), ExperimentError> {
                if k < 2 {
                    return Err(ExperimentError::Data(
                        "dynamic TS training needs at least two blocks".into(),
                    ));
                }
                let mut subsets = partition.ts_subsets();
                let test = subsets.pop().expect("k >= 2").cases;
                Ok((subsets, test))
            };
            let mtm_part = || -> Result<(Vec<SubsetData>, Vec<FitnessCase>), ExperimentError> {
                let subsets = partition.mtm_train_subsets();
                if subsets.is_empty() {
                    return Err(ExperimentError::Data("every class is empty".into()));
                }
                let test: Vec<FitnessCase> = partition
                    .mtm_test_subsets()
                    .into_iter()
                    .flat_map(|s| s.cases)
                    .collect();
                if test.is_empty() {
                    return Err(ExperimentError::Data("no class has a testing half".into()));
                }
                Ok((subsets, test))
            };
            match set {
                ExperimentSet::TsSeries => {
                    let (subsets, test) = ts_part()?;
                    Ok((subsets, test, "TS".into()))
                }
                ExperimentSet::MtmClasses => {
                    let (subsets, test) = mtm_part()?;
                    Ok((subsets, test, "MTM".into()))
                }
                ExperimentSet::Global => {
                    let (mut subsets, mut test) = ts_part()?;
                    let (mtm_subsets, mtm_test) = mtm_part()?;
                    subsets.extend(mtm_subsets);
                    test.extend(mtm_test);
                    Ok((subsets, test, "GLOBAL".into()))
                }
            }
        }
    }
}

/// SplitMix64, used to derive independent engine and scheduler seeds from a
/// suite's base seed.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_engine_seed(base: u64, run_idx: usize, seed_idx: usize) -> u64 {
    let per_run = splitmix64(base ^ (run_idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    splitmix64(per_run ^ (seed_idx as u64).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn derive_scheduler_seed(engine_seed: u64) -> u64 {
    splitmix64(engine_seed ^ 0x5851_F42D_4C95_7F2D)
}

/// A multi-run, multi-seed experiment suite.
#[derive(Debug, Clone)]
pub struct SuitePlan {
    pub runs: Vec<RunSpec>,
    pub seeds_per_run: usize,
    pub base_seed: u64,
    /// Template parameters; the per-run seed field is overwritten.
    pub params: GpParams,
    /// Retain each seed's history and trace (memory-heavy for long runs).
    pub keep_histories: bool,
}

/// One seed of one run.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub model_name: String,
    pub method: SchedulerMethod,
    pub seed_index: usize,
    pub engine_seed: u64,
    pub train_mse: f64,
    pub test_mse: f64,
    /// Pooled error over the entire prepared dataset.
    pub enlarged_mse: f64,
    pub enlarged_nfo_pct: f64,
    pub expr: String,
    pub max_depth_seen: usize,
    pub subset_labels: Vec<String>,
    pub history: Option<Vec<HistoryRow>>,
    pub trace: Option<Vec<TraceRow>>,
}

/// Best seed of one run, the model the suite reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelResult {
    pub name: String,
    pub dataset_label: String,
    pub expr: String,
    pub seed_index: usize,
    pub train_mse: f64,
    pub test_mse: f64,
    pub enlarged_mse: f64,
    pub enlarged_nfo_pct: f64,
}

/// Mean test error of the best models, per protocol family.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SetAverages {
    pub static_ts: Option<f64>,
    pub static_mtm: Option<f64>,
    pub dynamic_ts: Option<f64>,
    pub dynamic_mtm: Option<f64>,
    pub dynamic_global: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub models: Vec<ModelResult>,
    pub seed_outcomes: Vec<SeedOutcome>,
    pub set_averages: SetAverages,
}

fn family_mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Runs every spec over every derived seed and keeps each run's best seed
/// (lowest test error; ties go to the earlier seed).
///
/// Seeds are independent streams derived from (base_seed, run index, seed
/// index), so the (run, seed) jobs execute in parallel without changing any
/// result; outcomes come back in sequential order.
pub fn run_suite(partition: &Partition, plan: &SuitePlan) -> Result<SuiteReport, ExperimentError> {
    for spec in &plan.runs {
        spec.validate()?;
    }
    if plan.seeds_per_run == 0 {
        return Err(ExperimentError::SpecMismatch("seeds_per_run must be positive".into()));
    }
    let enlarged = partition.enlarged_cases();

    let inputs = plan
        .runs
        .iter()
        .map(|spec| training_input(partition, &spec.protocol))
        .collect::<Result<Vec<_>, _>>()?;

    let jobs: Vec<(usize, usize)> = (0..plan.runs.len())
        .flat_map(|run_idx| (0..plan.seeds_per_run).map(move |seed_idx| (run_idx, seed_idx)))
        .collect();
    let seed_outcomes: Vec<SeedOutcome> = jobs
        .into_par_iter()
        .map(|(run_idx, seed_idx)| {
            let spec = &plan.runs[run_idx];
            let (subsets, test_cases, _) = &inputs[run_idx];
            let mut params = plan.params.clone();
            params.seed = derive_engine_seed(plan.base_seed, run_idx, seed_idx);
            let input = EvolutionInput {
                subsets,
                test_cases,
                params: &params,
                scheduler: SchedulerConfig {
                    method: spec.method,
                    weight_mode: spec.weight_mode,
                    seed: derive_scheduler_seed(params.seed),
                },
            };
            let out: RunOutcome = run_evolution(&input)?;
            let stats = mse_stats(&out.best_tree, &enlarged);
            Ok(SeedOutcome {
                model_name: spec.model_name(),
                method: spec.method,
                seed_index: seed_idx,
                engine_seed: params.seed,
                train_mse: out.best_train_mse,
                test_mse: out.test_mse,
                enlarged_mse: stats.mse,
                enlarged_nfo_pct: nfo_percentage(&out.best_tree, &enlarged, NFO_THRESHOLD),
                expr: out.best_tree.to_prefix(),
                max_depth_seen: out.max_depth_seen,
                subset_labels: out.subset_labels,
                history: plan.keep_histories.then_some(out.history),
                trace: plan.keep_histories.then_some(out.trace),
            })
        })
        .collect::<Result<_, ExperimentError>>()?;

    let mut models = Vec::with_capacity(plan.runs.len());
    for (run_idx, spec) in plan.runs.iter().enumerate() {
        let run_outcomes = &seed_outcomes[run_idx * plan.seeds_per_run..][..plan.seeds_per_run];
        let mut winner = &run_outcomes[0];
        for outcome in &run_outcomes[1..] {
            if outcome.test_mse.total_cmp(&winner.test_mse).is_lt() {
                winner = outcome;
            }
        }
        models.push(ModelResult {
            name: spec.model_name(),
            dataset_label: inputs[run_idx].2.clone(),
            expr: winner.expr.clone(),
            seed_index: winner.seed_index,
            train_mse: winner.train_mse,
            test_mse: winner.test_mse,
            enlarged_mse: winner.enlarged_mse,
            enlarged_nfo_pct: winner.enlarged_nfo_pct,
        });
    }

    let mut family: [Vec<f64>; 5] = Default::default();
    for (spec, model) in plan.runs.iter().zip(&models) {
        let slot = match spec.protocol {
            Protocol::StaticTs(_) => 0,
            Protocol::StaticMtm(_) => 1,
            Protocol::Dynamic(ExperimentSet::TsSeries) => 2,
            Protocol::Dynamic(ExperimentSet::MtmClasses) => 3,
            Protocol::Dynamic(ExperimentSet::Global) => 4,
        };
        family[slot].push(model.test_mse);
    }
    let set_averages = SetAverages {
        static_ts: family_mean(&family[0]),
        static_mtm: family_mean(&family[1]),
        dynamic_ts: family_mean(&family[2]),
        dynamic_mtm: family_mean(&family[3]),
        dynamic_global: family_mean(&family[4]),
    };

    Ok(SuiteReport { models, seed_outcomes, set_averages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{generate_records, prepare_cases, FilterConfig, SurfaceConfig};

    fn small_partition() -> Partition {
        let cfg = SurfaceConfig { n_records: 160, ..SurfaceConfig::default() };
        let records = generate_records(&cfg).unwrap();
        let prepared = prepare_cases(&records, &FilterConfig::default()).unwrap();
        Partition::build(prepared.cases, 4).unwrap()
    }

    fn tiny_params() -> GpParams {
        GpParams {
            population_size: 10,
            offspring_count: 20,
            generations_static: 6,
            generations_dynamic: 6,
            epoch_length: 2,
            ..GpParams::default()
        }
    }

    #[test]
    fn model_names_encode_protocol_and_method() {
        assert_eq!(RunSpec::static_ts(0).model_name(), "M1S1");
        assert_eq!(RunSpec::static_ts(8).model_name(), "M9S9");
        assert_eq!(RunSpec::static_mtm(4).model_name(), "M5C5");
        let name = |set, m| RunSpec::dynamic(set, m).model_name();
        assert_eq!(name(ExperimentSet::TsSeries, SchedulerMethod::Rss), "MSR");
        assert_eq!(name(ExperimentSet::MtmClasses, SchedulerMethod::Sss), "MCS");
        assert_eq!(name(ExperimentSet::Global, SchedulerMethod::Asss), "MGAS");
        assert_eq!(name(ExperimentSet::Global, SchedulerMethod::Arss), "MGAR");
    }

    #[test]
    fn mismatched_specs_are_rejected() {
        let bad = RunSpec {
            protocol: Protocol::StaticTs(0),
            method: SchedulerMethod::Rss,
            weight_mode: WeightMode::default(),
        };
        assert!(bad.validate().is_err());
        let bad = RunSpec {
            protocol: Protocol::Dynamic(ExperimentSet::Global),
            method: SchedulerMethod::Static,
            weight_mode: WeightMode::default(),
        };
        assert!(bad.validate().is_err());
        assert!(RunSpec::static_ts(0).validate().is_ok());
    }

    #[test]
    fn training_inputs_pick_the_documented_subsets() {
        let p = small_partition();

        let (train, test, label) = training_input(&p, &Protocol::StaticTs(0)).unwrap();
        assert_eq!(train.len(), 1);
        assert_eq!(train[0].label, "S1");
        assert_eq!(train[0].cases, p.ts_subset(0).cases);
        assert_eq!(test, p.ts_subset(1).cases);
        assert_eq!(label, "S1/S2");

        // Last block cannot be a static training set: nothing follows it.
        assert!(training_input(&p, &Protocol::StaticTs(3)).is_err());

        let (train, test, _) = training_input(&p, &Protocol::Dynamic(ExperimentSet::TsSeries)).unwrap();
        let labels: Vec<&str> = train.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, vec!["S1", "S2", "S3"]);
        assert_eq!(test, p.ts_subset(3).cases);

        let (train, test, _) = training_input(&p, &Protocol::Dynamic(ExperimentSet::Global)).unwrap();
        let n_mtm = p.mtm_train_subsets().len();
        assert_eq!(train.len(), 3 + n_mtm);
        assert!(train[3..].iter().all(|s| s.label.ends_with('L')));
        let expected_test =
            p.ts_subset(3).cases.len() + p.mtm_test_subsets().iter().map(|s| s.cases.len()).sum::<usize>();
        assert_eq!(test.len(), expected_test);
    }

    #[test]
    fn derived_seeds_are_distinct_and_stable() {
        let a = derive_engine_seed(1, 0, 0);
        assert_eq!(a, derive_engine_seed(1, 0, 0));
        assert_ne!(a, derive_engine_seed(1, 0, 1));
        assert_ne!(a, derive_engine_seed(1, 1, 0));
        assert_ne!(a, derive_engine_seed(2, 0, 0));
        assert_ne!(derive_scheduler_seed(a), a);
    }

    #[test]
    fn suite_reports_best_seed_per_run_and_family_averages() {
        let p = small_partition();
        let plan = SuitePlan {
            runs: vec![
                RunSpec::static_ts(0),
                RunSpec::dynamic(ExperimentSet::TsSeries, SchedulerMethod::Sss),
            ],
            seeds_per_run: 2,
            base_seed: 5,
            params: tiny_params(),
            keep_histories: true,
        };
        let report = run_suite(&p, &plan).unwrap();

        assert_eq!(report.models.len(), 2);
        assert_eq!(report.seed_outcomes.len(), 4);
        assert_eq!(report.models[0].name, "M1S1");
        assert_eq!(report.models[1].name, "MSS");

        // The reported model is its run's lowest test error.
        for model in &report.models {
            let best = report
                .seed_outcomes
                .iter()
                .filter(|o| o.model_name == model.name)
                .map(|o| o.test_mse)
                .fold(f64::MAX, f64::min);
            assert_eq!(model.test_mse, best);
        }

        assert_eq!(report.set_averages.static_ts, Some(report.models[0].test_mse));
        assert_eq!(report.set_averages.dynamic_ts, Some(report.models[1].test_mse));
        assert_eq!(report.set_averages.static_mtm, None);
        assert_eq!(report.set_averages.dynamic_global, None);

        // Histories were requested.
        assert!(report.seed_outcomes.iter().all(|o| o.history.is_some() && o.trace.is_some()));

        // The whole suite is deterministic.
        let again = run_suite(&p, &plan).unwrap();
        assert_eq!(again.models, report.models);
    }
}
