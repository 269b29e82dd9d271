//! The four subcommands. Every command writes a self-describing output
//! directory: its artifacts plus the exact configuration that produced them,
//! so any directory can be reproduced or rerun from its own `config.txt`.

use std::fs;
use std::path::Path;

use gpvol::evaluation::experiments::{run_suite, RunSpec, SuitePlan};
use gpvol::evaluation::{evaluate_model, Predictor, ReferenceModel};
use gpvol::pipeline::io::{read_cases_csv, write_cases_csv, write_records_csv};
use gpvol::pipeline::{generate_records, prepare_cases, PipelineError};
use gpvol::report::{history_csv, metrics_csv, models_csv, seed_outcomes_csv, trace_csv};
use gpvol::{ExprTree, Partition, SchedulerMethod};

use crate::config::RunConfig;
use crate::{ConfigArgs, EvaluateArgs, GenerateArgs, ReportArgs, RunArgs};

/// Usage errors exit with code 2, execution failures with code 1.
pub enum CliError {
    Usage(String),
    Failed(String),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(format!("io error: {e}"))
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            // A rejected configuration is the caller's to fix.
            PipelineError::Config(msg) => CliError::Usage(msg),
            other => CliError::Failed(other.to_string()),
        }
    }
}

/// Defaults, then the `--config` file, then each `--set` pair.
fn load_config(base: RunConfig, args: &ConfigArgs) -> Result<RunConfig, CliError> {
    let mut cfg = base;
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }
    for pair in &args.set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects key=value, got `{pair}`")))?;
        cfg.set(key.trim(), value.trim()).map_err(usage)?;
    }
    Ok(cfg)
}

/// A dataset directory's cases, partitioned with its recorded geometry. The
/// directory's own `config.txt` is the base layer, so runs inherit exactly
/// the surface, filters, and block count the data was generated with.
fn load_dataset(dir: &Path, args: &ConfigArgs) -> Result<(RunConfig, Partition), CliError> {
    let mut base = RunConfig::default();
    let stored = dir.join("config.txt");
    if stored.exists() {
        let text = fs::read_to_string(&stored)?;
        base.apply_text(&text)
            .map_err(|e| CliError::Failed(format!("{}: {e}", stored.display())))?;
    }
    let cfg = load_config(base, args)?;

    let cases_path = dir.join("cases.csv");
    if !cases_path.exists() {
        return Err(usage(format!(
            "{} is not a dataset directory (no cases.csv); run `gpvol generate` first",
            dir.display()
        )));
    }
    let cases = read_cases_csv(&cases_path)?;
    let partition = Partition::build(cases, cfg.ts_blocks)?;

    // The stored manifest must describe the partition we just rebuilt.
    let manifest_path = dir.join("manifest.csv");
    if manifest_path.exists() && fs::read_to_string(&manifest_path)? != partition.manifest_string()
    {
        return Err(CliError::Failed(format!(
            "partition rebuilt from cases.csv does not match {}; the dataset directory is inconsistent",
            manifest_path.display()
        )));
    }
    Ok((cfg, partition))
}

pub fn generate(args: GenerateArgs) -> Result<(), CliError> {
    let mut cfg = load_config(RunConfig::default(), &args.config)?;
    if let Some(n) = args.n_records {
        cfg.surface.n_records = n;
    }
    if let Some(seed) = args.seed {
        cfg.surface.seed = seed;
    }
    if cfg.surface.n_records == 0 {
        return Err(usage("surface.n_records must be positive"));
    }

    let records = generate_records(&cfg.surface)?;
    let prepared = prepare_cases(&records, &cfg.filter)?;
    let n_cases = prepared.cases.len();
    let partition = Partition::build(prepared.cases, cfg.ts_blocks)?;

    fs::create_dir_all(&args.out)?;
    write_records_csv(&args.out.join("records.csv"), &records)?;
    write_cases_csv(&args.out.join("cases.csv"), partition.cases())?;
    fs::write(args.out.join("manifest.csv"), partition.manifest_string())?;
    fs::write(args.out.join("config.txt"), cfg.render())?;

    let block_sizes: Vec<usize> =
        (0..partition.ts_block_count()).map(|i| partition.ts_block_rows(i).len()).collect();
    let class_sizes: Vec<usize> = (0..gpvol::pipeline::CLASS_COUNT)
        .map(|c| partition.mtm_train_rows(c).len() + partition.mtm_test_rows(c).len())
        .collect();
    println!(
        "{} records -> {} cases ({} excluded by filters, {} inversion failures)",
        records.len(),
        n_cases,
        prepared.rejections.total(),
        prepared.inversion_failures
    );
    println!("TS sample sizes: {block_sizes:?}");
    println!("moneyness/maturity class sizes: {class_sizes:?}");
    println!(
        "wrote records.csv, cases.csv, manifest.csv, config.txt to {}",
        args.out.display()
    );
    Ok(())
}

/// `S4` or `C2` (underscores tolerated) to the matching static run.
fn parse_subset_label(label: &str) -> Result<RunSpec, CliError> {
    let norm = label.trim().replace('_', "").to_ascii_uppercase();
    let bad =
        || usage(format!("unknown subset `{label}` (expected S<i> like S4, or C<i> like C2)"));
    let idx: usize = norm.get(1..).and_then(|n| n.parse().ok()).ok_or_else(bad)?;
    if idx == 0 {
        return Err(bad());
    }
    match &norm[..1] {
        "S" => Ok(RunSpec::static_ts(idx - 1)),
        "C" => Ok(RunSpec::static_mtm(idx - 1)),
        _ => Err(bad()),
    }
}

pub fn run(args: RunArgs) -> Result<(), CliError> {
    let (mut cfg, partition) = load_dataset(&args.data, &args.config)?;
    if let Some(method) = &args.method {
        cfg.set("run.method", method).map_err(usage)?;
    }
    if let Some(protocol) = &args.protocol {
        cfg.set("run.protocol", protocol).map_err(usage)?;
    }
    if let Some(subset) = &args.subset {
        cfg.set("run.subset", subset).map_err(usage)?;
    }
    if let Some(n) = args.seeds {
        cfg.n_seeds = n;
    }
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }

    let method = cfg
        .method
        .ok_or_else(|| usage("run.method is required (STATIC, RSS, SSS, ASSS or ARSS)"))?;
    let mut spec = if method == SchedulerMethod::Static {
        if cfg.protocol.is_some() {
            return Err(usage(
                "a static run trains a single subset: give run.subset (e.g. S4 or C2), not run.protocol",
            ));
        }
        let label = cfg
            .subset
            .as_deref()
            .ok_or_else(|| usage("run.subset is required for static runs (e.g. S4 or C2)"))?;
        parse_subset_label(label)?
    } else {
        if cfg.subset.is_some() {
            return Err(usage(
                "run.subset applies only to static runs; dynamic runs take run.protocol (ts, mtm or global)",
            ));
        }
        let set = cfg
            .protocol
            .ok_or_else(|| usage("run.protocol is required for dynamic runs (ts, mtm or global)"))?;
        RunSpec::dynamic(set, method)
    };
    spec.weight_mode = cfg.weight_mode;
    if cfg.n_seeds == 0 {
        return Err(usage("run.n_seeds must be positive"));
    }

    let model_name = spec.model_name();
    let plan = SuitePlan {
        runs: vec![spec],
        seeds_per_run: cfg.n_seeds,
        base_seed: cfg.base_seed,
        params: cfg.gp.clone(),
        keep_histories: true,
    };
    let report = run_suite(&partition, &plan).map_err(|e| usage(e.to_string()))?;

    for o in &report.seed_outcomes {
        println!(
            "seed {} (engine seed {:#018x}): train mse {:.6e}, test mse {:.6e}",
            o.seed_index, o.engine_seed, o.train_mse, o.test_mse
        );
    }
    let model = &report.models[0];
    let best = report
        .seed_outcomes
        .iter()
        .find(|o| o.model_name == model.name && o.seed_index == model.seed_index)
        .expect("reported model corresponds to one seed outcome");

    fs::create_dir_all(&args.out)?;
    let history = best.history.as_ref().expect("histories are retained");
    let trace = best.trace.as_ref().expect("traces are retained");
    fs::write(args.out.join("history.csv"), history_csv(history, &best.subset_labels))?;
    fs::write(args.out.join("trace.csv"), trace_csv(trace, &best.subset_labels))?;
    fs::write(args.out.join("best_model.txt"), format!("{}\n", model.expr))?;
    fs::write(args.out.join("models.csv"), models_csv(&report.models))?;
    fs::write(args.out.join("seeds.csv"), seed_outcomes_csv(&report.seed_outcomes))?;
    fs::write(args.out.join("config.txt"), cfg.render())?;

    println!(
        "{model_name} on {}: best seed {} -> test mse {:.6e}, enlarged mse {:.6e}, enlarged NFO {:.2}%",
        model.dataset_label, model.seed_index, model.test_mse, model.enlarged_mse,
        model.enlarged_nfo_pct
    );
    println!(
        "wrote history.csv, trace.csv, best_model.txt, models.csv, seeds.csv, config.txt to {}",
        args.out.display()
    );
    Ok(())
}

/// A reference id (`M4S4`, `MCAR`, `MGAR`), a run directory holding
/// `best_model.txt`, or a file containing one prefix expression.
fn resolve_model(source: &str) -> Result<(String, String, Box<dyn Predictor>), CliError> {
    for m in ReferenceModel::ALL {
        if m.label().eq_ignore_ascii_case(source) {
            return Ok((m.label().to_string(), m.prefix().to_string(), Box::new(m)));
        }
    }
    let path = Path::new(source);
    let file = if path.is_dir() { path.join("best_model.txt") } else { path.to_path_buf() };
    if !file.is_file() {
        return Err(usage(format!(
            "unknown model `{source}`: not a reference id (M4S4, MCAR, MGAR), a run directory, or an expression file"
        )));
    }
    let text = fs::read_to_string(&file)?;
    let expr = text.trim();
    let tree = ExprTree::parse_prefix(expr)
        .map_err(|e| CliError::Failed(format!("{}: {e}", file.display())))?;
    let id = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "evolved".to_string());
    Ok((id, expr.to_string(), Box::new(tree)))
}

pub fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let (id, expr, pred) = resolve_model(&args.model)?;
    let (_, partition) = load_dataset(&args.data, &ConfigArgs::default())?;

    // Chronological blocks partition the whole dataset, so their pooled row
    // is the enlarged-set score; the class report shows holdout halves.
    let pooled = evaluate_model(&id, pred.as_ref(), &partition.ts_subsets(), "TS");
    let per_class = evaluate_model(&id, pred.as_ref(), &partition.mtm_test_subsets(), "MTM-TEST");

    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("metrics.csv"), metrics_csv(&pooled))?;
    fs::write(args.out.join("per_class.csv"), metrics_csv(&per_class))?;
    fs::write(args.out.join("model.txt"), format!("{expr}\n"))?;

    println!(
        "{id} on {}: mse {:.6e} (std {:.6e}), NFO {:.2}%",
        args.data.display(),
        pooled.mse_total,
        pooled.mse_std,
        pooled.nfo_pct
    );
    println!("wrote metrics.csv, per_class.csv, model.txt to {}", args.out.display());
    Ok(())
}

pub fn report(args: ReportArgs) -> Result<(), CliError> {
    let mut merged = String::new();
    let mut header: Option<String> = None;
    let mut rows = 0usize;
    for dir in &args.runs {
        let path = dir.join("models.csv");
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
        let mut lines = text.lines();
        let head = lines
            .next()
            .ok_or_else(|| CliError::Failed(format!("{}: empty file", path.display())))?;
        match &header {
            None => {
                header = Some(head.to_string());
                merged.push_str(head);
                merged.push('\n');
            }
            Some(h) if h == head => {}
            Some(h) => {
                return Err(CliError::Failed(format!(
                    "{}: header `{head}` does not match `{h}`",
                    path.display()
                )))
            }
        }
        for line in lines.filter(|l| !l.is_empty()) {
            merged.push_str(line);
            merged.push('\n');
            rows += 1;
        }
    }
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(&args.out, merged)?;
    println!("merged {rows} model rows from {} runs into {}", args.runs.len(), args.out.display());
    Ok(())
}
