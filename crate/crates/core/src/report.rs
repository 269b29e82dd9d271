//! CSV renderings of run artifacts: per-generation history, scheduler
//! decisions, model tables, and per-subset metrics.
//!
//! Numbers print in Rust's shortest round-trip form, so identical runs
//! render byte-identical files. None of the rendered fields can contain a
//! comma (labels are `S3`/`C7L`-style, expressions are parenthesized prefix
//! text), which keeps the format quoting-free.

use crate::evaluation::experiments::{ModelResult, SeedOutcome};
use crate::evaluation::MetricsReport;
use crate::gp::engine::HistoryRow;
use crate::scheduler::TraceRow;

use std::fmt::Write as _;

fn label_of(labels: &[String], subset: usize) -> &str {
    labels.get(subset).map_or("?", String::as_str)
}

/// One line per generation: training error and tree shape of the population.
pub fn history_csv(rows: &[HistoryRow], labels: &[String]) -> String {
    let mut out = String::from("generation,subset,label,best_mse,mean_mse,best_depth,max_depth\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.generation,
            r.subset,
            label_of(labels, r.subset),
            r.best_mse,
            r.mean_mse,
            r.best_depth,
            r.max_depth
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// One line per scheduling decision; the weight vector the decision was made
/// with is semicolon-joined so the column count stays fixed.
pub fn trace_csv(rows: &[TraceRow], labels: &[String]) -> String {
    let mut out = String::from("epoch,subset,label,weights\n");
    for r in rows {
        let weights =
            r.weights.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
        writeln!(out, "{},{},{},{}", r.epoch, r.chosen, label_of(labels, r.chosen), weights)
            .expect("writing to a String cannot fail");
    }
    out
}

/// One line per model: the best seed's scores and expression.
pub fn models_csv(models: &[ModelResult]) -> String {
    let mut out = String::from(
        "model,dataset,seed_index,train_mse,test_mse,enlarged_mse,enlarged_nfo_pct,expr\n",
    );
    for m in models {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            m.name,
            m.dataset_label,
            m.seed_index,
            m.train_mse,
            m.test_mse,
            m.enlarged_mse,
            m.enlarged_nfo_pct,
            m.expr
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// One line per (model, seed) run.
pub fn seed_outcomes_csv(outcomes: &[SeedOutcome]) -> String {
    let mut out = String::from(
        "model,method,seed_index,engine_seed,train_mse,test_mse,enlarged_mse,\
         enlarged_nfo_pct,max_depth_seen,expr\n",
    );
    for o in outcomes {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            o.model_name,
            o.method,
            o.seed_index,
            o.engine_seed,
            o.train_mse,
            o.test_mse,
            o.enlarged_mse,
            o.enlarged_nfo_pct,
            o.max_depth_seen,
            o.expr
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Per-subset scores of one model, with the pooled total as a final `ALL`
/// row.
pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut out = String::from("model,dataset,subset,n_cases,mse,mse_std,nfo_pct\n");
    for s in &report.per_subset {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            report.model_id, report.dataset_label, s.label, s.n_cases, s.mse, s.mse_std, s.nfo_pct
        )
        .expect("writing to a String cannot fail");
    }
    let total_cases: usize = report.per_subset.iter().map(|s| s.n_cases).sum();
    writeln!(
        out,
        "{},{},ALL,{},{},{},{}",
        report.model_id,
        report.dataset_label,
        total_cases,
        report.mse_total,
        report.mse_std,
        report.nfo_pct
    )
    .expect("writing to a String cannot fail");
    out
}
