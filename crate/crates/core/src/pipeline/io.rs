//! CSV persistence for quote records and prepared cases.
//!
//! Floats are written in shortest round-trip form, so write → read → write
//! is byte-stable and equality of files means equality of data.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::classify::{class_label, parse_class_label};
use super::{LabeledCase, PipelineError, RawQuoteRecord};

/// Columns: `quote_date,spot,strike,bid,ask,rate,maturity_days`.
pub fn write_records_csv(path: &Path, records: &[RawQuoteRecord]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<RawQuoteRecord>, PipelineError> {
    let mut r = csv::Reader::from_reader(File::open(path)?);
    r.deserialize().collect::<Result<Vec<_>, _>>().map_err(Into::into)
}

#[derive(Serialize, Deserialize)]
struct CaseRow {
    quote_date: chrono::NaiveDate,
    class: String,
    c_over_k: f64,
    s_over_k: f64,
    tau: f64,
    target_sigma: f64,
}

/// Columns: `quote_date,class,c_over_k,s_over_k,tau,target_sigma`, with the
/// class written as its `C1`…`C9` label.
pub fn write_cases_csv(path: &Path, cases: &[LabeledCase]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    for c in cases {
        w.serialize(CaseRow {
            quote_date: c.quote_date,
            class: class_label(c.class_idx),
            c_over_k: c.case.c_over_k,
            s_over_k: c.case.s_over_k,
            tau: c.case.tau,
            target_sigma: c.case.target_sigma,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cases_csv(path: &Path) -> Result<Vec<LabeledCase>, PipelineError> {
    let mut r = csv::Reader::from_reader(File::open(path)?);
    let mut out = Vec::new();
    for row in r.deserialize::<CaseRow>() {
        let row = row?;
        let class_idx = parse_class_label(&row.class)
            .ok_or_else(|| PipelineError::Parse(format!("unknown class label `{}`", row.class)))?;
        out.push(LabeledCase {
            quote_date: row.quote_date,
            class_idx,
            case: super::FitnessCase {
                c_over_k: row.c_over_k,
                s_over_k: row.s_over_k,
                tau: row.tau,
                target_sigma: row.target_sigma,
            },
        });
    }
    Ok(out)
}
