//! Chronological partitioning of prepared cases.
//!
//! Two independent splits over one master list, which is kept sorted by
//! quote date:
//!
//! * **TS blocks** — the timeline cut into `k` contiguous blocks of
//!   near-equal size (labels `S1…Sk`), earlier blocks taking the remainder.
//! * **MTM halves** — within each moneyness/term class, the chronologically
//!   earlier half trains (`C1L…C9L`) and the later half tests (`C1T…C9T`),
//!   the odd middle case going to the training half.

use std::fmt::Write as _;
use std::ops::Range;

use super::classify::{class_label, CLASS_COUNT};
use super::{FitnessCase, LabeledCase, PipelineError, SubsetData};

#[derive(Debug, Clone)]
pub struct Partition {
    cases: Vec<LabeledCase>,
    ts_blocks: Vec<Range<usize>>,
    mtm_train: Vec<Vec<usize>>,
    mtm_test: Vec<Vec<usize>>,
    empty_classes: Vec<usize>,
}

impl Partition {
    /// Sorts the cases by date (stably, so intra-day order is preserved) and
    /// builds both splits.
    pub fn build(mut cases: Vec<LabeledCase>, ts_block_count: usize) -> Result<Self, PipelineError> {
        if ts_block_count == 0 {
            return Err(PipelineError::Config("ts_block_count must be positive".into()));
        }
        if cases.len() < ts_block_count {
            return Err(PipelineError::NotEnoughCases { need: ts_block_count, got: cases.len() });
        }
        if let Some(bad) = cases.iter().find(|c| c.class_idx >= CLASS_COUNT) {
            return Err(PipelineError::Parse(format!(
                "class index {} out of range on {}",
                bad.class_idx, bad.quote_date
            )));
        }
        cases.sort_by_key(|c| c.quote_date);

        let n = cases.len();
        let base = n / ts_block_count;
        let extra = n % ts_block_count;
        let mut ts_blocks = Vec::with_capacity(ts_block_count);
        let mut start = 0;
        for i in 0..ts_block_count {
            let len = base + usize::from(i < extra);
            ts_blocks.push(start..start + len);
            start += len;
        }
        debug_assert_eq!(start, n);

        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); CLASS_COUNT];
        for (row, c) in cases.iter().enumerate() {
            by_class[c.class_idx].push(row);
        }
        let mut mtm_train = Vec::with_capacity(CLASS_COUNT);
        let mut mtm_test = Vec::with_capacity(CLASS_COUNT);
        let mut empty_classes = Vec::new();
        for (idx, rows) in by_class.into_iter().enumerate() {
            if rows.is_empty() {
                empty_classes.push(idx);
            }
            let train_len = rows.len().div_ceil(2);
            let (train, test) = rows.split_at(train_len);
            mtm_train.push(train.to_vec());
            mtm_test.push(test.to_vec());
        }

        Ok(Self { cases, ts_blocks, mtm_train, mtm_test, empty_classes })
    }

    /// The chronologically sorted master list.
    pub fn cases(&self) -> &[LabeledCase] {
        &self.cases
    }

    pub fn ts_block_count(&self) -> usize {
        self.ts_blocks.len()
    }

    pub fn ts_block_rows(&self, i: usize) -> Range<usize> {
        self.ts_blocks[i].clone()
    }

    pub fn mtm_train_rows(&self, class_idx: usize) -> &[usize] {
        &self.mtm_train[class_idx]
    }

    pub fn mtm_test_rows(&self, class_idx: usize) -> &[usize] {
        &self.mtm_test[class_idx]
    }

    /// Classes with no cases at all; they contribute no subsets.
    pub fn empty_classes(&self) -> &[usize] {
        &self.empty_classes
    }

    fn gather(&self, rows: impl Iterator<Item = usize>) -> Vec<FitnessCase> {
        rows.map(|r| self.cases[r].case).collect()
    }

    /// TS block `i` as subset `S{i+1}`.
    pub fn ts_subset(&self, i: usize) -> SubsetData {
        SubsetData { label: format!("S{}", i + 1), cases: self.gather(self.ts_blocks[i].clone()) }
    }

    /// All TS blocks, `S1…Sk`.
    pub fn ts_subsets(&self) -> Vec<SubsetData> {
        (0..self.ts_blocks.len()).map(|i| self.ts_subset(i)).collect()
    }

    /// Training half of one class (`C{i}L`), or `None` when the class has no
    /// cases.
    pub fn mtm_train_subset(&self, class_idx: usize) -> Option<SubsetData> {
        let rows = &self.mtm_train[class_idx];
        (!rows.is_empty()).then(|| SubsetData {
            label: format!("{}L", class_label(class_idx)),
            cases: self.gather(rows.iter().copied()),
        })
    }

    /// Testing half of one class (`C{i}T`), or `None` when empty.
    pub fn mtm_test_subset(&self, class_idx: usize) -> Option<SubsetData> {
        let rows = &self.mtm_test[class_idx];
        (!rows.is_empty()).then(|| SubsetData {
            label: format!("{}T", class_label(class_idx)),
            cases: self.gather(rows.iter().copied()),
        })
    }

    /// Non-empty training halves in class order.
    pub fn mtm_train_subsets(&self) -> Vec<SubsetData> {
        (0..CLASS_COUNT).filter_map(|i| self.mtm_train_subset(i)).collect()
    }

    /// Non-empty testing halves in class order.
    pub fn mtm_test_subsets(&self) -> Vec<SubsetData> {
        (0..CLASS_COUNT).filter_map(|i| self.mtm_test_subset(i)).collect()
    }

    /// Every case, for evaluation over the full data set.
    pub fn enlarged_cases(&self) -> Vec<FitnessCase> {
        self.cases.iter().map(|c| c.case).collect()
    }

    /// Textual manifest: one `label,rows` line per subset, rows written as
    /// semicolon-joined inclusive ranges over the master list.
    pub fn manifest_string(&self) -> String {
        let mut out = String::new();
        for (i, block) in self.ts_blocks.iter().enumerate() {
            let rows: Vec<usize> = block.clone().collect();
            writeln!(out, "S{},{}", i + 1, compress_rows(&rows)).unwrap();
        }
        for (idx, rows) in self.mtm_train.iter().enumerate() {
            if !rows.is_empty() {
                writeln!(out, "{}L,{}", class_label(idx), compress_rows(rows)).unwrap();
            }
        }
        for (idx, rows) in self.mtm_test.iter().enumerate() {
            if !rows.is_empty() {
                writeln!(out, "{}T,{}", class_label(idx), compress_rows(rows)).unwrap();
            }
        }
        out
    }
}

/// Sorted row indices → `0-2;5;7-8` style range list.
fn compress_rows(rows: &[usize]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let start = rows[i];
        let mut end = start;
        while i + 1 < rows.len() && rows[i + 1] == end + 1 {
            i += 1;
            end = rows[i];
        }
        if start == end {
            parts.push(start.to_string());
        } else {
            parts.push(format!("{start}-{end}"));
        }
        i += 1;
    }
    parts.join(";")
}

/// Parses a manifest back into `(label, rows)` pairs.
pub fn parse_manifest(text: &str) -> Result<Vec<(String, Vec<usize>)>, PipelineError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (label, ranges) = line
            .split_once(',')
            .ok_or_else(|| PipelineError::Parse(format!("manifest line {}: missing comma", lineno + 1)))?;
        let mut rows = Vec::new();
        for part in ranges.split(';') {
            let bad = || PipelineError::Parse(format!("manifest line {}: bad range `{part}`", lineno + 1));
            match part.split_once('-') {
                Some((a, b)) => {
                    let a: usize = a.trim().parse().map_err(|_| bad())?;
                    let b: usize = b.trim().parse().map_err(|_| bad())?;
                    if b < a {
                        return Err(bad());
                    }
                    rows.extend(a..=b);
                }
                None => rows.push(part.trim().parse().map_err(|_| bad())?),
            }
        }
        out.push((label.to_string(), rows));
    }
    Ok(out)
}
