//! Exclusion filters and the moneyness/term grid.
//!
//! Quotes are screened in a fixed order — maturity, quote level, moneyness,
//! arbitrage floor — and a rejected record is charged to the first rule it
//! fails. Survivors land in one of nine classes: three moneyness bands times
//! three maturity bands, labeled C1 through C9 row-major by moneyness.

use serde::{Deserialize, Serialize};

use super::{FilterConfig, RawQuoteRecord, DAYS_PER_YEAR};

/// S/K below this is out of the money.
pub const ATM_LOWER: f64 = 0.98;
/// S/K at or above this is in the money.
pub const ITM_LOWER: f64 = 1.03;
/// Maturities strictly below this many days are short term.
pub const SHORT_TERM_MAX_DAYS: u32 = 60;
/// Maturities up to and including this many days are mid term.
pub const MID_TERM_MAX_DAYS: u32 = 180;
/// Number of moneyness/term classes.
pub const CLASS_COUNT: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoneynessClass {
    Otm,
    Atm,
    Itm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TermClass {
    Short,
    Mid,
    Long,
}

/// Moneyness band for a spot-over-strike ratio.
pub fn moneyness_class(s_over_k: f64) -> MoneynessClass {
    if s_over_k < ATM_LOWER {
        MoneynessClass::Otm
    } else if s_over_k < ITM_LOWER {
        MoneynessClass::Atm
    } else {
        MoneynessClass::Itm
    }
}

/// Maturity band for a time to maturity in years. The thresholds are the
/// same `days / 365` ratios the records themselves use, so a 60-day quote
/// compares exactly equal to the short/mid boundary and lands in mid term.
pub fn term_class(tau: f64) -> TermClass {
    if tau < f64::from(SHORT_TERM_MAX_DAYS) / DAYS_PER_YEAR {
        TermClass::Short
    } else if tau <= f64::from(MID_TERM_MAX_DAYS) / DAYS_PER_YEAR {
        TermClass::Mid
    } else {
        TermClass::Long
    }
}

/// 0-based class index: moneyness major, term minor.
/// C1=(OTM, short) … C5=(ATM, mid) … C9=(ITM, long).
pub fn class_index(m: MoneynessClass, t: TermClass) -> usize {
    let mi = match m {
        MoneynessClass::Otm => 0,
        MoneynessClass::Atm => 1,
        MoneynessClass::Itm => 2,
    };
    let ti = match t {
        TermClass::Short => 0,
        TermClass::Mid => 1,
        TermClass::Long => 2,
    };
    mi * 3 + ti
}

/// Display label for a 0-based class index: `C1` … `C9`.
pub fn class_label(idx: usize) -> String {
    assert!(idx < CLASS_COUNT, "class index out of range");
    format!("C{}", idx + 1)
}

/// Inverse of [`class_label`].
pub fn parse_class_label(label: &str) -> Option<usize> {
    let n: usize = label.strip_prefix('C')?.parse().ok()?;
    (1..=CLASS_COUNT).contains(&n).then(|| n - 1)
}

/// First screening rule a record fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    ShortMaturity,
    LowQuote,
    DeepMoneyness,
    Arbitrage,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionCounts {
    pub short_maturity: usize,
    pub low_quote: usize,
    pub deep_moneyness: usize,
    pub arbitrage: usize,
}

impl RejectionCounts {
    pub fn total(&self) -> usize {
        self.short_maturity + self.low_quote + self.deep_moneyness + self.arbitrage
    }

    fn charge(&mut self, reason: RejectReason) {
        match reason {
            RejectReason::ShortMaturity => self.short_maturity += 1,
            RejectReason::LowQuote => self.low_quote += 1,
            RejectReason::DeepMoneyness => self.deep_moneyness += 1,
            RejectReason::Arbitrage => self.arbitrage += 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FilterReport {
    pub kept: Vec<RawQuoteRecord>,
    pub rejections: RejectionCounts,
}

/// Why a single record is excluded, or `None` if it passes every rule.
pub fn record_rejection(r: &RawQuoteRecord, cfg: &FilterConfig) -> Option<RejectReason> {
    if r.maturity_days < cfg.min_maturity_days {
        return Some(RejectReason::ShortMaturity);
    }
    if r.mid() < cfg.min_mid_quote {
        return Some(RejectReason::LowQuote);
    }
    let sk = r.moneyness();
    if !(cfg.moneyness_min..=cfg.moneyness_max).contains(&sk) {
        return Some(RejectReason::DeepMoneyness);
    }
    if cfg.enforce_arbitrage_bound {
        let floor = r.spot - r.strike * (-r.rate * r.tau()).exp();
        if r.mid() < floor {
            return Some(RejectReason::Arbitrage);
        }
    }
    None
}

/// Screens the records in input order.
pub fn apply_filters(records: &[RawQuoteRecord], cfg: &FilterConfig) -> FilterReport {
    let mut kept = Vec::with_capacity(records.len());
    let mut rejections = RejectionCounts::default();
    for r in records {
        match record_rejection(r, cfg) {
            None => kept.push(*r),
            Some(reason) => rejections.charge(reason),
        }
    }
    FilterReport { kept, rejections }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn record(spot: f64, strike: f64, mid: f64, maturity_days: u32) -> RawQuoteRecord {
        RawQuoteRecord {
            quote_date: NaiveDate::from_ymd_opt(2003, 1, 2).unwrap(),
            spot,
            strike,
            bid: mid - 0.125,
            ask: mid + 0.125,
            rate: 0.02,
            maturity_days,
        }
    }

    #[test]
    fn moneyness_bands_use_half_open_boundaries() {
        assert_eq!(moneyness_class(0.9799), MoneynessClass::Otm);
        assert_eq!(moneyness_class(0.98), MoneynessClass::Atm);
        assert_eq!(moneyness_class(1.0299), MoneynessClass::Atm);
        assert_eq!(moneyness_class(1.03), MoneynessClass::Itm);
        assert_eq!(moneyness_class(1.15), MoneynessClass::Itm);
    }

    #[test]
    fn term_bands_match_the_day_count_convention() {
        assert_eq!(term_class(59.0 / 365.0), TermClass::Short);
        assert_eq!(term_class(60.0 / 365.0), TermClass::Mid);
        assert_eq!(term_class(180.0 / 365.0), TermClass::Mid);
        assert_eq!(term_class(181.0 / 365.0), TermClass::Long);
    }

    #[test]
    fn class_grid_is_moneyness_major() {
        assert_eq!(class_index(MoneynessClass::Otm, TermClass::Short), 0);
        assert_eq!(class_index(MoneynessClass::Otm, TermClass::Long), 2);
        assert_eq!(class_index(MoneynessClass::Atm, TermClass::Mid), 4);
        assert_eq!(class_index(MoneynessClass::Itm, TermClass::Long), 8);
        assert_eq!(class_label(0), "C1");
        assert_eq!(class_label(8), "C9");
        for idx in 0..CLASS_COUNT {
            assert_eq!(parse_class_label(&class_label(idx)), Some(idx));
        }
        assert_eq!(parse_class_label("C10"), None);
        assert_eq!(parse_class_label("S1"), None);
    }

    #[test]
    fn filters_apply_in_order_and_charge_the_first_failure() {
        let cfg = FilterConfig::default();
        // Fails maturity AND quote level: charged to maturity only.
        let r = record(1000.0, 1000.0, 0.25, 5);
        assert_eq!(record_rejection(&r, &cfg), Some(RejectReason::ShortMaturity));

        let r = record(1000.0, 1000.0, 0.25, 30);
        assert_eq!(record_rejection(&r, &cfg), Some(RejectReason::LowQuote));

        let r = record(1000.0, 1200.0, 5.0, 30);
        assert_eq!(record_rejection(&r, &cfg), Some(RejectReason::DeepMoneyness));

        // Mid below the no-arbitrage floor S - K·e^{-rτ} ≈ 121.4.
        let r = record(1000.0, 880.0, 100.0, 30);
        assert_eq!(record_rejection(&r, &cfg), Some(RejectReason::Arbitrage));

        let r = record(1000.0, 1000.0, 30.0, 30);
        assert_eq!(record_rejection(&r, &cfg), None);
    }

    #[test]
    fn moneyness_bounds_are_inclusive() {
        let cfg = FilterConfig::default();
        assert_eq!(record_rejection(&record(850.0, 1000.0, 5.0, 30), &cfg), None);
        assert_eq!(record_rejection(&record(1150.0, 1000.0, 160.0, 30), &cfg), None);
        assert_eq!(
            record_rejection(&record(849.9, 1000.0, 5.0, 30), &cfg),
            Some(RejectReason::DeepMoneyness)
        );
        assert_eq!(
            record_rejection(&record(1150.1, 1000.0, 161.0, 30), &cfg),
            Some(RejectReason::DeepMoneyness)
        );
    }

    #[test]
    fn arbitrage_rule_can_be_disabled() {
        let cfg = FilterConfig { enforce_arbitrage_bound: false, ..FilterConfig::default() };
        let r = record(1000.0, 880.0, 100.0, 30);
        assert_eq!(record_rejection(&r, &cfg), None);
    }

    #[test]
    fn report_counts_match_the_kept_and_rejected_split() {
        let cfg = FilterConfig::default();
        let records = vec![
            record(1000.0, 1000.0, 30.0, 30),  // kept
            record(1000.0, 1000.0, 30.0, 5),   // short maturity
            record(1000.0, 1000.0, 0.2, 30),   // low quote
            record(1000.0, 1200.0, 5.0, 30),   // deep moneyness
            record(1000.0, 880.0, 100.0, 30),  // below arbitrage floor
            record(1000.0, 990.0, 40.0, 90),   // kept
        ];
        let report = apply_filters(&records, &cfg);
        assert_eq!(report.kept.len(), 2);
        let c = report.rejections;
        assert_eq!(
            (c.short_maturity, c.low_quote, c.deep_moneyness, c.arbitrage),
            (1, 1, 1, 1)
        );
        assert_eq!(c.total() + report.kept.len(), records.len());
    }
}
