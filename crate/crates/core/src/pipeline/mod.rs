//! Option-quote preparation: exclusion filters, implied-volatility targets,
//! moneyness/term classification, chronological partitioning, and synthetic
//! surface generation.
//!
//! The flow is `RawQuoteRecord` → filters → implied-vol inversion →
//! `LabeledCase` → [`Partition`], which exposes the training subsets the
//! evolution engine consumes.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::option_math::{implied_vol, MarketQuote};

pub mod classify;
pub mod io;
pub mod partition;
pub mod synthetic;

pub use classify::{
    apply_filters, class_label, moneyness_class, parse_class_label, term_class, FilterReport,
    MoneynessClass, RejectReason, RejectionCounts, TermClass, CLASS_COUNT,
};
pub use partition::Partition;
pub use synthetic::{generate_records, SurfaceConfig};

/// Days-per-year convention used to turn a maturity in days into years.
pub const DAYS_PER_YEAR: f64 = 365.0;

/// One end-of-day call option quote as it arrives from a data vendor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawQuoteRecord {
    pub quote_date: NaiveDate,
    pub spot: f64,
    pub strike: f64,
    pub bid: f64,
    pub ask: f64,
    /// Continuously compounded risk-free rate matching the maturity.
    pub rate: f64,
    pub maturity_days: u32,
}

impl RawQuoteRecord {
    /// Mid quote, the price the pipeline treats as the option's value.
    #[inline]
    pub fn mid(&self) -> f64 {
        0.5 * (self.bid + self.ask)
    }

    /// Time to maturity in years.
    #[inline]
    pub fn tau(&self) -> f64 {
        f64::from(self.maturity_days) / DAYS_PER_YEAR
    }

    #[inline]
    pub fn moneyness(&self) -> f64 {
        self.spot / self.strike
    }
}

/// One training example: the three model inputs plus the implied volatility
/// the model should reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessCase {
    /// Call mid price over strike.
    pub c_over_k: f64,
    /// Spot over strike.
    pub s_over_k: f64,
    /// Time to maturity in years.
    pub tau: f64,
    /// Black-Scholes implied volatility recovered from the quote.
    pub target_sigma: f64,
}

/// A fitness case together with the metadata partitioning needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledCase {
    pub quote_date: NaiveDate,
    /// Moneyness/term class, 0-based (0 ↔ C1 … 8 ↔ C9).
    pub class_idx: usize,
    pub case: FitnessCase,
}

/// A named set of fitness cases, the unit the engine trains or tests on.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetData {
    pub label: String,
    pub cases: Vec<FitnessCase>,
}

/// Exclusion-filter thresholds. Defaults match the screening rules applied
/// to the index-option data the models are built for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Quotes closer to expiry than this many days are excluded.
    pub min_maturity_days: u32,
    /// Mid quotes below this level are excluded as noise-dominated.
    pub min_mid_quote: f64,
    /// Inclusive lower bound on S/K.
    pub moneyness_min: f64,
    /// Inclusive upper bound on S/K.
    pub moneyness_max: f64,
    /// When set, mids below the no-arbitrage floor `S - K·e^{-rτ}` are
    /// excluded.
    pub enforce_arbitrage_bound: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_maturity_days: 10,
            min_mid_quote: 0.375,
            moneyness_min: 0.85,
            moneyness_max: 1.15,
            enforce_arbitrage_bound: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("need at least {need} cases, got {got}")]
    NotEnoughCases { need: usize, got: usize },
}

/// Result of running the full preparation flow over raw quotes.
#[derive(Debug, Clone)]
pub struct PreparedCases {
    /// Cases that survived the filters and inverted cleanly, in input order.
    pub cases: Vec<LabeledCase>,
    pub rejections: RejectionCounts,
    /// Quotes that passed the filters but admit no implied volatility (for
    /// example zero-time-value quotes at the intrinsic floor).
    pub inversion_failures: usize,
}

/// Filters the records, recovers implied volatilities, and classifies each
/// surviving quote. Input order is preserved; callers supply records in
/// chronological order when the result feeds a [`Partition`].
pub fn prepare_cases(
    records: &[RawQuoteRecord],
    filter: &FilterConfig,
) -> Result<PreparedCases, PipelineError> {
    let report = apply_filters(records, filter);
    let mut cases = Vec::with_capacity(report.kept.len());
    let mut inversion_failures = 0usize;
    for r in &report.kept {
        let quote =
            MarketQuote::with_negative_rate(r.spot, r.strike, r.mid(), r.rate, r.tau())
                .map_err(|e| PipelineError::Parse(format!("bad quote on {}: {e}", r.quote_date)))?;
        match implied_vol(&quote) {
            Ok(sigma) => {
                let class_idx = classify::class_index(
                    moneyness_class(r.moneyness()),
                    term_class(r.tau()),
                );
                cases.push(LabeledCase {
                    quote_date: r.quote_date,
                    class_idx,
                    case: FitnessCase {
                        c_over_k: r.mid() / r.strike,
                        s_over_k: r.moneyness(),
                        tau: r.tau(),
                        target_sigma: sigma,
                    },
                });
            }
            Err(_) => inversion_failures += 1,
        }
    }
    Ok(PreparedCases { cases, rejections: report.rejections, inversion_failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(days_from_start: i64, spot: f64, strike: f64, mid: f64, maturity_days: u32) -> RawQuoteRecord {
        let base = NaiveDate::from_ymd_opt(2003, 1, 2).unwrap();
        RawQuoteRecord {
            quote_date: base + chrono::Days::new(days_from_start as u64),
            spot,
            strike,
            bid: mid - 0.125,
            ask: mid + 0.125,
            rate: 0.02,
            maturity_days,
        }
    }

    #[test]
    fn mid_and_tau_are_the_quote_conventions() {
        let r = record(0, 1000.0, 1000.0, 30.0, 73);
        assert_eq!(r.mid(), 30.0);
        assert_eq!(r.tau(), 73.0 / 365.0);
        assert_eq!(r.moneyness(), 1.0);
    }

    #[test]
    fn prepare_recovers_the_priced_volatility() {
        let sigma = 0.25;
        let tau = 120.0 / 365.0;
        let price = crate::option_math::bs_call_price(1000.0, 1000.0, 0.02, tau, sigma).price;
        let r = RawQuoteRecord {
            quote_date: NaiveDate::from_ymd_opt(2003, 1, 2).unwrap(),
            spot: 1000.0,
            strike: 1000.0,
            bid: price - 0.125,
            ask: price + 0.125,
            rate: 0.02,
            maturity_days: 120,
        };
        let prepared = prepare_cases(&[r], &FilterConfig::default()).unwrap();
        assert_eq!(prepared.cases.len(), 1);
        assert_eq!(prepared.inversion_failures, 0);
        let case = prepared.cases[0];
        assert!((case.case.target_sigma - sigma).abs() < 1e-7);
        assert_eq!(case.case.s_over_k, 1.0);
        assert_eq!(case.case.tau, tau);
        // ATM, 120 days → mid term → class C5 (index 4).
        assert_eq!(case.class_idx, 4);
    }

    #[test]
    fn zero_time_value_quotes_count_as_inversion_failures() {
        // Deep ITM quote exactly at the intrinsic floor: no positive
        // volatility reproduces it, so it cannot become a fitness case.
        let spot = 1000.0;
        let strike = 880.0;
        let tau = 30.0 / 365.0;
        let floor = spot - strike * (-0.02f64 * tau).exp();
        let r = RawQuoteRecord {
            quote_date: NaiveDate::from_ymd_opt(2003, 1, 2).unwrap(),
            spot,
            strike,
            bid: floor - 0.125,
            ask: floor + 0.125,
            rate: 0.02,
            maturity_days: 30,
        };
        let prepared = prepare_cases(&[r], &FilterConfig::default()).unwrap();
        assert_eq!(prepared.cases.len(), 0);
        assert_eq!(prepared.inversion_failures, 1);
    }
}
