//! Synthetic quote generation from a parametric volatility surface.
//!
//! Records are priced under Black-Scholes on a smile-plus-term-structure
//! surface and emitted with a fixed half-spread around the model price, so
//! with no noise the mid quote inverts back to the surface volatility up to
//! the inversion tolerance.
//!
//! Generation is rejection-sampled against the default exclusion filters and
//! the invertibility of the mid quote, so a run yields exactly `n_records`
//! usable records. Draw order per attempt is fixed — moneyness, maturity,
//! then two noise uniforms when `noise_sd > 0` — which makes output a pure
//! function of the seed.

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::option_math::{bs_call_price, implied_vol, MarketQuote};

use super::classify::record_rejection;
use super::{FilterConfig, PipelineError, RawQuoteRecord};

/// Quotes sit this far either side of the model price. The value is exact in
/// binary, so re-averaging bid and ask recovers the price to within at most
/// one rounding step.
pub const HALF_SPREAD: f64 = 0.125;

/// Moneyness S/K is drawn uniformly from this inclusive range.
pub const MONEYNESS_RANGE: (f64, f64) = (0.85, 1.15);

/// Maturity in days is drawn uniformly from this inclusive range.
pub const MATURITY_RANGE_DAYS: (u32, u32) = (15, 365);

/// Volatilities must stay inside this open interval, both for the noiseless
/// surface (checked up front) and for noisy draws (clamped just inside).
pub const SIGMA_BOUNDS: (f64, f64) = (0.01, 2.0);

const SIGMA_CLAMP: (f64, f64) = (0.0101, 1.99);

/// Attempts allowed per record before generation gives up.
const MAX_ATTEMPTS: usize = 10_000;

/// Parametric surface and sampling controls.
///
/// The surface is `base_vol + smile_coeff·ln²(S/K) + term_coeff·√τ`; with
/// `noise_sd > 0` a Gaussian perturbation is added per quote before pricing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceConfig {
    pub n_records: usize,
    pub base_vol: f64,
    pub smile_coeff: f64,
    pub term_coeff: f64,
    pub noise_sd: f64,
    pub spot: f64,
    pub rate: f64,
    /// Quote dates sit on a uniform grid spanning this many days.
    pub date_span_days: u32,
    pub seed: u64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            n_records: 6670,
            base_vol: 0.15,
            smile_coeff: 0.5,
            term_coeff: 0.05,
            noise_sd: 0.0,
            spot: 1000.0,
            rate: 0.02,
            date_span_days: 3650,
            seed: 42,
        }
    }
}

/// First quote date of every generated series.
pub fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2003, 1, 2).expect("valid constant date")
}

/// Noiseless surface volatility at a point.
pub fn surface_sigma(cfg: &SurfaceConfig, s_over_k: f64, tau: f64) -> f64 {
    let log_m = s_over_k.ln();
    cfg.base_vol + cfg.smile_coeff * log_m * log_m + cfg.term_coeff * tau.sqrt()
}

impl SurfaceConfig {
    /// Checks the sampling controls and that the noiseless surface stays
    /// inside [`SIGMA_BOUNDS`] over the whole sampled domain. The surface is
    /// affine in `ln²(S/K)` and `√τ`, so its extremes sit on the corners
    /// (with S/K = 1 covering the zero of the smile term).
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        if self.n_records == 0 {
            return bad("n_records must be positive".into());
        }
        if self.date_span_days == 0 {
            return bad("date_span_days must be positive".into());
        }
        if !(self.spot.is_finite() && self.spot > 0.0) {
            return bad(format!("spot must be positive, got {}", self.spot));
        }
        if !self.rate.is_finite() {
            return bad("rate must be finite".into());
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return bad(format!("noise_sd must be non-negative, got {}", self.noise_sd));
        }
        for v in [self.base_vol, self.smile_coeff, self.term_coeff] {
            if !v.is_finite() {
                return bad("surface coefficients must be finite".into());
            }
        }
        let tau_lo = f64::from(MATURITY_RANGE_DAYS.0) / super::DAYS_PER_YEAR;
        let tau_hi = f64::from(MATURITY_RANGE_DAYS.1) / super::DAYS_PER_YEAR;
        for sk in [MONEYNESS_RANGE.0, 1.0, MONEYNESS_RANGE.1] {
            for tau in [tau_lo, tau_hi] {
                let sigma = surface_sigma(self, sk, tau);
                if !(sigma > SIGMA_BOUNDS.0 && sigma < SIGMA_BOUNDS.1) {
                    return bad(format!(
                        "surface volatility {sigma:.4} at S/K={sk}, tau={tau:.4} \
                         leaves the open interval ({}, {})",
                        SIGMA_BOUNDS.0, SIGMA_BOUNDS.1
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Generates exactly `cfg.n_records` quotes that pass the default exclusion
/// filters and invert to a usable implied volatility.
pub fn generate_records(cfg: &SurfaceConfig) -> Result<Vec<RawQuoteRecord>, PipelineError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let filter = FilterConfig::default();
    let start = start_date();
    let n = cfg.n_records as u64;

    let mut records = Vec::with_capacity(cfg.n_records);
    for i in 0..cfg.n_records {
        let offset = (i as u64) * u64::from(cfg.date_span_days) / n;
        let quote_date = start + Days::new(offset);
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS {
            let s_over_k = rng.random_range(MONEYNESS_RANGE.0..=MONEYNESS_RANGE.1);
            let maturity_days = rng.random_range(MATURITY_RANGE_DAYS.0..=MATURITY_RANGE_DAYS.1);
            let tau = f64::from(maturity_days) / super::DAYS_PER_YEAR;
            let mut sigma = surface_sigma(cfg, s_over_k, tau);
            if cfg.noise_sd > 0.0 {
                let u1 = 1.0 - rng.random::<f64>();
                let u2 = rng.random::<f64>();
                let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                sigma = (sigma + cfg.noise_sd * z).clamp(SIGMA_CLAMP.0, SIGMA_CLAMP.1);
            }
            let strike = cfg.spot / s_over_k;
            let price = bs_call_price(cfg.spot, strike, cfg.rate, tau, sigma).price;
            let record = RawQuoteRecord {
                quote_date,
                spot: cfg.spot,
                strike,
                bid: price - HALF_SPREAD,
                ask: price + HALF_SPREAD,
                rate: cfg.rate,
                maturity_days,
            };
            if record_rejection(&record, &filter).is_some() {
                continue;
            }
            let invertible = MarketQuote::with_negative_rate(
                record.spot,
                record.strike,
                record.mid(),
                record.rate,
                record.tau(),
            )
            .map(|q| implied_vol(&q).is_ok())
            .unwrap_or(false);
            if invertible {
                accepted = Some(record);
                break;
            }
        }
        match accepted {
            Some(r) => records.push(r),
            None => {
                return Err(PipelineError::Config(format!(
                    "no admissible quote found after {MAX_ATTEMPTS} attempts \
                     (record {i}); the surface prices too many quotes below \
                     the exclusion thresholds"
                )))
            }
        }
    }
    Ok(records)
}
