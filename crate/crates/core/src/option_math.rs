//! Black-Scholes call pricing and implied-volatility inversion.
//!
//! Maturities are expressed in years on a 365-day calendar. The inversion is
//! a bracketed bisection on the volatility interval, refined by Newton steps
//! where vega is large enough to make them stable; convergence is judged on
//! an absolute price tolerance.

use thiserror::Error;

/// Lower edge of the volatility bracket searched by [`implied_vol`].
pub const SIGMA_MIN: f64 = 1e-4;
/// Upper edge of the volatility bracket searched by [`implied_vol`].
pub const SIGMA_MAX: f64 = 5.0;
/// Absolute price tolerance accepted as convergence by [`implied_vol`].
pub const PRICE_TOL: f64 = 1e-8;
/// Iteration budget shared by bisection and Newton refinement.
pub const MAX_ITERATIONS: usize = 200;

/// Newton steps are only taken when vega exceeds this floor; below it the
/// price curve is too flat for the step to be meaningful.
const VEGA_FLOOR: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum OptionMathError {
    #[error("invalid quote: {0}")]
    InvalidQuote(String),
    /// The quote has no positive-volatility root: it lies outside the
    /// no-arbitrage band or carries zero time value.
    #[error("quote has no implied-volatility root inside the no-arbitrage band")]
    NoRoot,
    /// The search exhausted its budget or the root lies above [`SIGMA_MAX`].
    /// Signals pathological input rather than a solver bug.
    #[error("implied-volatility search did not converge")]
    NonConvergence,
}

/// One observed call option quote.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketQuote {
    pub spot: f64,
    pub strike: f64,
    /// Observed call price (a bid/ask midpoint in the data pipeline).
    pub call_price: f64,
    /// Continuously compounded risk-free rate.
    pub rate: f64,
    /// Time to maturity in years.
    pub maturity: f64,
}

impl MarketQuote {
    /// Builds a quote, rejecting non-finite or non-positive market fields and
    /// negative rates. Use [`MarketQuote::with_negative_rate`] to opt in to
    /// negative rates explicitly.
    pub fn new(
        spot: f64,
        strike: f64,
        call_price: f64,
        rate: f64,
        maturity: f64,
    ) -> Result<Self, OptionMathError> {
        if rate < 0.0 {
            return Err(OptionMathError::InvalidQuote(format!(
                "negative rate {rate} (use with_negative_rate to allow)"
            )));
        }
        Self::with_negative_rate(spot, strike, call_price, rate, maturity)
    }

    /// Same validation as [`MarketQuote::new`] but admits negative rates.
    pub fn with_negative_rate(
        spot: f64,
        strike: f64,
        call_price: f64,
        rate: f64,
        maturity: f64,
    ) -> Result<Self, OptionMathError> {
        let quote = Self { spot, strike, call_price, rate, maturity };
        quote.validate()?;
        Ok(quote)
    }

    fn validate(&self) -> Result<(), OptionMathError> {
        let fail = |msg: String| Err(OptionMathError::InvalidQuote(msg));
        if !(self.spot.is_finite() && self.spot > 0.0) {
            return fail(format!("spot must be finite and positive, got {}", self.spot));
        }
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return fail(format!("strike must be finite and positive, got {}", self.strike));
        }
        if !(self.call_price.is_finite() && self.call_price >= 0.0) {
            return fail(format!("call price must be finite and non-negative, got {}", self.call_price));
        }
        if !self.rate.is_finite() {
            return fail(format!("rate must be finite, got {}", self.rate));
        }
        if !(self.maturity.is_finite() && self.maturity > 0.0) {
            return fail(format!("maturity must be finite and positive, got {}", self.maturity));
        }
        Ok(())
    }

    /// Discounted forward intrinsic value `S - K e^{-r tau}`, the lower edge
    /// of the no-arbitrage band for a European call.
    pub fn intrinsic_bound(&self) -> f64 {
        self.spot - self.strike * (-self.rate * self.maturity).exp()
    }
}

/// Standard normal cumulative distribution function.
///
/// Evaluated through the complementary error function so the tails keep full
/// relative accuracy; absolute error stays well under 1e-10 everywhere.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Black-Scholes price of a European call together with the d1/d2 arguments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingResult {
    pub price: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Black-Scholes call price. All inputs must be finite with positive spot,
/// strike, maturity and volatility.
pub fn bs_call_price(spot: f64, strike: f64, rate: f64, maturity: f64, sigma: f64) -> PricingResult {
    debug_assert!(spot.is_finite() && spot > 0.0, "spot {spot}");
    debug_assert!(strike.is_finite() && strike > 0.0, "strike {strike}");
    debug_assert!(rate.is_finite(), "rate {rate}");
    debug_assert!(maturity.is_finite() && maturity > 0.0, "maturity {maturity}");
    debug_assert!(sigma.is_finite() && sigma > 0.0, "sigma {sigma}");

    let sqrt_tau = maturity.sqrt();
    let d1 = ((spot / strike).ln() + (rate + 0.5 * sigma * sigma) * maturity) / (sigma * sqrt_tau);
    let d2 = d1 - sigma * sqrt_tau;
    let price = spot * norm_cdf(d1) - strike * (-rate * maturity).exp() * norm_cdf(d2);
    PricingResult { price, d1, d2 }
}

/// Black-Scholes vega, the price sensitivity to volatility.
pub fn vega(spot: f64, strike: f64, rate: f64, maturity: f64, sigma: f64) -> f64 {
    let sqrt_tau = maturity.sqrt();
    let d1 = ((spot / strike).ln() + (rate + 0.5 * sigma * sigma) * maturity) / (sigma * sqrt_tau);
    spot * norm_pdf(d1) * sqrt_tau
}

/// Inverts Black-Scholes for the volatility that reproduces the quoted call
/// price within [`PRICE_TOL`].
///
/// The search brackets `[SIGMA_MIN, SIGMA_MAX]` and bisects on the interval
/// width rather than exiting early on the price residual: near expiry or deep
/// in the money the price curve is almost flat in volatility, and an early
/// exit there would accept a root far from the true one. Newton refinement
/// runs afterwards when vega is above `1e-8`.
///
/// Errors:
/// * [`OptionMathError::NoRoot`] when the quote sits at or below the
///   intrinsic bound `max(S - K e^{-r tau}, 0)` (zero time value has no
///   positive-volatility root) or at/above the spot.
/// * [`OptionMathError::NonConvergence`] when the root lies above
///   [`SIGMA_MAX`] or the budget is exhausted.
pub fn implied_vol(quote: &MarketQuote) -> Result<f64, OptionMathError> {
    quote.validate()?;
    let floor = quote.intrinsic_bound().max(0.0);
    if quote.call_price <= floor {
        return Err(OptionMathError::NoRoot);
    }
    if quote.call_price >= quote.spot {
        return Err(OptionMathError::NoRoot);
    }

    let residual = |sigma: f64| {
        bs_call_price(quote.spot, quote.strike, quote.rate, quote.maturity, sigma).price
            - quote.call_price
    };

    let mut lo = SIGMA_MIN;
    let mut hi = SIGMA_MAX;
    let res_lo = residual(lo);
    if res_lo > 0.0 {
        // Quote below the cheapest priceable value: only acceptable when the
        // minimum-volatility price already matches within tolerance.
        return if res_lo <= PRICE_TOL { Ok(lo) } else { Err(OptionMathError::NoRoot) };
    }
    if residual(hi) < 0.0 {
        return Err(OptionMathError::NonConvergence);
    }

    // Invariant: residual(lo) <= 0 < residual(hi).
    let mut iterations = 0usize;
    while hi - lo > 1e-12 && iterations < MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if residual(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }

    let mut sigma = 0.5 * (lo + hi);
    for _ in 0..3 {
        let v = vega(quote.spot, quote.strike, quote.rate, quote.maturity, sigma);
        if v <= VEGA_FLOOR {
            break;
        }
        let err = residual(sigma);
        if err == 0.0 {
            break;
        }
        sigma = (sigma - err / v).clamp(SIGMA_MIN, SIGMA_MAX);
    }

    if residual(sigma).abs() <= PRICE_TOL {
        Ok(sigma)
    } else {
        Err(OptionMathError::NonConvergence)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_cdf_matches_known_quantiles() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        // 97.5% quantile of the standard normal.
        assert!((norm_cdf(1.959964) - 0.975).abs() < 1e-6);
        assert!(norm_cdf(-8.0) < 1e-14);
        assert!(norm_cdf(8.0) > 1.0 - 1e-14);
    }

    #[test]
    fn norm_cdf_is_symmetric_and_monotone() {
        let xs = [-6.0, -3.0, -1.5, -0.2, 0.0, 0.7, 2.0, 4.5];
        for &x in &xs {
            assert!(
                (norm_cdf(x) + norm_cdf(-x) - 1.0).abs() < 1e-12,
                "symmetry violated at {x}"
            );
        }
        for w in xs.windows(2) {
            assert!(norm_cdf(w[0]) < norm_cdf(w[1]));
        }
    }

    #[test]
    fn atm_zero_rate_price_reduces_to_cdf_identity() {
        let r = bs_call_price(100.0, 100.0, 0.0, 1.0, 0.2);
        // With S = K and r = 0: C = S (2 Phi(sigma sqrt(tau) / 2) - 1).
        let expected = 100.0 * (2.0 * norm_cdf(0.1) - 1.0);
        assert!((r.price - expected).abs() < 1e-9, "price {} vs {}", r.price, expected);
        assert!((r.d1 - 0.1).abs() < 1e-12);
        assert!((r.d2 + 0.1).abs() < 1e-12);
    }

    #[test]
    fn textbook_price_point() {
        let r = bs_call_price(100.0, 100.0, 0.05, 1.0, 0.2);
        assert!((r.price - 10.4506).abs() < 1e-3, "price {}", r.price);
    }

    #[test]
    fn price_is_increasing_in_volatility() {
        let mut last = 0.0;
        for i in 1..=100 {
            let sigma = 0.01 * i as f64;
            let p = bs_call_price(100.0, 105.0, 0.03, 0.5, sigma).price;
            assert!(p > last, "not increasing at sigma {sigma}");
            last = p;
        }
    }

    #[test]
    fn price_stays_inside_arbitrage_band() {
        for &(s_over_k, tau, sigma, rate) in &[
            (0.85, 0.1, 0.2, 0.0),
            (1.0, 1.0, 0.5, 0.03),
            (1.15, 2.0, 0.05, 0.03),
            (0.9, 0.04, 1.5, 0.0),
        ] {
            let spot = 100.0;
            let strike = spot / s_over_k;
            let p = bs_call_price(spot, strike, rate, tau, sigma).price;
            let floor = (spot - strike * (-rate * tau as f64).exp()).max(0.0);
            assert!(p >= floor - 1e-9, "below intrinsic at {s_over_k},{tau},{sigma}");
            assert!(p < spot, "above spot at {s_over_k},{tau},{sigma}");
        }
    }

    #[test]
    fn implied_vol_round_trips_a_quote() {
        let sigma = 0.35;
        let price = bs_call_price(100.0, 105.0, 0.03, 0.5, sigma).price;
        let quote = MarketQuote::new(100.0, 105.0, price, 0.03, 0.5).unwrap();
        let recovered = implied_vol(&quote).unwrap();
        assert!((recovered - sigma).abs() < 1e-6, "recovered {recovered}");
    }

    #[test]
    fn quote_below_intrinsic_has_no_root() {
        let quote = MarketQuote::new(100.0, 90.0, 100.0 - 90.0 - 0.01, 0.0, 0.5).unwrap();
        assert_eq!(implied_vol(&quote), Err(OptionMathError::NoRoot));
    }

    #[test]
    fn zero_price_out_of_the_money_has_no_root() {
        let quote = MarketQuote::new(100.0, 120.0, 0.0, 0.0, 0.25).unwrap();
        assert_eq!(implied_vol(&quote), Err(OptionMathError::NoRoot));
    }

    #[test]
    fn quote_at_or_above_spot_has_no_root() {
        let quote = MarketQuote::new(100.0, 100.0, 100.0, 0.0, 1.0).unwrap();
        assert_eq!(implied_vol(&quote), Err(OptionMathError::NoRoot));
    }

    #[test]
    fn root_above_bracket_reports_non_convergence() {
        // Price generated at sigma = 6, beyond the supported bracket.
        let price = bs_call_price(100.0, 100.0, 0.0, 1.0, 6.0).price;
        let quote = MarketQuote::new(100.0, 100.0, price, 0.0, 1.0).unwrap();
        assert_eq!(implied_vol(&quote), Err(OptionMathError::NonConvergence));
    }

    #[test]
    fn negative_rate_needs_explicit_opt_in() {
        assert!(matches!(
            MarketQuote::new(100.0, 100.0, 5.0, -0.01, 0.5),
            Err(OptionMathError::InvalidQuote(_))
        ));
        let quote = MarketQuote::with_negative_rate(100.0, 100.0, 5.0, -0.01, 0.5).unwrap();
        // The negative-rate quote prices and inverts like any other.
        let price = bs_call_price(100.0, 100.0, -0.01, 0.5, 0.25).price;
        let quote = MarketQuote { call_price: price, ..quote };
        let recovered = implied_vol(&quote).unwrap();
        assert!((recovered - 0.25).abs() < 1e-6);
    }

    #[test]
    fn rejects_malformed_quotes() {
        assert!(MarketQuote::new(0.0, 100.0, 1.0, 0.0, 1.0).is_err());
        assert!(MarketQuote::new(100.0, -5.0, 1.0, 0.0, 1.0).is_err());
        assert!(MarketQuote::new(100.0, 100.0, -1.0, 0.0, 1.0).is_err());
        assert!(MarketQuote::new(100.0, 100.0, 1.0, 0.0, 0.0).is_err());
        assert!(MarketQuote::new(100.0, 100.0, f64::NAN, 0.0, 1.0).is_err());
    }
}
