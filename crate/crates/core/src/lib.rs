//! Forecasting the implied volatility of equity-index call options by
//! evolving closed-form pricing formulas with genetic programming.
//!
//! The library is organized around a data pipeline and an evolution engine:
//!
//! * [`option_math`]: Black-Scholes call pricing and implied-volatility
//!   inversion, the source of every training target.
//! * [`pipeline`]: quote filtering, fitness-case construction, time-series
//!   and moneyness/maturity partitioning, synthetic surface generation.
//! * [`gp`]: typed expression trees over the option terminals, protected
//!   operators, and a (mu, lambda) evolution loop.
//! * [`scheduler`]: training-subset schedulers that decide, epoch by epoch,
//!   which partition subset the engine trains on next.
//! * [`evaluation`]: MSE/NFO metrics, hand-coded reference formulas, and the
//!   static-vs-dynamic experiment driver.
//! * [`report`]: CSV renderings of run histories, scheduler traces, and
//!   result tables.

pub mod evaluation;
pub mod gp;
pub mod option_math;
pub mod pipeline;
pub mod report;
pub mod scheduler;

pub use evaluation::{MetricsReport, Predictor, ReferenceModel};
pub use gp::engine::{run_evolution, EvolutionInput, GpParams, RunOutcome, SubsetData};
pub use gp::tree::ExprTree;
pub use option_math::{bs_call_price, implied_vol, norm_cdf, MarketQuote};
pub use pipeline::{FilterConfig, FitnessCase, Partition, RawQuoteRecord, SurfaceConfig};
pub use scheduler::{Scheduler, SchedulerConfig, SchedulerMethod, SubsetId, WeightMode};
