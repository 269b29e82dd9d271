//! Genetic programming over closed-form volatility formulas: typed
//! expression trees, variation operators, and the (mu, lambda) engine.

pub mod engine;
pub mod tree;
pub mod variation;
