//! Portfolio construction for fixed-odds betting markets.
//!
//! The crate turns (odds, model probabilities) into stake fractions on the
//! simplex of outcome assets plus cash, and backtests those strategies with a
//! multiplicative-bankroll Monte-Carlo protocol.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod market;
pub mod simulation;
pub mod solver;
pub mod strategies;
pub mod tuning;

pub use market::{
    build_odds_matrix, expected_unit_profits, implied_probs, kl_advantage, margin,
    normalized_implied_probs, AssetLabel, ExcessOddsMatrix, MarketClass, MarketError, MatchRecord,
    OddsMatrix, OddsVector, OutcomeProbs, RoundSlate,
};
pub use solver::{SolveReport, SolveSettings, SolverError};
pub use strategies::{
    run_strategy, BaseStrategy, Family, Portfolio, StrategyConfig, StrategyError, Wrapper,
};
pub use simulation::{
    monte_carlo, MonteCarloResult, ProtocolConfig, SimulationError, WealthStats, WealthTrajectory,
};
pub use tuning::{grid_search, split, GridSpec, SelectionResult, SurvivalCriterion, TuningError};
pub use data::{
    generate_synthetic, parse_csv, summarize, write_csv, DataError, DatasetSummary, Preset,
    SyntheticConfig,
};
