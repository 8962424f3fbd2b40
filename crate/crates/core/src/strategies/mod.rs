//! Betting strategies: informal heuristics, Kelly and its quadratic
//! approximation, Markowitz mean-variance, max-Sharpe, and the risk-managed
//! variants (fractional stakes, per-bet caps, drawdown-constrained and
//! distributionally robust Kelly).

mod config;
mod formal;
mod informal;
pub mod objectives;
mod risk;

pub use config::{BaseStrategy, Family, FamilyParams, StrategyConfig, UnknownFamily, Wrapper};
pub use formal::{
    kelly, kelly_quadratic, max_sharpe, mpt, mpt_with_risk, sharpe_ratio, RiskModel,
};
pub use informal::{abs_disc, max_ev_frac, single_outcome_kelly};
pub use risk::{
    apply_fraction, apply_max_limit, drawdown_exponent, kelly_drawdown, kelly_dro,
    robust_growth, worst_case_probs, SmoothedRobustGrowth,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{build_odds_matrix, MarketError, OddsMatrix, RoundSlate};
use crate::solver::{SolveSettings, SolverError};

/// Tolerance on the portfolio sum.
pub const PORTFOLIO_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("ambiguity set is empty (lower bounds sum {lower}, upper bounds sum {upper})")]
    EmptyAmbiguitySet { lower: f64, upper: f64 },
    #[error("parameter {name} = {value} is out of range")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("invalid portfolio: {0}")]
    InvalidPortfolio(String),
}

/// Fractions of wealth per asset: risky outcome assets first, cash last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Portfolio(Vec<f64>);

impl Portfolio {
    pub fn new(fractions: Vec<f64>) -> Result<Self, StrategyError> {
        if fractions.is_empty() {
            return Err(StrategyError::InvalidPortfolio("no assets".into()));
        }
        if let Some(bad) = fractions.iter().find(|f| !(**f >= 0.0) || !f.is_finite()) {
            return Err(StrategyError::InvalidPortfolio(format!(
                "fraction {bad} is negative or not finite"
            )));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > PORTFOLIO_TOLERANCE {
            return Err(StrategyError::InvalidPortfolio(format!(
                "fractions sum to {sum}"
            )));
        }
        Ok(Self(fractions))
    }

    /// Everything in cash over `assets` assets.
    pub fn all_cash(assets: usize) -> Self {
        let mut f = vec![0.0; assets];
        f[assets - 1] = 1.0;
        Self(f)
    }

    /// Clamps tiny negative solver noise and puts the remainder in cash.
    pub(crate) fn from_solution(mut fractions: Vec<f64>) -> Self {
        let n = fractions.len();
        for f in fractions.iter_mut().take(n - 1) {
            *f = f.max(0.0);
        }
        let risky: f64 = fractions[..n - 1].iter().sum();
        fractions[n - 1] = if risky == 0.0 {
            1.0
        } else {
            (1.0 - risky).max(0.0)
        };
        Self(fractions)
    }

    pub fn fractions(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn cash(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn risky(&self) -> &[f64] {
        &self.0[..self.0.len() - 1]
    }

    pub fn risky_mass(&self) -> f64 {
        self.risky().iter().sum()
    }

    pub fn is_all_cash(&self) -> bool {
        self.risky().iter().all(|f| *f == 0.0)
    }
}

impl TryFrom<Vec<f64>> for Portfolio {
    type Error = StrategyError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<Portfolio> for Vec<f64> {
    fn from(p: Portfolio) -> Self {
        p.0
    }
}

/// Computes the unwrapped portfolio of `base` for a slate.
///
/// Informal strategies act per match. Formal strategies solve the joint
/// problem over all worlds of the slate, or fall back to one solve per match
/// when the slate has more worlds than `world_limit`. Per-match portfolios
/// are combined by splitting wealth equally across the slate's matches.
pub fn base_portfolio(
    base: &BaseStrategy,
    slate: &RoundSlate,
    settings: &SolveSettings,
    world_limit: usize,
) -> Result<Portfolio, StrategyError> {
    base.validate()?;
    if base.is_informal() || slate.len() == 1 {
        return per_match(base, slate, settings);
    }
    match build_odds_matrix(slate, world_limit) {
        Ok((matrix, _)) => solve_formal(base, &matrix, settings),
        Err(MarketError::WorldLimitExceeded { .. }) => per_match(base, slate, settings),
        Err(e) => Err(e.into()),
    }
}

/// Portfolio of `config` for a slate: the base strategy followed by its
/// wrappers in order.
pub fn run_strategy(
    config: &StrategyConfig,
    slate: &RoundSlate,
    settings: &SolveSettings,
    world_limit: usize,
) -> Result<Portfolio, StrategyError> {
    config.validate()?;
    let base = base_portfolio(&config.base, slate, settings, world_limit)?;
    Ok(config.apply_wrappers(base))
}

fn per_match(
    base: &BaseStrategy,
    slate: &RoundSlate,
    settings: &SolveSettings,
) -> Result<Portfolio, StrategyError> {
    let share = 1.0 / slate.len() as f64;
    let mut out = Vec::new();
    let mut cash = 0.0;
    for record in slate.matches() {
        let p = match base {
            BaseStrategy::AbsDisc => abs_disc(&record.player_probs, &record.odds)?,
            BaseStrategy::MaxEvFrac { omega } => {
                max_ev_frac(&record.player_probs, &record.odds, *omega)?
            }
            formal => {
                let matrix = OddsMatrix::single(&record.player_probs, &record.odds)?;
                solve_formal(formal, &matrix, settings)?
            }
        };
        if slate.len() == 1 {
            return Ok(p);
        }
        out.extend(p.risky().iter().map(|f| f * share));
        cash += p.cash() * share;
    }
    out.push(cash);
    Ok(Portfolio::from_solution(out))
}

fn solve_formal(
    base: &BaseStrategy,
    matrix: &OddsMatrix,
    settings: &SolveSettings,
) -> Result<Portfolio, StrategyError> {
    Ok(match *base {
        BaseStrategy::Kelly => kelly(matrix, settings)?,
        BaseStrategy::KellyQuadratic => kelly_quadratic(matrix, settings)?,
        BaseStrategy::Mpt { gamma } => mpt(matrix, gamma, settings)?,
        BaseStrategy::MaxSharpe => max_sharpe(matrix, settings)?,
        BaseStrategy::KellyDrawdown { alpha, beta } => {
            kelly_drawdown(matrix, alpha, beta, settings)?
        }
        BaseStrategy::KellyRobust { eta } => kelly_dro(matrix, eta, settings)?,
        BaseStrategy::AbsDisc | BaseStrategy::MaxEvFrac { .. } => {
            unreachable!("informal strategies are evaluated per match")
        }
    })
}
