//! Kelly, quadratic Kelly, mean-variance and max-Sharpe portfolios.
//!
//! Solves start from the all-cash vertex, so markets where no bet improves
//! the objective return exactly all-cash.

use serde::{Deserialize, Serialize};

use super::objectives::{
    covariance, diagonal_risk, expected_excess, is_single_match, second_moment, LogGrowth,
    MeanRisk, RiskNorm,
};
use super::{Portfolio, StrategyError};
use crate::market::OddsMatrix;
use crate::solver::{maximize_from, maximize_ratio_on_simplex, Linear, SolveSettings, SolverError};

/// Which matrix measures portfolio risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RiskModel {
    /// Diagonal Bernoulli form for a single match, full covariance otherwise.
    #[default]
    Auto,
    Diagonal,
    Covariance,
    /// Raw second moment `E[rho rho']`.
    SecondMoment,
}

impl RiskModel {
    pub fn matrix(&self, matrix: &OddsMatrix) -> Vec<f64> {
        let probs = matrix.world_probs();
        match self {
            RiskModel::Auto if is_single_match(matrix) => diagonal_risk(matrix),
            RiskModel::Diagonal => diagonal_risk(matrix),
            RiskModel::Auto | RiskModel::Covariance => covariance(&matrix.excess(), probs),
            RiskModel::SecondMoment => second_moment(&matrix.excess(), probs),
        }
    }
}

pub(crate) fn cash_start(matrix: &OddsMatrix) -> Vec<f64> {
    Portfolio::all_cash(matrix.assets()).into_inner()
}

/// Growth-optimal portfolio, maximizing `E[log(O . f)]`.
pub fn kelly(matrix: &OddsMatrix, settings: &SolveSettings) -> Result<Portfolio, StrategyError> {
    let report = maximize_from(&LogGrowth::new(matrix), &cash_start(matrix), settings)?;
    Ok(Portfolio::from_solution(report.solution))
}

/// Maximizes the second-order expansion `E[rho . f - (rho . f)^2 / 2]`.
pub fn kelly_quadratic(
    matrix: &OddsMatrix,
    settings: &SolveSettings,
) -> Result<Portfolio, StrategyError> {
    mpt_with_risk(matrix, 0.5, RiskModel::SecondMoment, settings)
}

/// Mean-variance portfolio maximizing `E[rho . f] - gamma f' S f`.
pub fn mpt(
    matrix: &OddsMatrix,
    gamma: f64,
    settings: &SolveSettings,
) -> Result<Portfolio, StrategyError> {
    mpt_with_risk(matrix, gamma, RiskModel::Auto, settings)
}

pub fn mpt_with_risk(
    matrix: &OddsMatrix,
    gamma: f64,
    model: RiskModel,
    settings: &SolveSettings,
) -> Result<Portfolio, StrategyError> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(StrategyError::InvalidParameter {
            name: "gamma",
            value: gamma,
        });
    }
    let objective = MeanRisk {
        mean: expected_excess(&matrix.excess(), matrix.world_probs()),
        risk: model.matrix(matrix),
        weight: gamma,
    };
    let report = maximize_from(&objective, &cash_start(matrix), settings)?;
    Ok(Portfolio::from_solution(report.solution))
}

/// Portfolio of maximal `E[rho . f] / sqrt(f' S f)`.
///
/// The ratio is invariant to how much is kept in cash, so the search runs
/// over fully invested portfolios. Markets without a positive-edge bet get
/// all-cash.
pub fn max_sharpe(
    matrix: &OddsMatrix,
    settings: &SolveSettings,
) -> Result<Portfolio, StrategyError> {
    let n = matrix.assets();
    let risky = n - 1;
    let mean = expected_excess(&matrix.excess(), matrix.world_probs());
    let full = RiskModel::Auto.matrix(matrix);
    let mut risk = Vec::with_capacity(risky * risky);
    for i in 0..risky {
        risk.extend_from_slice(&full[i * n..i * n + risky]);
    }
    let numerator = Linear(mean[..risky].to_vec());
    let denominator = RiskNorm { risk: &risk };
    match maximize_ratio_on_simplex(&numerator, &denominator, risky, settings) {
        Ok(report) => {
            let mut f = report.solution;
            f.push(0.0);
            Ok(Portfolio::from_solution(f))
        }
        Err(SolverError::DegenerateRatio) => Ok(Portfolio::all_cash(n)),
        Err(e) => Err(e.into()),
    }
}

/// Sharpe ratio of a portfolio under the same risk model as [`max_sharpe`].
pub fn sharpe_ratio(matrix: &OddsMatrix, f: &[f64]) -> f64 {
    let mean = expected_excess(&matrix.excess(), matrix.world_probs());
    let risk = RiskModel::Auto.matrix(matrix);
    crate::market::dot(&mean, f) / crate::solver::Objective::value(&RiskNorm { risk: &risk }, f)
}
