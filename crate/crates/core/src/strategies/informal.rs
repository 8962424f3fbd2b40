//! Single-match heuristics.

use super::{Portfolio, StrategyError};
use crate::market::{argmax, expected_unit_profits, normalized_implied_probs, OddsVector, OutcomeProbs};

/// Kelly stake on one outcome taken in isolation, `p - (1 - p) / (o - 1)`,
/// floored at zero.
pub fn single_outcome_kelly(p: f64, odds: f64) -> f64 {
    if odds <= 1.0 {
        return 0.0;
    }
    (p - (1.0 - p) / (odds - 1.0)).max(0.0)
}

fn single_bet(outcomes: usize, index: usize, stake: f64) -> Portfolio {
    let mut f = vec![0.0; outcomes + 1];
    if stake > 0.0 {
        f[index] = stake;
        f[outcomes] = 1.0 - stake;
    } else {
        f[outcomes] = 1.0;
    }
    Portfolio(f)
}

/// Stakes the largest positive discrepancy between the player's and the
/// de-margined bookmaker's probability on that outcome.
pub fn abs_disc(probs: &OutcomeProbs, odds: &OddsVector) -> Result<Portfolio, StrategyError> {
    let book = normalized_implied_probs(odds);
    if book.len() != probs.len() {
        return Err(crate::market::MarketError::LengthMismatch {
            left: probs.len(),
            right: odds.len(),
        }
        .into());
    }
    let diff: Vec<f64> = probs
        .as_slice()
        .iter()
        .zip(book.as_slice())
        .map(|(p, b)| p - b)
        .collect();
    let best = argmax(&diff);
    Ok(single_bet(probs.len(), best, diff[best].max(0.0)))
}

/// Stakes `omega` times the single-outcome Kelly fraction on the outcome of
/// highest expected profit, if that profit is positive.
pub fn max_ev_frac(
    probs: &OutcomeProbs,
    odds: &OddsVector,
    omega: f64,
) -> Result<Portfolio, StrategyError> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(StrategyError::InvalidParameter {
            name: "omega",
            value: omega,
        });
    }
    let ev = expected_unit_profits(probs, odds)?;
    let best = argmax(&ev);
    let stake = if ev[best] > 0.0 {
        omega * single_outcome_kelly(probs.as_slice()[best], odds.as_slice()[best])
    } else {
        0.0
    };
    Ok(single_bet(probs.len(), best, stake))
}
