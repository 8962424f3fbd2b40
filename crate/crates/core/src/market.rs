//! Fixed-odds market primitives.
//!
//! A single match offers decimal odds `o_i >= 1` on mutually exclusive
//! outcomes. Several matches open at the same time form a [`RoundSlate`];
//! enumerating the joint outcomes of a slate yields an [`OddsMatrix`] whose
//! rows are world realizations and whose columns are assets (one per match
//! outcome, plus a trailing risk-free cash asset paying 1 in every world).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for every probability / odds comparison in the crate.
pub const PROB_TOLERANCE: f64 = 1e-9;

/// Default cap on the number of joint worlds enumerated for one slate.
pub const DEFAULT_WORLD_LIMIT: usize = 4_096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketError {
    #[error("probability vector is empty")]
    EmptyProbs,
    #[error("probability {value} at index {index} is negative or not finite")]
    InvalidProbability { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    ProbsNotNormalized { sum: f64 },
    #[error("a match needs at least two outcomes, got {0}")]
    TooFewOutcomes(usize),
    #[error("odds {value} at index {index} are below 1 or not finite")]
    InvalidOdds { index: usize, value: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("result index {index} out of range for {outcomes} outcomes")]
    ResultOutOfRange { index: usize, outcomes: usize },
    #[error("slate is empty")]
    EmptySlate,
    #[error("match {match_id} has round id {found}, slate round is {expected}")]
    MixedRounds {
        match_id: String,
        expected: String,
        found: String,
    },
    #[error("slate enumerates {worlds} worlds, limit is {limit}")]
    WorldLimitExceeded { worlds: usize, limit: usize },
    #[error("record {record} ({match_id}) assigns zero probability to its realized outcome")]
    ZeroProbability { record: usize, match_id: String },
    #[error("no records given")]
    NoRecords,
}

/// Probability distribution over the outcomes of one match.
///
/// Used for the true distribution, the player's estimate and the
/// bookmaker's (normalized) implied distribution alike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OutcomeProbs(Vec<f64>);

impl OutcomeProbs {
    pub fn new(probs: Vec<f64>) -> Result<Self, MarketError> {
        if probs.is_empty() {
            return Err(MarketError::EmptyProbs);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(MarketError::InvalidProbability { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(MarketError::ProbsNotNormalized { sum });
        }
        Ok(Self(probs))
    }

    /// Uniform distribution over `n` outcomes.
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the most probable outcome (lowest index on ties).
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

impl TryFrom<Vec<f64>> for OutcomeProbs {
    type Error = MarketError;

    fn try_from(value: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<OutcomeProbs> for Vec<f64> {
    fn from(value: OutcomeProbs) -> Self {
        value.0
    }
}

/// Decimal odds offered on the outcomes of one match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OddsVector(Vec<f64>);

impl OddsVector {
    pub fn new(odds: Vec<f64>) -> Result<Self, MarketError> {
        if odds.len() < 2 {
            return Err(MarketError::TooFewOutcomes(odds.len()));
        }
        for (index, &value) in odds.iter().enumerate() {
            if !value.is_finite() || value < 1.0 {
                return Err(MarketError::InvalidOdds { index, value });
            }
        }
        Ok(Self(odds))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn inverse_sum(&self) -> f64 {
        self.0.iter().map(|o| 1.0 / o).sum()
    }
}

impl TryFrom<Vec<f64>> for OddsVector {
    type Error = MarketError;

    fn try_from(value: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<OddsVector> for Vec<f64> {
    fn from(value: OddsVector) -> Self {
        value.0
    }
}

/// Classification of a book by its inverse-odds sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarketClass {
    Fair,
    Subfair,
    Superfair,
}

/// Raw implied probabilities `1/o_i` (not renormalized) and the market class.
pub fn implied_probs(odds: &OddsVector) -> (Vec<f64>, MarketClass) {
    let inv: Vec<f64> = odds.as_slice().iter().map(|o| 1.0 / o).collect();
    let sum: f64 = inv.iter().sum();
    let class = if (sum - 1.0).abs() <= PROB_TOLERANCE {
        MarketClass::Fair
    } else if sum > 1.0 {
        MarketClass::Subfair
    } else {
        MarketClass::Superfair
    };
    (inv, class)
}

/// Inverse odds proportionally normalized to sum to one (margin removed).
pub fn normalized_implied_probs(odds: &OddsVector) -> OutcomeProbs {
    let sum = odds.inverse_sum();
    OutcomeProbs(odds.as_slice().iter().map(|o| 1.0 / (o * sum)).collect())
}

/// Bookmaker margin `(sum 1/o - 1) / sum 1/o`; negative for superfair odds.
pub fn margin(odds: &OddsVector) -> f64 {
    let sum = odds.inverse_sum();
    (sum - 1.0) / sum
}

/// Expected net profit per unit staked on each outcome, `p_i * o_i - 1`.
pub fn expected_unit_profits(
    probs: &OutcomeProbs,
    odds: &OddsVector,
) -> Result<Vec<f64>, MarketError> {
    check_len(probs.len(), odds.len())?;
    Ok(probs
        .as_slice()
        .iter()
        .zip(odds.as_slice())
        .map(|(p, o)| p * o - 1.0)
        .collect())
}

/// One betting opportunity together with the player's estimate and the
/// realized (0-based) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub match_id: String,
    pub round_id: String,
    pub odds: OddsVector,
    pub player_probs: OutcomeProbs,
    pub result: usize,
}

impl MatchRecord {
    pub fn new(
        match_id: impl Into<String>,
        round_id: impl Into<String>,
        odds: OddsVector,
        player_probs: OutcomeProbs,
        result: usize,
    ) -> Result<Self, MarketError> {
        check_len(odds.len(), player_probs.len())?;
        if result >= odds.len() {
            return Err(MarketError::ResultOutOfRange {
                index: result,
                outcomes: odds.len(),
            });
        }
        Ok(Self {
            match_id: match_id.into(),
            round_id: round_id.into(),
            odds,
            player_probs,
            result,
        })
    }

    pub fn outcomes(&self) -> usize {
        self.odds.len()
    }
}

/// Matches that are open for betting simultaneously.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSlate {
    round_id: String,
    matches: Vec<MatchRecord>,
}

impl RoundSlate {
    pub fn new(matches: Vec<MatchRecord>) -> Result<Self, MarketError> {
        let first = matches.first().ok_or(MarketError::EmptySlate)?;
        let round_id = first.round_id.clone();
        if let Some(m) = matches.iter().find(|m| m.round_id != round_id) {
            return Err(MarketError::MixedRounds {
                match_id: m.match_id.clone(),
                expected: round_id,
                found: m.round_id.clone(),
            });
        }
        Ok(Self { round_id, matches })
    }

    /// Builds a slate from arbitrary matches, relabelling their round id.
    pub fn regrouped(
        round_id: impl Into<String>,
        matches: Vec<MatchRecord>,
    ) -> Result<Self, MarketError> {
        if matches.is_empty() {
            return Err(MarketError::EmptySlate);
        }
        let round_id = round_id.into();
        let matches = matches
            .into_iter()
            .map(|mut m| {
                m.round_id.clone_from(&round_id);
                m
            })
            .collect();
        Ok(Self { round_id, matches })
    }

    pub fn round_id(&self) -> &str {
        &self.round_id
    }

    pub fn matches(&self) -> &[MatchRecord] {
        &self.matches
    }

    pub fn into_matches(self) -> Vec<MatchRecord> {
        self.matches
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    /// Number of joint worlds, saturating at `usize::MAX`.
    pub fn world_count(&self) -> usize {
        self.matches
            .iter()
            .try_fold(1usize, |acc, m| acc.checked_mul(m.outcomes()))
            .unwrap_or(usize::MAX)
    }

    /// Index of the joint world realized by the matches' results, in the row
    /// order used by [`build_odds_matrix`] (first match most significant).
    pub fn realized_world(&self) -> usize {
        self.matches
            .iter()
            .fold(0, |acc, m| acc * m.outcomes() + m.result)
    }
}

/// Groups consecutive records sharing a round id into slates, preserving order.
pub fn group_into_rounds(records: Vec<MatchRecord>) -> Vec<RoundSlate> {
    let mut rounds: Vec<RoundSlate> = Vec::new();
    for record in records {
        match rounds.last_mut() {
            Some(slate) if slate.round_id == record.round_id => slate.matches.push(record),
            _ => rounds.push(RoundSlate {
                round_id: record.round_id.clone(),
                matches: vec![record],
            }),
        }
    }
    rounds
}

/// Column meaning in an [`OddsMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssetLabel {
    Outcome { match_index: usize, outcome: usize },
    Cash,
}

/// Payoff matrix over joint worlds (rows) and assets (columns), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OddsMatrix {
    worlds: usize,
    assets: usize,
    payoff: Vec<f64>,
    world_probs: Vec<f64>,
    labels: Vec<AssetLabel>,
}

impl OddsMatrix {
    /// Matrix of a single match, world probabilities taken from `probs`.
    pub fn single(probs: &OutcomeProbs, odds: &OddsVector) -> Result<Self, MarketError> {
        check_len(probs.len(), odds.len())?;
        let n = odds.len();
        let assets = n + 1;
        let mut payoff = vec![0.0; n * assets];
        for (w, &o) in odds.as_slice().iter().enumerate() {
            payoff[w * assets + w] = o;
            payoff[w * assets + n] = 1.0;
        }
        let mut labels: Vec<AssetLabel> = (0..n)
            .map(|outcome| AssetLabel::Outcome {
                match_index: 0,
                outcome,
            })
            .collect();
        labels.push(AssetLabel::Cash);
        Ok(Self {
            worlds: n,
            assets,
            payoff,
            world_probs: probs.as_slice().to_vec(),
            labels,
        })
    }

    /// Same payoffs, different world probabilities.
    pub fn with_world_probs(&self, probs: Vec<f64>) -> Result<Self, MarketError> {
        check_len(self.worlds, probs.len())?;
        let checked = OutcomeProbs::new(probs)?;
        Ok(Self {
            world_probs: checked.0,
            ..self.clone()
        })
    }

    pub fn worlds(&self) -> usize {
        self.worlds
    }

    pub fn assets(&self) -> usize {
        self.assets
    }

    /// Index of the cash column (always the last).
    pub fn cash_index(&self) -> usize {
        self.assets - 1
    }

    pub fn row(&self, world: usize) -> &[f64] {
        &self.payoff[world * self.assets..(world + 1) * self.assets]
    }

    pub fn payoff(&self) -> &[f64] {
        &self.payoff
    }

    pub fn world_probs(&self) -> &[f64] {
        &self.world_probs
    }

    pub fn labels(&self) -> &[AssetLabel] {
        &self.labels
    }

    /// Wealth multiplier `O_w . f` in world `w`.
    pub fn wealth(&self, world: usize, fractions: &[f64]) -> f64 {
        dot(self.row(world), fractions)
    }

    pub fn excess(&self) -> ExcessOddsMatrix {
        ExcessOddsMatrix {
            worlds: self.worlds,
            assets: self.assets,
            payoff: self.payoff.iter().map(|o| o - 1.0).collect(),
        }
    }
}

/// Net profit multipliers `rho = O - 1`; the cash column is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcessOddsMatrix {
    worlds: usize,
    assets: usize,
    payoff: Vec<f64>,
}

impl ExcessOddsMatrix {
    pub fn worlds(&self) -> usize {
        self.worlds
    }

    pub fn assets(&self) -> usize {
        self.assets
    }

    pub fn row(&self, world: usize) -> &[f64] {
        &self.payoff[world * self.assets..(world + 1) * self.assets]
    }

    pub fn payoff(&self) -> &[f64] {
        &self.payoff
    }
}

/// Enumerates the joint worlds of a slate, assuming independent matches.
pub fn build_odds_matrix(
    slate: &RoundSlate,
    world_limit: usize,
) -> Result<(OddsMatrix, ExcessOddsMatrix), MarketError> {
    if slate.is_empty() {
        return Err(MarketError::EmptySlate);
    }
    let worlds = slate.world_count();
    if worlds > world_limit {
        return Err(MarketError::WorldLimitExceeded {
            worlds,
            limit: world_limit,
        });
    }
    let matches = slate.matches();
    let mut offsets = Vec::with_capacity(matches.len());
    let mut labels = Vec::new();
    for (match_index, m) in matches.iter().enumerate() {
        offsets.push(labels.len());
        labels.extend((0..m.outcomes()).map(|outcome| AssetLabel::Outcome {
            match_index,
            outcome,
        }));
    }
    labels.push(AssetLabel::Cash);
    let assets = labels.len();

    let mut payoff = vec![0.0; worlds * assets];
    let mut world_probs = vec![0.0; worlds];
    let mut digits = vec![0usize; matches.len()];
    for w in 0..worlds {
        let row = &mut payoff[w * assets..(w + 1) * assets];
        let mut prob = 1.0;
        for (j, m) in matches.iter().enumerate() {
            let r = digits[j];
            row[offsets[j] + r] = m.odds.as_slice()[r];
            prob *= m.player_probs.as_slice()[r];
        }
        row[assets - 1] = 1.0;
        world_probs[w] = prob;
        // advance the mixed-radix counter, last match least significant
        for j in (0..matches.len()).rev() {
            digits[j] += 1;
            if digits[j] < matches[j].outcomes() {
                break;
            }
            digits[j] = 0;
        }
    }
    let matrix = OddsMatrix {
        worlds,
        assets,
        payoff,
        world_probs,
        labels,
    };
    let excess = matrix.excess();
    Ok((matrix, excess))
}

/// Mean realized log-score advantage of the player over the de-margined
/// bookmaker; positive when the player predicts better.
pub fn kl_advantage(records: &[MatchRecord]) -> Result<f64, MarketError> {
    if records.is_empty() {
        return Err(MarketError::NoRecords);
    }
    let mut total = 0.0;
    for (i, record) in records.iter().enumerate() {
        let player = record.player_probs.as_slice()[record.result];
        let book = normalized_implied_probs(&record.odds).as_slice()[record.result];
        if player <= 0.0 || book <= 0.0 {
            return Err(MarketError::ZeroProbability {
                record: i,
                match_id: record.match_id.clone(),
            });
        }
        total += player.ln() - book.ln();
    }
    Ok(total / records.len() as f64)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_len(left: usize, right: usize) -> Result<(), MarketError> {
    if left != right {
        return Err(MarketError::LengthMismatch { left, right });
    }
    Ok(())
}
