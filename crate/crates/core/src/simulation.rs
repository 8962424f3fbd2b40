//! Multiplicative-bankroll backtesting.
//!
//! A trajectory reinvests the whole bankroll every round: the portfolio of
//! the round is settled against the realized outcomes and wealth is
//! multiplied by the payoff. The Monte-Carlo protocol repeatedly drops a
//! share of the matches at random, reshuffles the rest, regroups them into
//! rounds of parallel matches and replays the strategy.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{dot, MatchRecord, OddsMatrix, RoundSlate, DEFAULT_WORLD_LIMIT};
use crate::solver::SolveSettings;
use crate::strategies::{
    base_portfolio, BaseStrategy, Portfolio, StrategyConfig, StrategyError, Wrapper,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("dataset has no matches")]
    EmptyDataset,
    #[error("invalid protocol: {0}")]
    InvalidProtocol(&'static str),
    #[error("strategy failed in round {round} (first match {match_id}): {source}")]
    Strategy {
        round: usize,
        match_id: String,
        #[source]
        source: StrategyError,
    },
}

/// Parameters of the evaluation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub runs: usize,
    /// Share of matches removed at random in every run.
    pub drop_fraction: f64,
    /// Matches per round; 1 plays the matches sequentially.
    pub group_size: usize,
    pub initial_wealth: f64,
    /// Ruin threshold as a fraction of the initial wealth.
    pub ruin_fraction: f64,
    pub seed: u64,
    /// Reshuffle match order in every run. Disabling keeps the dataset
    /// order, which makes runs differ only in the dropped matches.
    pub shuffle: bool,
    pub world_limit: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            runs: 1000,
            drop_fraction: 0.10,
            group_size: 10,
            initial_wealth: 1.0,
            ruin_fraction: 1e-4,
            seed: 0,
            shuffle: true,
            world_limit: DEFAULT_WORLD_LIMIT,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.runs == 0 {
            return Err(SimulationError::InvalidProtocol("runs must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.drop_fraction) {
            return Err(SimulationError::InvalidProtocol(
                "drop fraction must lie in [0, 1)",
            ));
        }
        if self.group_size == 0 {
            return Err(SimulationError::InvalidProtocol("group size must be >= 1"));
        }
        if !(self.initial_wealth > 0.0 && self.initial_wealth.is_finite()) {
            return Err(SimulationError::InvalidProtocol(
                "initial wealth must be positive",
            ));
        }
        if !(self.ruin_fraction >= 0.0 && self.ruin_fraction < 1.0) {
            return Err(SimulationError::InvalidProtocol(
                "ruin fraction must lie in [0, 1)",
            ));
        }
        Ok(())
    }

    fn ruin_level(&self) -> f64 {
        self.ruin_fraction * self.initial_wealth
    }
}

/// Wealth after each settled round, starting with the initial wealth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WealthTrajectory {
    pub wealth: Vec<f64>,
    pub ruined: bool,
}

impl WealthTrajectory {
    pub fn final_wealth(&self) -> f64 {
        *self.wealth.last().expect("trajectory starts with the initial wealth")
    }

    pub fn min(&self) -> f64 {
        self.wealth.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.wealth.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Summary of a set of trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WealthStats {
    pub median: f64,
    pub mean: f64,
    /// Minimum over all trajectories and all rounds.
    pub min: f64,
    /// Maximum over all trajectories and all rounds.
    pub max: f64,
    /// Population standard deviation of the final wealth.
    pub sigma: f64,
    pub ruin_pct: f64,
}

/// Per-round percentiles of wealth across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub t: usize,
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

/// Outcome of a Monte-Carlo evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub stats: WealthStats,
    /// Empty unless trajectories were kept.
    pub bands: Vec<BandRow>,
    pub finals: Vec<f64>,
    /// Lowest wealth reached by each run.
    pub minima: Vec<f64>,
}

impl MonteCarloResult {
    /// Nearest-rank 5th percentile of the final wealth.
    pub fn q5_final(&self) -> f64 {
        nearest_rank(&sorted(&self.finals), 5.0)
    }

    /// Nearest-rank 5th percentile of the per-run minimum wealth.
    pub fn q5_minimum(&self) -> f64 {
        nearest_rank(&sorted(&self.minima), 5.0)
    }
}

/// Wealth multiplier `O_world . f`.
pub fn settle_round(portfolio: &Portfolio, matrix: &OddsMatrix, world: usize) -> f64 {
    dot(matrix.row(world), portfolio.fractions())
}

/// Wealth multiplier of a slate portfolio given each match's result,
/// without enumerating the joint worlds.
pub fn settle_slate(portfolio: &Portfolio, matches: &[&MatchRecord]) -> f64 {
    let f = portfolio.fractions();
    let mut offset = 0;
    let mut total = portfolio.cash();
    for m in matches {
        total += f[offset + m.result] * m.odds.as_slice()[m.result];
        offset += m.outcomes();
    }
    total
}

/// Nearest-rank percentile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    let rank = ((pct / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn population_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Summary statistics of complete trajectories.
pub fn compute_stats(trajectories: &[WealthTrajectory]) -> WealthStats {
    let outcomes: Vec<RunOutcome> = trajectories
        .iter()
        .map(|t| RunOutcome {
            last: t.final_wealth(),
            min: t.min(),
            max: t.max(),
            ruined: t.ruined,
            path: None,
        })
        .collect();
    stats_of(&outcomes)
}

fn stats_of(outcomes: &[RunOutcome]) -> WealthStats {
    assert!(!outcomes.is_empty(), "statistics of an empty run set");
    let finals: Vec<f64> = outcomes.iter().map(|o| o.last).collect();
    let ordered = sorted(&finals);
    WealthStats {
        median: median(&ordered),
        mean: finals.iter().sum::<f64>() / finals.len() as f64,
        min: outcomes.iter().map(|o| o.min).fold(f64::INFINITY, f64::min),
        max: outcomes.iter().map(|o| o.max).fold(f64::NEG_INFINITY, f64::max),
        sigma: population_sd(&finals),
        ruin_pct: 100.0 * outcomes.iter().filter(|o| o.ruined).count() as f64
            / outcomes.len() as f64,
    }
}

/// Percentile bands over runs, aligned by round index and truncated to the
/// shortest trajectory.
pub fn percentile_bands(paths: &[&[f64]]) -> Vec<BandRow> {
    let Some(len) = paths.iter().map(|p| p.len()).min() else {
        return Vec::new();
    };
    let mut column = vec![0.0; paths.len()];
    (0..len)
        .map(|t| {
            for (c, p) in column.iter_mut().zip(paths) {
                *c = p[t];
            }
            column.sort_by(f64::total_cmp);
            BandRow {
                t,
                p5: nearest_rank(&column, 5.0),
                p25: nearest_rank(&column, 25.0),
                p50: nearest_rank(&column, 50.0),
                p75: nearest_rank(&column, 75.0),
                p95: nearest_rank(&column, 95.0),
            }
        })
        .collect()
}

/// Wealth bookkeeping of one run of one strategy variant.
#[derive(Debug, Clone)]
struct RunOutcome {
    last: f64,
    min: f64,
    max: f64,
    ruined: bool,
    path: Option<Vec<f64>>,
}

struct Account {
    wealth: f64,
    ruin_level: f64,
    outcome: RunOutcome,
}

impl Account {
    fn new(protocol: &ProtocolConfig, keep_path: bool, rounds: usize) -> Self {
        let w0 = protocol.initial_wealth;
        Self {
            wealth: w0,
            ruin_level: protocol.ruin_level(),
            outcome: RunOutcome {
                last: w0,
                min: w0,
                max: w0,
                ruined: false,
                path: keep_path.then(|| {
                    let mut v = Vec::with_capacity(rounds + 1);
                    v.push(w0);
                    v
                }),
            },
        }
    }

    fn settle(&mut self, multiplier: f64) {
        if !self.outcome.ruined {
            self.wealth *= multiplier.max(0.0);
            if self.wealth < self.ruin_level {
                self.outcome.ruined = true;
            }
        }
        let o = &mut self.outcome;
        o.last = self.wealth;
        o.min = o.min.min(self.wealth);
        o.max = o.max.max(self.wealth);
        if let Some(p) = o.path.as_mut() {
            p.push(self.wealth);
        }
    }

    fn finish(self) -> RunOutcome {
        self.outcome
    }
}

/// Replays `config` over the given rounds in order.
///
/// Once wealth falls below the ruin level, the trajectory is frozen.
pub fn run_trajectory(
    rounds: &[RoundSlate],
    config: &StrategyConfig,
    protocol: &ProtocolConfig,
    settings: &SolveSettings,
) -> Result<WealthTrajectory, SimulationError> {
    protocol.validate()?;
    config
        .validate()
        .map_err(|source| strategy_error(0, rounds.first(), source))?;
    let mut account = Account::new(protocol, true, rounds.len());
    for (i, slate) in rounds.iter().enumerate() {
        if account.outcome.ruined {
            account.settle(1.0);
            continue;
        }
        let base = base_portfolio(&config.base, slate, settings, protocol.world_limit)
            .map_err(|source| strategy_error(i, Some(slate), source))?;
        let portfolio = config.apply_wrappers(base);
        let matches: Vec<&MatchRecord> = slate.matches().iter().collect();
        account.settle(settle_slate(&portfolio, &matches));
    }
    let outcome = account.finish();
    Ok(WealthTrajectory {
        wealth: outcome.path.expect("path is kept"),
        ruined: outcome.ruined,
    })
}

fn strategy_error(round: usize, slate: Option<&RoundSlate>, source: StrategyError) -> SimulationError {
    SimulationError::Strategy {
        round,
        match_id: slate
            .and_then(|s| s.matches().first())
            .map(|m| m.match_id.clone())
            .unwrap_or_default(),
        source,
    }
}

/// Monte-Carlo evaluation of one strategy.
pub fn monte_carlo(
    dataset: &[RoundSlate],
    config: &StrategyConfig,
    protocol: &ProtocolConfig,
    settings: &SolveSettings,
) -> Result<MonteCarloResult, SimulationError> {
    let mut out = monte_carlo_variants(
        dataset,
        &config.base,
        std::slice::from_ref(&config.wrappers),
        protocol,
        settings,
        true,
    )?;
    Ok(out.remove(0))
}

/// Evaluates several wrapper stacks over one base strategy with common
/// random numbers; every variant sees the same matches in the same order
/// and the base portfolio of each round is computed once.
///
/// Percentile bands are only computed when `keep_paths` is set.
pub fn monte_carlo_variants(
    dataset: &[RoundSlate],
    base: &BaseStrategy,
    variants: &[Vec<Wrapper>],
    protocol: &ProtocolConfig,
    settings: &SolveSettings,
    keep_paths: bool,
) -> Result<Vec<MonteCarloResult>, SimulationError> {
    protocol.validate()?;
    let records: Vec<&MatchRecord> = dataset.iter().flat_map(|s| s.matches()).collect();
    if records.is_empty() {
        return Err(SimulationError::EmptyDataset);
    }
    for wrappers in variants {
        StrategyConfig {
            base: *base,
            wrappers: wrappers.clone(),
        }
        .validate()
        .map_err(|source| strategy_error(0, dataset.first(), source))?;
    }

    // Per-match portfolios are reused across runs whenever the strategy
    // decides each match on its own.
    let per_match = base.is_informal() || protocol.group_size == 1;
    let cache: Option<Vec<Portfolio>> = if per_match {
        Some(
            records
                .par_iter()
                .enumerate()
                .map(|(i, m)| {
                    let slate = RoundSlate::regrouped(m.round_id.clone(), vec![(*m).clone()])
                        .expect("one match");
                    base_portfolio(base, &slate, settings, protocol.world_limit)
                        .map_err(|source| strategy_error(i, Some(&slate), source))
                })
                .collect::<Result<_, _>>()?,
        )
    } else {
        None
    };
    // With one match per round the multiplier of every (match, variant) pair
    // is fixed.
    let fixed: Option<Vec<Vec<f64>>> = match (&cache, protocol.group_size) {
        (Some(cache), 1) => Some(
            variants
                .iter()
                .map(|wrappers| {
                    records
                        .iter()
                        .zip(cache)
                        .map(|(m, p)| settle_slate(&wrap(p.clone(), wrappers), &[m]))
                        .collect()
                })
                .collect(),
        ),
        _ => None,
    };

    let n = records.len();
    let keep = n - (protocol.drop_fraction * n as f64).floor() as usize;
    let rounds = keep.div_ceil(protocol.group_size);
    let runs: Vec<Vec<RunOutcome>> = (0..protocol.runs)
        .into_par_iter()
        .map(|r| {
            let order = run_order(n, keep, protocol.seed.wrapping_add(r as u64), protocol.shuffle);
            let mut accounts: Vec<Account> = variants
                .iter()
                .map(|_| Account::new(protocol, keep_paths, rounds))
                .collect();
            if let Some(fixed) = &fixed {
                for &j in &order {
                    for (account, table) in accounts.iter_mut().zip(fixed) {
                        account.settle(table[j]);
                    }
                }
                return Ok(accounts.into_iter().map(Account::finish).collect());
            }
            for (round, chunk) in order.chunks(protocol.group_size).enumerate() {
                if accounts.iter().all(|a| a.outcome.ruined) {
                    accounts.iter_mut().for_each(|a| a.settle(1.0));
                    continue;
                }
                let matches: Vec<&MatchRecord> = chunk.iter().map(|&j| records[j]).collect();
                let base_p = match &cache {
                    Some(cache) => combine(chunk.iter().map(|&j| &cache[j])),
                    None => {
                        let slate = RoundSlate::regrouped(
                            format!("run{r}-{round}"),
                            matches.iter().map(|m| (*m).clone()).collect(),
                        )
                        .expect("non-empty chunk");
                        base_portfolio(base, &slate, settings, protocol.world_limit)
                            .map_err(|source| strategy_error(round, Some(&slate), source))?
                    }
                };
                for (account, wrappers) in accounts.iter_mut().zip(variants) {
                    let multiplier = settle_slate(&wrap(base_p.clone(), wrappers), &matches);
                    account.settle(multiplier);
                }
            }
            Ok(accounts.into_iter().map(Account::finish).collect())
        })
        .collect::<Result<_, SimulationError>>()?;

    Ok((0..variants.len())
        .map(|v| {
            let outcomes: Vec<RunOutcome> = runs.iter().map(|run| run[v].clone()).collect();
            let bands = if keep_paths {
                let paths: Vec<&[f64]> = outcomes
                    .iter()
                    .map(|o| o.path.as_deref().unwrap_or_default())
                    .collect();
                percentile_bands(&paths)
            } else {
                Vec::new()
            };
            MonteCarloResult {
                stats: stats_of(&outcomes),
                bands,
                finals: outcomes.iter().map(|o| o.last).collect(),
                minima: outcomes.iter().map(|o| o.min).collect(),
            }
        })
        .collect())
}

fn wrap(mut portfolio: Portfolio, wrappers: &[Wrapper]) -> Portfolio {
    for w in wrappers {
        portfolio = w.apply(&portfolio);
    }
    portfolio
}

/// Equal-wealth combination of per-match portfolios.
fn combine<'a>(parts: impl ExactSizeIterator<Item = &'a Portfolio>) -> Portfolio {
    let share = 1.0 / parts.len() as f64;
    let mut out = Vec::new();
    let mut cash = 0.0;
    for p in parts {
        if share == 1.0 {
            return p.clone();
        }
        out.extend(p.risky().iter().map(|f| f * share));
        cash += p.cash() * share;
    }
    out.push(cash);
    Portfolio::from_solution(out)
}

/// Indices of the matches played in one run, in play order.
fn run_order(n: usize, keep: usize, seed: u64, shuffle: bool) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if shuffle {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        order.truncate(keep);
        order
    } else {
        let mut order = index::sample(&mut rng, n, keep).into_vec();
        order.sort_unstable();
        order
    }
}
