//! Train/test splitting and survival-constrained grid search.
//!
//! A configuration survives when the 5th percentile of its wealth across
//! Monte-Carlo runs stays above 90% of the initial wealth. Among survivors
//! the highest median final wealth wins.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::RoundSlate;
use crate::simulation::{monte_carlo_variants, ProtocolConfig, SimulationError, WealthStats};
use crate::solver::SolveSettings;
use crate::strategies::{BaseStrategy, Family, FamilyParams, StrategyConfig};

/// Share of the initial wealth the 5th percentile must exceed.
pub const SURVIVAL_LEVEL: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TuningError {
    #[error("split leaves {train} training and {test} test rounds")]
    EmptySplit { train: usize, test: usize },
    #[error("train fraction {0} must lie in (0, 1)")]
    InvalidFraction(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
}

/// Chronological split: the first `floor(train_frac * rounds)` rounds train,
/// the rest test.
pub fn split(
    rounds: &[RoundSlate],
    train_frac: f64,
) -> Result<(Vec<RoundSlate>, Vec<RoundSlate>), TuningError> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(TuningError::InvalidFraction(train_frac));
    }
    let cut = (train_frac * rounds.len() as f64).floor() as usize;
    if cut == 0 || cut == rounds.len() {
        return Err(TuningError::EmptySplit {
            train: cut,
            test: rounds.len() - cut,
        });
    }
    Ok((rounds[..cut].to_vec(), rounds[cut..].to_vec()))
}

/// Which wealth the survival percentile is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SurvivalCriterion {
    /// Final wealth of each run.
    #[default]
    FinalWealth,
    /// Lowest wealth reached during each run.
    MinimumWealth,
}

/// Candidate values per hyperparameter. Parameters the family does not use
/// are ignored; missing ones take their [`FamilyParams`] default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub omega: Option<Vec<f64>>,
    pub m: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub eta: Option<Vec<f64>>,
}

fn steps(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| ((start + step * i as f64) * 1e6).round() / 1e6)
        .collect()
}

impl GridSpec {
    pub fn default_omega() -> Vec<f64> {
        steps(0.05, 0.05, 20)
    }

    pub fn default_m() -> Vec<f64> {
        let mut m = steps(0.01, 0.05, 20);
        m.push(1.0);
        m
    }

    /// Default grid over the parameters `family` uses.
    pub fn default_for(family: Family) -> Self {
        let mut g = GridSpec::default();
        for name in parameters(family) {
            let values = match *name {
                "omega" => Self::default_omega(),
                "m" => Self::default_m(),
                "gamma" => vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0],
                "alpha" => vec![0.5, 0.7, 0.9],
                "beta" => vec![0.01, 0.05, 0.1, 0.2],
                "eta" => vec![0.01, 0.05, 0.1, 0.2, 0.5],
                _ => unreachable!(),
            };
            *g.slot(name) = Some(values);
        }
        g
    }

    /// Grid over the fractional stake only.
    pub fn omega(values: Vec<f64>) -> Self {
        Self {
            omega: Some(values),
            ..Self::default()
        }
    }

    fn slot(&mut self, name: &str) -> &mut Option<Vec<f64>> {
        match name {
            "omega" => &mut self.omega,
            "m" => &mut self.m,
            "gamma" => &mut self.gamma,
            "alpha" => &mut self.alpha,
            "beta" => &mut self.beta,
            "eta" => &mut self.eta,
            _ => unreachable!("unknown hyperparameter {name}"),
        }
    }

    fn get(&self, name: &str) -> Option<&Vec<f64>> {
        match name {
            "omega" => self.omega.as_ref(),
            "m" => self.m.as_ref(),
            "gamma" => self.gamma.as_ref(),
            "alpha" => self.alpha.as_ref(),
            "beta" => self.beta.as_ref(),
            "eta" => self.eta.as_ref(),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), TuningError> {
        for name in ["omega", "m", "gamma", "alpha", "beta", "eta"] {
            let Some(values) = self.get(name) else { continue };
            if values.is_empty() {
                return Err(TuningError::InvalidGrid(format!("no values for {name}")));
            }
            let ok = |v: f64| match name {
                "gamma" => v >= 0.0 && v.is_finite(),
                _ => (0.0..=1.0).contains(&v),
            };
            if let Some(v) = values.iter().find(|v| !ok(**v)) {
                return Err(TuningError::InvalidGrid(format!("{name} = {v} out of range")));
            }
        }
        Ok(())
    }

    /// All configurations of the grid, in grid order.
    pub fn configs(&self, family: Family) -> Result<Vec<StrategyConfig>, TuningError> {
        self.validate()?;
        let used = parameters(family);
        if !used.is_empty() && used.iter().all(|p| self.get(p).is_none()) {
            return Err(TuningError::InvalidGrid(format!(
                "grid sets none of {} for {family}",
                used.join(", ")
            )));
        }
        let mut points = vec![FamilyParams::default()];
        for name in used {
            let Some(values) = self.get(name) else { continue };
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p;
                        *param_mut(&mut q, name) = *v;
                        q
                    })
                })
                .collect();
        }
        let configs: Vec<StrategyConfig> = points.iter().map(|p| family.config(p)).collect();
        for c in &configs {
            c.validate()
                .map_err(|e| TuningError::InvalidGrid(e.to_string()))?;
        }
        Ok(configs)
    }
}

fn parameters(family: Family) -> &'static [&'static str] {
    match family {
        Family::MaxEvFrac | Family::KellyFrac | Family::MSharpeFrac => &["omega"],
        Family::KellyFracMax | Family::MSharpeFracMax => &["omega", "m"],
        Family::Mpt => &["gamma"],
        Family::KellyDrawdown => &["alpha", "beta"],
        Family::KellyRobust => &["eta"],
        Family::AbsDisc | Family::Kelly | Family::KellyQuadratic | Family::MSharpe => &[],
    }
}

fn param_mut<'a>(p: &'a mut FamilyParams, name: &str) -> &'a mut f64 {
    match name {
        "omega" => &mut p.omega,
        "m" => &mut p.m,
        "gamma" => &mut p.gamma,
        "alpha" => &mut p.alpha,
        "beta" => &mut p.beta,
        "eta" => &mut p.eta,
        _ => unreachable!("unknown hyperparameter {name}"),
    }
}

/// Train statistics of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub config: StrategyConfig,
    pub stats: WealthStats,
    /// 5th percentile used by the survival test.
    pub q5: f64,
    pub survives: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub best: StrategyConfig,
    pub stats: WealthStats,
    pub q5: f64,
    /// False when no grid point survived; `best` is then the highest median.
    pub feasible: bool,
    pub evaluated: usize,
    pub points: Vec<GridPoint>,
}

/// Tie-break key: smaller stake fraction, then smaller cap, then the
/// remaining hyperparameters in order.
fn tie_key(config: &StrategyConfig) -> Vec<f64> {
    let mut key = vec![
        config.omega().unwrap_or(f64::INFINITY),
        config.max_limit().unwrap_or(f64::INFINITY),
    ];
    key.extend(config.hyperparameters().into_iter().map(|(_, v)| v));
    key
}

fn better(a: &GridPoint, b: &GridPoint) -> bool {
    match a.stats.median.total_cmp(&b.stats.median) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => {
            let (ka, kb) = (tie_key(&a.config), tie_key(&b.config));
            ka.iter()
                .zip(&kb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .is_some_and(|o| o.is_lt())
        }
    }
}

/// Evaluates every grid point on the training rounds and selects the best
/// survivor. Points sharing a base strategy are simulated together so the
/// base portfolios are solved once.
pub fn grid_search(
    family: Family,
    grid: &GridSpec,
    train: &[RoundSlate],
    protocol: &ProtocolConfig,
    settings: &SolveSettings,
    criterion: SurvivalCriterion,
) -> Result<SelectionResult, TuningError> {
    let configs = grid.configs(family)?;
    let mut groups: Vec<(BaseStrategy, Vec<usize>)> = Vec::new();
    for (i, c) in configs.iter().enumerate() {
        match groups.iter_mut().find(|(b, _)| *b == c.base) {
            Some((_, members)) => members.push(i),
            None => groups.push((c.base, vec![i])),
        }
    }
    let mut points: Vec<Option<GridPoint>> = vec![None; configs.len()];
    let threshold = SURVIVAL_LEVEL * protocol.initial_wealth;
    for (base, members) in &groups {
        let variants: Vec<_> = members.iter().map(|&i| configs[i].wrappers.clone()).collect();
        let results = monte_carlo_variants(train, base, &variants, protocol, settings, false)?;
        for (&i, result) in members.iter().zip(results) {
            let q5 = match criterion {
                SurvivalCriterion::FinalWealth => result.q5_final(),
                SurvivalCriterion::MinimumWealth => result.q5_minimum(),
            };
            points[i] = Some(GridPoint {
                config: configs[i].clone(),
                stats: result.stats,
                q5,
                survives: q5 > threshold,
            });
        }
    }
    let points: Vec<GridPoint> = points.into_iter().map(|p| p.expect("evaluated")).collect();
    let pick = |survivors_only: bool| {
        points
            .iter()
            .filter(|p| !survivors_only || p.survives)
            .fold(None::<&GridPoint>, |best, p| match best {
                Some(b) if !better(p, b) => Some(b),
                _ => Some(p),
            })
    };
    let (chosen, feasible) = match pick(true) {
        Some(p) => (p, true),
        None => (pick(false).expect("grid is non-empty"), false),
    };
    Ok(SelectionResult {
        best: chosen.config.clone(),
        stats: chosen.stats,
        q5: chosen.q5,
        feasible,
        evaluated: points.len(),
        points: points.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{MatchRecord, OddsVector, OutcomeProbs};
    use crate::strategies::Wrapper;

    fn rounds(n: usize) -> Vec<RoundSlate> {
        (0..n)
            .map(|i| {
                RoundSlate::new(vec![MatchRecord::new(
                    format!("m{i}"),
                    format!("r{i}"),
                    OddsVector::new(vec![2.0, 2.0]).unwrap(),
                    OutcomeProbs::new(vec![0.7, 0.3]).unwrap(),
                    usize::from(i % 3 == 0),
                )
                .unwrap()])
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn split_sizes() {
        let (a, b) = split(&rounds(10), 0.5).unwrap();
        assert_eq!((a.len(), b.len()), (5, 5));
        assert_eq!(a[0].round_id(), "r0");
        assert_eq!(b[0].round_id(), "r5");
        let (a, b) = split(&rounds(3), 0.9).unwrap();
        assert_eq!((a.len(), b.len()), (2, 1));
        assert!(matches!(
            split(&rounds(1), 0.5),
            Err(TuningError::EmptySplit { train: 0, test: 1 })
        ));
        assert!(split(&rounds(4), 1.0).is_err());
    }

    #[test]
    fn default_grids() {
        let g = GridSpec::default_for(Family::KellyFracMax);
        assert_eq!(g.omega.as_ref().unwrap().len(), 20);
        assert_eq!(g.omega.as_ref().unwrap()[19], 1.0);
        let m = g.m.as_ref().unwrap();
        assert_eq!((m[0], m[1], m[19], m[20]), (0.01, 0.06, 0.96, 1.0));
        assert_eq!(g.configs(Family::KellyFracMax).unwrap().len(), 420);
        assert_eq!(
            GridSpec::default_for(Family::KellyDrawdown)
                .configs(Family::KellyDrawdown)
                .unwrap()
                .len(),
            12
        );
        assert_eq!(
            GridSpec::default().configs(Family::Kelly).unwrap(),
            vec![Family::Kelly.default_config()]
        );
    }

    #[test]
    fn invalid_grids() {
        assert!(GridSpec::omega(vec![]).configs(Family::KellyFrac).is_err());
        assert!(GridSpec::omega(vec![1.5]).configs(Family::KellyFrac).is_err());
        assert!(GridSpec::default().configs(Family::KellyFrac).is_err());
    }

    #[test]
    fn cash_point_is_always_feasible() {
        let protocol = ProtocolConfig {
            runs: 20,
            group_size: 1,
            ..ProtocolConfig::default()
        };
        let r = grid_search(
            Family::KellyFrac,
            &GridSpec::omega(vec![0.0]),
            &rounds(30),
            &protocol,
            &SolveSettings::default(),
            SurvivalCriterion::FinalWealth,
        )
        .unwrap();
        assert!(r.feasible);
        assert_eq!(r.q5, 1.0);
        assert_eq!(r.evaluated, 1);
        assert_eq!(r.best.wrappers, vec![Wrapper::Fraction(0.0)]);
    }
}
