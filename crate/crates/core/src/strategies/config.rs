use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{apply_fraction, apply_max_limit, Portfolio, StrategyError};

/// Portfolio rule before any risk wrapper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum BaseStrategy {
    AbsDisc,
    MaxEvFrac { omega: f64 },
    Kelly,
    KellyQuadratic,
    Mpt { gamma: f64 },
    MaxSharpe,
    KellyDrawdown { alpha: f64, beta: f64 },
    KellyRobust { eta: f64 },
}

impl BaseStrategy {
    pub fn is_informal(&self) -> bool {
        matches!(self, Self::AbsDisc | Self::MaxEvFrac { .. })
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        let bad = |name, value| Err(StrategyError::InvalidParameter { name, value });
        match *self {
            Self::MaxEvFrac { omega } if !(0.0..=1.0).contains(&omega) => bad("omega", omega),
            Self::Mpt { gamma } if !(gamma >= 0.0 && gamma.is_finite()) => bad("gamma", gamma),
            Self::KellyDrawdown { alpha, .. } if !(alpha > 0.0 && alpha < 1.0) => {
                bad("alpha", alpha)
            }
            Self::KellyDrawdown { beta, .. } if !(beta > 0.0 && beta <= 1.0) => bad("beta", beta),
            Self::KellyRobust { eta } if !(eta >= 0.0 && eta.is_finite()) => bad("eta", eta),
            _ => Ok(()),
        }
    }
}

/// Post-processing applied to a base portfolio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Wrapper {
    /// Scale the risky part by `omega`.
    Fraction(f64),
    /// Cap each risky stake at `m`.
    MaxLimit(f64),
}

impl Wrapper {
    pub fn apply(&self, portfolio: &Portfolio) -> Portfolio {
        match *self {
            Self::Fraction(omega) => apply_fraction(portfolio, omega),
            Self::MaxLimit(m) => apply_max_limit(portfolio, m),
        }
    }

    fn validate(&self) -> Result<(), StrategyError> {
        match *self {
            Self::Fraction(omega) if !(0.0..=1.0).contains(&omega) => {
                Err(StrategyError::InvalidParameter {
                    name: "omega",
                    value: omega,
                })
            }
            Self::MaxLimit(m) if !(0.0..=1.0).contains(&m) => {
                Err(StrategyError::InvalidParameter { name: "m", value: m })
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub base: BaseStrategy,
    #[serde(default)]
    pub wrappers: Vec<Wrapper>,
}

impl StrategyConfig {
    pub fn new(base: BaseStrategy) -> Self {
        Self {
            base,
            wrappers: Vec::new(),
        }
    }

    pub fn with(mut self, wrapper: Wrapper) -> Self {
        self.wrappers.push(wrapper);
        self
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        self.base.validate()?;
        self.wrappers.iter().try_for_each(Wrapper::validate)
    }

    pub fn apply_wrappers(&self, mut portfolio: Portfolio) -> Portfolio {
        for w in &self.wrappers {
            portfolio = w.apply(&portfolio);
        }
        portfolio
    }

    /// Fraction parameter of the first `Fraction` wrapper, or of MaxEvFrac.
    pub fn omega(&self) -> Option<f64> {
        self.wrappers
            .iter()
            .find_map(|w| match w {
                Wrapper::Fraction(o) => Some(*o),
                Wrapper::MaxLimit(_) => None,
            })
            .or(match self.base {
                BaseStrategy::MaxEvFrac { omega } => Some(omega),
                _ => None,
            })
    }

    pub fn max_limit(&self) -> Option<f64> {
        self.wrappers.iter().find_map(|w| match w {
            Wrapper::MaxLimit(m) => Some(*m),
            Wrapper::Fraction(_) => None,
        })
    }

    /// Hyperparameters as `name=value` pairs, in a stable order.
    pub fn hyperparameters(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        match self.base {
            BaseStrategy::MaxEvFrac { omega } => out.push(("omega", omega)),
            BaseStrategy::Mpt { gamma } => out.push(("gamma", gamma)),
            BaseStrategy::KellyDrawdown { alpha, beta } => {
                out.push(("alpha", alpha));
                out.push(("beta", beta));
            }
            BaseStrategy::KellyRobust { eta } => out.push(("eta", eta)),
            _ => {}
        }
        for w in &self.wrappers {
            match *w {
                Wrapper::Fraction(o) => out.push(("omega", o)),
                Wrapper::MaxLimit(m) => out.push(("m", m)),
            }
        }
        out
    }
}

/// The named strategies of the evaluation tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    AbsDisc,
    MaxEvFrac,
    Kelly,
    KellyQuadratic,
    #[serde(rename = "MPT")]
    Mpt,
    MSharpe,
    KellyFrac,
    MSharpeFrac,
    KellyFracMax,
    MSharpeFracMax,
    #[serde(alias = "KellyDD")]
    KellyDrawdown,
    #[serde(alias = "KellyDR")]
    KellyRobust,
}

impl Family {
    pub const ALL: [Family; 12] = [
        Family::AbsDisc,
        Family::MaxEvFrac,
        Family::Kelly,
        Family::KellyQuadratic,
        Family::Mpt,
        Family::MSharpe,
        Family::KellyFrac,
        Family::MSharpeFrac,
        Family::KellyFracMax,
        Family::MSharpeFracMax,
        Family::KellyDrawdown,
        Family::KellyRobust,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::AbsDisc => "AbsDisc",
            Family::MaxEvFrac => "MaxEvFrac",
            Family::Kelly => "Kelly",
            Family::KellyQuadratic => "KellyQuadratic",
            Family::Mpt => "MPT",
            Family::MSharpe => "MSharpe",
            Family::KellyFrac => "KellyFrac",
            Family::MSharpeFrac => "MSharpeFrac",
            Family::KellyFracMax => "KellyFracMax",
            Family::MSharpeFracMax => "MSharpeFracMax",
            Family::KellyDrawdown => "KellyDrawdown",
            Family::KellyRobust => "KellyRobust",
        }
    }

    /// Whether the family has hyperparameters to tune.
    pub fn is_tunable(&self) -> bool {
        !matches!(
            self,
            Family::AbsDisc | Family::Kelly | Family::KellyQuadratic | Family::MSharpe
        )
    }

    /// Default configuration: fractions and limits at 1, risk parameters at
    /// moderate values.
    pub fn default_config(&self) -> StrategyConfig {
        self.config(&FamilyParams::default())
    }

    /// Builds the configuration of this family from a parameter set; unused
    /// parameters are ignored.
    pub fn config(&self, p: &FamilyParams) -> StrategyConfig {
        use BaseStrategy as B;
        let frac = Wrapper::Fraction(p.omega);
        let cap = Wrapper::MaxLimit(p.m);
        match self {
            Family::AbsDisc => StrategyConfig::new(B::AbsDisc),
            Family::MaxEvFrac => StrategyConfig::new(B::MaxEvFrac { omega: p.omega }),
            Family::Kelly => StrategyConfig::new(B::Kelly),
            Family::KellyQuadratic => StrategyConfig::new(B::KellyQuadratic),
            Family::Mpt => StrategyConfig::new(B::Mpt { gamma: p.gamma }),
            Family::MSharpe => StrategyConfig::new(B::MaxSharpe),
            Family::KellyFrac => StrategyConfig::new(B::Kelly).with(frac),
            Family::MSharpeFrac => StrategyConfig::new(B::MaxSharpe).with(frac),
            Family::KellyFracMax => StrategyConfig::new(B::Kelly).with(frac).with(cap),
            Family::MSharpeFracMax => StrategyConfig::new(B::MaxSharpe).with(frac).with(cap),
            Family::KellyDrawdown => StrategyConfig::new(B::KellyDrawdown {
                alpha: p.alpha,
                beta: p.beta,
            }),
            Family::KellyRobust => StrategyConfig::new(B::KellyRobust { eta: p.eta }),
        }
    }
}

/// Hyperparameter values used to instantiate a [`Family`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyParams {
    pub omega: f64,
    pub m: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
}

impl Default for FamilyParams {
    fn default() -> Self {
        Self {
            omega: 1.0,
            m: 1.0,
            gamma: 1.0,
            alpha: 0.7,
            beta: 0.1,
            eta: 0.1,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown strategy family `{0}`")]
pub struct UnknownFamily(pub String);

impl FromStr for Family {
    type Err = UnknownFamily;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase();
        Family::ALL
            .into_iter()
            .find(|f| f.name().to_ascii_lowercase() == key)
            .or(match key.as_str() {
                "kellydd" => Some(Family::KellyDrawdown),
                "kellydr" => Some(Family::KellyRobust),
                "msharpefraction" => Some(Family::MSharpeFrac),
                _ => None,
            })
            .ok_or_else(|| UnknownFamily(s.to_string()))
    }
}
