//! Run configuration: a JSON file merged with command-line overrides.

use std::path::{Path, PathBuf};

use betport_core::data::read_csv_file;
use betport_core::market::group_into_rounds;
use betport_core::strategies::FamilyParams;
use betport_core::{
    generate_synthetic, Family, GridSpec, MatchRecord, Preset, ProtocolConfig, RoundSlate,
    StrategyConfig, SurvivalCriterion, SyntheticConfig,
};
use serde::{Deserialize, Serialize};

use crate::UsageError;

/// Where the matches come from: a CSV file or a synthetic preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSource {
    pub csv: Option<PathBuf>,
    pub preset: Option<Preset>,
    pub matches: Option<usize>,
    pub seed: Option<u64>,
    pub margin: Option<f64>,
    pub book_noise: Option<f64>,
    pub player_noise: Option<f64>,
    pub round_size: Option<usize>,
}

impl DatasetSource {
    /// Generator settings for a preset source.
    pub fn synthetic(&self, default_seed: u64) -> Result<SyntheticConfig, UsageError> {
        let preset = self
            .preset
            .ok_or_else(|| UsageError::new("no dataset: give a preset or a CSV path"))?;
        let base = preset.config(
            self.matches.unwrap_or_else(|| preset.default_matches()),
            self.seed.unwrap_or(default_seed),
        );
        let cfg = SyntheticConfig {
            margin: self.margin.unwrap_or(base.margin),
            book_noise: self.book_noise.unwrap_or(base.book_noise),
            player_noise: self.player_noise.unwrap_or(base.player_noise),
            round_size: self.round_size.unwrap_or(base.round_size),
            ..base
        };
        cfg.validate().map_err(|e| UsageError::new(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(&self, default_seed: u64) -> anyhow::Result<Vec<MatchRecord>> {
        match (&self.csv, self.preset) {
            (Some(_), Some(_)) => Err(UsageError::new("give either a CSV path or a preset, not both").into()),
            (Some(path), None) => Ok(read_csv_file(path)?),
            (None, _) => Ok(generate_synthetic(&self.synthetic(default_seed)?)?.0),
        }
    }
}

/// One strategy entry: a family with fixed parameters or a grid, or an
/// explicit configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    /// Label used in output rows and file names.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub family: Option<Family>,
    #[serde(default)]
    pub params: Option<FamilyParams>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub config: Option<StrategyConfig>,
}

impl StrategySpec {
    pub fn family(family: Family) -> Self {
        Self {
            name: None,
            family: Some(family),
            params: None,
            grid: None,
            config: None,
        }
    }

    pub fn label(&self) -> String {
        match (&self.name, self.family) {
            (Some(n), _) => n.clone(),
            (None, Some(f)) => f.name().to_string(),
            (None, None) => "custom".to_string(),
        }
    }

    /// Fixed configuration for a backtest.
    pub fn fixed(&self) -> Result<StrategyConfig, UsageError> {
        if self.grid.is_some() {
            return Err(UsageError::new(format!(
                "strategy `{}` has a grid; use `tune`",
                self.label()
            )));
        }
        let config = match (&self.config, self.family) {
            (Some(c), None) => c.clone(),
            (None, Some(f)) => f.config(&self.params.unwrap_or_default()),
            _ => {
                return Err(UsageError::new(format!(
                    "strategy `{}` needs exactly one of `family` or `config`",
                    self.label()
                )))
            }
        };
        config
            .validate()
            .map_err(|e| UsageError::new(format!("strategy `{}`: {e}", self.label())))?;
        Ok(config)
    }

    /// Family and grid for tuning; the family's default grid when none is
    /// given.
    pub fn tunable(&self) -> Result<(Family, GridSpec), UsageError> {
        let family = match (self.family, &self.config) {
            (Some(f), None) => f,
            _ => {
                return Err(UsageError::new(format!(
                    "strategy `{}`: tuning needs a `family`",
                    self.label()
                )))
            }
        };
        let grid = self.grid.clone().unwrap_or_else(|| GridSpec::default_for(family));
        grid.validate().map_err(|e| UsageError::new(e.to_string()))?;
        Ok((family, grid))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfiguration {
    pub dataset: DatasetSource,
    pub strategies: Vec<StrategySpec>,
    pub protocol: Option<ProtocolConfig>,
    pub train_frac: Option<f64>,
    pub out: Option<PathBuf>,
    pub plots: bool,
    pub survival: SurvivalCriterion,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub runs: Option<usize>,
    pub group_size: Option<usize>,
    pub train_frac: Option<f64>,
    pub plots: bool,
}

pub const DEFAULT_TRAIN_FRAC: f64 = 0.5;

/// Fully resolved settings of a run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub dataset: DatasetSource,
    pub strategies: Vec<StrategySpec>,
    pub protocol: ProtocolConfig,
    pub train_frac: f64,
    pub out: PathBuf,
    pub plots: bool,
    pub survival: SurvivalCriterion,
}

impl RunConfiguration {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| UsageError::new(format!("{}: {e}", path.display())).into())
    }

    pub fn resolve(self, o: &Overrides) -> Result<Resolved, UsageError> {
        let mut protocol = self.protocol.unwrap_or_default();
        if let Some(seed) = o.seed {
            protocol.seed = seed;
        }
        if let Some(runs) = o.runs {
            protocol.runs = runs;
        }
        if let Some(g) = o.group_size {
            protocol.group_size = g;
        }
        protocol.validate().map_err(|e| UsageError::new(e.to_string()))?;
        let train_frac = o.train_frac.or(self.train_frac).unwrap_or(DEFAULT_TRAIN_FRAC);
        if !(train_frac > 0.0 && train_frac < 1.0) {
            return Err(UsageError::new(format!(
                "train fraction {train_frac} must lie in (0, 1)"
            )));
        }
        let mut dataset = self.dataset;
        if dataset.seed.is_none() {
            dataset.seed = o.seed;
        }
        let strategies = if self.strategies.is_empty() {
            Family::ALL.into_iter().map(StrategySpec::family).collect()
        } else {
            self.strategies
        };
        let mut names: Vec<String> = strategies.iter().map(StrategySpec::label).collect();
        for n in &names {
            if n.is_empty() || !n.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                return Err(UsageError::new(format!(
                    "strategy name `{n}` must be non-empty and use only letters, digits, `-`, `_` or `.`"
                )));
            }
        }
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(UsageError::new(format!("duplicate strategy name `{}`", w[0])));
        }
        Ok(Resolved {
            dataset,
            strategies,
            protocol,
            train_frac,
            out: o.out.clone().or(self.out).unwrap_or_else(|| PathBuf::from(".")),
            plots: o.plots || self.plots,
            survival: self.survival,
        })
    }
}

impl Resolved {
    pub fn rounds(&self) -> anyhow::Result<Vec<RoundSlate>> {
        let records = self.dataset.load(self.protocol.seed)?;
        Ok(group_into_rounds(records))
    }
}
