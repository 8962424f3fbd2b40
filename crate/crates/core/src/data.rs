//! Match datasets: CSV ingestion and output, summary statistics, and a
//! synthetic market generator with presets for horse racing, basketball and
//! football markets.
//!
//! CSV layout (header required):
//!
//! ```text
//! match_id,round_id,result,n,odds_1,...,odds_K,p_1,...,p_K
//! ```
//!
//! `K` is the largest outcome count in the file; shorter matches leave the
//! trailing fields empty. `result` is 1-based.

use std::io::{Read, Write};
use std::path::Path;

use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{
    argmax, kl_advantage, margin, normalized_implied_probs, MarketError, MatchRecord, OddsVector,
    OutcomeProbs,
};

/// Probability rows within this distance of 1 are renormalized on input.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;
/// Significant digits of numbers written to CSV.
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("schema error at line {line}: {message}")]
    Schema { line: u64, message: String },
    #[error("invalid value at line {line}: {message}")]
    Value { line: u64, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("invalid synthetic configuration: {0}")]
    Config(String),
    #[error("dataset is empty")]
    Empty,
}

/// Rounds `x` to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn canonical(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

/// Shortest decimal text of the canonical value.
pub fn format_number(x: f64) -> String {
    let v = canonical(x);
    let s = format!("{v:?}");
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

const FIXED_COLUMNS: [&str; 4] = ["match_id", "round_id", "result", "n"];

fn check_header(header: &csv::StringRecord) -> Result<usize, DataError> {
    let schema = |message: String| DataError::Schema { line: 1, message };
    if header.len() < 4 + 4 {
        return Err(schema(format!(
            "expected at least {} columns, found {}",
            8,
            header.len()
        )));
    }
    for (i, name) in FIXED_COLUMNS.iter().enumerate() {
        if &header[i] != *name {
            return Err(schema(format!(
                "column {} must be `{name}`, found `{}`",
                i + 1,
                &header[i]
            )));
        }
    }
    if (header.len() - 4) % 2 != 0 {
        return Err(schema("odds and probability columns must pair up".into()));
    }
    let k = (header.len() - 4) / 2;
    for j in 0..k {
        let (odds, prob) = (&header[4 + j], &header[4 + k + j]);
        if odds != format!("odds_{}", j + 1) {
            return Err(schema(format!("expected `odds_{}`, found `{odds}`", j + 1)));
        }
        if prob != format!("p_{}", j + 1) {
            return Err(schema(format!("expected `p_{}`, found `{prob}`", j + 1)));
        }
    }
    Ok(k)
}

fn parse_row(row: &csv::StringRecord, k: usize, line: u64) -> Result<MatchRecord, DataError> {
    let value = |message: String| DataError::Value { line, message };
    let number = |field: &str, name: String| -> Result<f64, DataError> {
        field
            .trim()
            .parse::<f64>()
            .map_err(|_| value(format!("{name} = `{field}` is not a number")))
    };
    if row.len() != 4 + 2 * k {
        return Err(DataError::Schema {
            line,
            message: format!("expected {} fields, found {}", 4 + 2 * k, row.len()),
        });
    }
    let n: usize = row[3]
        .trim()
        .parse()
        .map_err(|_| value(format!("n = `{}` is not an integer", &row[3])))?;
    if !(2..=k).contains(&n) {
        return Err(value(format!("n = {n} must lie in [2, {k}]")));
    }
    let result: usize = row[2]
        .trim()
        .parse()
        .map_err(|_| value(format!("result = `{}` is not an integer", &row[2])))?;
    if !(1..=n).contains(&result) {
        return Err(value(format!("result {result} is outside 1..={n}")));
    }
    let mut odds = Vec::with_capacity(n);
    let mut probs = Vec::with_capacity(n);
    for j in 0..k {
        let (o, p) = (&row[4 + j], &row[4 + k + j]);
        if j < n {
            odds.push(number(o, format!("odds_{}", j + 1))?);
            probs.push(number(p, format!("p_{}", j + 1))?);
        } else if !o.trim().is_empty() || !p.trim().is_empty() {
            return Err(value(format!("fields beyond n = {n} must be empty")));
        }
    }
    if let Some(o) = odds.iter().find(|o| !(**o >= 1.0) || !o.is_finite()) {
        return Err(value(format!("odds {o} below 1")));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(value(format!("probability {p} outside [0, 1]")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > RENORMALIZE_TOLERANCE {
        return Err(value(format!("probabilities sum to {sum}")));
    }
    if (sum - 1.0).abs() > crate::market::PROB_TOLERANCE {
        probs.iter_mut().for_each(|p| *p /= sum);
    }
    let to_value = |e: MarketError| value(e.to_string());
    MatchRecord::new(
        row[0].to_string(),
        row[1].to_string(),
        OddsVector::new(odds).map_err(to_value)?,
        OutcomeProbs::new(probs).map_err(to_value)?,
        result - 1,
    )
    .map_err(to_value)
}

/// Reads and validates match records.
pub fn parse_csv<R: Read>(reader: R) -> Result<Vec<MatchRecord>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let k = check_header(rdr.headers()?)?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(i as u64 + 2);
        out.push(parse_row(&row, k, line)?);
    }
    Ok(out)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<MatchRecord>, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(std::io::BufReader::new(file))
}

/// Writes records with canonical number formatting.
pub fn write_csv<W: Write>(records: &[MatchRecord], writer: W) -> Result<(), DataError> {
    let k = records.iter().map(MatchRecord::outcomes).max().unwrap_or(2);
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((1..=k).map(|j| format!("odds_{j}")));
    header.extend((1..=k).map(|j| format!("p_{j}")));
    wtr.write_record(&header)?;
    for r in records {
        let n = r.outcomes();
        let mut row = vec![
            r.match_id.clone(),
            r.round_id.clone(),
            (r.result + 1).to_string(),
            n.to_string(),
        ];
        for v in [r.odds.as_slice(), r.player_probs.as_slice()] {
            row.extend((0..k).map(|j| v.get(j).map(|x| format_number(*x)).unwrap_or_default()));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|source| DataError::Io {
        path: "<output>".into(),
        source,
    })?;
    Ok(())
}

/// Dataset statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub size: usize,
    /// Share of matches where the player's most likely outcome happened.
    pub player_accuracy: f64,
    /// Same for the de-margined bookmaker probabilities.
    pub bookmaker_accuracy: f64,
    pub min_outcomes: usize,
    pub max_outcomes: usize,
    pub min_odds: f64,
    pub max_odds: f64,
    pub mean_margin: f64,
    /// Empty when some realized outcome had zero probability.
    pub kl_advantage: Option<f64>,
}

pub fn summarize(records: &[MatchRecord]) -> Result<DatasetSummary, DataError> {
    if records.is_empty() {
        return Err(DataError::Empty);
    }
    let n = records.len() as f64;
    let hits = |f: &dyn Fn(&MatchRecord) -> usize| {
        records.iter().filter(|r| f(r) == r.result).count() as f64 / n
    };
    let odds = records.iter().flat_map(|r| r.odds.as_slice().iter().copied());
    let (min_odds, max_odds) = odds.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| {
        (lo.min(o), hi.max(o))
    });
    Ok(DatasetSummary {
        size: records.len(),
        player_accuracy: hits(&|r| r.player_probs.argmax()),
        bookmaker_accuracy: hits(&|r| argmax(normalized_implied_probs(&r.odds).as_slice())),
        min_outcomes: records.iter().map(MatchRecord::outcomes).min().unwrap_or(0),
        max_outcomes: records.iter().map(MatchRecord::outcomes).max().unwrap_or(0),
        min_odds,
        max_odds,
        mean_margin: records.iter().map(|r| margin(&r.odds)).sum::<f64>() / n,
        kl_advantage: kl_advantage(records).ok(),
    })
}

pub const SUMMARY_COLUMNS: [&str; 9] = [
    "size",
    "player_accuracy",
    "bookmaker_accuracy",
    "min_outcomes",
    "max_outcomes",
    "min_odds",
    "max_odds",
    "mean_margin",
    "kl_advantage",
];

pub fn write_summary_csv<W: Write>(summaries: &[DatasetSummary], writer: W) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(SUMMARY_COLUMNS)?;
    for s in summaries {
        wtr.write_record([
            s.size.to_string(),
            format_number(s.player_accuracy),
            format_number(s.bookmaker_accuracy),
            s.min_outcomes.to_string(),
            s.max_outcomes.to_string(),
            format_number(s.min_odds),
            format_number(s.max_odds),
            format_number(s.mean_margin),
            s.kl_advantage.map(format_number).unwrap_or_default(),
        ])?;
    }
    wtr.flush().map_err(|source| DataError::Io {
        path: "<output>".into(),
        source,
    })?;
    Ok(())
}

/// Market presets modelled on horse racing, basketball and football data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Horse,
    Basketball,
    Football,
}

impl std::str::FromStr for Preset {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "horse" => Ok(Preset::Horse),
            "basketball" => Ok(Preset::Basketball),
            "football" => Ok(Preset::Football),
            other => Err(DataError::Config(format!("unknown preset `{other}`"))),
        }
    }
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Horse => "horse",
            Preset::Basketball => "basketball",
            Preset::Football => "football",
        }
    }

    /// Default number of generated matches.
    pub fn default_matches(&self) -> usize {
        match self {
            Preset::Horse => 2000,
            Preset::Basketball | Preset::Football => 5000,
        }
    }

    pub fn config(&self, matches: usize, seed: u64) -> SyntheticConfig {
        // Noise scales fitted by `examples/calibrate.rs`.
        let (min_outcomes, max_outcomes, margin, book_noise, player_noise) = match self {
            Preset::Horse => (6, 16, 0.2, 1.0, 0.9906),
            Preset::Basketball => (2, 2, 0.038, 0.501, 0.5843),
            Preset::Football => (3, 3, 0.03, 0.8219, 0.8594),
        };
        SyntheticConfig {
            matches,
            min_outcomes,
            max_outcomes,
            margin,
            book_noise,
            player_noise,
            round_size: 10,
            seed,
            preset: Some(*self),
        }
    }
}

/// Parameters of the synthetic market generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub matches: usize,
    /// Outcome counts are drawn uniformly from this inclusive range.
    pub min_outcomes: usize,
    pub max_outcomes: usize,
    /// Bookmaker margin applied as `o = (1 - margin) / p_book`.
    pub margin: f64,
    /// Standard deviation of the bookmaker's log-probability noise.
    pub book_noise: f64,
    /// Standard deviation of the player's log-probability noise.
    pub player_noise: f64,
    /// Consecutive matches sharing a round id.
    pub round_size: usize,
    pub seed: u64,
    pub preset: Option<Preset>,
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::Config(m.to_string()));
        if self.matches == 0 {
            return bad("matches must be >= 1");
        }
        if self.min_outcomes < 2 || self.max_outcomes < self.min_outcomes {
            return bad("outcome range must satisfy 2 <= min <= max");
        }
        if !(0.0..0.5).contains(&self.margin) {
            return bad("margin must lie in [0, 0.5)");
        }
        if !(self.book_noise >= 0.0 && self.player_noise >= 0.0) {
            return bad("noise scales must be non-negative");
        }
        if self.round_size == 0 {
            return bad("round size must be >= 1");
        }
        Ok(())
    }
}

/// `softmax(log p + sigma z)`, evaluated stably.
fn perturb<R: Rng>(truth: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    let logits: Vec<f64> = truth
        .iter()
        .map(|p| {
            let z: f64 = StandardNormal.sample(rng);
            p.ln() + sigma * z
        })
        .collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Canonical probabilities: rounded, then the largest entry absorbs the
/// rounding so the vector sums to one within a few ulps.
fn canonical_probs(p: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = p.iter().map(|x| canonical(*x)).collect();
    let top = argmax(&out);
    let rest: f64 = out.iter().enumerate().filter(|(i, _)| *i != top).map(|(_, x)| x).sum();
    out[top] = canonical(1.0 - rest);
    out
}

/// Generates a synthetic dataset.
///
/// Per match the true outcome distribution is drawn from a flat Dirichlet;
/// the bookmaker's and the player's estimates perturb it independently with
/// Gaussian noise on the log scale; odds are the bookmaker's inverse
/// probabilities lowered by the margin; the result is drawn from the truth.
/// Matches where some odds would fall below 1 are redrawn.
pub fn generate_synthetic(
    cfg: &SyntheticConfig,
) -> Result<(Vec<MatchRecord>, DatasetSummary), DataError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(cfg.matches);
    let width = (cfg.matches.max(2) - 1).to_string().len();
    while records.len() < cfg.matches {
        let n = rng.random_range(cfg.min_outcomes..=cfg.max_outcomes);
        let raw: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = raw.iter().sum();
        let truth: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let book = perturb(&truth, cfg.book_noise, &mut rng);
        let player = canonical_probs(&perturb(&truth, cfg.player_noise, &mut rng));
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let result = truth
            .iter()
            .position(|p| {
                acc += p;
                u < acc
            })
            .unwrap_or(n - 1);
        let odds: Vec<f64> = book.iter().map(|b| canonical((1.0 - cfg.margin) / b)).collect();
        if odds.iter().any(|o| *o < 1.0 || !o.is_finite()) || player.iter().any(|p| *p <= 0.0) {
            continue;
        }
        let idx = records.len();
        let to_config = |e: MarketError| DataError::Config(e.to_string());
        records.push(
            MatchRecord::new(
                format!("m{idx:0width$}"),
                format!("r{:0width$}", idx / cfg.round_size),
                OddsVector::new(odds).map_err(to_config)?,
                OutcomeProbs::new(player).map_err(to_config)?,
                result,
            )
            .map_err(to_config)?,
        );
    }
    let summary = summarize(&records)?;
    Ok((records, summary))
}
