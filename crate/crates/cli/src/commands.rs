//! Command implementations.

use std::path::{Path, PathBuf};

use anyhow::Context;
use betport_core::data::{format_number, write_summary_csv};
use betport_core::simulation::BandRow;
use betport_core::{
    generate_synthetic, grid_search, monte_carlo, split, summarize, write_csv, DatasetSummary,
    RoundSlate, SelectionResult, SolveSettings, TuningError, WealthStats,
};

use crate::config::Resolved;
use crate::output::{
    bands_path, hyperparameter_text, read_bands, write_atomic, write_bands, write_metrics,
    write_selection, METRICS_HEADER,
};
use crate::plot::bands_svg;
use crate::UsageError;

fn tuning_error(e: TuningError) -> anyhow::Error {
    match e {
        TuningError::Simulation(_) => e.into(),
        other => UsageError::new(other.to_string()).into(),
    }
}

fn print_summary(s: &DatasetSummary) {
    println!("matches            {}", s.size);
    println!("outcomes           {}..{}", s.min_outcomes, s.max_outcomes);
    println!("odds               {} .. {}", format_number(s.min_odds), format_number(s.max_odds));
    println!("mean margin        {:.4}", s.mean_margin);
    println!("player accuracy    {:.4}", s.player_accuracy);
    println!("bookmaker accuracy {:.4}", s.bookmaker_accuracy);
    match s.kl_advantage {
        Some(a) => println!("KL advantage       {a:.5}"),
        None => println!("KL advantage       n/a"),
    }
}

pub fn synth(run: &Resolved) -> anyhow::Result<()> {
    let cfg = run.dataset.synthetic(run.protocol.seed)?;
    let (records, summary) = generate_synthetic(&cfg)?;
    let data = run.out.join("dataset.csv");
    write_atomic(&data, |w| Ok(write_csv(&records, w)?))?;
    write_atomic(&run.out.join("summary.csv"), |w| Ok(write_summary_csv(&[summary], w)?))?;
    print_summary(&summary);
    eprintln!("wrote {}", data.display());
    Ok(())
}

fn test_rounds(run: &Resolved) -> anyhow::Result<(Vec<RoundSlate>, Vec<RoundSlate>)> {
    let rounds = run.rounds()?;
    let records: Vec<_> = rounds.iter().flat_map(|r| r.matches().iter().cloned()).collect();
    if let Ok(s) = summarize(&records) {
        write_atomic(&run.out.join("summary.csv"), |w| Ok(write_summary_csv(&[s], w)?))?;
    }
    let (train, test) = split(&rounds, run.train_frac).map_err(tuning_error)?;
    eprintln!(
        "{} rounds: {} train, {} test",
        rounds.len(),
        train.len(),
        test.len()
    );
    Ok((train, test))
}

fn print_metrics(rows: &[(String, WealthStats)]) {
    println!("{}", METRICS_HEADER.join("\t"));
    for (name, s) in rows {
        println!(
            "{name}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.1}",
            s.median, s.mean, s.min, s.max, s.sigma, s.ruin_pct
        );
    }
}

/// Evaluates fixed configurations on the test side and writes metrics and
/// bands, plus plots when requested.
fn evaluate(
    run: &Resolved,
    test: &[RoundSlate],
    configs: Vec<(String, betport_core::StrategyConfig)>,
) -> anyhow::Result<()> {
    let settings = SolveSettings::default();
    let mut rows = Vec::new();
    for (name, config) in configs {
        eprintln!("evaluating {name}");
        let result = monte_carlo(test, &config, &run.protocol, &settings)
            .with_context(|| format!("strategy {name}"))?;
        let bands = bands_path(&run.out, &name);
        write_bands(&bands, &result.bands)?;
        if run.plots {
            plot(&run.out, &name, &result.bands)?;
        }
        rows.push((name, result.stats));
    }
    write_metrics(&run.out.join("metrics.csv"), &rows)?;
    print_metrics(&rows);
    Ok(())
}

pub fn backtest(run: &Resolved) -> anyhow::Result<()> {
    let configs = run
        .strategies
        .iter()
        .map(|s| Ok((s.label(), s.fixed()?)))
        .collect::<Result<Vec<_>, UsageError>>()?;
    let (_, test) = test_rounds(run)?;
    evaluate(run, &test, configs)
}

pub fn tune(run: &Resolved) -> anyhow::Result<()> {
    let specs = run
        .strategies
        .iter()
        .map(|s| Ok((s.label(), s.tunable()?)))
        .collect::<Result<Vec<_>, UsageError>>()?;
    let (train, test) = test_rounds(run)?;
    let settings = SolveSettings::default();
    let mut selections: Vec<(String, SelectionResult)> = Vec::new();
    for (name, (family, grid)) in specs {
        eprintln!("tuning {name}");
        let result = grid_search(family, &grid, &train, &run.protocol, &settings, run.survival)
            .map_err(tuning_error)
            .with_context(|| format!("strategy {name}"))?;
        if !result.feasible {
            eprintln!("warning: no {name} setting survives on the training rounds");
        }
        eprintln!("  selected {}", hyperparameter_text(&result));
        selections.push((name, result));
    }
    write_selection(&run.out.join("selection.csv"), &selections)?;
    let configs = selections
        .iter()
        .map(|(n, r)| (n.clone(), r.best.clone()))
        .collect();
    evaluate(run, &test, configs)
}

fn plot(dir: &Path, name: &str, bands: &[BandRow]) -> anyhow::Result<PathBuf> {
    let path = dir.join(format!("plot_{name}.svg"));
    let svg = bands_svg(&format!("Wealth progression of {name}"), bands);
    write_atomic(&path, |w| Ok(w.write_all(svg.as_bytes())?))?;
    Ok(path)
}

/// Bands files in `dir`, sorted by name.
fn find_bands(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut found: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("bands_") && n.ends_with(".csv"))
        })
        .collect();
    found.sort();
    Ok(found)
}

pub fn report(run: &Resolved, files: &[PathBuf]) -> anyhow::Result<()> {
    let files = if files.is_empty() {
        find_bands(&run.out)?
    } else {
        files.to_vec()
    };
    if files.is_empty() {
        return Err(UsageError::new(format!(
            "no bands files given or found in {}",
            run.out.display()
        ))
        .into());
    }
    for file in files {
        let bands = read_bands(&file)?;
        let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or("bands");
        let name = stem.strip_prefix("bands_").unwrap_or(stem);
        let path = plot(&run.out, name, &bands)?;
        println!("{}", path.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Overrides, RunConfiguration, StrategySpec};
    use betport_core::{Family, Preset};

    fn small_run(out: &Path, strategies: Vec<StrategySpec>) -> Resolved {
        let mut cfg = RunConfiguration {
            strategies,
            ..RunConfiguration::default()
        };
        cfg.dataset.preset = Some(Preset::Football);
        cfg.dataset.matches = Some(200);
        cfg.resolve(&Overrides {
            runs: Some(20),
            group_size: Some(1),
            out: Some(out.to_path_buf()),
            seed: Some(1),
            ..Overrides::default()
        })
        .unwrap()
    }

    #[test]
    fn all_cash_strategy_keeps_unit_wealth() {
        let dir = tempfile::tempdir().unwrap();
        let cash = StrategySpec {
            name: Some("cash".to_string()),
            params: Some(betport_core::strategies::FamilyParams {
                omega: 0.0,
                ..Default::default()
            }),
            ..StrategySpec::family(Family::KellyFrac)
        };
        backtest(&small_run(dir.path(), vec![cash, StrategySpec::family(Family::Kelly)])).unwrap();
        let text = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "cash,1,1,1,1,0,0");
        assert!(lines[2].starts_with("Kelly,"));
        let bands = read_bands(&bands_path(dir.path(), "cash")).unwrap();
        assert!(bands.iter().all(|b| b.p5 == 1.0 && b.p95 == 1.0));
    }

    #[test]
    fn tune_reports_selected_fraction() {
        let dir = tempfile::tempdir().unwrap();
        let spec = StrategySpec {
            grid: Some(betport_core::GridSpec::omega(vec![0.0, 1.0])),
            ..StrategySpec::family(Family::KellyFrac)
        };
        tune(&small_run(dir.path(), vec![spec])).unwrap();
        let text = std::fs::read_to_string(dir.path().join("selection.csv")).unwrap();
        let row = text.lines().nth(1).unwrap();
        assert!(row.starts_with("KellyFrac,omega="), "{row}");
        assert!(dir.path().join("metrics.csv").exists());
    }
}
