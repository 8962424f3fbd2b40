//! Result tables and atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use betport_core::data::format_number;
use betport_core::simulation::BandRow;
use betport_core::{SelectionResult, WealthStats};

pub const METRICS_HEADER: [&str; 7] = [
    "strategy", "median_wf", "mean_wf", "min_wi", "max_wi", "sigma_wf", "ruin_pct",
];
pub const BANDS_HEADER: [&str; 6] = ["t", "p5", "p25", "p50", "p75", "p95"];
pub const SELECTION_HEADER: [&str; 5] =
    ["strategy", "hyperparameters", "train_median", "train_q5", "feasible"];

/// Writes `path` through a temporary file in the same directory, renamed
/// into place once complete.
pub fn write_atomic(
    path: &Path,
    fill: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot write in {}", dir.display()))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf).with_context(|| format!("writing {}", path.display()))?;
        buf.flush()?;
    }
    tmp.persist(path)
        .with_context(|| format!("cannot move output into {}", path.display()))?;
    Ok(())
}

fn csv_file(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> anyhow::Result<()> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(header)?;
        for row in rows {
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    })
}

pub fn metrics_row(name: &str, s: &WealthStats) -> Vec<String> {
    let mut row = vec![name.to_string()];
    row.extend(
        [s.median, s.mean, s.min, s.max, s.sigma, s.ruin_pct]
            .into_iter()
            .map(format_number),
    );
    row
}

pub fn write_metrics(path: &Path, rows: &[(String, WealthStats)]) -> anyhow::Result<()> {
    csv_file(path, &METRICS_HEADER, rows.iter().map(|(n, s)| metrics_row(n, s)))
}

pub fn bands_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("bands_{name}.csv"))
}

pub fn write_bands(path: &Path, bands: &[BandRow]) -> anyhow::Result<()> {
    csv_file(
        path,
        &BANDS_HEADER,
        bands.iter().map(|b| {
            let mut row = vec![b.t.to_string()];
            row.extend([b.p5, b.p25, b.p50, b.p75, b.p95].into_iter().map(format_number));
            row
        }),
    )
}

/// `name=value` pairs joined by `;`.
pub fn hyperparameter_text(result: &SelectionResult) -> String {
    result
        .best
        .hyperparameters()
        .into_iter()
        .map(|(k, v)| format!("{k}={}", format_number(v)))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn write_selection(path: &Path, rows: &[(String, SelectionResult)]) -> anyhow::Result<()> {
    csv_file(
        path,
        &SELECTION_HEADER,
        rows.iter().map(|(name, r)| {
            vec![
                name.clone(),
                hyperparameter_text(r),
                format_number(r.stats.median),
                format_number(r.q5),
                r.feasible.to_string(),
            ]
        }),
    )
}

/// Reads a bands file, reporting the offending line on malformed input.
pub fn read_bands(path: &Path) -> anyhow::Result<Vec<BandRow>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let header = reader.headers().with_context(|| format!("{}", path.display()))?;
    if header.iter().ne(BANDS_HEADER) {
        anyhow::bail!(
            "{}: line 1: expected header `{}`",
            path.display(),
            BANDS_HEADER.join(",")
        );
    }
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize::<BandRow>().enumerate() {
        let row = row.map_err(|e| anyhow::anyhow!("{}: line {}: {e}", path.display(), i + 2))?;
        rows.push(row);
    }
    if rows.is_empty() {
        anyhow::bail!("{}: no band rows", path.display());
    }
    Ok(rows)
}
