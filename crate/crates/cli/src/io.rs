use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use ggm_core::completion::{PartialMatrix, PartialMatrixDoc};
use ggm_core::gaussian::{raw_second_moment, sufficient_stats};
use ggm_core::rcon::{ColoredGraph, ColoredGraphDoc};
use ggm_core::{Graph, SymMatrix};
use serde::Serialize;

fn read_text(path: &Path, field: &str) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("{field}: cannot read {}", path.display()))
}

pub fn read_graph(path: &Path) -> Result<Graph> {
    let text = read_text(path, "--graph")?;
    Graph::parse_text(&text).with_context(|| format!("--graph: invalid graph file {}", path.display()))
}

pub fn read_partial(path: &Path) -> Result<PartialMatrix> {
    let text = read_text(path, "--partial")?;
    let doc: PartialMatrixDoc =
        serde_json::from_str(&text).with_context(|| format!("--partial: invalid JSON in {}", path.display()))?;
    doc.into_partial_matrix()
        .with_context(|| format!("--partial: invalid partial matrix in {}", path.display()))
}

pub fn read_colored(path: &Path) -> Result<ColoredGraph> {
    let text = read_text(path, "--colored")?;
    let doc: ColoredGraphDoc =
        serde_json::from_str(&text).with_context(|| format!("--colored: invalid JSON in {}", path.display()))?;
    doc.into_colored_graph()
        .with_context(|| format!("--colored: invalid colored graph in {}", path.display()))
}

/// Rows of reals. A first line with any non-numeric field is taken as a
/// header and skipped.
pub fn read_csv_rows(path: &Path, field: &str) -> Result<Vec<Vec<f64>>> {
    let text = read_text(path, field)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{field}: malformed CSV in {}", path.display()))?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if idx == 0 => continue,
            Err(e) => bail!("{field}: line {} of {}: {e}", idx + 1, path.display()),
        }
    }
    if rows.is_empty() {
        bail!("{field}: {} contains no numeric rows", path.display());
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != rows[0].len()) {
        bail!(
            "{field}: row {} of {} has {} columns, expected {}",
            i + 1,
            path.display(),
            r.len(),
            rows[0].len()
        );
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        bail!("{field}: {} contains non-finite values", path.display());
    }
    Ok(rows)
}

pub fn read_cov(path: &Path) -> Result<SymMatrix> {
    let rows = read_csv_rows(path, "--cov")?;
    SymMatrix::from_rows(&rows).with_context(|| format!("--cov: {} is not a symmetric square matrix", path.display()))
}

/// Statistic and sample size from either a data file or a covariance file.
pub struct Statistic {
    pub s: SymMatrix,
    pub n: Option<usize>,
}

pub fn read_statistic(data: Option<&Path>, cov: Option<&Path>, raw_moment: bool) -> Result<Statistic> {
    match (data, cov) {
        (Some(path), None) => {
            let rows = read_csv_rows(path, "--data")?;
            let stats = if raw_moment {
                raw_second_moment(&rows)
            } else {
                sufficient_stats(&rows)
            }
            .with_context(|| format!("--data: cannot form statistics from {}", path.display()))?;
            Ok(Statistic {
                n: Some(stats.n),
                s: stats.cov,
            })
        }
        (None, Some(path)) => {
            if raw_moment {
                bail!("--raw-moment: only applies to --data input");
            }
            Ok(Statistic {
                s: read_cov(path)?,
                n: None,
            })
        }
        (Some(_), Some(_)) => bail!("--data/--cov: give exactly one of them"),
        (None, None) => bail!("--data/--cov: one of them is required"),
    }
}

pub fn check_dimension(field: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(anyhow!(
            "{field}: dimension {found} does not match the graph's {expected} vertices"
        ));
    }
    Ok(())
}

struct FixedPrecision;

impl serde_json::ser::Formatter for FixedPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        write!(writer, "{:.16e}", f64::from(value))
    }
}

/// JSON with every float at 17 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedPrecision);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf)?)
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn emit(text: &str, out: Option<&Path>, echo: bool) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("--out: cannot write {}", path.display()))?;
            if echo {
                print!("{text}");
            }
        }
        None => print!("{text}"),
    }
    Ok(())
}
