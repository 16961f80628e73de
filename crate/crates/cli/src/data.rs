//! CSV ingestion, threshold selection and censoring.

use std::path::Path;

use anyhow::{bail, Context, Result};
use bvtail::tail::{CensoredObservation, CensoredSample};
use serde::Serialize;
use statrs::statistics::{Data, OrderStatistics};

/// Fewest usable rows accepted for a fit.
pub const MIN_ROWS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub pairs: Vec<(f64, f64)>,
    /// Rows dropped for missing or non-numeric entries in the selected columns.
    pub dropped: usize,
    pub header: bool,
}

/// Resolves a selector as a header name, falling back to a 0-based index.
fn resolve(selector: &str, header: Option<&csv::StringRecord>) -> Result<usize> {
    if let Some(pos) = header.and_then(|h| h.iter().position(|f| f.trim() == selector.trim())) {
        return Ok(pos);
    }
    selector
        .trim()
        .parse::<usize>()
        .with_context(|| format!("column {selector:?} is neither a header name nor an index"))
}

fn numeric(field: Option<&str>) -> Option<f64> {
    field
        .and_then(|f| f.trim().parse::<f64>().ok())
        .filter(|v| v.is_finite())
}

/// Reads two numeric columns. The first row is taken as a header when any of
/// its fields is not a number.
pub fn ingest(path: &Path, columns: &[String; 2]) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut rows = reader.records();
    let Some(first) = rows.next() else {
        bail!("{} is empty", path.display());
    };
    let first = first.with_context(|| format!("reading {}", path.display()))?;
    let header = first.iter().any(|f| f.trim().parse::<f64>().is_err());
    let names = header.then_some(&first);
    let (c1, c2) = (resolve(&columns[0], names)?, resolve(&columns[1], names)?);
    if c1 == c2 {
        bail!("both columns resolve to index {c1}");
    }
    let width = first.len();
    if c1 >= width || c2 >= width {
        bail!("column index out of range for {width} columns");
    }

    let mut pairs = Vec::new();
    let mut dropped = 0;
    let data_rows = std::iter::once(Ok(first.clone()))
        .filter(|_| !header)
        .chain(rows);
    for row in data_rows {
        let row = row.with_context(|| format!("reading {}", path.display()))?;
        match (numeric(row.get(c1)), numeric(row.get(c2))) {
            (Some(a), Some(b)) => pairs.push((a, b)),
            _ => dropped += 1,
        }
    }
    if pairs.len() < MIN_ROWS {
        bail!(
            "only {} usable rows in {} ({dropped} dropped); at least {MIN_ROWS} are needed",
            pairs.len(),
            path.display()
        );
    }
    Ok(Ingested {
        pairs,
        dropped,
        header,
    })
}

/// Marginal sample quantiles at level `q`.
pub fn quantile_thresholds(pairs: &[(f64, f64)], q: f64) -> Result<(f64, f64)> {
    if !(q > 0.0 && q < 1.0) {
        bail!("threshold quantile {q} must lie in (0, 1)");
    }
    let mut first = Data::new(pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let mut second = Data::new(pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    Ok((first.quantile(q), second.quantile(q)))
}

/// Observation counts per quadrant: below both thresholds, only the first
/// exceeding, only the second, both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QuadrantCounts {
    pub q00: usize,
    pub q10: usize,
    pub q01: usize,
    pub q11: usize,
}

pub fn censor(pairs: &[(f64, f64)], u1: f64, u2: f64) -> Result<(CensoredSample, QuadrantCounts)> {
    if !(u1.is_finite() && u2.is_finite()) {
        bail!("thresholds ({u1}, {u2}) must be finite");
    }
    let max1 = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let max2 = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if u1 > max1 && u2 > max2 {
        bail!("thresholds ({u1}, {u2}) exceed the sample maxima ({max1}, {max2}); nothing is informative");
    }
    let obs: Vec<CensoredObservation> = pairs
        .iter()
        .map(|p| CensoredObservation::censor(p.0, p.1, u1, u2))
        .collect();
    let sample = CensoredSample::new(&obs, u1, u2);
    let [q00, q10, q01, q11] = sample.quadrant_counts();
    Ok((sample, QuadrantCounts { q00, q10, q01, q11 }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn cols(a: &str, b: &str) -> [String; 2] {
        [a.to_string(), b.to_string()]
    }

    fn grid_csv(rows: usize) -> String {
        let mut s = String::from("date,building,contents\n");
        for i in 0..rows {
            s.push_str(&format!("d{i},{},{}\n", i as f64 * 0.5, 100.0 - i as f64));
        }
        s
    }

    #[test]
    fn picks_columns_by_index_and_name() {
        let f = file(&grid_csv(30));
        let by_index = ingest(f.path(), &cols("1", "2")).unwrap();
        let by_name = ingest(f.path(), &cols("building", "contents")).unwrap();
        assert_eq!(by_index, by_name);
        assert_eq!(by_index.pairs.len(), 30);
        assert_eq!(by_index.pairs[3], (1.5, 97.0));
        assert!(by_index.header);
    }

    #[test]
    fn headerless_file_keeps_first_row() {
        let rows: String = (0..25).map(|i| format!("{i},{}\n", 2 * i)).collect();
        let got = ingest(file(&rows).path(), &cols("0", "1")).unwrap();
        assert_eq!(got.pairs.len(), 25);
        assert_eq!(got.pairs[0], (0.0, 0.0));
    }

    #[test]
    fn blank_and_non_numeric_rows_are_dropped_and_counted() {
        let mut s = grid_csv(25);
        s.push_str("x,,3\n");
        s.push_str("y,abc,3\n");
        s.push_str("z,1\n");
        let got = ingest(file(&s).path(), &cols("1", "2")).unwrap();
        assert_eq!(got.pairs.len(), 25);
        assert_eq!(got.dropped, 3);
    }

    #[test]
    fn rejects_empty_short_and_unresolvable_input() {
        assert!(ingest(file("").path(), &cols("0", "1")).is_err());
        assert!(ingest(file(&grid_csv(19)).path(), &cols("1", "2")).is_err());
        assert!(ingest(file(&grid_csv(30)).path(), &cols("1", "nope")).is_err());
        assert!(ingest(file(&grid_csv(30)).path(), &cols("1", "7")).is_err());
        assert!(ingest(file(&grid_csv(30)).path(), &cols("1", "building")).is_err());
    }

    #[test]
    fn censoring_counts_quadrants() {
        let pairs: Vec<(f64, f64)> = (0..40).map(|i| (i as f64, (39 - i) as f64)).collect();
        let (sample, counts) = censor(&pairs, 0.0, 0.0).unwrap();
        assert_eq!(counts.q11, 40);
        assert_eq!(sample.len(), 40);
        let (_, counts) = censor(&pairs, 30.0, 30.0).unwrap();
        assert_eq!(
            counts,
            QuadrantCounts {
                q00: 20,
                q10: 10,
                q01: 10,
                q11: 0
            }
        );
        assert!(censor(&pairs, 1e9, 1e9).is_err());
        assert!(censor(&pairs, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn ninety_percent_thresholds_leave_about_a_tenth() {
        let pairs: Vec<(f64, f64)> = (0..1000)
            .map(|i| (i as f64, ((i * 7) % 1000) as f64))
            .collect();
        let (u1, u2) = quantile_thresholds(&pairs, 0.9).unwrap();
        let (_, c) = censor(&pairs, u1, u2).unwrap();
        assert!((c.q10 + c.q11).abs_diff(100) <= 1);
        assert!((c.q01 + c.q11).abs_diff(100) <= 1);
        assert!(quantile_thresholds(&pairs, 1.0).is_err());
    }
}
