//! Paired comparison of two run reports.

use std::fs::File;
use std::path::Path;

use crate::report::{
    cdf_grid, read_report_csv, ReportRow, POSITION_THRESHOLD_M, VELOCITY_THRESHOLD_MS,
};
use crate::{HarnessError, Result};

/// One line of the comparison table. `kind` is `cdf` for CDF samples at
/// `threshold` and `fraction_under` for the headline threshold fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub metric: &'static str,
    pub kind: &'static str,
    pub threshold: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

impl ComparisonRow {
    pub fn delta(&self) -> Option<f64> {
        Some(self.b? - self.a?)
    }
}

fn fraction(errors: &[f64], x: f64, strict: bool) -> Option<f64> {
    if errors.is_empty() {
        return None;
    }
    let hits = errors.iter().filter(|e| if strict { **e < x } else { **e <= x }).count();
    Some(hits as f64 / errors.len() as f64)
}

/// Compare two reports over identical epochs. Deltas are `b - a`.
pub fn compare(a: &[ReportRow], b: &[ReportRow]) -> Result<Vec<ComparisonRow>> {
    if let Some(i) = (0..a.len().min(b.len())).find(|&i| a[i].epoch != b[i].epoch) {
        return Err(HarnessError::Mismatch(format!(
            "row {}: epoch {} vs {}",
            i + 1,
            a[i].epoch,
            b[i].epoch
        )));
    }
    if a.len() != b.len() {
        let (longer, n) = if a.len() > b.len() { ("first", b.len()) } else { ("second", a.len()) };
        return Err(HarnessError::Mismatch(format!(
            "{} vs {} epochs; the {longer} report continues after row {n}",
            a.len(),
            b.len()
        )));
    }
    let mut rows = Vec::new();
    let metrics: [(&str, f64, fn(&ReportRow) -> Option<f64>); 2] = [
        ("position_error_m", POSITION_THRESHOLD_M, |r| r.pos_err_m),
        ("velocity_error_ms", VELOCITY_THRESHOLD_MS, |r| r.vel_err_ms),
    ];
    for (metric, threshold, get) in metrics {
        let ea: Vec<f64> = a.iter().filter_map(get).collect();
        let eb: Vec<f64> = b.iter().filter_map(get).collect();
        rows.push(ComparisonRow {
            metric,
            kind: "fraction_under",
            threshold,
            a: fraction(&ea, threshold, true),
            b: fraction(&eb, threshold, true),
        });
        rows.push(ComparisonRow {
            metric,
            kind: "available",
            threshold: 0.0,
            a: Some(ea.len() as f64 / a.len().max(1) as f64),
            b: Some(eb.len() as f64 / b.len().max(1) as f64),
        });
        for x in cdf_grid() {
            rows.push(ComparisonRow {
                metric,
                kind: "cdf",
                threshold: x,
                a: fraction(&ea, x, false),
                b: fraction(&eb, x, false),
            });
        }
    }
    Ok(rows)
}

/// Compare two report CSV files and write the table to `out`.
pub fn compare_files(a: &Path, b: &Path, out: &Path) -> Result<Vec<ComparisonRow>> {
    let rows = compare(&read_report_csv(a)?, &read_report_csv(b)?)?;
    let file = File::create(out).map_err(|e| HarnessError::io(out, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["metric", "kind", "threshold", "a", "b", "delta"])?;
    let s = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &rows {
        w.write_record([
            r.metric.to_string(),
            r.kind.to_string(),
            r.threshold.to_string(),
            s(r.a),
            s(r.b),
            s(r.delta()),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(out, e))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: u64) -> Vec<ReportRow> {
        (0..n)
            .map(|epoch| ReportRow {
                epoch,
                pos_err_m: Some(epoch as f64 * 0.1),
                vel_err_ms: (epoch % 2 == 0).then_some(0.05),
            })
            .collect()
    }

    #[test]
    fn self_comparison_has_zero_deltas() {
        let r = rows(10);
        assert!(compare(&r, &r).unwrap().iter().all(|c| c.delta() == Some(0.0)));
    }

    #[test]
    fn epoch_mismatch_is_reported() {
        let err = compare(&rows(10), &rows(9)).unwrap_err().to_string();
        assert!(err.contains("row 9"), "{err}");
        let mut b = rows(10);
        b[3].epoch = 42;
        let err = compare(&rows(10), &b).unwrap_err().to_string();
        assert!(err.contains("row 4"), "{err}");
    }
}
