//! Report files: `reports.json` with one record per check, plus one
//! tab-separated table per check under `tables/`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::{sort_reports, CheckReport};

pub const SUMMARY_FILE: &str = "reports.json";
pub const TABLE_DIR: &str = "tables";

/// Plain-text table `t statistic bound margin`.
pub fn render_table(report: &CheckReport) -> String {
    let mut out = String::from("t\tstatistic\tbound\tmargin\n");
    if report.series.is_empty() {
        let t = report.param("t").or(report.param("t1")).unwrap_or(0.0);
        let _ = writeln!(out, "{t:e}\t{:e}\t{:e}\t{:e}", report.statistic, report.bound, report.margin);
    }
    for r in &report.series {
        let _ = writeln!(out, "{:e}\t{:e}\t{:e}\t{:e}", r.t, r.statistic, r.bound, r.margin);
    }
    out
}

/// Summary JSON for reports already in their final order.
pub fn render_summary(reports: &[CheckReport]) -> Result<String> {
    let mut text = serde_json::to_string_pretty(reports).map_err(|e| Error::Table {
        path: PathBuf::from(SUMMARY_FILE),
        reason: e.to_string(),
    })?;
    text.push('\n');
    Ok(text)
}

fn table_names(reports: &[CheckReport]) -> Vec<String> {
    reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let same: Vec<usize> = (0..reports.len()).filter(|&j| reports[j].name == r.name).collect();
            if same.len() == 1 {
                format!("{}.tsv", r.name)
            } else {
                let k = same.iter().position(|&j| j == i).expect("self");
                format!("{}.{k}.tsv", r.name)
            }
        })
        .collect()
}

/// Sort by `(name, m)` and write the summary and tables; returns the written paths.
pub fn emit_report(reports: &[CheckReport], out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return Err(Error::EmptyReport);
    }
    let out = out_dir.as_ref();
    let tables = out.join(TABLE_DIR);
    fs::create_dir_all(&tables).map_err(|e| Error::io(&tables, e))?;
    let mut sorted = reports.to_vec();
    sort_reports(&mut sorted);

    let mut written = Vec::with_capacity(sorted.len() + 1);
    let summary = out.join(SUMMARY_FILE);
    fs::write(&summary, render_summary(&sorted)?).map_err(|e| Error::io(&summary, e))?;
    written.push(summary);
    for (report, name) in sorted.iter().zip(table_names(&sorted)) {
        let path = tables.join(name);
        fs::write(&path, render_table(report)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::params;

    fn sample() -> Vec<CheckReport> {
        vec![
            CheckReport::upper("heat_distance", params(&[("m", 1.5)]), 0.2, 0.3, 0.0),
            CheckReport::lower("ab_time", params(&[("m", 2.0)]), 0.1, 0.0, 0.0),
            CheckReport::upper("heat_distance", params(&[("m", 1.1)]), 0.1, 0.3, 0.0),
        ]
    }

    #[test]
    fn empty_list_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_report(&[], dir.path()), Err(Error::EmptyReport)));
    }

    #[test]
    fn summary_has_exactly_the_record_fields() {
        let text = render_summary(&sample()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let keys: Vec<&str> = v[0].as_object().unwrap().keys().map(String::as_str).collect();
        let mut expect = vec!["name", "params", "statistic", "bound", "margin", "tolerance", "pass"];
        expect.sort();
        let mut keys = keys;
        keys.sort();
        assert_eq!(keys, expect);
    }

    #[test]
    fn reruns_are_byte_identical_and_sorted() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let pa = emit_report(&sample(), a.path()).unwrap();
        let mut shuffled = sample();
        shuffled.reverse();
        let pb = emit_report(&shuffled, b.path()).unwrap();
        assert_eq!(pa.len(), pb.len());
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(x.file_name(), y.file_name());
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
        let text = fs::read_to_string(&pa[0]).unwrap();
        let v: Vec<CheckReport> = serde_json::from_str(&text).unwrap();
        let order: Vec<(String, f64)> = v.iter().map(|r| (r.name.clone(), r.param("m").unwrap())).collect();
        assert_eq!(
            order,
            vec![("ab_time".into(), 2.0), ("heat_distance".into(), 1.1), ("heat_distance".into(), 1.5)]
        );
    }

    #[test]
    fn unwritable_directory_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, "x").unwrap();
        assert!(matches!(emit_report(&sample(), &file), Err(Error::Io { .. })));
    }
}
