//! Deterministic output files: report.json with the full check records,
//! study.csv with the table rows, plotdata.csv with per-definition residual
//! columns. Floats in CSVs carry 17 significant digits so values round-trip
//! exactly; reruns of an identical scenario produce byte-identical files.

use std::path::{Path, PathBuf};

use crate::checkers::CheckReport;
use crate::error::Result;
use crate::harness::{PlotRow, StudyTable};

pub fn write_report_json(reports: &[CheckReport], path: &Path) -> Result<()> {
    let mut text: String = serde_json::to_string_pretty(reports).expect("report serialization");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_study_csv(study: &StudyTable, path: &Path) -> Result<()> {
    std::fs::write(path, study.to_csv())?;
    Ok(())
}

pub fn write_plotdata_csv(rows: &[PlotRow], dim: usize, path: &Path) -> Result<()> {
    let mut out = String::new();
    for d in 0..dim {
        out.push_str(&format!("x{},", d + 1));
    }
    out.push_str("residual_a,residual_aprime,residual_b,residual_bprime,residual_c\n");
    for row in rows {
        for c in &row.point {
            out.push_str(&format!("{c:.16e},"));
        }
        let cells: Vec<String> = row.residuals.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes whichever artifacts are present into `out_dir`, returning the
/// paths written. Empty inputs still produce valid header-only files.
pub fn emit_reports(
    reports: &[CheckReport],
    study: Option<&StudyTable>,
    plot: Option<(&[PlotRow], usize)>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let report_path = out_dir.join("report.json");
    write_report_json(reports, &report_path)?;
    written.push(report_path);
    if let Some(table) = study {
        let p = out_dir.join("study.csv");
        write_study_csv(table, &p)?;
        written.push(p);
    }
    if let Some((rows, dim)) = plot {
        let p = out_dir.join("plotdata.csv");
        write_plotdata_csv(rows, dim, &p)?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_outputs_are_valid() {
        let dir = tempfile::tempdir().unwrap();
        let study = StudyTable::new(vec!["x".into()]);
        let written =
            emit_reports(&[], Some(&study), Some((&[], 1)), dir.path()).unwrap();
        assert_eq!(written.len(), 3);
        let json = std::fs::read_to_string(&written[0]).unwrap();
        assert_eq!(json.trim(), "[]");
        let csv = std::fs::read_to_string(&written[2]).unwrap();
        assert_eq!(csv, "x1,residual_a,residual_aprime,residual_b,residual_bprime,residual_c\n");
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut study = StudyTable::new(vec!["v".into()]);
        study.push(vec![std::f64::consts::PI], true);
        let a = emit_reports(&[], Some(&study), None, dir.path()).unwrap();
        let first = std::fs::read(&a[1]).unwrap();
        let b = emit_reports(&[], Some(&study), None, dir.path()).unwrap();
        let second = std::fs::read(&b[1]).unwrap();
        assert_eq!(first, second);
    }
}
