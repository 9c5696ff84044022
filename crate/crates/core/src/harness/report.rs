use std::path::{Path, PathBuf};

use serde_json::json;

use super::{CampaignReport, CaseRecord, HarnessError};
use crate::approx::Ratio;
use crate::fnspace::format_p;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Format> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

pub const CSV_COLUMNS: [&str; 24] = [
    "claim_id",
    "relation",
    "case_index",
    "f",
    "k",
    "r",
    "i",
    "eta",
    "alpha",
    "beta",
    "p",
    "t",
    "A",
    "sigma",
    "s",
    "lhs",
    "rhs",
    "ratio",
    "sentinel_flag",
    "hgrid",
    "xgrid",
    "panels",
    "seed",
    "solver_flags",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

fn ratio_cells(r: &Ratio) -> (String, &'static str) {
    match r {
        Ratio::Value(v) => (format!("{v}"), "none"),
        Ratio::BothZero => (String::new(), "both-zero"),
        Ratio::Unbounded => (String::new(), "unbounded"),
    }
}

fn row(r: &CaseRecord) -> Vec<String> {
    let p = &r.params;
    let (ratio, sentinel) = ratio_cells(&r.ratio);
    vec![
        r.claim.as_str().to_string(),
        r.relation.clone(),
        r.case_index.to_string(),
        p.f.clone(),
        opt(p.k),
        opt(p.r),
        opt(p.i),
        opt(p.eta),
        format!("{}", p.alpha),
        format!("{}", p.beta),
        format_p(p.p),
        format!("{}", p.t),
        opt(p.a),
        opt(p.sigma),
        p.s.to_string(),
        format!("{}", r.lhs),
        format!("{}", r.rhs),
        ratio,
        sentinel.to_string(),
        r.resolution.hgrid.to_string(),
        r.resolution.xgrid.to_string(),
        r.resolution.panels.to_string(),
        r.seed.to_string(),
        r.flags_string(),
    ]
}

fn summary_lines(report: &CampaignReport, preamble: &[String]) -> Vec<String> {
    let s = &report.summary;
    let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v}"));
    let mut out: Vec<String> = preamble.to_vec();
    out.push(format!("claim: {}", s.claim));
    out.push(format!("records: {}", s.records));
    out.push(format!("both_zero: {}", s.both_zero));
    out.push(format!("min_ratio: {}", f(s.min_ratio)));
    out.push(format!("median_ratio: {}", f(s.median_ratio)));
    out.push(format!("max_ratio: {}", f(s.max_ratio)));
    out.push(format!("c_hat: {}", f(s.c_hat)));
    out.push(format!("violations: {}", s.violations));
    out.push(format!("skipped: {}", s.skipped.len()));
    for k in &s.skipped {
        out.push(format!("skip: {k}"));
    }
    for n in &s.notes {
        out.push(format!("note: {n}"));
    }
    out
}

/// The per-case table with a trailing `#` summary block. A campaign with no
/// records renders as the header alone.
pub fn render_csv(report: &CampaignReport, preamble: &[String]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for r in &report.records {
        w.write_record(row(r)).expect("in-memory write");
    }
    let mut out = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields");
    if !report.records.is_empty() {
        for line in summary_lines(report, preamble) {
            out.push_str("# ");
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

/// Same fields as the CSV, one object per record, plus `summary` and `detail`.
pub fn render_json(report: &CampaignReport, preamble: &[String]) -> String {
    let records: Vec<serde_json::Value> = report
        .records
        .iter()
        .map(|r| {
            let cells = row(r);
            let obj: serde_json::Map<String, serde_json::Value> =
                CSV_COLUMNS.iter().zip(cells).map(|(k, v)| (k.to_string(), serde_json::Value::String(v))).collect();
            serde_json::Value::Object(obj)
        })
        .collect();
    let doc = json!({
        "header": preamble,
        "records": records,
        "summary": report.summary,
        "detail": report.detail,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("report serialises");
    s.push('\n');
    s
}

/// Writes the report to `path` in `format`; returns the written path.
pub fn emit_report(report: &CampaignReport, format: Format, path: &Path, preamble: &[String]) -> Result<PathBuf, HarnessError> {
    let body = match format {
        Format::Csv => render_csv(report, preamble),
        Format::Json => render_json(report, preamble),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.display().to_string(), source })?;
    }
    std::fs::write(path, body).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
    Ok(path.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{ClaimId, Params, Relation};

    fn one() -> CampaignReport {
        let p = Params { f: "exp".into(), k: Some(2), alpha: 0.5, beta: 0.0, p: f64::INFINITY, t: 0.1, ..Params::default() };
        let r = CaseRecord::new(ClaimId::Thm31, "eq3", Relation::OneSided, p, 2.0, 4.0).flag("window", 2);
        CampaignReport::assemble(ClaimId::Thm31, vec![r], vec![], vec![], serde_json::Value::Null)
    }

    #[test]
    fn empty_campaign_is_header_only() {
        let rep = CampaignReport::assemble(ClaimId::Eq1, vec![], vec![], vec![], serde_json::Value::Null);
        let csv = render_csv(&rep, &[]);
        assert_eq!(csv, format!("{}\n", CSV_COLUMNS.join(",")));
    }

    #[test]
    fn single_case_has_one_row_and_summary() {
        let csv = render_csv(&one(), &["seed: 0".into()]);
        let lines: Vec<&str> = csv.lines().collect();
        let data: Vec<&&str> = lines.iter().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 2);
        assert!(data[1].starts_with("THM3.1,eq3,0,exp,2,,,,0.5,0,inf,0.1,,,0,2,4,0.5,none,"));
        assert!(data[1].ends_with(",window=2"));
        assert!(lines.iter().any(|l| *l == "# c_hat: 0.5"));
        assert!(lines.iter().all(|l| !l.starts_with('#') || lines.iter().position(|m| m == l) > Some(1)));
    }

    #[test]
    fn json_mirrors_csv_fields() {
        let v: serde_json::Value = serde_json::from_str(&render_json(&one(), &[])).unwrap();
        let rec = &v["records"][0];
        for c in CSV_COLUMNS {
            assert!(rec.get(c).is_some(), "{c}");
        }
        assert_eq!(v["summary"]["violations"], 0);
    }

    #[test]
    fn io_errors_carry_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let bad = blocker.join("out.csv");
        match emit_report(&one(), Format::Csv, &bad, &[]) {
            Err(HarnessError::Io { path, .. }) => assert!(path.contains("file")),
            other => panic!("{other:?}"),
        }
    }
}
