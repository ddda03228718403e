//! Study results and their CSV / JSON serialization.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{StudyConfig, StudyKind};
use super::ExperimentError;

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 12] = [
    "study",
    "M",
    "N",
    "R",
    "T",
    "seed",
    "mean_sq_gap",
    "stderr",
    "slope",
    "slope_err",
    "runtime_s",
    "extra",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub study: StudyKind,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub seed: u64,
    pub mean_sq_gap: f64,
    pub stderr: f64,
    pub slope: Option<f64>,
    pub slope_err: Option<f64>,
    pub runtime_s: f64,
    pub extra: serde_json::Value,
}

/// A named pass/fail condition with the measured value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, value: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub study: StudyKind,
    pub seed: u64,
    pub config: StudyConfig,
    pub rows: Vec<StudyRow>,
    pub slope: Option<f64>,
    pub slope_err: Option<f64>,
    pub checks: Vec<Check>,
}

impl StudyResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Execution details of one run, written beside the result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub study: StudyKind,
    pub threads: usize,
    /// `cli`, `env`, `config` or `default`.
    pub threads_source: String,
    pub runtime_s: f64,
    pub version: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}`")),
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn to_csv(rows: &[StudyRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.study.name().to_string(),
            r.m.to_string(),
            r.n.to_string(),
            r.r.to_string(),
            num(r.t),
            r.seed.to_string(),
            num(r.mean_sq_gap),
            num(r.stderr),
            opt(r.slope),
            opt(r.slope_err),
            num(r.runtime_s),
            serde_json::to_string(&r.extra).expect("json values serialize"),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

pub fn parse_csv(text: &str) -> Result<Vec<StudyRow>, ExperimentError> {
    let bad = |msg: String| ExperimentError::Config(format!("csv: {msg}"));
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(CSV_COLUMNS) {
        return Err(bad(format!("unexpected header {:?}", header)));
    }
    let f = |s: &str, col: &str| s.parse::<f64>().map_err(|_| bad(format!("column {col}: `{s}`")));
    let o = |s: &str, col: &str| if s.is_empty() { Ok(None) } else { f(s, col).map(Some) };
    let u = |s: &str, col: &str| s.parse::<u64>().map_err(|_| bad(format!("column {col}: `{s}`")));
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        rows.push(StudyRow {
            study: rec[0].parse().map_err(bad)?,
            m: u(&rec[1], "M")? as usize,
            n: u(&rec[2], "N")?,
            r: u(&rec[3], "R")? as usize,
            t: f(&rec[4], "T")?,
            seed: u(&rec[5], "seed")?,
            mean_sq_gap: f(&rec[6], "mean_sq_gap")?,
            stderr: f(&rec[7], "stderr")?,
            slope: o(&rec[8], "slope")?,
            slope_err: o(&rec[9], "slope_err")?,
            runtime_s: f(&rec[10], "runtime_s")?,
            extra: serde_json::from_str(&rec[11]).map_err(|e| bad(e.to_string()))?,
        });
    }
    Ok(rows)
}

pub fn to_json(result: &StudyResult) -> String {
    let mut s = serde_json::to_string_pretty(result).expect("results serialize");
    s.push('\n');
    s
}

pub fn parse_json(text: &str) -> Result<StudyResult, ExperimentError> {
    serde_json::from_str(text).map_err(|e| ExperimentError::Config(format!("json: {e}")))
}

fn write_file(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    let io = |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    Ok(())
}

/// Writes `<dir>/<study>.csv` or `<dir>/<study>.json` and returns the path.
pub fn emit_results(result: &StudyResult, format: Format, dir: &Path) -> Result<PathBuf, ExperimentError> {
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let (ext, body) = match format {
        Format::Csv => ("csv", to_csv(&result.rows)),
        Format::Json => ("json", to_json(result)),
    };
    let path = dir.join(format!("{}.{ext}", result.study.name()));
    write_file(&path, &body)?;
    Ok(path)
}

/// Writes `<dir>/<study>.meta.json`.
pub fn emit_metadata(meta: &RunMetadata, dir: &Path) -> Result<PathBuf, ExperimentError> {
    let path = dir.join(format!("{}.meta.json", meta.study.name()));
    let mut s = serde_json::to_string_pretty(meta).expect("metadata serializes");
    s.push('\n');
    write_file(&path, &s)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn row(x: f64) -> StudyRow {
        StudyRow {
            study: StudyKind::GapVsN,
            m: 8,
            n: 250,
            r: 64,
            t: 0.05,
            seed: 7,
            mean_sq_gap: x,
            stderr: x / 10.0,
            slope: Some(-1.0000000000000002),
            slope_err: None,
            runtime_s: 0.0,
            extra: json!({"scale_ratio": 3.90625, "note": "a,b \"q\""}),
        }
    }

    #[test]
    fn empty_result_is_header_only() {
        assert_eq!(to_csv(&[]), format!("{}\n", CSV_COLUMNS.join(",")));
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row(0.1), row(1.2345678901234567e-9)];
        let text = to_csv(&rows);
        assert_eq!(parse_csv(&text).unwrap(), rows);
        assert_eq!(to_csv(&parse_csv(&text).unwrap()), text);
    }

    #[test]
    fn csv_rejects_wrong_header() {
        assert!(parse_csv("study,M\ngap-vs-n,8\n").is_err());
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let r = StudyResult {
            study: StudyKind::GapVsN,
            seed: 3,
            config: StudyConfig::preset(StudyKind::GapVsN),
            rows: vec![row(0.1 + 0.2), row(std::f64::consts::PI * 1e-7)],
            slope: Some(-0.98),
            slope_err: Some(0.01),
            checks: vec![Check::new("slope", true, -0.98, "")],
        };
        let a = to_json(&r);
        let back = parse_json(&a).unwrap();
        assert_eq!(back, r);
        assert_eq!(to_json(&back), a);
    }

    #[test]
    fn io_errors_carry_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let r = StudyResult {
            study: StudyKind::Qv,
            seed: 0,
            config: StudyConfig::preset(StudyKind::Qv),
            rows: vec![],
            slope: None,
            slope_err: None,
            checks: vec![],
        };
        let err = emit_results(&r, Format::Csv, &blocker.join("sub")).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
