//! Ratio reports and their JSON / CSV / plot-data renderings.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::config::{ReportFormat, SuiteName, Thresholds};
use crate::error::{Error, Result};

pub const SURROGATE_STATEMENT: &str = "Surrogates: the supremum of the defining ratio over a finite \
ensemble stands in for an operator norm or best constant; non-growth of that supremum across the \
refinement levels stands in for boundedness in the continuum limit.";

/// A real number that survives JSON even when infinite or NaN (written as
/// the strings `"inf"`, `"-inf"`, `"nan"`).
#[derive(Clone, Copy, Debug, Default)]
pub struct Num(pub f64);

impl PartialEq for Num {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits() || (self.0.is_nan() && other.0.is_nan())
    }
}

impl From<f64> for Num {
    fn from(v: f64) -> Self {
        Num(v)
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            F(f64),
            S(String),
        }
        match Repr::deserialize(d)? {
            Repr::F(v) => Ok(Num(v)),
            Repr::S(s) => match s.as_str() {
                "inf" => Ok(Num(f64::INFINITY)),
                "-inf" => Ok(Num(f64::NEG_INFINITY)),
                "nan" => Ok(Num(f64::NAN)),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub label: String,
    pub ratio: Num,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub n: usize,
    pub h: Num,
    pub members: Vec<Member>,
    /// Supremum of the member ratios.
    pub max_ratio: Num,
    /// Smallest member ratio (two-sided suites gate on it).
    pub min_ratio: Num,
    /// Level-specific auxiliary measurements.
    pub extras: BTreeMap<String, Num>,
}

impl LevelResult {
    pub fn new(n: usize, h: f64, members: Vec<Member>) -> Self {
        let max = members.iter().map(|m| m.ratio.0).fold(f64::NEG_INFINITY, nan_max);
        let min = members.iter().map(|m| m.ratio.0).fold(f64::INFINITY, nan_min);
        LevelResult {
            n,
            h: Num(h),
            members,
            max_ratio: Num(max),
            min_ratio: Num(min),
            extras: BTreeMap::new(),
        }
    }

    pub fn with_extra(mut self, key: &str, value: f64) -> Self {
        self.extras.insert(key.to_string(), Num(value));
        self
    }
}

/// NaN-propagating max: a NaN ratio must not be hidden by the supremum.
fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn nan_min(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.min(b)
    }
}

/// One measured constant followed across the refinement levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub levels: Vec<LevelResult>,
    /// `max_ratio(level k+1) / max_ratio(level k)`.
    pub growth: Vec<Num>,
    /// The constant at the finest level.
    pub max_ratio: Num,
    /// Whether this series is gated by the thresholds (otherwise reported only).
    pub gated: bool,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl Series {
    /// Computes growth factors and the pass flag against `t`.
    pub fn new(label: impl Into<String>, levels: Vec<LevelResult>, t: &Thresholds) -> Self {
        let growth: Vec<Num> = levels
            .windows(2)
            .map(|w| Num(w[1].max_ratio.0 / w[0].max_ratio.0))
            .collect();
        let last = levels.last().map(|l| l.max_ratio.0).unwrap_or(f64::NAN);
        let min_ok = match t.min_ratio {
            Some(lo) => levels.iter().all(|l| l.min_ratio.0 >= lo),
            None => true,
        };
        let growth_ok = growth.iter().all(|g| g.0 <= t.growth || (g.0.is_nan() && last == 0.0));
        let pass = last.is_finite() && last <= t.max_ratio && growth_ok && min_ok;
        Series {
            label: label.into(),
            levels,
            growth,
            max_ratio: Num(last),
            gated: true,
            pass,
            notes: Vec::new(),
        }
    }

    /// Reported but not gated.
    pub fn informational(mut self) -> Self {
        self.gated = false;
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    pub fn fail_with(mut self, reason: impl Into<String>) -> Self {
        self.pass = false;
        self.notes.push(reason.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub suite: SuiteName,
    pub name: String,
    pub header: String,
    pub thresholds: Thresholds,
    pub config: BTreeMap<String, String>,
    pub series: Vec<Series>,
    /// How the series flags combine: `all` or `any`.
    pub pass_rule: String,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl RatioReport {
    /// The supremum over gated series at the finest level.
    pub fn max_ratio(&self) -> f64 {
        self.series
            .iter()
            .filter(|s| s.gated)
            .map(|s| s.max_ratio.0)
            .fold(f64::NEG_INFINITY, nan_max)
    }

    pub fn series(&self, label: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.label == label)
    }
}

/// Writes `<dir>/<name>.<ext>` for each requested format; returns the paths.
pub fn emit_report(report: &RatioReport, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = if report.name.is_empty() { report.suite.as_str() } else { &report.name };
    let mut out = Vec::new();
    for fmt in formats {
        let (ext, body) = match fmt {
            ReportFormat::Json => ("json", render_json(report)?),
            ReportFormat::Csv => ("csv", render_csv(report)?),
            ReportFormat::Plotdata => ("dat", render_plotdata(report)),
        };
        let path = dir.join(format!("{stem}.{ext}"));
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}

pub fn render_json(report: &RatioReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn parse_json(text: &str) -> Result<RatioReport> {
    serde_json::from_str(text).map_err(|e| Error::Format(format!("report: {e}")))
}

/// One row per member index; one column per (series, level).
pub fn render_csv(report: &RatioReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["member".to_string()];
    let mut cols: Vec<&LevelResult> = Vec::new();
    for s in &report.series {
        for l in &s.levels {
            header.push(format!("{}@n={}", s.label, l.n));
            cols.push(l);
        }
    }
    w.write_record(&header).map_err(csv_err)?;
    let rows = cols.iter().map(|l| l.members.len()).max().unwrap_or(0);
    for i in 0..rows {
        let label = cols
            .iter()
            .find_map(|l| l.members.get(i).map(|m| m.label.clone()))
            .unwrap_or_default();
        let mut rec = vec![label];
        for l in &cols {
            rec.push(l.members.get(i).map(|m| m.ratio.0.to_string()).unwrap_or_default());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Blocks (one per series, finest level) of `index ratio` lines, separated by
/// blank lines; the abscissa is the 1-based member index.
pub fn render_plotdata(report: &RatioReport) -> String {
    let mut out = String::new();
    for (k, s) in report.series.iter().enumerate() {
        if k > 0 {
            out.push_str("\n\n");
        }
        let Some(level) = s.levels.last() else { continue };
        out.push_str(&format!("# {} n={}\n", s.label, level.n));
        for (i, m) in level.members.iter().enumerate() {
            out.push_str(&format!("{} {}\n", i + 1, m.ratio.0));
        }
    }
    out
}
