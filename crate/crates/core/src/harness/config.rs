//! Line-oriented experiment configs.
//!
//! ```text
//! # comment
//! [section]
//! key = value          # trailing comments are allowed
//! ```
//!
//! A config is always read on top of the embedded defaults; unknown
//! `section.key` pairs are errors. Overrides use `section.key=value`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schrodinger::{OperatorName, OperatorParams};
use crate::spec::FieldSpec;

pub const DEFAULTS: &str = include_str!("defaults.cfg");

/// Flat `section.key → value` map.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    /// Parses a config text without consulting the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Config(format!("line {}: {msg}: '{}'", no + 1, raw.trim()));
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| err("unterminated section header"))?.trim();
                if name.is_empty() || name.contains(char::is_whitespace) {
                    return Err(err("bad section name"));
                }
                section = Some(name.to_string());
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected key = value"))?;
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(err("bad key"));
            }
            let sec = section.as_deref().ok_or_else(|| err("key outside any section"))?;
            entries.insert(format!("{sec}.{k}"), v.trim().to_string());
        }
        Ok(Config { entries })
    }

    pub fn defaults() -> Self {
        Self::parse(DEFAULTS).expect("embedded defaults parse")
    }

    /// Defaults overlaid with `text`.
    pub fn with_defaults(text: &str) -> Result<Self> {
        let mut cfg = Self::defaults();
        for (k, v) in Self::parse(text)?.entries {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::with_defaults(&text)
    }

    /// Sets a known key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.entries.get_mut(key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(Error::Config(format!("unknown key '{key}'"))),
        }
    }

    /// Applies `section.key=value`.
    pub fn apply_override(&mut self, text: &str) -> Result<()> {
        let (k, v) = text
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{text}' is not section.key=value")))?;
        self.set(k.trim(), v)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    fn raw(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Config(format!("missing key '{key}'")))
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.raw(key)?;
        v.parse()
            .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let v = self.raw(key)?;
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{key}: cannot parse '{}'", s.trim())))
            })
            .collect()
    }

    /// Canonical text form (sections sorted, keys sorted).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (k, v) in &self.entries {
            let (sec, key) = k.split_once('.').expect("keys are section.key");
            if sec != current {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{sec}]\n"));
                current = sec;
            }
            out.push_str(&format!("{key} = {v}\n"));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    Lerner,
    FeffermanStein,
    SharpPointwise,
    SharpBmoEquiv,
    MaximalBounded,
    OperatorBounded,
    KernelConditions,
    RdfMajorant,
    DualitySandwich,
}

impl SuiteName {
    pub const ALL: [SuiteName; 9] = [
        SuiteName::Lerner,
        SuiteName::FeffermanStein,
        SuiteName::SharpPointwise,
        SuiteName::SharpBmoEquiv,
        SuiteName::MaximalBounded,
        SuiteName::OperatorBounded,
        SuiteName::KernelConditions,
        SuiteName::RdfMajorant,
        SuiteName::DualitySandwich,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Lerner => "lerner",
            SuiteName::FeffermanStein => "fefferman_stein",
            SuiteName::SharpPointwise => "sharp_pointwise",
            SuiteName::SharpBmoEquiv => "sharp_bmo_equiv",
            SuiteName::MaximalBounded => "maximal_bounded",
            SuiteName::OperatorBounded => "operator_bounded",
            SuiteName::KernelConditions => "kernel_conditions",
            SuiteName::RdfMajorant => "rdf_majorant",
            SuiteName::DualitySandwich => "duality_sandwich",
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SuiteName::ALL
            .into_iter()
            .find(|n| n.as_str() == s.trim())
            .ok_or_else(|| Error::Unknown {
                kind: "suite",
                name: s.to_string(),
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refinement {
    /// Fixed spacing, growing torus.
    Domain,
    /// Fixed side, shrinking spacing.
    Spacing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    FourierDecay,
    Bumps,
    Indicators,
    Spikes,
}

impl EnsembleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnsembleKind::FourierDecay => "fourier_decay",
            EnsembleKind::Bumps => "bumps",
            EnsembleKind::Indicators => "indicators",
            EnsembleKind::Spikes => "spikes",
        }
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "fourier_decay" => EnsembleKind::FourierDecay,
            "bumps" => EnsembleKind::Bumps,
            "indicators" => EnsembleKind::Indicators,
            "spikes" => EnsembleKind::Spikes,
            other => {
                return Err(Error::Unknown {
                    kind: "ensemble kind",
                    name: other.to_string(),
                })
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    Plotdata,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "json" => ReportFormat::Json,
            "csv" => ReportFormat::Csv,
            "plotdata" => ReportFormat::Plotdata,
            other => {
                return Err(Error::Unknown {
                    kind: "report format",
                    name: other.to_string(),
                })
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub kinds: Vec<EnsembleKind>,
    pub size: usize,
    pub seed: u64,
    pub extent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteParams {
    pub beta: Vec<f64>,
    pub theta: Vec<f64>,
    pub delta: f64,
    pub majorant_theta: f64,
    pub terms: usize,
    pub norm_inflation: f64,
    pub tail_slack: f64,
    pub rho_pairs: usize,
    pub pairing_tolerance: f64,
    pub weight_threshold: f64,
    pub weight_condition: bool,
    pub kernel_n: Vec<f64>,
    pub kernel_q_pointwise: f64,
    pub kernel_centers: usize,
    pub kernel_points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub max_ratio: f64,
    /// Lower gate, only for two-sided suites.
    pub min_ratio: Option<f64>,
    pub growth: f64,
}

/// A validated experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub suite: SuiteName,
    pub name: String,
    pub dim: usize,
    pub spacing: f64,
    pub levels: Vec<usize>,
    pub refine: Refinement,
    pub potential: FieldSpec,
    pub q: f64,
    pub holder: f64,
    pub exponent: FieldSpec,
    pub weight: FieldSpec,
    pub operators: Vec<OperatorName>,
    pub params: OperatorParams,
    pub ensemble: EnsembleSpec,
    pub suite_params: SuiteParams,
    pub thresholds: Thresholds,
    pub output_dir: Option<PathBuf>,
    pub formats: Vec<ReportFormat>,
    /// The full resolved key/value map, echoed into reports.
    pub raw: Config,
}

impl ExperimentConfig {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let suite: SuiteName = cfg.parsed("experiment.suite")?;
        let levels: Vec<usize> = cfg.list("grid.levels")?;
        if levels.is_empty() {
            return Err(Error::Config("grid.levels must list at least one size".into()));
        }
        let refine = match cfg.raw("grid.refine")? {
            "domain" => Refinement::Domain,
            "spacing" => Refinement::Spacing,
            other => return Err(Error::Config(format!("grid.refine: unknown mode '{other}'"))),
        };
        let spec = |key: &str| -> Result<FieldSpec> {
            FieldSpec::parse(cfg.raw(key)?).map_err(|e| Error::Config(format!("{key}: {e}")))
        };
        let operators = cfg
            .raw("operator.names")?
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| OperatorName::parse(s.trim()))
            .collect::<Result<Vec<_>>>()?;
        let extent = match cfg.raw("ensemble.extent")? {
            "" => None,
            v => Some(v.parse().map_err(|_| Error::Config(format!("ensemble.extent: cannot parse '{v}'")))?),
        };
        let dir = cfg.raw("output.dir")?;
        let thresholds = Thresholds {
            max_ratio: cfg.parsed(&format!("thresholds.{suite}"))?,
            min_ratio: match suite {
                SuiteName::DualitySandwich => Some(cfg.parsed("thresholds.duality_sandwich_min")?),
                _ => None,
            },
            growth: cfg.parsed("thresholds.growth")?,
        };
        let bool_key = |key: &str| -> Result<bool> {
            match cfg.raw(key)? {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                v => Err(Error::Config(format!("{key}: expected a boolean, got '{v}'"))),
            }
        };
        let out = ExperimentConfig {
            suite,
            name: cfg.raw("experiment.name")?.to_string(),
            dim: cfg.parsed("grid.dim")?,
            spacing: cfg.parsed("grid.spacing")?,
            levels,
            refine,
            potential: spec("potential.spec")?,
            q: cfg.parsed("potential.q")?,
            holder: cfg.parsed("potential.holder")?,
            exponent: spec("exponent.spec")?,
            weight: spec("weight.spec")?,
            operators,
            params: OperatorParams {
                gamma: cfg.parsed("operator.gamma")?,
                alpha: cfg.parsed("operator.alpha")?,
            },
            ensemble: EnsembleSpec {
                kinds: cfg.list("ensemble.kinds")?,
                size: cfg.parsed("ensemble.size")?,
                seed: cfg.parsed("ensemble.seed")?,
                extent,
            },
            suite_params: SuiteParams {
                beta: cfg.list("suite.beta")?,
                theta: cfg.list("suite.theta")?,
                delta: cfg.parsed("suite.delta")?,
                majorant_theta: cfg.parsed("suite.majorant_theta")?,
                terms: cfg.parsed("suite.terms")?,
                norm_inflation: cfg.parsed("suite.norm_inflation")?,
                tail_slack: cfg.parsed("suite.tail_slack")?,
                rho_pairs: cfg.parsed("suite.rho_pairs")?,
                pairing_tolerance: cfg.parsed("suite.pairing_tolerance")?,
                weight_threshold: cfg.parsed("suite.weight_threshold")?,
                weight_condition: bool_key("suite.weight_condition")?,
                kernel_n: cfg.list("suite.kernel_n")?,
                kernel_q_pointwise: cfg.parsed("suite.kernel_q_pointwise")?,
                kernel_centers: cfg.parsed("suite.kernel_centers")?,
                kernel_points: cfg.parsed("suite.kernel_points")?,
            },
            thresholds,
            output_dir: (!dir.is_empty()).then(|| PathBuf::from(dir)),
            formats: cfg.list("output.formats")?,
            raw: cfg.clone(),
        };
        out.validate()?;
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_config(&Config::with_defaults(text)?)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let mut cfg = Config::load(path)?;
        for o in overrides {
            cfg.apply_override(o)?;
        }
        Self::from_config(&cfg)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(1..=3).contains(&self.dim) {
            return bad(format!("grid.dim must be 1, 2 or 3 (got {})", self.dim));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return bad(format!("grid.spacing must be positive (got {})", self.spacing));
        }
        if self.levels.iter().any(|&n| n < 4) {
            return bad("every refinement level needs n ≥ 4".into());
        }
        if self.ensemble.size == 0 {
            return bad("ensemble.size must be at least 1".into());
        }
        if self.ensemble.kinds.is_empty() {
            return bad("ensemble.kinds is empty".into());
        }
        if self.thresholds.growth <= 0.0 || self.thresholds.max_ratio <= 0.0 {
            return bad("thresholds must be positive".into());
        }
        let sp = &self.suite_params;
        let needs = |ok: bool, what: &str| if ok { Ok(()) } else { bad(format!("{}: {what}", self.suite)) };
        match self.suite {
            SuiteName::FeffermanStein | SuiteName::SharpPointwise => needs(!sp.beta.is_empty(), "suite.beta is empty")?,
            SuiteName::MaximalBounded => needs(!sp.theta.is_empty(), "suite.theta is empty")?,
            SuiteName::OperatorBounded => needs(!self.operators.is_empty(), "operator.names is empty")?,
            SuiteName::KernelConditions => needs(!sp.kernel_n.is_empty(), "suite.kernel_n is empty")?,
            _ => {}
        }
        if let Some(v) = self.ensemble.extent {
            if !(v > 0.0) {
                return bad(format!("ensemble.extent must be positive (got {v})"));
            }
        }
        Ok(())
    }

    /// Grid spacing at refinement level `k`.
    pub fn spacing_at(&self, k: usize) -> f64 {
        match self.refine {
            Refinement::Domain => self.spacing,
            Refinement::Spacing => self.spacing * self.levels[0] as f64 / self.levels[k] as f64,
        }
    }

    /// Half-width of the box holding random ensemble centers.
    pub fn ensemble_extent(&self) -> f64 {
        self.ensemble
            .extent
            .unwrap_or(0.3 * self.levels[0] as f64 * self.spacing)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_overrides() {
        let cfg = Config::parse("# top\n[a]\nx = 1  # trailing\ny=two words\n\n[b]\nz =\n").unwrap();
        assert_eq!(cfg.get("a.x"), Some("1"));
        assert_eq!(cfg.get("a.y"), Some("two words"));
        assert_eq!(cfg.get("b.z"), Some(""));
        assert!(Config::parse("x = 1").is_err());
        assert!(Config::parse("[a\nx=1").is_err());
        assert!(Config::parse("[a]\njunk").is_err());

        let mut d = Config::defaults();
        d.apply_override("grid.levels=8,12").unwrap();
        assert_eq!(d.list::<usize>("grid.levels").unwrap(), vec![8, 12]);
        assert!(d.apply_override("grid.nonsense=1").is_err());
        assert!(d.apply_override("no-equals").is_err());
        assert!(Config::with_defaults("[grid]\nwhat = 1\n").is_err());
    }

    #[test]
    fn defaults_resolve_for_every_suite() {
        for s in SuiteName::ALL {
            let mut cfg = Config::defaults();
            cfg.set("experiment.suite", s.as_str()).unwrap();
            let e = ExperimentConfig::from_config(&cfg).unwrap();
            assert_eq!(e.suite, s);
            assert_eq!(e.thresholds.growth, 1.3);
        }
    }

    #[test]
    fn canonical_text_round_trips() {
        let cfg = Config::defaults();
        assert_eq!(Config::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn validation_errors() {
        assert!(ExperimentConfig::parse("[experiment]\nsuite = nope\n").is_err());
        assert!(ExperimentConfig::parse("[grid]\nlevels = 3\n").is_err());
        assert!(ExperimentConfig::parse("[grid]\nrefine = sideways\n").is_err());
        assert!(ExperimentConfig::parse("[ensemble]\nkinds = waves\n").is_err());
        assert!(ExperimentConfig::parse("[ensemble]\nsize = 0\n").is_err());
        assert!(ExperimentConfig::parse("[operator]\nnames = R7\n").is_err());
        let e = ExperimentConfig::parse("[grid]\nlevels = 8, 16\nrefine = spacing\nspacing = 0.5\n").unwrap();
        assert_eq!(e.spacing_at(1), 0.25);
    }
}
