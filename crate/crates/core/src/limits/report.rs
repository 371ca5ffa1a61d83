use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The bound being checked is the whole space.
    Vacuous,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// Combination over trials: any failure fails, all vacuous stays vacuous.
    pub fn combine(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Vacuous, Verdict::Vacuous) => Verdict::Vacuous,
            _ => Verdict::Pass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Zero,
    /// Member of the lower-bound cone at the target.
    LowerMember,
    /// Member of the upper-bound cone outside the lower one.
    UpperOnly,
    /// Coefficients pushed through the sequence frames.
    Sampled,
    /// Built so that it should be recovered as a cluster point.
    Planted,
    /// Built to violate the inner bound.
    NegativeControl,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub id: String,
    pub trial: usize,
    pub kind: ProbeKind,
    pub norm: f64,
    /// Whether the probe met the clause's expectation.
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub certified: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c_fit: Option<f64>,
    /// Smallest residual over the tail (validation half).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub floor: Option<f64>,
    /// Distance of a cluster candidate (or of the probe) to the bound cone.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub candidates: Option<usize>,
}

impl ProbeRecord {
    pub fn new(id: String, trial: usize, kind: ProbeKind, norm: f64, ok: bool) -> Self {
        Self {
            id,
            trial,
            kind,
            norm,
            ok,
            certified: None,
            c_fit: None,
            floor: None,
            distance: None,
            candidates: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl ResidualSummary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                count: 0,
                min: 0.0,
                max: 0.0,
                mean: 0.0,
            };
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            count: values.len(),
            min,
            max,
            mean: values.iter().sum::<f64>() / values.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub index: usize,
    pub probe_id: String,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    pub verdict: Verdict,
    pub tolerance: f64,
    pub residual_summary: ResidualSummary,
    pub probes: Vec<ProbeRecord>,
}

impl Clause {
    pub fn failures(&self) -> impl Iterator<Item = &ProbeRecord> {
        self.probes.iter().filter(|p| !p.ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub suite: String,
    pub params: serde_json::Value,
    pub seed: u64,
    pub rng: String,
    pub trials: usize,
    pub sequence_length: usize,
    pub note: String,
    pub clauses: Vec<Clause>,
    pub runtime_ms: u64,
    #[serde(skip)]
    pub residual_table: Vec<ResidualRow>,
}

impl LimitReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.verdict != Verdict::Fail)
    }

    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON with `runtime_ms` zeroed, for reproducibility comparisons.
    pub fn canonical_json(&self) -> Result<String> {
        let mut c = self.clone();
        c.runtime_ms = 0;
        c.to_json()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,probe_id,residual\n");
        for row in &self.residual_table {
            let _ = writeln!(out, "{},{},{:.16e}", row.index, row.probe_id, row.residual);
        }
        out
    }

    /// Writes `<stem>.json` and `<stem>.csv`; returns both paths.
    pub fn write_files(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let json = dir.join(format!("{stem}.json"));
        let csv = dir.join(format!("{stem}.csv"));
        let io = |p: &Path, e: std::io::Error| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        std::fs::write(&json, self.to_json()?).map_err(|e| io(&json, e))?;
        std::fs::write(&csv, self.to_csv()).map_err(|e| io(&csv, e))?;
        Ok((json, csv))
    }
}
