//! Report definitions over the star store: static roll-up reports rendered
//! as canonical XML, and dynamic pivot patterns exported as CSV.

mod pivot;
mod xml;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pivot::{pivot, run_dynamic, PivotGrid};
pub use xml::{is_xml_name, render_static};

use crate::star::{DimensionId, DualStarSchema, RollupAgg, RollupQuery, StarError};
use crate::validation::{ValidationReport, Violation};

pub const MAX_STATIC_REPORTS: usize = 10;
pub const MAX_DYNAMIC_REPORTS: usize = 15;
pub const MAX_DYNAMIC_PER_CUBE: usize = 5;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report `{report}`: {source}")]
    Query {
        report: String,
        #[source]
        source: StarError,
    },
    #[error("report `{report}`: rows and columns both use {dim}/{level}")]
    DegeneratePivot {
        report: String,
        dim: DimensionId,
        level: String,
    },
    #[error("report `{report}`: `{name}` is not a usable XML name")]
    XmlName { report: String, name: String },
    #[error("unknown {kind} report `{id}`; known: {}", .known.join(", "))]
    UnknownReport {
        kind: &'static str,
        id: String,
        known: Vec<String>,
    },
    #[error("cannot read report config: {0}")]
    Io(#[from] std::io::Error),
    #[error("report config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticReportDef {
    pub id: String,
    pub title: String,
    pub query: RollupQuery,
    pub xml_root: String,
}

/// One axis of a pivot: a level of one dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub dim: DimensionId,
    pub level: String,
}

/// Keeps only fact rows whose leaf belongs to `member` at `dim`/`level`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PivotFilter {
    pub dim: DimensionId,
    pub level: String,
    pub member: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicQueryDef {
    pub id: String,
    pub cube: String,
    pub rows: Axis,
    pub columns: Axis,
    pub measure: String,
    pub agg: RollupAgg,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<PivotFilter>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    #[serde(default)]
    pub statics: Vec<StaticReportDef>,
    #[serde(default)]
    pub dynamics: Vec<DynamicQueryDef>,
}

impl ReportConfig {
    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        serde_json::from_str(text).map_err(|e| ReportError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReportError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn find_static(&self, id: &str) -> Result<&StaticReportDef, ReportError> {
        self.statics
            .iter()
            .find(|d| d.id == id)
            .ok_or_else(|| ReportError::UnknownReport {
                kind: "static",
                id: id.to_string(),
                known: self.statics.iter().map(|d| d.id.clone()).collect(),
            })
    }

    pub fn find_dynamic(&self, id: &str) -> Result<&DynamicQueryDef, ReportError> {
        self.dynamics
            .iter()
            .find(|d| d.id == id)
            .ok_or_else(|| ReportError::UnknownReport {
                kind: "pivot",
                id: id.to_string(),
                known: self.dynamics.iter().map(|d| d.id.clone()).collect(),
            })
    }
}

/// Report ids double as file names.
fn is_file_stem(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Lists every limit breach and dangling reference of `cfg` against `s`.
pub fn validate_report_config(cfg: &ReportConfig, s: &DualStarSchema) -> ValidationReport {
    let mut out = Vec::new();

    if cfg.statics.len() > MAX_STATIC_REPORTS {
        out.push(Violation::new(
            "statics",
            "static-limit",
            format!(
                "statics exceed {MAX_STATIC_REPORTS}: {} static reports defined",
                cfg.statics.len()
            ),
        ));
    }
    if cfg.dynamics.len() > MAX_DYNAMIC_REPORTS {
        out.push(Violation::new(
            "dynamics",
            "dynamic-limit",
            format!(
                "dynamics exceed {MAX_DYNAMIC_REPORTS}: {} dynamic patterns defined",
                cfg.dynamics.len()
            ),
        ));
    }
    let mut per_cube: BTreeMap<&str, usize> = BTreeMap::new();
    for d in &cfg.dynamics {
        *per_cube.entry(&d.cube).or_default() += 1;
    }
    for (cube, n) in per_cube {
        if n > MAX_DYNAMIC_PER_CUBE {
            out.push(Violation::new(
                cube,
                "cube-limit",
                format!("cube `{cube}` has {n} dynamic patterns, exceeds {MAX_DYNAMIC_PER_CUBE} per cube"),
            ));
        }
    }

    let ids = cfg
        .statics
        .iter()
        .map(|d| ("static", d.id.as_str()))
        .chain(cfg.dynamics.iter().map(|d| ("pivot", d.id.as_str())));
    let mut seen = BTreeSet::new();
    for (kind, id) in ids {
        if !seen.insert((kind, id)) {
            out.push(Violation::new(
                id,
                "duplicate-id",
                format!("{kind} report id used twice"),
            ));
        }
        if !is_file_stem(id) {
            out.push(Violation::new(
                id,
                "report-id",
                "report ids may only contain ASCII letters, digits, `-`, `_` and `.`",
            ));
        }
    }

    for d in &cfg.statics {
        check_static(d, s, &mut out);
    }
    for d in &cfg.dynamics {
        check_dynamic(d, s, &mut out);
    }
    ValidationReport::from_violations(out)
}

fn dangling(id: &str, e: impl std::fmt::Display) -> Violation {
    Violation::new(id, "dangling-reference", e.to_string())
}

fn check_static(d: &StaticReportDef, s: &DualStarSchema, out: &mut Vec<Violation>) {
    if !is_xml_name(&d.xml_root) {
        out.push(Violation::new(
            &d.id,
            "xml-name",
            format!("xml_root `{}` is not a valid element name", d.xml_root),
        ));
    }
    let mut names = BTreeSet::new();
    for m in &d.query.measures {
        if !is_xml_name(&m.name) || m.name == "member" {
            out.push(Violation::new(
                &d.id,
                "xml-name",
                format!("measure `{}` cannot be used as a row attribute", m.name),
            ));
        }
        if !names.insert(m.name.as_str()) {
            out.push(Violation::new(
                &d.id,
                "duplicate-measure",
                format!("measure `{}` requested twice", m.name),
            ));
        }
    }
    if let Err(e) = s.rollup(&d.query) {
        out.push(dangling(&d.id, e));
    }
}

fn check_dynamic(d: &DynamicQueryDef, s: &DualStarSchema, out: &mut Vec<Violation>) {
    if d.rows == d.columns {
        out.push(Violation::new(
            &d.id,
            "degenerate-pivot",
            format!("rows and columns both use {}/{}", d.rows.dim, d.rows.level),
        ));
    }
    let table = match s.table(Some(&d.cube)) {
        Ok(t) => t,
        Err(e) => {
            out.push(dangling(&d.id, e));
            return;
        }
    };
    for axis in [&d.rows, &d.columns] {
        if let Err(e) = s.dim(axis.dim).level_index(&axis.level) {
            out.push(dangling(&d.id, e));
        }
    }
    if !table.rows.is_empty() && !table.measure_names().contains(&d.measure) {
        out.push(dangling(
            &d.id,
            format!("unknown measure `{}` in cube `{}`", d.measure, d.cube),
        ));
    }
    if let Some(f) = &d.filter {
        let dim = s.dim(f.dim);
        match dim.level_index(&f.level) {
            Err(e) => out.push(dangling(&d.id, e)),
            Ok(level) => {
                let exists = dim
                    .membership
                    .values()
                    .any(|path| path.get(level) == Some(&f.member));
                if !exists {
                    out.push(dangling(
                        &d.id,
                        format!(
                            "filter member `{}` does not exist at {}/{}",
                            f.member, f.dim, f.level
                        ),
                    ));
                }
            }
        }
    }
}
