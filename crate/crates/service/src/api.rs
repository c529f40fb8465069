//! Request and response types shared by the CLI and the HTTP API, and the
//! pure functions that compute responses from a snapshot.

use std::collections::{BTreeMap, BTreeSet};

use innotree_core::model::{ConstraintViolation, ModelFile};
use innotree_core::reporting::{render_static, run_dynamic, ReportError};
use innotree_core::rules::{explain, forward_chain, Derivation, Fact, Firing, RuleError};
use innotree_core::variants::{
    admissibility_violations, enumerate, evaluate, node_statuses, rank, score, AdmissibilityViolation,
    Direction, EnumerationInputs, NodeStatus, Score, VariantError,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::snapshot::EngineSnapshot;

/// Largest `limit` accepted by the variants query.
pub const MAX_VARIANTS: usize = 10_000;
pub const DEFAULT_VARIANTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    BadRequest,
    NotFound,
    Unprocessable,
}

/// A request failure: the HTTP layer maps `kind` to 400/404/422, the CLI
/// to an exit code.
#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[error("{detail}")]
pub struct ApiError {
    #[serde(skip)]
    pub kind: ErrorKind,
    pub error: &'static str,
    pub detail: String,
    /// Offending ids, when the error is about specific ids.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub offenders: Vec<String>,
}

impl ApiError {
    pub fn bad_request(error: &'static str, detail: impl Into<String>) -> Self {
        Self::new(ErrorKind::BadRequest, error, detail)
    }

    pub fn not_found(error: &'static str, detail: impl Into<String>) -> Self {
        Self::new(ErrorKind::NotFound, error, detail)
    }

    pub fn unprocessable(error: &'static str, detail: impl Into<String>) -> Self {
        Self::new(ErrorKind::Unprocessable, error, detail)
    }

    fn new(kind: ErrorKind, error: &'static str, detail: impl Into<String>) -> Self {
        Self {
            kind,
            error,
            detail: detail.into(),
            offenders: Vec::new(),
        }
    }

    fn with_offenders(mut self, offenders: Vec<String>) -> Self {
        self.offenders = offenders;
        self
    }
}

impl From<VariantError> for ApiError {
    fn from(e: VariantError) -> Self {
        match e {
            VariantError::UnknownNodes(ids) => {
                ApiError::unprocessable("unknown_nodes", format!("unknown node ids: {}", ids.join(", ")))
                    .with_offenders(ids)
            }
            VariantError::ZeroLimit => ApiError::bad_request("bad_limit", e.to_string()),
            other => ApiError::unprocessable("evaluation_failed", other.to_string()),
        }
    }
}

fn report_error(e: ReportError) -> ApiError {
    match e {
        ReportError::UnknownReport { ref id, .. } => {
            let id = id.clone();
            ApiError::not_found("unknown_report", e.to_string()).with_offenders(vec![id])
        }
        other => ApiError::unprocessable("report_failed", other.to_string()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Health {
    pub version: u64,
}

pub fn health(s: &EngineSnapshot) -> Health {
    Health { version: s.version }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelView {
    pub version: u64,
    #[serde(flatten)]
    pub model: ModelFile,
}

pub fn model_view(s: &EngineSnapshot) -> ModelView {
    ModelView {
        version: s.version,
        model: s.model.to_file(),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    pub selection: Vec<String>,
    #[serde(default)]
    pub param: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityView {
    pub message: String,
    #[serde(flatten)]
    pub violation: AdmissibilityViolation,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintView {
    pub message: String,
    #[serde(flatten)]
    pub violation: ConstraintViolation,
}

#[derive(Debug, Clone, Serialize)]
pub struct WhatIfResponse {
    pub version: u64,
    pub selection: BTreeSet<String>,
    pub admissible: bool,
    pub admissibility_violations: Vec<AdmissibilityView>,
    /// A rule derived `infeasible`.
    pub vetoed: bool,
    pub constraint_violations: Vec<ConstraintView>,
    /// Admissible, not vetoed and within every constraint.
    pub feasible: bool,
    pub derived: BTreeSet<Fact>,
    pub score: Score,
    pub node_status: BTreeMap<String, NodeStatus>,
}

fn inputs(s: &EngineSnapshot, param: Option<f64>) -> EnumerationInputs<'_> {
    EnumerationInputs {
        rules: &s.rules,
        constraints: &s.model.constraints,
        bindings: &s.model.bindings,
        param,
    }
}

/// Evaluates a selection against the snapshot without keeping any state.
pub fn whatif(s: &EngineSnapshot, req: &WhatIfRequest) -> Result<WhatIfResponse, ApiError> {
    let h = &s.model.hierarchy;
    let param = req.param.or(s.param);
    let selection: BTreeSet<String> = req.selection.iter().cloned().collect();
    let violations = admissibility_violations(h, &selection)?;
    let eval = evaluate(h, &selection, inputs(s, param))?;
    let score = score(h, &selection, &s.weights, param)?;
    let node_status = node_statuses(h, &selection)?;
    let admissible = violations.is_empty();
    Ok(WhatIfResponse {
        version: s.version,
        admissible,
        feasible: admissible && eval.passes(),
        admissibility_violations: violations
            .into_iter()
            .map(|v| AdmissibilityView {
                message: v.to_string(),
                violation: v,
            })
            .collect(),
        vetoed: eval.vetoed,
        constraint_violations: eval
            .constraint_violations
            .into_iter()
            .map(|v| ConstraintView {
                message: v.to_string(),
                violation: v,
            })
            .collect(),
        derived: eval.derived,
        score,
        node_status,
        selection,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Variant {
    /// 1-based position in the score ranking.
    pub rank: usize,
    /// 0-based position in enumeration order.
    pub index: usize,
    pub selected: BTreeSet<String>,
    pub derived: BTreeSet<Fact>,
    pub score: Score,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantsResponse {
    pub version: u64,
    pub limit: usize,
    /// More feasible configurations exist beyond `limit`.
    pub truncated: bool,
    pub direction: Direction,
    pub weights: BTreeMap<String, f64>,
    pub variants: Vec<Variant>,
}

/// Enumerates up to `limit` feasible configurations and scores them.
/// `param` falls back to the snapshot default. `ranked` orders the list
/// by rank, otherwise by enumeration order.
pub fn variants(
    s: &EngineSnapshot,
    limit: usize,
    param: Option<f64>,
    ranked: bool,
) -> Result<VariantsResponse, ApiError> {
    if limit > MAX_VARIANTS {
        return Err(ApiError::bad_request(
            "bad_limit",
            format!("limit must be at most {MAX_VARIANTS}"),
        ));
    }
    let h = &s.model.hierarchy;
    let param = param.or(s.param);
    let e = enumerate(h, inputs(s, param), limit)?;
    let scores = e
        .configurations
        .iter()
        .map(|c| score(h, &c.selected, &s.weights, param))
        .collect::<Result<Vec<_>, _>>()?;
    let order = rank(&e.configurations, &scores, s.direction)?;
    let mut rank_of = vec![0; order.len()];
    for (r, &i) in order.iter().enumerate() {
        rank_of[i] = r + 1;
    }
    let mut variants: Vec<Variant> = e
        .configurations
        .into_iter()
        .zip(scores)
        .enumerate()
        .map(|(index, (c, score))| Variant {
            rank: rank_of[index],
            index,
            selected: c.selected,
            derived: c.derived,
            score,
        })
        .collect();
    if ranked {
        variants.sort_by_key(|v| v.rank);
    }
    Ok(VariantsResponse {
        version: s.version,
        limit,
        truncated: e.truncated,
        direction: s.direction,
        weights: s.weights.clone(),
        variants,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StaticEntry {
    pub id: String,
    pub title: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PivotEntry {
    pub id: String,
    pub cube: String,
    pub measure: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportIndex {
    pub version: u64,
    pub statics: Vec<StaticEntry>,
    pub pivots: Vec<PivotEntry>,
}

pub fn report_index(s: &EngineSnapshot) -> ReportIndex {
    ReportIndex {
        version: s.version,
        statics: s
            .reports
            .statics
            .iter()
            .map(|d| StaticEntry {
                id: d.id.clone(),
                title: d.title.clone(),
            })
            .collect(),
        pivots: s
            .reports
            .dynamics
            .iter()
            .map(|d| PivotEntry {
                id: d.id.clone(),
                cube: d.cube.clone(),
                measure: d.measure.clone(),
            })
            .collect(),
    }
}

/// Canonical XML bytes of a static report.
pub fn static_report(s: &EngineSnapshot, id: &str) -> Result<Vec<u8>, ApiError> {
    let def = s.reports.find_static(id).map_err(report_error)?;
    render_static(def, &s.schema).map_err(report_error)
}

/// Pivot CSV bytes of a dynamic report.
pub fn pivot_report(s: &EngineSnapshot, id: &str) -> Result<Vec<u8>, ApiError> {
    let def = s.reports.find_dynamic(id).map_err(report_error)?;
    run_dynamic(def, &s.schema).map_err(report_error)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRequest {
    pub seeds: Vec<String>,
    /// Facts whose derivation trees should be returned.
    #[serde(default)]
    pub explain: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Explanation {
    pub fact: Fact,
    /// One-line rendering of `tree`.
    pub text: String,
    pub tree: Derivation,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceResponse {
    pub version: u64,
    pub closure: BTreeSet<Fact>,
    pub trace: Vec<Firing>,
    pub explanations: Vec<Explanation>,
}

fn fact(symbol: &str) -> Result<Fact, ApiError> {
    Fact::new(symbol).map_err(|e| ApiError::bad_request("bad_fact", e.to_string()))
}

/// Forward-chains the snapshot's rules from `seeds`.
pub fn trace(s: &EngineSnapshot, req: &TraceRequest) -> Result<TraceResponse, ApiError> {
    let seeds = req.seeds.iter().map(|f| fact(f)).collect::<Result<Vec<_>, _>>()?;
    let wanted = req
        .explain
        .iter()
        .map(|f| fact(f))
        .collect::<Result<Vec<_>, _>>()?;
    let result = forward_chain(&s.rules, seeds);
    let missing: Vec<String> = wanted
        .iter()
        .filter(|f| !result.closure.contains(*f))
        .map(|f| f.as_str().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ApiError::unprocessable(
            "not_derived",
            format!("facts not in the closure: {}", missing.join(", ")),
        )
        .with_offenders(missing));
    }
    let explanations = wanted
        .into_iter()
        .map(|f| {
            let tree = explain(&s.rules, &result, &f)
                .map_err(|e: RuleError| ApiError::unprocessable("not_derived", e.to_string()))?;
            Ok(Explanation {
                text: tree.to_string(),
                fact: f,
                tree,
            })
        })
        .collect::<Result<Vec<_>, ApiError>>()?;
    Ok(TraceResponse {
        version: s.version,
        closure: result.closure,
        trace: result.trace,
        explanations,
    })
}
