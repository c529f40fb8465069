//! Decision hierarchy, characteristic schemas and tables, constraints, and
//! the model file that bundles them.

mod characteristics;
mod constraints;
mod hierarchy;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use characteristics::{
    Aggregation, AttributeDef, CharacteristicSchema, CharacteristicTable, CharacteristicValue,
    HomogeneityIssue, Scalar, Series, ValueKind,
};
pub use constraints::{
    Bound, Comparator, ConstraintSet, ConstraintViolation, EXPENDITURE_ATTRIBUTE, PAYBACK_ATTRIBUTE,
};
pub use hierarchy::{validate_hierarchy, Connector, DecisionHierarchy, HierarchyNode, NodeKind};

use crate::rules::BindingSpec;
use crate::validation::{ValidationReport, Violation};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate {what} `{id}`")]
    Duplicate { what: &'static str, id: String },
    #[error("unknown group `{0}`")]
    UnknownGroup(String),
}

impl From<serde_json::Error> for ModelError {
    fn from(e: serde_json::Error) -> Self {
        ModelError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LookupError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{node}` has no attribute `{attribute}`")]
    NotFound { node: String, attribute: String },
    #[error("attribute `{attribute}` of `{node}` is a series and needs a parameter")]
    MissingParam { node: String, attribute: String },
    #[error("parameter {param} is outside the sampled range [{min}, {max}] of `{node}`.`{attribute}`")]
    OutOfRange {
        node: String,
        attribute: String,
        param: f64,
        min: f64,
        max: f64,
    },
}

/// On-disk layout of a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub hierarchy: HierarchySection,
    #[serde(default)]
    pub schemas: Vec<CharacteristicSchema>,
    #[serde(default)]
    pub tables: Vec<CharacteristicTable>,
    #[serde(default)]
    pub constraints: ConstraintSet,
    #[serde(default)]
    pub bindings: BindingSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchySection {
    pub root_id: String,
    pub nodes: Vec<HierarchyNode>,
}

/// A loaded model: hierarchy with characteristics, constraints and fact
/// bindings.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectModel {
    pub hierarchy: DecisionHierarchy,
    pub constraints: ConstraintSet,
    pub bindings: BindingSpec,
}

impl ProjectModel {
    pub fn from_file(file: ModelFile) -> Result<Self, ModelError> {
        let hierarchy = DecisionHierarchy::new(
            file.hierarchy.root_id,
            file.hierarchy.nodes,
            file.schemas,
            file.tables,
        )?;
        Ok(Self {
            hierarchy,
            constraints: file.constraints,
            bindings: file.bindings,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Back to the file layout; nodes, schemas and tables in id order.
    pub fn to_file(&self) -> ModelFile {
        let h = &self.hierarchy;
        ModelFile {
            hierarchy: HierarchySection {
                root_id: h.root_id.clone(),
                nodes: h.nodes.values().cloned().collect(),
            },
            schemas: h.schemas.values().cloned().collect(),
            tables: h.tables.values().cloned().collect(),
            constraints: self.constraints.clone(),
            bindings: self.bindings.clone(),
        }
    }

    /// Hierarchy, constraint and binding findings in one report.
    pub fn validate(&self) -> ValidationReport {
        validate_hierarchy(&self.hierarchy)
            .merge(validate_constraints(&self.hierarchy, &self.constraints))
            .merge(self.bindings.validate(&self.hierarchy))
    }
}

/// Every constrained attribute must be numeric in some schema.
pub fn validate_constraints(h: &DecisionHierarchy, cs: &ConstraintSet) -> ValidationReport {
    let mut out = Vec::new();
    for (name, attribute, _, threshold) in cs.checks() {
        if !threshold.is_finite() {
            out.push(Violation::new(
                "constraints",
                "constraint-threshold",
                format!("{name}: threshold must be finite"),
            ));
        }
        match h.attribute_def(attribute) {
            None => out.push(Violation::new(
                "constraints",
                "constraint-attribute",
                format!("{name}: attribute `{attribute}` is not declared by any schema"),
            )),
            Some(def) if !def.value_kind.is_numeric() => out.push(Violation::new(
                "constraints",
                "constraint-attribute",
                format!("{name}: attribute `{attribute}` is not numeric"),
            )),
            Some(_) => {}
        }
    }
    ValidationReport::from_violations(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "hierarchy": {"root_id": "r", "nodes": [
            {"id": "r", "label": "Root", "kind": "goal", "connector": "OR", "children": ["a", "b"], "group_id": "top"},
            {"id": "a", "label": "A", "kind": "leaf", "connector": "NONE", "group_id": "alt", "characteristics": "a"},
            {"id": "b", "label": "B", "kind": "leaf", "connector": "NONE", "group_id": "alt", "characteristics": "b"}
        ]},
        "schemas": [{"group_id": "alt", "attributes": [
            {"name": "cost", "value_kind": {"numeric": {"unit": "RUB"}}, "aggregation": "sum"}
        ]}],
        "tables": [
            {"node_id": "a", "values": {"cost": 5}},
            {"node_id": "b", "values": {"cost": 7}}
        ],
        "constraints": {"expenditure_ceiling": 10}
    }"#;

    #[test]
    fn minimal_model_is_valid() {
        let m = ProjectModel::from_json(MINIMAL).unwrap();
        assert!(m.validate().is_valid(), "{}", m.validate());
        assert_eq!(m.constraints.expenditure_ceiling, Some(10.0));
    }

    #[test]
    fn file_round_trip() {
        let m = ProjectModel::from_json(MINIMAL).unwrap();
        let text = serde_json::to_string(&m.to_file()).unwrap();
        assert_eq!(ProjectModel::from_json(&text).unwrap(), m);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replacen("\"schemas\"", "\"portfolio\": 1, \"schemas\"", 1);
        assert!(matches!(
            ProjectModel::from_json(&text),
            Err(ModelError::Parse { .. })
        ));
    }

    #[test]
    fn parse_error_has_position() {
        let err = ProjectModel::from_json("{\n  \"hierarchy\": [").unwrap_err();
        match err {
            ModelError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constraint_on_undeclared_attribute() {
        let mut m = ProjectModel::from_json(MINIMAL).unwrap();
        m.constraints.payback_limit = Some(3.0);
        let report = m.validate();
        assert_eq!(report.len(), 1);
        assert_eq!(report.violations()[0].rule, "constraint-attribute");
    }
}
