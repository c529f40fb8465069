//! Admissible AND/OR configurations: checking, enumeration, scoring and
//! ranking.
//!
//! A selection is admissible when the root is selected, every selected AND
//! node has all of its children selected, every selected OR node has at
//! least one child selected (OR is inclusive), and no selected node hangs
//! under an unselected parent.
//!
//! Enumeration walks the space lazily in a fixed order. At an OR node the
//! child subsets are visited as a binary counter over the child list (first
//! child = lowest bit), so children `[A, B]` yield `{A}`, `{B}`, `{A, B}`.
//! Within one subset, and at AND nodes, the chosen children's own variants
//! are combined as an odometer whose first child turns fastest.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate_hierarchy, Aggregation, CharacteristicValue, Connector, ConstraintSet, ConstraintViolation,
    DecisionHierarchy, LookupError,
};
use crate::rules::{forward_chain, ground_facts, BindingSpec, Fact, RuleBase, RuleError, INFEASIBLE};
use crate::validation::ValidationReport;

/// Numeric attribute used as the weight of `weighted_mean` aggregation.
pub const WEIGHT_ATTRIBUTE: &str = "weight";

#[derive(Debug, Error)]
pub enum VariantError {
    #[error("unknown node ids: {}", .0.join(", "))]
    UnknownNodes(Vec<String>),
    #[error("hierarchy is invalid:\n{0}")]
    InvalidHierarchy(ValidationReport),
    #[error("limit must be at least 1")]
    ZeroLimit,
    #[error(transparent)]
    Lookup(#[from] LookupError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("weighted attribute `{0}` is not declared by any schema")]
    UnknownAttribute(String),
    #[error("weighted attribute `{0}` is not numeric")]
    NonNumericWeight(String),
    #[error("{configs} configurations but {scores} scores")]
    LengthMismatch { configs: usize, scores: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Configuration {
    pub selected: BTreeSet<String>,
    pub derived: BTreeSet<Fact>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Score {
    pub per_attribute: BTreeMap<String, f64>,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Maximize,
    Minimize,
}

/// Why a selection is not admissible.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdmissibilityViolation {
    RootUnselected { node: String },
    AndIncomplete { node: String, missing: Vec<String> },
    OrEmpty { node: String },
    ParentUnselected { node: String, parent: String },
}

impl AdmissibilityViolation {
    pub fn node(&self) -> &str {
        match self {
            AdmissibilityViolation::RootUnselected { node }
            | AdmissibilityViolation::AndIncomplete { node, .. }
            | AdmissibilityViolation::OrEmpty { node }
            | AdmissibilityViolation::ParentUnselected { node, .. } => node,
        }
    }
}

impl std::fmt::Display for AdmissibilityViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AdmissibilityViolation::RootUnselected { node } => {
                write!(f, "root `{node}` is not selected")
            }
            AdmissibilityViolation::AndIncomplete { node, missing } => {
                write!(f, "AND node `{node}` misses children {}", missing.join(", "))
            }
            AdmissibilityViolation::OrEmpty { node } => {
                write!(f, "OR node `{node}` has no selected child")
            }
            AdmissibilityViolation::ParentUnselected { node, parent } => {
                write!(f, "`{node}` is selected but its parent `{parent}` is not")
            }
        }
    }
}

fn check_ids(h: &DecisionHierarchy, selection: &BTreeSet<String>) -> Result<(), VariantError> {
    let unknown: Vec<String> = selection
        .iter()
        .filter(|id| h.node(id).is_none())
        .cloned()
        .collect();
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(VariantError::UnknownNodes(unknown))
    }
}

/// Every admissibility rule the selection breaks, in a stable order.
pub fn admissibility_violations(
    h: &DecisionHierarchy,
    selection: &BTreeSet<String>,
) -> Result<Vec<AdmissibilityViolation>, VariantError> {
    check_ids(h, selection)?;
    let mut out = Vec::new();
    if !selection.contains(&h.root_id) {
        out.push(AdmissibilityViolation::RootUnselected {
            node: h.root_id.clone(),
        });
    }
    let parents = h.parents();
    for id in selection {
        let node = &h.nodes[id];
        match node.connector {
            Connector::And => {
                let missing: Vec<String> = node
                    .children
                    .iter()
                    .filter(|c| !selection.contains(*c))
                    .cloned()
                    .collect();
                if !missing.is_empty() {
                    out.push(AdmissibilityViolation::AndIncomplete {
                        node: id.clone(),
                        missing,
                    });
                }
            }
            Connector::Or => {
                if !node.children.iter().any(|c| selection.contains(c)) {
                    out.push(AdmissibilityViolation::OrEmpty { node: id.clone() });
                }
            }
            Connector::None => {}
        }
        if let Some(parent) = parents.get(id.as_str()) {
            if !selection.contains(*parent) {
                out.push(AdmissibilityViolation::ParentUnselected {
                    node: id.clone(),
                    parent: parent.to_string(),
                });
            }
        }
    }
    Ok(out)
}

pub fn admissible(h: &DecisionHierarchy, selection: &BTreeSet<String>) -> Result<bool, VariantError> {
    Ok(admissibility_violations(h, selection)?.is_empty())
}

/// UI-facing status of a node under a selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Selected,
    /// Unselected child of a selected AND node.
    Required,
    /// Unselected child of a selected OR node.
    Optional,
    /// Named by an admissibility violation.
    Violating,
    Inactive,
}

pub fn node_statuses(
    h: &DecisionHierarchy,
    selection: &BTreeSet<String>,
) -> Result<BTreeMap<String, NodeStatus>, VariantError> {
    let violating: BTreeSet<String> = admissibility_violations(h, selection)?
        .into_iter()
        .map(|v| v.node().to_string())
        .collect();
    let parents = h.parents();
    Ok(h.nodes
        .keys()
        .map(|id| {
            let status = if violating.contains(id) {
                NodeStatus::Violating
            } else if selection.contains(id) {
                NodeStatus::Selected
            } else {
                match parents.get(id.as_str()) {
                    Some(p) if selection.contains(*p) => match h.nodes[*p].connector {
                        Connector::And => NodeStatus::Required,
                        _ => NodeStatus::Optional,
                    },
                    _ => NodeStatus::Inactive,
                }
            };
            (id.clone(), status)
        })
        .collect())
}

/// Aggregated numeric attributes over the selected nodes that carry them,
/// using each attribute's schema aggregation. Series are evaluated at
/// `param`. Attributes no schema declares numeric are skipped.
pub fn aggregate(
    h: &DecisionHierarchy,
    selection: &BTreeSet<String>,
    param: Option<f64>,
) -> Result<BTreeMap<String, f64>, VariantError> {
    check_ids(h, selection)?;
    // attribute -> [(value, optional weight)]
    let mut samples: BTreeMap<&str, Vec<(f64, Option<f64>)>> = BTreeMap::new();
    for id in selection {
        let Some(table) = h.table_of(id) else {
            continue;
        };
        let weight = match table.values.get(WEIGHT_ATTRIBUTE) {
            Some(CharacteristicValue::Number(w)) => Some(*w),
            Some(CharacteristicValue::Series(_)) => {
                h.lookup_characteristic(id, WEIGHT_ATTRIBUTE, param)?.as_number()
            }
            _ => None,
        };
        for attr in table.values.keys() {
            match h.attribute_def(attr) {
                Some(def) if def.value_kind.is_numeric() => {}
                _ => continue,
            }
            let value = h.lookup_characteristic(id, attr, param)?;
            if let Some(v) = value.as_number() {
                samples.entry(attr).or_default().push((v, weight));
            }
        }
    }
    Ok(samples
        .into_iter()
        .map(|(attr, values)| {
            let agg = h.attribute_def(attr).map(|d| d.aggregation).unwrap_or_default();
            (attr.to_string(), fold(agg, &values))
        })
        .collect())
}

fn fold(agg: Aggregation, values: &[(f64, Option<f64>)]) -> f64 {
    let xs = values.iter().map(|(v, _)| *v);
    match agg {
        Aggregation::Sum => xs.sum(),
        Aggregation::Min => xs.fold(f64::INFINITY, f64::min),
        Aggregation::Max => xs.fold(f64::NEG_INFINITY, f64::max),
        Aggregation::WeightedMean => {
            let weights: Option<Vec<f64>> = values.iter().map(|(_, w)| *w).collect();
            match weights {
                Some(ws) if ws.iter().sum::<f64>() != 0.0 => {
                    let total: f64 = ws.iter().sum();
                    values.iter().zip(&ws).map(|((v, _), w)| v * w).sum::<f64>() / total
                }
                _ => xs.sum::<f64>() / values.len() as f64,
            }
        }
    }
}

/// Aggregates the selection and weighs it. Weighted attributes that no
/// selected node carries contribute zero.
pub fn score(
    h: &DecisionHierarchy,
    selection: &BTreeSet<String>,
    weights: &BTreeMap<String, f64>,
    param: Option<f64>,
) -> Result<Score, VariantError> {
    for attr in weights.keys() {
        match h.attribute_def(attr) {
            None => return Err(VariantError::UnknownAttribute(attr.clone())),
            Some(def) if !def.value_kind.is_numeric() => {
                return Err(VariantError::NonNumericWeight(attr.clone()))
            }
            Some(_) => {}
        }
    }
    let per_attribute = aggregate(h, selection, param)?;
    let total = weighted_total(&per_attribute, weights);
    Ok(Score { per_attribute, total })
}

pub fn weighted_total(per_attribute: &BTreeMap<String, f64>, weights: &BTreeMap<String, f64>) -> f64 {
    weights
        .iter()
        .map(|(a, w)| w * per_attribute.get(a).copied().unwrap_or(0.0))
        .sum()
}

/// Indices of `configs` sorted by score total in `direction`; ties go to
/// the lexicographically smaller sorted id list. Stable.
pub fn rank(
    configs: &[Configuration],
    scores: &[Score],
    direction: Direction,
) -> Result<Vec<usize>, VariantError> {
    if configs.len() != scores.len() {
        return Err(VariantError::LengthMismatch {
            configs: configs.len(),
            scores: scores.len(),
        });
    }
    let mut order: Vec<usize> = (0..configs.len()).collect();
    order.sort_by(|&a, &b| {
        let by_total = scores[a].total.total_cmp(&scores[b].total);
        let by_total = match direction {
            Direction::Maximize => by_total.reverse(),
            Direction::Minimize => by_total,
        };
        by_total.then_with(|| configs[a].selected.iter().cmp(configs[b].selected.iter()))
    });
    Ok(order)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Enumeration {
    pub configurations: Vec<Configuration>,
    /// More qualifying configurations exist beyond `limit`.
    pub truncated: bool,
}

/// Everything `enumerate` needs besides the hierarchy.
#[derive(Debug, Clone, Copy)]
pub struct EnumerationInputs<'a> {
    pub rules: &'a RuleBase,
    pub constraints: &'a ConstraintSet,
    pub bindings: &'a BindingSpec,
    pub param: Option<f64>,
}

/// Outcome of rule and constraint checks for one admissible selection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub derived: BTreeSet<Fact>,
    pub vetoed: bool,
    pub aggregated: BTreeMap<String, f64>,
    pub constraint_violations: Vec<ConstraintViolation>,
}

impl Evaluation {
    pub fn passes(&self) -> bool {
        !self.vetoed && self.constraint_violations.is_empty()
    }
}

/// Runs the rule closure and constraint checks for a selection.
pub fn evaluate(
    h: &DecisionHierarchy,
    selection: &BTreeSet<String>,
    inputs: EnumerationInputs<'_>,
) -> Result<Evaluation, VariantError> {
    let seed = ground_facts(h, selection, inputs.bindings, inputs.param)?;
    let derived = forward_chain(inputs.rules, seed).closure;
    let vetoed = derived.contains(INFEASIBLE);
    let aggregated = aggregate(h, selection, inputs.param)?;
    let constraint_violations = inputs.constraints.violations(&aggregated);
    Ok(Evaluation {
        derived,
        vetoed,
        aggregated,
        constraint_violations,
    })
}

/// Admissible selections that no rule vetoes and that satisfy the
/// constraints, in enumeration order, at most `limit` of them.
pub fn enumerate(
    h: &DecisionHierarchy,
    inputs: EnumerationInputs<'_>,
    limit: usize,
) -> Result<Enumeration, VariantError> {
    if limit == 0 {
        return Err(VariantError::ZeroLimit);
    }
    let report = validate_hierarchy(h);
    if !report.is_valid() {
        return Err(VariantError::InvalidHierarchy(report));
    }
    let space = Space::new(h);
    let mut cursor = Cursor::first(&space, space.root);
    let mut configurations = Vec::new();
    let mut truncated = false;
    let mut picked = Vec::new();
    loop {
        picked.clear();
        cursor.collect(&mut picked);
        let selected: BTreeSet<String> = picked.iter().map(|&i| space.ids[i].to_string()).collect();
        let eval = evaluate(h, &selected, inputs)?;
        if eval.passes() {
            if configurations.len() == limit {
                truncated = true;
                break;
            }
            configurations.push(Configuration {
                selected,
                derived: eval.derived,
            });
        }
        if !cursor.advance(&space) {
            break;
        }
    }
    Ok(Enumeration {
        configurations,
        truncated,
    })
}

/// Number of admissible selections, ignoring rules and constraints.
/// Saturates at `u128::MAX`.
pub fn count_admissible(h: &DecisionHierarchy) -> Result<u128, VariantError> {
    let report = validate_hierarchy(h);
    if !report.is_valid() {
        return Err(VariantError::InvalidHierarchy(report));
    }
    let space = Space::new(h);
    Ok(space.count(space.root))
}

/// Index-based view of a validated hierarchy.
struct Space<'a> {
    ids: Vec<&'a str>,
    connectors: Vec<Connector>,
    children: Vec<Vec<usize>>,
    root: usize,
}

impl<'a> Space<'a> {
    fn new(h: &'a DecisionHierarchy) -> Self {
        let ids: Vec<&str> = h.nodes.keys().map(String::as_str).collect();
        let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let children = ids
            .iter()
            .map(|id| h.nodes[*id].children.iter().map(|c| index[c.as_str()]).collect())
            .collect();
        let connectors = ids.iter().map(|id| h.nodes[*id].connector).collect();
        Self {
            root: index[h.root_id.as_str()],
            ids,
            connectors,
            children,
        }
    }

    fn count(&self, node: usize) -> u128 {
        let kids = self.children[node].iter().map(|&c| self.count(c));
        match self.connectors[node] {
            Connector::None => 1,
            Connector::And => kids.fold(1u128, u128::saturating_mul),
            Connector::Or => kids
                .fold(1u128, |acc, n| acc.saturating_mul(n.saturating_add(1)))
                .saturating_sub(1),
        }
    }
}

/// Position in the variant space of one subtree.
enum Cursor {
    Leaf(usize),
    And {
        node: usize,
        kids: Vec<Cursor>,
    },
    Or {
        node: usize,
        mask: Vec<bool>,
        kids: Vec<Cursor>,
    },
}

impl Cursor {
    fn first(space: &Space<'_>, node: usize) -> Cursor {
        let children = &space.children[node];
        match space.connectors[node] {
            Connector::None => Cursor::Leaf(node),
            Connector::And => Cursor::And {
                node,
                kids: children.iter().map(|&c| Cursor::first(space, c)).collect(),
            },
            Connector::Or => {
                let mut mask = vec![false; children.len()];
                mask[0] = true;
                Cursor::Or {
                    node,
                    kids: vec![Cursor::first(space, children[0])],
                    mask,
                }
            }
        }
    }

    fn collect(&self, out: &mut Vec<usize>) {
        match self {
            Cursor::Leaf(node) => out.push(*node),
            Cursor::And { node, kids } | Cursor::Or { node, kids, .. } => {
                out.push(*node);
                for k in kids {
                    k.collect(out);
                }
            }
        }
    }

    /// Moves to the next variant; false when the subtree is exhausted.
    fn advance(&mut self, space: &Space<'_>) -> bool {
        match self {
            Cursor::Leaf(_) => false,
            Cursor::And { kids, .. } => odometer(kids, space),
            Cursor::Or { node, mask, kids } => {
                if odometer(kids, space) {
                    return true;
                }
                // binary increment, lowest bit = first child
                let mut carry = true;
                for bit in mask.iter_mut() {
                    if !carry {
                        break;
                    }
                    carry = *bit;
                    *bit = !*bit;
                }
                if carry {
                    return false;
                }
                let children = &space.children[*node];
                *kids = children
                    .iter()
                    .zip(mask.iter())
                    .filter(|(_, on)| **on)
                    .map(|(&c, _)| Cursor::first(space, c))
                    .collect();
                true
            }
        }
    }
}

fn odometer(kids: &mut [Cursor], space: &Space<'_>) -> bool {
    for kid in kids.iter_mut() {
        if kid.advance(space) {
            return true;
        }
        let node = match kid {
            Cursor::Leaf(n) | Cursor::And { node: n, .. } | Cursor::Or { node: n, .. } => *n,
        };
        *kid = Cursor::first(space, node);
    }
    false
}
