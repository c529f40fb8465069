//! ID3 decision-tree induction over categorical data, classification, and
//! compilation of a tree into production rules.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rules::{Fact, ProductionRule, RuleBase, TRUE_FACT};

/// Prefix of the consequent facts produced by [`tree_to_rules`].
pub const LABEL_PREFIX: &str = "label=";

#[derive(Debug, Error)]
pub enum MiningError {
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("row {row} has {found} values, expected {expected}")]
    RowWidth {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("row {row}: value `{value}` is not in the domain of `{attribute}`")]
    OutOfDomain {
        row: usize,
        attribute: String,
        value: String,
    },
    #[error("attribute name `{0}` is reserved or repeated")]
    BadAttributeName(String),
    #[error("row is missing attribute `{0}`")]
    MissingAttribute(String),
    #[error("csv error: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub domain: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub values: Vec<String>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDataset {
    attributes: Vec<Attribute>,
    rows: Vec<LabeledRow>,
}

impl LabeledDataset {
    pub fn new(attributes: Vec<Attribute>, rows: Vec<LabeledRow>) -> Result<Self, MiningError> {
        let mut names = BTreeSet::new();
        for a in &attributes {
            if a.name.is_empty() || a.name == "label" || !names.insert(a.name.as_str()) {
                return Err(MiningError::BadAttributeName(a.name.clone()));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.values.len() != attributes.len() {
                return Err(MiningError::RowWidth {
                    row: i,
                    found: row.values.len(),
                    expected: attributes.len(),
                });
            }
            for (a, v) in attributes.iter().zip(&row.values) {
                if !a.domain.contains(v) {
                    return Err(MiningError::OutOfDomain {
                        row: i,
                        attribute: a.name.clone(),
                        value: v.clone(),
                    });
                }
            }
        }
        Ok(Self { attributes, rows })
    }

    /// Builds a dataset whose domains are the sorted observed values.
    pub fn from_rows(names: Vec<String>, rows: Vec<LabeledRow>) -> Result<Self, MiningError> {
        let attributes = names
            .into_iter()
            .enumerate()
            .map(|(i, name)| {
                let domain: BTreeSet<&String> = rows.iter().filter_map(|r| r.values.get(i)).collect();
                Attribute {
                    name,
                    domain: domain.into_iter().cloned().collect(),
                }
            })
            .collect();
        Self::new(attributes, rows)
    }

    /// CSV with a header; the last column is the label.
    pub fn from_csv(text: &str) -> Result<Self, MiningError> {
        let csv_err = |e: csv::Error| MiningError::Csv(e.to_string());
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = r.headers().map_err(csv_err)?.clone();
        if header.len() < 2 {
            return Err(MiningError::Csv(
                "need at least one attribute column and a label column".into(),
            ));
        }
        let n = header.len() - 1;
        let names = header.iter().take(n).map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for record in r.records() {
            let record = record.map_err(csv_err)?;
            let mut fields: Vec<String> = record.iter().map(|s| s.trim().to_string()).collect();
            let label = fields.pop().unwrap_or_default();
            rows.push(LabeledRow {
                values: fields,
                label,
            });
        }
        Self::from_rows(names, rows)
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn rows(&self) -> &[LabeledRow] {
        &self.rows
    }

    /// Row as `attribute -> value`.
    pub fn row_map(&self, index: usize) -> BTreeMap<String, String> {
        self.attributes
            .iter()
            .map(|a| a.name.clone())
            .zip(self.rows[index].values.iter().cloned())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InduceParams {
    /// Most tests on any root-to-leaf path; `Some(0)` yields a single leaf.
    pub max_depth: Option<usize>,
    /// Nodes with fewer rows become leaves.
    pub min_rows: usize,
}

impl Default for InduceParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_rows: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum DecisionTreeModel {
    Leaf {
        label: String,
        support: usize,
    },
    Test {
        attribute: String,
        /// Label returned for values without a branch.
        majority: String,
        support: usize,
        branches: BTreeMap<String, DecisionTreeModel>,
    },
}

impl DecisionTreeModel {
    pub fn leaf_count(&self) -> usize {
        match self {
            DecisionTreeModel::Leaf { .. } => 1,
            DecisionTreeModel::Test { branches, .. } => {
                branches.values().map(DecisionTreeModel::leaf_count).sum()
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            DecisionTreeModel::Leaf { .. } => 0,
            DecisionTreeModel::Test { branches, .. } => {
                1 + branches.values().map(DecisionTreeModel::depth).max().unwrap_or(0)
            }
        }
    }
}

/// Base-2 entropy of a label distribution.
pub fn entropy<'a>(labels: impl IntoIterator<Item = &'a str>) -> f64 {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut n = 0usize;
    for l in labels {
        *counts.entry(l).or_default() += 1;
        n += 1;
    }
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Information gain of splitting `rows` on attribute column `attr`.
pub fn information_gain(d: &LabeledDataset, rows: &[usize], attr: usize) -> f64 {
    let base = entropy(rows.iter().map(|&i| d.rows[i].label.as_str()));
    let mut parts: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for &i in rows {
        parts
            .entry(d.rows[i].values[attr].as_str())
            .or_default()
            .push(d.rows[i].label.as_str());
    }
    let n = rows.len() as f64;
    let conditional: f64 = parts
        .values()
        .map(|labels| labels.len() as f64 / n * entropy(labels.iter().copied()))
        .sum();
    base - conditional
}

/// Most frequent label; ties go to the smallest label.
fn majority<'a>(labels: impl IntoIterator<Item = &'a str>) -> (&'a str, usize) {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    counts
        .into_iter()
        .fold(("", 0), |best, (l, c)| if c > best.1 { (l, c) } else { best })
}

/// ID3 with base-2 entropy. Splits on the attribute of maximal gain
/// (earliest declared on ties) and stops on purity, attribute exhaustion,
/// `max_depth` or `min_rows`, emitting a majority-label leaf. Every domain
/// value gets a branch; empty branches carry the parent's majority label.
pub fn induce(d: &LabeledDataset, params: InduceParams) -> Result<DecisionTreeModel, MiningError> {
    if d.rows.is_empty() {
        return Err(MiningError::EmptyDataset);
    }
    let rows: Vec<usize> = (0..d.rows.len()).collect();
    let available: Vec<usize> = (0..d.attributes.len()).collect();
    Ok(grow(d, &rows, &available, 0, params))
}

fn grow(
    d: &LabeledDataset,
    rows: &[usize],
    available: &[usize],
    depth: usize,
    params: InduceParams,
) -> DecisionTreeModel {
    let (label, _) = majority(rows.iter().map(|&i| d.rows[i].label.as_str()));
    let label = label.to_string();
    let pure = rows.iter().all(|&i| d.rows[i].label == label);
    let depth_reached = params.max_depth.is_some_and(|m| depth >= m);
    if pure || available.is_empty() || depth_reached || rows.len() < params.min_rows {
        return DecisionTreeModel::Leaf {
            label,
            support: rows.len(),
        };
    }

    let mut best = available[0];
    let mut best_gain = information_gain(d, rows, best);
    for &a in &available[1..] {
        let g = information_gain(d, rows, a);
        if g > best_gain {
            best = a;
            best_gain = g;
        }
    }

    let rest: Vec<usize> = available.iter().copied().filter(|&a| a != best).collect();
    let attr = &d.attributes[best];
    let branches = attr
        .domain
        .iter()
        .map(|value| {
            let subset: Vec<usize> = rows
                .iter()
                .copied()
                .filter(|&i| d.rows[i].values[best] == *value)
                .collect();
            let child = if subset.is_empty() {
                DecisionTreeModel::Leaf {
                    label: label.clone(),
                    support: 0,
                }
            } else {
                grow(d, &subset, &rest, depth + 1, params)
            };
            (value.clone(), child)
        })
        .collect();
    DecisionTreeModel::Test {
        attribute: attr.name.clone(),
        majority: label,
        support: rows.len(),
        branches,
    }
}

/// Follows the tests for `row`. A value without a branch yields the test
/// node's majority label.
pub fn classify<'t>(
    t: &'t DecisionTreeModel,
    row: &BTreeMap<String, String>,
) -> Result<&'t str, MiningError> {
    let mut node = t;
    loop {
        match node {
            DecisionTreeModel::Leaf { label, .. } => return Ok(label),
            DecisionTreeModel::Test {
                attribute,
                majority,
                branches,
                ..
            } => {
                let value = row
                    .get(attribute)
                    .ok_or_else(|| MiningError::MissingAttribute(attribute.clone()))?;
                match branches.get(value) {
                    Some(child) => node = child,
                    None => return Ok(majority),
                }
            }
        }
    }
}

/// One rule per leaf, left to right: the `attr=value` facts along the path
/// imply `label=<leaf label>`. A root leaf gets the `true` sentinel as its
/// only antecedent.
pub fn tree_to_rules(t: &DecisionTreeModel) -> RuleBase {
    let mut rules = Vec::new();
    let mut path = Vec::new();
    collect_rules(t, &mut path, &mut rules);
    RuleBase::new(rules).expect("leaf indices are unique")
}

fn collect_rules(t: &DecisionTreeModel, path: &mut Vec<Fact>, out: &mut Vec<ProductionRule>) {
    match t {
        DecisionTreeModel::Leaf { label, .. } => {
            let antecedents = if path.is_empty() {
                vec![Fact::new(TRUE_FACT).expect("non-empty")]
            } else {
                path.clone()
            };
            let consequent = Fact::new(format!("{LABEL_PREFIX}{label}")).expect("non-empty");
            let rule = ProductionRule::new(format!("leaf-{}", out.len()), antecedents, consequent)
                .expect("attribute facts never equal label facts");
            out.push(rule);
        }
        DecisionTreeModel::Test {
            attribute, branches, ..
        } => {
            for (value, child) in branches {
                path.push(Fact::new(format!("{attribute}={value}")).expect("non-empty"));
                collect_rules(child, path, out);
                path.pop();
            }
        }
    }
}

/// Seed facts for a row: `attr=value` per attribute plus `true`.
pub fn row_facts(row: &BTreeMap<String, String>) -> Vec<Fact> {
    row.iter()
        .map(|(a, v)| Fact::new(format!("{a}={v}")).expect("non-empty"))
        .chain(std::iter::once(Fact::new(TRUE_FACT).expect("non-empty")))
        .collect()
}
