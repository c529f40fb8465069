use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::characteristics::{
    CharacteristicSchema, CharacteristicTable, CharacteristicValue, HomogeneityIssue, Scalar,
};
use super::{LookupError, ModelError};
use crate::validation::{ValidationReport, Violation};

/// Level name of a node. Advisory only: structural rules key off the
/// connector and the children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Goal,
    Criterion,
    Alternative,
    Leaf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Connector {
    #[serde(rename = "AND")]
    And,
    #[serde(rename = "OR")]
    Or,
    #[serde(rename = "NONE")]
    None,
}

impl fmt::Display for Connector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Connector::And => "AND",
            Connector::Or => "OR",
            Connector::None => "NONE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyNode {
    pub id: String,
    #[serde(default)]
    pub label: String,
    pub kind: NodeKind,
    pub connector: Connector,
    #[serde(default)]
    pub children: Vec<String>,
    pub group_id: String,
    /// Node id of the characteristic table attached to this node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub characteristics: Option<String>,
}

impl HierarchyNode {
    pub fn leaf(id: impl Into<String>, group_id: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            label: id.clone(),
            id,
            kind: NodeKind::Leaf,
            connector: Connector::None,
            children: Vec::new(),
            group_id: group_id.into(),
            characteristics: None,
        }
    }

    pub fn branch<I, S>(
        id: impl Into<String>,
        kind: NodeKind,
        connector: Connector,
        children: I,
        group_id: impl Into<String>,
    ) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let id = id.into();
        Self {
            label: id.clone(),
            id,
            kind,
            connector,
            children: children.into_iter().map(Into::into).collect(),
            group_id: group_id.into(),
            characteristics: None,
        }
    }

    /// Attaches the table keyed by this node's own id.
    pub fn with_characteristics(mut self) -> Self {
        self.characteristics = Some(self.id.clone());
        self
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// The AND/OR goal-decision tree together with its characteristic data.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionHierarchy {
    pub root_id: String,
    pub nodes: BTreeMap<String, HierarchyNode>,
    pub schemas: BTreeMap<String, CharacteristicSchema>,
    pub tables: BTreeMap<String, CharacteristicTable>,
}

impl DecisionHierarchy {
    /// Builds the keyed maps, rejecting duplicate node ids, group ids and
    /// table owners. Structural validity is checked by [`validate_hierarchy`].
    pub fn new(
        root_id: impl Into<String>,
        nodes: Vec<HierarchyNode>,
        schemas: Vec<CharacteristicSchema>,
        tables: Vec<CharacteristicTable>,
    ) -> Result<Self, ModelError> {
        let mut node_map = BTreeMap::new();
        for n in nodes {
            let id = n.id.clone();
            if node_map.insert(id.clone(), n).is_some() {
                return Err(ModelError::Duplicate { what: "node id", id });
            }
        }
        let mut schema_map = BTreeMap::new();
        for s in schemas {
            let id = s.group_id.clone();
            if schema_map.insert(id.clone(), s).is_some() {
                return Err(ModelError::Duplicate {
                    what: "schema group_id",
                    id,
                });
            }
        }
        let mut table_map = BTreeMap::new();
        for t in tables {
            let id = t.node_id.clone();
            if table_map.insert(id.clone(), t).is_some() {
                return Err(ModelError::Duplicate {
                    what: "table node_id",
                    id,
                });
            }
        }
        Ok(Self {
            root_id: root_id.into(),
            nodes: node_map,
            schemas: schema_map,
            tables: table_map,
        })
    }

    pub fn node(&self, id: &str) -> Option<&HierarchyNode> {
        self.nodes.get(id)
    }

    pub fn table_of(&self, id: &str) -> Option<&CharacteristicTable> {
        let node = self.nodes.get(id)?;
        self.tables.get(node.characteristics.as_deref()?)
    }

    /// Parent of every node that is listed as a child. With multiple parents
    /// the first in id order wins; validation reports the conflict.
    pub fn parents(&self) -> BTreeMap<&str, &str> {
        let mut parents = BTreeMap::new();
        for node in self.nodes.values() {
            for child in &node.children {
                parents.entry(child.as_str()).or_insert(node.id.as_str());
            }
        }
        parents
    }

    /// Ids of leaf nodes (no children), in id order.
    pub fn leaf_ids(&self) -> BTreeSet<&str> {
        self.nodes
            .values()
            .filter(|n| n.is_leaf())
            .map(|n| n.id.as_str())
            .collect()
    }

    /// Groups that are mentioned by a node or have a schema.
    pub fn groups(&self) -> BTreeSet<&str> {
        self.nodes
            .values()
            .map(|n| n.group_id.as_str())
            .chain(self.schemas.keys().map(String::as_str))
            .collect()
    }

    /// First schema (in group order) declaring `attr`.
    pub fn attribute_def(&self, attr: &str) -> Option<&super::AttributeDef> {
        self.schemas.values().find_map(|s| s.attribute(attr))
    }

    /// Reads a characteristic of `node`, interpolating series at `param`.
    pub fn lookup_characteristic(
        &self,
        node: &str,
        attr: &str,
        param: Option<f64>,
    ) -> Result<Scalar, LookupError> {
        if !self.nodes.contains_key(node) {
            return Err(LookupError::UnknownNode(node.to_string()));
        }
        let table = self.table_of(node).ok_or_else(|| LookupError::NotFound {
            node: node.to_string(),
            attribute: attr.to_string(),
        })?;
        table.evaluate(attr, param)
    }

    /// Checks every node of `group` against the group's schema.
    pub fn homogeneity_check(&self, group: &str) -> Result<Vec<HomogeneityIssue>, ModelError> {
        let members: Vec<&HierarchyNode> = self.nodes.values().filter(|n| n.group_id == group).collect();
        let schema = self.schemas.get(group);
        if members.is_empty() && schema.is_none() {
            return Err(ModelError::UnknownGroup(group.to_string()));
        }
        let mut issues = Vec::new();
        let Some(schema) = schema else {
            for n in members {
                if n.characteristics.is_some() {
                    issues.push(HomogeneityIssue::MissingSchema { node: n.id.clone() });
                }
            }
            return Ok(issues);
        };
        let empty = BTreeMap::new();
        for n in members {
            let values = self.table_of(&n.id).map_or(&empty, |t| &t.values);
            for def in &schema.attributes {
                match values.get(&def.name) {
                    None => issues.push(HomogeneityIssue::Missing {
                        node: n.id.clone(),
                        attribute: def.name.clone(),
                    }),
                    Some(v) if !v.matches(&def.value_kind) => issues.push(HomogeneityIssue::KindMismatch {
                        node: n.id.clone(),
                        attribute: def.name.clone(),
                        expected: def.value_kind.name().to_string(),
                        found: v.kind_name().to_string(),
                    }),
                    Some(_) => {}
                }
            }
            for name in values.keys() {
                if schema.attribute(name).is_none() {
                    issues.push(HomogeneityIssue::Undeclared {
                        node: n.id.clone(),
                        attribute: name.clone(),
                    });
                }
            }
        }
        issues.sort();
        Ok(issues)
    }
}

/// Lists every violated structural invariant of `h`, sorted by subject then
/// rule name.
pub fn validate_hierarchy(h: &DecisionHierarchy) -> ValidationReport {
    let mut out = Vec::new();

    if !h.nodes.contains_key(&h.root_id) {
        out.push(Violation::new(
            &h.root_id,
            "root-missing",
            format!("root `{}` is not a node", h.root_id),
        ));
    }

    let mut parent_count: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (key, node) in &h.nodes {
        if *key != node.id {
            out.push(Violation::new(
                key,
                "id-mismatch",
                format!("keyed as `{key}` but node id is `{}`", node.id),
            ));
        }
        check_shape(node, &mut out);
        let mut seen = BTreeSet::new();
        for child in &node.children {
            if !seen.insert(child.as_str()) {
                out.push(Violation::new(
                    &node.id,
                    "duplicate-child",
                    format!("child `{child}` listed more than once"),
                ));
                continue;
            }
            if h.nodes.contains_key(child) {
                parent_count.entry(child).or_default().push(&node.id);
            } else {
                out.push(Violation::new(
                    &node.id,
                    "dangling-child",
                    format!("child `{child}` does not resolve"),
                ));
            }
        }
    }

    for (child, parents) in &parent_count {
        if *child == h.root_id {
            out.push(Violation::new(
                *child,
                "root-parent",
                format!("root is listed as a child of {}", list(parents)),
            ));
        } else if parents.len() > 1 {
            out.push(Violation::new(
                *child,
                "multiple-parents",
                format!("node has {} parents: {}", parents.len(), list(parents)),
            ));
        }
    }

    for cycle in cycles(h) {
        out.push(Violation::new(
            cycle[0],
            "cycle",
            format!("cycle through {{{}}}", cycle.join(", ")),
        ));
    }

    if h.nodes.contains_key(&h.root_id) {
        let reached = reachable(h, &h.root_id);
        for id in h.nodes.keys() {
            if !reached.contains(id.as_str()) {
                out.push(Violation::new(
                    id,
                    "unreachable",
                    "node is not reachable from the root",
                ));
            }
        }
    }

    check_characteristics(h, &mut out);
    ValidationReport::from_violations(out)
}

fn list(ids: &[&str]) -> String {
    ids.iter()
        .map(|s| format!("`{s}`"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn check_shape(node: &HierarchyNode, out: &mut Vec<Violation>) {
    let leaf_kind = node.kind == NodeKind::Leaf;
    let childless = node.children.is_empty();
    let no_connector = node.connector == Connector::None;
    if leaf_kind != childless {
        let msg = if leaf_kind {
            "kind is leaf but node has children"
        } else {
            "node has no children but kind is not leaf"
        };
        out.push(Violation::new(&node.id, "leaf-shape", msg));
    }
    if childless != no_connector {
        let msg = if childless {
            format!("childless node has connector {}", node.connector)
        } else {
            "node with children needs connector AND or OR".to_string()
        };
        out.push(Violation::new(&node.id, "connector", msg));
    }
}

fn reachable<'a>(h: &'a DecisionHierarchy, start: &'a str) -> BTreeSet<&'a str> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([start]);
    while let Some(id) = queue.pop_front() {
        if !seen.insert(id) {
            continue;
        }
        if let Some(node) = h.nodes.get(id) {
            for c in &node.children {
                if h.nodes.contains_key(c) && !seen.contains(c.as_str()) {
                    queue.push_back(c);
                }
            }
        }
    }
    seen
}

/// Strongly connected components that contain a cycle, each sorted, in
/// order of their smallest id.
fn cycles(h: &DecisionHierarchy) -> Vec<Vec<&str>> {
    let mut reach: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (id, node) in &h.nodes {
        let mut from_children = BTreeSet::new();
        for c in node.children.iter().filter(|c| h.nodes.contains_key(*c)) {
            from_children.extend(reachable(h, c));
        }
        reach.insert(id, from_children);
    }
    let mut assigned = BTreeSet::new();
    let mut out = Vec::new();
    for id in h.nodes.keys().map(String::as_str) {
        if assigned.contains(id) || !reach[id].contains(id) {
            continue;
        }
        let component: Vec<&str> = reach[id]
            .iter()
            .copied()
            .filter(|other| reach[other].contains(id))
            .collect();
        assigned.extend(component.iter().copied());
        out.push(component);
    }
    out
}

fn check_characteristics(h: &DecisionHierarchy, out: &mut Vec<Violation>) {
    for (key, schema) in &h.schemas {
        if *key != schema.group_id {
            out.push(Violation::new(
                key,
                "id-mismatch",
                format!("schema keyed as `{key}` but group_id is `{}`", schema.group_id),
            ));
        }
        let mut names = BTreeSet::new();
        for a in &schema.attributes {
            if !names.insert(a.name.as_str()) {
                out.push(Violation::new(
                    key,
                    "schema-attributes",
                    format!("attribute `{}` declared more than once", a.name),
                ));
            }
        }
    }

    // One attribute name means one kind and one aggregation everywhere.
    let mut first_def: BTreeMap<&str, (&str, &super::AttributeDef)> = BTreeMap::new();
    for (group, schema) in &h.schemas {
        for a in &schema.attributes {
            match first_def.get(a.name.as_str()) {
                None => {
                    first_def.insert(&a.name, (group, a));
                }
                Some((first_group, def)) => {
                    if def.value_kind.name() != a.value_kind.name() || def.aggregation != a.aggregation {
                        out.push(Violation::new(
                            group,
                            "attribute-conflict",
                            format!(
                                "attribute `{}` is declared differently in group `{first_group}`",
                                a.name
                            ),
                        ));
                    }
                }
            }
        }
    }

    let mut referenced = BTreeSet::new();
    for node in h.nodes.values() {
        let Some(table_id) = &node.characteristics else {
            continue;
        };
        referenced.insert(table_id.as_str());
        match h.tables.get(table_id) {
            None => out.push(Violation::new(
                &node.id,
                "characteristics-ref",
                format!("characteristic table `{table_id}` does not exist"),
            )),
            Some(_) if *table_id != node.id => out.push(Violation::new(
                &node.id,
                "table-owner",
                format!("node references the table of `{table_id}`"),
            )),
            Some(_) => {}
        }
    }
    for (key, table) in &h.tables {
        if *key != table.node_id {
            out.push(Violation::new(
                key,
                "id-mismatch",
                format!("table keyed as `{key}` but node_id is `{}`", table.node_id),
            ));
        }
        if !referenced.contains(key.as_str()) {
            out.push(Violation::new(
                key,
                "orphan-table",
                "characteristic table is not attached to any node",
            ));
        }
        for (attr, value) in &table.values {
            if let CharacteristicValue::Series(series) = value {
                if let Err(msg) = series.check() {
                    out.push(Violation::new(key, "series", format!("`{attr}`: {msg}")));
                }
            }
        }
    }

    for group in h.groups() {
        let issues = h.homogeneity_check(group).unwrap_or_default();
        for issue in issues {
            let rule = match issue {
                HomogeneityIssue::MissingSchema { .. } => "missing-schema",
                _ => "homogeneity",
            };
            out.push(Violation::new(
                issue.node(),
                rule,
                format!("group `{group}`: {issue}"),
            ));
        }
    }
}
