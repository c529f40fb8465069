//! Dual star schema: two dimension hierarchies (goals, decisions) over one
//! shared leaf set, leaf-grained fact tables, the main-table selection
//! operator and roll-up aggregation.

mod csv_io;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{export_fact_csv, import_fact_csv};

#[derive(Debug, Error)]
pub enum StarError {
    #[error("cannot access {path}: {source}")]
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
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("unknown fact table `{name}`; available: {}", .available.join(", "))]
    UnknownTable { name: String, available: Vec<String> },
    #[error("unknown level `{level}` in dimension {dim}; available: {}", .available.join(", "))]
    UnknownLevel {
        dim: DimensionId,
        level: String,
        available: Vec<String>,
    },
    #[error("unknown measure `{measure}` in table `{table}`; available: {}", .available.join(", "))]
    UnknownMeasure {
        table: String,
        measure: String,
        available: Vec<String>,
    },
    #[error("csv error: {0}")]
    Csv(String),
}

impl From<serde_json::Error> for StarError {
    fn from(e: serde_json::Error) -> Self {
        StarError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimensionId {
    Goals,
    Decisions,
}

impl fmt::Display for DimensionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DimensionId::Goals => "goals",
            DimensionId::Decisions => "decisions",
        })
    }
}

/// Levels run coarsest to finest; `membership[leaf]` holds one member per
/// level and ends with the leaf itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionHierarchy {
    pub id: DimensionId,
    pub levels: Vec<String>,
    pub membership: BTreeMap<String, Vec<String>>,
}

impl DimensionHierarchy {
    pub fn level_index(&self, level: &str) -> Result<usize, StarError> {
        self.levels
            .iter()
            .position(|l| l == level)
            .ok_or_else(|| StarError::UnknownLevel {
                dim: self.id,
                level: level.to_string(),
                available: self.levels.clone(),
            })
    }

    pub fn member(&self, leaf: &str, level_index: usize) -> Option<&str> {
        self.membership.get(leaf)?.get(level_index).map(String::as_str)
    }

    fn check(&self) -> Result<(), StarError> {
        let bad = |msg: String| Err(StarError::Integrity(format!("dimension {}: {msg}", self.id)));
        if self.levels.is_empty() {
            return bad("no levels".into());
        }
        let unique: BTreeSet<&String> = self.levels.iter().collect();
        if unique.len() != self.levels.len() {
            return bad("duplicate level names".into());
        }
        // member at level i -> member at level i-1
        let mut parent_of: Vec<BTreeMap<&str, &str>> = vec![BTreeMap::new(); self.levels.len()];
        for (leaf, path) in &self.membership {
            if path.len() != self.levels.len() {
                return bad(format!(
                    "leaf `{leaf}` has {} members for {} levels",
                    path.len(),
                    self.levels.len()
                ));
            }
            if path.last() != Some(leaf) {
                return bad(format!("path of leaf `{leaf}` must end with the leaf itself"));
            }
            for i in 1..path.len() {
                let prev = parent_of[i].insert(&path[i], &path[i - 1]);
                if let Some(prev) = prev {
                    if prev != path[i - 1] {
                        return bad(format!(
                            "member `{}` at level `{}` has two parents: `{prev}` and `{}`",
                            path[i],
                            self.levels[i],
                            path[i - 1]
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactRow {
    pub leaf_id: String,
    pub measures: BTreeMap<String, f64>,
}

impl FactRow {
    pub fn new<I, S>(leaf_id: impl Into<String>, measures: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self {
            leaf_id: leaf_id.into(),
            measures: measures.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactTable {
    pub name: String,
    pub rows: Vec<FactRow>,
}

impl FactTable {
    /// Measure names of the table (those of the first row).
    pub fn measure_names(&self) -> Vec<String> {
        self.rows
            .first()
            .map(|r| r.measures.keys().cloned().collect())
            .unwrap_or_default()
    }

    fn check(&self, leaves: &BTreeSet<&str>) -> Result<(), StarError> {
        let names: Option<BTreeSet<&String>> = self.rows.first().map(|r| r.measures.keys().collect());
        for (i, row) in self.rows.iter().enumerate() {
            if !leaves.contains(row.leaf_id.as_str()) {
                return Err(StarError::Integrity(format!(
                    "fact table `{}` row {i}: leaf `{}` is not in the dimensions",
                    self.name, row.leaf_id
                )));
            }
            if Some(row.measures.keys().collect()) != names {
                return Err(StarError::Integrity(format!(
                    "fact table `{}` row {i}: measure names differ from the first row",
                    self.name
                )));
            }
            if let Some((m, _)) = row.measures.iter().find(|(_, v)| !v.is_finite()) {
                return Err(StarError::Integrity(format!(
                    "fact table `{}` row {i}: measure `{m}` is not finite",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Two star schemas sharing their leaf fact tables, one table designated
/// main.
#[derive(Debug, Clone, PartialEq)]
pub struct DualStarSchema {
    goals: DimensionHierarchy,
    decisions: DimensionHierarchy,
    facts: BTreeMap<String, FactTable>,
    main: String,
}

/// File layout of a schema manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaManifest {
    pub dims: Vec<DimensionHierarchy>,
    #[serde(default)]
    pub facts: Vec<FactEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub main: Option<String>,
}

/// A fact table given inline or as a CSV file relative to the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<FactRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

impl DualStarSchema {
    pub fn new(
        dims: Vec<DimensionHierarchy>,
        facts: Vec<FactTable>,
        main: Option<String>,
    ) -> Result<Self, StarError> {
        let mut goals = None;
        let mut decisions = None;
        for d in dims {
            let slot = match d.id {
                DimensionId::Goals => &mut goals,
                DimensionId::Decisions => &mut decisions,
            };
            if slot.replace(d).is_some() {
                return Err(StarError::Integrity("dimension given twice".into()));
            }
        }
        let (Some(goals), Some(decisions)) = (goals, decisions) else {
            return Err(StarError::Integrity(
                "both the goals and the decisions dimension are required".into(),
            ));
        };
        goals.check()?;
        decisions.check()?;

        let goal_leaves: BTreeSet<&str> = goals.membership.keys().map(String::as_str).collect();
        let decision_leaves: BTreeSet<&str> = decisions.membership.keys().map(String::as_str).collect();
        if let Some(leaf) = goal_leaves.difference(&decision_leaves).next() {
            return Err(StarError::Integrity(format!(
                "leaf `{leaf}` is in goals but not in decisions"
            )));
        }
        if let Some(leaf) = decision_leaves.difference(&goal_leaves).next() {
            return Err(StarError::Integrity(format!(
                "leaf `{leaf}` is in decisions but not in goals"
            )));
        }

        let mut fact_map = BTreeMap::new();
        for t in facts {
            t.check(&goal_leaves)?;
            let name = t.name.clone();
            if fact_map.insert(name.clone(), t).is_some() {
                return Err(StarError::Integrity(format!("fact table `{name}` given twice")));
            }
        }
        let main = match main {
            Some(m) if fact_map.contains_key(&m) => m,
            Some(m) => {
                return Err(StarError::Integrity(format!(
                    "main fact table `{m}` does not exist"
                )))
            }
            None => {
                return Err(StarError::Integrity(
                    "main fact table is unresolvable (none designated)".into(),
                ))
            }
        };
        Ok(Self {
            goals,
            decisions,
            facts: fact_map,
            main,
        })
    }

    pub fn dim(&self, id: DimensionId) -> &DimensionHierarchy {
        match id {
            DimensionId::Goals => &self.goals,
            DimensionId::Decisions => &self.decisions,
        }
    }

    pub fn facts(&self) -> &BTreeMap<String, FactTable> {
        &self.facts
    }

    pub fn main(&self) -> &str {
        &self.main
    }

    pub fn leaf_ids(&self) -> impl Iterator<Item = &str> {
        self.goals.membership.keys().map(String::as_str)
    }

    pub fn table(&self, name: Option<&str>) -> Result<&FactTable, StarError> {
        let name = name.unwrap_or(&self.main);
        self.facts.get(name).ok_or_else(|| StarError::UnknownTable {
            name: name.to_string(),
            available: self.facts.keys().cloned().collect(),
        })
    }

    /// Copy of the schema with `name` as the main fact table.
    pub fn select_main_fact_table(&self, name: &str) -> Result<DualStarSchema, StarError> {
        self.table(Some(name))?;
        Ok(Self {
            main: name.to_string(),
            ..self.clone()
        })
    }

    pub fn to_manifest(&self) -> SchemaManifest {
        SchemaManifest {
            dims: vec![self.goals.clone(), self.decisions.clone()],
            facts: self
                .facts
                .values()
                .map(|t| FactEntry {
                    name: t.name.clone(),
                    rows: Some(t.rows.clone()),
                    csv: None,
                })
                .collect(),
            main: Some(self.main.clone()),
        }
    }

    /// Builds a schema from a manifest; CSV references resolve against
    /// `base_dir`.
    pub fn from_manifest(m: SchemaManifest, base_dir: &Path) -> Result<Self, StarError> {
        let mut tables = Vec::with_capacity(m.facts.len());
        for entry in m.facts {
            let table = match (entry.rows, entry.csv) {
                (Some(rows), None) => FactTable {
                    name: entry.name,
                    rows,
                },
                (None, Some(csv)) => {
                    let path = base_dir.join(csv);
                    let text =
                        std::fs::read_to_string(&path).map_err(|source| StarError::Io { path, source })?;
                    import_fact_csv(&entry.name, &text)?
                }
                _ => {
                    return Err(StarError::Integrity(format!(
                        "fact table `{}` needs exactly one of `rows` or `csv`",
                        entry.name
                    )))
                }
            };
            tables.push(table);
        }
        Self::new(m.dims, tables, m.main)
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, StarError> {
        Self::from_manifest(serde_json::from_str(text)?, base_dir)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_manifest()).expect("manifest serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StarError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| StarError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn store(&self, path: impl AsRef<Path>) -> Result<(), StarError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_pretty() + "\n").map_err(|source| StarError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Groups the rows of a fact table by their member at `query.level` and
    /// aggregates each requested measure.
    pub fn rollup(&self, query: &RollupQuery) -> Result<RollupGrid, StarError> {
        let table = self.table(query.table.as_deref())?;
        let dim = self.dim(query.dim);
        let level = dim.level_index(&query.level)?;
        let available = table.measure_names();
        for m in &query.measures {
            // an empty table has no measure names to check against
            if !table.rows.is_empty() && !available.contains(&m.name) {
                return Err(StarError::UnknownMeasure {
                    table: table.name.clone(),
                    measure: m.name.clone(),
                    available,
                });
            }
        }
        let mut groups: BTreeMap<&str, Vec<Accumulator>> = BTreeMap::new();
        for row in &table.rows {
            let member = dim
                .member(&row.leaf_id, level)
                .expect("fact leaves are checked against the dimensions");
            let accs = groups
                .entry(member)
                .or_insert_with(|| vec![Accumulator::default(); query.measures.len()]);
            for (acc, m) in accs.iter_mut().zip(&query.measures) {
                acc.push(row.measures[&m.name]);
            }
        }
        Ok(RollupGrid {
            dim: query.dim,
            level: query.level.clone(),
            table: table.name.clone(),
            measures: query.measures.clone(),
            groups: groups
                .into_iter()
                .map(|(member, accs)| RollupGroup {
                    member: member.to_string(),
                    count: accs.first().map_or(0, |a| a.count),
                    values: accs
                        .iter()
                        .zip(&query.measures)
                        .map(|(a, m)| a.finish(m.agg))
                        .collect(),
                })
                .collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RollupAgg {
    Sum,
    Min,
    Max,
    Mean,
}

impl fmt::Display for RollupAgg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RollupAgg::Sum => "sum",
            RollupAgg::Min => "min",
            RollupAgg::Max => "max",
            RollupAgg::Mean => "mean",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub name: String,
    pub agg: RollupAgg,
}

impl MeasureSpec {
    pub fn new(name: impl Into<String>, agg: RollupAgg) -> Self {
        Self {
            name: name.into(),
            agg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RollupQuery {
    pub dim: DimensionId,
    pub level: String,
    pub measures: Vec<MeasureSpec>,
    /// Defaults to the main fact table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RollupGroup {
    pub member: String,
    /// Number of fact rows in the group.
    pub count: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RollupGrid {
    pub dim: DimensionId,
    pub level: String,
    pub table: String,
    pub measures: Vec<MeasureSpec>,
    /// Ordered by member name.
    pub groups: Vec<RollupGroup>,
}

impl RollupGrid {
    pub fn value(&self, member: &str, measure: &str) -> Option<f64> {
        let col = self.measures.iter().position(|m| m.name == measure)?;
        let group = self.groups.iter().find(|g| g.member == member)?;
        Some(group.values[col])
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Accumulator {
    pub(crate) sum: f64,
    pub(crate) min: f64,
    pub(crate) max: f64,
    pub(crate) count: usize,
}

impl Default for Accumulator {
    fn default() -> Self {
        Self {
            sum: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            count: 0,
        }
    }
}

impl Accumulator {
    pub(crate) fn push(&mut self, v: f64) {
        self.sum += v;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
        self.count += 1;
    }

    pub(crate) fn finish(&self, agg: RollupAgg) -> f64 {
        match agg {
            RollupAgg::Sum => self.sum,
            RollupAgg::Min => self.min,
            RollupAgg::Max => self.max,
            RollupAgg::Mean => self.sum / self.count as f64,
        }
    }
}

/// Shortest round-trip decimal form with `.` as separator.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        // drop the sign of negative zero
        return "0".to_string();
    }
    format!("{v}")
}
