use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use innotree_core::model::{ModelError, ProjectModel};
use innotree_core::reporting::{validate_report_config, ReportConfig, ReportError};
use innotree_core::rules::{RuleBase, RuleError};
use innotree_core::star::{DualStarSchema, StarError};
use innotree_core::variants::Direction;
use innotree_core::{ValidationReport, Violation};
use thiserror::Error;

use crate::config::ResolvedConfig;

const SELECTED_PREFIX: &str = "selected:";

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("model {path}: {source}")]
    Model { path: PathBuf, source: Box<ModelError> },
    #[error("rules {path}: {source}")]
    Rules { path: PathBuf, source: Box<RuleError> },
    #[error("schema {path}: {source}")]
    Schema { path: PathBuf, source: Box<StarError> },
    #[error("reports {path}: {source}")]
    Reports { path: PathBuf, source: Box<ReportError> },
}

/// Why a snapshot could not be installed.
#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("snapshot has {n} validation finding(s):\n{report}", n = .0.len(), report = .0)]
    Invalid(ValidationReport),
}

/// Model, rules, analytical store and report definitions loaded together
/// as one immutable unit.
#[derive(Debug, Clone)]
pub struct EngineSnapshot {
    pub version: u64,
    pub model: ProjectModel,
    pub rules: RuleBase,
    pub schema: DualStarSchema,
    pub reports: ReportConfig,
    pub weights: BTreeMap<String, f64>,
    pub direction: Direction,
    /// Series evaluation point used when a request gives none.
    pub param: Option<f64>,
}

impl EngineSnapshot {
    /// Reads every data file named by `cfg`. Does not validate.
    pub fn load(cfg: &ResolvedConfig, version: u64) -> Result<Self, LoadError> {
        let p = &cfg.paths;
        let model = ProjectModel::load(&p.model).map_err(|source| LoadError::Model {
            path: p.model.clone(),
            source: source.into(),
        })?;
        let rules = RuleBase::load(&p.rules).map_err(|source| LoadError::Rules {
            path: p.rules.clone(),
            source: source.into(),
        })?;
        let schema = DualStarSchema::load(&p.schema).map_err(|source| LoadError::Schema {
            path: p.schema.clone(),
            source: source.into(),
        })?;
        let reports = ReportConfig::load(&p.reports).map_err(|source| LoadError::Reports {
            path: p.reports.clone(),
            source: source.into(),
        })?;
        Ok(Self {
            version,
            model,
            rules,
            schema,
            reports,
            weights: cfg.weights.clone(),
            direction: cfg.direction,
            param: cfg.param,
        })
    }

    /// Model and report checks plus the references between the parts.
    pub fn validate(&self) -> ValidationReport {
        self.model
            .validate()
            .merge(validate_report_config(&self.reports, &self.schema))
            .merge(self.cross_references())
    }

    fn cross_references(&self) -> ValidationReport {
        let h = &self.model.hierarchy;
        let mut out = Vec::new();
        let leaves = h.leaf_ids();
        for leaf in self.schema.leaf_ids() {
            if !leaves.contains(leaf) {
                out.push(Violation::new(
                    leaf,
                    "star-leaf",
                    "fact leaf is not a leaf of the hierarchy",
                ));
            }
        }
        for rule in self.rules.rules() {
            let facts = rule
                .antecedents()
                .iter()
                .chain(std::iter::once(rule.consequent()));
            let unknown: BTreeSet<&str> = facts
                .filter_map(|f| f.as_str().strip_prefix(SELECTED_PREFIX))
                .filter(|id| h.node(id).is_none())
                .collect();
            for id in unknown {
                out.push(Violation::new(
                    rule.id(),
                    "rule-reference",
                    format!("`{SELECTED_PREFIX}{id}` names an unknown node"),
                ));
            }
        }
        for attr in self.weights.keys() {
            match h.attribute_def(attr) {
                None => out.push(Violation::new(
                    "weights",
                    "weight-attribute",
                    format!("attribute `{attr}` is not declared by any schema"),
                )),
                Some(def) if !def.value_kind.is_numeric() => out.push(Violation::new(
                    "weights",
                    "weight-attribute",
                    format!("attribute `{attr}` is not numeric"),
                )),
                Some(_) => {}
            }
        }
        ValidationReport::from_violations(out)
    }
}

/// The current snapshot behind a lock that is held only to clone or swap
/// the `Arc`. Readers never see a partially loaded snapshot.
#[derive(Debug)]
pub struct SnapshotStore {
    config: ResolvedConfig,
    current: RwLock<Arc<EngineSnapshot>>,
    reloading: Mutex<()>,
}

impl SnapshotStore {
    /// Loads and validates version 1.
    pub fn open(config: ResolvedConfig) -> Result<Self, StoreError> {
        let snapshot = load_valid(&config, 1)?;
        Ok(Self {
            config,
            current: RwLock::new(Arc::new(snapshot)),
            reloading: Mutex::new(()),
        })
    }

    pub fn current(&self) -> Arc<EngineSnapshot> {
        Arc::clone(&self.current.read().unwrap_or_else(|e| e.into_inner()))
    }

    /// Re-reads the data files and installs them under the next version.
    /// On failure the current snapshot stays in place.
    pub fn reload(&self) -> Result<Arc<EngineSnapshot>, StoreError> {
        let _serial = self.reloading.lock().unwrap_or_else(|e| e.into_inner());
        let next = self.current().version + 1;
        let snapshot = Arc::new(load_valid(&self.config, next)?);
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = Arc::clone(&snapshot);
        Ok(snapshot)
    }
}

fn load_valid(config: &ResolvedConfig, version: u64) -> Result<EngineSnapshot, StoreError> {
    let snapshot = EngineSnapshot::load(config, version)?;
    let report = snapshot.validate();
    if report.is_valid() {
        Ok(snapshot)
    } else {
        Err(StoreError::Invalid(report))
    }
}
