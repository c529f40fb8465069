use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Fact, RuleError};
use crate::model::{CharacteristicValue, Comparator, DecisionHierarchy, LookupError};
use crate::validation::{ValidationReport, Violation};

/// Grounds `symbol` when `node` is selected and its `attribute` compares
/// true against `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Binding {
    pub symbol: Fact,
    pub node: String,
    pub attribute: String,
    pub comparator: Comparator,
    pub threshold: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BindingSpec(pub Vec<Binding>);

impl BindingSpec {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Every binding's node must exist and carry a numeric `attribute`.
    pub fn validate(&self, h: &DecisionHierarchy) -> ValidationReport {
        let violations = self
            .0
            .iter()
            .filter_map(|b| check_binding(h, b).err())
            .map(|e| {
                let subject = match &e {
                    RuleError::Binding { symbol, .. } | RuleError::NonNumericBinding { symbol, .. } => {
                        symbol.clone()
                    }
                    _ => "bindings".to_string(),
                };
                Violation::new(subject, "binding", e.to_string())
            })
            .collect();
        ValidationReport::from_violations(violations)
    }
}

fn check_binding(h: &DecisionHierarchy, b: &Binding) -> Result<(), RuleError> {
    let wrap = |source: LookupError| RuleError::Binding {
        symbol: b.symbol.to_string(),
        node: b.node.clone(),
        source,
    };
    if h.node(&b.node).is_none() {
        return Err(wrap(LookupError::UnknownNode(b.node.clone())));
    }
    let value = h
        .table_of(&b.node)
        .and_then(|t| t.values.get(&b.attribute))
        .ok_or_else(|| {
            wrap(LookupError::NotFound {
                node: b.node.clone(),
                attribute: b.attribute.clone(),
            })
        })?;
    match value {
        CharacteristicValue::Number(_) | CharacteristicValue::Series(_) => Ok(()),
        _ => Err(RuleError::NonNumericBinding {
            symbol: b.symbol.to_string(),
            node: b.node.clone(),
            attribute: b.attribute.clone(),
        }),
    }
}

/// Facts describing a selection: `selected:<id>` for every selected node
/// plus each binding symbol whose node is selected and whose comparison
/// holds. Series attributes are evaluated at `param`.
pub fn ground_facts(
    h: &DecisionHierarchy,
    selection: &BTreeSet<String>,
    bindings: &BindingSpec,
    param: Option<f64>,
) -> Result<BTreeSet<Fact>, RuleError> {
    for id in selection {
        if h.node(id).is_none() {
            return Err(RuleError::UnknownNode(id.clone()));
        }
    }
    for b in &bindings.0 {
        check_binding(h, b)?;
    }
    let mut facts: BTreeSet<Fact> = selection.iter().map(|id| Fact::selected(id)).collect();
    for b in &bindings.0 {
        if !selection.contains(&b.node) {
            continue;
        }
        let value = h
            .lookup_characteristic(&b.node, &b.attribute, param)
            .map_err(|source| RuleError::Binding {
                symbol: b.symbol.to_string(),
                node: b.node.clone(),
                source,
            })?
            .as_number()
            .expect("binding attribute checked numeric");
        if b.comparator.holds(value, b.threshold) {
            facts.insert(b.symbol.clone());
        }
    }
    Ok(facts)
}
