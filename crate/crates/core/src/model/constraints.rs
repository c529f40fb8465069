use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Aggregated attribute checked against `payback_limit`.
pub const PAYBACK_ATTRIBUTE: &str = "payback";
/// Aggregated attribute checked against `expenditure_ceiling`.
pub const EXPENDITURE_ATTRIBUTE: &str = "cost";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<=", alias = "≤")]
    Le,
    #[serde(rename = ">=", alias = "≥")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "=", alias = "==")]
    Eq,
}

impl Comparator {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Le => lhs <= rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Lt => lhs < rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Eq => lhs == rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Le => "<=",
            Comparator::Ge => ">=",
            Comparator::Lt => "<",
            Comparator::Gt => ">",
            Comparator::Eq => "=",
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bound {
    pub attribute: String,
    pub comparator: Comparator,
    pub threshold: f64,
}

/// Limits applied to the aggregated values of a configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payback_limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expenditure_ceiling: Option<f64>,
    #[serde(default)]
    pub bounds: Vec<Bound>,
}

/// A constraint that an aggregated configuration value fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintViolation {
    /// `payback_limit`, `expenditure_ceiling` or `bounds[i]`.
    pub constraint: String,
    pub attribute: String,
    pub value: f64,
    pub comparator: Comparator,
    pub threshold: f64,
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} = {} violates {} {}",
            self.constraint, self.attribute, self.value, self.comparator, self.threshold
        )
    }
}

impl ConstraintSet {
    /// All constraints as `(name, attribute, comparator, threshold)`.
    pub fn checks(&self) -> Vec<(String, &str, Comparator, f64)> {
        let mut out = Vec::new();
        if let Some(limit) = self.payback_limit {
            out.push((
                "payback_limit".to_string(),
                PAYBACK_ATTRIBUTE,
                Comparator::Le,
                limit,
            ));
        }
        if let Some(ceiling) = self.expenditure_ceiling {
            out.push((
                "expenditure_ceiling".to_string(),
                EXPENDITURE_ATTRIBUTE,
                Comparator::Le,
                ceiling,
            ));
        }
        for (i, b) in self.bounds.iter().enumerate() {
            out.push((
                format!("bounds[{i}]"),
                b.attribute.as_str(),
                b.comparator,
                b.threshold,
            ));
        }
        out
    }

    /// Checks aggregated values. A constraint whose attribute has no
    /// aggregated value (no selected node carries it) is not violated.
    pub fn violations(&self, aggregated: &BTreeMap<String, f64>) -> Vec<ConstraintViolation> {
        self.checks()
            .into_iter()
            .filter_map(|(constraint, attribute, comparator, threshold)| {
                let value = *aggregated.get(attribute)?;
                (!comparator.holds(value, threshold)).then(|| ConstraintViolation {
                    constraint,
                    attribute: attribute.to_string(),
                    value,
                    comparator,
                    threshold,
                })
            })
            .collect()
    }

    pub fn is_satisfied(&self, aggregated: &BTreeMap<String, f64>) -> bool {
        self.violations(aggregated).is_empty()
    }
}
