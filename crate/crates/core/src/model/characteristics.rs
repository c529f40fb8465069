use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::LookupError;

/// Type of a characteristic attribute. Units are labels only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ValueKind {
    Numeric { unit: String },
    Categorical,
    Boolean,
}

impl ValueKind {
    pub fn is_numeric(&self) -> bool {
        matches!(self, ValueKind::Numeric { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ValueKind::Numeric { .. } => "numeric",
            ValueKind::Categorical => "categorical",
            ValueKind::Boolean => "boolean",
        }
    }
}

/// How an attribute folds over the nodes of a configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Sum,
    Min,
    Max,
    WeightedMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeDef {
    pub name: String,
    pub value_kind: ValueKind,
    #[serde(default)]
    pub aggregation: Aggregation,
}

impl AttributeDef {
    pub fn numeric(name: impl Into<String>, unit: impl Into<String>, aggregation: Aggregation) -> Self {
        Self {
            name: name.into(),
            value_kind: ValueKind::Numeric { unit: unit.into() },
            aggregation,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value_kind: ValueKind::Categorical,
            aggregation: Aggregation::default(),
        }
    }
}

/// The attribute set shared by every node of one homogeneity group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacteristicSchema {
    pub group_id: String,
    pub attributes: Vec<AttributeDef>,
}

impl CharacteristicSchema {
    pub fn new(group_id: impl Into<String>, attributes: Vec<AttributeDef>) -> Self {
        Self {
            group_id: group_id.into(),
            attributes,
        }
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }
}

/// A sampled function of one parameter, e.g. a payback or expenditure curve.
///
/// Points are `(parameter, value)` pairs with strictly increasing parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Series(pub Vec<(f64, f64)>);

impl Series {
    /// Returns a description of the first broken invariant, if any.
    pub fn check(&self) -> Result<(), String> {
        if self.0.len() < 2 {
            return Err(format!("series needs at least 2 points, has {}", self.0.len()));
        }
        if self.0.iter().any(|(p, v)| !p.is_finite() || !v.is_finite()) {
            return Err("series contains a non-finite number".to_string());
        }
        for w in self.0.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(format!(
                    "series parameters must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                ));
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> Option<(f64, f64)> {
        Some((self.0.first()?.0, self.0.last()?.0))
    }

    /// Piecewise-linear interpolation. Returns `None` outside the sampled
    /// range; sample points are returned exactly.
    pub fn interpolate(&self, param: f64) -> Option<f64> {
        let points = &self.0;
        let (lo, hi) = self.domain()?;
        if !(lo..=hi).contains(&param) {
            return None;
        }
        let idx = points.partition_point(|(p, _)| *p < param);
        let (p1, v1) = points[idx];
        if p1 == param {
            return Some(v1);
        }
        let (p0, v0) = points[idx - 1];
        Some(v0 + (v1 - v0) * (param - p0) / (p1 - p0))
    }
}

/// A characteristic value as stored in a node table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CharacteristicValue {
    Boolean(bool),
    Number(f64),
    Text(String),
    Series(Series),
}

impl CharacteristicValue {
    pub fn kind_name(&self) -> &'static str {
        match self {
            CharacteristicValue::Boolean(_) => "boolean",
            CharacteristicValue::Number(_) => "numeric",
            CharacteristicValue::Text(_) => "categorical",
            CharacteristicValue::Series(_) => "numeric series",
        }
    }

    pub fn matches(&self, kind: &ValueKind) -> bool {
        matches!(
            (self, kind),
            (CharacteristicValue::Boolean(_), ValueKind::Boolean)
                | (CharacteristicValue::Number(_), ValueKind::Numeric { .. })
                | (CharacteristicValue::Series(_), ValueKind::Numeric { .. })
                | (CharacteristicValue::Text(_), ValueKind::Categorical)
        )
    }
}

/// A looked-up, fully evaluated characteristic.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
    Boolean(bool),
}

impl Scalar {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Scalar::Number(x) => Some(*x),
            _ => None,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Number(x) => write!(f, "{x}"),
            Scalar::Text(s) => f.write_str(s),
            Scalar::Boolean(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacteristicTable {
    pub node_id: String,
    pub values: BTreeMap<String, CharacteristicValue>,
}

impl CharacteristicTable {
    pub fn new(node_id: impl Into<String>) -> Self {
        Self {
            node_id: node_id.into(),
            values: BTreeMap::new(),
        }
    }

    pub fn with(mut self, attr: impl Into<String>, value: CharacteristicValue) -> Self {
        self.values.insert(attr.into(), value);
        self
    }

    /// Evaluates `attr`, interpolating series at `param`.
    pub fn evaluate(&self, attr: &str, param: Option<f64>) -> Result<Scalar, LookupError> {
        let value = self.values.get(attr).ok_or_else(|| LookupError::NotFound {
            node: self.node_id.clone(),
            attribute: attr.to_string(),
        })?;
        Ok(match value {
            CharacteristicValue::Boolean(b) => Scalar::Boolean(*b),
            CharacteristicValue::Number(x) => Scalar::Number(*x),
            CharacteristicValue::Text(s) => Scalar::Text(s.clone()),
            CharacteristicValue::Series(series) => {
                let param = param.ok_or_else(|| LookupError::MissingParam {
                    node: self.node_id.clone(),
                    attribute: attr.to_string(),
                })?;
                let (min, max) = series.domain().unwrap_or((f64::NAN, f64::NAN));
                let value = series.interpolate(param).ok_or(LookupError::OutOfRange {
                    node: self.node_id.clone(),
                    attribute: attr.to_string(),
                    param,
                    min,
                    max,
                })?;
                Scalar::Number(value)
            }
        })
    }
}

/// Kind of homogeneity breach for one node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum HomogeneityIssue {
    /// Schema declares the attribute, node table lacks it.
    Missing { node: String, attribute: String },
    /// Node table carries an attribute the schema does not declare.
    Undeclared { node: String, attribute: String },
    KindMismatch {
        node: String,
        attribute: String,
        expected: String,
        found: String,
    },
    /// Node carries characteristics but its group has no schema.
    MissingSchema { node: String },
}

impl HomogeneityIssue {
    pub fn node(&self) -> &str {
        match self {
            HomogeneityIssue::Missing { node, .. }
            | HomogeneityIssue::Undeclared { node, .. }
            | HomogeneityIssue::KindMismatch { node, .. }
            | HomogeneityIssue::MissingSchema { node } => node,
        }
    }
}

impl fmt::Display for HomogeneityIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HomogeneityIssue::Missing { attribute, .. } => {
                write!(
                    f,
                    "attribute `{attribute}` declared by the group schema is missing"
                )
            }
            HomogeneityIssue::Undeclared { attribute, .. } => {
                write!(f, "attribute `{attribute}` is not declared by the group schema")
            }
            HomogeneityIssue::KindMismatch {
                attribute,
                expected,
                found,
                ..
            } => write!(f, "attribute `{attribute}` should be {expected} but is {found}"),
            HomogeneityIssue::MissingSchema { .. } => {
                f.write_str("node carries characteristics but its group has no schema")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Series {
        Series(vec![(0.0, 0.0), (10.0, 100.0)])
    }

    #[test]
    fn midpoint_of_line() {
        assert_eq!(line().interpolate(5.0), Some(50.0));
    }

    #[test]
    fn no_extrapolation() {
        assert_eq!(line().interpolate(11.0), None);
        assert_eq!(line().interpolate(-0.5), None);
    }

    #[test]
    fn exact_at_samples() {
        let s = Series(vec![(0.1, 0.3), (0.7, 1.0 / 3.0), (2.9, -4.2)]);
        for &(p, v) in &s.0 {
            assert_eq!(s.interpolate(p), Some(v));
        }
    }

    #[test]
    fn series_checks() {
        assert!(Series(vec![(0.0, 1.0)]).check().is_err());
        assert!(Series(vec![(1.0, 1.0), (1.0, 2.0)]).check().is_err());
        assert!(Series(vec![(2.0, 1.0), (1.0, 2.0)]).check().is_err());
        assert!(line().check().is_ok());
    }

    #[test]
    fn untagged_values_parse() {
        let t: CharacteristicTable = serde_json::from_str(
            r#"{"node_id":"a","values":{"cost":12.5,"risk":"high","ok":true,"payback":[[0,0],[10,100]]}}"#,
        )
        .unwrap();
        assert_eq!(t.values["cost"], CharacteristicValue::Number(12.5));
        assert_eq!(t.values["risk"], CharacteristicValue::Text("high".into()));
        assert_eq!(t.values["ok"], CharacteristicValue::Boolean(true));
        assert_eq!(t.values["payback"], CharacteristicValue::Series(line()));
    }

    #[test]
    fn evaluate_series_requires_param() {
        let t = CharacteristicTable::new("a").with("payback", CharacteristicValue::Series(line()));
        assert!(matches!(
            t.evaluate("payback", None),
            Err(LookupError::MissingParam { .. })
        ));
        assert_eq!(t.evaluate("payback", Some(2.5)).unwrap(), Scalar::Number(25.0));
    }

    proptest::proptest! {
        #[test]
        fn monotone_between_samples(
            p0 in -100.0f64..100.0, dp in 0.01f64..50.0,
            v0 in -1e3f64..1e3, v1 in -1e3f64..1e3,
            a in 0.0f64..=1.0, b in 0.0f64..=1.0,
        ) {
            let s = Series(vec![(p0, v0), (p0 + dp, v1)]);
            let (x, y) = if a <= b { (a, b) } else { (b, a) };
            let fx = s.interpolate(p0 + x * dp).unwrap();
            let fy = s.interpolate(p0 + y * dp).unwrap();
            if v0 <= v1 {
                proptest::prop_assert!(fx <= fy + 1e-9);
            } else {
                proptest::prop_assert!(fx + 1e-9 >= fy);
            }
        }
    }
}
