//! Production rules over propositional facts, forward chaining with a
//! firing trace, and derivation trees rebuilt from that trace.

mod binding;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use binding::{ground_facts, Binding, BindingSpec};

use crate::model::LookupError;

/// Reserved consequent that vetoes a configuration.
pub const INFEASIBLE: &str = "infeasible";
/// Sentinel fact that is always true for rules mined from trees.
pub const TRUE_FACT: &str = "true";

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("fact symbols must be non-empty")]
    EmptySymbol,
    #[error("rule `{0}` has no antecedents")]
    NoAntecedents(String),
    #[error("rule `{0}` concludes one of its own antecedents")]
    SelfSupporting(String),
    #[error("duplicate rule id `{0}`")]
    DuplicateId(String),
    #[error("fact `{0}` was not derived")]
    NotDerived(String),
    #[error("unknown node `{0}` in selection")]
    UnknownNode(String),
    #[error("binding `{symbol}` on `{node}`: {source}")]
    Binding {
        symbol: String,
        node: String,
        #[source]
        source: LookupError,
    },
    #[error("binding `{symbol}` on `{node}`: attribute `{attribute}` is not numeric")]
    NonNumericBinding {
        symbol: String,
        node: String,
        attribute: String,
    },
    #[error("cannot read rules: {0}")]
    Io(#[from] std::io::Error),
    #[error("rules parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

/// A proposition, compared by exact text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Fact(String);

impl Fact {
    pub fn new(symbol: impl Into<String>) -> Result<Self, RuleError> {
        let symbol = symbol.into();
        if symbol.is_empty() {
            return Err(RuleError::EmptySymbol);
        }
        Ok(Self(symbol))
    }

    /// `selected:<id>`
    pub fn selected(node_id: &str) -> Self {
        Self(format!("selected:{node_id}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Fact {
    type Error = RuleError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Fact::new(value)
    }
}

impl TryFrom<&str> for Fact {
    type Error = RuleError;

    fn try_from(value: &str) -> Result<Self, Self::Error> {
        Fact::new(value)
    }
}

impl From<Fact> for String {
    fn from(f: Fact) -> String {
        f.0
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for Fact {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// `IF a1 and ... and an THEN c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RuleRecord", into = "RuleRecord")]
pub struct ProductionRule {
    id: String,
    antecedents: Vec<Fact>,
    consequent: Fact,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleRecord {
    id: String,
    #[serde(rename = "if")]
    antecedents: Vec<Fact>,
    #[serde(rename = "then")]
    consequent: Fact,
}

impl TryFrom<RuleRecord> for ProductionRule {
    type Error = RuleError;

    fn try_from(r: RuleRecord) -> Result<Self, Self::Error> {
        ProductionRule::new(r.id, r.antecedents, r.consequent)
    }
}

impl From<ProductionRule> for RuleRecord {
    fn from(r: ProductionRule) -> Self {
        RuleRecord {
            id: r.id,
            antecedents: r.antecedents,
            consequent: r.consequent,
        }
    }
}

impl ProductionRule {
    /// Repeated antecedents collapse, keeping first-seen order.
    pub fn new(
        id: impl Into<String>,
        antecedents: impl IntoIterator<Item = Fact>,
        consequent: Fact,
    ) -> Result<Self, RuleError> {
        let id = id.into();
        let mut seen = BTreeSet::new();
        let antecedents: Vec<Fact> = antecedents
            .into_iter()
            .filter(|f| seen.insert(f.clone()))
            .collect();
        if antecedents.is_empty() {
            return Err(RuleError::NoAntecedents(id));
        }
        if seen.contains(&consequent) {
            return Err(RuleError::SelfSupporting(id));
        }
        Ok(Self {
            id,
            antecedents,
            consequent,
        })
    }

    /// Convenience constructor from string symbols.
    pub fn parse(id: &str, antecedents: &[&str], consequent: &str) -> Result<Self, RuleError> {
        let ants = antecedents
            .iter()
            .map(|s| Fact::new(*s))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(id, ants, Fact::new(consequent)?)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn antecedents(&self) -> &[Fact] {
        &self.antecedents
    }

    pub fn consequent(&self) -> &Fact {
        &self.consequent
    }

    fn applies(&self, facts: &BTreeSet<Fact>) -> bool {
        self.antecedents.iter().all(|a| facts.contains(a))
    }
}

impl fmt::Display for ProductionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ants: Vec<&str> = self.antecedents.iter().map(Fact::as_str).collect();
        write!(
            f,
            "{}: IF {} THEN {}",
            self.id,
            ants.join(" and "),
            self.consequent
        )
    }
}

/// Ordered rules with unique ids. Serialized as the rules file: a JSON list
/// of `{id, if, then}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ProductionRule>", into = "Vec<ProductionRule>")]
pub struct RuleBase {
    rules: Vec<ProductionRule>,
}

impl TryFrom<Vec<ProductionRule>> for RuleBase {
    type Error = RuleError;

    fn try_from(rules: Vec<ProductionRule>) -> Result<Self, Self::Error> {
        RuleBase::new(rules)
    }
}

impl From<RuleBase> for Vec<ProductionRule> {
    fn from(rb: RuleBase) -> Self {
        rb.rules
    }
}

impl RuleBase {
    pub fn new(rules: Vec<ProductionRule>) -> Result<Self, RuleError> {
        let mut ids = BTreeSet::new();
        for r in &rules {
            if !ids.insert(r.id.as_str()) {
                return Err(RuleError::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self { rules })
    }

    pub fn rules(&self) -> &[ProductionRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ProductionRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn from_json(text: &str) -> Result<Self, RuleError> {
        serde_json::from_str(text).map_err(|e| RuleError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RuleError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("rules serialize")
    }

    /// Number of distinct consequents, the upper bound on firings.
    pub fn distinct_consequents(&self) -> usize {
        self.rules
            .iter()
            .map(|r| &r.consequent)
            .collect::<BTreeSet<_>>()
            .len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Firing {
    pub rule: String,
    pub fact: Fact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainResult {
    pub closure: BTreeSet<Fact>,
    pub trace: Vec<Firing>,
}

impl ChainResult {
    pub fn contains(&self, symbol: &str) -> bool {
        self.closure.contains(symbol)
    }
}

/// Least fixpoint of `seed` under `rb`.
///
/// Rules are scanned in declaration order and the scan repeats until a
/// full pass fires nothing. A rule fires only when its consequent is new,
/// so every fact is derived at most once.
pub fn forward_chain(rb: &RuleBase, seed: impl IntoIterator<Item = Fact>) -> ChainResult {
    let mut closure: BTreeSet<Fact> = seed.into_iter().collect();
    let mut trace = Vec::new();
    loop {
        let mut fired = false;
        for rule in &rb.rules {
            if !closure.contains(&rule.consequent) && rule.applies(&closure) {
                closure.insert(rule.consequent.clone());
                trace.push(Firing {
                    rule: rule.id.clone(),
                    fact: rule.consequent.clone(),
                });
                fired = true;
            }
        }
        if !fired {
            break;
        }
    }
    ChainResult { closure, trace }
}

/// How a fact entered the closure: a seed leaf, or a rule firing over the
/// derivations of its antecedents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Derivation {
    pub fact: Fact,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub premises: Vec<Derivation>,
}

impl Derivation {
    pub fn is_seed(&self) -> bool {
        self.rule.is_none()
    }

    pub fn depth(&self) -> usize {
        1 + self.premises.iter().map(Derivation::depth).max().unwrap_or(0)
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.rule {
            None => write!(f, "{}", self.fact),
            Some(rule) => {
                let premises: Vec<String> = self.premises.iter().map(|p| p.to_string()).collect();
                write!(f, "{}←{}←({})", self.fact, rule, premises.join(", "))
            }
        }
    }
}

/// Rebuilds the derivation of `fact` from a chaining result.
pub fn explain(rb: &RuleBase, result: &ChainResult, fact: &Fact) -> Result<Derivation, RuleError> {
    let fired_by: BTreeMap<&Fact, &str> = result
        .trace
        .iter()
        .map(|firing| (&firing.fact, firing.rule.as_str()))
        .collect();
    build_derivation(rb, result, &fired_by, fact)
}

fn build_derivation(
    rb: &RuleBase,
    result: &ChainResult,
    fired_by: &BTreeMap<&Fact, &str>,
    fact: &Fact,
) -> Result<Derivation, RuleError> {
    let not_derived = || RuleError::NotDerived(fact.to_string());
    if !result.closure.contains(fact) {
        return Err(not_derived());
    }
    let Some(rule_id) = fired_by.get(fact) else {
        return Ok(Derivation {
            fact: fact.clone(),
            rule: None,
            premises: Vec::new(),
        });
    };
    let rule = rb.get(rule_id).ok_or_else(not_derived)?;
    let premises = rule
        .antecedents
        .iter()
        .map(|a| build_derivation(rb, result, fired_by, a))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Derivation {
        fact: fact.clone(),
        rule: Some(rule.id.clone()),
        premises,
    })
}
