//! Seeded random fixtures and brute-force oracles shared by the innotree
//! test suites. The oracles deliberately avoid the library code paths they
//! are compared against: closures are computed by naive whole-rulebase
//! sweeps, aggregates by direct folds over the fixture's own numbers.

use std::collections::{BTreeMap, BTreeSet};

use innotree_core::mining::{Attribute, LabeledDataset, LabeledRow};
use innotree_core::model::{
    Aggregation, AttributeDef, Bound, CharacteristicSchema, CharacteristicTable, CharacteristicValue,
    Comparator, Connector, ConstraintSet, DecisionHierarchy, HierarchyNode, NodeKind,
};
use innotree_core::rules::{Binding, BindingSpec, Fact, ProductionRule, RuleBase};
use innotree_core::star::{DimensionHierarchy, DimensionId, DualStarSchema, FactRow, FactTable};
use innotree_core::variants::admissible;
use rand::seq::SliceRandom;
use rand::Rng;

pub const GROUP: &str = "g";

/// A random hierarchy plus everything that filters its configurations,
/// with the raw numbers kept for the oracle.
#[derive(Debug, Clone)]
pub struct HierarchyFixture {
    pub hierarchy: DecisionHierarchy,
    pub constraints: ConstraintSet,
    pub rules: RuleBase,
    pub bindings: BindingSpec,
    pub cost: BTreeMap<String, f64>,
    pub quality: BTreeMap<String, f64>,
    /// `(symbol, node, minimum cost)` for each binding.
    pub binding_specs: Vec<(String, String, f64)>,
    pub ceiling: Option<f64>,
    pub min_quality: Option<f64>,
}

/// A random AND/OR tree with `1..=max_leaves` leaves and at most
/// `max_nodes` nodes in total. Every node carries integer `cost` (sum) and
/// `quality` (max) characteristics.
pub fn random_hierarchy<R: Rng>(rng: &mut R, max_leaves: usize, max_nodes: usize) -> HierarchyFixture {
    let leaves = rng.gen_range(1..=max_leaves);
    let max_internal = (leaves - 1).min(max_nodes.saturating_sub(leaves));
    let internal = if leaves == 1 {
        0
    } else {
        rng.gen_range(1..=max_internal.max(1))
    };

    // Split the `leaves - 1` merges into `internal` positive parts.
    let mut parts = vec![1usize; internal];
    for _ in 0..(leaves - 1).saturating_sub(internal) {
        let i = rng.gen_range(0..internal);
        parts[i] += 1;
    }

    let mut nodes = Vec::new();
    let mut forest: Vec<String> = (0..leaves).map(|i| format!("l{i}")).collect();
    for id in &forest {
        nodes.push(HierarchyNode::leaf(id.clone(), GROUP).with_characteristics());
    }
    for (k, part) in parts.iter().enumerate() {
        let width = part + 1;
        let start = rng.gen_range(0..=forest.len() - width);
        let children: Vec<String> = forest.drain(start..start + width).collect();
        let id = format!("n{k}");
        let connector = if rng.gen_bool(0.5) {
            Connector::And
        } else {
            Connector::Or
        };
        let kind = if k + 1 == internal {
            NodeKind::Goal
        } else {
            NodeKind::Criterion
        };
        nodes
            .push(HierarchyNode::branch(id.clone(), kind, connector, children, GROUP).with_characteristics());
        forest.insert(start, id);
    }
    let root_id = forest.pop().expect("one tree remains");

    let mut cost = BTreeMap::new();
    let mut quality = BTreeMap::new();
    let mut tables = Vec::new();
    for n in &nodes {
        let c = rng.gen_range(0..10) as f64;
        let q = rng.gen_range(0..10) as f64;
        cost.insert(n.id.clone(), c);
        quality.insert(n.id.clone(), q);
        tables.push(
            CharacteristicTable::new(n.id.clone())
                .with("cost", CharacteristicValue::Number(c))
                .with("quality", CharacteristicValue::Number(q)),
        );
    }
    let schema = CharacteristicSchema::new(
        GROUP,
        vec![
            AttributeDef::numeric("cost", "RUB", Aggregation::Sum),
            AttributeDef::numeric("quality", "pt", Aggregation::Max),
        ],
    );
    let ids: Vec<String> = nodes.iter().map(|n| n.id.clone()).collect();
    let hierarchy = DecisionHierarchy::new(root_id, nodes, vec![schema], tables).expect("unique ids");

    let total: f64 = cost.values().sum();
    let ceiling = rng.gen_bool(0.7).then(|| rng.gen_range(0..=total as u32) as f64);
    let min_quality = rng.gen_bool(0.4).then(|| rng.gen_range(0..10) as f64);
    let constraints = ConstraintSet {
        payback_limit: None,
        expenditure_ceiling: ceiling,
        bounds: min_quality
            .map(|t| Bound {
                attribute: "quality".into(),
                comparator: Comparator::Ge,
                threshold: t,
            })
            .into_iter()
            .collect(),
    };

    let mut binding_specs = Vec::new();
    for i in 0..rng.gen_range(0..=2) {
        let node = ids.choose(rng).expect("non-empty").clone();
        binding_specs.push((format!("hot{i}"), node, rng.gen_range(0..10) as f64));
    }
    let bindings = BindingSpec(
        binding_specs
            .iter()
            .map(|(symbol, node, t)| Binding {
                symbol: Fact::new(symbol.clone()).expect("non-empty"),
                node: node.clone(),
                attribute: "cost".into(),
                comparator: Comparator::Ge,
                threshold: *t,
            })
            .collect(),
    );

    let mut symbols: Vec<String> = ids.iter().map(|id| format!("selected:{id}")).collect();
    symbols.extend(binding_specs.iter().map(|(s, _, _)| s.clone()));
    symbols.extend(["m0".to_string(), "m1".to_string()]);
    let mut rules = Vec::new();
    for i in 0..rng.gen_range(0..=4) {
        let n = rng.gen_range(1..=2);
        let antecedents: Vec<&str> = symbols.choose_multiple(rng, n).map(String::as_str).collect();
        let consequent = if rng.gen_bool(0.5) {
            "infeasible"
        } else {
            *["m0", "m1"]
                .iter()
                .find(|m| !antecedents.contains(m))
                .unwrap_or(&"infeasible")
        };
        rules.push(ProductionRule::parse(&format!("v{i}"), &antecedents, consequent).expect("valid rule"));
    }
    let rules = RuleBase::new(rules).expect("unique ids");

    HierarchyFixture {
        hierarchy,
        constraints,
        rules,
        bindings,
        cost,
        quality,
        binding_specs,
        ceiling,
        min_quality,
    }
}

/// Every subset of the fixture's nodes that `admissible()` accepts, that
/// the veto rules do not mark infeasible, and whose directly summed cost
/// and maximal quality meet the fixture's limits.
pub fn brute_force_configurations(fx: &HierarchyFixture) -> BTreeSet<BTreeSet<String>> {
    let ids: Vec<&String> = fx.hierarchy.nodes.keys().collect();
    assert!(ids.len() < 24, "brute force over {} nodes", ids.len());
    let rules = plain_rules(&fx.rules);
    let mut out = BTreeSet::new();
    for mask in 0u32..(1 << ids.len()) {
        let selection: BTreeSet<String> = ids
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, id)| (*id).clone())
            .collect();
        if !admissible(&fx.hierarchy, &selection).expect("known ids") {
            continue;
        }
        let mut seed: BTreeSet<String> = selection.iter().map(|id| format!("selected:{id}")).collect();
        for (symbol, node, min_cost) in &fx.binding_specs {
            if selection.contains(node) && fx.cost[node] >= *min_cost {
                seed.insert(symbol.clone());
            }
        }
        if naive_closure(&rules, &seed).contains("infeasible") {
            continue;
        }
        let cost: f64 = selection.iter().map(|id| fx.cost[id]).sum();
        if fx.ceiling.is_some_and(|c| cost > c) {
            continue;
        }
        let quality = selection
            .iter()
            .map(|id| fx.quality[id])
            .fold(f64::NEG_INFINITY, f64::max);
        if !selection.is_empty() && fx.min_quality.is_some_and(|t| quality < t) {
            continue;
        }
        out.insert(selection);
    }
    out
}

/// `(antecedents, consequent)` pairs as plain strings.
pub fn plain_rules(rb: &RuleBase) -> Vec<(Vec<String>, String)> {
    rb.rules()
        .iter()
        .map(|r| {
            (
                r.antecedents().iter().map(|f| f.as_str().to_string()).collect(),
                r.consequent().as_str().to_string(),
            )
        })
        .collect()
}

/// Least fixpoint by repeated simultaneous application of every rule.
pub fn naive_closure(rules: &[(Vec<String>, String)], seed: &BTreeSet<String>) -> BTreeSet<String> {
    let mut facts = seed.clone();
    loop {
        let new: Vec<&String> = rules
            .iter()
            .filter(|(ante, _)| ante.iter().all(|a| facts.contains(a)))
            .map(|(_, c)| c)
            .filter(|c| !facts.contains(*c))
            .collect();
        if new.is_empty() {
            return facts;
        }
        let new: Vec<String> = new.into_iter().cloned().collect();
        facts.extend(new);
    }
}

/// Rules over `a0..a{n}` with `n <= max_symbols`, plus a random seed set.
pub fn random_rulebase<R: Rng>(
    rng: &mut R,
    max_symbols: usize,
    max_rules: usize,
) -> (RuleBase, BTreeSet<String>) {
    let n = rng.gen_range(1..=max_symbols);
    let symbols: Vec<String> = (0..n).map(|i| format!("a{i}")).collect();
    let mut rules = Vec::new();
    if n >= 2 {
        for i in 0..rng.gen_range(0..=max_rules) {
            let consequent = symbols.choose(rng).expect("non-empty").clone();
            let others: Vec<&String> = symbols.iter().filter(|s| **s != consequent).collect();
            let k = rng.gen_range(1..=others.len().min(3));
            let ante: Vec<&str> = others.choose_multiple(rng, k).map(|s| s.as_str()).collect();
            rules.push(ProductionRule::parse(&format!("r{i}"), &ante, &consequent).expect("valid rule"));
        }
    }
    let seed = symbols.iter().filter(|_| rng.gen_bool(0.3)).cloned().collect();
    (RuleBase::new(rules).expect("unique ids"), seed)
}

pub const MEASURES: [&str; 2] = ["cost", "hours"];

/// A dual star schema over `1..=8` leaves with one fact table `facts` of
/// `0..=max_rows` rows. Integer fixtures hold whole numbers of either
/// sign; floating fixtures hold non-negative values spanning several
/// orders of magnitude.
pub fn random_star<R: Rng>(rng: &mut R, max_rows: usize, integer: bool) -> DualStarSchema {
    let leaves: Vec<String> = (0..rng.gen_range(1..=8)).map(|i| format!("w{i}")).collect();
    let goals = DimensionHierarchy {
        id: DimensionId::Goals,
        levels: vec!["all".into(), "goal".into(), "leaf".into()],
        membership: leaves
            .iter()
            .map(|l| {
                (
                    l.clone(),
                    vec!["all".into(), format!("G{}", rng.gen_range(0..3)), l.clone()],
                )
            })
            .collect(),
    };
    let decisions = DimensionHierarchy {
        id: DimensionId::Decisions,
        levels: vec!["all".into(), "program".into(), "direction".into(), "leaf".into()],
        membership: leaves
            .iter()
            .map(|l| {
                let d = rng.gen_range(0..4);
                (
                    l.clone(),
                    vec!["all".into(), format!("P{}", d % 2), format!("D{d}"), l.clone()],
                )
            })
            .collect(),
    };
    let rows = (0..rng.gen_range(0..=max_rows))
        .map(|_| {
            let leaf = leaves.choose(rng).expect("non-empty").clone();
            FactRow::new(
                leaf,
                MEASURES.iter().map(|m| {
                    let v = if integer {
                        rng.gen_range(-500i32..=1000) as f64
                    } else {
                        rng.gen_range(0.0..1.0e4) * 10f64.powi(rng.gen_range(-3..=3))
                    };
                    (*m, v)
                }),
            )
        })
        .collect();
    let table = FactTable {
        name: "facts".into(),
        rows,
    };
    DualStarSchema::new(vec![goals, decisions], vec![table], Some("facts".into()))
        .expect("consistent fixture")
}

/// Plain sum of one measure over a table's rows.
pub fn direct_sum(table: &FactTable, measure: &str) -> f64 {
    table.rows.iter().map(|r| r.measures[measure]).sum()
}

/// Sums of one measure grouped by the member at `level` of `dim`, straight
/// from the membership paths.
pub fn direct_group_sums(
    s: &DualStarSchema,
    dim: DimensionId,
    level: &str,
    measure: &str,
) -> BTreeMap<String, f64> {
    let d = s.dim(dim);
    let li = d.levels.iter().position(|l| l == level).expect("known level");
    let mut out = BTreeMap::new();
    for row in &s.facts()[s.main()].rows {
        *out.entry(d.membership[&row.leaf_id][li].clone()).or_insert(0.0) += row.measures[measure];
    }
    out
}

/// `|a - b| <= tol * max(|a|, |b|, 1)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// A label-consistent dataset: the label is a fixed random function of
/// the attribute values. Attribute domains include values that may not
/// occur in any row.
pub fn random_dataset<R: Rng>(rng: &mut R, max_rows: usize, max_attrs: usize) -> LabeledDataset {
    let attributes: Vec<Attribute> = (0..rng.gen_range(1..=max_attrs))
        .map(|i| Attribute {
            name: format!("a{i}"),
            domain: (0..rng.gen_range(2..=3)).map(|v| format!("v{v}")).collect(),
        })
        .collect();
    let n_labels = rng.gen_range(1..=3);
    let mut labels: BTreeMap<Vec<String>, String> = BTreeMap::new();
    let rows = (0..rng.gen_range(1..=max_rows))
        .map(|_| {
            let values: Vec<String> = attributes
                .iter()
                .map(|a| a.domain.choose(rng).expect("non-empty").clone())
                .collect();
            let label = labels
                .entry(values.clone())
                .or_insert_with(|| format!("L{}", rng.gen_range(0..n_labels)))
                .clone();
            LabeledRow { values, label }
        })
        .collect();
    LabeledDataset::new(attributes, rows).expect("values within domains")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn naive_closure_follows_chains() {
        let rules = vec![
            (vec!["a".to_string()], "b".to_string()),
            (vec!["b".to_string(), "c".to_string()], "d".to_string()),
            (vec!["e".to_string()], "f".to_string()),
        ];
        assert_eq!(
            naive_closure(&rules, &strings(&["a", "c"])),
            strings(&["a", "b", "c", "d"])
        );
        assert_eq!(naive_closure(&rules, &strings(&["a"])), strings(&["a", "b"]));
        assert_eq!(naive_closure(&[], &strings(&["x"])), strings(&["x"]));
    }

    #[test]
    fn close_is_relative_above_one() {
        assert!(close(1e12, 1e12 + 1.0, 1e-9));
        assert!(!close(1.0, 1.1, 1e-9));
        assert!(close(0.0, 1e-10, 1e-9));
    }
}
