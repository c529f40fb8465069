//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per check; exits non-zero if any check fails.
//!
//!     cargo test -p innotree-service --test acceptance

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, ensure, Result};
use axum::http::StatusCode;
use common::*;
use innotree_core::mining::{
    classify, induce, information_gain, row_facts, tree_to_rules, InduceParams, LabeledDataset, LabeledRow,
    LABEL_PREFIX,
};
use innotree_core::model::{
    CharacteristicTable, CharacteristicValue, Connector, ConstraintSet, DecisionHierarchy, HierarchyNode,
    LookupError, NodeKind, Series,
};
use innotree_core::reporting::{
    pivot, validate_report_config, Axis, DynamicQueryDef, ReportConfig, StaticReportDef,
};
use innotree_core::rules::{forward_chain, BindingSpec, Fact, ProductionRule, RuleBase};
use innotree_core::star::{DimensionId, DualStarSchema, MeasureSpec, RollupAgg, RollupQuery};
use innotree_core::variants::{enumerate, EnumerationInputs};
use innotree_testkit::{
    brute_force_configurations, close, direct_sum, naive_closure, plain_rules, random_dataset,
    random_hierarchy, random_rulebase, random_star, MEASURES,
};
use rand::rngs::StdRng;
use rand::SeedableRng;

type Check = fn() -> Result<String>;

fn main() {
    let checks: [(&str, Check); 10] = [
        ("enumeration matches brute force", enumeration_oracle),
        ("OR count law", count_law),
        ("rule closure matches naive fixpoint", rule_closure),
        ("star totals are conserved", star_conservation),
        ("pivot marginals equal rollups", pivot_marginals),
        ("report limits", report_limits),
        ("static reports are byte-stable", static_determinism),
        ("ID3 induction and rule extraction", id3),
        ("series interpolation", interpolation),
        ("service statelessness and reload atomicity", service_consistency),
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (name, check) in checks {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(anyhow!("panicked: {}", panic_text(&p))));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name} ({detail}; {secs:.2}s)"),
            Err(e) => {
                failed += 1;
                println!("FAIL  {name}: {e:#} ({secs:.2}s)");
            }
        }
    }
    println!(
        "{} passed, {failed} failed in {:.1}s",
        checks.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "non-string panic".into())
}

fn enumeration_oracle() -> Result<String> {
    const CASES: u64 = 200;
    let (mut mixed, mut constrained, mut vetoing, mut total) = (0, 0, 0, 0);
    for seed in 0..CASES {
        let fx = random_hierarchy(&mut StdRng::seed_from_u64(seed), 12, 16);
        let leaves = fx.hierarchy.leaf_ids().len();
        ensure!(leaves <= 12, "seed {seed}: {leaves} leaves");
        let connectors: BTreeSet<Connector> = fx.hierarchy.nodes.values().map(|n| n.connector).collect();
        mixed += usize::from(connectors.contains(&Connector::And) && connectors.contains(&Connector::Or));
        constrained += usize::from(fx.ceiling.is_some() || fx.min_quality.is_some());
        vetoing += usize::from(!fx.rules.is_empty());

        let inputs = EnumerationInputs {
            rules: &fx.rules,
            constraints: &fx.constraints,
            bindings: &fx.bindings,
            param: None,
        };
        let e = enumerate(&fx.hierarchy, inputs, 1 << 20)?;
        ensure!(!e.truncated, "seed {seed}: truncated");
        let got: Vec<BTreeSet<String>> = e.configurations.into_iter().map(|c| c.selected).collect();
        let got_set: BTreeSet<BTreeSet<String>> = got.iter().cloned().collect();
        ensure!(
            got_set.len() == got.len(),
            "seed {seed}: duplicate configurations"
        );
        let want = brute_force_configurations(&fx);
        ensure!(
            got_set == want,
            "seed {seed}: enumerate gave {} configurations, brute force {}",
            got_set.len(),
            want.len()
        );
        total += want.len();
    }
    Ok(format!(
        "{CASES} hierarchies, {mixed} mixed AND/OR, {constrained} with bounds, {vetoing} with rules, {total} configurations"
    ))
}

fn count_law() -> Result<String> {
    for k in 1..=10usize {
        let leaves: Vec<String> = (0..k).map(|i| format!("x{i}")).collect();
        let mut nodes: Vec<HierarchyNode> = leaves
            .iter()
            .map(|l| HierarchyNode::leaf(l.clone(), "g"))
            .collect();
        nodes.push(HierarchyNode::branch(
            "root",
            NodeKind::Goal,
            Connector::Or,
            leaves,
            "g",
        ));
        let h = DecisionHierarchy::new("root", nodes, vec![], vec![])?;
        let (rules, cs, bindings) = (
            RuleBase::default(),
            ConstraintSet::default(),
            BindingSpec::default(),
        );
        let inputs = EnumerationInputs {
            rules: &rules,
            constraints: &cs,
            bindings: &bindings,
            param: None,
        };
        let e = enumerate(&h, inputs, 1 << 12)?;
        let want = (1usize << k) - 1;
        ensure!(
            e.configurations.len() == want,
            "k = {k}: {} != {want}",
            e.configurations.len()
        );
    }
    Ok("k = 1..10 give 2^k - 1".into())
}

fn rule_closure() -> Result<String> {
    const CASES: u64 = 500;
    let mut firings = 0;
    for seed in 0..CASES {
        let (rb, start) = random_rulebase(&mut StdRng::seed_from_u64(seed), 12, 15);
        let seeds = start
            .iter()
            .map(|s| Fact::new(s.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let r = forward_chain(&rb, seeds);
        let got: BTreeSet<String> = r.closure.iter().map(|f| f.as_str().to_string()).collect();
        let want = naive_closure(&plain_rules(&rb), &start);
        ensure!(got == want, "seed {seed}: closure {got:?} vs oracle {want:?}");
        firings += r.trace.len();
    }

    let alpha = RuleBase::new(vec![ProductionRule::parse(
        "r1",
        &["α1", "α2", "α3", "α4"],
        "α5",
    )?])?;
    let facts = ["α1", "α2", "α3", "α4"]
        .map(Fact::new)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    ensure!(
        forward_chain(&alpha, facts).contains("α5"),
        "α1..α4 did not derive α5"
    );
    Ok(format!("{CASES} rulebases, {firings} firings; α1..α4 derive α5"))
}

fn sum_query(dim: DimensionId, level: &str) -> RollupQuery {
    RollupQuery {
        dim,
        level: level.into(),
        measures: MEASURES
            .iter()
            .map(|m| MeasureSpec::new(*m, RollupAgg::Sum))
            .collect(),
        table: None,
    }
}

fn same(a: f64, b: f64, integer: bool) -> bool {
    if integer {
        a == b
    } else {
        close(a, b, 1e-9)
    }
}

const STAR_CASES: u64 = 200;

fn star_conservation() -> Result<String> {
    for seed in 0..STAR_CASES {
        for integer in [true, false] {
            let s = random_star(&mut StdRng::seed_from_u64(seed), 50, integer);
            let table = s.table(None)?;
            ensure!(table.rows.len() <= 50);
            for m in MEASURES {
                let direct = direct_sum(table, m);
                for dim in [DimensionId::Goals, DimensionId::Decisions] {
                    let total = s.rollup(&sum_query(dim, "all"))?.value("all", m).unwrap_or(0.0);
                    ensure!(
                        same(total, direct, integer),
                        "seed {seed} ({}): {dim:?} total {total} vs direct {direct} for {m}",
                        if integer { "integer" } else { "float" }
                    );
                }
            }
        }
    }
    Ok(format!(
        "{STAR_CASES} integer + {STAR_CASES} float schemas; integer exact, float within 1e-9"
    ))
}

fn pivot_marginals() -> Result<String> {
    let axes = [
        (DimensionId::Goals, "goal"),
        (DimensionId::Decisions, "program"),
        (DimensionId::Decisions, "direction"),
    ];
    let mut grids = 0;
    for seed in 0..STAR_CASES {
        for integer in [true, false] {
            let s = random_star(&mut StdRng::seed_from_u64(seed), 50, integer);
            for r in axes {
                for c in axes.into_iter().filter(|c| *c != r) {
                    let rows = s.rollup(&sum_query(r.0, r.1))?;
                    let cols = s.rollup(&sum_query(c.0, c.1))?;
                    for m in MEASURES {
                        let def = DynamicQueryDef {
                            id: "p".into(),
                            cube: "facts".into(),
                            rows: Axis {
                                dim: r.0,
                                level: r.1.into(),
                            },
                            columns: Axis {
                                dim: c.0,
                                level: c.1.into(),
                            },
                            measure: m.into(),
                            agg: RollupAgg::Sum,
                            filter: None,
                        };
                        let g = pivot(&def, &s)?;
                        grids += 1;
                        ensure!(
                            g.row_members.len() == rows.groups.len(),
                            "seed {seed}: row members differ"
                        );
                        ensure!(
                            g.column_members.len() == cols.groups.len(),
                            "seed {seed}: column members differ"
                        );
                        for (i, member) in g.row_members.iter().enumerate() {
                            let marginal: f64 = g.cells[i].iter().flatten().sum();
                            let want = rows.value(member, m).ok_or_else(|| anyhow!("no row {member}"))?;
                            ensure!(
                                same(marginal, want, integer),
                                "seed {seed}: row {member} {marginal} vs {want}"
                            );
                        }
                        for (j, member) in g.column_members.iter().enumerate() {
                            let marginal: f64 = g.cells.iter().filter_map(|row| row[j]).sum();
                            let want = cols
                                .value(member, m)
                                .ok_or_else(|| anyhow!("no column {member}"))?;
                            ensure!(
                                same(marginal, want, integer),
                                "seed {seed}: column {member} {marginal} vs {want}"
                            );
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{grids} pivot grids"))
}

fn limit_config(statics: usize, dynamics_per_cube: &[(&str, usize)]) -> ReportConfig {
    let statics = (0..statics)
        .map(|i| StaticReportDef {
            id: format!("s{i}"),
            title: format!("Static {i}"),
            query: sum_query(DimensionId::Goals, "goal"),
            xml_root: "report".into(),
        })
        .collect();
    let mut dynamics = Vec::new();
    for (cube, n) in dynamics_per_cube {
        for i in 0..*n {
            dynamics.push(DynamicQueryDef {
                id: format!("{cube}-{i}"),
                cube: cube.to_string(),
                rows: Axis {
                    dim: DimensionId::Goals,
                    level: "goal".into(),
                },
                columns: Axis {
                    dim: DimensionId::Decisions,
                    level: "program".into(),
                },
                measure: "cost".into(),
                agg: RollupAgg::Sum,
                filter: None,
            });
        }
    }
    ReportConfig { statics, dynamics }
}

fn report_limits() -> Result<String> {
    let base = random_star(&mut StdRng::seed_from_u64(7), 20, true);
    let tables = ["c0", "c1", "c2", "c3"]
        .iter()
        .map(|n| {
            let mut t = base.table(None).expect("main table").clone();
            t.name = n.to_string();
            t
        })
        .collect();
    let dims = vec![
        base.dim(DimensionId::Goals).clone(),
        base.dim(DimensionId::Decisions).clone(),
    ];
    let s = DualStarSchema::new(dims, tables, Some("c0".into()))?;

    let at_limit = limit_config(10, &[("c0", 5), ("c1", 5), ("c2", 5)]);
    let report = validate_report_config(&at_limit, &s);
    ensure!(
        report.is_valid(),
        "10 statics / 15 dynamics / 5 per cube rejected: {report}"
    );

    let cases = [
        (
            "11 statics",
            limit_config(11, &[("c0", 5)]),
            "static-limit",
            "exceed 10",
        ),
        (
            "16 dynamics",
            limit_config(1, &[("c0", 4), ("c1", 4), ("c2", 4), ("c3", 4)]),
            "dynamic-limit",
            "exceed 15",
        ),
        (
            "6 on one cube",
            limit_config(1, &[("c0", 6)]),
            "cube-limit",
            "exceeds 5 per cube",
        ),
    ];
    let mut messages = Vec::new();
    for (what, cfg, rule, phrase) in cases {
        let report = validate_report_config(&cfg, &s);
        let v = report.violations();
        ensure!(v.len() == 1, "{what}: expected one violation, got {report}");
        ensure!(
            v[0].rule == rule,
            "{what}: violation `{}` instead of `{rule}`",
            v[0].rule
        );
        ensure!(
            v[0].message.contains(phrase),
            "{what}: message `{}` lacks `{phrase}`",
            v[0].message
        );
        messages.push(format!("`{}`", v[0].message));
    }
    Ok(format!("10/15/5 accepted; rejected with {}", messages.join(", ")))
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(8)
        .enable_all()
        .build()
        .expect("tokio runtime")
}

fn static_determinism() -> Result<String> {
    let config = example_config();
    let dir = copy_example();
    let app = app(dir.path());
    let rt = runtime();
    for id in STATIC_IDS {
        let want = golden(&format!("{id}.xml"));
        for run in 1..=2 {
            let o = cli(&["--config", &config, "report", "--static", id]);
            ensure!(o.status.success(), "{id}: cli exited {:?}", o.status.code());
            ensure!(
                o.stdout == want,
                "{id}: cli run {run} differs from the golden file"
            );
            let r = rt.block_on(call(&app, "GET", &format!("/api/reports/static/{id}"), None));
            ensure!(r.status == StatusCode::OK, "{id}: http status {}", r.status);
            ensure!(
                r.body == want,
                "{id}: http run {run} differs from the golden file"
            );
        }
    }
    Ok(format!("{} reports x 2 runs x (cli, http)", STATIC_IDS.len()))
}

fn id3() -> Result<String> {
    let two = LabeledDataset::from_rows(
        vec!["a".into()],
        vec![
            LabeledRow {
                values: vec!["x".into()],
                label: "yes".into(),
            },
            LabeledRow {
                values: vec!["y".into()],
                label: "no".into(),
            },
        ],
    )?;
    let gain = information_gain(&two, &[0, 1], 0);
    ensure!(gain == 1.0, "two-row gain {gain}");

    const CASES: u64 = 300;
    let mut rows = 0;
    for seed in 0..CASES {
        let d = random_dataset(&mut StdRng::seed_from_u64(seed), 64, 4);
        ensure!(d.rows().len() <= 64 && d.attributes().len() <= 4);
        let t = induce(&d, InduceParams::default())?;
        let rb = tree_to_rules(&t);
        for i in 0..d.rows().len() {
            let row = d.row_map(i);
            let predicted = classify(&t, &row)?;
            ensure!(
                predicted == d.rows()[i].label,
                "seed {seed} row {i}: {predicted} != {}",
                d.rows()[i].label
            );
            let closure = forward_chain(&rb, row_facts(&row)).closure;
            let labels: Vec<&str> = closure
                .iter()
                .filter_map(|f| f.as_str().strip_prefix(LABEL_PREFIX))
                .collect();
            ensure!(
                labels == [predicted],
                "seed {seed} row {i}: rules gave {labels:?}, tree {predicted}"
            );
        }
        rows += d.rows().len();
    }
    Ok(format!(
        "gain 1 bit; {CASES} datasets, {rows} rows fit exactly, rules agree"
    ))
}

fn interpolation() -> Result<String> {
    let mid = Series(vec![(0.0, 0.0), (10.0, 100.0)]);
    ensure!(
        mid.interpolate(5.0) == Some(50.0),
        "midpoint gave {:?}",
        mid.interpolate(5.0)
    );

    let mut rng = StdRng::seed_from_u64(11);
    let mut points = 0;
    for _ in 0..200 {
        use rand::Rng;
        let n = rng.gen_range(2..12);
        let mut p = rng.gen_range(-1e3..1e3);
        let mut samples = Vec::new();
        for _ in 0..n {
            samples.push((p, rng.gen_range(-1e6..1e6)));
            p += rng.gen_range(1e-3..1e2);
        }
        let series = Series(samples.clone());
        series.check().map_err(|e| anyhow!(e))?;
        for (x, y) in &samples {
            ensure!(
                series.interpolate(*x) == Some(*y),
                "sample ({x}, {y}) gave {:?}",
                series.interpolate(*x)
            );
        }
        let (lo, hi) = series.domain().expect("non-empty");
        for outside in [lo - 1e-6, hi + 1e-6, lo - 1e3, hi + 1e3] {
            ensure!(
                series.interpolate(outside).is_none(),
                "{outside} outside [{lo}, {hi}] was interpolated"
            );
        }
        points += n;
    }

    let table = CharacteristicTable::new("n").with("curve", CharacteristicValue::Series(mid));
    match table.evaluate("curve", Some(10.5)) {
        Err(LookupError::OutOfRange { .. }) => {}
        other => bail!("out-of-range lookup gave {other:?}"),
    }
    Ok(format!(
        "midpoint 50; {points} sample points exact; out-of-range rejected"
    ))
}

const READERS: usize = 16;
const RELOADS: u64 = 12;

fn staff_label(version: u64) -> String {
    if version == 1 {
        "Research staff".into()
    } else {
        format!("Research staff r{version}")
    }
}

fn service_consistency() -> Result<String> {
    let dir = copy_example();
    let app = app(dir.path());
    let rt = runtime();
    let whatif = r#"{"selection": ["g0", "c_tech", "a_partner", "e_joint_research", "c_market", "a_pilot", "e_pilot_site"]}"#;
    let reads: Vec<(&str, String, Option<&str>)> = [
        ("GET", "/api/health".to_string(), None),
        ("GET", "/api/model".into(), None),
        ("POST", "/api/whatif".into(), Some(whatif)),
        ("GET", "/api/variants?limit=20".into(), None),
        ("GET", "/api/reports".into(), None),
        (
            "POST",
            "/api/rules/trace".into(),
            Some(r#"{"seeds": ["costly_lab", "wide_distribution"]}"#),
        ),
    ]
    .into_iter()
    .chain(
        STATIC_IDS
            .iter()
            .map(|id| ("GET", format!("/api/reports/static/{id}"), None)),
    )
    .chain(
        PIVOT_IDS
            .iter()
            .map(|id| ("GET", format!("/api/reports/pivot/{id}"), None)),
    )
    .collect();

    rt.block_on(async {
        let sequence = async || {
            let mut out = Vec::new();
            for (m, uri, body) in &reads {
                let r = call(&app, m, uri, *body).await;
                out.push((r.status, r.header_version(), r.body));
            }
            out
        };
        let first = sequence().await;
        for run in 0..3 {
            ensure!(
                sequence().await == first,
                "read sequence {run} differs from the first"
            );
        }
        ensure!(first.iter().all(|(s, v, _)| *s == StatusCode::OK && *v == 1));

        let model_path = dir.path().join("model.json");
        let original: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model_path)?)?;
        let stop = Arc::new(AtomicBool::new(false));
        let responses = Arc::new(AtomicUsize::new(0));
        let mut readers = Vec::new();
        for reader in 0..READERS {
            let (app, stop, responses) = (app.clone(), stop.clone(), responses.clone());
            readers.push(tokio::spawn(async move {
                let mut last = 0u64;
                let mut seen = BTreeSet::new();
                while !stop.load(Ordering::Relaxed) {
                    let uri = if reader % 2 == 0 {
                        "/api/model"
                    } else {
                        "/api/health"
                    };
                    let r = call(&app, "GET", uri, None).await;
                    ensure!(r.status == StatusCode::OK, "reader {reader}: status {}", r.status);
                    let header = r.header_version();
                    let body = r.json();
                    let version = body["version"]
                        .as_u64()
                        .ok_or_else(|| anyhow!("no version in body"))?;
                    ensure!(
                        header == version,
                        "reader {reader}: header {header} but body {version}"
                    );
                    ensure!(
                        version >= last,
                        "reader {reader}: version went from {last} to {version}"
                    );
                    if uri == "/api/model" {
                        let label = body["hierarchy"]["nodes"]
                            .as_array()
                            .and_then(|ns| ns.iter().find(|n| n["id"] == "e_staff"))
                            .and_then(|n| n["label"].as_str())
                            .ok_or_else(|| anyhow!("e_staff missing"))?;
                        ensure!(
                            label == staff_label(version),
                            "reader {reader}: version {version} served label `{label}`"
                        );
                    }
                    last = version;
                    seen.insert(version);
                    responses.fetch_add(1, Ordering::Relaxed);
                    tokio::task::yield_now().await;
                }
                Ok::<_, anyhow::Error>(seen)
            }));
        }

        for next in 2..=RELOADS + 1 {
            tokio::time::sleep(Duration::from_millis(5)).await;
            let mut model = original.clone();
            let node = model["hierarchy"]["nodes"]
                .as_array_mut()
                .and_then(|ns| ns.iter_mut().find(|n| n["id"] == "e_staff"))
                .ok_or_else(|| anyhow!("e_staff missing from model.json"))?;
            node["label"] = staff_label(next).into();
            std::fs::write(&model_path, serde_json::to_string_pretty(&model)?)?;
            let r = call(&app, "POST", "/api/reload", None).await;
            ensure!(
                r.status == StatusCode::OK,
                "reload to {next}: status {}",
                r.status
            );
            ensure!(
                r.json()["version"] == next,
                "reload gave version {}",
                r.json()["version"]
            );
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
        stop.store(true, Ordering::Relaxed);

        let mut seen = BTreeSet::new();
        for h in readers {
            seen.extend(h.await??);
        }
        ensure!(
            seen.len() > 1,
            "readers only ever saw versions {seen:?}; reloads did not interleave"
        );
        let after = call(&app, "GET", "/api/health", None).await;
        ensure!(after.header_version() == RELOADS + 1);
        Ok(format!(
            "{} identical read sequences; {READERS} readers, {} responses across {} versions, none mixed",
            4,
            responses.load(Ordering::Relaxed),
            seen.len()
        ))
    })
}
