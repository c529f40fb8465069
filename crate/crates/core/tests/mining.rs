use std::collections::BTreeSet;

use innotree_core::mining::{
    classify, entropy, induce, information_gain, row_facts, tree_to_rules, InduceParams, LabeledDataset,
    LabeledRow, LABEL_PREFIX,
};
use innotree_core::rules::forward_chain;
use innotree_testkit::random_dataset;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

/// Entropy straight from the definition, for comparison.
fn oracle_entropy(labels: &[&str]) -> f64 {
    let n = labels.len() as f64;
    let distinct: BTreeSet<&str> = labels.iter().copied().collect();
    distinct
        .iter()
        .map(|l| {
            let p = labels.iter().filter(|x| *x == l).count() as f64 / n;
            -p * p.log2()
        })
        .sum()
}

#[test]
fn two_row_discriminating_gain_is_one_bit() {
    let d = LabeledDataset::from_rows(
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
    )
    .unwrap();
    assert_eq!(information_gain(&d, &[0, 1], 0), 1.0);
}

#[test]
fn csv_dataset() {
    let d =
        LabeledDataset::from_csv("outlook,windy,play\nsunny,no,yes\nrain,yes,no\nsunny,yes,yes\n").unwrap();
    let t = induce(&d, InduceParams::default()).unwrap();
    for i in 0..d.rows().len() {
        assert_eq!(classify(&t, &d.row_map(i)).unwrap(), d.rows()[i].label);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn entropy_matches_definition(labels in proptest::collection::vec("[abc]", 1..40)) {
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let got = entropy(refs.iter().copied());
        let want = oracle_entropy(&refs);
        prop_assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn gain_is_bounded_by_entropy(seed in any::<u64>()) {
        let d = random_dataset(&mut StdRng::seed_from_u64(seed), 64, 4);
        let rows: Vec<usize> = (0..d.rows().len()).collect();
        let h = entropy(d.rows().iter().map(|r| r.label.as_str()));
        for a in 0..d.attributes().len() {
            let g = information_gain(&d, &rows, a);
            prop_assert!(g >= -1e-12 && g <= h + 1e-12, "gain {g}, entropy {h}");
        }
    }

    #[test]
    fn consistent_data_is_fit_exactly(seed in any::<u64>()) {
        let d = random_dataset(&mut StdRng::seed_from_u64(seed), 64, 4);
        let t = induce(&d, InduceParams::default()).unwrap();
        for i in 0..d.rows().len() {
            prop_assert_eq!(classify(&t, &d.row_map(i)).unwrap(), d.rows()[i].label.as_str());
        }
        prop_assert!(t.depth() <= d.attributes().len());
    }

    #[test]
    fn extracted_rules_agree_with_classify(seed in any::<u64>(), max_depth in proptest::option::of(0usize..3)) {
        let d = random_dataset(&mut StdRng::seed_from_u64(seed), 64, 4);
        let t = induce(&d, InduceParams { max_depth, min_rows: 1 }).unwrap();
        let rb = tree_to_rules(&t);
        prop_assert_eq!(rb.len(), t.leaf_count());
        for i in 0..d.rows().len() {
            let row = d.row_map(i);
            let closure = forward_chain(&rb, row_facts(&row)).closure;
            let labels: Vec<&str> = closure
                .iter()
                .filter_map(|f| f.as_str().strip_prefix(LABEL_PREFIX))
                .collect();
            let expected = classify(&t, &row).unwrap();
            prop_assert_eq!(labels, vec![expected]);
        }
    }

    #[test]
    fn depth_limit_is_respected(seed in any::<u64>(), max_depth in 0usize..3) {
        let d = random_dataset(&mut StdRng::seed_from_u64(seed), 64, 4);
        let t = induce(&d, InduceParams { max_depth: Some(max_depth), min_rows: 1 }).unwrap();
        prop_assert!(t.depth() <= max_depth);
    }
}
