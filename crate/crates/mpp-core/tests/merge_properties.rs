//! Property tests for the merging construction: projection round-trips,
//! cylinder-measure recovery against a brute-force oracle, and the union
//! structure of the merged time set.

use std::sync::Arc;

use proptest::prelude::*;

use mpp_core::{merge, Mark, MarkSpace, Trajectory, ZERO_SYMBOL};

/// Strictly increasing times in (0, 2) paired with marks out of `n_marks`.
fn component_strategy(n_marks: usize) -> impl Strategy<Value = Vec<(f64, usize)>> {
    prop::collection::vec((0.01f64..1.99, 0..n_marks), 0..6).prop_map(|mut raw| {
        raw.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        raw.dedup_by(|a, b| a.0 == b.0);
        raw
    })
}

fn build_component(c: usize, n_marks: usize, events: &[(f64, usize)]) -> Trajectory {
    let labels: Vec<String> = (0..n_marks).map(|m| format!("c{c}m{m}")).collect();
    let space = Arc::new(MarkSpace::atoms(labels.clone()).unwrap());
    Trajectory::new(
        space,
        events
            .iter()
            .map(|&(t, m)| (t, Mark::atom(labels[m].clone()))),
        2.0,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn project_merge_roundtrip(
        ev0 in component_strategy(2),
        ev1 in component_strategy(3),
        ev2 in component_strategy(1),
    ) {
        let components = vec![
            build_component(0, 2, &ev0),
            build_component(1, 3, &ev1),
            build_component(2, 1, &ev2),
        ];
        let merged = merge(&components).unwrap();
        for (i, component) in components.iter().enumerate() {
            let recovered = merged.project(i).unwrap();
            prop_assert_eq!(recovered.events(), component.events());
            prop_assert_eq!(
                recovered.mark_space().labels(),
                component.mark_space().labels()
            );
        }
    }

    #[test]
    fn merged_times_are_the_union(
        ev0 in component_strategy(2),
        ev1 in component_strategy(2),
    ) {
        let components = vec![build_component(0, 2, &ev0), build_component(1, 2, &ev1)];
        let merged = merge(&components).unwrap();
        let mut union: Vec<u64> = components
            .iter()
            .flat_map(|c| c.events().iter().map(|e| e.time.to_bits()))
            .collect();
        union.sort_unstable();
        union.dedup();
        let merged_times: Vec<u64> = merged
            .trajectory()
            .events()
            .iter()
            .map(|e| e.time.to_bits())
            .collect();
        prop_assert_eq!(merged_times, union);
        // count bound: equality iff no shared times
        prop_assert!(merged.trajectory().len() <= ev0.len() + ev1.len());
    }

    #[test]
    fn cylinder_measures_recover_components(
        ev0 in component_strategy(3),
        ev1 in component_strategy(2),
        queries in prop::collection::vec((0.0f64..2.0, prop::collection::vec(0..3usize, 0..3)), 10),
    ) {
        let components = vec![build_component(0, 3, &ev0), build_component(1, 2, &ev1)];
        let merged = merge(&components).unwrap();
        for (s, mark_ixs) in &queries {
            let base: Vec<Mark> = {
                let mut seen = std::collections::BTreeSet::new();
                mark_ixs
                    .iter()
                    .filter(|&&m| seen.insert(m))
                    .map(|&m| Mark::atom(format!("c0m{m}")))
                    .collect()
            };
            let via_merged = merged.component_measure(0, *s, &base).unwrap();
            let direct = components[0].measure_eval(*s, &base).unwrap();
            // independent oracle: count the raw event list
            let brute = ev0
                .iter()
                .filter(|&&(t, m)| t <= *s && mark_ixs.contains(&m))
                .count() as u64;
            prop_assert_eq!(via_merged, direct);
            prop_assert_eq!(direct, brute);
        }
    }

    #[test]
    fn merged_marks_never_all_zero(
        ev0 in component_strategy(2),
        ev1 in component_strategy(2),
    ) {
        let components = vec![build_component(0, 2, &ev0), build_component(1, 2, &ev1)];
        let merged = merge(&components).unwrap();
        for (_, mark) in merged.trajectory().iter() {
            let nonzero = (0..2).any(|i| mark.slot(i).unwrap() != ZERO_SYMBOL);
            prop_assert!(nonzero);
        }
    }
}
