//! Property tests for the pathwise primitives. Dyadic times and sizes keep
//! every product and sum exact in f64, so the jump-decomposition and bracket
//! identities can be asserted without tolerances.

use std::sync::Arc;

use proptest::prelude::*;

use mpp_core::{
    quadratic_covariation, stieltjes_integral, Jump, Mark, MarkSpace, PiecewisePath, Segment,
    StepFunction, Trajectory,
};

/// Strictly increasing dyadic jump times in (0, 4] with dyadic sizes.
fn dyadic_jumps() -> impl Strategy<Value = Vec<Jump>> {
    prop::collection::vec((1u32..32, -16i32..=16), 0..8).prop_map(|raw| {
        let mut jumps: Vec<Jump> = raw
            .into_iter()
            .map(|(t, s)| Jump {
                time: t as f64 / 8.0,
                size: s as f64 / 16.0,
            })
            .collect();
        jumps.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
        jumps.dedup_by(|a, b| a.time == b.time);
        jumps
    })
}

fn dyadic_segments() -> impl Strategy<Value = Vec<Segment>> {
    prop::collection::vec((0u32..24, -8i32..=8), 0..5).prop_map(|raw| {
        let mut segments: Vec<Segment> = raw
            .into_iter()
            .map(|(t, s)| Segment {
                start: t as f64 / 8.0,
                slope: s as f64 / 4.0,
            })
            .collect();
        segments.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
        segments.dedup_by(|a, b| a.start == b.start);
        if let Some(first) = segments.first_mut() {
            first.start = 0.0;
        }
        segments.dedup_by(|a, b| a.start == b.start);
        segments
    })
}

fn dyadic_path() -> impl Strategy<Value = PiecewisePath> {
    (dyadic_segments(), dyadic_jumps(), -8i32..=8)
        .prop_map(|(segments, jumps, c)| {
            PiecewisePath::new(c as f64 / 4.0, segments, jumps).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn jump_decomposition_is_exact(path in dyadic_path(), probe in 0u32..40) {
        // at recorded jump times and at arbitrary probes alike
        let t = probe as f64 / 8.0;
        prop_assert_eq!(path.value(t) - path.left_limit(t), path.jump_at(t));
        for j in path.jumps() {
            prop_assert_eq!(path.value(j.time) - path.left_limit(j.time), j.size);
        }
    }

    #[test]
    fn bracket_is_symmetric(x in dyadic_path(), y in dyadic_path()) {
        let xy = quadratic_covariation(&x, &y);
        let yx = quadratic_covariation(&y, &x);
        prop_assert_eq!(xy.jumps(), yx.jumps());
    }

    #[test]
    fn stieltjes_is_linear_in_the_integrand(
        path in dyadic_path(),
        v1 in -8i32..=8,
        v2 in -8i32..=8,
        split in 1u32..24,
    ) {
        // dyadic two-level integrands: ∫(w1+w2) dA = ∫w1 dA + ∫w2 dA exactly
        let w1 = StepFunction::new(vec![(0.0, v1 as f64 / 4.0)]).unwrap();
        let w2 = StepFunction::new(
            vec![(0.0, v2 as f64 / 4.0), (split as f64 / 8.0, -(v2 as f64) / 4.0)],
        )
        .unwrap();
        let sum = StepFunction::new(
            w2.breakpoints()
                .iter()
                .map(|&(t, v)| (t, v + v1 as f64 / 4.0))
                .collect(),
        )
        .unwrap();
        let lhs = stieltjes_integral(&sum, &path);
        let rhs = stieltjes_integral(&w1, &path).add(&stieltjes_integral(&w2, &path));
        for probe in [0.5, 1.0, 2.0, 3.0, 4.0] {
            prop_assert_eq!(lhs.value(probe), rhs.value(probe));
        }
    }

    #[test]
    fn measure_is_additive_over_disjoint_mark_sets(
        raw_events in prop::collection::vec((1u32..64, 0usize..4), 0..12),
        cut in 0usize..4,
        s_probe in 0u32..=64,
    ) {
        let labels: Vec<String> = (0..4).map(|m| format!("m{m}")).collect();
        let space = Arc::new(MarkSpace::atoms(labels.clone()).unwrap());
        let mut events: Vec<(f64, usize)> = raw_events
            .into_iter()
            .map(|(t, m)| (t as f64 / 8.0, m))
            .collect();
        events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        events.dedup_by(|a, b| a.0 == b.0);
        let traj = Trajectory::new(
            space,
            events
                .iter()
                .map(|&(t, m)| (t, Mark::atom(labels[m].clone()))),
            8.0,
        )
        .unwrap();
        let s = s_probe as f64 / 8.0;
        let left: Vec<Mark> = labels[..cut].iter().map(Mark::atom).collect();
        let right: Vec<Mark> = labels[cut..].iter().map(Mark::atom).collect();
        let all: Vec<Mark> = labels.iter().map(Mark::atom).collect();
        let a = traj.measure_eval(s, &left).unwrap();
        let b = traj.measure_eval(s, &right).unwrap();
        prop_assert_eq!(a + b, traj.measure_eval(s, &all).unwrap());
        // and the whole-space count at the horizon is the event count
        prop_assert_eq!(
            traj.measure_eval(8.0, &all).unwrap(),
            traj.len() as u64
        );
    }
}
