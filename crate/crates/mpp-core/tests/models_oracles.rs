//! Distributional oracles for the built-in simulators: moments against
//! closed forms, a Kolmogorov-forward oracle for the chain model, and the
//! compensated-martingale property at the horizon for every model.

use mpp_core::{
    par_chunked_fold, replication_rng, CommonShockSpec, CtmcSpec, GridBernoulliSpec, ModelSpec,
    MomentAccumulator, PoissonSpec, Transition,
};

const SIGMA: f64 = 4.0;

#[test]
fn poisson_mean_and_variance_match() {
    // N_10 ~ Poisson(20): mean 20, variance 20
    let spec = PoissonSpec::new([("a", 2.0)], 10.0);
    let compiled = ModelSpec::Poisson(spec).compile().unwrap();
    let reps = 100_000u64;
    let acc = par_chunked_fold(
        reps,
        MomentAccumulator::default,
        |acc, rep| {
            let (traj, _) = compiled.realize(2024, rep).unwrap();
            acc.push(traj.len() as f64);
        },
        |acc, part| acc.merge(&part),
    );
    let se = (20.0_f64 / reps as f64).sqrt();
    assert!(
        (acc.mean() - 20.0).abs() <= SIGMA * se,
        "mean {} vs 20 ± {}",
        acc.mean(),
        SIGMA * se
    );
    assert!((acc.variance() - 20.0).abs() < 1.0);
}

/// Forward-equation oracle: p'(s) = p(s) Q integrated by RK4, independent of
/// the uniformization solver used elsewhere.
fn occupation_integral_oracle(q: &[f64], n: usize, p0: usize, from: usize, t: f64) -> f64 {
    let steps = 20_000usize;
    let h = t / steps as f64;
    let deriv = |p: &[f64], out: &mut Vec<f64>| {
        out.clear();
        for j in 0..n {
            out.push((0..n).map(|i| p[i] * q[i * n + j]).sum());
        }
    };
    let mut p = vec![0.0; n];
    p[p0] = 1.0;
    let (mut k1, mut k2, mut k3, mut k4) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut stage = vec![0.0; n];
    let mut integral = 0.0;
    for _ in 0..steps {
        let p_from_before = p[from];
        deriv(&p, &mut k1);
        for i in 0..n {
            stage[i] = p[i] + 0.5 * h * k1[i];
        }
        deriv(&stage, &mut k2);
        for i in 0..n {
            stage[i] = p[i] + 0.5 * h * k2[i];
        }
        deriv(&stage, &mut k3);
        for i in 0..n {
            stage[i] = p[i] + h * k3[i];
        }
        deriv(&stage, &mut k4);
        for i in 0..n {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        integral += 0.5 * h * (p_from_before + p[from]);
    }
    integral
}

#[test]
fn ctmc_counts_match_forward_equation_oracle() {
    // 3-state cyclic chain
    let spec = CtmcSpec {
        states: vec!["1".into(), "2".into(), "3".into()],
        initial: "1".into(),
        transitions: vec![
            Transition {
                from: "1".into(),
                to: "2".into(),
                rate: 1.0,
                mark: "1->2".into(),
            },
            Transition {
                from: "2".into(),
                to: "3".into(),
                rate: 2.0,
                mark: "2->3".into(),
            },
            Transition {
                from: "3".into(),
                to: "1".into(),
                rate: 1.5,
                mark: "3->1".into(),
            },
        ],
        horizon: 4.0,
    };
    let compiled_chain = spec.compile().unwrap();
    let q = compiled_chain.generator();
    // E[N^{1->2}_T] = ∫_0^T Q_12 · P(state_s = 1) ds
    let expected = 1.0 * occupation_integral_oracle(&q, 3, 0, 0, 4.0);

    let model = ModelSpec::Ctmc(spec).compile().unwrap();
    let reps = 40_000u64;
    let mark_ix = 0usize; // "1->2"
    let acc = par_chunked_fold(
        reps,
        MomentAccumulator::default,
        |acc, rep| {
            let (traj, _) = model.realize(9, rep).unwrap();
            acc.push(traj.count_through(mark_ix, 4.0) as f64);
        },
        |acc, part| acc.merge(&part),
    );
    let se = acc.std_error();
    assert!(
        (acc.mean() - expected).abs() <= SIGMA * se,
        "MC mean {} vs oracle {expected} ± {}",
        acc.mean(),
        SIGMA * se
    );
}

#[test]
fn grid_bernoulli_frequency_matches_mass() {
    let spec = GridBernoulliSpec::constant(vec![1.0], [("a", 0.3)], 2.0);
    let model = ModelSpec::GridBernoulli(spec).compile().unwrap();
    let reps = 100_000u64;
    let acc = par_chunked_fold(
        reps,
        MomentAccumulator::default,
        |acc, rep| {
            let (traj, _) = model.realize(55, rep).unwrap();
            acc.push(if traj.len() == 1 { 1.0 } else { 0.0 });
        },
        |acc, part| acc.merge(&part),
    );
    let se = (0.3_f64 * 0.7 / reps as f64).sqrt();
    assert!(
        (acc.mean() - 0.3).abs() <= SIGMA * se,
        "frequency {} vs 0.3 ± {}",
        acc.mean(),
        SIGMA * se
    );
}

#[test]
fn common_shock_simultaneous_count_matches_rate() {
    // shock rate 0.5 on horizon 10: mean 5 simultaneous jumps
    let spec = CommonShockSpec::two_component("1", 1.0, "2", 1.0, 0.5, 10.0);
    let compiled = spec.compile().unwrap();
    let reps = 40_000u64;
    let acc = par_chunked_fold(
        reps,
        MomentAccumulator::default,
        |acc, rep| {
            let comps = compiled
                .simulate_with(&mut replication_rng(77, rep))
                .unwrap();
            let times: std::collections::HashSet<u64> = comps[0]
                .0
                .events()
                .iter()
                .map(|e| e.time.to_bits())
                .collect();
            let shared = comps[1]
                .0
                .events()
                .iter()
                .filter(|e| times.contains(&e.time.to_bits()))
                .count();
            acc.push(shared as f64);
        },
        |acc, part| acc.merge(&part),
    );
    let se = acc.std_error();
    assert!(
        (acc.mean() - 5.0).abs() <= SIGMA * se,
        "simultaneous count {} vs 5 ± {}",
        acc.mean(),
        SIGMA * se
    );
}

#[test]
fn martingale_property_at_horizon_for_every_model() {
    let models: Vec<(&str, ModelSpec)> = vec![
        (
            "poisson",
            ModelSpec::Poisson(PoissonSpec::new([("a", 1.0), ("b", 0.5)], 4.0)),
        ),
        ("ctmc", ModelSpec::Ctmc(CtmcSpec::birth_chain(1.5, 40, 4.0))),
        (
            "grid-bernoulli",
            ModelSpec::GridBernoulli(GridBernoulliSpec::constant(
                vec![1.0, 2.0, 3.0],
                [("a", 0.3), ("b", 0.2)],
                4.0,
            )),
        ),
        (
            "common-shock",
            ModelSpec::CommonShock(CommonShockSpec::two_component("1", 0.7, "2", 0.5, 0.4, 4.0)),
        ),
    ];
    let reps = 50_000u64;
    for (name, spec) in models {
        let model = spec.compile().unwrap();
        let marks = model.canonical_marks();
        let horizon = spec.horizon();
        for mark in &marks {
            let (probe, _) = model.realize(300, 0).unwrap();
            let ix = probe.mark_space().require(mark).unwrap();
            let acc = par_chunked_fold(
                reps,
                MomentAccumulator::default,
                |acc, rep| {
                    let (traj, comp) = model.realize(300, rep).unwrap();
                    acc.push(
                        traj.count_through(ix, horizon) as f64 - comp.for_index(ix).eval(horizon),
                    );
                },
                |acc, part| acc.merge(&part),
            );
            assert!(
                acc.covers_zero(SIGMA),
                "{name}/{mark}: mean {} ± {}",
                acc.mean(),
                acc.std_error()
            );
        }
    }
}

#[test]
fn replication_streams_are_uncorrelated() {
    let spec = PoissonSpec::new([("a", 2.0)], 5.0);
    let model = ModelSpec::Poisson(spec).compile().unwrap();
    let reps = 10_000usize;
    let counts: Vec<f64> = (0..reps)
        .map(|rep| model.realize(4242, rep as u64).unwrap().0.len() as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / reps as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let lag1: f64 = counts
        .windows(2)
        .map(|w| (w[0] - mean) * (w[1] - mean))
        .sum::<f64>()
        / (reps - 1) as f64;
    let rho = lag1 / var;
    assert!(
        rho.abs() < 4.0 / (reps as f64).sqrt(),
        "lag-1 correlation {rho}"
    );
}

#[test]
fn simulation_is_bit_deterministic() {
    let specs = [
        ModelSpec::Poisson(PoissonSpec::new([("a", 1.0)], 3.0)),
        ModelSpec::Ctmc(CtmcSpec::birth_chain(1.0, 20, 3.0)),
        ModelSpec::GridBernoulli(GridBernoulliSpec::constant(vec![1.0], [("a", 0.5)], 3.0)),
        ModelSpec::CommonShock(CommonShockSpec::two_component("1", 1.0, "2", 1.0, 0.5, 3.0)),
    ];
    for spec in &specs {
        let model = spec.compile().unwrap();
        for rep in 0..20 {
            let (t1, c1) = model.realize(8, rep).unwrap();
            let (t2, c2) = model.realize(8, rep).unwrap();
            assert_eq!(t1.events(), t2.events());
            assert_eq!(c1.per_mark(), c2.per_mark());
        }
    }
}
