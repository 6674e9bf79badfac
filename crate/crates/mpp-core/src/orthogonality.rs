//! Orthogonality of the per-mark compensated martingales.
//!
//! Two marks whose compensators never place point mass at a common time
//! (mutually avoiding predictable jump times) have pairwise bracket
//! `[M^h, M^k] ≡ 0` on every path: counting processes of distinct marks never
//! jump together, and every remaining bracket term carries a compensator atom
//! of the other mark at the same time. A shared atom breaks this, and the
//! grid model reproduces the failure explicitly.

use crate::calculus::quadratic_covariation;
use crate::compensator::Compensator;
use crate::error::{MppError, Result};
use crate::mark::Mark;
use crate::models::{CompiledModel, ModelSpec};
use crate::path::PiecewisePath;
use crate::rng::{par_chunked_fold, MomentAccumulator};
use crate::tolerances::MIN_ORTHOGONALITY_REPS;

/// Deterministic times at which one mark's compensator places point mass.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictableAtomSet {
    mark: Mark,
    times: Vec<f64>,
}

impl PredictableAtomSet {
    pub fn from_compensator(comp: &Compensator, mark: &Mark) -> Result<Self> {
        let times = comp
            .for_mark(mark)?
            .atoms()
            .iter()
            .filter(|&&(_, m)| m > 0.0)
            .map(|&(t, _)| t)
            .collect();
        Ok(PredictableAtomSet {
            mark: mark.clone(),
            times,
        })
    }

    pub fn mark(&self) -> &Mark {
        &self.mark
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

/// True iff the two atom-time supports are disjoint (bit-identical time
/// comparison). Symmetric in its arguments.
pub fn nopjt_check(a: &PredictableAtomSet, b: &PredictableAtomSet) -> bool {
    let (mut i, mut k) = (0usize, 0usize);
    while i < a.times.len() && k < b.times.len() {
        if a.times[i] == b.times[k] {
            return false;
        }
        if a.times[i] < b.times[k] {
            i += 1;
        } else {
            k += 1;
        }
    }
    true
}

/// Product of compensator atom masses `Δν^h_t · Δν^k_t` at exactly `t`.
/// Zero at every time whenever the two marks' atom supports are disjoint.
pub fn compensator_jump_product(comp: &Compensator, h: &Mark, k: &Mark, t: f64) -> Result<f64> {
    Ok(comp.jump(h, t)? * comp.jump(k, t)?)
}

/// Maximum of `|ΔN^h_σ·Δν^k_σ|` and `|Δν^h_σ·ΔN^k_σ|` over the predictable
/// atom times σ of either mark. Required to vanish when the marks mutually
/// avoid predictable jump times.
pub fn cross_jump_products(
    comp: &Compensator,
    h: &Mark,
    k: &Mark,
    counting_h: &PiecewisePath,
    counting_k: &PiecewisePath,
) -> Result<f64> {
    let mut sigma: Vec<f64> = PredictableAtomSet::from_compensator(comp, h)?
        .times()
        .to_vec();
    sigma.extend(PredictableAtomSet::from_compensator(comp, k)?.times());
    sigma.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sigma.dedup();
    let mut max = 0.0_f64;
    for &t in &sigma {
        let a = (counting_h.jump_at(t) * comp.jump(k, t)?).abs();
        let b = (comp.jump(h, t)? * counting_k.jump_at(t)).abs();
        max = max.max(a).max(b);
    }
    Ok(max)
}

/// Outcome of a pairwise bracket check.
#[derive(Debug, Clone)]
pub struct BracketReport {
    pub nopjt: bool,
    pub bracket: PiecewisePath,
    pub is_zero: bool,
    /// Largest-magnitude bracket jump, when any.
    pub extreme_jump: Option<(f64, f64)>,
    /// True iff the bracket is identically zero whenever NOPJT holds.
    pub pass: bool,
}

/// Compute `[M^h, M^k]` pathwise and check it against the declared NOPJT
/// status: under NOPJT the bracket must be identically zero (exactly — every
/// contribution is a product with at least one zero factor); otherwise the
/// realized nonzero bracket is reported.
pub fn basis_bracket_check(
    h: &Mark,
    k: &Mark,
    m_h: &PiecewisePath,
    m_k: &PiecewisePath,
    nopjt: bool,
) -> Result<BracketReport> {
    if h == k {
        return Err(MppError::SelfBracket(h.to_string()));
    }
    let bracket = quadratic_covariation(m_h, m_k);
    let is_zero = bracket.is_identically_zero();
    let extreme_jump = bracket.max_abs_jump();
    let pass = !nopjt || is_zero;
    Ok(BracketReport {
        nopjt,
        bracket,
        is_zero,
        extreme_jump,
        pass,
    })
}

/// Monte Carlo moment estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McMoment {
    pub estimate: f64,
    pub std_error: f64,
    pub reps: u64,
}

impl McMoment {
    pub fn covers_zero(&self, sigma: f64) -> bool {
        self.estimate.abs() <= sigma * self.std_error
    }

    pub fn rejects_zero(&self, sigma: f64) -> bool {
        self.estimate.abs() > sigma * self.std_error
    }
}

struct McState {
    acc: MomentAccumulator,
    error: Option<MppError>,
}

/// Monte Carlo estimate of `E[M^h_t · M^k_t]` over independent replication
/// streams (`h == k` estimates the variance of `M^h_t`). Deterministic given
/// `(spec, seed, reps)` at any parallelism degree.
pub fn mc_orthogonality(
    model: &CompiledModel,
    h: &Mark,
    k: &Mark,
    t: f64,
    reps: u64,
    master_seed: u64,
) -> Result<McMoment> {
    if reps < MIN_ORTHOGONALITY_REPS {
        return Err(MppError::InvalidSpec(format!(
            "orthogonality moment test needs at least {MIN_ORTHOGONALITY_REPS} replications"
        )));
    }
    // resolve indices once against the canonical space
    let (probe, _) = model.realize(master_seed, 0)?;
    let space = probe.mark_space().clone();
    let h_ix = space.require(h)?;
    let k_ix = space.require(k)?;

    let state = par_chunked_fold(
        reps,
        || McState {
            acc: MomentAccumulator::default(),
            error: None,
        },
        |state, rep| {
            if state.error.is_some() {
                return;
            }
            match model.realize(master_seed, rep) {
                Ok((traj, comp)) => {
                    let mh = traj.count_through(h_ix, t) as f64 - comp.for_index(h_ix).eval(t);
                    let mk = if k_ix == h_ix {
                        mh
                    } else {
                        traj.count_through(k_ix, t) as f64 - comp.for_index(k_ix).eval(t)
                    };
                    state.acc.push(mh * mk);
                }
                Err(e) => state.error = Some(e),
            }
        },
        |state, part| {
            if state.error.is_none() {
                if let Some(e) = part.error {
                    state.error = Some(e);
                }
                state.acc.merge(&part.acc);
            }
        },
    );
    if let Some(e) = state.error {
        return Err(e);
    }
    Ok(McMoment {
        estimate: state.acc.mean(),
        std_error: state.acc.std_error(),
        reps,
    })
}

/// Structural scan of a built-in model: no compensator atom may sit at a time
/// where the corresponding counting process has zero firing probability.
/// Continuous-compensator models must carry no atoms at all; the grid model's
/// atoms must match its positive firing masses exactly.
pub fn atom_support_check(spec: &ModelSpec) -> Result<bool> {
    match spec {
        ModelSpec::GridBernoulli(grid_spec) => {
            let compiled = grid_spec.compile()?;
            let comp = compiled.compensator()?;
            for (mark_ix, mc) in comp.per_mark().iter().enumerate() {
                for &(t, mass) in mc.atoms() {
                    let grid_ix =
                        compiled
                            .grid()
                            .iter()
                            .position(|&g| g == t)
                            .ok_or_else(|| {
                                MppError::InvalidCompensator(format!(
                                    "atom at {t} off the firing grid"
                                ))
                            })?;
                    let firing = compiled.mass(mark_ix, grid_ix);
                    if mass > 0.0 && firing <= 0.0 {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
        other => {
            // continuous-arrival models: atoms must be absent on every path
            let compiled = other.compile()?;
            for seed in 0..3u64 {
                let comps =
                    compiled.simulate_components_with(&mut crate::rng::replication_rng(seed, 0))?;
                for (_, comp) in &comps {
                    for mc in comp.per_mark() {
                        if !mc.atoms().is_empty() {
                            return Ok(false);
                        }
                    }
                }
                let (_, canonical) = compiled.realize(seed, 0)?;
                for mc in canonical.per_mark() {
                    if !mc.atoms().is_empty() {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::compensated_martingale;
    use crate::compensator::MarkCompensator;
    use crate::models::{GridBernoulliSpec, PoissonSpec};
    use crate::trajectory::{atom_space, Trajectory};

    fn grid_comp(
        space: crate::mark::SharedMarkSpace,
        atoms: &[(&str, f64, f64)],
        horizon: f64,
    ) -> Compensator {
        let per_mark = space
            .labels()
            .iter()
            .map(|label| {
                let marks: Vec<(f64, f64)> = atoms
                    .iter()
                    .filter(|(m, _, _)| &Mark::atom(*m) == label)
                    .map(|&(_, t, p)| (t, p))
                    .collect();
                MarkCompensator::new(Vec::new(), marks).unwrap()
            })
            .collect();
        Compensator::new(space, per_mark, horizon).unwrap()
    }

    #[test]
    fn nopjt_cases() {
        let space = atom_space(["a", "b"]).unwrap();
        let no_atoms = Compensator::poisson(space.clone(), &[1.0, 2.0], 3.0).unwrap();
        let a = PredictableAtomSet::from_compensator(&no_atoms, &Mark::atom("a")).unwrap();
        let b = PredictableAtomSet::from_compensator(&no_atoms, &Mark::atom("b")).unwrap();
        assert!(nopjt_check(&a, &b));

        let disjoint = grid_comp(
            space.clone(),
            &[("a", 1.0, 0.3), ("a", 2.0, 0.3), ("b", 1.5, 0.2)],
            3.0,
        );
        let a = PredictableAtomSet::from_compensator(&disjoint, &Mark::atom("a")).unwrap();
        let b = PredictableAtomSet::from_compensator(&disjoint, &Mark::atom("b")).unwrap();
        assert!(nopjt_check(&a, &b));
        assert!(nopjt_check(&b, &a));

        let shared = grid_comp(space, &[("a", 1.0, 0.3), ("b", 1.0, 0.2)], 3.0);
        let a = PredictableAtomSet::from_compensator(&shared, &Mark::atom("a")).unwrap();
        let b = PredictableAtomSet::from_compensator(&shared, &Mark::atom("b")).unwrap();
        assert!(!nopjt_check(&a, &b));
        assert!(!nopjt_check(&b, &a));
    }

    #[test]
    fn jump_products() {
        let space = atom_space(["a", "b"]).unwrap();
        let poisson = Compensator::poisson(space.clone(), &[1.0, 2.0], 3.0).unwrap();
        assert_eq!(
            compensator_jump_product(&poisson, &Mark::atom("a"), &Mark::atom("b"), 1.0).unwrap(),
            0.0
        );

        let disjoint = grid_comp(space.clone(), &[("a", 1.0, 0.3), ("b", 2.0, 0.2)], 3.0);
        assert_eq!(
            compensator_jump_product(&disjoint, &Mark::atom("a"), &Mark::atom("b"), 1.0).unwrap(),
            0.0
        );

        let shared = grid_comp(space, &[("a", 1.0, 0.3), ("b", 1.0, 0.2)], 3.0);
        let prod =
            compensator_jump_product(&shared, &Mark::atom("a"), &Mark::atom("b"), 1.0).unwrap();
        assert_eq!(prod, 0.3 * 0.2);
        // symmetry
        assert_eq!(
            prod,
            compensator_jump_product(&shared, &Mark::atom("b"), &Mark::atom("a"), 1.0).unwrap()
        );
    }

    #[test]
    fn cross_products_detect_firing_on_shared_atom() {
        let space = atom_space(["h", "k"]).unwrap();
        let shared = grid_comp(space.clone(), &[("h", 1.0, 0.3), ("k", 1.0, 0.2)], 3.0);
        // path where h fires at the shared time
        let traj = Trajectory::new(space.clone(), [(1.0, Mark::atom("h"))], 3.0).unwrap();
        let nh = traj.counting_path(&Mark::atom("h")).unwrap();
        let nk = traj.counting_path(&Mark::atom("k")).unwrap();
        let max =
            cross_jump_products(&shared, &Mark::atom("h"), &Mark::atom("k"), &nh, &nk).unwrap();
        assert_eq!(max, 0.2); // |ΔN^h·Δν^k| = 1·0.2

        // poisson pair: no atoms at all
        let poisson = Compensator::poisson(space.clone(), &[1.0, 1.0], 3.0).unwrap();
        let empty = Trajectory::empty(space, 3.0).unwrap();
        let nh = empty.counting_path(&Mark::atom("h")).unwrap();
        let nk = empty.counting_path(&Mark::atom("k")).unwrap();
        assert_eq!(
            cross_jump_products(&poisson, &Mark::atom("h"), &Mark::atom("k"), &nh, &nk).unwrap(),
            0.0
        );
    }

    #[test]
    fn bracket_check_passes_under_nopjt_and_reports_failure_without() {
        let space = atom_space(["h", "k"]).unwrap();
        let shared = grid_comp(space.clone(), &[("h", 1.0, 0.3), ("k", 1.0, 0.2)], 3.0);
        let empty = Trajectory::empty(space.clone(), 3.0).unwrap();
        let mh = compensated_martingale(
            &empty.counting_path(&Mark::atom("h")).unwrap(),
            &shared,
            &Mark::atom("h"),
        )
        .unwrap();
        let mk = compensated_martingale(
            &empty.counting_path(&Mark::atom("k")).unwrap(),
            &shared,
            &Mark::atom("k"),
        )
        .unwrap();
        let report =
            basis_bracket_check(&Mark::atom("h"), &Mark::atom("k"), &mh, &mk, false).unwrap();
        assert!(!report.is_zero);
        assert_eq!(report.extreme_jump, Some((1.0, 0.06)));
        assert!(report.pass); // nothing promised without NOPJT

        // self-bracket is rejected
        assert!(matches!(
            basis_bracket_check(&Mark::atom("h"), &Mark::atom("h"), &mh, &mh, true),
            Err(MppError::SelfBracket(_))
        ));
    }

    #[test]
    fn mc_orthogonality_poisson_covers_zero_and_self_variance() {
        let spec = ModelSpec::Poisson(PoissonSpec::new([("a", 1.0), ("b", 0.5)], 5.0));
        let model = spec.compile().unwrap();
        let t = 5.0;
        let reps = 20_000;
        let cross =
            mc_orthogonality(&model, &Mark::atom("a"), &Mark::atom("b"), t, reps, 99).unwrap();
        assert!(cross.covers_zero(4.0), "cross moment {cross:?}");
        // self test: Var(M_a(t)) = λ·t = 5
        let own =
            mc_orthogonality(&model, &Mark::atom("a"), &Mark::atom("a"), t, reps, 99).unwrap();
        // variance of M², roughly λt(1+2λt); 4σ band
        assert!(
            (own.estimate - 5.0).abs() <= 4.0 * ((5.0 * (1.0 + 2.0 * 5.0)) / reps as f64).sqrt(),
            "self moment {own:?}"
        );
    }

    #[test]
    fn mc_orthogonality_detects_shared_atom_dependence() {
        let spec = ModelSpec::GridBernoulli(GridBernoulliSpec::constant(
            vec![1.0],
            [("h", 0.5), ("k", 0.5)],
            2.0,
        ));
        let model = spec.compile().unwrap();
        let got =
            mc_orthogonality(&model, &Mark::atom("h"), &Mark::atom("k"), 2.0, 2000, 1).unwrap();
        // exactly one of the marks fires, so the product is −0.25 surely
        assert_eq!(got.estimate, -0.25);
        assert!(got.rejects_zero(4.0));
    }

    #[test]
    fn mc_orthogonality_matches_single_atom_enumeration() {
        // one shared atom, masses p and q: enumerating the firing outcomes
        // gives E[M^h_t · M^k_t] = p(1−p)(−q) + q(−p)(1−q) + (1−p−q)pq = −pq
        let (p, q) = (0.3, 0.2);
        let spec = ModelSpec::GridBernoulli(GridBernoulliSpec::constant(
            vec![1.0],
            [("h", p), ("k", q)],
            2.0,
        ));
        let model = spec.compile().unwrap();
        let got =
            mc_orthogonality(&model, &Mark::atom("h"), &Mark::atom("k"), 2.0, 50_000, 8).unwrap();
        assert!(
            (got.estimate - (-p * q)).abs() <= 4.0 * got.std_error,
            "estimate {} vs {}",
            got.estimate,
            -p * q
        );
        assert!(got.rejects_zero(4.0));
    }

    #[test]
    fn mc_orthogonality_requires_enough_reps() {
        let spec = ModelSpec::Poisson(PoissonSpec::new([("a", 1.0)], 1.0));
        let model = spec.compile().unwrap();
        assert!(mc_orthogonality(&model, &Mark::atom("a"), &Mark::atom("a"), 1.0, 10, 0).is_err());
    }

    #[test]
    fn atom_support_scan_accepts_builtins() {
        // grid atoms sit exactly on positive firing masses
        let grid = ModelSpec::GridBernoulli(GridBernoulliSpec::constant(
            vec![0.5, 1.5],
            [("a", 0.3), ("b", 0.2)],
            2.0,
        ));
        assert!(atom_support_check(&grid).unwrap());
        let poisson = ModelSpec::Poisson(PoissonSpec::new([("a", 1.0)], 2.0));
        assert!(atom_support_check(&poisson).unwrap());
    }
}
