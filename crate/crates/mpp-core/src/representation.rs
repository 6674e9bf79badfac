//! Representation integrands for Markov target martingales and pathwise
//! verification of the representation identity.
//!
//! For a finite-state chain with terminal payoff `f` at time `T`, the target
//! martingale is `Z_t = u(t, state_t)` with `u(t,·) = exp((T−t)Q)·f`. The
//! integrand of mark `h = (i→j)` is `W(t, h) = u(t, j) − u(t, i)` while the
//! pre-jump state is `i`, and zero otherwise. Both are assembled per path on
//! the union of the value grid and the path's jump times:
//!
//! - the piece ending at an event time carries `W` evaluated exactly at that
//!   time, so the integral's jump bookkeeping reproduces `ΔZ` bit for bit;
//! - every other piece carries the average of the interpolated `W` over the
//!   piece, which makes the drift part of the identity second-order accurate
//!   in the value-grid step.

use std::fmt;
use std::str::FromStr;

use crate::calculus::{stochastic_integral, Integrand, StepFunction};
use crate::error::{MppError, Result};
use crate::models::CompiledCtmc;
use crate::path::{Jump, PiecewisePath, Segment};
use crate::tolerances::{MIN_VALUE_GRID_NODES, UNIFORMIZATION_TOL};
use crate::trajectory::Trajectory;

/// Terminal payoff over the chain's states.
#[derive(Debug, Clone, PartialEq)]
pub enum Payoff {
    Constant(f64),
    /// 1 on the named state, 0 elsewhere.
    Indicator(String),
    /// Each state label parsed as its numeric value.
    Linear,
}

impl Payoff {
    pub fn values(&self, states: &[String]) -> Result<Vec<f64>> {
        match self {
            Payoff::Constant(c) => Ok(vec![*c; states.len()]),
            Payoff::Indicator(target) => {
                if !states.iter().any(|s| s == target) {
                    return Err(MppError::InvalidValueFunction(format!(
                        "indicator payoff names unknown state `{target}`"
                    )));
                }
                Ok(states
                    .iter()
                    .map(|s| if s == target { 1.0 } else { 0.0 })
                    .collect())
            }
            Payoff::Linear => states
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| MppError::NonNumericMark(s.clone()))
                })
                .collect(),
        }
    }
}

impl FromStr for Payoff {
    type Err = MppError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "linear" {
            return Ok(Payoff::Linear);
        }
        if let Some(c) = s.strip_prefix("constant:") {
            let v: f64 = c
                .parse()
                .map_err(|_| MppError::Format(format!("bad constant payoff `{s}`")))?;
            return Ok(Payoff::Constant(v));
        }
        if let Some(state) = s.strip_prefix("indicator:") {
            return Ok(Payoff::Indicator(state.to_string()));
        }
        Err(MppError::Format(format!(
            "unknown payoff `{s}` (expected `linear`, `constant:<c>` or `indicator:<state>`)"
        )))
    }
}

impl fmt::Display for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payoff::Constant(c) => write!(f, "constant:{c}"),
            Payoff::Indicator(s) => write!(f, "indicator:{s}"),
            Payoff::Linear => write!(f, "linear"),
        }
    }
}

/// Dense per-state values on a uniform time grid, linear in time between
/// nodes and exact at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    states: Vec<String>,
    t_end: f64,
    grid: Vec<f64>,
    /// node-major: `values[node * n_states + state]`
    values: Vec<f64>,
}

impl ValueFunction {
    /// Build from an explicit closed form, evaluated exactly at the grid
    /// nodes. The caller owns the correctness of the formula; only finiteness
    /// is checked.
    pub fn from_grid_fn(
        states: Vec<String>,
        t_end: f64,
        nodes: usize,
        f: impl Fn(f64, usize) -> f64,
    ) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(MppError::InvalidValueFunction(
                "invalid terminal time".into(),
            ));
        }
        if nodes < 2 {
            return Err(MppError::InvalidValueFunction(
                "need at least 2 nodes".into(),
            ));
        }
        if states.is_empty() {
            return Err(MppError::InvalidValueFunction("no states".into()));
        }
        let h = t_end / (nodes - 1) as f64;
        let grid: Vec<f64> = (0..nodes)
            .map(|j| if j + 1 == nodes { t_end } else { j as f64 * h })
            .collect();
        let n = states.len();
        let mut values = vec![0.0; nodes * n];
        for (j, &t) in grid.iter().enumerate() {
            for s in 0..n {
                let v = f(t, s);
                if !v.is_finite() {
                    return Err(MppError::InvalidValueFunction("non-finite value".into()));
                }
                values[j * n + s] = v;
            }
        }
        Ok(ValueFunction {
            states,
            t_end,
            grid,
            values,
        })
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn step(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    /// Linear interpolation in time; exact node values at the nodes and the
    /// terminal payoff exactly at `t_end`. Times are clamped to `[0, t_end]`.
    pub fn eval(&self, t: f64, state: usize) -> f64 {
        let n = self.states.len();
        let last = self.grid.len() - 1;
        if t <= 0.0 {
            return self.values[state];
        }
        if t >= self.t_end {
            return self.values[last * n + state];
        }
        let h = self.step();
        let mut j = ((t / h) as usize).min(last - 1);
        while j > 0 && self.grid[j] > t {
            j -= 1;
        }
        while j + 1 < last && self.grid[j + 1] < t {
            j += 1;
        }
        let (g0, g1) = (self.grid[j], self.grid[j + 1]);
        if t == g0 {
            return self.values[j * n + state];
        }
        if t == g1 {
            return self.values[(j + 1) * n + state];
        }
        let v0 = self.values[j * n + state];
        let v1 = self.values[(j + 1) * n + state];
        v0 + (t - g0) * (v1 - v0) / (g1 - g0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Backward value function `u(t,·) = exp((T−t)Q)·f` by uniformization, with
/// absolute truncation error at most [`UNIFORMIZATION_TOL`] at every node.
/// The grid is uniform with at least [`MIN_VALUE_GRID_NODES`] nodes.
pub fn value_function(
    chain: &CompiledCtmc,
    payoff: &Payoff,
    t_end: f64,
    nodes: usize,
) -> Result<ValueFunction> {
    if !(t_end.is_finite() && t_end > 0.0 && t_end <= chain.horizon()) {
        return Err(MppError::InvalidValueFunction(format!(
            "terminal time {t_end} outside (0, horizon]"
        )));
    }
    if nodes < MIN_VALUE_GRID_NODES {
        return Err(MppError::InvalidValueFunction(format!(
            "value grid needs at least {MIN_VALUE_GRID_NODES} nodes, got {nodes}"
        )));
    }
    let states = chain.states().to_vec();
    let n = states.len();
    let f = payoff.values(&states)?;
    let fmax = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let q = chain.generator();
    let lambda = (0..n).map(|i| -q[i * n + i]).fold(0.0_f64, f64::max);

    let h = t_end / (nodes - 1) as f64;
    let grid: Vec<f64> = (0..nodes)
        .map(|j| if j + 1 == nodes { t_end } else { j as f64 * h })
        .collect();
    let mut values = vec![0.0; nodes * n];

    // uniformized transition kernel P = I + Q/Λ
    let p: Option<Vec<f64>> = (lambda > 0.0).then(|| {
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                p[i * n + j] = q[i * n + j] / lambda + if i == j { 1.0 } else { 0.0 };
            }
        }
        p
    });

    let mut phi = vec![0.0; n];
    let mut next = vec![0.0; n];
    for (node, &t) in grid.iter().enumerate() {
        let out = &mut values[node * n..(node + 1) * n];
        if node + 1 == nodes || lambda == 0.0 {
            out.copy_from_slice(&f);
            continue;
        }
        let s = t_end - t;
        let ls = lambda * s;
        if ls > 700.0 {
            return Err(MppError::InvalidValueFunction(
                "uniformization horizon too large (e^{-Λs} underflows)".into(),
            ));
        }
        let p = p.as_ref().expect("kernel built when Λ > 0");
        phi.copy_from_slice(&f);
        let mut weight = (-ls).exp();
        let mut cum_weight = weight;
        for (o, v) in out.iter_mut().zip(&phi) {
            *o = weight * v;
        }
        let k_max = (ls + 40.0 * (ls + 1.0).sqrt() + 100.0) as usize;
        for k in 1..=k_max {
            if (1.0 - cum_weight) * fmax <= UNIFORMIZATION_TOL {
                break;
            }
            for i in 0..n {
                let row = &p[i * n..(i + 1) * n];
                next[i] = row.iter().zip(&phi).map(|(a, b)| a * b).sum();
            }
            std::mem::swap(&mut phi, &mut next);
            weight *= ls / k as f64;
            cum_weight += weight;
            for (o, v) in out.iter_mut().zip(&phi) {
                *o += weight * v;
            }
        }
    }
    let vf = ValueFunction {
        states,
        t_end,
        grid,
        values,
    };
    if vf.max_abs() > fmax + 1e-9 {
        return Err(MppError::InvalidValueFunction(
            "value function exceeds the payoff bound".into(),
        ));
    }
    Ok(vf)
}

/// Closed-form value function affine in a numeric state:
/// `u(t, s) = s + rate·(T − t)`, the exact backward solution of a pure-birth
/// chain with constant rate under the linear payoff.
pub fn affine_value_function(
    states: &[String],
    rate: f64,
    t_end: f64,
    nodes: usize,
) -> Result<ValueFunction> {
    let numeric: Vec<f64> = states
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| MppError::NonNumericMark(s.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    ValueFunction::from_grid_fn(states.to_vec(), t_end, nodes, |t, s| {
        numeric[s] + rate * (t_end - t)
    })
}

/// One piece of the per-path decomposition: the state is constant on
/// `(a, b]`, and `event` names the transition happening exactly at `b`.
struct PathPiece {
    a: f64,
    b: f64,
    state: usize,
    event: Option<(usize, usize, usize)>, // (mark index, from, to)
}

fn path_pieces(
    chain: &CompiledCtmc,
    u: &ValueFunction,
    traj: &Trajectory,
) -> Result<Vec<PathPiece>> {
    if u.states() != chain.states() {
        return Err(MppError::InvalidValueFunction(
            "value function was built for a different chain".into(),
        ));
    }
    let t_end = u.t_end();
    let states = chain.state_path(traj)?;
    let events: Vec<(f64, usize)> = traj
        .events()
        .iter()
        .take_while(|ev| ev.time <= t_end)
        .map(|ev| (ev.time, ev.mark_index()))
        .collect();

    let mut bounds: Vec<f64> = u
        .grid()
        .iter()
        .copied()
        .filter(|&g| g > 0.0 && g < t_end)
        .collect();
    bounds.extend(events.iter().map(|&(t, _)| t));
    bounds.push(t_end);
    bounds.sort_by(|x, y| x.partial_cmp(y).unwrap());
    bounds.dedup();

    let mut pieces = Vec::with_capacity(bounds.len());
    let mut a = 0.0;
    let mut ev_ix = 0usize;
    for &b in &bounds {
        let state = states[ev_ix];
        let event = if ev_ix < events.len() && events[ev_ix].0 == b {
            let mark_ix = events[ev_ix].1;
            let (from, to) = chain.transition_of_mark(mark_ix);
            ev_ix += 1;
            Some((mark_ix, from, to))
        } else {
            None
        };
        pieces.push(PathPiece { a, b, state, event });
        a = b;
    }
    Ok(pieces)
}

/// Target martingale path `Z_t = u(t, state_t)` along one trajectory:
/// piecewise-linear drift between jumps (exactly the time interpolation of
/// `u`), jumps `u(s, j) − u(s, i)` at the path's transitions, constant after
/// the terminal time.
pub fn target_martingale(
    chain: &CompiledCtmc,
    u: &ValueFunction,
    traj: &Trajectory,
) -> Result<PiecewisePath> {
    let pieces = path_pieces(chain, u, traj)?;
    let initial = u.eval(0.0, chain.initial_state());
    let mut segments = Vec::with_capacity(pieces.len() + 1);
    let mut jumps = Vec::new();
    for piece in &pieces {
        let va = u.eval(piece.a, piece.state);
        let vb = u.eval(piece.b, piece.state);
        segments.push(Segment {
            start: piece.a,
            slope: (vb - va) / (piece.b - piece.a),
        });
        if let Some((_, from, to)) = piece.event {
            let size = u.eval(piece.b, to) - u.eval(piece.b, from);
            if size != 0.0 {
                jumps.push(Jump {
                    time: piece.b,
                    size,
                });
            }
        }
    }
    segments.push(Segment {
        start: u.t_end(),
        slope: 0.0,
    });
    PiecewisePath::new(initial, segments, jumps)
}

/// Per-path representation integrand: for mark `h = (i→j)`, the step value on
/// a piece in state `i` is the interpolated `u(·, j) − u(·, i)` — evaluated
/// exactly at the endpoint on pieces ending in that transition, averaged over
/// the piece otherwise. Marks out of the current state carry zero.
pub fn integrand_from_value(
    chain: &CompiledCtmc,
    u: &ValueFunction,
    traj: &Trajectory,
) -> Result<Integrand> {
    let pieces = path_pieces(chain, u, traj)?;
    let space = chain.mark_space().clone();
    let n_marks = space.len();
    let mut per_mark: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n_marks];

    fn push(start: f64, value: f64, bps: &mut Vec<(f64, f64)>) {
        match bps.last() {
            Some(&(_, last)) if last == value => {}
            _ => bps.push((start, value)),
        }
    }

    for piece in &pieces {
        for (mark_ix, bps) in per_mark.iter_mut().enumerate() {
            let (from, to) = chain.transition_of_mark(mark_ix);
            let value = if from != piece.state {
                0.0
            } else if piece.event.map(|(m, _, _)| m) == Some(mark_ix) {
                // exact endpoint value: matches the jump of Z bit for bit
                u.eval(piece.b, to) - u.eval(piece.b, from)
            } else {
                // trapezoid average of the interpolated difference: exact
                // drift of the piecewise-linear value function on the piece
                0.5 * ((u.eval(piece.a, to) - u.eval(piece.a, from))
                    + (u.eval(piece.b, to) - u.eval(piece.b, from)))
            };
            push(piece.a, value, bps);
        }
    }

    let step_fns = per_mark
        .into_iter()
        .map(|mut bps| {
            if bps.is_empty() {
                bps.push((0.0, 0.0));
            }
            StepFunction::new(bps)
        })
        .collect::<Result<Vec<_>>>()?;
    Integrand::new(space, step_fns)
}

/// Maximum over checkpoints of `|Z_t − Z_0 − Σ_h ∫₀ᵗ W(·,x_h) dM^h|`.
/// For discrete marks this single finite sum certifies the weak and the
/// strong representation identity at once.
pub fn representation_residual(
    z: &PiecewisePath,
    w: &Integrand,
    family: &[PiecewisePath],
    checkpoints: &[f64],
) -> Result<f64> {
    if family.len() != w.per_mark().len() {
        return Err(MppError::MarkSpaceMismatch);
    }
    let mut total = PiecewisePath::zero();
    for (step, m) in w.per_mark().iter().zip(family) {
        total = total.add(&stochastic_integral(step, m));
    }
    let z0 = z.initial();
    let mut max = 0.0_f64;
    for &t in checkpoints {
        let r = (z.value(t) - z0 - total.value(t)).abs();
        max = max.max(r);
    }
    Ok(max)
}

/// Maximum jump-matching defect `|ΔZ_s − Σ_h W(s,x_h)·ΔM^h_s|` over every
/// jump time of `Z` and of the driving martingales.
pub fn jump_match_defect(
    z: &PiecewisePath,
    w: &Integrand,
    family: &[PiecewisePath],
) -> Result<f64> {
    if family.len() != w.per_mark().len() {
        return Err(MppError::MarkSpaceMismatch);
    }
    let mut times: Vec<f64> = z.jumps().iter().map(|j| j.time).collect();
    for m in family {
        times.extend(m.jumps().iter().map(|j| j.time));
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    let mut max = 0.0_f64;
    for &t in &times {
        let mut rhs = 0.0;
        for (step, m) in w.per_mark().iter().zip(family) {
            let dm = m.jump_at(t);
            if dm != 0.0 {
                rhs += step.value_at(t) * dm;
            }
        }
        max = max.max((z.jump_at(t) - rhs).abs());
    }
    Ok(max)
}

/// Checkpoint grid: `n_uniform` uniform times on `(0, t_end]` plus every
/// event time and its one-grid-step neighbours, clamped to `(0, t_end]`.
pub fn default_checkpoints(
    event_times: &[f64],
    t_end: f64,
    grid_step: f64,
    n_uniform: usize,
) -> Vec<f64> {
    let mut points = Vec::with_capacity(n_uniform + 3 * event_times.len());
    for k in 1..=n_uniform {
        points.push(t_end * k as f64 / n_uniform as f64);
    }
    for &s in event_times {
        if s <= t_end {
            points.push(s);
            if s - grid_step > 0.0 {
                points.push(s - grid_step);
            }
            points.push((s + grid_step).min(t_end));
        }
    }
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup();
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::compensated_martingale;
    use crate::models::{CtmcSpec, Transition};
    use crate::rng::replication_rng;

    fn two_state(horizon: f64) -> CtmcSpec {
        CtmcSpec {
            states: vec!["1".into(), "2".into()],
            initial: "1".into(),
            transitions: vec![Transition {
                from: "1".into(),
                to: "2".into(),
                rate: 1.0,
                mark: "1->2".into(),
            }],
            horizon,
        }
    }

    #[test]
    fn constant_payoff_is_harmonic() {
        let chain = two_state(2.0).compile().unwrap();
        let u = value_function(&chain, &Payoff::Constant(3.5), 2.0, 1001).unwrap();
        for t in [0.0, 0.7, 1.3, 2.0] {
            for s in 0..2 {
                assert!((u.eval(t, s) - 3.5).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn two_state_value_matches_closed_form() {
        let t_end = 2.0;
        let chain = two_state(t_end).compile().unwrap();
        let u = value_function(&chain, &Payoff::Indicator("2".into()), t_end, 1001).unwrap();
        for k in 0..=20 {
            let t = t_end * k as f64 / 20.0;
            let exact = 1.0 - (-(t_end - t)).exp();
            assert!(
                (u.eval(t, 0) - exact).abs() < 1e-9,
                "u(t,1) off at t={t}: {} vs {exact}",
                u.eval(t, 0)
            );
            assert!((u.eval(t, 1) - 1.0).abs() < 1e-9);
        }
        // terminal payoff exact
        assert_eq!(u.eval(t_end, 0), 0.0);
        assert_eq!(u.eval(t_end, 1), 1.0);
    }

    #[test]
    fn birth_chain_uniformization_matches_affine_form() {
        // truncation level comfortably above λT + 10√(λT)
        let rate = 2.0;
        let t_end = 5.0;
        let levels = 64;
        let spec = CtmcSpec::birth_chain(rate, levels, t_end);
        let chain = spec.compile().unwrap();
        let u = value_function(&chain, &Payoff::Linear, t_end, 1001).unwrap();
        for k in 0..=10 {
            let t = t_end * k as f64 / 10.0;
            for n in 0..=12 {
                let exact = n as f64 + rate * (t_end - t);
                assert!(
                    (u.eval(t, n) - exact).abs() <= 1e-8,
                    "u({t},{n}) = {} vs {exact}",
                    u.eval(t, n)
                );
            }
        }
    }

    #[test]
    fn integrand_of_constant_payoff_vanishes() {
        let chain = two_state(2.0).compile().unwrap();
        let u =
            ValueFunction::from_grid_fn(chain.states().to_vec(), 2.0, 1001, |_, _| 4.0).unwrap();
        let (traj, _) = chain.simulate_with(&mut replication_rng(5, 0)).unwrap();
        let w = integrand_from_value(&chain, &u, &traj).unwrap();
        for step in w.per_mark() {
            for &(_, v) in step.breakpoints() {
                assert_eq!(v, 0.0);
            }
        }
        let z = target_martingale(&chain, &u, &traj).unwrap();
        for t in [0.5, 1.0, 2.0] {
            assert_eq!(z.value(t), 4.0);
        }
    }

    #[test]
    fn two_state_integrand_matches_closed_form() {
        let t_end = 2.0;
        let chain = two_state(t_end).compile().unwrap();
        let u = value_function(&chain, &Payoff::Indicator("2".into()), t_end, 2001).unwrap();
        // a path with no jump keeps state 1, so W(t, 1->2) ≈ e^{−(T−t)}
        let traj = Trajectory::empty(chain.mark_space().clone(), t_end).unwrap();
        let w = integrand_from_value(&chain, &u, &traj).unwrap();
        let step = w.for_mark(&crate::mark::Mark::atom("1->2")).unwrap();
        for k in 1..=10 {
            let t = t_end * k as f64 / 10.0;
            let exact = (-(t_end - t)).exp();
            assert!(
                (step.value_at(t) - exact).abs() < 1e-3,
                "W({t}) = {} vs {exact}",
                step.value_at(t)
            );
        }
    }

    #[test]
    fn constant_payoff_residual_is_exactly_zero() {
        let chain = two_state(2.0).compile().unwrap();
        let u =
            ValueFunction::from_grid_fn(chain.states().to_vec(), 2.0, 1001, |_, _| 2.5).unwrap();
        for rep in 0..20 {
            let (traj, comp) = chain.simulate_with(&mut replication_rng(31, rep)).unwrap();
            let z = target_martingale(&chain, &u, &traj).unwrap();
            let w = integrand_from_value(&chain, &u, &traj).unwrap();
            let family: Vec<PiecewisePath> = chain
                .mark_space()
                .labels()
                .iter()
                .map(|mark| {
                    let n = traj.counting_path(mark).unwrap();
                    compensated_martingale(&n, &comp, mark).unwrap()
                })
                .collect();
            let checkpoints: Vec<f64> = (1..=50).map(|k| 2.0 * k as f64 / 50.0).collect();
            let residual = representation_residual(&z, &w, &family, &checkpoints).unwrap();
            assert_eq!(residual, 0.0);
        }
    }

    #[test]
    fn affine_birth_chain_residual_is_machine_zero() {
        // value grid with a binary-exact step keeps the node values exact
        let rate = 1.0;
        let t_end = 2.0;
        let spec = CtmcSpec::birth_chain(rate, 32, t_end);
        let chain = spec.compile().unwrap();
        let u = affine_value_function(chain.states(), rate, t_end, 1025).unwrap();
        // the linear payoff makes the integrand constant one
        {
            let (traj, _) = chain.simulate_with(&mut replication_rng(123, 0)).unwrap();
            let w = integrand_from_value(&chain, &u, &traj).unwrap();
            let states = chain.state_path(&traj).unwrap();
            for &state in &states {
                if state + 1 < chain.states().len() {
                    let mark = crate::mark::Mark::atom(format!("{}->{}", state, state + 1));
                    let step = w.for_mark(&mark).unwrap();
                    for &(_, v) in step.breakpoints() {
                        assert!(v == 0.0 || (v - 1.0).abs() <= 1e-12, "W value {v}");
                    }
                }
            }
        }
        for rep in 0..50 {
            let (traj, comp) = chain.simulate_with(&mut replication_rng(123, rep)).unwrap();
            assert!(traj.len() < 20, "explosion-safe level for the test");
            let z = target_martingale(&chain, &u, &traj).unwrap();
            let w = integrand_from_value(&chain, &u, &traj).unwrap();
            let family: Vec<PiecewisePath> = chain
                .mark_space()
                .labels()
                .iter()
                .map(|mark| {
                    let n = traj.counting_path(mark).unwrap();
                    compensated_martingale(&n, &comp, mark).unwrap()
                })
                .collect();
            let checkpoints = default_checkpoints(
                &traj.events().iter().map(|e| e.time).collect::<Vec<_>>(),
                t_end,
                u.step(),
                100,
            );
            let residual = representation_residual(&z, &w, &family, &checkpoints).unwrap();
            assert!(residual <= 1e-12, "rep {rep}: residual {residual}");
            let defect = jump_match_defect(&z, &w, &family).unwrap();
            assert_eq!(defect, 0.0, "rep {rep}");
        }
    }

    #[test]
    fn two_state_residual_within_budget_and_halving() {
        let t_end = 2.0;
        let chain = two_state(t_end).compile().unwrap();
        let residual_at = |nodes: usize| -> f64 {
            let u = value_function(&chain, &Payoff::Indicator("2".into()), t_end, nodes).unwrap();
            let mut worst = 0.0_f64;
            for rep in 0..100 {
                let (traj, comp) = chain.simulate_with(&mut replication_rng(77, rep)).unwrap();
                let z = target_martingale(&chain, &u, &traj).unwrap();
                let w = integrand_from_value(&chain, &u, &traj).unwrap();
                let family: Vec<PiecewisePath> = chain
                    .mark_space()
                    .labels()
                    .iter()
                    .map(|mark| {
                        let n = traj.counting_path(mark).unwrap();
                        compensated_martingale(&n, &comp, mark).unwrap()
                    })
                    .collect();
                let checkpoints = default_checkpoints(
                    &traj.events().iter().map(|e| e.time).collect::<Vec<_>>(),
                    t_end,
                    u.step(),
                    100,
                );
                worst = worst.max(representation_residual(&z, &w, &family, &checkpoints).unwrap());
            }
            worst
        };
        let coarse = residual_at(1001);
        let fine = residual_at(2001);
        assert!(coarse <= 1e-5, "coarse residual {coarse}");
        assert!(fine <= 0.5 * coarse, "halving: {fine} vs {coarse}");
    }

    #[test]
    fn payoff_parsing_roundtrip() {
        for s in ["linear", "constant:2.5", "indicator:2"] {
            let p: Payoff = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("bogus".parse::<Payoff>().is_err());
    }

    #[test]
    fn value_grid_minimum_enforced() {
        let chain = two_state(2.0).compile().unwrap();
        assert!(value_function(&chain, &Payoff::Constant(1.0), 2.0, 100).is_err());
    }
}
