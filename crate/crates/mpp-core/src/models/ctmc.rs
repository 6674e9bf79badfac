//! Finite-state continuous-time Markov chains with one mark per transition.
//!
//! The generator is given as a transition list; diagonal entries are implied,
//! so rows sum to zero exactly. The per-path compensator of mark `(i→j)` is
//! piecewise linear with slope `Q_ij` while the chain sits in state `i` and
//! slope zero otherwise, with breakpoints at the path's own jump times.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::compensator::{Compensator, MarkCompensator};
use crate::error::{MppError, Result};
use crate::mark::{MarkSpace, SharedMarkSpace};
use crate::rng::replication_rng;
use crate::tolerances::EXPLOSION_GUARD;
use crate::trajectory::{Event, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub to: String,
    pub rate: f64,
    pub mark: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtmcSpec {
    pub states: Vec<String>,
    pub initial: String,
    pub transitions: Vec<Transition>,
    pub horizon: f64,
}

impl CtmcSpec {
    pub fn validate(&self) -> Result<()> {
        self.compile().map(|_| ())
    }

    pub fn compile(&self) -> Result<CompiledCtmc> {
        if self.states.is_empty() {
            return Err(MppError::InvalidSpec("ctmc: no states".into()));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(MppError::InvalidSpec("ctmc: invalid horizon".into()));
        }
        let mut state_ix: HashMap<&str, usize> = HashMap::new();
        for (i, s) in self.states.iter().enumerate() {
            if s.is_empty() {
                return Err(MppError::InvalidSpec("ctmc: empty state label".into()));
            }
            if state_ix.insert(s.as_str(), i).is_some() {
                return Err(MppError::InvalidSpec(format!(
                    "ctmc: duplicate state `{s}`"
                )));
            }
        }
        let initial_ix = *state_ix
            .get(self.initial.as_str())
            .ok_or_else(|| MppError::InvalidSpec("ctmc: unknown initial state".into()))?;

        if self.transitions.is_empty() {
            return Err(MppError::InvalidSpec("ctmc: no transitions".into()));
        }
        let n = self.states.len();
        let mut outgoing: Vec<Vec<OutEdge>> = vec![Vec::new(); n];
        let mut mark_edges = Vec::with_capacity(self.transitions.len());
        let mut seen_pairs = HashMap::new();
        for (mark_pos, tr) in self.transitions.iter().enumerate() {
            let from = *state_ix.get(tr.from.as_str()).ok_or_else(|| {
                MppError::InvalidSpec(format!("ctmc: unknown state `{}`", tr.from))
            })?;
            let to = *state_ix
                .get(tr.to.as_str())
                .ok_or_else(|| MppError::InvalidSpec(format!("ctmc: unknown state `{}`", tr.to)))?;
            if from == to {
                return Err(MppError::InvalidSpec(
                    "ctmc: self-transitions are not allowed".into(),
                ));
            }
            if !(tr.rate.is_finite() && tr.rate > 0.0) {
                return Err(MppError::InvalidSpec(format!(
                    "ctmc: rate of `{}` must be positive and finite",
                    tr.mark
                )));
            }
            if seen_pairs.insert((from, to), mark_pos).is_some() {
                return Err(MppError::InvalidSpec(format!(
                    "ctmc: duplicate transition {} -> {}",
                    tr.from, tr.to
                )));
            }
            outgoing[from].push(OutEdge {
                to,
                rate: tr.rate,
                mark_ix: mark_pos as u32,
            });
            mark_edges.push(MarkEdge {
                from,
                rate: tr.rate,
            });
        }
        let space = Arc::new(MarkSpace::atoms(
            self.transitions.iter().map(|t| t.mark.clone()),
        )?);
        let exit_rate: Vec<f64> = outgoing
            .iter()
            .map(|edges| edges.iter().map(|e| e.rate).sum())
            .collect();
        Ok(CompiledCtmc {
            space,
            outgoing,
            exit_rate,
            mark_edges,
            initial_ix,
            n_states: n,
            states: self.states.clone(),
            horizon: self.horizon,
        })
    }

    /// The common rate of a pure-birth chain over numeric states (every
    /// transition climbs one level at one shared rate), or `None` when the
    /// chain has any other shape. Such chains admit the closed-form affine
    /// value function under the linear payoff.
    pub fn uniform_birth_rate(&self) -> Option<f64> {
        let mut rate = None;
        for tr in &self.transitions {
            let from: f64 = tr.from.parse().ok()?;
            let to: f64 = tr.to.parse().ok()?;
            if to != from + 1.0 {
                return None;
            }
            match rate {
                None => rate = Some(tr.rate),
                Some(r) if r == tr.rate => {}
                Some(_) => return None,
            }
        }
        rate
    }

    /// Pure-birth chain on levels `0..=levels` with constant upward `rate`:
    /// the Poisson process viewed as a CTMC, with mark `k->k+1` per level.
    pub fn birth_chain(rate: f64, levels: usize, horizon: f64) -> CtmcSpec {
        let states: Vec<String> = (0..=levels).map(|k| k.to_string()).collect();
        let transitions = (0..levels)
            .map(|k| Transition {
                from: k.to_string(),
                to: (k + 1).to_string(),
                rate,
                mark: format!("{}->{}", k, k + 1),
            })
            .collect();
        CtmcSpec {
            states,
            initial: "0".to_string(),
            transitions,
            horizon,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct OutEdge {
    to: usize,
    rate: f64,
    mark_ix: u32,
}

#[derive(Debug, Clone, Copy)]
struct MarkEdge {
    from: usize,
    rate: f64,
}

pub struct CompiledCtmc {
    space: SharedMarkSpace,
    outgoing: Vec<Vec<OutEdge>>,
    exit_rate: Vec<f64>,
    mark_edges: Vec<MarkEdge>,
    initial_ix: usize,
    n_states: usize,
    states: Vec<String>,
    horizon: f64,
}

impl CompiledCtmc {
    pub fn mark_space(&self) -> &SharedMarkSpace {
        &self.space
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn initial_state(&self) -> usize {
        self.initial_ix
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Dense generator matrix (row-major), diagonal = −(row sum of rates).
    pub fn generator(&self) -> Vec<f64> {
        let n = self.n_states;
        let mut q = vec![0.0; n * n];
        for (from, edges) in self.outgoing.iter().enumerate() {
            for e in edges {
                q[from * n + e.to] += e.rate;
            }
            q[from * n + from] = -self.exit_rate[from];
        }
        q
    }

    /// `(from, to)` state indices of a mark.
    pub fn transition_of_mark(&self, mark_ix: usize) -> (usize, usize) {
        let from = self.mark_edges[mark_ix].from;
        let to = self.outgoing[from]
            .iter()
            .find(|e| e.mark_ix as usize == mark_ix)
            .map(|e| e.to)
            .expect("mark edge present");
        (from, to)
    }

    /// State path implied by a trajectory of this chain (initial state plus
    /// the post-jump state of each event, validated against the transitions).
    pub fn state_path(&self, traj: &Trajectory) -> Result<Vec<usize>> {
        let mut states = Vec::with_capacity(traj.len() + 1);
        let mut current = self.initial_ix;
        states.push(current);
        for ev in traj.events() {
            let mark_ix = ev.mark_index();
            let edge = self
                .mark_edges
                .get(mark_ix)
                .ok_or_else(|| MppError::UnknownMark(traj.mark_of(ev).to_string()))?;
            if edge.from != current {
                return Err(MppError::InvalidTrajectory(format!(
                    "transition mark `{}` does not start from the current state",
                    traj.mark_of(ev)
                )));
            }
            current = self.transition_of_mark(mark_ix).1;
            states.push(current);
        }
        Ok(states)
    }

    pub fn simulate_with<R: Rng>(&self, rng: &mut R) -> Result<(Trajectory, Compensator)> {
        let mut events: Vec<Event> = Vec::new();
        let mut state_seq: Vec<usize> = vec![self.initial_ix];
        let mut state = self.initial_ix;
        let mut t = 0.0_f64;
        loop {
            let q = self.exit_rate[state];
            if q == 0.0 {
                break; // absorbing state: the trajectory simply ends
            }
            let gap = loop {
                let u: f64 = rng.gen();
                let g = -(1.0 - u).ln() / q;
                if g > 0.0 {
                    break g;
                }
            };
            t += gap;
            if t > self.horizon {
                break;
            }
            let pick: f64 = rng.gen::<f64>() * q;
            let edges = &self.outgoing[state];
            let mut cum = 0.0;
            let mut chosen = edges[edges.len() - 1];
            for e in edges {
                cum += e.rate;
                if pick < cum {
                    chosen = *e;
                    break;
                }
            }
            events.push(Event {
                time: t,
                mark_ix: chosen.mark_ix,
            });
            state = chosen.to;
            state_seq.push(state);
            if events.len() > EXPLOSION_GUARD {
                return Err(MppError::ExplosionGuard {
                    limit: EXPLOSION_GUARD,
                });
            }
        }

        let comp = self.path_compensator(&events, &state_seq)?;
        let traj = Trajectory::from_events(self.space.clone(), events, self.horizon)?;
        Ok((traj, comp))
    }

    /// Per-path compensator: for each mark, cumulative `rate × (time spent in
    /// the source state)`, with breakpoints at the path's jump times.
    fn path_compensator(&self, events: &[Event], state_seq: &[usize]) -> Result<Compensator> {
        let n_marks = self.mark_edges.len();
        // shared breakpoint grid: 0, each jump time, horizon
        let mut grid = Vec::with_capacity(events.len() + 2);
        grid.push(0.0);
        grid.extend(events.iter().map(|e| e.time));
        if *grid.last().unwrap() < self.horizon {
            grid.push(self.horizon);
        }
        let mut values = vec![vec![0.0_f64; grid.len()]; n_marks];
        for seg in 0..grid.len() - 1 {
            let len = grid[seg + 1] - grid[seg];
            let state = state_seq[seg.min(state_seq.len() - 1)];
            for (mark_ix, edge) in self.mark_edges.iter().enumerate() {
                let slope = if edge.from == state { edge.rate } else { 0.0 };
                values[mark_ix][seg + 1] = values[mark_ix][seg] + slope * len;
            }
        }
        let per_mark = values
            .into_iter()
            .map(|vals| {
                let bps: Vec<(f64, f64)> = grid.iter().copied().zip(vals).collect();
                MarkCompensator::new(bps, Vec::new())
            })
            .collect::<Result<Vec<_>>>()?;
        Compensator::new(self.space.clone(), per_mark, self.horizon)
    }
}

/// Embedded-chain simulation, deterministic given `(spec, seed)`.
pub fn simulate_ctmc(spec: &CtmcSpec, seed: u64) -> Result<(Trajectory, Compensator)> {
    spec.compile()?.simulate_with(&mut replication_rng(seed, 0))
}
