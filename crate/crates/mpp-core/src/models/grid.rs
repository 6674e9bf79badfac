//! Bernoulli firing on a deterministic time grid.
//!
//! At each grid time at most one mark fires: mark `h` with probability
//! `p_h(t)`, none with the remaining mass. The compensator is purely atomic
//! with mass `p_h(t)` at each grid time, realizing accessible jump times.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::compensator::{Compensator, MarkCompensator};
use crate::error::{MppError, Result};
use crate::mark::{MarkSpace, SharedMarkSpace};
use crate::rng::replication_rng;
use crate::tolerances::ATOM_MASS_SLACK;
use crate::trajectory::{Event, Trajectory};

/// Firing mass of one mark: a single value shared by all grid times, or one
/// value per grid time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProbSpec {
    Constant(f64),
    PerTime(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridBernoulliSpec {
    /// Strictly increasing firing times in `(0, horizon]`.
    pub grid: Vec<f64>,
    /// Firing mass per mark (map order fixes mark order).
    pub probs: BTreeMap<String, ProbSpec>,
    pub horizon: f64,
}

impl GridBernoulliSpec {
    pub fn constant(
        grid: Vec<f64>,
        probs: impl IntoIterator<Item = (impl Into<String>, f64)>,
        horizon: f64,
    ) -> Self {
        GridBernoulliSpec {
            grid,
            probs: probs
                .into_iter()
                .map(|(m, p)| (m.into(), ProbSpec::Constant(p)))
                .collect(),
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.compile().map(|_| ())
    }

    pub fn compile(&self) -> Result<CompiledGrid> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(MppError::InvalidSpec("grid: invalid horizon".into()));
        }
        if self.grid.is_empty() {
            return Err(MppError::InvalidSpec("grid: no grid times".into()));
        }
        for (i, &t) in self.grid.iter().enumerate() {
            if !(t.is_finite() && t > 0.0 && t <= self.horizon) {
                return Err(MppError::InvalidSpec(format!(
                    "grid: time {t} outside (0, horizon]"
                )));
            }
            if i > 0 && t <= self.grid[i - 1] {
                return Err(MppError::InvalidSpec(
                    "grid: times must be strictly increasing".into(),
                ));
            }
        }
        if self.probs.is_empty() {
            return Err(MppError::InvalidSpec("grid: no marks".into()));
        }
        let mut masses: Vec<Vec<f64>> = Vec::with_capacity(self.probs.len());
        for (mark, prob) in &self.probs {
            let per_time = match prob {
                ProbSpec::Constant(p) => vec![*p; self.grid.len()],
                ProbSpec::PerTime(v) => {
                    if v.len() != self.grid.len() {
                        return Err(MppError::InvalidSpec(format!(
                            "grid: `{mark}` has {} masses for {} grid times",
                            v.len(),
                            self.grid.len()
                        )));
                    }
                    v.clone()
                }
            };
            for &p in &per_time {
                if !(0.0..=1.0).contains(&p) {
                    return Err(MppError::InvalidSpec(format!(
                        "grid: mass {p} of `{mark}` outside [0, 1]"
                    )));
                }
            }
            masses.push(per_time);
        }
        for k in 0..self.grid.len() {
            let total: f64 = masses.iter().map(|m| m[k]).sum();
            if total > 1.0 + ATOM_MASS_SLACK {
                return Err(MppError::InvalidSpec(format!(
                    "grid: masses at time {} sum to {total} > 1",
                    self.grid[k]
                )));
            }
        }
        let space = Arc::new(MarkSpace::atoms(self.probs.keys().cloned())?);
        Ok(CompiledGrid {
            space,
            grid: self.grid.clone(),
            masses,
            horizon: self.horizon,
        })
    }
}

pub struct CompiledGrid {
    space: SharedMarkSpace,
    grid: Vec<f64>,
    /// `masses[mark][grid_ix]`
    masses: Vec<Vec<f64>>,
    horizon: f64,
}

impl CompiledGrid {
    pub fn mark_space(&self) -> &SharedMarkSpace {
        &self.space
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn mass(&self, mark_ix: usize, grid_ix: usize) -> f64 {
        self.masses[mark_ix][grid_ix]
    }

    pub fn compensator(&self) -> Result<Compensator> {
        let per_mark = self
            .masses
            .iter()
            .map(|mass| {
                let atoms: Vec<(f64, f64)> = self
                    .grid
                    .iter()
                    .zip(mass)
                    .filter(|&(_, &p)| p > 0.0)
                    .map(|(&t, &p)| (t, p))
                    .collect();
                MarkCompensator::new(Vec::new(), atoms)
            })
            .collect::<Result<Vec<_>>>()?;
        Compensator::new(self.space.clone(), per_mark, self.horizon)
    }

    pub fn simulate_with<R: Rng>(&self, rng: &mut R) -> Result<(Trajectory, Compensator)> {
        let mut events = Vec::new();
        for (k, &t) in self.grid.iter().enumerate() {
            let u: f64 = rng.gen();
            let mut cum = 0.0;
            for (mark_ix, mass) in self.masses.iter().enumerate() {
                cum += mass[k];
                if u < cum {
                    events.push(Event {
                        time: t,
                        mark_ix: mark_ix as u32,
                    });
                    break;
                }
            }
        }
        let traj = Trajectory::from_events(self.space.clone(), events, self.horizon)?;
        Ok((traj, self.compensator()?))
    }
}

/// Deterministic given `(spec, seed)`: at each grid time at most one mark
/// fires; the compensator carries atoms `(grid time, p_h)` and no
/// continuous part.
pub fn simulate_grid_bernoulli(
    spec: &GridBernoulliSpec,
    seed: u64,
) -> Result<(Trajectory, Compensator)> {
    spec.compile()?.simulate_with(&mut replication_rng(seed, 0))
}
