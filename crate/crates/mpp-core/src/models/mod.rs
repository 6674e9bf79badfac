//! Seeded simulators that produce trajectories together with their exact
//! per-path compensators.
//!
//! Four model families are built in:
//! - [`PoissonSpec`]: independent constant-rate arrivals per mark (totally
//!   inaccessible jump times, continuous compensator),
//! - [`CtmcSpec`]: finite-state Markov chains with one mark per transition
//!   (continuous but path-dependent compensator),
//! - [`GridBernoulliSpec`]: at most one mark firing per deterministic grid
//!   time (accessible jump times, purely atomic compensator),
//! - [`CommonShockSpec`]: multiple components sharing a shock stream that
//!   jumps in two designated components at bit-identical times.
//!
//! Simulation is pure given `(spec, seed)`: replications are keyed by
//! independent RNG streams, so runs are reproducible at any parallelism
//! degree.

mod ctmc;
mod grid;
mod poisson;
mod shock;

pub use ctmc::{simulate_ctmc, CompiledCtmc, CtmcSpec, Transition};
pub use grid::{simulate_grid_bernoulli, CompiledGrid, GridBernoulliSpec, ProbSpec};
pub use poisson::{simulate_poisson, CompiledPoisson, PoissonSpec};
pub use shock::{simulate_common_shock, CommonShockSpec, CompiledShock, ShockComponent};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::compensator::Compensator;
use crate::error::{MppError, Result};
use crate::mark::Mark;
use crate::merge::{merge, MergedTrajectory};
use crate::rng::replication_rng;
use crate::tolerances::EXPLOSION_GUARD;
use crate::trajectory::{Event, Trajectory};

/// Any built-in model, as read from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    Poisson(PoissonSpec),
    Ctmc(CtmcSpec),
    GridBernoulli(GridBernoulliSpec),
    CommonShock(CommonShockSpec),
}

impl ModelSpec {
    pub fn horizon(&self) -> f64 {
        match self {
            ModelSpec::Poisson(s) => s.horizon,
            ModelSpec::Ctmc(s) => s.horizon,
            ModelSpec::GridBernoulli(s) => s.horizon,
            ModelSpec::CommonShock(s) => s.horizon,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelSpec::Poisson(_) => "poisson",
            ModelSpec::Ctmc(_) => "ctmc",
            ModelSpec::GridBernoulli(_) => "grid-bernoulli",
            ModelSpec::CommonShock(_) => "common-shock",
        }
    }

    pub fn compile(&self) -> Result<CompiledModel> {
        Ok(match self {
            ModelSpec::Poisson(s) => CompiledModel::Poisson(s.compile()?),
            ModelSpec::Ctmc(s) => CompiledModel::Ctmc(s.compile()?),
            ModelSpec::GridBernoulli(s) => CompiledModel::Grid(s.compile()?),
            ModelSpec::CommonShock(s) => CompiledModel::Shock(s.compile()?),
        })
    }
}

/// Validated, index-resolved form of a model, cheap to simulate repeatedly.
pub enum CompiledModel {
    Poisson(CompiledPoisson),
    Ctmc(CompiledCtmc),
    Grid(CompiledGrid),
    Shock(CompiledShock),
}

impl CompiledModel {
    /// One trajectory/compensator pair per component (a single pair for the
    /// single-process models).
    pub fn simulate_components_with<R: Rng>(
        &self,
        rng: &mut R,
    ) -> Result<Vec<(Trajectory, Compensator)>> {
        match self {
            CompiledModel::Poisson(m) => Ok(vec![m.simulate_with(rng)?]),
            CompiledModel::Ctmc(m) => Ok(vec![m.simulate_with(rng)?]),
            CompiledModel::Grid(m) => Ok(vec![m.simulate_with(rng)?]),
            CompiledModel::Shock(m) => m.simulate_with(rng),
        }
    }

    /// Canonical single-process view: the model itself for single-process
    /// models, the merged process (product marks, model-supplied merged
    /// compensator) for the common-shock model.
    pub fn realize_with<R: Rng>(&self, rng: &mut R) -> Result<(Trajectory, Compensator)> {
        match self {
            CompiledModel::Poisson(m) => m.simulate_with(rng),
            CompiledModel::Ctmc(m) => m.simulate_with(rng),
            CompiledModel::Grid(m) => m.simulate_with(rng),
            CompiledModel::Shock(m) => m.realize_with(rng),
        }
    }

    /// Marks of the canonical single-process view.
    pub fn canonical_marks(&self) -> Vec<Mark> {
        match self {
            CompiledModel::Poisson(m) => m.mark_space().labels().to_vec(),
            CompiledModel::Ctmc(m) => m.mark_space().labels().to_vec(),
            CompiledModel::Grid(m) => m.mark_space().labels().to_vec(),
            CompiledModel::Shock(m) => m.merged_space().labels().to_vec(),
        }
    }

    /// Replication `rep` under `master_seed`, canonical view.
    pub fn realize(&self, master_seed: u64, rep: u64) -> Result<(Trajectory, Compensator)> {
        self.realize_with(&mut replication_rng(master_seed, rep))
    }

    /// Merged view of a replication for multi-component models; single models
    /// are merged as a 1-vector (arity-1 tuple marks).
    pub fn merged_view(&self, master_seed: u64, rep: u64) -> Result<MergedTrajectory> {
        let comps = self.simulate_components_with(&mut replication_rng(master_seed, rep))?;
        let trajs: Vec<Trajectory> = comps.into_iter().map(|(t, _)| t).collect();
        merge(&trajs)
    }
}

/// Exponential inter-arrival times at constant `rate` on `(0, horizon]`,
/// appended to `out`. Zero-length gaps (a measure-zero draw) are re-drawn so
/// event times stay strictly increasing.
pub(crate) fn exp_arrivals<R: Rng>(
    rate: f64,
    horizon: f64,
    rng: &mut R,
    out: &mut Vec<f64>,
) -> Result<()> {
    if rate == 0.0 {
        return Ok(());
    }
    let mut t = 0.0_f64;
    loop {
        let u: f64 = rng.gen();
        let gap = -(1.0 - u).ln() / rate;
        if gap <= 0.0 {
            continue;
        }
        t += gap;
        if t > horizon {
            return Ok(());
        }
        out.push(t);
        if out.len() > EXPLOSION_GUARD {
            return Err(MppError::ExplosionGuard {
                limit: EXPLOSION_GUARD,
            });
        }
    }
}

/// Merge per-mark time streams into one strictly increasing event list.
/// Bit-identical collisions across streams (probability zero under the
/// continuous built-in laws) are resolved by nudging the later event up one
/// ulp; events nudged past the horizon are dropped.
pub(crate) fn merge_streams(streams: &[(u32, &[f64])], horizon: f64) -> Vec<Event> {
    let total: usize = streams.iter().map(|(_, v)| v.len()).sum();
    let mut events = Vec::with_capacity(total);
    for &(mark_ix, times) in streams {
        for &time in times {
            events.push(Event { time, mark_ix });
        }
    }
    events.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    let mut write = 0;
    for read in 0..events.len() {
        let mut ev = events[read];
        if write > 0 && ev.time <= events[write - 1].time {
            ev.time = events[write - 1].time.next_up();
            if ev.time > horizon {
                continue;
            }
        }
        events[write] = ev;
        write += 1;
    }
    events.truncate(write);
    events
}
