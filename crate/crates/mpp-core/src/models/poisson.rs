//! Multivariate Poisson model: independent exponential-gap arrivals per mark.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{exp_arrivals, merge_streams};
use crate::compensator::Compensator;
use crate::error::{MppError, Result};
use crate::mark::{MarkSpace, SharedMarkSpace};
use crate::rng::replication_rng;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonSpec {
    /// Events per time unit, one entry per mark (map order fixes mark order).
    pub rates: BTreeMap<String, f64>,
    pub horizon: f64,
}

impl PoissonSpec {
    pub fn new(rates: impl IntoIterator<Item = (impl Into<String>, f64)>, horizon: f64) -> Self {
        PoissonSpec {
            rates: rates.into_iter().map(|(m, r)| (m.into(), r)).collect(),
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rates.is_empty() {
            return Err(MppError::InvalidSpec("poisson: no marks".into()));
        }
        for (mark, &rate) in &self.rates {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(MppError::InvalidSpec(format!(
                    "poisson: rate for `{mark}` must be positive and finite"
                )));
            }
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(MppError::InvalidSpec("poisson: invalid horizon".into()));
        }
        Ok(())
    }

    pub fn compile(&self) -> Result<CompiledPoisson> {
        self.validate()?;
        let space = Arc::new(MarkSpace::atoms(self.rates.keys().cloned())?);
        let rates: Vec<f64> = self.rates.values().copied().collect();
        Ok(CompiledPoisson {
            space,
            rates,
            horizon: self.horizon,
        })
    }
}

pub struct CompiledPoisson {
    space: SharedMarkSpace,
    rates: Vec<f64>,
    horizon: f64,
}

impl CompiledPoisson {
    pub fn mark_space(&self) -> &SharedMarkSpace {
        &self.space
    }

    pub fn simulate_with<R: Rng>(&self, rng: &mut R) -> Result<(Trajectory, Compensator)> {
        let mut per_mark: Vec<Vec<f64>> = Vec::with_capacity(self.rates.len());
        for &rate in &self.rates {
            let mut times = Vec::new();
            exp_arrivals(rate, self.horizon, rng, &mut times)?;
            per_mark.push(times);
        }
        let streams: Vec<(u32, &[f64])> = per_mark
            .iter()
            .enumerate()
            .map(|(ix, v)| (ix as u32, v.as_slice()))
            .collect();
        let events = merge_streams(&streams, self.horizon);
        let traj = Trajectory::from_events(self.space.clone(), events, self.horizon)?;
        let comp = Compensator::poisson(self.space.clone(), &self.rates, self.horizon)?;
        Ok((traj, comp))
    }
}

/// Deterministic given `(spec, seed)`: the trajectory of independent
/// per-mark arrivals merged in time order, with compensator `λ_h · t`.
pub fn simulate_poisson(spec: &PoissonSpec, seed: u64) -> Result<(Trajectory, Compensator)> {
    spec.compile()?.simulate_with(&mut replication_rng(seed, 0))
}
