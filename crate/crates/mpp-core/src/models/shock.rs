//! Common-shock model: independent idiosyncratic streams per component plus
//! one shock stream inserted into two designated components at bit-identical
//! times, so the merged process genuinely carries simultaneous marks.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{exp_arrivals, merge_streams};
use crate::compensator::{Compensator, MarkCompensator};
use crate::error::{MppError, Result};
use crate::mark::{Mark, MarkSpace, SharedMarkSpace};
use crate::merge::{merge_with_spaces, MergedTrajectory};
use crate::rng::replication_rng;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockComponent {
    /// Idiosyncratic rate per mark; zero-rate marks are allowed and simply
    /// never fire on their own.
    pub rates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonShockSpec {
    pub components: Vec<ShockComponent>,
    /// Rate of the shared shock stream (zero disables it).
    pub shock_rate: f64,
    /// The two component indices (0-based) receiving every shock event.
    pub shock_targets: (usize, usize),
    /// The mark each target carries at shock times; may coincide with an
    /// idiosyncratic mark, in which case the rates add.
    pub shock_marks: (String, String),
    pub horizon: f64,
}

impl CommonShockSpec {
    /// Two-component model with one idiosyncratic mark each plus a shock
    /// carried on those same marks.
    pub fn two_component(
        mark_a: impl Into<String>,
        rate_a: f64,
        mark_b: impl Into<String>,
        rate_b: f64,
        shock_rate: f64,
        horizon: f64,
    ) -> Self {
        let mark_a = mark_a.into();
        let mark_b = mark_b.into();
        CommonShockSpec {
            components: vec![
                ShockComponent {
                    rates: [(mark_a.clone(), rate_a)].into_iter().collect(),
                },
                ShockComponent {
                    rates: [(mark_b.clone(), rate_b)].into_iter().collect(),
                },
            ],
            shock_rate,
            shock_targets: (0, 1),
            shock_marks: (mark_a, mark_b),
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.compile().map(|_| ())
    }

    pub fn compile(&self) -> Result<CompiledShock> {
        if self.components.len() < 2 {
            return Err(MppError::InvalidSpec(
                "common-shock: at least two components required".into(),
            ));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(MppError::InvalidSpec(
                "common-shock: invalid horizon".into(),
            ));
        }
        if !(self.shock_rate.is_finite() && self.shock_rate >= 0.0) {
            return Err(MppError::InvalidSpec(
                "common-shock: shock rate must be nonnegative and finite".into(),
            ));
        }
        let (ta, tb) = self.shock_targets;
        if ta == tb || ta >= self.components.len() || tb >= self.components.len() {
            return Err(MppError::InvalidSpec(
                "common-shock: shock targets must be two distinct component indices".into(),
            ));
        }
        for comp in &self.components {
            for (mark, &rate) in &comp.rates {
                if !(rate.is_finite() && rate >= 0.0) {
                    return Err(MppError::InvalidSpec(format!(
                        "common-shock: rate of `{mark}` must be nonnegative and finite"
                    )));
                }
            }
        }

        let mut spaces = Vec::with_capacity(self.components.len());
        let mut comp_marks: Vec<Vec<(String, f64)>> = Vec::with_capacity(self.components.len());
        for (i, comp) in self.components.iter().enumerate() {
            let mut marks: Vec<(String, f64)> =
                comp.rates.iter().map(|(m, &r)| (m.clone(), r)).collect();
            let shock_mark = if i == ta {
                Some(&self.shock_marks.0)
            } else if i == tb {
                Some(&self.shock_marks.1)
            } else {
                None
            };
            if let Some(sm) = shock_mark {
                if !marks.iter().any(|(m, _)| m == sm) {
                    marks.push((sm.clone(), 0.0));
                }
            }
            if marks.is_empty() {
                return Err(MppError::InvalidSpec(format!(
                    "common-shock: component {i} has no marks"
                )));
            }
            let space = Arc::new(MarkSpace::atoms(marks.iter().map(|(m, _)| m.clone()))?);
            spaces.push(space);
            comp_marks.push(marks);
        }

        let merged_space = {
            let refs: Vec<&MarkSpace> = spaces.iter().map(|s| s.as_ref()).collect();
            Arc::new(MarkSpace::product(&refs)?)
        };
        let shock_mark_ix = (
            spaces[ta].require(&Mark::atom(self.shock_marks.0.clone()))?,
            spaces[tb].require(&Mark::atom(self.shock_marks.1.clone()))?,
        );

        Ok(CompiledShock {
            spaces,
            comp_marks,
            merged_space,
            shock_rate: self.shock_rate,
            shock_targets: (ta, tb),
            shock_mark_ix,
            horizon: self.horizon,
        })
    }
}

pub struct CompiledShock {
    spaces: Vec<SharedMarkSpace>,
    /// Per component: `(mark label, idiosyncratic rate)` in mark-space order.
    comp_marks: Vec<Vec<(String, f64)>>,
    merged_space: SharedMarkSpace,
    shock_rate: f64,
    shock_targets: (usize, usize),
    shock_mark_ix: (usize, usize),
    horizon: f64,
}

impl CompiledShock {
    pub fn component_count(&self) -> usize {
        self.spaces.len()
    }

    pub fn component_space(&self, i: usize) -> &SharedMarkSpace {
        &self.spaces[i]
    }

    pub fn merged_space(&self) -> &SharedMarkSpace {
        &self.merged_space
    }

    /// Compensator of one component: slope = idiosyncratic rate, plus the
    /// shock rate on the designated mark of the two target components.
    fn component_compensator(&self, i: usize) -> Result<Compensator> {
        let rates: Vec<f64> = self.comp_marks[i]
            .iter()
            .enumerate()
            .map(|(ix, (_, idio))| {
                let mut rate = *idio;
                if (i == self.shock_targets.0 && ix == self.shock_mark_ix.0)
                    || (i == self.shock_targets.1 && ix == self.shock_mark_ix.1)
                {
                    rate += self.shock_rate;
                }
                rate
            })
            .collect();
        let per_mark = rates
            .iter()
            .map(|&r| MarkCompensator::linear(r, self.horizon))
            .collect::<Result<Vec<_>>>()?;
        Compensator::new(self.spaces[i].clone(), per_mark, self.horizon)
    }

    /// Model-supplied compensator of the merged process: idiosyncratic rates
    /// on the singleton product marks, the shock rate on the simultaneous
    /// pair mark, zero elsewhere.
    pub fn merged_compensator(&self) -> Result<Compensator> {
        let mut per_mark = vec![MarkCompensator::zero(); self.merged_space.len()];
        for (i, marks) in self.comp_marks.iter().enumerate() {
            for (label, idio) in marks {
                if *idio > 0.0 {
                    let embedded = self.merged_space.embed(i, &Mark::atom(label.clone()))?;
                    let ix = self.merged_space.require(&embedded)?;
                    per_mark[ix] = MarkCompensator::linear(*idio, self.horizon)?;
                }
            }
        }
        if self.shock_rate > 0.0 {
            let mut slots = vec![crate::mark::ZERO_SYMBOL.to_string(); self.spaces.len()];
            slots[self.shock_targets.0] = self.comp_marks[self.shock_targets.0]
                [self.shock_mark_ix.0]
                .0
                .clone();
            slots[self.shock_targets.1] = self.comp_marks[self.shock_targets.1]
                [self.shock_mark_ix.1]
                .0
                .clone();
            let pair = Mark::Tuple(slots);
            let ix = self.merged_space.require(&pair)?;
            per_mark[ix] = MarkCompensator::linear(self.shock_rate, self.horizon)?;
        }
        Compensator::new(self.merged_space.clone(), per_mark, self.horizon)
    }

    pub fn simulate_with<R: Rng>(&self, rng: &mut R) -> Result<Vec<(Trajectory, Compensator)>> {
        // idiosyncratic streams in (component, mark) order, then the shock
        let mut idio: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.comp_marks.len());
        for marks in &self.comp_marks {
            let mut streams = Vec::with_capacity(marks.len());
            for (_, rate) in marks {
                let mut times = Vec::new();
                exp_arrivals(*rate, self.horizon, rng, &mut times)?;
                streams.push(times);
            }
            idio.push(streams);
        }
        let mut shock_times = Vec::new();
        exp_arrivals(self.shock_rate, self.horizon, rng, &mut shock_times)?;

        let mut out = Vec::with_capacity(self.comp_marks.len());
        for (i, streams) in idio.iter().enumerate() {
            let mut refs: Vec<(u32, &[f64])> = streams
                .iter()
                .enumerate()
                .map(|(ix, v)| (ix as u32, v.as_slice()))
                .collect();
            if i == self.shock_targets.0 {
                refs.push((self.shock_mark_ix.0 as u32, shock_times.as_slice()));
            } else if i == self.shock_targets.1 {
                refs.push((self.shock_mark_ix.1 as u32, shock_times.as_slice()));
            }
            let events = merge_streams(&refs, self.horizon);
            let traj = Trajectory::from_events(self.spaces[i].clone(), events, self.horizon)?;
            out.push((traj, self.component_compensator(i)?));
        }
        Ok(out)
    }

    /// Merged single-process view of one replication, paired with the
    /// model-supplied merged compensator.
    pub fn realize_with<R: Rng>(&self, rng: &mut R) -> Result<(Trajectory, Compensator)> {
        let comps = self.simulate_with(rng)?;
        let trajs: Vec<Trajectory> = comps.into_iter().map(|(t, _)| t).collect();
        let merged = merge_with_spaces(&trajs, self.merged_space.clone())?;
        Ok((merged.into_trajectory(), self.merged_compensator()?))
    }

    pub fn merged_trajectory_with<R: Rng>(&self, rng: &mut R) -> Result<MergedTrajectory> {
        let comps = self.simulate_with(rng)?;
        let trajs: Vec<Trajectory> = comps.into_iter().map(|(t, _)| t).collect();
        merge_with_spaces(&trajs, self.merged_space.clone())
    }
}

/// Deterministic given `(spec, seed)`: one trajectory/compensator pair per
/// component; shock arrivals appear in both target components with
/// bit-identical times.
pub fn simulate_common_shock(
    spec: &CommonShockSpec,
    seed: u64,
) -> Result<Vec<(Trajectory, Compensator)>> {
    spec.compile()?.simulate_with(&mut replication_rng(seed, 0))
}
