//! Event trajectories and their counting measures.
//!
//! A trajectory is a finite, strictly time-increasing list of marked events on
//! `(0, horizon]` for one point process. Two event times are simultaneous iff
//! they are bit-identical floats; models that need common jumps emit identical
//! values by construction.

use std::sync::Arc;

use crate::error::{MppError, Result};
use crate::mark::{Mark, MarkSpace, SharedMarkSpace};
use crate::path::{Jump, PiecewisePath};
use crate::tolerances::EXPLOSION_GUARD;

/// Single event: a strictly positive finite time and a mark index into the
/// owning trajectory's mark space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub(crate) mark_ix: u32,
}

impl Event {
    pub fn mark_index(&self) -> usize {
        self.mark_ix as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    space: SharedMarkSpace,
    events: Vec<Event>,
    horizon: f64,
}

impl Trajectory {
    /// Build and validate a trajectory from `(time, mark)` pairs.
    pub fn new(
        space: SharedMarkSpace,
        events: impl IntoIterator<Item = (f64, Mark)>,
        horizon: f64,
    ) -> Result<Self> {
        let events = events
            .into_iter()
            .map(|(time, mark)| {
                let ix = space.require(&mark)?;
                Ok(Event {
                    time,
                    mark_ix: ix as u32,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_events(space, events, horizon)
    }

    pub(crate) fn from_events(
        space: SharedMarkSpace,
        events: Vec<Event>,
        horizon: f64,
    ) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(MppError::InvalidTrajectory(
                "horizon must be positive and finite".into(),
            ));
        }
        if events.len() >= EXPLOSION_GUARD {
            return Err(MppError::ExplosionGuard {
                limit: EXPLOSION_GUARD,
            });
        }
        for (i, ev) in events.iter().enumerate() {
            if !ev.time.is_finite() || ev.time <= 0.0 {
                return Err(MppError::InvalidTrajectory(format!(
                    "event time {} is not in (0, horizon]",
                    ev.time
                )));
            }
            if ev.time > horizon {
                return Err(MppError::InvalidTrajectory(format!(
                    "event time {} beyond horizon {horizon}",
                    ev.time
                )));
            }
            if i > 0 && ev.time <= events[i - 1].time {
                return Err(MppError::InvalidTrajectory(format!(
                    "event times must be strictly increasing (got {} after {})",
                    ev.time,
                    events[i - 1].time
                )));
            }
            if (ev.mark_ix as usize) >= space.len() {
                return Err(MppError::InvalidTrajectory(
                    "mark index out of range".into(),
                ));
            }
        }
        Ok(Trajectory {
            space,
            events,
            horizon,
        })
    }

    pub fn empty(space: SharedMarkSpace, horizon: f64) -> Result<Self> {
        Self::from_events(space, Vec::new(), horizon)
    }

    pub fn mark_space(&self) -> &SharedMarkSpace {
        &self.space
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn mark_of(&self, event: &Event) -> &Mark {
        self.space.label(event.mark_ix as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &Mark)> + '_ {
        self.events
            .iter()
            .map(move |ev| (ev.time, self.space.label(ev.mark_ix as usize)))
    }

    pub fn last_time(&self) -> Option<f64> {
        self.events.last().map(|ev| ev.time)
    }

    /// Counting-measure evaluation: the number of events on `(0, s]` whose
    /// mark lies in `marks`.
    pub fn measure_eval(&self, s: f64, marks: &[Mark]) -> Result<u64> {
        if !(0.0..=self.horizon).contains(&s) {
            return Err(MppError::TimeOutOfRange {
                time: s,
                context: format!("measure query on [0, {}]", self.horizon),
            });
        }
        let mut member = vec![false; self.space.len()];
        for m in marks {
            member[self.space.require(m)?] = true;
        }
        Ok(self
            .events
            .iter()
            .take_while(|ev| ev.time <= s)
            .filter(|ev| member[ev.mark_ix as usize])
            .count() as u64)
    }

    /// Unit-jump counting path of one mark: jumps exactly at the event times
    /// carrying `mark`, no drift, initial value 0.
    pub fn counting_path(&self, mark: &Mark) -> Result<PiecewisePath> {
        let ix = self.space.require(mark)? as u32;
        let jumps = self
            .events
            .iter()
            .filter(|ev| ev.mark_ix == ix)
            .map(|ev| Jump {
                time: ev.time,
                size: 1.0,
            })
            .collect();
        PiecewisePath::new(0.0, Vec::new(), jumps)
    }

    /// Number of events of one mark on `(0, s]` without building a path.
    pub fn count_through(&self, mark_ix: usize, s: f64) -> u64 {
        self.events
            .iter()
            .take_while(|ev| ev.time <= s)
            .filter(|ev| ev.mark_ix as usize == mark_ix)
            .count() as u64
    }

    /// Pathwise sum of numeric mark payloads on `(0, t]`, in event order.
    pub fn numeric_sum_through(&self, t: f64) -> Result<f64> {
        let mut sum = 0.0;
        for ev in self.events.iter().take_while(|ev| ev.time <= t) {
            sum += self.space.label(ev.mark_ix as usize).numeric()?;
        }
        Ok(sum)
    }

    /// Rebuild against a different (shared) mark space, preserving labels.
    pub fn with_space(&self, space: SharedMarkSpace) -> Result<Trajectory> {
        let events = self
            .events
            .iter()
            .map(|ev| {
                let label = self.space.label(ev.mark_ix as usize);
                let ix = space.require(label)?;
                Ok(Event {
                    time: ev.time,
                    mark_ix: ix as u32,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Trajectory::from_events(space, events, self.horizon)
    }
}

/// Shorthand used by tests and models.
pub fn atom_space<I, S>(labels: I) -> Result<SharedMarkSpace>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    Ok(Arc::new(MarkSpace::atoms(labels)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mark::Mark;

    fn traj() -> Trajectory {
        let space = atom_space(["a", "b"]).unwrap();
        Trajectory::new(
            space,
            [
                (0.4, Mark::atom("a")),
                (1.1, Mark::atom("b")),
                (2.0, Mark::atom("a")),
            ],
            3.0,
        )
        .unwrap()
    }

    #[test]
    fn measure_counts_events() {
        let t = traj();
        assert_eq!(t.measure_eval(1.0, &[Mark::atom("a")]).unwrap(), 1);
        assert_eq!(t.measure_eval(3.0, &[Mark::atom("a")]).unwrap(), 2);
        assert_eq!(t.measure_eval(2.5, &[]).unwrap(), 0);
    }

    #[test]
    fn measure_rejects_bad_queries() {
        let t = traj();
        assert!(matches!(
            t.measure_eval(1.0, &[Mark::atom("zz")]),
            Err(MppError::UnknownMark(_))
        ));
        assert!(matches!(
            t.measure_eval(3.5, &[Mark::atom("a")]),
            Err(MppError::TimeOutOfRange { .. })
        ));
    }

    #[test]
    fn measure_is_finitely_additive() {
        let t = traj();
        let a = t.measure_eval(2.5, &[Mark::atom("a")]).unwrap();
        let b = t.measure_eval(2.5, &[Mark::atom("b")]).unwrap();
        let both = t
            .measure_eval(2.5, &[Mark::atom("a"), Mark::atom("b")])
            .unwrap();
        assert_eq!(a + b, both);
    }

    #[test]
    fn counting_path_has_unit_jumps() {
        let t = traj();
        let n = t.counting_path(&Mark::atom("a")).unwrap();
        assert_eq!(n.jumps().len(), 2);
        assert_eq!(n.value(3.0), 2.0);
        assert_eq!(n.value(0.39), 0.0);
        let zero = t.counting_path(&Mark::atom("b")).unwrap();
        assert_eq!(zero.value(1.0), 0.0);
    }

    #[test]
    fn counting_paths_partition_total_count() {
        let t = traj();
        let total: f64 = ["a", "b"]
            .iter()
            .map(|m| t.counting_path(&Mark::atom(*m)).unwrap().value(3.0))
            .sum();
        assert_eq!(total, t.len() as f64);
    }

    #[test]
    fn rejects_equal_consecutive_times() {
        let space = atom_space(["a"]).unwrap();
        let bad = Trajectory::new(space, [(1.0, Mark::atom("a")), (1.0, Mark::atom("a"))], 2.0);
        assert!(bad.is_err());
    }

    #[test]
    fn rejects_events_beyond_horizon() {
        let space = atom_space(["a"]).unwrap();
        assert!(Trajectory::new(space, [(2.5, Mark::atom("a"))], 2.0).is_err());
    }
}
