//! Per-mark cumulative compensators.
//!
//! For each mark the compensator carries a continuous piecewise-linear
//! nondecreasing part (breakpoints of cumulative value, starting at `(0, 0)`)
//! plus a finite list of atoms `(time, mass)` with mass in `[0, 1]`. Across
//! marks, the atom masses at any single time must sum to at most one.

use serde::{Deserialize, Serialize};

use crate::error::{MppError, Result};
use crate::mark::{Mark, SharedMarkSpace};
use crate::path::Segment;
use crate::tolerances::ATOM_MASS_SLACK;

/// Compensator of a single mark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkCompensator {
    /// `(time, cumulative value)` of the continuous part; first entry `(0, 0)`,
    /// linear in between, flat after the last breakpoint.
    breakpoints: Vec<(f64, f64)>,
    /// Predictable atoms `(time, mass)`, strictly increasing times, mass in `[0, 1]`.
    atoms: Vec<(f64, f64)>,
}

impl MarkCompensator {
    pub fn new(mut breakpoints: Vec<(f64, f64)>, atoms: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.is_empty() {
            breakpoints.push((0.0, 0.0));
        }
        if breakpoints[0] != (0.0, 0.0) {
            return Err(MppError::InvalidCompensator(
                "continuous part must start at (0, 0)".into(),
            ));
        }
        for (i, &(t, v)) in breakpoints.iter().enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(MppError::InvalidCompensator("non-finite breakpoint".into()));
            }
            if i > 0 {
                let (pt, pv) = breakpoints[i - 1];
                if t <= pt {
                    return Err(MppError::InvalidCompensator(
                        "breakpoint times must be strictly increasing".into(),
                    ));
                }
                if v < pv {
                    return Err(MppError::InvalidCompensator(
                        "continuous part must be nondecreasing".into(),
                    ));
                }
            }
        }
        for (i, &(t, m)) in atoms.iter().enumerate() {
            if !t.is_finite() || t <= 0.0 {
                return Err(MppError::InvalidCompensator(
                    "atom times must be positive and finite".into(),
                ));
            }
            if !(0.0..=1.0).contains(&m) {
                return Err(MppError::InvalidCompensator(format!(
                    "atom mass {m} outside [0, 1]"
                )));
            }
            if i > 0 && t <= atoms[i - 1].0 {
                return Err(MppError::InvalidCompensator(
                    "atom times must be strictly increasing".into(),
                ));
            }
        }
        Ok(MarkCompensator { breakpoints, atoms })
    }

    pub fn zero() -> Self {
        MarkCompensator {
            breakpoints: vec![(0.0, 0.0)],
            atoms: Vec::new(),
        }
    }

    /// Constant-rate compensator `rate ⋅ t` on `[0, horizon]`.
    pub fn linear(rate: f64, horizon: f64) -> Result<Self> {
        Self::new(vec![(0.0, 0.0), (horizon, rate * horizon)], Vec::new())
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Continuous part at `s`, linear interpolation between breakpoints and
    /// flat after the last one.
    pub fn continuous_at(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let bps = &self.breakpoints;
        match bps.binary_search_by(|&(t, _)| t.partial_cmp(&s).unwrap()) {
            Ok(ix) => bps[ix].1,
            Err(ix) => {
                if ix >= bps.len() {
                    bps[bps.len() - 1].1
                } else {
                    let (t0, v0) = bps[ix - 1];
                    let (t1, v1) = bps[ix];
                    v0 + (s - t0) * (v1 - v0) / (t1 - t0)
                }
            }
        }
    }

    /// Cumulative value on `(0, s]`: continuous part plus the atom masses with
    /// atom time ≤ s (atom inclusion is left-closed at the atom time).
    pub fn eval(&self, s: f64) -> f64 {
        let atom_sum: f64 = self
            .atoms
            .iter()
            .take_while(|&&(t, _)| t <= s)
            .map(|&(_, m)| m)
            .sum();
        self.continuous_at(s) + atom_sum
    }

    /// Atom mass at exactly `t` (bit-identical time), 0 if none.
    pub fn atom_mass_at(&self, t: f64) -> f64 {
        match self
            .atoms
            .binary_search_by(|&(at, _)| at.partial_cmp(&t).unwrap())
        {
            Ok(ix) => self.atoms[ix].1,
            Err(_) => 0.0,
        }
    }

    /// Drift segments of the continuous part (slope per breakpoint interval,
    /// flat after the last breakpoint), optionally negated.
    pub fn slope_segments(&self, negate: bool) -> Vec<Segment> {
        let sign = if negate { -1.0 } else { 1.0 };
        let bps = &self.breakpoints;
        let mut segments = Vec::with_capacity(bps.len());
        for i in 0..bps.len() - 1 {
            let (t0, v0) = bps[i];
            let (t1, v1) = bps[i + 1];
            segments.push(Segment {
                start: t0,
                slope: sign * (v1 - v0) / (t1 - t0),
            });
        }
        let last = bps[bps.len() - 1].0;
        if segments.is_empty() || last > segments[segments.len() - 1].start {
            segments.push(Segment {
                start: last,
                slope: 0.0,
            });
        }
        segments
    }
}

/// Compensator of a whole mark space: one [`MarkCompensator`] per label, with
/// the cross-mark constraint that atom masses at any single time sum to ≤ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Compensator {
    space: SharedMarkSpace,
    per_mark: Vec<MarkCompensator>,
    horizon: f64,
}

impl Compensator {
    pub fn new(
        space: SharedMarkSpace,
        per_mark: Vec<MarkCompensator>,
        horizon: f64,
    ) -> Result<Self> {
        if per_mark.len() != space.len() {
            return Err(MppError::InvalidCompensator(format!(
                "{} mark compensators for {} labels",
                per_mark.len(),
                space.len()
            )));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(MppError::InvalidCompensator("invalid horizon".into()));
        }
        // cross-mark mass constraint: group atoms by bit-identical time
        let mut atom_times: Vec<(f64, f64)> = per_mark
            .iter()
            .flat_map(|mc| mc.atoms.iter().copied())
            .collect();
        atom_times.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut i = 0;
        while i < atom_times.len() {
            let t = atom_times[i].0;
            if t > horizon {
                return Err(MppError::InvalidCompensator(format!(
                    "atom at {t} beyond horizon {horizon}"
                )));
            }
            let mut total = 0.0;
            while i < atom_times.len() && atom_times[i].0 == t {
                total += atom_times[i].1;
                i += 1;
            }
            if total > 1.0 + ATOM_MASS_SLACK {
                return Err(MppError::InvalidCompensator(format!(
                    "atom masses at time {t} sum to {total} > 1"
                )));
            }
        }
        Ok(Compensator {
            space,
            per_mark,
            horizon,
        })
    }

    /// Continuous Poisson-style compensator with one constant rate per mark.
    pub fn poisson(space: SharedMarkSpace, rates: &[f64], horizon: f64) -> Result<Self> {
        if rates.len() != space.len() {
            return Err(MppError::InvalidCompensator(
                "one rate per mark required".into(),
            ));
        }
        let per_mark = rates
            .iter()
            .map(|&r| MarkCompensator::linear(r, horizon))
            .collect::<Result<Vec<_>>>()?;
        Self::new(space, per_mark, horizon)
    }

    pub fn mark_space(&self) -> &SharedMarkSpace {
        &self.space
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn per_mark(&self) -> &[MarkCompensator] {
        &self.per_mark
    }

    pub fn for_mark(&self, mark: &Mark) -> Result<&MarkCompensator> {
        Ok(&self.per_mark[self.space.require(mark)?])
    }

    pub fn for_index(&self, ix: usize) -> &MarkCompensator {
        &self.per_mark[ix]
    }

    /// ν((0, s] × {mark}) — nondecreasing and right-continuous in `s`.
    pub fn eval(&self, s: f64, mark: &Mark) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&s) {
            return Err(MppError::TimeOutOfRange {
                time: s,
                context: format!("compensator query on [0, {}]", self.horizon),
            });
        }
        Ok(self.for_mark(mark)?.eval(s))
    }

    /// Atom mass Δν({t} × {mark}) at exactly `t`.
    pub fn jump(&self, mark: &Mark, t: f64) -> Result<f64> {
        Ok(self.for_mark(mark)?.atom_mass_at(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::atom_space;

    #[test]
    fn poisson_compensator_is_linear() {
        let space = atom_space(["a"]).unwrap();
        let comp = Compensator::poisson(space, &[2.0], 2.0).unwrap();
        assert_eq!(comp.eval(1.5, &Mark::atom("a")).unwrap(), 3.0);
        assert_eq!(comp.eval(0.0, &Mark::atom("a")).unwrap(), 0.0);
    }

    #[test]
    fn atom_inclusion_is_left_closed() {
        let space = atom_space(["a"]).unwrap();
        let mc = MarkCompensator::new(vec![(0.0, 0.0)], vec![(1.0, 0.3)]).unwrap();
        let comp = Compensator::new(space, vec![mc], 2.0).unwrap();
        assert_eq!(comp.eval(1.0, &Mark::atom("a")).unwrap(), 0.3);
        assert_eq!(comp.eval(0.99, &Mark::atom("a")).unwrap(), 0.0);
        assert_eq!(comp.jump(&Mark::atom("a"), 1.0).unwrap(), 0.3);
        assert_eq!(comp.jump(&Mark::atom("a"), 1.0_f64.next_up()).unwrap(), 0.0);
    }

    #[test]
    fn unknown_mark_is_domain_error() {
        let space = atom_space(["a"]).unwrap();
        let comp = Compensator::poisson(space, &[1.0], 1.0).unwrap();
        assert!(matches!(
            comp.eval(0.5, &Mark::atom("zz")),
            Err(MppError::UnknownMark(_))
        ));
    }

    #[test]
    fn cross_mark_atom_mass_is_bounded() {
        let space = atom_space(["a", "b"]).unwrap();
        let a = MarkCompensator::new(vec![(0.0, 0.0)], vec![(1.0, 0.7)]).unwrap();
        let b = MarkCompensator::new(vec![(0.0, 0.0)], vec![(1.0, 0.4)]).unwrap();
        assert!(Compensator::new(space, vec![a, b], 2.0).is_err());
    }

    #[test]
    fn eval_is_monotone_and_right_continuous() {
        use crate::tolerances::RIGHT_CONTINUITY_STEP;
        let space = atom_space(["a"]).unwrap();
        let mc = MarkCompensator::new(vec![(0.0, 0.0), (1.0, 0.5), (2.0, 0.5)], vec![(1.5, 0.25)])
            .unwrap();
        let comp = Compensator::new(space, vec![mc], 2.0).unwrap();
        let m = Mark::atom("a");
        let mut prev = 0.0;
        let mut s = 0.0;
        while s <= 2.0 {
            let v = comp.eval(s, &m).unwrap();
            assert!(v >= prev);
            prev = v;
            s += 0.01;
        }
        // right-continuity at the breakpoint and at the atom
        for t in [1.0, 1.5] {
            let v = comp.eval(t, &m).unwrap();
            let v_right = comp.eval(t + RIGHT_CONTINUITY_STEP, &m).unwrap();
            assert!((v_right - v).abs() <= 1.0 * RIGHT_CONTINUITY_STEP + 1e-15);
        }
        // the atom is visible from the left
        let before = comp.eval(1.5 - 1e-9, &m).unwrap();
        assert!((comp.eval(1.5, &m).unwrap() - before - 0.25).abs() < 1e-8);
    }

    #[test]
    fn slope_segments_cover_flat_tail() {
        let mc = MarkCompensator::new(vec![(0.0, 0.0), (2.0, 4.0)], vec![]).unwrap();
        let segs = mc.slope_segments(true);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].slope, -2.0);
        assert_eq!(
            segs[1],
            Segment {
                start: 2.0,
                slope: 0.0
            }
        );
    }
}
