//! Exact pathwise operations on pure-jump finite-variation paths:
//! compensated martingales, Lebesgue–Stieltjes and stochastic integrals,
//! quadratic covariation, and compensator-jump queries.
//!
//! Integrands are step functions whose value on `(t_k, t_{k+1}]` is attached
//! to the left breakpoint `t_k`. The representation makes left evaluation a
//! structural property: there is no way to build a right-evaluated integrand,
//! so predictability of step integrands needs no runtime check.

use serde::{Deserialize, Serialize};

use crate::compensator::Compensator;
use crate::error::{MppError, Result};
use crate::mark::{Mark, SharedMarkSpace};
use crate::path::{Jump, PiecewisePath, Segment};

/// Left-evaluated piecewise-constant function of time.
///
/// Breakpoints are `(time, value)` with the first time equal to 0; the value
/// on `(t_k, t_{k+1}]` is the one attached to `t_k`, and the last value
/// extends beyond the last breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    breakpoints: Vec<(f64, f64)>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(MppError::InvalidIntegrand("no breakpoints".into()));
        }
        if breakpoints[0].0 != 0.0 {
            return Err(MppError::InvalidIntegrand(
                "first breakpoint must be at time 0".into(),
            ));
        }
        for (i, &(t, v)) in breakpoints.iter().enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(MppError::InvalidIntegrand("non-finite breakpoint".into()));
            }
            if i > 0 && t <= breakpoints[i - 1].0 {
                return Err(MppError::InvalidIntegrand(
                    "breakpoint times must be strictly increasing".into(),
                ));
            }
        }
        Ok(StepFunction { breakpoints })
    }

    pub fn constant(value: f64) -> Self {
        StepFunction {
            breakpoints: vec![(0.0, value)],
        }
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    /// Value at `t > 0` under left evaluation: the value attached to the last
    /// breakpoint strictly before `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let ix = self.breakpoints.partition_point(|&(bt, _)| bt < t);
        if ix == 0 {
            self.breakpoints[0].1
        } else {
            self.breakpoints[ix - 1].1
        }
    }

    /// Value on the open interval just right of `t`: the value attached to
    /// the last breakpoint at or before `t`.
    pub fn value_right_of(&self, t: f64) -> f64 {
        let ix = self.breakpoints.partition_point(|&(bt, _)| bt <= t);
        if ix == 0 {
            self.breakpoints[0].1
        } else {
            self.breakpoints[ix - 1].1
        }
    }
}

/// One left-evaluated step function per mark of a shared mark space.
#[derive(Debug, Clone, PartialEq)]
pub struct Integrand {
    space: SharedMarkSpace,
    per_mark: Vec<StepFunction>,
}

impl Integrand {
    pub fn new(space: SharedMarkSpace, per_mark: Vec<StepFunction>) -> Result<Self> {
        if per_mark.len() != space.len() {
            return Err(MppError::InvalidIntegrand(format!(
                "{} step functions for {} marks",
                per_mark.len(),
                space.len()
            )));
        }
        Ok(Integrand { space, per_mark })
    }

    pub fn constant(space: SharedMarkSpace, value: f64) -> Self {
        let per_mark = vec![StepFunction::constant(value); space.len()];
        Integrand { space, per_mark }
    }

    pub fn mark_space(&self) -> &SharedMarkSpace {
        &self.space
    }

    pub fn per_mark(&self) -> &[StepFunction] {
        &self.per_mark
    }

    pub fn for_mark(&self, mark: &Mark) -> Result<&StepFunction> {
        Ok(&self.per_mark[self.space.require(mark)?])
    }
}

/// Compensated martingale of one mark: `M_t = N_t − ν((0, t] × {mark})`.
///
/// The drift is the negated continuous compensator part; the jump list merges
/// the counting jumps with the compensator atoms, so an atom of mass `p`
/// contributes `−p` where the counting path does not jump and `1 − p` where
/// it does.
pub fn compensated_martingale(
    counting: &PiecewisePath,
    comp: &Compensator,
    mark: &Mark,
) -> Result<PiecewisePath> {
    let mc = comp.for_mark(mark)?;
    let segments = mc.slope_segments(true);
    let atoms = mc.atoms();
    let n_jumps = counting.jumps();
    let mut jumps = Vec::with_capacity(n_jumps.len() + atoms.len());
    let (mut i, mut k) = (0usize, 0usize);
    while i < n_jumps.len() || k < atoms.len() {
        let size;
        let time;
        match (n_jumps.get(i), atoms.get(k)) {
            (Some(j), Some(&(at, mass))) => {
                if j.time == at {
                    time = at;
                    size = j.size - mass;
                    i += 1;
                    k += 1;
                } else if j.time < at {
                    time = j.time;
                    size = j.size;
                    i += 1;
                } else {
                    time = at;
                    size = -mass;
                    k += 1;
                }
            }
            (Some(j), None) => {
                time = j.time;
                size = j.size;
                i += 1;
            }
            (None, Some(&(at, mass))) => {
                time = at;
                size = -mass;
                k += 1;
            }
            (None, None) => unreachable!(),
        }
        if size != 0.0 {
            jumps.push(Jump { time, size });
        }
    }
    PiecewisePath::new(counting.initial(), segments, jumps)
}

/// Exact Lebesgue–Stieltjes integral `∫₀ᵗ W_s dA_s` of a step integrand
/// against a finite-variation path, as a path: jump part `Σ W(s)·ΔA_s`,
/// drift part with piecewise-constant slope `W·(dA/dt)`. Closed form, no
/// quadrature error.
pub fn stieltjes_integral(w: &StepFunction, a: &PiecewisePath) -> PiecewisePath {
    let jumps: Vec<Jump> = a
        .jumps()
        .iter()
        .filter_map(|j| {
            let size = w.value_at(j.time) * j.size;
            (size != 0.0).then_some(Jump { time: j.time, size })
        })
        .collect();

    let segments = if a.segments().is_empty() {
        Vec::new()
    } else {
        let mut starts: Vec<f64> = a
            .segments()
            .iter()
            .map(|s| s.start)
            .chain(w.breakpoints().iter().map(|&(t, _)| t))
            .collect();
        starts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        starts.dedup();
        starts
            .into_iter()
            .map(|start| Segment {
                start,
                slope: w.value_right_of(start) * a.slope_at(start),
            })
            .collect()
    };

    PiecewisePath::new(0.0, segments, jumps).expect("refined boundaries stay ordered")
}

/// Stochastic integral `∫ W dM` of a (structurally left-evaluated) step
/// integrand against a compensated martingale. For finite-variation
/// integrators this coincides pathwise with the Stieltjes integral, which it
/// delegates to; the separate entry point keeps the predictability
/// discipline visible at call sites.
pub fn stochastic_integral(w: &StepFunction, m: &PiecewisePath) -> PiecewisePath {
    stieltjes_integral(w, m)
}

/// Quadratic covariation of two pure-jump finite-variation paths:
/// jumps `ΔX_s·ΔY_s` at the shared (bit-identical) jump times only; the
/// drift contributes nothing.
pub fn quadratic_covariation(x: &PiecewisePath, y: &PiecewisePath) -> PiecewisePath {
    let (xj, yj) = (x.jumps(), y.jumps());
    let mut jumps = Vec::new();
    let (mut i, mut k) = (0usize, 0usize);
    while i < xj.len() && k < yj.len() {
        if xj[i].time == yj[k].time {
            let size = xj[i].size * yj[k].size;
            if size != 0.0 {
                jumps.push(Jump {
                    time: xj[i].time,
                    size,
                });
            }
            i += 1;
            k += 1;
        } else if xj[i].time < yj[k].time {
            i += 1;
        } else {
            k += 1;
        }
    }
    PiecewisePath::new(0.0, Vec::new(), jumps).expect("shared times stay ordered")
}

/// Atom mass of the compensator of `mark` at exactly `t` (Δν at a
/// predictable time); zero at all other times.
pub fn compensator_jump(comp: &Compensator, mark: &Mark, t: f64) -> Result<f64> {
    comp.jump(mark, t)
}
