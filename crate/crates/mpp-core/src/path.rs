//! Right-continuous pure-jump finite-variation scalar paths.
//!
//! A path is an initial value, a piecewise-constant drift (segment starts with
//! slopes), and a strictly time-ordered jump list. Evaluation is
//! right-continuous with left limits; the recorded jump sizes are the exact
//! bookkeeping used by integrals and brackets, so simultaneity stays a
//! bit-identical-time notion throughout.

use serde::{Deserialize, Serialize};

use crate::error::{MppError, Result};

/// Compensated (Kahan) accumulator for long drift sums.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Drift segment: `slope` applies from `start` until the next segment start
/// (or indefinitely for the last segment).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub slope: f64,
}

/// Single jump of the path at `time` (strictly positive), of exact `size`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePath {
    initial: f64,
    segments: Vec<Segment>,
    jumps: Vec<Jump>,
}

impl PiecewisePath {
    pub fn new(initial: f64, segments: Vec<Segment>, jumps: Vec<Jump>) -> Result<Self> {
        if !initial.is_finite() {
            return Err(MppError::InvalidPath("non-finite initial value".into()));
        }
        for (i, seg) in segments.iter().enumerate() {
            if !seg.start.is_finite() || !seg.slope.is_finite() {
                return Err(MppError::InvalidPath("non-finite segment".into()));
            }
            if i == 0 && seg.start != 0.0 {
                return Err(MppError::InvalidPath(
                    "first segment must start at time 0".into(),
                ));
            }
            if i > 0 && seg.start <= segments[i - 1].start {
                return Err(MppError::InvalidPath(
                    "segment starts must be strictly increasing".into(),
                ));
            }
        }
        for (i, j) in jumps.iter().enumerate() {
            if !j.time.is_finite() || !j.size.is_finite() {
                return Err(MppError::InvalidPath("non-finite jump".into()));
            }
            if j.time <= 0.0 {
                return Err(MppError::InvalidPath("jump times must be positive".into()));
            }
            if i > 0 && j.time <= jumps[i - 1].time {
                return Err(MppError::InvalidPath(
                    "jump times must be strictly increasing".into(),
                ));
            }
        }
        Ok(PiecewisePath {
            initial,
            segments,
            jumps,
        })
    }

    pub fn zero() -> Self {
        PiecewisePath {
            initial: 0.0,
            segments: Vec::new(),
            jumps: Vec::new(),
        }
    }

    pub fn constant(c: f64) -> Self {
        PiecewisePath {
            initial: c,
            segments: Vec::new(),
            jumps: Vec::new(),
        }
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// Accumulated drift on `(0, t]`.
    fn drift_to(&self, t: f64) -> f64 {
        if t <= 0.0 || self.segments.is_empty() {
            return 0.0;
        }
        let mut acc = KahanSum::default();
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.start >= t {
                break;
            }
            let end = match self.segments.get(i + 1) {
                Some(next) => next.start.min(t),
                None => t,
            };
            if end > seg.start {
                acc.add(seg.slope * (end - seg.start));
            }
        }
        acc.value()
    }

    fn jump_sum(&self, t: f64, include_t: bool) -> f64 {
        let mut acc = KahanSum::default();
        for j in &self.jumps {
            if j.time > t || (!include_t && j.time == t) {
                break;
            }
            acc.add(j.size);
        }
        acc.value()
    }

    /// Right-continuous evaluation: post-jump value at a jump time.
    pub fn value(&self, t: f64) -> f64 {
        self.initial + self.drift_to(t) + self.jump_sum(t, true)
    }

    /// Left limit: pre-jump value at a jump time.
    pub fn left_limit(&self, t: f64) -> f64 {
        self.initial + self.drift_to(t) + self.jump_sum(t, false)
    }

    /// Exact recorded jump size at `t` (0 if no jump there). Times are
    /// compared bit-identically.
    pub fn jump_at(&self, t: f64) -> f64 {
        match self
            .jumps
            .binary_search_by(|j| j.time.partial_cmp(&t).unwrap())
        {
            Ok(ix) => self.jumps[ix].size,
            Err(_) => 0.0,
        }
    }

    /// Drift slope in force at time `t` (the segment containing `t`).
    pub fn slope_at(&self, t: f64) -> f64 {
        let mut slope = 0.0;
        for seg in &self.segments {
            if seg.start > t {
                break;
            }
            slope = seg.slope;
        }
        slope
    }

    /// True when the path is the constant zero: zero initial value, no
    /// nonzero slope, no nonzero jump.
    pub fn is_identically_zero(&self) -> bool {
        self.initial == 0.0
            && self.segments.iter().all(|s| s.slope == 0.0)
            && self.jumps.iter().all(|j| j.size == 0.0)
    }

    /// Largest absolute jump size, with the time it occurs at.
    pub fn max_abs_jump(&self) -> Option<(f64, f64)> {
        self.jumps
            .iter()
            .map(|j| (j.time, j.size))
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
    }

    pub fn scale(&self, c: f64) -> PiecewisePath {
        PiecewisePath {
            initial: c * self.initial,
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    start: s.start,
                    slope: c * s.slope,
                })
                .collect(),
            jumps: self
                .jumps
                .iter()
                .map(|j| Jump {
                    time: j.time,
                    size: c * j.size,
                })
                .collect(),
        }
    }

    /// Pathwise sum. Segment boundaries are refined to the union of both
    /// segment grids; jumps at bit-identical times are added.
    pub fn add(&self, other: &PiecewisePath) -> PiecewisePath {
        let mut starts: Vec<f64> = self
            .segments
            .iter()
            .chain(other.segments.iter())
            .map(|s| s.start)
            .collect();
        starts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        starts.dedup();
        let segments = starts
            .into_iter()
            .map(|start| Segment {
                start,
                slope: self.slope_at(start) + other.slope_at(start),
            })
            .collect();

        let mut jumps = Vec::with_capacity(self.jumps.len() + other.jumps.len());
        let (mut i, mut k) = (0, 0);
        while i < self.jumps.len() || k < other.jumps.len() {
            let pick_left = match (self.jumps.get(i), other.jumps.get(k)) {
                (Some(a), Some(b)) => {
                    if a.time == b.time {
                        let size = a.size + b.size;
                        if size != 0.0 {
                            jumps.push(Jump { time: a.time, size });
                        }
                        i += 1;
                        k += 1;
                        continue;
                    }
                    a.time < b.time
                }
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => unreachable!(),
            };
            if pick_left {
                jumps.push(self.jumps[i]);
                i += 1;
            } else {
                jumps.push(other.jumps[k]);
                k += 1;
            }
        }
        PiecewisePath {
            initial: self.initial + other.initial,
            segments,
            jumps,
        }
    }

    /// Total variation on `(0, t]`: |drift| plus |jumps|.
    pub fn total_variation(&self, t: f64) -> f64 {
        let mut acc = KahanSum::default();
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.start >= t {
                break;
            }
            let end = match self.segments.get(i + 1) {
                Some(next) => next.start.min(t),
                None => t,
            };
            if end > seg.start {
                acc.add(seg.slope.abs() * (end - seg.start));
            }
        }
        for j in &self.jumps {
            if j.time > t {
                break;
            }
            acc.add(j.size.abs());
        }
        acc.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path() -> PiecewisePath {
        // dyadic numbers so the jump decomposition is float-exact
        PiecewisePath::new(
            0.5,
            vec![
                Segment {
                    start: 0.0,
                    slope: 0.25,
                },
                Segment {
                    start: 2.0,
                    slope: -0.5,
                },
            ],
            vec![
                Jump {
                    time: 1.0,
                    size: 1.0,
                },
                Jump {
                    time: 2.5,
                    size: -0.75,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn evaluation_is_right_continuous() {
        let p = path();
        // value(1.0) includes the jump, left limit does not
        assert_eq!(p.left_limit(1.0), 0.5 + 0.25);
        assert_eq!(p.value(1.0), 0.5 + 0.25 + 1.0);
    }

    #[test]
    fn jump_decomposition_is_exact() {
        let p = path();
        for t in [1.0, 2.5] {
            assert_eq!(p.value(t) - p.left_limit(t), p.jump_at(t));
        }
        assert_eq!(p.jump_at(1.5), 0.0);
    }

    #[test]
    fn rejects_unordered_jumps() {
        let bad = PiecewisePath::new(
            0.0,
            vec![],
            vec![
                Jump {
                    time: 1.0,
                    size: 1.0,
                },
                Jump {
                    time: 1.0,
                    size: 1.0,
                },
            ],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn add_merges_shared_jump_times() {
        let p = path();
        let q = p.scale(-1.0);
        let sum = p.add(&q);
        assert!(sum.is_identically_zero());
        assert_eq!(sum.value(3.0), 0.0);
    }

    #[test]
    fn total_variation_counts_drift_and_jumps() {
        let p = path();
        // |0.25|*2 + |−0.5|*1 + |1| + |−0.75| on (0, 3]
        assert!((p.total_variation(3.0) - (0.5 + 0.5 + 1.0 + 0.75)).abs() < 1e-15);
    }
}
