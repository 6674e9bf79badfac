//! Merging a vector of trajectories into one process over the
//! product-with-zero mark space, and recovering the components.
//!
//! The merged event times are the sorted union of the component event times
//! (bit-identical floats count as one time). At each merged time the tuple
//! mark carries each component's mark in its slot, or the zero symbol if that
//! component does not jump. The all-zero tuple never occurs.

use crate::compensator::{Compensator, MarkCompensator};
use crate::error::{MppError, Result};
use crate::mark::{Mark, MarkSpace, SharedMarkSpace, ZERO_SYMBOL};
use crate::trajectory::{Event, Trajectory};

/// A trajectory over a product-with-zero mark space, remembering the
/// component spaces it was built from.
#[derive(Debug, Clone)]
pub struct MergedTrajectory {
    trajectory: Trajectory,
    component_spaces: Vec<SharedMarkSpace>,
}

/// Arithmetic index into a canonical product space: slot options are numbered
/// 0 (zero symbol), 1.. (component labels), and the product labels enumerate
/// all combinations except all-zero in odometer order (last slot fastest).
struct ProductIndexer {
    strides: Vec<usize>,
}

impl ProductIndexer {
    fn new(component_sizes: &[usize]) -> ProductIndexer {
        let d = component_sizes.len();
        let mut strides = vec![1usize; d];
        for i in (0..d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * (component_sizes[i + 1] + 1);
        }
        ProductIndexer { strides }
    }

    fn label_index(&self, options: &[usize]) -> usize {
        let flat: usize = options
            .iter()
            .zip(&self.strides)
            .map(|(&o, &s)| o * s)
            .sum();
        flat - 1 // all-zero (flat 0) is excluded from the label list
    }
}

/// Merge components into the given canonical product space (as produced by
/// [`MarkSpace::product`] over the component spaces, in order).
pub fn merge_with_spaces(
    trajs: &[Trajectory],
    product: SharedMarkSpace,
) -> Result<MergedTrajectory> {
    if trajs.is_empty() {
        return Err(MppError::Merge("no components to merge".into()));
    }
    let horizon = trajs[0].horizon();
    for t in trajs {
        if t.horizon() != horizon {
            return Err(MppError::Merge(format!(
                "mismatched horizons: {} vs {horizon}",
                t.horizon()
            )));
        }
    }
    let sizes: Vec<usize> = trajs.iter().map(|t| t.mark_space().len()).collect();
    let expected: usize = sizes.iter().map(|n| n + 1).product::<usize>() - 1;
    if product.len() != expected || product.arity() != Some(trajs.len()) {
        return Err(MppError::Merge(
            "product space does not match the component spaces".into(),
        ));
    }
    let indexer = ProductIndexer::new(&sizes);

    let total: usize = trajs.iter().map(|t| t.len()).sum();
    let mut events = Vec::with_capacity(total);
    let mut heads = vec![0usize; trajs.len()];
    let mut options = vec![0usize; trajs.len()];
    loop {
        let mut t_min = f64::INFINITY;
        for (i, traj) in trajs.iter().enumerate() {
            if let Some(ev) = traj.events().get(heads[i]) {
                if ev.time < t_min {
                    t_min = ev.time;
                }
            }
        }
        if !t_min.is_finite() {
            break;
        }
        for opt in options.iter_mut() {
            *opt = 0;
        }
        for (i, traj) in trajs.iter().enumerate() {
            if let Some(ev) = traj.events().get(heads[i]) {
                if ev.time == t_min {
                    options[i] = ev.mark_index() + 1;
                    heads[i] += 1;
                }
            }
        }
        events.push(Event {
            time: t_min,
            mark_ix: indexer.label_index(&options) as u32,
        });
    }

    let trajectory = Trajectory::from_events(product, events, horizon)?;
    Ok(MergedTrajectory {
        trajectory,
        component_spaces: trajs.iter().map(|t| t.mark_space().clone()).collect(),
    })
}

/// Merge a vector of component trajectories, building the product-with-zero
/// mark space from the component spaces.
pub fn merge(trajs: &[Trajectory]) -> Result<MergedTrajectory> {
    if trajs.is_empty() {
        return Err(MppError::Merge("no components to merge".into()));
    }
    let refs: Vec<&MarkSpace> = trajs.iter().map(|t| t.mark_space().as_ref()).collect();
    let product = std::sync::Arc::new(MarkSpace::product(&refs)?);
    merge_with_spaces(trajs, product)
}

impl MergedTrajectory {
    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn into_trajectory(self) -> Trajectory {
        self.trajectory
    }

    pub fn component_count(&self) -> usize {
        self.component_spaces.len()
    }

    pub fn component_space(&self, i: usize) -> &SharedMarkSpace {
        &self.component_spaces[i]
    }

    pub fn horizon(&self) -> f64 {
        self.trajectory.horizon()
    }

    /// Recover component `i`: the merged events with a nonzero `i`-th slot,
    /// carrying that slot's mark.
    pub fn project(&self, i: usize) -> Result<Trajectory> {
        let space = self
            .component_spaces
            .get(i)
            .ok_or_else(|| MppError::Merge(format!("component {i} out of range")))?
            .clone();
        let events = self
            .trajectory
            .iter()
            .filter_map(|(time, mark)| {
                mark.slot(i).and_then(|slot| {
                    if slot == ZERO_SYMBOL {
                        None
                    } else {
                        Some((time, Mark::atom(slot)))
                    }
                })
            })
            .collect::<Vec<_>>();
        Trajectory::new(space, events, self.trajectory.horizon())
    }

    /// Product labels whose slot `i` lies in `marks` (a cylinder set). The
    /// zero symbol is not a component mark and is rejected.
    pub fn cylinder_labels(&self, i: usize, marks: &[Mark]) -> Result<Vec<Mark>> {
        let space = self
            .component_spaces
            .get(i)
            .ok_or_else(|| MppError::Merge(format!("component {i} out of range")))?;
        let mut names = Vec::with_capacity(marks.len());
        for m in marks {
            match m {
                Mark::Atom(s) if s == ZERO_SYMBOL => return Err(MppError::ZeroSymbolForbidden),
                Mark::Atom(s) => {
                    space.require(m)?;
                    names.push(s.as_str());
                }
                Mark::Tuple(_) => {
                    return Err(MppError::Merge(
                        "cylinder base must consist of component marks".into(),
                    ))
                }
            }
        }
        Ok(self
            .trajectory
            .mark_space()
            .labels()
            .iter()
            .filter(|label| label.slot(i).is_some_and(|s| names.contains(&s)))
            .cloned()
            .collect())
    }

    /// Component measure recovered through the merged one:
    /// μⁱ((0,s]×B) as the merged measure of the cylinder over B in slot `i`.
    pub fn component_measure(&self, i: usize, s: f64, marks: &[Mark]) -> Result<u64> {
        let cyl = self.cylinder_labels(i, marks)?;
        self.trajectory.measure_eval(s, &cyl)
    }
}

/// Result of the merged-vs-component pathwise comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemimartingaleReport {
    pub pass: bool,
    pub max_abs_diff: f64,
    pub points_checked: usize,
}

/// For numeric marks, compare the merged coordinate sums against the
/// component sums at each grid time. The zero symbol contributes the
/// additive-neutral element, so equality is exact.
pub fn merged_semimartingale_check(
    merged: &MergedTrajectory,
    components: &[Trajectory],
    grid: &[f64],
) -> Result<SemimartingaleReport> {
    if components.len() != merged.component_count() {
        return Err(MppError::Merge(format!(
            "{} components for a {}-component merge",
            components.len(),
            merged.component_count()
        )));
    }
    let mut max_abs_diff = 0.0_f64;
    let mut pass = true;
    let mut points = 0usize;
    for (i, comp) in components.iter().enumerate() {
        for &t in grid {
            let merged_sum = {
                let mut sum = 0.0;
                for (time, mark) in merged.trajectory.iter() {
                    if time > t {
                        break;
                    }
                    sum += mark.slot_numeric(i)?;
                }
                sum
            };
            let comp_sum = comp.numeric_sum_through(t)?;
            let diff = (merged_sum - comp_sum).abs();
            max_abs_diff = max_abs_diff.max(diff);
            if merged_sum != comp_sum {
                pass = false;
            }
            points += 1;
        }
    }
    Ok(SemimartingaleReport {
        pass,
        max_abs_diff,
        points_checked: points,
    })
}

/// Compensator of the merged process.
///
/// Declared-independent components embed verbatim: component mark `x` of
/// slot `i` keeps its continuous part and atoms on the tuple with `x` in slot
/// `i` and zeros elsewhere; simultaneous marks get the zero compensator.
/// Dependence is never inferred: either the caller declares independence, or
/// a model-supplied merged compensator is passed through verbatim.
pub fn merged_compensator(
    components: &[&Compensator],
    independent: bool,
    model_supplied: Option<Compensator>,
) -> Result<Compensator> {
    if let Some(supplied) = model_supplied {
        return Ok(supplied);
    }
    if !independent {
        return Err(MppError::Merge(
            "dependent components require a model-supplied merged compensator".into(),
        ));
    }
    if components.is_empty() {
        return Err(MppError::Merge("no components".into()));
    }
    let horizon = components[0].horizon();
    for c in components {
        if c.horizon() != horizon {
            return Err(MppError::Merge("mismatched horizons".into()));
        }
    }
    // reject bit-identical predictable atom times shared across components
    for (i, a) in components.iter().enumerate() {
        let times_a: std::collections::HashSet<u64> = a
            .per_mark()
            .iter()
            .flat_map(|mc| mc.atoms().iter().map(|&(t, _)| t.to_bits()))
            .collect();
        for b in components.iter().skip(i + 1) {
            let overlap = b
                .per_mark()
                .iter()
                .flat_map(|mc| mc.atoms().iter())
                .any(|&(t, _)| times_a.contains(&t.to_bits()));
            if overlap {
                return Err(MppError::Merge(
                    "independence declared but components share predictable atom times".into(),
                ));
            }
        }
    }

    let refs: Vec<&MarkSpace> = components.iter().map(|c| c.mark_space().as_ref()).collect();
    let product = std::sync::Arc::new(MarkSpace::product(&refs)?);
    let mut per_mark = vec![MarkCompensator::zero(); product.len()];
    for (i, comp) in components.iter().enumerate() {
        for (mark_ix, mc) in comp.per_mark().iter().enumerate() {
            let label = comp.mark_space().label(mark_ix);
            let embedded = product.embed(i, label)?;
            per_mark[product.require(&embedded)?] = mc.clone();
        }
    }
    Compensator::new(product, per_mark, horizon)
}
