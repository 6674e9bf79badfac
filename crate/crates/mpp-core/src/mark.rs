//! Mark labels and finite discrete mark spaces.
//!
//! Component processes carry plain string marks. Merging builds product marks:
//! one slot per component, with the reserved symbol [`ZERO_SYMBOL`] in the
//! slots whose component does not jump at that time. The all-zero tuple is
//! never a valid mark.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{MppError, Result};

/// Reserved symbol for "no jump in this slot" of a product mark. It is never
/// a valid standalone mark of a component space.
pub const ZERO_SYMBOL: &str = "0";

/// A mark label: a plain component mark, or a product tuple built by merging.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Mark {
    Atom(String),
    Tuple(Vec<String>),
}

impl Mark {
    pub fn atom(label: impl Into<String>) -> Self {
        Mark::Atom(label.into())
    }

    pub fn tuple(slots: Vec<String>) -> Self {
        Mark::Tuple(slots)
    }

    /// Slot value of a product mark (`None` for atoms or out-of-range slots).
    pub fn slot(&self, i: usize) -> Option<&str> {
        match self {
            Mark::Atom(_) => None,
            Mark::Tuple(slots) => slots.get(i).map(|s| s.as_str()),
        }
    }

    pub fn arity(&self) -> Option<usize> {
        match self {
            Mark::Atom(_) => None,
            Mark::Tuple(slots) => Some(slots.len()),
        }
    }

    /// Numeric payload of an atom mark, parsing the label as a decimal number.
    pub fn numeric(&self) -> Result<f64> {
        match self {
            Mark::Atom(s) => s
                .parse::<f64>()
                .map_err(|_| MppError::NonNumericMark(s.clone())),
            Mark::Tuple(_) => Err(MppError::NonNumericMark(self.to_string())),
        }
    }

    /// Numeric payload of slot `i`, with the zero symbol contributing the
    /// additive-neutral element.
    pub fn slot_numeric(&self, i: usize) -> Result<f64> {
        match self.slot(i) {
            Some(s) if s == ZERO_SYMBOL => Ok(0.0),
            Some(s) => s
                .parse::<f64>()
                .map_err(|_| MppError::NonNumericMark(s.to_string())),
            None => Err(MppError::NonNumericMark(self.to_string())),
        }
    }

    fn validate_component(&self) -> Result<()> {
        match self {
            Mark::Atom(s) => {
                if s.is_empty() {
                    return Err(MppError::InvalidMarkSpace("empty mark label".into()));
                }
                if s == ZERO_SYMBOL {
                    return Err(MppError::ZeroSymbolForbidden);
                }
                Ok(())
            }
            Mark::Tuple(slots) => {
                if slots.is_empty() {
                    return Err(MppError::InvalidMarkSpace("empty tuple mark".into()));
                }
                if slots.iter().any(String::is_empty) {
                    return Err(MppError::InvalidMarkSpace("empty tuple slot".into()));
                }
                if slots.iter().all(|s| s == ZERO_SYMBOL) {
                    return Err(MppError::InvalidMarkSpace(
                        "the all-zero tuple is not a valid mark".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mark::Atom(s) => f.write_str(s),
            Mark::Tuple(slots) => write!(f, "({})", slots.join(",")),
        }
    }
}

/// A finite ordered set of distinct mark labels.
///
/// Either all labels are atoms (a component space) or all labels are tuples of
/// one common arity (a merged space).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Mark>", into = "Vec<Mark>")]
pub struct MarkSpace {
    labels: Vec<Mark>,
    #[serde(skip)]
    index: HashMap<Mark, usize>,
}

impl MarkSpace {
    pub fn new(labels: Vec<Mark>) -> Result<Self> {
        if labels.is_empty() {
            return Err(MppError::InvalidMarkSpace("no labels".into()));
        }
        let arity = labels[0].arity();
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            label.validate_component()?;
            if label.arity() != arity {
                return Err(MppError::InvalidMarkSpace(
                    "mixed atom/tuple labels or inconsistent tuple arity".into(),
                ));
            }
            if index.insert(label.clone(), i).is_some() {
                return Err(MppError::InvalidMarkSpace(format!(
                    "duplicate label `{label}`"
                )));
            }
        }
        Ok(MarkSpace { labels, index })
    }

    pub fn atoms<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(labels.into_iter().map(|s| Mark::Atom(s.into())).collect())
    }

    /// Product-with-zero space of the given component spaces, excluding the
    /// all-zero tuple. Component spaces must be atom spaces.
    pub fn product(components: &[&MarkSpace]) -> Result<MarkSpace> {
        const MAX_PRODUCT_LABELS: usize = 65_536;
        if components.is_empty() {
            return Err(MppError::InvalidMarkSpace("empty product".into()));
        }
        let mut options: Vec<Vec<&str>> = Vec::with_capacity(components.len());
        let mut total: usize = 1;
        for space in components {
            let mut opts = vec![ZERO_SYMBOL];
            for label in &space.labels {
                match label {
                    Mark::Atom(s) => opts.push(s.as_str()),
                    Mark::Tuple(_) => {
                        return Err(MppError::InvalidMarkSpace(
                            "product components must be atom spaces".into(),
                        ))
                    }
                }
            }
            total = total.saturating_mul(opts.len());
            options.push(opts);
        }
        if total > MAX_PRODUCT_LABELS {
            return Err(MppError::InvalidMarkSpace(format!(
                "product space of {total} labels exceeds the supported maximum"
            )));
        }
        let mut labels = Vec::with_capacity(total - 1);
        let mut counters = vec![0usize; options.len()];
        loop {
            if counters.iter().any(|&c| c != 0) {
                let tuple: Vec<String> = counters
                    .iter()
                    .zip(&options)
                    .map(|(&c, opts)| opts[c].to_string())
                    .collect();
                labels.push(Mark::Tuple(tuple));
            }
            // odometer increment, last slot fastest
            let mut pos = options.len();
            loop {
                if pos == 0 {
                    return MarkSpace::new(labels);
                }
                pos -= 1;
                counters[pos] += 1;
                if counters[pos] < options[pos].len() {
                    break;
                }
                counters[pos] = 0;
            }
        }
    }

    /// Tuple label with `mark` in slot `i` and the zero symbol elsewhere.
    pub fn embed(&self, i: usize, mark: &Mark) -> Result<Mark> {
        let arity = self
            .arity()
            .ok_or_else(|| MppError::InvalidMarkSpace("embed requires a tuple space".into()))?;
        if i >= arity {
            return Err(MppError::InvalidMarkSpace(format!(
                "slot {i} out of range for arity {arity}"
            )));
        }
        let name = match mark {
            Mark::Atom(s) => s.clone(),
            Mark::Tuple(_) => {
                return Err(MppError::InvalidMarkSpace(
                    "cannot embed a tuple mark".into(),
                ))
            }
        };
        let mut slots = vec![ZERO_SYMBOL.to_string(); arity];
        slots[i] = name;
        let label = Mark::Tuple(slots);
        if !self.contains(&label) {
            return Err(MppError::UnknownMark(label.to_string()));
        }
        Ok(label)
    }

    pub fn labels(&self) -> &[Mark] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, mark: &Mark) -> Option<usize> {
        self.index.get(mark).copied()
    }

    pub fn contains(&self, mark: &Mark) -> bool {
        self.index.contains_key(mark)
    }

    pub fn label(&self, ix: usize) -> &Mark {
        &self.labels[ix]
    }

    /// Common tuple arity, or `None` for an atom space.
    pub fn arity(&self) -> Option<usize> {
        self.labels[0].arity()
    }

    pub fn require(&self, mark: &Mark) -> Result<usize> {
        self.index_of(mark)
            .ok_or_else(|| MppError::UnknownMark(mark.to_string()))
    }
}

impl TryFrom<Vec<Mark>> for MarkSpace {
    type Error = MppError;
    fn try_from(labels: Vec<Mark>) -> Result<Self> {
        MarkSpace::new(labels)
    }
}

impl From<MarkSpace> for Vec<Mark> {
    fn from(space: MarkSpace) -> Vec<Mark> {
        space.labels
    }
}

/// Mark spaces are shared immutably between trajectories, compensators and
/// integrands.
pub type SharedMarkSpace = Arc<MarkSpace>;
