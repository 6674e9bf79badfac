//! Numerical thresholds shared across the toolkit.
//!
//! Every tolerance used by the verification routines and the acceptance suite
//! is pinned here rather than scattered as ad-hoc magic numbers.

/// Hard cap on the number of events a single simulated trajectory may carry.
///
/// All built-in models are finite-activity on a bounded horizon; reaching this
/// cap indicates a mis-specified model rather than legitimate activity.
pub const EXPLOSION_GUARD: usize = 1_000_000;

/// Absolute tolerance for equalities that accumulate drift over long
/// breakpoint lists (compensated summation keeps the error well below this).
pub const DRIFT_ABS_TOL: f64 = 1e-9;

/// Number of standard errors used by every Monte Carlo mean test.
pub const MC_SIGMA: f64 = 4.0;

/// Default tolerance for representation residuals on the generic
/// (uniformization-based) benchmarks.
pub const REPRESENTATION_TOL: f64 = 1e-6;

/// Residual tolerance on benchmarks where the value function is affine in the
/// counting state: the representation identity is then algebraic and only
/// floating-point roundoff remains.
pub const AFFINE_RESIDUAL_TOL: f64 = 1e-12;

/// Absolute truncation error target of the uniformization solver.
pub const UNIFORMIZATION_TOL: f64 = 1e-10;

/// Resolution at which right-continuity of cumulative compensators is probed
/// around breakpoints and atoms.
pub const RIGHT_CONTINUITY_STEP: f64 = 1e-12;

/// Minimum number of nodes for a value-function time grid.
pub const MIN_VALUE_GRID_NODES: usize = 1000;

/// Slack allowed when checking that per-time atom masses sum to at most one
/// (the sums are themselves floating-point accumulations).
pub const ATOM_MASS_SLACK: f64 = 1e-12;

/// Minimum replication count accepted by the orthogonality moment test.
pub const MIN_ORTHOGONALITY_REPS: u64 = 1000;
