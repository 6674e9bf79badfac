//! Experiment configuration: a TOML document with a `kind` discriminator,
//! shared run controls and per-kind parameters.
//!
//! ```toml
//! kind = "martingale-test"
//! seed = 42
//! replications = 100000
//! checkpoints = 5
//!
//! [model]
//! kind = "poisson"
//! horizon = 4.0
//! rates = { a = 1.0, b = 0.5 }
//! ```
//!
//! See the README for the full schema of every experiment kind.

use std::path::PathBuf;

use mpp_core::models::ModelSpec;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

fn default_seed() -> u64 {
    0
}
fn default_reps() -> u64 {
    100_000
}
fn default_paths() -> u64 {
    1000
}
fn default_sigma() -> f64 {
    mpp_core::tolerances::MC_SIGMA
}
fn default_tolerance() -> f64 {
    mpp_core::tolerances::REPRESENTATION_TOL
}
fn default_checkpoints() -> usize {
    5
}
fn default_residual_checkpoints() -> usize {
    100
}
fn default_grid_points() -> usize {
    5001
}
fn default_atom_time() -> f64 {
    1.0
}
fn default_p_h() -> f64 {
    0.3
}
fn default_p_k() -> f64 {
    0.2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

/// How the representation experiment obtains its value function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueSolver {
    /// Backward uniformization solve with pinned truncation error.
    #[default]
    Uniformization,
    /// Exact affine closed form, valid for uniform birth chains with the
    /// linear payoff; the representation identity is then algebraic.
    ClosedFormAffine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub model: ModelSpec,
    /// Trajectory file to write (v1 line format).
    #[serde(default)]
    pub trajectory_output: Option<PathBuf>,
    /// Optional path for the compensator document next to the trajectory.
    #[serde(default)]
    pub compensator_output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeConfig {
    /// Component trajectory files in the v1 line format.
    pub inputs: Vec<PathBuf>,
    /// Merged trajectory file to write.
    #[serde(default)]
    pub merged_output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleConfig {
    pub model: ModelSpec,
    #[serde(default = "default_reps")]
    pub replications: u64,
    /// Number of uniform checkpoints on (0, horizon].
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationConfig {
    /// Chain model (kind = "ctmc") hosting the Markov target.
    pub model: ModelSpec,
    /// `linear`, `constant:<c>` or `indicator:<state>`.
    pub payoff: String,
    pub t_end: f64,
    /// Number of simulated paths.
    #[serde(default = "default_paths")]
    pub replications: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_residual_checkpoints")]
    pub checkpoints: usize,
    #[serde(default)]
    pub solver: ValueSolver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityConfig {
    pub model: ModelSpec,
    /// The two marks under test; tuple marks spell their slots with `|`,
    /// e.g. `1|0` for the first component jumping alone.
    pub marks: (String, String),
    /// Evaluation time of the moment test.
    pub t: f64,
    #[serde(default = "default_reps")]
    pub replications: u64,
    /// Number of seeded paths for the exact bracket check.
    #[serde(default = "default_paths")]
    pub bracket_paths: u64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleConfig {
    /// Shared predictable atom time of the two marks.
    #[serde(default = "default_atom_time")]
    pub atom_time: f64,
    #[serde(default = "default_p_h")]
    pub p_h: f64,
    #[serde(default = "default_p_k")]
    pub p_k: f64,
    /// Seeded paths for the pathwise bracket demonstration.
    #[serde(default = "default_paths")]
    pub bracket_paths: u64,
    /// Replications of the moment test on the symmetric (0.5, 0.5) setup.
    #[serde(default = "default_reps")]
    pub replications: u64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Simulate(SimulateConfig),
    Merge(MergeConfig),
    MartingaleTest(MartingaleConfig),
    VerifyRepresentation(RepresentationConfig),
    VerifyOrthogonality(OrthogonalityConfig),
    Counterexample(CounterexampleConfig),
}

impl Experiment {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Experiment::Simulate(_) => "simulate",
            Experiment::Merge(_) => "merge",
            Experiment::MartingaleTest(_) => "martingale-test",
            Experiment::VerifyRepresentation(_) => "verify-representation",
            Experiment::VerifyOrthogonality(_) => "verify-orthogonality",
            Experiment::Counterexample(_) => "counterexample",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads (0 = library default). Never affects the numbers.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: ReportFormat,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(HarnessError::Config(format!("{what} must be positive")))
            }
        };
        match &self.experiment {
            Experiment::Simulate(c) => {
                positive(c.model.horizon(), "horizon")?;
            }
            Experiment::Merge(c) => {
                if c.inputs.is_empty() {
                    return Err(HarnessError::Config("merge needs input files".into()));
                }
            }
            Experiment::MartingaleTest(c) => {
                positive(c.model.horizon(), "horizon")?;
                positive(c.sigma, "sigma")?;
                if c.replications == 0 || c.checkpoints == 0 {
                    return Err(HarnessError::Config(
                        "replications and checkpoints must be at least 1".into(),
                    ));
                }
            }
            Experiment::VerifyRepresentation(c) => {
                positive(c.model.horizon(), "horizon")?;
                positive(c.t_end, "t_end")?;
                positive(c.tolerance, "tolerance")?;
                if c.replications == 0 {
                    return Err(HarnessError::Config(
                        "replications must be at least 1".into(),
                    ));
                }
                if !matches!(c.model, ModelSpec::Ctmc(_)) {
                    return Err(HarnessError::Config(
                        "verify-representation requires a ctmc model".into(),
                    ));
                }
                let _: mpp_core::Payoff = c
                    .payoff
                    .parse()
                    .map_err(|e| HarnessError::Config(format!("payoff: {e}")))?;
            }
            Experiment::VerifyOrthogonality(c) => {
                positive(c.model.horizon(), "horizon")?;
                positive(c.t, "t")?;
                positive(c.sigma, "sigma")?;
                if c.t > c.model.horizon() {
                    return Err(HarnessError::Config("t beyond the horizon".into()));
                }
            }
            Experiment::Counterexample(c) => {
                positive(c.atom_time, "atom_time")?;
                positive(c.sigma, "sigma")?;
                for (name, p) in [("p_h", c.p_h), ("p_k", c.p_k)] {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(HarnessError::Config(format!("{name} outside [0, 1]")));
                    }
                }
                if c.p_h + c.p_k > 1.0 + mpp_core::tolerances::ATOM_MASS_SLACK {
                    return Err(HarnessError::Config("p_h + p_k exceeds 1".into()));
                }
            }
        }
        Ok(())
    }
}

/// Parse a mark name: slots separated by `|` form a tuple mark, anything
/// else is an atom.
pub fn parse_mark(text: &str) -> mpp_core::Mark {
    if text.contains('|') {
        mpp_core::Mark::Tuple(text.split('|').map(str::to_string).collect())
    } else {
        mpp_core::Mark::Atom(text.to_string())
    }
}
