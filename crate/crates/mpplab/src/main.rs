//! `mpplab` — simulate marked point processes, merge them, and verify the
//! martingale, representation and orthogonality properties pathwise.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use mpplab::{
    config::{
        CounterexampleConfig, Experiment, ExperimentConfig, MartingaleConfig, MergeConfig,
        OrthogonalityConfig, ReportFormat, RepresentationConfig, SimulateConfig, ValueSolver,
    },
    experiments, ExperimentReport,
};

#[derive(Parser)]
#[command(
    name = "mpplab",
    version,
    about = "Point-process simulation and pathwise martingale verification",
    after_help = "Reports are JSON (default) or CSV; the exit status is 0 iff every check passes.\n\
                  Relative output paths resolve under $MPPLAB_OUT_DIR when set."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonRun {
    /// Master seed; replications use independent streams under it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = library default). Never changes the numbers.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> ReportFormat {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SolverArg {
    Uniformization,
    ClosedFormAffine,
}

impl From<SolverArg> for ValueSolver {
    fn from(s: SolverArg) -> ValueSolver {
        match s {
            SolverArg::Uniformization => ValueSolver::Uniformization,
            SolverArg::ClosedFormAffine => ValueSolver::ClosedFormAffine,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config file.
    Run {
        /// Experiment configuration (TOML, see the README schema).
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate one trajectory and write it in the v1 line format.
    Simulate {
        /// Model file (TOML with a `kind` field).
        #[arg(long)]
        model: PathBuf,
        /// Trajectory output path (v1 JSON lines).
        #[arg(long)]
        trajectory_out: Option<PathBuf>,
        /// Compensator output path (v1 JSON document).
        #[arg(long)]
        compensator_out: Option<PathBuf>,
        #[command(flatten)]
        common: CommonRun,
    },
    /// Merge component trajectory files into one product-mark trajectory.
    Merge {
        /// Component trajectory files (v1 line format), in slot order.
        inputs: Vec<PathBuf>,
        /// Merged trajectory output path.
        #[arg(long)]
        merged_out: Option<PathBuf>,
        #[command(flatten)]
        common: CommonRun,
    },
    /// Monte Carlo test that every compensated mark is centred at 0.
    MartingaleTest {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        reps: u64,
        /// Uniform checkpoints on (0, horizon].
        #[arg(long, default_value_t = 5)]
        checkpoints: usize,
        /// Width of the confidence band in standard errors.
        #[arg(long, default_value_t = 4.0)]
        sigma: f64,
        #[command(flatten)]
        common: CommonRun,
    },
    /// Pathwise residual of the martingale representation identity.
    VerifyRepresentation {
        #[arg(long)]
        model: PathBuf,
        /// `linear`, `constant:<c>` or `indicator:<state>`.
        #[arg(long)]
        payoff: String,
        /// Terminal time of the target martingale.
        #[arg(long = "T")]
        t_end: f64,
        /// Number of simulated paths.
        #[arg(long, default_value_t = 1000)]
        reps: u64,
        /// Residual tolerance.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Value-function grid nodes.
        #[arg(long, default_value_t = 5001)]
        grid_points: usize,
        /// Uniform residual checkpoints (event times are always included).
        #[arg(long, default_value_t = 100)]
        checkpoints: usize,
        #[arg(long, value_enum, default_value = "uniformization")]
        solver: SolverArg,
        #[command(flatten)]
        common: CommonRun,
    },
    /// Exact bracket and Monte Carlo moment test for one mark pair.
    VerifyOrthogonality {
        #[arg(long)]
        model: PathBuf,
        /// The two marks, comma separated; tuple slots spelled with `|`.
        #[arg(long, value_delimiter = ',')]
        marks: Vec<String>,
        /// Evaluation time of the moment test.
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 100_000)]
        reps: u64,
        /// Seeded paths for the exact bracket check.
        #[arg(long, default_value_t = 1000)]
        bracket_paths: u64,
        #[arg(long, default_value_t = 4.0)]
        sigma: f64,
        #[command(flatten)]
        common: CommonRun,
    },
    /// Shared-atom configuration where pairwise orthogonality fails.
    Counterexample {
        /// Shared predictable atom time.
        #[arg(long, default_value_t = 1.0)]
        atom_time: f64,
        #[arg(long, default_value_t = 0.3)]
        p_h: f64,
        #[arg(long, default_value_t = 0.2)]
        p_k: f64,
        #[arg(long, default_value_t = 100_000)]
        reps: u64,
        #[arg(long, default_value_t = 1000)]
        bracket_paths: u64,
        #[arg(long, default_value_t = 4.0)]
        sigma: f64,
        #[command(flatten)]
        common: CommonRun,
    },
}

fn read_model(path: &PathBuf) -> anyhow::Result<mpp_core::ModelSpec> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading model file {}", path.display()))?;
    let model: mpp_core::ModelSpec =
        toml::from_str(&text).with_context(|| format!("parsing model file {}", path.display()))?;
    Ok(model)
}

fn finish(report: ExperimentReport) -> anyhow::Result<ExitCode> {
    if report.config.output.is_none() {
        print!("{}", report.render(report.config.format)?);
    } else {
        for check in &report.checks {
            println!(
                "{}: {} (statistic {}, threshold {})",
                check.name,
                if check.pass { "PASS" } else { "FAIL" },
                check.statistic,
                check.threshold
            );
        }
    }
    Ok(if report.overall_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    let report = match cli.command {
        Command::Run { config } => experiments::run_toml_file(&config)?,
        Command::Simulate {
            model,
            trajectory_out,
            compensator_out,
            common,
        } => {
            let model = read_model(&model)?;
            let config = ExperimentConfig {
                experiment: Experiment::Simulate(SimulateConfig {
                    model,
                    trajectory_output: trajectory_out,
                    compensator_output: compensator_out,
                }),
                seed: common.seed,
                threads: common.threads,
                output: common.out,
                format: common.format.into(),
            };
            let report = experiments::run(&config)?;
            for artifact in &report.artifacts {
                eprintln!("wrote {artifact}");
            }
            return finish(report);
        }
        Command::Merge {
            inputs,
            merged_out,
            common,
        } => {
            if inputs.is_empty() {
                bail!("merge needs at least one input trajectory");
            }
            let config = ExperimentConfig {
                experiment: Experiment::Merge(MergeConfig {
                    inputs,
                    merged_output: merged_out,
                }),
                seed: common.seed,
                threads: common.threads,
                output: common.out,
                format: common.format.into(),
            };
            let report = experiments::run(&config)?;
            for artifact in &report.artifacts {
                eprintln!("wrote {artifact}");
            }
            return finish(report);
        }
        Command::MartingaleTest {
            model,
            reps,
            checkpoints,
            sigma,
            common,
        } => {
            let model = read_model(&model)?;
            experiments::run(&ExperimentConfig {
                experiment: Experiment::MartingaleTest(MartingaleConfig {
                    model,
                    replications: reps,
                    checkpoints,
                    sigma,
                }),
                seed: common.seed,
                threads: common.threads,
                output: common.out,
                format: common.format.into(),
            })?
        }
        Command::VerifyRepresentation {
            model,
            payoff,
            t_end,
            reps,
            tol,
            grid_points,
            checkpoints,
            solver,
            common,
        } => {
            let model = read_model(&model)?;
            experiments::run(&ExperimentConfig {
                experiment: Experiment::VerifyRepresentation(RepresentationConfig {
                    model,
                    payoff,
                    t_end,
                    replications: reps,
                    tolerance: tol,
                    grid_points,
                    checkpoints,
                    solver: solver.into(),
                }),
                seed: common.seed,
                threads: common.threads,
                output: common.out,
                format: common.format.into(),
            })?
        }
        Command::VerifyOrthogonality {
            model,
            marks,
            t,
            reps,
            bracket_paths,
            sigma,
            common,
        } => {
            let model = read_model(&model)?;
            let [h, k] = <[String; 2]>::try_from(marks)
                .map_err(|_| anyhow::anyhow!("--marks expects exactly two marks"))?;
            experiments::run(&ExperimentConfig {
                experiment: Experiment::VerifyOrthogonality(OrthogonalityConfig {
                    model,
                    marks: (h, k),
                    t,
                    replications: reps,
                    bracket_paths,
                    sigma,
                }),
                seed: common.seed,
                threads: common.threads,
                output: common.out,
                format: common.format.into(),
            })?
        }
        Command::Counterexample {
            atom_time,
            p_h,
            p_k,
            reps,
            bracket_paths,
            sigma,
            common,
        } => experiments::run(&ExperimentConfig {
            experiment: Experiment::Counterexample(CounterexampleConfig {
                atom_time,
                p_h,
                p_k,
                bracket_paths,
                replications: reps,
                sigma,
            }),
            seed: common.seed,
            threads: common.threads,
            output: common.out,
            format: common.format.into(),
        })?,
    };
    finish(report)
}
