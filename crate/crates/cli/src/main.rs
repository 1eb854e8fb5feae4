mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ggm_core::completion::{chordal_completion, clique_feasible, maxdet_completion, Completion};
use ggm_core::gaussian::{sample, GaussianParams};
use ggm_core::graphs::is_chordal;
use ggm_core::mle::{
    fit_chordal_closed_form, fit_coordinate_k, fit_coordinate_sigma, mle_exists, mlt_monte_carlo,
    Existence, ExistenceStrategy, FitOptions, FitStatus, MleResult,
};
use ggm_core::rcon::{rcon_dual_check, rcon_fit};
use ggm_core::select::{
    ci_test_full, glasso_fit, stepwise_select, threshold_select, Direction, StepAction, StepwiseOptions,
};
use ggm_core::{GgmError, Graph};
use serde::Serialize;

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_NONEXISTENT: u8 = 2;
const EXIT_UNDECIDED: u8 = 3;

/// Maximum likelihood estimation and matrix completion for Gaussian
/// graphical models.
///
/// Exit status: 0 success, 1 invalid input, 2 estimate does not exist or
/// partial matrix not completable, 3 iteration cap or undecided.
#[derive(Parser)]
#[command(name = "ggm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model on a graph to data or a covariance matrix.
    Fit(FitArgs),
    /// Decide whether the maximum likelihood estimate exists.
    Exists(ExistsArgs),
    /// Find the determinant-maximizing completion of a partial matrix.
    Complete(CompleteArgs),
    /// Draw samples from a centered normal distribution.
    Sample(SampleArgs),
    /// Learn a graph from data.
    Select(SelectArgs),
    /// Estimate the probability that the estimate exists at sample size n.
    Mlt(MltArgs),
    /// Fit a colored model with tied precision entries.
    Rcon(RconArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Data CSV, one sample per row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Covariance matrix CSV.
    #[arg(long)]
    cov: Option<PathBuf>,
    /// Use the uncentered second moment of the data.
    #[arg(long)]
    raw_moment: bool,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also print the report on standard output when --out is given.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitMethod {
    /// Closed form on chordal graphs, precision coordinate descent otherwise.
    Auto,
    ClosedForm,
    Sigma,
    K,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = FitMethod::Auto)]
    method: FitMethod,
    /// Largest precision entry tolerated before declaring divergence.
    #[arg(long)]
    divergence_bound: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Auto,
    Chordal,
    Cycle,
    Divergence,
}

#[derive(Args)]
struct ExistsArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = StrategyArg::Auto)]
    strategy: StrategyArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum CompleteMethod {
    /// Clique formula on chordal patterns, likelihood ascent otherwise.
    Auto,
    Chordal,
    Maxdet,
}

#[derive(Args)]
struct CompleteArgs {
    /// Partial-matrix JSON.
    #[arg(long)]
    partial: PathBuf,
    #[arg(long, value_enum, default_value_t = CompleteMethod::Auto)]
    method: CompleteMethod,
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SampleArgs {
    /// Covariance matrix CSV.
    #[arg(long)]
    cov: PathBuf,
    /// Number of samples.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectMethod {
    Stepwise,
    Threshold,
    Fisher,
    Glasso,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Forward,
    Backward,
}

#[derive(Clone, Copy, ValueEnum)]
enum Criterion {
    Aic,
    Bic,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Sample size; required with --cov.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value_t = SelectMethod::Stepwise)]
    method: SelectMethod,
    #[arg(long, value_enum, default_value_t = DirectionArg::Forward)]
    direction: DirectionArg,
    #[arg(long, value_enum, default_value_t = Criterion::Bic)]
    criterion: Criterion,
    /// Penalty per edge (stepwise) or ℓ1 weight (glasso); overrides --criterion.
    #[arg(long)]
    lambda: Option<f64>,
    /// Partial-correlation threshold.
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    /// Test level for the Fisher method.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Apply the best change per sweep instead of the first improving one.
    #[arg(long)]
    best_first: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct MltArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Sample size per trial.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct RconArgs {
    /// Colored-graph JSON.
    #[arg(long)]
    colored: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[command(flatten)]
    output: OutputArgs,
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        bail!("--eps: must be a positive number, got {eps}");
    }
    Ok(())
}

fn status_code(status: FitStatus) -> u8 {
    match status {
        FitStatus::Converged => EXIT_OK,
        FitStatus::NonExistent => EXIT_NONEXISTENT,
        FitStatus::IterationCap => EXIT_UNDECIDED,
    }
}

#[derive(Serialize)]
struct NonExistentReport {
    status: FitStatus,
    detail: String,
}

fn cmd_fit(args: FitArgs) -> Result<u8> {
    check_eps(args.solver.eps)?;
    let graph = io::read_graph(&args.graph)?;
    let stat = io::read_statistic(args.input.data.as_deref(), args.input.cov.as_deref(), args.input.raw_moment)?;
    io::check_dimension("--data/--cov", graph.num_vertices(), stat.s.dim())?;
    let opts = FitOptions {
        eps: args.solver.eps,
        max_iter: args.solver.max_iter,
        divergence_bound: args.divergence_bound,
        ..FitOptions::default()
    };
    let closed_form = match args.method {
        FitMethod::Auto => is_chordal(&graph),
        FitMethod::ClosedForm => true,
        _ => false,
    };
    let result: MleResult = if closed_form {
        match fit_chordal_closed_form(&graph, &stat.s) {
            Ok(r) => r,
            Err(GgmError::NonExistent(detail)) => {
                let report = NonExistentReport {
                    status: FitStatus::NonExistent,
                    detail,
                };
                io::emit(&io::to_json(&report)?, args.output.out.as_deref(), args.output.json)?;
                return Ok(EXIT_NONEXISTENT);
            }
            Err(GgmError::NotChordal) => bail!("--method: closed form needs a chordal graph"),
            Err(e) => return Err(e.into()),
        }
    } else if matches!(args.method, FitMethod::Sigma) {
        fit_coordinate_sigma(&graph, &stat.s, &opts).context("--data/--cov: sigma descent needs a positive definite statistic")?
    } else {
        fit_coordinate_k(&graph, &stat.s, &opts)?
    };
    io::emit(&io::to_json(&result)?, args.output.out.as_deref(), args.output.json)?;
    Ok(status_code(result.status))
}

fn cmd_exists(args: ExistsArgs) -> Result<u8> {
    let graph = io::read_graph(&args.graph)?;
    let stat = io::read_statistic(args.input.data.as_deref(), args.input.cov.as_deref(), args.input.raw_moment)?;
    io::check_dimension("--data/--cov", graph.num_vertices(), stat.s.dim())?;
    let strategy = match args.strategy {
        StrategyArg::Auto => ExistenceStrategy::Auto,
        StrategyArg::Chordal => ExistenceStrategy::Chordal,
        StrategyArg::Cycle => ExistenceStrategy::Cycle,
        StrategyArg::Divergence => ExistenceStrategy::Divergence,
    };
    let verdict = mle_exists(&graph, &stat.s, strategy).context("--strategy: not applicable to this graph")?;
    io::emit(&io::to_json(&verdict)?, args.output.out.as_deref(), args.output.json)?;
    Ok(match verdict.exists {
        Existence::Yes => EXIT_OK,
        Existence::No => EXIT_NONEXISTENT,
        Existence::Unknown => EXIT_UNDECIDED,
    })
}

#[derive(Serialize)]
struct CompletionReport {
    status: &'static str,
    clique_feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    boundary: Option<bool>,
}

fn cmd_complete(args: CompleteArgs) -> Result<u8> {
    check_eps(args.eps)?;
    let pm = io::read_partial(&args.partial)?;
    let feasible = clique_feasible(&pm)?;
    let chordal = is_chordal(pm.graph());
    let completion = match args.method {
        CompleteMethod::Chordal if !chordal => bail!("--method: chordal completion needs a chordal pattern"),
        CompleteMethod::Chordal | CompleteMethod::Auto if chordal => match chordal_completion(&pm) {
            Ok(sigma) => Completion::Completed(sigma),
            Err(GgmError::NotCompletable(reason)) => {
                Completion::NonCompletable(ggm_core::completion::NonCompletable { reason, boundary: false })
            }
            Err(e) => return Err(e.into()),
        },
        _ => match maxdet_completion(&pm, args.eps, args.max_iter) {
            Ok(c) => c,
            Err(GgmError::IterationCap(n)) => {
                let report = CompletionReport {
                    status: "IterationCap",
                    clique_feasible: feasible,
                    sigma: None,
                    reason: Some(format!("no decision after {n} iterations")),
                    boundary: None,
                };
                io::emit(&io::to_json(&report)?, args.output.out.as_deref(), args.output.json)?;
                return Ok(EXIT_UNDECIDED);
            }
            Err(e) => return Err(e.into()),
        },
    };
    let (report, code) = match completion {
        Completion::Completed(sigma) => (
            CompletionReport {
                status: "Completed",
                clique_feasible: feasible,
                sigma: Some(sigma.to_rows()),
                reason: None,
                boundary: None,
            },
            EXIT_OK,
        ),
        Completion::NonCompletable(nc) => (
            CompletionReport {
                status: "NonCompletable",
                clique_feasible: feasible,
                sigma: None,
                reason: Some(nc.reason),
                boundary: Some(nc.boundary),
            },
            EXIT_NONEXISTENT,
        ),
    };
    io::emit(&io::to_json(&report)?, args.output.out.as_deref(), args.output.json)?;
    Ok(code)
}

fn cmd_sample(args: SampleArgs) -> Result<u8> {
    let cov = io::read_cov(&args.cov)?;
    let params = GaussianParams::centered(cov).context("--cov: covariance must be positive definite")?;
    if args.n == 0 {
        bail!("--n: must be at least 1");
    }
    let rows = sample(&params, args.n, args.seed)?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for row in &rows {
        writer.write_record(row.iter().map(|v| io::format_float(*v)))?;
    }
    let bytes = writer.into_inner().context("flushing CSV")?;
    io::emit(&String::from_utf8(bytes)?, args.out.as_deref(), false)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct GraphReport {
    p: usize,
    edges: Vec<[usize; 2]>,
}

impl From<&Graph> for GraphReport {
    fn from(g: &Graph) -> Self {
        Self {
            p: g.num_vertices(),
            edges: g.edges().into_iter().map(|(i, j)| [i + 1, j + 1]).collect(),
        }
    }
}

#[derive(Serialize)]
struct StepReport {
    edge: [usize; 2],
    action: StepAction,
    score: f64,
}

#[derive(Serialize)]
struct SelectionReport {
    method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    criterion: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    graph: GraphReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    trace: Vec<StepReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_hat: Option<Vec<Vec<f64>>>,
}

fn cmd_select(args: SelectArgs) -> Result<u8> {
    check_eps(args.solver.eps)?;
    let stat = io::read_statistic(args.input.data.as_deref(), args.input.cov.as_deref(), args.input.raw_moment)?;
    let n = match (args.n, stat.n) {
        (Some(n), _) | (None, Some(n)) => n,
        (None, None) => bail!("--n: required when the input is a covariance matrix"),
    };
    if let Some(l) = args.lambda {
        if !(l >= 0.0) {
            bail!("--lambda: must be non-negative, got {l}");
        }
    }
    let mut report = SelectionReport {
        method: "",
        criterion: None,
        lambda: None,
        tau: None,
        alpha: None,
        graph: GraphReport { p: 0, edges: vec![] },
        score: None,
        trace: vec![],
        k_hat: None,
    };
    match args.method {
        SelectMethod::Stepwise => {
            let (criterion, lambda) = match (args.lambda, args.criterion) {
                (Some(l), _) => ("custom", l),
                (None, Criterion::Aic) => ("aic", 2.0),
                (None, Criterion::Bic) => ("bic", (n as f64).ln()),
            };
            let direction = match args.direction {
                DirectionArg::Forward => Direction::Forward,
                DirectionArg::Backward => Direction::Backward,
            };
            let opts = StepwiseOptions {
                best_first: args.best_first,
                fit: FitOptions {
                    eps: args.solver.eps,
                    max_iter: args.solver.max_iter,
                    ..FitOptions::default()
                },
            };
            let result = stepwise_select(&stat.s, n, direction, lambda, &opts)
                .context("--data/--cov: stepwise search needs a positive definite statistic")?;
            report.method = "stepwise";
            report.criterion = Some(criterion);
            report.lambda = Some(lambda);
            report.graph = (&result.graph).into();
            report.score = Some(result.score);
            report.trace = result
                .trace
                .iter()
                .map(|t| StepReport {
                    edge: [t.edge.0 + 1, t.edge.1 + 1],
                    action: t.action,
                    score: t.score,
                })
                .collect();
        }
        SelectMethod::Threshold => {
            let g = threshold_select(&stat.s, args.tau).context("--tau/--data/--cov")?;
            report.method = "threshold";
            report.tau = Some(args.tau);
            report.graph = (&g).into();
        }
        SelectMethod::Fisher => {
            let p = stat.s.dim();
            let mut g = Graph::new(p);
            for i in 0..p {
                for j in (i + 1)..p {
                    if ci_test_full(&stat.s, n, i, j, args.alpha).context("--n/--alpha")?.reject {
                        g.add_edge(i, j)?;
                    }
                }
            }
            report.method = "fisher";
            report.alpha = Some(args.alpha);
            report.graph = (&g).into();
        }
        SelectMethod::Glasso => {
            let lambda = args.lambda.unwrap_or(0.1);
            let fit = glasso_fit(&stat.s, lambda, args.solver.eps, args.solver.max_iter)?;
            let p = fit.k.dim();
            let mut g = Graph::new(p);
            for i in 0..p {
                for j in (i + 1)..p {
                    if fit.k.get(i, j) != 0.0 {
                        g.add_edge(i, j)?;
                    }
                }
            }
            report.method = "glasso";
            report.lambda = Some(lambda);
            report.graph = (&g).into();
            report.score = Some(fit.objective);
            report.k_hat = Some(fit.k.to_rows());
        }
    }
    io::emit(&io::to_json(&report)?, args.output.out.as_deref(), args.output.json)?;
    Ok(EXIT_OK)
}

fn cmd_mlt(args: MltArgs) -> Result<u8> {
    let graph = io::read_graph(&args.graph)?;
    if args.trials == 0 {
        bail!("--trials: must be at least 1");
    }
    if args.n == 0 {
        bail!("--n: must be at least 1");
    }
    let report = mlt_monte_carlo(&graph, args.n, args.trials, args.seed)?;
    io::emit(&io::to_json(&report)?, args.output.out.as_deref(), args.output.json)?;
    Ok(if report.unknown_count > 0 { EXIT_UNDECIDED } else { EXIT_OK })
}

#[derive(Serialize)]
struct RconReport {
    #[serde(flatten)]
    fit: MleResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    dual: Option<ggm_core::rcon::RconDualReport>,
}

fn cmd_rcon(args: RconArgs) -> Result<u8> {
    check_eps(args.eps)?;
    let cg = io::read_colored(&args.colored)?;
    let stat = io::read_statistic(args.input.data.as_deref(), args.input.cov.as_deref(), args.input.raw_moment)?;
    io::check_dimension("--data/--cov", cg.graph().num_vertices(), stat.s.dim())?;
    let fit = rcon_fit(&cg, &stat.s, args.eps, args.max_iter)?;
    let dual = fit
        .converged()
        .then(|| rcon_dual_check(&fit, &cg, &stat.s, args.eps.max(1e-8)))
        .transpose()?;
    let code = status_code(fit.status);
    io::emit(&io::to_json(&RconReport { fit, dual })?, args.output.out.as_deref(), args.output.json)?;
    Ok(code)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Exists(a) => cmd_exists(a),
        Command::Complete(a) => cmd_complete(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Select(a) => cmd_select(a),
        Command::Mlt(a) => cmd_mlt(a),
        Command::Rcon(a) => cmd_rcon(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
