use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use privlp::attack::{AttackSolver, GadgetKind};
use privlp::low_sensitivity::ColumnNoise;
use privlp::lp::PrivateLp;
use privlp::mw::{trace_from_json_lines, trace_to_json_lines};
use privlp::report::{
    attack_report, bound_report, solve_report, to_json, BoundKind, BoundRequest, OracleChoice, SolveCommand,
    SolveOptions,
};
use privlp::rng::parse_seed_list;
use privlp::verification::{acceptance_seeds, regret_replay, run_suite, Suite};

#[derive(Parser)]
#[command(name = "privlp", version, about = "Differentially private linear programming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dense multiplicative weights over a private oracle (high-sensitivity constraints).
    SolveConstraint {
        #[command(flatten)]
        common: SolveArgs,
        #[arg(long, value_enum, default_value = "setcover")]
        oracle: Oracle,
        /// Density parameter; defaults to the set-cover accuracy requirement clipped to m.
        #[arg(long)]
        s: Option<usize>,
        /// Optimal value defining the objective slice when the instance has `c` but no slice.
        #[arg(long)]
        opt: Option<f64>,
    },
    /// Scalar-private solver (private right-hand side).
    SolveScalar {
        #[command(flatten)]
        common: SolveArgs,
        #[command(flatten)]
        scale: ScaleArgs,
    },
    /// Row-private solver.
    SolveRow {
        #[command(flatten)]
        common: SolveArgs,
        #[command(flatten)]
        scale: ScaleArgs,
    },
    /// Column-private solver.
    SolveColumn {
        #[command(flatten)]
        common: SolveArgs,
        #[command(flatten)]
        scale: ScaleArgs,
        #[arg(long, value_enum, default_value = "per-coordinate")]
        column_noise: Noise,
    },
    /// Objective-private solver: Laplace-perturbed objective, exact solve.
    SolveObjective {
        #[command(flatten)]
        common: SolveArgs,
    },
    /// Reconstruction attack on a gadget LP.
    Attack {
        #[arg(long, value_enum)]
        gadget: Gadget,
        #[arg(long, value_enum, default_value = "exact")]
        solver: AttackSolverArg,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Runs a verification suite, or replays a trace file.
    Verify {
        #[arg(long, value_enum, conflicts_with = "replay")]
        suite: Option<SuiteArg>,
        /// Seed list, one integer per line; defaults to the committed acceptance seeds.
        #[arg(long)]
        seed_file: Option<PathBuf>,
        /// Trace written by `--trace`.
        #[arg(long)]
        replay: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Prints an accuracy or reconstruction bound.
    Bound {
        #[arg(long, value_enum)]
        kind: BoundArg,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
        /// `Delta_inf` for scalar and row bounds, `Delta_1` for column and objective.
        #[arg(long, default_value_t = 0.0)]
        sensitivity: f64,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Writes the trace of trial 0 as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ScaleArgs {
    /// Bound on `||x||_1` used to move an orthant instance onto the simplex.
    #[arg(long)]
    l1_bound: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Oracle {
    Setcover,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum Noise {
    PerCoordinate,
    SharedDraw,
}

#[derive(Clone, Copy, ValueEnum)]
enum Gadget {
    Scalar,
    Objective,
    Constraint,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackSolverArg {
    Exact,
    ObjectivePrivate,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Mechanisms,
    Projection,
    Regret,
    Solvers,
    Attacks,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundArg {
    Scalar,
    Row,
    Column,
    Objective,
    Reconstruction,
}

type CliResult<T> = Result<T, String>;

fn write_out(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn solve(cmd: SolveCommand, common: SolveArgs, configure: impl FnOnce(&mut SolveOptions)) -> CliResult<bool> {
    let lp = PrivateLp::load(&common.instance).map_err(|e| e.to_string())?;
    let mut opts = SolveOptions::new(common.epsilon, common.delta, common.seed);
    opts.alpha = common.alpha;
    opts.beta = common.beta;
    opts.trials = common.trials;
    opts.trace = common.trace.is_some();
    configure(&mut opts);
    let run = solve_report(cmd, &lp, &opts).map_err(|e| e.to_string())?;
    if let (Some(path), Some(trace)) = (&common.trace, &run.trace) {
        write_out(Some(path), &trace_to_json_lines(trace))?;
    }
    write_out(common.output.as_deref(), &to_json(&run.report))?;
    Ok(true)
}

fn run(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::SolveConstraint { common, oracle, s, opt } => solve(SolveCommand::Constraint, common, |o| {
            o.oracle = match oracle {
                Oracle::Setcover => OracleChoice::Setcover,
                Oracle::Exact => OracleChoice::Exact,
            };
            o.s = s;
            o.opt = opt;
        }),
        Command::SolveScalar { common, scale } => solve(SolveCommand::Scalar, common, |o| o.l1_bound = scale.l1_bound),
        Command::SolveRow { common, scale } => solve(SolveCommand::Row, common, |o| o.l1_bound = scale.l1_bound),
        Command::SolveColumn {
            common,
            scale,
            column_noise,
        } => solve(SolveCommand::Column, common, |o| {
            o.l1_bound = scale.l1_bound;
            o.column_noise = match column_noise {
                Noise::PerCoordinate => ColumnNoise::PerCoordinate,
                Noise::SharedDraw => ColumnNoise::SharedDraw,
            };
        }),
        Command::SolveObjective { common } => solve(SolveCommand::Objective, common, |_| {}),
        Command::Attack {
            gadget,
            solver,
            n,
            trials,
            epsilon,
            delta,
            beta,
            seed,
            output,
        } => {
            let gadget = match gadget {
                Gadget::Scalar => GadgetKind::Scalar,
                Gadget::Objective => GadgetKind::Objective,
                Gadget::Constraint => GadgetKind::Constraint,
            };
            let solver = match solver {
                AttackSolverArg::Exact => AttackSolver::Exact,
                AttackSolverArg::ObjectivePrivate => AttackSolver::ObjectivePrivate { epsilon, delta },
            };
            let report = attack_report(gadget, solver, n, trials, beta, seed).map_err(|e| e.to_string())?;
            write_out(output.as_deref(), &to_json(&report))?;
            Ok(true)
        }
        Command::Verify {
            suite,
            seed_file,
            replay,
            output,
        } => {
            if let Some(path) = replay {
                let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                let trace = trace_from_json_lines(&text).map_err(|e| e.to_string())?;
                let report = regret_replay(&trace).map_err(|e| e.to_string())?;
                write_out(output.as_deref(), &to_json(&report))?;
                return Ok(report.passed());
            }
            let seeds = match seed_file {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                    parse_seed_list(&text).map_err(|e| format!("{}: {e}", path.display()))?
                }
                None => acceptance_seeds(),
            };
            let suites = match suite {
                Some(s) => vec![match s {
                    SuiteArg::Mechanisms => Suite::Mechanisms,
                    SuiteArg::Projection => Suite::Projection,
                    SuiteArg::Regret => Suite::Regret,
                    SuiteArg::Solvers => Suite::Solvers,
                    SuiteArg::Attacks => Suite::Attacks,
                }],
                None => vec![Suite::Mechanisms, Suite::Projection, Suite::Regret, Suite::Solvers, Suite::Attacks],
            };
            let reports = suites
                .into_iter()
                .map(|s| run_suite(s, &seeds))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            for r in &reports {
                for c in &r.results {
                    eprintln!(
                        "[{}] {}: {} ({:.2}s)",
                        if c.passed { "PASS" } else { "FAIL" },
                        c.name,
                        c.detail,
                        c.runtime.as_secs_f64()
                    );
                }
            }
            write_out(output.as_deref(), &to_json(&reports))?;
            Ok(reports.iter().all(|r| r.passed))
        }
        Command::Bound {
            kind,
            epsilon,
            delta,
            beta,
            sensitivity,
            d,
            m,
            rho,
            output,
        } => {
            let req = BoundRequest {
                kind: match kind {
                    BoundArg::Scalar => BoundKind::Scalar,
                    BoundArg::Row => BoundKind::Row,
                    BoundArg::Column => BoundKind::Column,
                    BoundArg::Objective => BoundKind::Objective,
                    BoundArg::Reconstruction => BoundKind::Reconstruction,
                },
                epsilon,
                delta,
                beta,
                sensitivity,
                d,
                m,
                rho,
            };
            let report = bound_report(&req).map_err(|e| e.to_string())?;
            write_out(output.as_deref(), &to_json(&report))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
