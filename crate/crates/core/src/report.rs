//! Run reports for every solver, the attack lab and the bounds. The command
//! line front end is a thin layer over these functions, so a report is a
//! pure function of (instance, options, seed).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{reconstruction_bound, run_attack_experiment, AttackReport, AttackSolver, GadgetKind, ReconstructionBound};
use crate::constraint_private::{
    setcover_density, solve_constraint_private, ApproxOracle, ConstraintPrivateParams, ExactVertexOracle,
    SetCoverDensity, SetCoverOracle,
};
use crate::error::{invalid, Error, Result};
use crate::low_sensitivity::{
    accuracy_fixed_point, solve_low_sensitivity, BoundDims, ColumnNoise, LowSensKind, LowSensParams,
};
use crate::lp::{
    canonicalize, objective_to_feasibility, rescale_to_simplex, unscale_solution, FeasibilityLp, PrivateLp,
    PublicRegion, SensitivityModel, Solution,
};
use crate::mechanisms::BudgetAudit;
use crate::mw::TraceRecord;
use crate::objective_private::{
    objective_private_alpha_strict, solve_objective_private, PerturbedObjective,
};
use crate::rng::stream;
use crate::verification::{check_feasibility, TrialReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveCommand {
    Constraint,
    Scalar,
    Row,
    Column,
    Objective,
}

impl SolveCommand {
    pub fn cli_name(&self) -> &'static str {
        match self {
            SolveCommand::Constraint => "solve-constraint",
            SolveCommand::Scalar => "solve-scalar",
            SolveCommand::Row => "solve-row",
            SolveCommand::Column => "solve-column",
            SolveCommand::Objective => "solve-objective",
        }
    }

    fn accepts(&self, model: &SensitivityModel) -> bool {
        matches!(
            (self, model),
            (SolveCommand::Constraint, SensitivityModel::HighSensConstraint)
                | (SolveCommand::Scalar, SensitivityModel::LowSensScalar { .. })
                | (SolveCommand::Row, SensitivityModel::LowSensRow { .. })
                | (SolveCommand::Column, SensitivityModel::LowSensColumn { .. })
                | (SolveCommand::Objective, SensitivityModel::LowSensObjective { .. })
        )
    }

    fn expected_model(&self) -> &'static str {
        match self {
            SolveCommand::Constraint => "high_sens_constraint",
            SolveCommand::Scalar => "low_sens_scalar",
            SolveCommand::Row => "low_sens_row",
            SolveCommand::Column => "low_sens_column",
            SolveCommand::Objective => "low_sens_objective",
        }
    }
}

/// Refuses to run a solver on an instance declared under another model.
pub fn check_model(cmd: SolveCommand, model: &SensitivityModel) -> Result<()> {
    if cmd.accepts(model) {
        Ok(())
    } else {
        Err(Error::ModelMismatch(format!(
            "{} requires a {} instance, but the instance declares {}",
            cmd.cli_name(),
            cmd.expected_model(),
            model.name()
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleChoice {
    #[default]
    Setcover,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: Option<f64>,
    pub beta: f64,
    /// Density parameter for the constraint-private solver.
    pub s: Option<usize>,
    pub seed: u64,
    pub trials: usize,
    pub oracle: OracleChoice,
    /// Optimal value for the objective slice, when the instance has `c` but no slice.
    pub opt: Option<f64>,
    /// `||x||_1` bound used to move an orthant instance onto the simplex.
    pub l1_bound: Option<f64>,
    pub column_noise: ColumnNoise,
    pub trace: bool,
}

impl SolveOptions {
    pub fn new(epsilon: f64, delta: f64, seed: u64) -> Self {
        SolveOptions {
            epsilon,
            delta,
            alpha: None,
            beta: 0.1,
            s: None,
            seed,
            trials: 1,
            oracle: OracleChoice::default(),
            opt: None,
            l1_bound: None,
            column_noise: ColumnNoise::default(),
            trace: false,
        }
    }

    fn alpha(&self) -> Result<f64> {
        self.alpha.ok_or_else(|| invalid("alpha", "this solver needs --alpha"))
    }
}

/// Derived quantities echoed in every solve report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub epsilon_prime: f64,
    pub planned_k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    /// Accuracy the run is held to, in the instance's own scale.
    pub alpha: f64,
    /// Accuracy guaranteed by the relevant bound, when it has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_bound_vacuous: Option<bool>,
    /// Objective gap holding with probability `1 - beta` over the draws.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_bound_strict: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<SetCoverDensity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub max_slack: f64,
    pub violated_beyond_alpha: usize,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub command: SolveCommand,
    pub seed: u64,
    pub model: SensitivityModel,
    pub params: SolveOptions,
    pub derived: Derived,
    /// Solution of trial 0.
    pub solution: Solution,
    /// Slack of `solution.x` against the canonical `<=` form of the instance.
    pub slack: TrialReport,
    pub budget: BudgetAudit,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbed_objective: Option<PerturbedObjective>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_of_range_losses: Option<usize>,
    /// One row per trial when more than one was requested.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trials: Vec<TrialSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub successes: Option<usize>,
}

/// Output of one solve: the report and, when requested, the trace of trial 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveRun {
    pub report: SolveReport,
    pub trace: Option<Vec<TraceRecord>>,
}

struct Single {
    solution: Solution,
    derived: Derived,
    audit: BudgetAudit,
    perturbed: Option<PerturbedObjective>,
    out_of_range: Option<usize>,
    trace: Option<Vec<TraceRecord>>,
}

/// The canonical `<=` form every solve report is checked against.
pub fn canonical_lp(cmd: SolveCommand, lp: &PrivateLp, opts: &SolveOptions) -> Result<FeasibilityLp> {
    if cmd == SolveCommand::Constraint {
        if let (Some(opt), Some(_)) = (opts.opt, lp.instance.c()) {
            if *lp.instance.region() == PublicRegion::NonnegativeOrthant {
                return objective_to_feasibility(&lp.instance, opt);
            }
        }
    }
    Ok(canonicalize(&lp.instance)?.0)
}

pub fn solve_report(cmd: SolveCommand, lp: &PrivateLp, opts: &SolveOptions) -> Result<SolveRun> {
    check_model(cmd, &lp.sensitivity)?;
    if opts.trials == 0 {
        return Err(invalid("trials", "need at least one trial"));
    }
    let canon = canonical_lp(cmd, lp, opts)?;
    let runs = (0..opts.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(opts.seed, i as u64);
            let keep_trace = opts.trace && i == 0;
            match cmd {
                SolveCommand::Constraint => run_constraint(&canon, opts, &mut rng, keep_trace),
                SolveCommand::Objective => run_objective(lp, opts, &mut rng),
                _ => run_low_sens(&canon, lp.sensitivity, opts, &mut rng, keep_trace),
            }
        })
        .collect::<Result<Vec<Single>>>()?;

    let summaries: Vec<TrialSummary> = runs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let rep = check_feasibility(&canon, &r.solution.x, r.derived.alpha)?;
            Ok(TrialSummary {
                trial: i,
                max_slack: rep.max_slack,
                violated_beyond_alpha: rep.violated_beyond_alpha,
                success: success(cmd, &r.derived, &rep),
            })
        })
        .collect::<Result<_>>()?;
    let first = runs.into_iter().next().expect("at least one trial");
    let slack = check_feasibility(&canon, &first.solution.x, first.derived.alpha)?.with_ids(opts.seed, 0);
    let many = opts.trials > 1;
    Ok(SolveRun {
        report: SolveReport {
            command: cmd,
            seed: opts.seed,
            model: lp.sensitivity,
            params: opts.clone(),
            derived: first.derived,
            solution: first.solution,
            slack,
            budget: first.audit,
            perturbed_objective: first.perturbed,
            out_of_range_losses: first.out_of_range,
            successes: many.then(|| summaries.iter().filter(|s| s.success).count()),
            trials: if many { summaries } else { Vec::new() },
        },
        trace: first.trace,
    })
}

/// Constraint-private runs succeed with fewer than `s` rows beyond `alpha`;
/// every other solver needs all rows within `alpha`.
fn success(cmd: SolveCommand, derived: &Derived, rep: &TrialReport) -> bool {
    match (cmd, derived.s) {
        (SolveCommand::Constraint, Some(s)) => rep.violated_beyond_alpha < s,
        _ => rep.success,
    }
}

fn run_constraint(
    canon: &FeasibilityLp,
    opts: &SolveOptions,
    rng: &mut crate::rng::SolverRng,
    keep_trace: bool,
) -> Result<Single> {
    let alpha = opts.alpha()?;
    let m = canon.m();
    let (mut oracle, density): (Box<dyn ApproxOracle>, Option<SetCoverDensity>) = match opts.oracle {
        OracleChoice::Exact => (Box::new(ExactVertexOracle::new(canon)?), None),
        OracleChoice::Setcover => {
            let PublicRegion::ObjectiveSlice { c, opt } = canon.region() else {
                return Err(Error::OracleMismatch(
                    "the set-cover oracle needs an objective slice: give the instance a slice region or pass --opt".into(),
                ));
            };
            let density = setcover_density(c, *opt, m, opts.epsilon, opts.delta, alpha, opts.beta)?;
            let s = opts.s.unwrap_or(density.s_run);
            (Box::new(SetCoverOracle::new(c.clone(), *opt, s)?), Some(density))
        }
    };
    let s = match (opts.s, &density) {
        (Some(s), _) => s,
        (None, Some(d)) => d.s_run,
        (None, None) => return Err(invalid("s", "the exact oracle needs --s")),
    };
    let rho = oracle.rho();
    let params = ConstraintPrivateParams {
        epsilon: opts.epsilon,
        delta: opts.delta,
        alpha,
        s,
        rho,
    };
    let out = solve_constraint_private(canon, oracle.as_mut(), &params, rng, keep_trace)?;
    Ok(Single {
        derived: Derived {
            t: Some(out.derived.t),
            eta: Some(out.derived.eta),
            epsilon_prime: out.derived.epsilon_prime,
            planned_k: out.audit.planned_k,
            rho: Some(rho),
            s: Some(s),
            alpha,
            density,
            ..Derived::default()
        },
        solution: out.solution,
        audit: out.audit,
        perturbed: None,
        out_of_range: None,
        trace: out.trace,
    })
}

fn run_low_sens(
    canon: &FeasibilityLp,
    model: SensitivityModel,
    opts: &SolveOptions,
    rng: &mut crate::rng::SolverRng,
    keep_trace: bool,
) -> Result<Single> {
    let kind = LowSensKind::for_model(&model)?;
    let alpha = opts.alpha()?;
    let mut sensitivity = model.delta().unwrap_or(0.0);
    let (work, scale) = match canon.region() {
        PublicRegion::Simplex => (canon.clone(), None),
        PublicRegion::NonnegativeOrthant => {
            let l1 = opts
                .l1_bound
                .ok_or_else(|| invalid("l1_bound", "an orthant instance needs --l1-bound to move onto the simplex"))?;
            if kind == LowSensKind::Scalar {
                sensitivity /= l1;
            }
            (rescale_to_simplex(canon, l1)?, Some(l1))
        }
        PublicRegion::ObjectiveSlice { .. } => {
            return Err(invalid("region", "low-sensitivity solvers do not accept an objective slice"))
        }
    };
    let inner_alpha = scale.map_or(alpha, |l1| alpha / l1);
    let mut params = LowSensParams::new(opts.epsilon, opts.delta, inner_alpha, opts.beta, sensitivity);
    params.column_noise = opts.column_noise;
    let out = solve_low_sensitivity(kind, &work, &params, rng, keep_trace)?;
    let bound_model = match kind {
        LowSensKind::Scalar => SensitivityModel::LowSensScalar { delta_inf: sensitivity },
        LowSensKind::Row => SensitivityModel::LowSensRow { delta_inf: sensitivity },
        LowSensKind::Column => SensitivityModel::LowSensColumn { delta_1: sensitivity },
    };
    let dims = BoundDims {
        d: work.d(),
        m: work.m(),
        rho: out.derived.rho,
    };
    let bound = accuracy_fixed_point(&bound_model, dims, opts.epsilon, opts.delta, opts.beta)?;
    let (x, _) = unscale_solution(&out.solution.x, inner_alpha, scale.unwrap_or(1.0));
    Ok(Single {
        solution: Solution::evaluate(canon, x),
        derived: Derived {
            t: Some(out.derived.t),
            eta: Some(out.derived.eta),
            epsilon_prime: out.derived.epsilon_prime,
            planned_k: out.derived.planned_k,
            rho: Some(out.derived.rho),
            alpha,
            alpha_bound: Some(bound * scale.unwrap_or(1.0)),
            alpha_bound_vacuous: Some(bound >= 1.0),
            l1_bound: scale,
            ..Derived::default()
        },
        audit: out.audit,
        perturbed: None,
        out_of_range: Some(out.out_of_range_losses),
        trace: out.trace,
    })
}

fn run_objective(lp: &PrivateLp, opts: &SolveOptions, rng: &mut crate::rng::SolverRng) -> Result<Single> {
    let delta_1 = lp.sensitivity.delta().unwrap_or(0.0);
    let out = solve_objective_private(&lp.instance, delta_1, opts.epsilon, opts.delta, rng)?;
    let strict = objective_private_alpha_strict(delta_1, lp.instance.d(), opts.epsilon, opts.delta, opts.beta)?;
    Ok(Single {
        derived: Derived {
            epsilon_prime: out.audit.epsilon_prime,
            planned_k: out.audit.planned_k,
            // objective-private solutions are exactly feasible
            alpha: 0.0,
            alpha_bound: Some(out.alpha),
            alpha_bound_strict: Some(strict),
            ..Derived::default()
        },
        solution: out.solution,
        audit: out.audit,
        perturbed: Some(out.perturbed),
        out_of_range: None,
        trace: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRunReport {
    pub seed: u64,
    pub beta: f64,
    #[serde(flatten)]
    pub report: AttackReport,
}

pub fn attack_report(
    gadget: GadgetKind,
    solver: AttackSolver,
    n: usize,
    trials: usize,
    beta: f64,
    seed: u64,
) -> Result<AttackRunReport> {
    Ok(AttackRunReport {
        seed,
        beta,
        report: run_attack_experiment(gadget, solver, n, trials, beta, seed)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Scalar,
    Row,
    Column,
    Objective,
    Reconstruction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRequest {
    pub kind: BoundKind,
    pub epsilon: f64,
    pub delta: f64,
    pub beta: f64,
    /// `Delta_inf` or `Delta_1` as the kind requires.
    pub sensitivity: f64,
    pub d: usize,
    pub m: usize,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub request: BoundRequest,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_strict: Option<f64>,
    pub vacuous: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<ReconstructionBound>,
}

pub fn bound_report(req: &BoundRequest) -> Result<BoundReport> {
    let dims = BoundDims {
        d: req.d,
        m: req.m,
        rho: req.rho,
    };
    let low = |model: SensitivityModel| -> Result<BoundReport> {
        let alpha = accuracy_fixed_point(&model, dims, req.epsilon, req.delta, req.beta)?;
        Ok(BoundReport {
            request: req.clone(),
            alpha: Some(alpha),
            alpha_strict: None,
            vacuous: alpha >= 1.0,
            reconstruction: None,
        })
    };
    match req.kind {
        BoundKind::Scalar => low(SensitivityModel::LowSensScalar { delta_inf: req.sensitivity }),
        BoundKind::Row => low(SensitivityModel::LowSensRow { delta_inf: req.sensitivity }),
        BoundKind::Column => low(SensitivityModel::LowSensColumn { delta_1: req.sensitivity }),
        BoundKind::Objective => Ok(BoundReport {
            request: req.clone(),
            alpha: Some(crate::objective_private::objective_private_alpha(
                req.sensitivity,
                req.d,
                req.epsilon,
                req.delta,
            )?),
            alpha_strict: Some(objective_private_alpha_strict(req.sensitivity, req.d, req.epsilon, req.delta, req.beta)?),
            vacuous: false,
            reconstruction: None,
        }),
        BoundKind::Reconstruction => {
            let c = reconstruction_bound(req.epsilon, req.delta, req.beta)?;
            Ok(BoundReport {
                request: req.clone(),
                alpha: None,
                alpha_strict: None,
                vacuous: c.vacuous,
                reconstruction: Some(c),
            })
        }
    }
}

/// Pretty JSON with a trailing newline; the byte format of every report.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}
