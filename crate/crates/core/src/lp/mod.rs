//! Linear-program representations and the reductions every solver relies on:
//! canonical `Ax <= b` form, rescaling onto the simplex, width, and the
//! binary search that turns optimization into a sequence of feasibility
//! problems.

mod file;
mod matrix;

pub use file::{InstanceFile, PrivateLp};
pub use matrix::{dot, Matrix};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mechanisms::PrivacyBudget;

/// Absolute tolerance used when testing membership of a point in a public region.
pub const REGION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// The public (data-independent) part of the feasible set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PublicRegion {
    #[default]
    NonnegativeOrthant,
    Simplex,
    /// `{x >= 0 : c^T x = opt}`.
    ObjectiveSlice { c: Vec<f64>, opt: f64 },
}

impl PublicRegion {
    pub fn validate(&self, d: usize) -> Result<()> {
        if let PublicRegion::ObjectiveSlice { c, opt } = self {
            if c.len() != d {
                return Err(Error::Dimension(format!(
                    "objective slice has {} coefficients for {d} variables",
                    c.len()
                )));
            }
            if !opt.is_finite() || c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("objective slice"));
            }
            if c.iter().all(|&v| v == 0.0) {
                return Err(invalid("c", "objective slice needs a nonzero objective"));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.iter().any(|&v| !v.is_finite() || v < -tol) {
            return false;
        }
        match self {
            PublicRegion::NonnegativeOrthant => true,
            PublicRegion::Simplex => (x.iter().sum::<f64>() - 1.0).abs() <= tol,
            PublicRegion::ObjectiveSlice { c, opt } => {
                (dot(c, x) - opt).abs() <= tol * opt.abs().max(1.0)
            }
        }
    }

    /// Extreme points of a bounded region, in coordinate order.
    ///
    /// For an objective slice these are `(opt / c_j) e_j`, which requires a
    /// strictly positive cost vector and `opt >= 0`.
    pub fn vertices(&self, d: usize) -> Result<Vec<Vec<f64>>> {
        match self {
            PublicRegion::NonnegativeOrthant => Err(invalid(
                "region",
                "the nonnegative orthant is unbounded and has no vertex set",
            )),
            PublicRegion::Simplex => Ok((0..d).map(|j| unit(d, j, 1.0)).collect()),
            PublicRegion::ObjectiveSlice { c, opt } => {
                if c.iter().any(|&v| v <= 0.0) || *opt < 0.0 {
                    return Err(invalid(
                        "region",
                        "objective slice vertices need positive costs and opt >= 0",
                    ));
                }
                Ok(c.iter().enumerate().map(|(j, &cj)| unit(d, j, opt / cj)).collect())
            }
        }
    }
}

fn unit(d: usize, j: usize, scale: f64) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[j] = scale;
    v
}

/// How neighbouring databases may change the LP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SensitivityModel {
    HighSensConstraint,
    LowSensScalar { delta_inf: f64 },
    LowSensRow { delta_inf: f64 },
    LowSensColumn { delta_1: f64 },
    LowSensObjective { delta_1: f64 },
    HighSensScalar,
    HighSensColumn,
    HighSensObjective,
}

impl SensitivityModel {
    pub fn delta(&self) -> Option<f64> {
        match *self {
            SensitivityModel::LowSensScalar { delta_inf }
            | SensitivityModel::LowSensRow { delta_inf } => Some(delta_inf),
            SensitivityModel::LowSensColumn { delta_1 }
            | SensitivityModel::LowSensObjective { delta_1 } => Some(delta_1),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SensitivityModel::HighSensConstraint => "high_sens_constraint",
            SensitivityModel::LowSensScalar { .. } => "low_sens_scalar",
            SensitivityModel::LowSensRow { .. } => "low_sens_row",
            SensitivityModel::LowSensColumn { .. } => "low_sens_column",
            SensitivityModel::LowSensObjective { .. } => "low_sens_objective",
            SensitivityModel::HighSensScalar => "high_sens_scalar",
            SensitivityModel::HighSensColumn => "high_sens_column",
            SensitivityModel::HighSensObjective => "high_sens_objective",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.delta() {
            Some(d) if !d.is_finite() || d < 0.0 => {
                Err(invalid("sensitivity", format!("delta must be finite and >= 0, got {d}")))
            }
            _ => Ok(()),
        }
    }
}

/// A general LP: optional objective (maximized), rows with senses, and
/// nonnegative lower bounds on the variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LpInstance {
    a: Matrix,
    b: Vec<f64>,
    c: Option<Vec<f64>>,
    senses: Vec<Sense>,
    var_lower: Vec<f64>,
    region: PublicRegion,
}

impl LpInstance {
    pub fn new(a: Matrix, b: Vec<f64>, c: Option<Vec<f64>>, senses: Vec<Sense>) -> Result<Self> {
        let d = a.cols();
        let inst = LpInstance {
            var_lower: vec![0.0; d],
            a,
            b,
            c,
            senses,
            region: PublicRegion::NonnegativeOrthant,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// All rows `<=`, no objective.
    pub fn feasibility(a: Matrix, b: Vec<f64>) -> Result<Self> {
        let m = a.rows();
        LpInstance::new(a, b, None, vec![Sense::Le; m])
    }

    pub fn with_region(mut self, region: PublicRegion) -> Result<Self> {
        region.validate(self.d())?;
        self.region = region;
        Ok(self)
    }

    pub fn with_var_lower(mut self, lower: Vec<f64>) -> Result<Self> {
        self.var_lower = lower;
        self.validate()?;
        Ok(self)
    }

    pub fn with_objective(mut self, c: Vec<f64>) -> Result<Self> {
        self.c = Some(c);
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let (m, d) = (self.a.rows(), self.a.cols());
        if m == 0 || d == 0 {
            return Err(Error::Empty("LP needs at least one row and one column"));
        }
        if self.b.len() != m || self.senses.len() != m {
            return Err(Error::Dimension(format!(
                "A is {m}x{d} but b has {} entries and {} senses",
                self.b.len(),
                self.senses.len()
            )));
        }
        if self.var_lower.len() != d {
            return Err(Error::Dimension("var_lower length differs from d".into()));
        }
        if let Some(c) = &self.c {
            if c.len() != d {
                return Err(Error::Dimension(format!("c has {} entries, expected {d}", c.len())));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("c"));
            }
        }
        if !self.a.all_finite() {
            return Err(Error::NonFinite("A"));
        }
        if self.b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("b"));
        }
        if self.var_lower.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("var_lower", "lower bounds must be finite and >= 0"));
        }
        self.region.validate(d)
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn d(&self) -> usize {
        self.a.cols()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> Option<&[f64]> {
        self.c.as_deref()
    }

    pub fn senses(&self) -> &[Sense] {
        &self.senses
    }

    pub fn var_lower(&self) -> &[f64] {
        &self.var_lower
    }

    pub fn region(&self) -> &PublicRegion {
        &self.region
    }

    /// Checks every row (and lower bound) of the original form at tolerance `tol`.
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.d() {
            return false;
        }
        let rows_ok = self.a.iter_rows().zip(&self.b).zip(&self.senses).all(|((row, &bi), s)| {
            let lhs = dot(row, x);
            match s {
                Sense::Le => lhs <= bi + tol,
                Sense::Ge => lhs >= bi - tol,
                Sense::Eq => (lhs - bi).abs() <= tol,
            }
        });
        rows_ok
            && x.iter().zip(&self.var_lower).all(|(&xi, &l)| xi >= l - tol)
            && self.region.contains(x, tol)
    }
}

/// Canonical "find x in K with Ax <= b".
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityLp {
    a: Matrix,
    b: Vec<f64>,
    region: PublicRegion,
}

impl FeasibilityLp {
    pub fn new(a: Matrix, b: Vec<f64>, region: PublicRegion) -> Result<Self> {
        if a.rows() == 0 || a.cols() == 0 {
            return Err(Error::Empty("LP needs at least one row and one column"));
        }
        if b.len() != a.rows() {
            return Err(Error::Dimension(format!(
                "A has {} rows but b has {} entries",
                a.rows(),
                b.len()
            )));
        }
        if !a.all_finite() {
            return Err(Error::NonFinite("A"));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("b"));
        }
        region.validate(a.cols())?;
        Ok(FeasibilityLp { a, b, region })
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn d(&self) -> usize {
        self.a.cols()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn region(&self) -> &PublicRegion {
        &self.region
    }

    /// Per-row `A_i x - b_i`.
    pub fn slack(&self, x: &[f64]) -> Vec<f64> {
        self.a.iter_rows().zip(&self.b).map(|(r, bi)| dot(r, x) - bi).collect()
    }

    /// Back to a general instance with all rows `<=` and the same region.
    pub fn to_instance(&self) -> LpInstance {
        LpInstance {
            a: self.a.clone(),
            b: self.b.clone(),
            c: None,
            senses: vec![Sense::Le; self.m()],
            var_lower: vec![0.0; self.d()],
            region: self.region.clone(),
        }
    }
}

/// Where a canonical row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowOrigin {
    Row { index: usize, negated: bool },
    LowerBound { var: usize },
}

/// Rewrites every row as `<=`: `>=` rows are negated, `=` rows become a pair.
/// Positive lower bounds become `-x_j <= -l_j` rows.
pub fn canonicalize(instance: &LpInstance) -> Result<(FeasibilityLp, Vec<RowOrigin>)> {
    instance.validate()?;
    let d = instance.d();
    let mut a = Matrix::zeros(0, d);
    let mut b = Vec::with_capacity(instance.m());
    let mut origin = Vec::with_capacity(instance.m());
    let mut push = |row: &[f64], rhs: f64, negated: bool, o: RowOrigin| -> Result<()> {
        if negated {
            let neg: Vec<f64> = row.iter().map(|v| -v).collect();
            a.push_row(&neg)?;
            b.push(-rhs);
        } else {
            a.push_row(row)?;
            b.push(rhs);
        }
        origin.push(o);
        Ok(())
    };
    for (i, ((row, &bi), sense)) in instance
        .a
        .iter_rows()
        .zip(&instance.b)
        .zip(&instance.senses)
        .enumerate()
    {
        match sense {
            Sense::Le => push(row, bi, false, RowOrigin::Row { index: i, negated: false })?,
            Sense::Ge => push(row, bi, true, RowOrigin::Row { index: i, negated: true })?,
            Sense::Eq => {
                push(row, bi, false, RowOrigin::Row { index: i, negated: false })?;
                push(row, bi, true, RowOrigin::Row { index: i, negated: true })?;
            }
        }
    }
    for (j, &l) in instance.var_lower.iter().enumerate() {
        if l > 0.0 {
            push(&unit(d, j, 1.0), l, true, RowOrigin::LowerBound { var: j })?;
        }
    }
    let lp = FeasibilityLp::new(a, b, instance.region.clone())?;
    Ok((lp, origin))
}

/// Divides the right-hand side by `l1_bound` and restricts the search to the
/// simplex. A point feasible for the result within `alpha` maps back (times
/// `l1_bound`) to a point feasible for the input within `l1_bound * alpha`.
pub fn rescale_to_simplex(lp: &FeasibilityLp, l1_bound: f64) -> Result<FeasibilityLp> {
    if !(l1_bound > 0.0 && l1_bound.is_finite()) {
        return Err(invalid("l1_bound", format!("must be positive, got {l1_bound}")));
    }
    let b = lp.b.iter().map(|v| v / l1_bound).collect();
    FeasibilityLp::new(lp.a.clone(), b, PublicRegion::Simplex)
}

/// Inverse of [`rescale_to_simplex`] on a solution and its accuracy.
pub fn unscale_solution(x: &[f64], alpha: f64, l1_bound: f64) -> (Vec<f64>, f64) {
    (x.iter().map(|v| v * l1_bound).collect(), alpha * l1_bound)
}

/// Width: max over the supplied points of `||Ax - b||_inf`.
pub fn width(lp: &FeasibilityLp, vertices: &[Vec<f64>]) -> Result<f64> {
    if vertices.is_empty() {
        return Err(Error::Empty("vertex set"));
    }
    let mut rho: f64 = 0.0;
    for v in vertices {
        if v.len() != lp.d() {
            return Err(Error::Dimension("vertex length differs from d".into()));
        }
        if !lp.region.contains(v, REGION_TOL) {
            return Err(invalid("vertices", format!("{v:?} is outside the public region")));
        }
        rho = lp.slack(v).iter().fold(rho, |acc, s| acc.max(s.abs()));
    }
    Ok(rho)
}

/// Feasibility version of `max c^T x` at a guessed optimum: the constraints
/// are kept (canonicalized) and the region becomes `{x >= 0 : c^T x = guess}`.
pub fn objective_to_feasibility(lp: &LpInstance, opt_guess: f64) -> Result<FeasibilityLp> {
    let c = lp.c.clone().ok_or(Error::MissingObjective)?;
    let (canon, _) = canonicalize(lp)?;
    let region = PublicRegion::ObjectiveSlice { c, opt: opt_guess };
    FeasibilityLp::new(canon.a, canon.b, region)
}

/// Row with the largest `A_i x - b_i`; ties go to the lowest index.
pub fn max_violation(lp: &FeasibilityLp, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, s) in lp.slack(x).into_iter().enumerate() {
        if s > best.1 {
            best = (i, s);
        }
    }
    best
}

/// A candidate point together with its slack report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub per_constraint_slack: Vec<f64>,
    pub objective_value: Option<f64>,
}

impl Solution {
    pub fn evaluate(lp: &FeasibilityLp, x: Vec<f64>) -> Self {
        let per_constraint_slack = lp.slack(&x);
        Solution {
            x,
            per_constraint_slack,
            objective_value: None,
        }
    }

    pub fn with_objective(mut self, c: &[f64]) -> Self {
        self.objective_value = Some(dot(c, &self.x));
        self
    }

    /// Rows with slack strictly greater than `alpha`.
    pub fn violated_beyond(&self, alpha: f64) -> Vec<usize> {
        self.per_constraint_slack
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > alpha)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn max_slack(&self) -> f64 {
        self.per_constraint_slack.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Anything that can declare a feasibility LP feasible (returning a witness)
/// using the budget it is handed.
pub trait FeasibilitySolver {
    fn solve(&mut self, lp: &FeasibilityLp, budget: &mut PrivacyBudget) -> Result<Option<Solution>>;
}

impl<F> FeasibilitySolver for F
where
    F: FnMut(&FeasibilityLp, &mut PrivacyBudget) -> Result<Option<Solution>>,
{
    fn solve(&mut self, lp: &FeasibilityLp, budget: &mut PrivacyBudget) -> Result<Option<Solution>> {
        self(lp, budget)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptSearch {
    pub estimate: f64,
    pub solution: Solution,
    /// `(guess, declared feasible)` in call order.
    pub calls: Vec<(f64, bool)>,
}

/// Number of feasibility calls the search makes on `[lo, hi]` at resolution `tol`.
pub fn search_calls(lo: f64, hi: f64, tol: f64) -> usize {
    if hi == lo {
        1
    } else {
        ((hi - lo) / tol).log2().ceil().max(1.0) as usize
    }
}

/// Bisection on the optimal value, keeping the largest guess declared feasible.
///
/// The budget is split evenly across the calls (basic composition): each call
/// receives `(epsilon / k, delta / k)` and the parent ledger records one charge
/// per call.
pub fn binary_search_opt(
    lp: &LpInstance,
    solver: &mut dyn FeasibilitySolver,
    lo: f64,
    hi: f64,
    tol: f64,
    budget: &mut PrivacyBudget,
) -> Result<OptSearch> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(invalid("lo/hi", format!("need finite lo <= hi, got [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    if lp.c.is_none() {
        return Err(Error::MissingObjective);
    }
    let k = search_calls(lo, hi, tol);
    let (eps_call, delta_call) = budget.plan_even_split(k)?;
    let mut calls = Vec::with_capacity(k);
    let mut best: Option<(f64, Solution)> = None;

    let mut probe = |guess: f64, budget: &mut PrivacyBudget| -> Result<bool> {
        let flp = objective_to_feasibility(lp, guess)?;
        budget.charge(format!("opt-search guess={guess}"), eps_call)?;
        let mut sub = PrivacyBudget::new(eps_call, delta_call)?;
        let out = solver.solve(&flp, &mut sub)?;
        let feasible = out.is_some();
        calls.push((guess, feasible));
        if let Some(sol) = out {
            if best.as_ref().is_none_or(|(g, _)| guess > *g) {
                best = Some((guess, sol));
            }
        }
        Ok(feasible)
    };

    if k == 1 && lo == hi {
        probe(lo, budget)?;
    } else {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..k {
            let mid = 0.5 * (a + b);
            if probe(mid, budget)? {
                a = mid;
            } else {
                b = mid;
            }
        }
    }
    let (estimate, solution) = best.ok_or(Error::NoFeasibleGuess { lo, hi })?;
    Ok(OptSearch {
        estimate,
        solution,
        calls,
    })
}
