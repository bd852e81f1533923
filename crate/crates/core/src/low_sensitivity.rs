//! Low-sensitivity solvers over primal multiplicative weights.
//!
//! The candidate solution is a distribution over the `d` variables. Each
//! round a private dual oracle (the exponential mechanism over constraint
//! slacks) picks a nearly most-violated row `p`, and the row becomes the
//! loss. Scalar privacy protects `b` and needs only the private oracle;
//! row and column privacy protect `A` and add Laplace noise to the loss.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lp::{FeasibilityLp, Matrix, PublicRegion, SensitivityModel, Solution};
use crate::mechanisms::{exponential_mechanism, laplace_noise, BudgetAudit, PrivacyBudget, QualityScore};
use crate::mw::{rounds, step_size, EngineKind, MwEngine, TraceRecord};

/// Exponential mechanism over constraints with quality `A_i x - b_i`.
///
/// A zero sensitivity returns the exact argmax (lowest index on ties) and
/// consumes no randomness.
pub fn exp_mech_dual_oracle<R: Rng + ?Sized>(
    a: &Matrix,
    b: &[f64],
    x: &[f64],
    epsilon_prime: f64,
    sensitivity: f64,
    rng: &mut R,
) -> Result<usize> {
    let slack: Vec<f64> = a.iter_rows().zip(b).map(|(r, bi)| crate::lp::dot(r, x) - bi).collect();
    if slack.is_empty() {
        return Err(Error::Empty("constraint set"));
    }
    if sensitivity == 0.0 {
        let mut best = 0;
        for (i, &s) in slack.iter().enumerate() {
            if s > slack[best] {
                best = i;
            }
        }
        return Ok(best);
    }
    let q = QualityScore::new(slack, sensitivity)?;
    exponential_mechanism(&q, epsilon_prime, rng)
}

/// `(2 Delta / epsilon') ln(m / gamma)`.
pub fn dual_oracle_alpha(m: usize, epsilon_prime: f64, sensitivity: f64, gamma: f64) -> f64 {
    2.0 * sensitivity / epsilon_prime * (m as f64 / gamma).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowSensKind {
    Scalar,
    Row,
    Column,
}

impl LowSensKind {
    pub fn for_model(model: &SensitivityModel) -> Result<Self> {
        match model {
            SensitivityModel::LowSensScalar { .. } => Ok(LowSensKind::Scalar),
            SensitivityModel::LowSensRow { .. } => Ok(LowSensKind::Row),
            SensitivityModel::LowSensColumn { .. } => Ok(LowSensKind::Column),
            other => Err(Error::ModelMismatch(format!(
                "{} has no primal multiplicative-weights solver",
                other.name()
            ))),
        }
    }
}

/// How the column solver perturbs a selected row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnNoise {
    /// Independent `Lap(Delta_1 / epsilon')` per coordinate: one vector Laplace
    /// mechanism on a row with `l1` sensitivity `Delta_1`.
    #[default]
    PerCoordinate,
    /// One scalar draw added to every coordinate. A constant shift of the
    /// loss leaves the multiplicative-weights distribution unchanged, so this
    /// reading offers no protection for the row; kept for comparison.
    SharedDraw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowSensParams {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `Delta_inf` for scalar and row privacy, `Delta_1` for column privacy.
    pub sensitivity: f64,
    /// Replaces the composed per-step epsilon. Runs with an override carry no
    /// privacy claim and charge nothing.
    #[serde(default)]
    pub epsilon_prime_override: Option<f64>,
    #[serde(default)]
    pub column_noise: ColumnNoise,
}

impl LowSensParams {
    pub fn new(epsilon: f64, delta: f64, alpha: f64, beta: f64, sensitivity: f64) -> Self {
        LowSensParams {
            epsilon,
            delta,
            alpha,
            beta,
            sensitivity,
            epsilon_prime_override: None,
            column_noise: ColumnNoise::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowSensDerived {
    pub t: usize,
    pub eta: f64,
    /// Per-step epsilon from composition over `planned_k` mechanisms.
    pub epsilon_prime: f64,
    /// The epsilon actually used by the mechanisms.
    pub epsilon_prime_used: f64,
    pub planned_k: usize,
    /// Loss scale: `max |A_ij|` for scalar privacy, 2 for row and column.
    pub rho: f64,
    /// `beta / T` for scalar, `beta / (2 d T)` for row and column.
    pub gamma: f64,
    /// Dual-oracle accuracy at `gamma`.
    pub alpha_dual: f64,
    /// Non-private bound `3 rho (eta + ln d / (eta T))`.
    pub alpha_pst: f64,
}

/// Scalar rounds `ceil(9 rho^2 ln d / alpha^2)`.
pub fn scalar_rounds(rho: f64, d: usize, alpha: f64) -> usize {
    rounds(9.0 * rho * rho * (d as f64).ln() / (alpha * alpha), d)
}

/// Row and column rounds `ceil(144 ln d / alpha^2)`.
pub fn row_rounds(d: usize, alpha: f64) -> usize {
    rounds(144.0 * (d as f64).ln() / (alpha * alpha), d)
}

fn check_common(p: &LowSensParams) -> Result<()> {
    if !(p.epsilon > 0.0 && p.epsilon.is_finite()) {
        return Err(invalid("epsilon", format!("must be positive, got {}", p.epsilon)));
    }
    if !(p.delta > 0.0 && p.delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0, 1), got {}", p.delta)));
    }
    if !(p.beta > 0.0 && p.beta < 1.0) {
        return Err(invalid("beta", format!("must lie in (0, 1), got {}", p.beta)));
    }
    if !(p.alpha > 0.0 && p.alpha.is_finite()) {
        return Err(invalid("alpha", format!("must be positive, got {}", p.alpha)));
    }
    if !(p.sensitivity >= 0.0 && p.sensitivity.is_finite()) {
        return Err(invalid("sensitivity", format!("must be finite and >= 0, got {}", p.sensitivity)));
    }
    if let Some(e) = p.epsilon_prime_override {
        if !(e > 0.0 && e.is_finite()) {
            return Err(invalid("epsilon_prime_override", format!("must be positive, got {e}")));
        }
    }
    Ok(())
}

/// Derived round count, step size and per-step privacy for one solver.
pub fn derive(kind: LowSensKind, lp: &FeasibilityLp, p: &LowSensParams) -> Result<LowSensDerived> {
    check_common(p)?;
    if *lp.region() != PublicRegion::Simplex {
        return Err(invalid(
            "region",
            "low-sensitivity solvers search the simplex; rescale the instance first",
        ));
    }
    let (d, m) = (lp.d(), lp.m());
    let ln_delta = (1.0 / p.delta).ln();
    let (t, rho, planned_k, epsilon_prime, gamma) = match kind {
        LowSensKind::Scalar => {
            let max = lp.a().max_abs();
            let rho = if max > 0.0 { max } else { 1.0 };
            let t = scalar_rounds(rho, d, p.alpha);
            let eps = p.epsilon / (8.0 * t as f64 * ln_delta).sqrt();
            (t, rho, t, eps, p.beta / t as f64)
        }
        LowSensKind::Row | LowSensKind::Column => {
            if p.alpha >= 1.0 {
                return Err(invalid("alpha", format!("row and column solvers need alpha < 1, got {}", p.alpha)));
            }
            if lp.a().max_abs() > 1.0 {
                return Err(invalid("A", "row and column solvers need every entry of A in [-1, 1]"));
            }
            let t = row_rounds(d, p.alpha);
            let (k, eps) = if kind == LowSensKind::Row {
                (2 * d * t, p.epsilon / (4.0 * (d as f64 * t as f64 * ln_delta).sqrt()))
            } else {
                (2 * t, p.epsilon / (4.0 * (t as f64 * ln_delta).sqrt()))
            };
            (t, 2.0, k, eps, p.beta / (2 * d * t) as f64)
        }
    };
    let eta = step_size(d, t);
    let epsilon_prime_used = p.epsilon_prime_override.unwrap_or(epsilon_prime);
    let alpha_pst = if eta > 0.0 {
        3.0 * rho * (eta + (d as f64).ln() / (eta * t as f64))
    } else {
        0.0
    };
    Ok(LowSensDerived {
        t,
        eta,
        epsilon_prime,
        epsilon_prime_used,
        planned_k,
        rho,
        gamma,
        alpha_dual: dual_oracle_alpha(m, epsilon_prime_used, p.sensitivity, gamma),
        alpha_pst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowSensOutcome {
    pub kind: LowSensKind,
    pub solution: Solution,
    /// Rows with `A_i x - b_i > alpha`.
    pub violated: Vec<usize>,
    pub derived: LowSensDerived,
    /// False when an epsilon override was used.
    pub private: bool,
    pub audit: BudgetAudit,
    /// Noisy loss coordinates with `|l| > 1`, passed through unclamped.
    pub out_of_range_losses: usize,
    pub max_abs_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRecord>>,
}

pub fn solve_scalar_private<R: Rng + ?Sized>(lp: &FeasibilityLp, params: &LowSensParams, rng: &mut R, trace: bool) -> Result<LowSensOutcome> {
    solve_low_sensitivity(LowSensKind::Scalar, lp, params, rng, trace)
}

pub fn solve_row_private<R: Rng + ?Sized>(lp: &FeasibilityLp, params: &LowSensParams, rng: &mut R, trace: bool) -> Result<LowSensOutcome> {
    solve_low_sensitivity(LowSensKind::Row, lp, params, rng, trace)
}

pub fn solve_column_private<R: Rng + ?Sized>(lp: &FeasibilityLp, params: &LowSensParams, rng: &mut R, trace: bool) -> Result<LowSensOutcome> {
    solve_low_sensitivity(LowSensKind::Column, lp, params, rng, trace)
}

/// Runs `T` rounds of primal multiplicative weights and returns the average
/// of the distributions played.
pub fn solve_low_sensitivity<R: Rng + ?Sized>(
    kind: LowSensKind,
    lp: &FeasibilityLp,
    params: &LowSensParams,
    rng: &mut R,
    keep_trace: bool,
) -> Result<LowSensOutcome> {
    let derived = derive(kind, lp, params)?;
    let private = params.epsilon_prime_override.is_none();
    let mut budget = PrivacyBudget::new(params.epsilon, params.delta)?;
    budget.plan_advanced(derived.planned_k)?;
    // the audit records the composed epsilon even when an override is used
    budget_consistency(&budget, &derived)?;

    let d = lp.d();
    let eps = derived.epsilon_prime_used;
    let noise_scale = if params.sensitivity == 0.0 { 0.0 } else { params.sensitivity / eps };
    let mut engine = MwEngine::new(d, derived.eta)?;
    let mut sum = vec![0.0; d];
    let mut trace = keep_trace.then(Vec::new);
    let mut out_of_range = 0;
    let mut max_abs_loss: f64 = 0.0;
    let charge = |budget: &mut PrivacyBudget, label: String| -> Result<()> {
        if private {
            budget.charge(label, derived.epsilon_prime)
        } else {
            Ok(())
        }
    };

    for t in 1..=derived.t {
        let x = engine.distribution();
        charge(&mut budget, format!("dual oracle round {t}"))?;
        let p = exp_mech_dual_oracle(lp.a(), lp.b(), &x, eps, params.sensitivity, rng)?;
        let row = lp.a().row(p);
        let loss: Vec<f64> = match kind {
            LowSensKind::Scalar => row.iter().map(|a| a / derived.rho).collect(),
            LowSensKind::Row => {
                let mut l = Vec::with_capacity(d);
                for (i, a) in row.iter().enumerate() {
                    charge(&mut budget, format!("loss noise round {t} coordinate {i}"))?;
                    l.push((a + laplace_noise(noise_scale, rng)?) / 2.0);
                }
                l
            }
            LowSensKind::Column => {
                charge(&mut budget, format!("loss noise round {t}"))?;
                match params.column_noise {
                    ColumnNoise::PerCoordinate => row
                        .iter()
                        .map(|a| Ok((a + laplace_noise(noise_scale, rng)?) / 2.0))
                        .collect::<Result<_>>()?,
                    ColumnNoise::SharedDraw => {
                        let nu = laplace_noise(noise_scale, rng)?;
                        row.iter().map(|a| (a + nu) / 2.0).collect()
                    }
                }
            }
        };
        for l in &loss {
            max_abs_loss = max_abs_loss.max(l.abs());
            if l.abs() > 1.0 {
                out_of_range += 1;
            }
        }
        engine.update(&loss)?;
        for (s, v) in sum.iter_mut().zip(&x) {
            *s += v;
        }
        if let Some(tr) = trace.as_mut() {
            tr.push(TraceRecord {
                t,
                engine: EngineKind::Mw,
                eta: derived.eta,
                density_param: None,
                distribution: x,
                loss,
            });
        }
    }

    let x_bar: Vec<f64> = sum.into_iter().map(|v| v / derived.t as f64).collect();
    let solution = Solution::evaluate(lp, x_bar);
    Ok(LowSensOutcome {
        kind,
        violated: solution.violated_beyond(params.alpha),
        solution,
        derived,
        private,
        audit: budget.audit(),
        out_of_range_losses: out_of_range,
        max_abs_loss,
        trace,
    })
}

fn budget_consistency(budget: &PrivacyBudget, derived: &LowSensDerived) -> Result<()> {
    let planned = budget.epsilon_prime().unwrap_or(0.0);
    let rel = (planned - derived.epsilon_prime).abs() / derived.epsilon_prime;
    if rel > 1e-12 {
        return Err(invalid(
            "epsilon_prime",
            format!("solver formula {} disagrees with composition {planned}", derived.epsilon_prime),
        ));
    }
    Ok(())
}

/// Problem dimensions entering the accuracy bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundDims {
    pub d: usize,
    pub m: usize,
    /// Width `max |A_ij|`; used by the scalar bound only.
    pub rho: f64,
}

/// The bounds share the shape `alpha = K sqrt(ln(C / alpha^2))`.
fn bound_constants(model: &SensitivityModel, dims: BoundDims, epsilon: f64, delta: f64, beta: f64) -> Result<(f64, f64)> {
    if dims.d == 0 || dims.m == 0 {
        return Err(Error::Empty("bound dimensions"));
    }
    if !(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) || !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("epsilon/delta/beta", "need epsilon > 0 and delta, beta in (0, 1)"));
    }
    model.validate()?;
    let (d, m) = (dims.d as f64, dims.m as f64);
    let (ln_d, ln_delta) = (d.ln(), (1.0 / delta).ln());
    Ok(match *model {
        SensitivityModel::LowSensScalar { delta_inf } => {
            let rho = dims.rho;
            if !(rho > 0.0) {
                return Err(invalid("rho", "scalar bound needs a positive width"));
            }
            let k2 = 18.0 * rho * delta_inf * (8.0 * ln_d * ln_delta).sqrt() / epsilon;
            (k2.sqrt(), 9.0 * rho * rho * ln_d * m / beta)
        }
        SensitivityModel::LowSensRow { delta_inf } => (
            12.0 * delta_inf.sqrt() * d.powf(0.25) * ln_d.powf(0.25) * ln_delta.powf(0.25) / epsilon.sqrt(),
            288.0 * d * ln_d * m / beta,
        ),
        SensitivityModel::LowSensColumn { delta_1 } => (
            12.0 * delta_1.sqrt() * ln_d.powf(0.25) * ln_delta.powf(0.25) / epsilon.sqrt(),
            288.0 * m * ln_d / beta,
        ),
        other => {
            return Err(Error::ModelMismatch(format!(
                "no accuracy bound for {}",
                other.name()
            )))
        }
    })
}

/// Right-hand side of the accuracy inequality evaluated at `alpha`.
pub fn accuracy_rhs(model: &SensitivityModel, dims: BoundDims, epsilon: f64, delta: f64, beta: f64, alpha: f64) -> Result<f64> {
    let (k, c) = bound_constants(model, dims, epsilon, delta, beta)?;
    Ok(k * (c / (alpha * alpha)).ln().max(0.0).sqrt())
}

/// Smallest `alpha` satisfying the self-referential inequality, whether or
/// not it is below 1.
///
/// `u = alpha^2` solves `u = K^2 ln(C / u)`, whose residual is increasing in
/// `u`; the root is bracketed in `(0, C)` and found by bisection on `ln u`.
pub fn accuracy_fixed_point(model: &SensitivityModel, dims: BoundDims, epsilon: f64, delta: f64, beta: f64) -> Result<f64> {
    let (k, c) = bound_constants(model, dims, epsilon, delta, beta)?;
    if k == 0.0 || c <= 1.0 && c.ln() <= 0.0 {
        return Ok(0.0);
    }
    let k2 = k * k;
    let residual = |log_u: f64| log_u.exp() - k2 * (c.ln() - log_u);
    let (mut lo, mut hi) = (c.ln() - 1400.0, c.ln());
    if residual(lo) > 0.0 {
        return Ok((lo.exp()).sqrt());
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok((0.5 * hi).exp())
}

/// Accuracy guaranteed with probability `1 - beta`, or
/// [`Error::VacuousBound`] when the fixed point is not below 1.
pub fn accuracy_bound(model: &SensitivityModel, dims: BoundDims, epsilon: f64, delta: f64, beta: f64) -> Result<f64> {
    let alpha = accuracy_fixed_point(model, dims, epsilon, delta, beta)?;
    if alpha >= 1.0 {
        return Err(Error::VacuousBound { alpha });
    }
    Ok(alpha)
}
