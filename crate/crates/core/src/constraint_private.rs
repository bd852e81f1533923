//! Constraint-private feasibility: dense multiplicative weights over the
//! constraints, paired with a private best-response oracle over the public
//! region. Each round the oracle sees only the projected (hence `1/s`-dense)
//! distribution, so one added or removed constraint moves its input by at
//! most `2/s` in `l1`.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lp::{dot, FeasibilityLp, PublicRegion, Solution, REGION_TOL};
use crate::mechanisms::{exponential_mechanism, BudgetAudit, PrivacyBudget, QualityScore};
use crate::mw::{rounds, step_size, DenseDistribution, DmwEngine, EngineKind, TraceRecord};

/// A best-response oracle over the public region `K`.
///
/// Contract: with probability `1 - beta_oracle` the returned `x` lies in `K`,
/// nearly minimizes `sum_i y_i A_i x` over `K`, and satisfies
/// `||Ax - b||_inf <= rho`. A private oracle must be `epsilon_prime`-private
/// with respect to inputs `y, y'` with `||y||_inf, ||y'||_inf <= 1/s`,
/// `||y - y'||_1 <= 2/s`, and one extra constraint row. That obligation is
/// documented, not checked.
pub trait ApproxOracle {
    fn name(&self) -> &'static str;

    /// Declared width bound `rho`.
    fn rho(&self) -> f64;

    fn is_private(&self) -> bool;

    /// Declared additive accuracy at per-call failure probability `gamma`,
    /// or `None` when the oracle is exact.
    fn alpha(&self, epsilon_prime: f64, gamma: f64) -> Option<f64>;

    fn best_response(
        &mut self,
        y: &DenseDistribution,
        lp: &FeasibilityLp,
        epsilon_prime: f64,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<f64>>;
}

/// `Q(j) = sum_i y_i (b_i - A_i v_j)`: larger is better for the minimizer.
fn vertex_scores(y: &[f64], lp: &FeasibilityLp, vertices: &[Vec<f64>]) -> Vec<f64> {
    let weighted_row = lp.a().transpose_mul_vec(y);
    let weighted_b = dot(y, lp.b());
    vertices.iter().map(|v| weighted_b - dot(&weighted_row, v)).collect()
}

/// Non-private exact minimizer over the vertices of a bounded region.
/// Ties go to the lowest vertex index.
#[derive(Debug, Clone)]
pub struct ExactVertexOracle {
    vertices: Vec<Vec<f64>>,
    rho: f64,
}

impl ExactVertexOracle {
    /// Uses the region's vertices and the instance's width as `rho`. A zero
    /// width is replaced by 1; any positive bound is valid.
    pub fn new(lp: &FeasibilityLp) -> Result<Self> {
        let vertices = lp.region().vertices(lp.d())?;
        let w = crate::lp::width(lp, &vertices)?;
        Ok(ExactVertexOracle {
            vertices,
            rho: if w > 0.0 { w } else { 1.0 },
        })
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }
}

impl ApproxOracle for ExactVertexOracle {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn rho(&self) -> f64 {
        self.rho
    }

    fn is_private(&self) -> bool {
        false
    }

    fn alpha(&self, _: f64, _: f64) -> Option<f64> {
        None
    }

    fn best_response(&mut self, y: &DenseDistribution, lp: &FeasibilityLp, _: f64, _: &mut dyn RngCore) -> Result<Vec<f64>> {
        let q = vertex_scores(&y.probs, lp, &self.vertices);
        let mut best = 0;
        for (j, &v) in q.iter().enumerate() {
            if v > q[best] {
                best = j;
            }
        }
        Ok(self.vertices[best].clone())
    }
}

/// Exponential mechanism over the vertices `(opt / c_j) e_j` of the
/// objective slice of a covering LP, with rows in canonical form
/// `-A_i x <= -1`.
#[derive(Debug, Clone)]
pub struct SetCoverOracle {
    costs: Vec<f64>,
    opt: f64,
    s: usize,
    vertices: Vec<Vec<f64>>,
}

impl SetCoverOracle {
    pub fn new(costs: Vec<f64>, opt: f64, s: usize) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::Empty("set costs"));
        }
        if costs.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(invalid("costs", "set costs must be positive and finite"));
        }
        if !(opt > 0.0 && opt.is_finite()) {
            return Err(invalid("opt", format!("must be positive, got {opt}")));
        }
        if s == 0 {
            return Err(invalid("s", "density parameter must be at least 1"));
        }
        let region = PublicRegion::ObjectiveSlice { c: costs.clone(), opt };
        let vertices = region.vertices(costs.len())?;
        Ok(SetCoverOracle {
            costs,
            opt,
            s,
            vertices,
        })
    }

    pub fn c_min(&self) -> f64 {
        self.costs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sensitivity `3 opt / (c_min s)` of the quality score.
    pub fn sensitivity(&self) -> f64 {
        3.0 * self.opt / (self.c_min() * self.s as f64)
    }

    /// Quality score of each vertex under `y`.
    pub fn scores(&self, y: &[f64], lp: &FeasibilityLp) -> Vec<f64> {
        vertex_scores(y, lp, &self.vertices)
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }
}

impl ApproxOracle for SetCoverOracle {
    fn name(&self) -> &'static str {
        "setcover"
    }

    /// `max(1, opt / c_min - 1)`: the covering slack `A_i x - 1` reaches
    /// `opt / c_min - 1` and an uncovered row gives `-1`.
    fn rho(&self) -> f64 {
        (self.opt / self.c_min() - 1.0).max(1.0)
    }

    fn is_private(&self) -> bool {
        true
    }

    /// `6 opt ln(d) ln(1/gamma) / (c_min s epsilon')`.
    fn alpha(&self, epsilon_prime: f64, gamma: f64) -> Option<f64> {
        let d = self.costs.len() as f64;
        Some(6.0 * self.opt * d.ln() * (1.0 / gamma).ln() / (self.c_min() * self.s as f64 * epsilon_prime))
    }

    fn best_response(
        &mut self,
        y: &DenseDistribution,
        lp: &FeasibilityLp,
        epsilon_prime: f64,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<f64>> {
        match lp.region() {
            PublicRegion::ObjectiveSlice { c, opt } if *c == self.costs && *opt == self.opt => {}
            _ => {
                return Err(Error::OracleMismatch(
                    "set-cover oracle needs the objective slice with its own costs and opt".into(),
                ))
            }
        }
        let q = QualityScore::new(self.scores(&y.probs, lp), self.sensitivity())?;
        let j = exponential_mechanism(&q, epsilon_prime, rng)?;
        Ok(self.vertices[j].clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintPrivateParams {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    /// Density parameter.
    pub s: usize,
    pub rho: f64,
}

/// Quantities derived from the parameters and the number of constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintPrivateDerived {
    /// Rounds, `ceil(36 rho^2 ln m / alpha^2)` (raised so `eta <= 1/2`).
    pub t: usize,
    pub eta: f64,
    /// `epsilon / sqrt(8 T ln(1/delta))`.
    pub epsilon_prime: f64,
}

impl ConstraintPrivateParams {
    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(invalid("rho", format!("width must be positive, got {}", self.rho)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 9.0 * self.rho) {
            return Err(invalid(
                "alpha",
                format!("need 0 < alpha <= 9 rho = {}, got {}", 9.0 * self.rho, self.alpha),
            ));
        }
        if self.s == 0 || self.s > m {
            return Err(invalid("s", format!("density parameter must lie in [1, m = {m}], got {}", self.s)));
        }
        Ok(())
    }

    pub fn derive(&self, m: usize) -> Result<ConstraintPrivateDerived> {
        self.validate(m)?;
        let ln_m = (m as f64).ln();
        let t = rounds(36.0 * self.rho.powi(2) * ln_m / self.alpha.powi(2), m);
        let epsilon_prime = crate::mechanisms::compose_budget(self.epsilon, self.delta, t)?;
        Ok(ConstraintPrivateDerived {
            t,
            eta: step_size(m, t),
            epsilon_prime,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintPrivateOutcome {
    pub solution: Solution,
    /// Rows with `A_i x - b_i > alpha`.
    pub violated: Vec<usize>,
    pub derived: ConstraintPrivateDerived,
    pub oracle: String,
    pub oracle_private: bool,
    pub audit: BudgetAudit,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRecord>>,
}

/// Runs `T` rounds: project the constraint weights, ask the oracle for a best
/// response `x^t`, charge the loss `(b - A x^t) / (2 rho) + 1/2`, and return
/// the average of the `x^t`.
pub fn solve_constraint_private(
    lp: &FeasibilityLp,
    oracle: &mut dyn ApproxOracle,
    params: &ConstraintPrivateParams,
    rng: &mut dyn RngCore,
    keep_trace: bool,
) -> Result<ConstraintPrivateOutcome> {
    let m = lp.m();
    let derived = params.derive(m)?;
    if (oracle.rho() - params.rho).abs() > 1e-12 * params.rho.max(1.0) {
        return Err(Error::OracleMismatch(format!(
            "oracle width {} differs from the solver's rho {}",
            oracle.rho(),
            params.rho
        )));
    }
    let mut budget = PrivacyBudget::new(params.epsilon, params.delta)?;
    budget.plan_advanced(derived.t)?;

    let rho = params.rho;
    let mut engine = DmwEngine::new(m, derived.eta, params.s)?;
    let mut sum = vec![0.0; lp.d()];
    let mut trace = keep_trace.then(Vec::new);

    for t in 1..=derived.t {
        let y = engine.projection()?;
        budget.charge(format!("oracle round {t}"), derived.epsilon_prime)?;
        let x = oracle.best_response(&y, lp, derived.epsilon_prime, rng)?;
        if x.len() != lp.d() || !lp.region().contains(&x, REGION_TOL) {
            return Err(Error::OracleOutsideRegion(format!("round {t}: {x:?}")));
        }
        let mut loss = Vec::with_capacity(m);
        for (row, bi) in lp.a().iter_rows().zip(lp.b()) {
            let gap = bi - dot(row, &x);
            if gap.abs() > rho * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::OracleWidthBreach { observed: gap.abs(), rho });
            }
            loss.push(gap / (2.0 * rho) + 0.5);
        }
        engine.update(&loss)?;
        for (s, v) in sum.iter_mut().zip(&x) {
            *s += v;
        }
        if let Some(tr) = trace.as_mut() {
            tr.push(TraceRecord {
                t,
                engine: EngineKind::Dmw,
                eta: derived.eta,
                density_param: Some(params.s),
                distribution: y.probs,
                loss,
            });
        }
    }

    let x_bar: Vec<f64> = sum.into_iter().map(|v| v / derived.t as f64).collect();
    let solution = Solution::evaluate(lp, x_bar);
    Ok(ConstraintPrivateOutcome {
        violated: solution.violated_beyond(params.alpha),
        solution,
        derived,
        oracle: oracle.name().to_string(),
        oracle_private: oracle.is_private(),
        audit: budget.audit(),
        trace,
    })
}

/// Density parameter at which the set-cover oracle is `(alpha/3, beta/T)`
/// accurate: `ceil(18 opt ln(d) ln(T/beta) / (c_min epsilon' alpha))`.
pub fn setcover_density(
    costs: &[f64],
    opt: f64,
    m: usize,
    epsilon: f64,
    delta: f64,
    alpha: f64,
    beta: f64,
) -> Result<SetCoverDensity> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("beta", format!("must lie in (0, 1), got {beta}")));
    }
    let probe = SetCoverOracle::new(costs.to_vec(), opt, 1)?;
    let rho = probe.rho();
    let derived = ConstraintPrivateParams {
        epsilon,
        delta,
        alpha,
        s: 1,
        rho,
    }
    .derive(m)?;
    let gamma = beta / derived.t as f64;
    let d = costs.len() as f64;
    let s = 18.0 * opt * d.ln() * (1.0 / gamma).ln() / (probe.c_min() * derived.epsilon_prime * alpha);
    let s_formula = s.ceil().max(1.0);
    Ok(SetCoverDensity {
        s_formula,
        s_run: (s_formula.min(m as f64)) as usize,
        vacuous: s_formula >= m as f64,
        rho,
        gamma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetCoverDensity {
    /// Unclipped value from the accuracy requirement.
    pub s_formula: f64,
    /// `min(s_formula, m)`, the largest density the projection admits.
    pub s_run: usize,
    /// True when the formula asks for at least `m`, so the guarantee allows
    /// every constraint to be violated.
    pub vacuous: bool,
    pub rho: f64,
    pub gamma: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Matrix;
    use crate::mechanisms::exponential_mechanism_probabilities;
    use crate::rng::rng_from_seed;

    #[test]
    fn rounds_formula_example() {
        let p = ConstraintPrivateParams {
            epsilon: 1.0,
            delta: 1e-6,
            alpha: 0.6,
            s: 10,
            rho: 1.0,
        };
        assert_eq!(p.derive(100).unwrap().t, 461);
    }

    #[test]
    fn parameter_domain() {
        let mut p = ConstraintPrivateParams {
            epsilon: 1.0,
            delta: 1e-6,
            alpha: 9.5,
            s: 2,
            rho: 1.0,
        };
        assert!(p.derive(10).is_err());
        p.alpha = 0.5;
        p.s = 11;
        assert!(p.derive(10).is_err());
    }

    #[test]
    fn null_constraint_is_satisfied() {
        let lp = FeasibilityLp::new(Matrix::zeros(1, 2), vec![0.0], PublicRegion::Simplex).unwrap();
        let mut oracle = ExactVertexOracle::new(&lp).unwrap();
        let params = ConstraintPrivateParams {
            epsilon: 1.0,
            delta: 1e-6,
            alpha: 0.5,
            s: 1,
            rho: oracle.rho(),
        };
        let out = solve_constraint_private(&lp, &mut oracle, &params, &mut rng_from_seed(0), false).unwrap();
        assert!(out.violated.is_empty());
        assert!(out.solution.max_slack() <= 0.0);
    }

    fn two_sets() -> (FeasibilityLp, SetCoverOracle) {
        let a = Matrix::from_rows(vec![vec![-1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let region = PublicRegion::ObjectiveSlice { c: vec![1.0, 1.0], opt: 1.0 };
        let lp = FeasibilityLp::new(a, vec![-1.0, -1.0], region).unwrap();
        (lp, SetCoverOracle::new(vec![1.0, 1.0], 1.0, 2).unwrap())
    }

    #[test]
    fn symmetric_sets_are_equally_likely() {
        let (lp, oracle) = two_sets();
        let q = oracle.scores(&[0.5, 0.5], &lp);
        assert_eq!(q, vec![-0.5, -0.5]);
        let p = exponential_mechanism_probabilities(&QualityScore::new(q, oracle.sensitivity()).unwrap(), 1.0).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn setcover_parameters() {
        let o = SetCoverOracle::new(vec![2.0, 1.0, 4.0], 6.0, 3).unwrap();
        assert_eq!(o.c_min(), 1.0);
        assert_eq!(o.sensitivity(), 6.0);
        assert_eq!(o.rho(), 5.0);
        let a = o.alpha(0.5, (-1.0f64).exp()).unwrap();
        assert!((a - 6.0 * 6.0 * 3f64.ln() / 1.5).abs() < 1e-12);
        assert!(SetCoverOracle::new(vec![1.0, 0.0], 1.0, 1).is_err());
    }

    #[test]
    fn setcover_oracle_rejects_foreign_region() {
        let (_, mut oracle) = two_sets();
        let lp = FeasibilityLp::new(Matrix::identity(2), vec![1.0, 1.0], PublicRegion::Simplex).unwrap();
        let y = DenseDistribution { probs: vec![0.5, 0.5], s: 2 };
        assert!(matches!(
            oracle.best_response(&y, &lp, 1.0, &mut rng_from_seed(1)),
            Err(Error::OracleMismatch(_))
        ));
    }

    #[test]
    fn rho_mismatch_refused() {
        let (lp, mut oracle) = two_sets();
        let params = ConstraintPrivateParams {
            epsilon: 1.0,
            delta: 1e-6,
            alpha: 0.5,
            s: 1,
            rho: 3.0,
        };
        assert!(matches!(
            solve_constraint_private(&lp, &mut oracle, &params, &mut rng_from_seed(1), false),
            Err(Error::OracleMismatch(_))
        ));
    }

    struct Outside;

    impl ApproxOracle for Outside {
        fn name(&self) -> &'static str {
            "outside"
        }
        fn rho(&self) -> f64 {
            1.0
        }
        fn is_private(&self) -> bool {
            false
        }
        fn alpha(&self, _: f64, _: f64) -> Option<f64> {
            None
        }
        fn best_response(&mut self, _: &DenseDistribution, _: &FeasibilityLp, _: f64, _: &mut dyn RngCore) -> Result<Vec<f64>> {
            Ok(vec![0.7, 0.7])
        }
    }

    #[test]
    fn oracle_outside_region_aborts() {
        let (lp, _) = two_sets();
        let params = ConstraintPrivateParams {
            epsilon: 1.0,
            delta: 1e-6,
            alpha: 0.5,
            s: 1,
            rho: 1.0,
        };
        assert!(matches!(
            solve_constraint_private(&lp, &mut Outside, &params, &mut rng_from_seed(1), false),
            Err(Error::OracleOutsideRegion(_))
        ));
    }

    #[test]
    fn charges_match_rounds() {
        let (lp, mut oracle) = two_sets();
        let params = ConstraintPrivateParams {
            epsilon: 1.0,
            delta: 1e-6,
            alpha: 0.5,
            s: 2,
            rho: 1.0,
        };
        let out = solve_constraint_private(&lp, &mut oracle, &params, &mut rng_from_seed(4), true).unwrap();
        assert_eq!(out.audit.charges.len(), out.derived.t);
        assert_eq!(out.trace.unwrap().len(), out.derived.t);
        assert!(out.audit.composition_identity_error() < 1e-14);
    }
}
