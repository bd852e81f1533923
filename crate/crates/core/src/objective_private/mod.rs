//! Objective-private LPs by randomized response: release the objective with
//! Laplace noise on every coordinate, then solve the perturbed program
//! exactly. Feasibility is never traded for privacy.

mod exact;

pub use exact::{exact_optimum, simplex_max, solve_exact_lp, LpOptimum};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lp::{dot, LpInstance, PublicRegion, Solution};
use crate::mechanisms::{laplace_noise, BudgetAudit, PrivacyBudget};

/// Released objective `c_hat = c + nu` together with the draws `nu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedObjective {
    pub c_hat: Vec<f64>,
    pub noise_scale: f64,
    pub draws: Vec<f64>,
}

fn check_params(delta_1: f64, epsilon: f64, delta: f64) -> Result<()> {
    if !(delta_1 >= 0.0 && delta_1.is_finite()) {
        return Err(invalid("delta_1", format!("must be finite and >= 0, got {delta_1}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Per-coordinate Laplace scale `Delta_1 sqrt(8 d ln(1/delta)) / epsilon`.
pub fn objective_noise_scale(delta_1: f64, d: usize, epsilon: f64, delta: f64) -> Result<f64> {
    check_params(delta_1, epsilon, delta)?;
    Ok(delta_1 * (8.0 * d as f64 * (1.0 / delta).ln()).sqrt() / epsilon)
}

/// Objective gap bound `4 Delta_1 sqrt(8 d ln(d/delta)) / epsilon`.
pub fn objective_private_alpha(delta_1: f64, d: usize, epsilon: f64, delta: f64) -> Result<f64> {
    check_params(delta_1, epsilon, delta)?;
    Ok(4.0 * delta_1 * (8.0 * d as f64 * (d as f64 / delta).ln()).sqrt() / epsilon)
}

/// Gap bound that holds with probability `1 - beta` by a union bound over the
/// `d` draws: `2 * scale * ln(d / beta)`.
pub fn objective_private_alpha_strict(delta_1: f64, d: usize, epsilon: f64, delta: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("beta", format!("must lie in (0, 1), got {beta}")));
    }
    Ok(2.0 * objective_noise_scale(delta_1, d, epsilon, delta)? * (d as f64 / beta).ln())
}

/// Adds independent Laplace noise to each coordinate of `c`. The `d` draws
/// compose to `(epsilon, delta)` by advanced composition; each is charged to
/// `budget`, which must be unplanned.
pub fn perturb_objective<R: Rng + ?Sized>(
    c: &[f64],
    delta_1: f64,
    budget: &mut PrivacyBudget,
    rng: &mut R,
) -> Result<PerturbedObjective> {
    if c.is_empty() {
        return Err(Error::Empty("objective"));
    }
    let d = c.len();
    let noise_scale = objective_noise_scale(delta_1, d, budget.epsilon(), budget.delta())?;
    let eps_prime = budget.plan_advanced(d)?;
    let mut draws = Vec::with_capacity(d);
    for j in 0..d {
        budget.charge(format!("objective coordinate {j}"), eps_prime)?;
        draws.push(laplace_noise(noise_scale, rng)?);
    }
    let c_hat = c.iter().zip(&draws).map(|(a, n)| a + n).collect();
    Ok(PerturbedObjective {
        c_hat,
        noise_scale,
        draws,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePrivateOutcome {
    pub solution: Solution,
    pub perturbed: PerturbedObjective,
    /// Printed gap bound.
    pub alpha: f64,
    pub audit: BudgetAudit,
}

/// Maximizes the perturbed objective over the true constraints intersected
/// with the simplex. The solution's objective value is under the true `c`.
pub fn solve_objective_private<R: Rng + ?Sized>(
    lp: &LpInstance,
    delta_1: f64,
    epsilon: f64,
    delta: f64,
    rng: &mut R,
) -> Result<ObjectivePrivateOutcome> {
    let c = lp.c().ok_or(Error::MissingObjective)?.to_vec();
    let on_simplex = simplex_version(lp)?;
    let mut budget = PrivacyBudget::new(epsilon, delta)?;
    let perturbed = perturb_objective(&c, delta_1, &mut budget, rng)?;
    let released = on_simplex.clone().with_objective(perturbed.c_hat.clone())?;
    let mut solution = solve_exact_lp(&released)?;
    solution.objective_value = Some(dot(&c, &solution.x));
    Ok(ObjectivePrivateOutcome {
        solution,
        alpha: objective_private_alpha(delta_1, c.len(), epsilon, delta)?,
        perturbed,
        audit: budget.audit(),
    })
}

/// The instance with `1^T x = 1` appended.
pub fn simplex_version(lp: &LpInstance) -> Result<LpInstance> {
    match lp.region() {
        PublicRegion::Simplex => Ok(lp.clone()),
        PublicRegion::NonnegativeOrthant => lp.clone().with_region(PublicRegion::Simplex),
        PublicRegion::ObjectiveSlice { .. } => Err(invalid(
            "region",
            "objective-private solving appends the simplex and cannot combine it with an objective slice",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{Matrix, Sense};
    use crate::rng::rng_from_seed;

    #[test]
    fn noise_scale_example() {
        let s = objective_noise_scale(1e-3, 10, 1.0, 1e-6).unwrap();
        assert!((s - 1e-3 * (80.0 * 1e6f64.ln()).sqrt()).abs() < 1e-15);
        assert!((s - 0.03325).abs() < 1e-5);
    }

    #[test]
    fn alpha_example() {
        let a = objective_private_alpha(1e-3, 10, 1.0, 1e-6).unwrap();
        assert!((a - 4e-3 * (80.0 * 1e7f64.ln()).sqrt()).abs() < 1e-15);
        assert!((a - 0.1436).abs() < 1e-4);
    }

    #[test]
    fn zero_sensitivity_is_exact() {
        let mut budget = PrivacyBudget::new(1.0, 1e-6).unwrap();
        let p = perturb_objective(&[1.0, 2.0], 0.0, &mut budget, &mut rng_from_seed(1)).unwrap();
        assert_eq!(p.c_hat, vec![1.0, 2.0]);
        assert_eq!(budget.charges().len(), 2);
    }

    #[test]
    fn draws_reproducible_and_recorded() {
        let run = || {
            let mut budget = PrivacyBudget::new(1.0, 1e-6).unwrap();
            perturb_objective(&[0.0; 4], 0.1, &mut budget, &mut rng_from_seed(9)).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        assert_eq!(a.c_hat, a.draws);
    }

    #[test]
    fn solution_is_feasible_and_on_simplex() {
        let a = Matrix::from_rows(vec![vec![1.0, 0.0, 0.0]]).unwrap();
        let lp = LpInstance::new(a, vec![0.2], Some(vec![1.0, 0.5, 0.2]), vec![Sense::Le]).unwrap();
        let out = solve_objective_private(&lp, 1e-3, 1.0, 1e-6, &mut rng_from_seed(2)).unwrap();
        assert!(out.solution.max_slack() <= 1e-9);
        assert!((out.solution.x.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((out.solution.objective_value.unwrap() - 0.6).abs() < 1e-9);
    }
}
