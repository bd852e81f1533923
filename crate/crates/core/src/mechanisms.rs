//! Differential-privacy primitives: Laplace noise, the exponential mechanism,
//! advanced composition, and a plan-then-charge budget ledger.

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// One draw from the Laplace distribution with density
/// `exp(-|v| / scale) / (2 scale)`, by inverse-CDF transform of one uniform.
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid("scale", format!("must be positive and finite, got {scale}")));
    }
    let u: f64 = rng.sample(Open01);
    Ok(if u < 0.5 {
        scale * (2.0 * u).ln()
    } else {
        -scale * (2.0 * (1.0 - u)).ln()
    })
}

/// Adds Laplace noise when `scale > 0`; a zero scale releases the value unchanged.
pub fn laplace_noise<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if scale == 0.0 {
        Ok(0.0)
    } else {
        laplace_sample(scale, rng)
    }
}

/// `Pr[|v| >= scale * ln(1/beta)] = beta` for `v ~ Lap(scale)`.
pub fn laplace_tail_threshold(scale: f64, beta: f64) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid("scale", format!("must be positive, got {scale}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("beta", format!("must lie in (0, 1), got {beta}")));
    }
    Ok(scale * (1.0 / beta).ln())
}

/// Scores over a finite range and their sensitivity.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityScore {
    pub values: Vec<f64>,
    pub sensitivity: f64,
}

impl QualityScore {
    pub fn new(values: Vec<f64>, sensitivity: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("exponential mechanism range"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quality score"));
        }
        if !(sensitivity > 0.0 && sensitivity.is_finite()) {
            return Err(invalid("sensitivity", format!("must be positive, got {sensitivity}")));
        }
        Ok(QualityScore { values, sensitivity })
    }

    fn logits(&self, epsilon: f64) -> Result<Vec<f64>> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        let scale = epsilon / (2.0 * self.sensitivity);
        let logits: Vec<f64> = self.values.iter().map(|q| scale * q).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(logits.into_iter().map(|l| l - max).collect())
    }
}

/// Selection probabilities `softmax(epsilon * Q / (2 Delta))`.
pub fn exponential_mechanism_probabilities(q: &QualityScore, epsilon: f64) -> Result<Vec<f64>> {
    let w: Vec<f64> = q.logits(epsilon)?.into_iter().map(f64::exp).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / total).collect())
}

/// Samples an index with probability proportional to `exp(epsilon Q(r) / (2 Delta))`.
///
/// Weights are shifted by the maximum logit before exponentiation and the
/// draw inverts the cumulative sum.
pub fn exponential_mechanism<R: Rng + ?Sized>(q: &QualityScore, epsilon: f64, rng: &mut R) -> Result<usize> {
    let mut cumulative = q.logits(epsilon)?;
    let mut acc = 0.0;
    for w in cumulative.iter_mut() {
        acc += w.exp();
        *w = acc;
    }
    let target = rng.gen::<f64>() * acc;
    Ok(cumulative
        .iter()
        .position(|&c| c > target)
        .unwrap_or(cumulative.len() - 1))
}

/// Additive suboptimality `(2 Delta / epsilon) ln(|R| / beta)` that holds with
/// probability at least `1 - beta`.
pub fn exp_mech_error_bound(range_size: usize, epsilon: f64, sensitivity: f64, beta: f64) -> Result<f64> {
    if range_size == 0 {
        return Err(Error::Empty("exponential mechanism range"));
    }
    if !(epsilon > 0.0) || !(sensitivity >= 0.0) {
        return Err(invalid("epsilon/sensitivity", "epsilon must be positive, sensitivity nonnegative"));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid("beta", format!("must lie in (0, 1], got {beta}")));
    }
    Ok(2.0 * sensitivity / epsilon * (range_size as f64 / beta).ln())
}

/// Per-step privacy parameter under advanced composition of `k` mechanisms:
/// `epsilon / sqrt(8 k ln(1/delta))`.
pub fn compose_budget(epsilon: f64, delta: f64, k: usize) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    if k == 0 {
        return Err(invalid("k", "composition needs at least one mechanism"));
    }
    Ok(epsilon / (8.0 * k as f64 * (1.0 / delta).ln()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    /// `k` mechanisms at `epsilon / sqrt(8 k ln(1/delta))` each.
    Advanced,
    /// `k` mechanisms at `(epsilon / k, delta / k)` each.
    EvenSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Charge {
    pub label: String,
    pub eps: f64,
}

/// Machine-readable budget audit emitted with every solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetAudit {
    pub epsilon: f64,
    pub delta: f64,
    pub composition: Option<Composition>,
    pub planned_k: usize,
    pub epsilon_prime: f64,
    pub charges: Vec<Charge>,
}

/// An `(epsilon, delta)` budget with a declared composition plan and a ledger.
///
/// Callers declare how many mechanisms they will run, then charge each one.
/// Charging past the plan fails with [`Error::BudgetExhausted`].
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
    plan: Option<(Composition, usize, f64)>,
    charges: Vec<Charge>,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(invalid("delta", format!("must lie in [0, 1), got {delta}")));
        }
        Ok(PrivacyBudget {
            epsilon,
            delta,
            plan: None,
            charges: Vec::new(),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn planned_k(&self) -> usize {
        self.plan.map_or(0, |p| p.1)
    }

    pub fn epsilon_prime(&self) -> Option<f64> {
        self.plan.map(|p| p.2)
    }

    /// Plans `k` mechanisms under advanced composition; returns the per-step epsilon.
    pub fn plan_advanced(&mut self, k: usize) -> Result<f64> {
        let eps_prime = compose_budget(self.epsilon, self.delta, k)?;
        self.set_plan(Composition::Advanced, k, eps_prime)?;
        Ok(eps_prime)
    }

    /// Plans `k` calls that split the budget evenly; returns `(epsilon / k, delta / k)`.
    pub fn plan_even_split(&mut self, k: usize) -> Result<(f64, f64)> {
        if k == 0 {
            return Err(invalid("k", "plan needs at least one call"));
        }
        let per = (self.epsilon / k as f64, self.delta / k as f64);
        self.set_plan(Composition::EvenSplit, k, per.0)?;
        Ok(per)
    }

    fn set_plan(&mut self, composition: Composition, k: usize, eps: f64) -> Result<()> {
        if self.plan.is_some() {
            return Err(invalid("plan", "budget already has a composition plan"));
        }
        self.plan = Some((composition, k, eps));
        Ok(())
    }

    /// Records one mechanism run at `eps`.
    pub fn charge(&mut self, label: impl Into<String>, eps: f64) -> Result<()> {
        let (_, k, eps_prime) = self
            .plan
            .ok_or_else(|| invalid("plan", "charge before a composition plan was declared"))?;
        if self.charges.len() >= k {
            return Err(Error::BudgetExhausted { planned: k });
        }
        if eps > eps_prime * (1.0 + 1e-12) {
            return Err(invalid("eps", format!("charge {eps} exceeds planned per-step {eps_prime}")));
        }
        self.charges.push(Charge {
            label: label.into(),
            eps,
        });
        Ok(())
    }

    pub fn charges(&self) -> &[Charge] {
        &self.charges
    }

    pub fn audit(&self) -> BudgetAudit {
        BudgetAudit {
            epsilon: self.epsilon,
            delta: self.delta,
            composition: self.plan.map(|p| p.0),
            planned_k: self.planned_k(),
            epsilon_prime: self.epsilon_prime().unwrap_or(0.0),
            charges: self.charges.clone(),
        }
    }
}

impl BudgetAudit {
    /// Relative error of `k * 8 ln(1/delta) * eps'^2` against `epsilon^2`.
    pub fn composition_identity_error(&self) -> f64 {
        let lhs = self.planned_k as f64 * 8.0 * (1.0 / self.delta).ln() * self.epsilon_prime.powi(2);
        (lhs - self.epsilon.powi(2)).abs() / self.epsilon.powi(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn laplace_rejects_bad_scale() {
        let mut rng = rng_from_seed(1);
        assert!(laplace_sample(0.0, &mut rng).is_err());
        assert!(laplace_sample(-1.0, &mut rng).is_err());
        assert!(laplace_sample(f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn laplace_is_deterministic_per_seed() {
        let draw = |seed| {
            let mut rng = rng_from_seed(seed);
            (0..16).map(|_| laplace_sample(1.0, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn laplace_moments() {
        for (scale, var) in [(1.0, 2.0), (2.0, 8.0)] {
            let mut rng = rng_from_seed(7);
            let n = 100_000;
            let xs: Vec<f64> = (0..n).map(|_| laplace_sample(scale, &mut rng).unwrap()).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let v = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!(mean.abs() < 0.02 * scale, "mean {mean}");
            assert!((v - var).abs() < 0.05 * var, "variance {v}");
        }
    }

    #[test]
    fn tail_threshold_examples() {
        assert!((laplace_tail_threshold(1.0, (-1.0f64).exp()).unwrap() - 1.0).abs() < 1e-15);
        assert!((laplace_tail_threshold(1.0, 0.05).unwrap() - 2.995_732_273_553_991).abs() < 1e-12);
        assert!((laplace_tail_threshold(3.0, 0.05).unwrap() - 8.987_196_820_661_973).abs() < 1e-12);
        assert!(laplace_tail_threshold(1.0, 0.0).is_err());
        assert!(laplace_tail_threshold(1.0, 1.0).is_err());
    }

    #[test]
    fn exp_mech_probabilities() {
        let q = QualityScore::new(vec![0.0, 2f64.ln()], 1.0).unwrap();
        let p = exponential_mechanism_probabilities(&q, 2.0).unwrap();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15 && (p[1] - 2.0 / 3.0).abs() < 1e-15);
        let flat = QualityScore::new(vec![0.7; 4], 1.0).unwrap();
        for p in exponential_mechanism_probabilities(&flat, 1.0).unwrap() {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn exp_mech_rejects_bad_inputs() {
        assert_eq!(QualityScore::new(vec![], 1.0).unwrap_err(), Error::Empty("exponential mechanism range"));
        assert!(QualityScore::new(vec![1.0], 0.0).is_err());
        assert!(QualityScore::new(vec![f64::NAN], 1.0).is_err());
    }

    #[test]
    fn exp_mech_huge_epsilon_no_overflow() {
        let q = QualityScore::new(vec![0.0, 1.0, 0.5], 1e-3).unwrap();
        let mut rng = rng_from_seed(3);
        for _ in 0..100 {
            assert_eq!(exponential_mechanism(&q, 1e6, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn error_bound_examples() {
        assert_eq!(exp_mech_error_bound(1, 2.0, 1.0, 1.0).unwrap(), 0.0);
        let b = exp_mech_error_bound(10, 1.0, 1.0, 0.1).unwrap();
        assert!((b - 2.0 * 100f64.ln()).abs() < 1e-12);
        let b2 = exp_mech_error_bound(10, 1.0, 2.0, 0.1).unwrap();
        assert!((b2 - 2.0 * b).abs() < 1e-12);
    }

    #[test]
    fn compose_examples() {
        let e = (-1.0f64).exp();
        assert!((compose_budget(1.0, e, 8).unwrap() - 0.125).abs() < 1e-15);
        assert!((compose_budget(1.0, e, 1).unwrap() - 1.0 / 8f64.sqrt()).abs() < 1e-15);
        let v = compose_budget(0.5, 1e-6, 100).unwrap();
        assert!((v - 0.5 / (800.0 * 1e6f64.ln()).sqrt()).abs() < 1e-15);
        assert!((v - 4.756e-3).abs() < 1e-6);
        assert!(compose_budget(1.0, 0.0, 1).is_err());
        assert!(compose_budget(1.0, 1.0, 1).is_err());
        assert!(compose_budget(1.0, 0.5, 0).is_err());
    }

    #[test]
    fn charges_stop_at_plan() {
        let mut b = PrivacyBudget::new(1.0, 1e-6).unwrap();
        let eps = b.plan_advanced(2).unwrap();
        b.charge("first", eps).unwrap();
        b.charge("second", eps).unwrap();
        assert_eq!(b.charge("third", eps).unwrap_err(), Error::BudgetExhausted { planned: 2 });
        let labels: Vec<_> = b.charges().iter().map(|c| c.label.as_str()).collect();
        assert_eq!(labels, ["first", "second"]);
    }

    #[test]
    fn charge_needs_plan_and_respects_step() {
        let mut b = PrivacyBudget::new(1.0, 1e-6).unwrap();
        assert!(b.charge("x", 0.1).is_err());
        let eps = b.plan_advanced(1).unwrap();
        assert!(b.charge("x", 2.0 * eps).is_err());
        assert!(b.plan_advanced(3).is_err());
    }

    #[test]
    fn audit_identity() {
        let mut b = PrivacyBudget::new(0.7, 1e-5).unwrap();
        b.plan_advanced(37).unwrap();
        assert!(b.audit().composition_identity_error() < 1e-14);
    }
}
