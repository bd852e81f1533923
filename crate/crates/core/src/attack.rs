//! Reconstruction gadgets: LPs whose exact solutions spell out a secret bit
//! database, the rounding attack that reads the bits back, and the analytic
//! floor `c(epsilon, delta, beta)` on the error of any private mechanism.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lp::{canonicalize, LpInstance, Matrix, PublicRegion, Sense};
use crate::objective_private::{solve_exact_lp, solve_objective_private};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitDatabase {
    bits: Vec<u8>,
    balanced: bool,
}

impl BitDatabase {
    pub fn new(bits: Vec<u8>, balanced: bool) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(invalid("bits", "entries must be 0 or 1"));
        }
        if balanced {
            let zeros = bits.iter().filter(|&&b| b == 0).count();
            if bits.len() % 2 == 1 || 2 * zeros != bits.len() {
                return Err(Error::Unbalanced { zeros, n: bits.len() });
            }
        }
        Ok(BitDatabase { bits, balanced })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        BitDatabase {
            bits: (0..n).map(|_| rng.gen_range(0..=1)).collect(),
            balanced: false,
        }
    }

    /// Uniform over databases with exactly `n / 2` zeros.
    pub fn random_balanced<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n % 2 == 1 {
            return Err(Error::Unbalanced { zeros: n / 2, n });
        }
        let mut bits: Vec<u8> = (0..n).map(|i| u8::from(i < n / 2)).collect();
        bits.shuffle(rng);
        Ok(BitDatabase { bits, balanced: true })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_balanced(&self) -> bool {
        self.balanced
    }

    /// Neighbor differing in bit `i`; no longer balanced.
    pub fn flip(&self, i: usize) -> Self {
        let mut bits = self.bits.clone();
        bits[i] ^= 1;
        BitDatabase { bits, balanced: false }
    }

    /// Neighbor exchanging bits `i` and `j`; balance is preserved.
    pub fn swap(&self, i: usize, j: usize) -> Self {
        let mut bits = self.bits.clone();
        bits.swap(i, j);
        BitDatabase { bits, balanced: self.balanced }
    }

    pub fn hamming(&self, other: &BitDatabase) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }

    fn as_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| f64::from(b)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GadgetKind {
    Scalar,
    Objective,
    Constraint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GadgetInstance {
    pub kind: GadgetKind,
    pub database: BitDatabase,
    pub lp: LpInstance,
    /// One flag per row of `lp`: true when the row depends on the database.
    pub private_rows: Vec<bool>,
    /// Constant added to `c^T x`.
    pub objective_offset: f64,
}

fn require_nonempty(db: &BitDatabase) -> Result<()> {
    if db.is_empty() {
        return Err(Error::Empty("bit database"));
    }
    Ok(())
}

fn require_balanced(db: &BitDatabase) -> Result<()> {
    require_nonempty(db)?;
    BitDatabase::new(db.bits.clone(), true).map(|_| ())
}

/// `x_i = D_i` for every `i`.
pub fn gadget_scalar(db: &BitDatabase) -> Result<GadgetInstance> {
    require_nonempty(db)?;
    let n = db.len();
    let lp = LpInstance::new(Matrix::identity(n), db.as_f64(), None, vec![Sense::Eq; n])?;
    Ok(GadgetInstance {
        kind: GadgetKind::Scalar,
        database: db.clone(),
        lp,
        private_rows: vec![true; n],
        objective_offset: 0.0,
    })
}

/// Rows `x_i <= 1` followed by `sum x = n/2`.
fn box_and_sum(n: usize) -> Result<(Matrix, Vec<f64>, Vec<Sense>)> {
    let mut a = Matrix::identity(n);
    a.push_row(&vec![1.0; n])?;
    let mut b = vec![1.0; n];
    b.push(n as f64 / 2.0);
    let mut senses = vec![Sense::Le; n];
    senses.push(Sense::Eq);
    Ok((a, b, senses))
}

/// `max sum D_i x_i - n/2` over `sum x = n/2`, `x in [0, 1]^n`.
pub fn gadget_objective(db: &BitDatabase) -> Result<GadgetInstance> {
    require_balanced(db)?;
    let n = db.len();
    let (a, b, senses) = box_and_sum(n)?;
    let lp = LpInstance::new(a, b, Some(db.as_f64()), senses)?;
    Ok(GadgetInstance {
        kind: GadgetKind::Objective,
        database: db.clone(),
        private_rows: vec![false; n + 1],
        lp,
        objective_offset: -(n as f64) / 2.0,
    })
}

/// Private row `sum D_i x_i = n/2` over the public `sum x = n/2` and box.
pub fn gadget_constraint(db: &BitDatabase) -> Result<GadgetInstance> {
    require_balanced(db)?;
    let n = db.len();
    let (pub_a, pub_b, pub_senses) = box_and_sum(n)?;
    let mut a = Matrix::zeros(0, n);
    a.push_row(&db.as_f64())?;
    for row in pub_a.iter_rows() {
        a.push_row(row)?;
    }
    let mut b = vec![n as f64 / 2.0];
    b.extend(pub_b);
    let mut senses = vec![Sense::Eq];
    senses.extend(pub_senses);
    let mut private_rows = vec![false; n + 2];
    private_rows[0] = true;
    Ok(GadgetInstance {
        kind: GadgetKind::Constraint,
        database: db.clone(),
        lp: LpInstance::new(a, b, None, senses)?,
        private_rows,
        objective_offset: 0.0,
    })
}

pub fn build_gadget(kind: GadgetKind, db: &BitDatabase) -> Result<GadgetInstance> {
    match kind {
        GadgetKind::Scalar => gadget_scalar(db),
        GadgetKind::Objective => gadget_objective(db),
        GadgetKind::Constraint => gadget_constraint(db),
    }
}

/// Positions where two gadget LPs differ, on the canonical `<=` form.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpDiff {
    pub a_entries: Vec<(usize, usize)>,
    pub b_entries: Vec<usize>,
    pub c_entries: Vec<usize>,
}

pub fn gadget_diff(x: &GadgetInstance, y: &GadgetInstance) -> Result<LpDiff> {
    let (cx, _) = canonicalize(&x.lp)?;
    let (cy, _) = canonicalize(&y.lp)?;
    if cx.m() != cy.m() || cx.d() != cy.d() {
        return Err(Error::Dimension("gadgets differ in shape".into()));
    }
    let mut diff = LpDiff::default();
    for i in 0..cx.m() {
        for j in 0..cx.d() {
            if cx.a().get(i, j) != cy.a().get(i, j) {
                diff.a_entries.push((i, j));
            }
        }
        if cx.b()[i] != cy.b()[i] {
            diff.b_entries.push(i);
        }
    }
    if let (Some(c1), Some(c2)) = (x.lp.c(), y.lp.c()) {
        diff.c_entries = (0..c1.len()).filter(|&j| c1[j] != c2[j]).collect();
    }
    Ok(diff)
}

/// Thresholds each entry at 1/2, ties to 1.
pub fn reconstruct_by_rounding(x: &[f64]) -> BitDatabase {
    BitDatabase {
        bits: x.iter().map(|&v| u8::from(v.clamp(0.0, 1.0) >= 0.5)).collect(),
        balanced: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionBound {
    pub epsilon: f64,
    pub delta: f64,
    pub beta: f64,
    pub c: f64,
    /// True when `c <= 0`, so the bound says nothing.
    pub vacuous: bool,
}

/// `c = 1/2 - (e^eps + delta) / (2 (1 + e^eps) (1 - beta))`.
pub fn reconstruction_bound(epsilon: f64, delta: f64, beta: f64) -> Result<ReconstructionBound> {
    if !(epsilon >= 0.0) {
        return Err(invalid("epsilon", format!("must be >= 0, got {epsilon}")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(invalid("delta", format!("must lie in [0, 1), got {delta}")));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(invalid("beta", format!("must lie in [0, 1), got {beta}")));
    }
    // e^eps / (1 + e^eps) written to stay finite for large epsilon
    let share = 1.0 / (1.0 + (-epsilon).exp());
    let delta_term = delta / (1.0 + epsilon.exp());
    let c = 0.5 - (share + delta_term) / (2.0 * (1.0 - beta));
    Ok(ReconstructionBound {
        epsilon,
        delta,
        beta,
        c,
        vacuous: c <= 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackSolver {
    Exact,
    /// Objective gadget only; the gadget is rescaled onto the simplex and
    /// solved with `Delta_1 = 1`.
    ObjectivePrivate { epsilon: f64, delta: f64 },
}

impl AttackSolver {
    fn name(&self) -> &'static str {
        match self {
            AttackSolver::Exact => "exact",
            AttackSolver::ObjectivePrivate { .. } => "objective_private",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackTrial {
    pub trial: usize,
    /// Hamming distance between `D` and the rounded output, over `n`.
    pub hamming: f64,
    /// `||x - D||_1 / n`.
    pub l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub gadget: GadgetKind,
    pub solver: AttackSolver,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub per_trial: Vec<AttackTrial>,
    pub perfect_reconstructions: usize,
    pub mean_hamming: Option<f64>,
    /// 10%, 50% and 90% quantiles of the normalized Hamming error.
    pub hamming_quantiles: Option<[f64; 3]>,
    /// Floor on the normalized error of any private mechanism. Gadgets where
    /// one record moves two coefficients use `(2 eps, delta (1 + e^eps))`.
    pub bound: ReconstructionBound,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Samples a database per trial, builds the gadget, solves and rounds.
/// Trial `t` draws from stream `t` of `seed`.
pub fn run_attack_experiment(
    kind: GadgetKind,
    solver: AttackSolver,
    n: usize,
    trials: usize,
    beta: f64,
    seed: u64,
) -> Result<AttackReport> {
    if n == 0 {
        return Err(Error::Empty("bit database"));
    }
    let balanced = kind != GadgetKind::Scalar;
    if balanced && n % 2 == 1 {
        return Err(Error::Unbalanced { zeros: n / 2, n });
    }
    let (eps, delta) = match solver {
        AttackSolver::Exact => (0.0, 0.0),
        AttackSolver::ObjectivePrivate { epsilon, delta } => {
            if kind != GadgetKind::Objective {
                return Err(Error::ModelMismatch(format!(
                    "{} solver cannot attack the {kind:?} gadget",
                    solver.name()
                )));
            }
            (epsilon, delta)
        }
    };
    let bound = if balanced {
        reconstruction_bound(2.0 * eps, delta * (1.0 + eps.exp()), beta)?
    } else {
        reconstruction_bound(eps, delta, beta)?
    };

    let per_trial: Vec<AttackTrial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, t as u64);
            let db = if balanced {
                BitDatabase::random_balanced(n, &mut rng)?
            } else {
                BitDatabase::random(n, &mut rng)
            };
            let gadget = build_gadget(kind, &db)?;
            let x = match solver {
                AttackSolver::Exact => solve_exact_lp(&gadget.lp)?.x,
                AttackSolver::ObjectivePrivate { epsilon, delta } => {
                    let y_lp = rescaled_objective_gadget(&db)?;
                    let out = solve_objective_private(&y_lp, 1.0, epsilon, delta, &mut rng)?;
                    out.solution.x.iter().map(|y| y * n as f64 / 2.0).collect()
                }
            };
            let guess = reconstruct_by_rounding(&x);
            let l1: f64 = x.iter().zip(db.bits()).map(|(v, &b)| (v - f64::from(b)).abs()).sum();
            Ok(AttackTrial {
                trial: t,
                hamming: guess.hamming(&db) as f64 / n as f64,
                l1: l1 / n as f64,
            })
        })
        .collect::<Result<_>>()?;

    let mut sorted: Vec<f64> = per_trial.iter().map(|t| t.hamming).collect();
    sorted.sort_by(f64::total_cmp);
    let (mean_hamming, hamming_quantiles) = if sorted.is_empty() {
        (None, None)
    } else {
        (
            Some(sorted.iter().sum::<f64>() / sorted.len() as f64),
            Some([quantile(&sorted, 0.1), quantile(&sorted, 0.5), quantile(&sorted, 0.9)]),
        )
    };
    Ok(AttackReport {
        gadget: kind,
        solver,
        n,
        trials,
        seed,
        perfect_reconstructions: per_trial.iter().filter(|t| t.hamming == 0.0).count(),
        per_trial,
        mean_hamming,
        hamming_quantiles,
        bound,
    })
}

/// The objective gadget in `y = 2x/n`: `y` on the simplex with `y_i <= 2/n`.
fn rescaled_objective_gadget(db: &BitDatabase) -> Result<LpInstance> {
    let n = db.len();
    LpInstance::new(Matrix::identity(n), vec![2.0 / n as f64; n], Some(db.as_f64()), vec![Sense::Le; n])?
        .with_region(PublicRegion::Simplex)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::dot;
    use crate::rng::rng_from_seed;

    fn db(bits: &[u8]) -> BitDatabase {
        BitDatabase::new(bits.to_vec(), false).unwrap()
    }

    #[test]
    fn scalar_gadget_rows() {
        let g = gadget_scalar(&db(&[0, 1])).unwrap();
        assert_eq!(g.lp.b(), &[0.0, 1.0]);
        assert_eq!(g.lp.senses(), &[Sense::Eq, Sense::Eq]);
        assert!(gadget_scalar(&db(&[])).is_err());
    }

    #[test]
    fn objective_gadget_small_case() {
        let d = BitDatabase::new(vec![1, 0], true).unwrap();
        let g = gadget_objective(&d).unwrap();
        let x = solve_exact_lp(&g.lp).unwrap().x;
        assert_eq!(x, vec![1.0, 0.0]);
        assert_eq!(dot(g.lp.c().unwrap(), &x) + g.objective_offset, 0.0);
        assert_eq!(dot(g.lp.c().unwrap(), &[0.0, 1.0]) + g.objective_offset, -1.0);
        assert!(gadget_objective(&db(&[1, 1])).is_err());
    }

    #[test]
    fn complement_scores_minus_half_n() {
        let d = BitDatabase::random_balanced(20, &mut rng_from_seed(4)).unwrap();
        let g = gadget_objective(&d).unwrap();
        let comp: Vec<f64> = d.bits().iter().map(|&b| f64::from(1 - b)).collect();
        assert_eq!(dot(g.lp.c().unwrap(), &comp) + g.objective_offset, -10.0);
    }

    #[test]
    fn constraint_gadget_forced_for_two() {
        let d = BitDatabase::new(vec![1, 0], true).unwrap();
        let g = gadget_constraint(&d).unwrap();
        assert_eq!(g.private_rows, vec![true, false, false, false]);
        assert_eq!(solve_exact_lp(&g.lp).unwrap().x, vec![1.0, 0.0]);
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(reconstruct_by_rounding(&[0.4, 0.6]).bits(), &[0, 1]);
        assert_eq!(reconstruct_by_rounding(&[0.5, -0.01, 1.02]).bits(), &[1, 0, 1]);
    }

    #[test]
    fn rounding_at_most_doubles_l1() {
        let mut rng = rng_from_seed(8);
        for _ in 0..500 {
            let d = BitDatabase::random(30, &mut rng);
            let x: Vec<f64> = d
                .bits()
                .iter()
                .map(|&b| (f64::from(b) + rng.gen_range(-0.7..0.7)).clamp(0.0, 1.0))
                .collect();
            let l1: f64 = x.iter().zip(d.bits()).map(|(v, &b)| (v - f64::from(b)).abs()).sum();
            assert!(reconstruct_by_rounding(&x).hamming(&d) as f64 <= 2.0 * l1 + 1e-12);
        }
    }

    #[test]
    fn bound_values() {
        assert_eq!(reconstruction_bound(0.0, 0.0, 0.0).unwrap().c, 0.25);
        let big = reconstruction_bound(800.0, 0.0, 0.2).unwrap();
        assert!(big.vacuous && (big.c - (0.5 - 0.5 / 0.8)).abs() < 1e-12);
        assert!(reconstruction_bound(0.1, 0.0, 1.0).is_err());
        let mut last = f64::INFINITY;
        for i in 0..20 {
            let c = reconstruction_bound(0.1 * i as f64, 0.0, 0.0).unwrap().c;
            assert!(c < last);
            last = c;
        }
        let c0 = reconstruction_bound(0.5, 0.0, 0.1).unwrap().c;
        assert!(reconstruction_bound(0.5, 0.1, 0.1).unwrap().c < c0);
        assert!(reconstruction_bound(0.5, 0.0, 0.2).unwrap().c < c0);
    }

    #[test]
    fn neighbor_diffs() {
        let d = BitDatabase::random_balanced(10, &mut rng_from_seed(2)).unwrap();
        let g = gadget_scalar(&d).unwrap();
        for i in 0..10 {
            let diff = gadget_diff(&g, &gadget_scalar(&d.flip(i)).unwrap()).unwrap();
            assert_eq!(diff.b_entries, vec![2 * i, 2 * i + 1]);
            assert!(diff.a_entries.is_empty() && diff.c_entries.is_empty());
        }
        let (i, j) = (
            d.bits().iter().position(|&b| b == 0).unwrap(),
            d.bits().iter().position(|&b| b == 1).unwrap(),
        );
        let swapped = d.swap(i, j);
        let o = gadget_diff(&gadget_objective(&d).unwrap(), &gadget_objective(&swapped).unwrap()).unwrap();
        assert_eq!(o.c_entries, vec![i.min(j), i.max(j)]);
        assert!(o.a_entries.is_empty() && o.b_entries.is_empty());
        let c = gadget_diff(&gadget_constraint(&d).unwrap(), &gadget_constraint(&swapped).unwrap()).unwrap();
        assert!(c.a_entries.iter().all(|&(r, _)| r <= 1));
        assert_eq!(c.a_entries.len(), 4);
        assert!(c.b_entries.is_empty());
    }

    #[test]
    fn experiment_guards() {
        assert!(matches!(
            run_attack_experiment(GadgetKind::Objective, AttackSolver::Exact, 7, 1, 0.1, 0),
            Err(Error::Unbalanced { .. })
        ));
        let op = AttackSolver::ObjectivePrivate { epsilon: 1.0, delta: 1e-6 };
        assert!(run_attack_experiment(GadgetKind::Scalar, op, 8, 1, 0.1, 0).is_err());
        let empty = run_attack_experiment(GadgetKind::Scalar, AttackSolver::Exact, 8, 0, 0.1, 0).unwrap();
        assert!(empty.per_trial.is_empty() && empty.mean_hamming.is_none());
    }

    #[test]
    fn exact_attack_is_perfect_and_private_one_is_not() {
        for kind in [GadgetKind::Scalar, GadgetKind::Objective, GadgetKind::Constraint] {
            let r = run_attack_experiment(kind, AttackSolver::Exact, 20, 10, 0.1, 5).unwrap();
            assert_eq!(r.perfect_reconstructions, 10, "{kind:?}");
        }
        let op = AttackSolver::ObjectivePrivate { epsilon: 1.0, delta: 1e-6 };
        let r = run_attack_experiment(GadgetKind::Objective, op, 20, 20, 0.1, 5).unwrap();
        assert!(r.mean_hamming.unwrap() > 0.1);
        assert!(r.per_trial.iter().all(|t| t.l1 <= 1.0 + 1e-9));
    }
}
