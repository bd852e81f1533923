//! Brute-force oracles and the seeded acceptance harness.
//!
//! Each `criterion_*` function runs one property check over a fixed seed list
//! and returns a [`CriterionResult`]. Trial `i` draws from its own ChaCha
//! stream, trials run in parallel, and results are merged in seed order, so
//! a failure reproduces bit-for-bit from the seed file.

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{
    build_gadget, gadget_diff, reconstruction_bound, run_attack_experiment, AttackSolver, BitDatabase, GadgetKind,
};
use crate::constraint_private::{
    setcover_density, solve_constraint_private, ApproxOracle, ConstraintPrivateParams, ExactVertexOracle,
    SetCoverOracle,
};
use crate::error::{Error, Result};
use crate::low_sensitivity::{
    accuracy_bound, accuracy_rhs, solve_low_sensitivity, BoundDims, LowSensKind, LowSensParams,
};
use crate::lp::{canonicalize, dot, max_violation, FeasibilityLp, LpInstance, Matrix, PublicRegion, Sense, SensitivityModel};
use crate::mechanisms::{exponential_mechanism, exponential_mechanism_probabilities, laplace_sample, BudgetAudit, QualityScore};
use crate::mw::{
    bregman_project, mw_step, regret_audit_dmw, regret_audit_mw, step_size, DmwEngine, EngineKind, Measure,
    MwEngine, RegretReport, TraceRecord,
};
use crate::objective_private::{exact_optimum, solve_objective_private};
use crate::rng::{stream, SolverRng};

/// Exhaustive slack check of one candidate point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub seed: u64,
    pub instance_id: usize,
    pub per_constraint_slack: Vec<f64>,
    pub max_slack: f64,
    pub alpha: f64,
    pub violated_beyond_alpha: usize,
    pub success: bool,
    #[serde(skip)]
    pub runtime: Option<Duration>,
}

impl TrialReport {
    pub fn with_ids(mut self, seed: u64, instance_id: usize) -> Self {
        self.seed = seed;
        self.instance_id = instance_id;
        self
    }

    pub fn with_runtime(mut self, runtime: Duration) -> Self {
        self.runtime = Some(runtime);
        self
    }
}

/// Slack `A_i x - b_i` of every row and the rows above `alpha`. Success means
/// no row exceeds `alpha`.
pub fn check_feasibility(lp: &FeasibilityLp, x: &[f64], alpha: f64) -> Result<TrialReport> {
    if x.len() != lp.d() {
        return Err(Error::Dimension(format!("point has {} entries for {} variables", x.len(), lp.d())));
    }
    let slack: Vec<f64> = lp
        .a()
        .iter_rows()
        .zip(lp.b())
        .map(|(row, bi)| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - bi)
        .collect();
    let violated = slack.iter().filter(|&&s| s > alpha).count();
    Ok(TrialReport {
        seed: 0,
        instance_id: 0,
        max_slack: slack.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        per_constraint_slack: slack,
        alpha,
        violated_beyond_alpha: violated,
        success: violated == 0,
        runtime: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Max,
    Min,
}

/// Index of the vertex optimizing `y^T A v` by exhaustive scan; lowest index
/// wins ties.
pub fn brute_force_vertex_argopt(y: &[f64], a: &Matrix, vertices: &[Vec<f64>], dir: Direction) -> Result<usize> {
    if vertices.is_empty() {
        return Err(Error::Empty("vertex set"));
    }
    if y.len() != a.rows() {
        return Err(Error::Dimension("weights and rows disagree".into()));
    }
    let weighted = a.transpose_mul_vec(y);
    let mut best = 0;
    let mut best_score = dot(&weighted, &vertices[0]);
    for (j, v) in vertices.iter().enumerate().skip(1) {
        let score = dot(&weighted, v);
        let better = match dir {
            Direction::Max => score > best_score,
            Direction::Min => score < best_score,
        };
        if better {
            best = j;
            best_score = score;
        }
    }
    Ok(best)
}

/// Largest observed `||P(A) - P(A')||_1` over random measure pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressReport {
    pub trials: usize,
    pub s: usize,
    pub max_gap: f64,
    pub bound: f64,
    pub violations: usize,
}

/// Absolute tolerance on the `2/s` projection bound.
pub const PROJECTION_TOL: f64 = 1e-12;

/// Projects a random measure with weights in `(0, 1]` and the same measure
/// with one extra coordinate in `[0, 1]`, and compares the two.
pub fn projection_sensitivity_stress<R: Rng + ?Sized>(trials: usize, k_max: usize, s: usize, rng: &mut R) -> Result<StressReport> {
    if s == 0 || s > k_max {
        return Err(crate::error::invalid("s", format!("need 1 <= s <= k_max = {k_max}, got {s}")));
    }
    let bound = 2.0 / s as f64;
    let mut max_gap: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..trials {
        let k = rng.gen_range(s..=k_max);
        let w: Vec<f64> = (0..k).map(|_| 1.0 - rng.gen::<f64>()).collect();
        let mut w2 = w.clone();
        w2.push(rng.gen::<f64>());
        let gap = projection_gap(&w, &w2, s)?;
        max_gap = max_gap.max(gap);
        if gap > bound + PROJECTION_TOL {
            violations += 1;
        }
    }
    Ok(StressReport {
        trials,
        s,
        max_gap,
        bound,
        violations,
    })
}

/// `||P(w) - P(w2)||_1` where `w` is padded with zeros to the length of `w2`.
pub fn projection_gap(w: &[f64], w2: &[f64], s: usize) -> Result<f64> {
    let p = bregman_project(&Measure::from_weights(w)?, s)?.probs;
    let q = bregman_project(&Measure::from_weights(w2)?, s)?.probs;
    Ok((0..q.len()).map(|i| (p.get(i).copied().unwrap_or(0.0) - q[i]).abs()).sum())
}

/// Result of recomputing a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub engine: Option<EngineKind>,
    pub steps: usize,
    /// Every stored distribution matches the dynamics implied by the losses.
    pub consistent: bool,
    pub first_inconsistent: Option<usize>,
    pub max_deviation: f64,
    /// Regret inequality recomputed from the trace; `None` for an empty trace
    /// or `eta = 0`.
    pub regret: Option<RegretReport>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.consistent && self.regret.as_ref().is_none_or(|r| r.holds)
    }
}

/// Entrywise tolerance when comparing stored and recomputed distributions.
pub const REPLAY_TOL: f64 = 1e-9;

/// Recomputes the distribution sequence from the losses alone and re-checks
/// the regret inequality.
pub fn regret_replay(records: &[TraceRecord]) -> Result<ReplayReport> {
    let Some(first) = records.first() else {
        return Ok(ReplayReport {
            engine: None,
            steps: 0,
            consistent: true,
            first_inconsistent: None,
            max_deviation: 0.0,
            regret: None,
        });
    };
    let k = first.distribution.len();
    for (i, r) in records.iter().enumerate() {
        if r.t != i + 1 || r.engine != first.engine || r.eta != first.eta || r.density_param != first.density_param {
            return Err(Error::MalformedTrace(format!("record {} breaks the sequence", i + 1)));
        }
        if r.distribution.len() != k || r.loss.len() != k {
            return Err(Error::MalformedTrace(format!("record {} has the wrong length", i + 1)));
        }
    }
    let eta = first.eta;
    let mut expected: Vec<Vec<f64>> = Vec::with_capacity(records.len());
    match first.engine {
        EngineKind::Mw => {
            let mut dist = vec![1.0 / k as f64; k];
            for r in records {
                expected.push(dist.clone());
                dist = mw_step(&dist, &r.loss, eta)?;
            }
        }
        EngineKind::Dmw => {
            let s = first
                .density_param
                .ok_or_else(|| Error::MalformedTrace("dense trace without a density parameter".into()))?;
            let mut measure = Measure::uniform(k)?;
            for r in records {
                expected.push(bregman_project(&measure, s)?.probs);
                measure.apply_loss(&r.loss, eta)?;
            }
        }
    }
    let mut max_deviation: f64 = 0.0;
    let mut first_inconsistent = None;
    for (r, e) in records.iter().zip(&expected) {
        let dev = r.distribution.iter().zip(e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        max_deviation = max_deviation.max(dev);
        if dev > REPLAY_TOL && first_inconsistent.is_none() {
            first_inconsistent = Some(r.t);
        }
    }
    let losses: Vec<Vec<f64>> = records.iter().map(|r| r.loss.clone()).collect();
    let dists: Vec<Vec<f64>> = records.iter().map(|r| r.distribution.clone()).collect();
    let regret = if eta > 0.0 {
        Some(match first.engine {
            EngineKind::Mw => regret_audit_mw(&losses, &dists, eta)?,
            EngineKind::Dmw => regret_audit_dmw(&losses, &dists, eta, first.density_param.unwrap_or(1))?,
        })
    } else {
        None
    };
    Ok(ReplayReport {
        engine: Some(first.engine),
        steps: records.len(),
        consistent: first_inconsistent.is_none(),
        first_inconsistent,
        max_deviation,
        regret,
    })
}

/// Kolmogorov-Smirnov distance between a sample and `Lap(scale)`.
pub fn ks_statistic_laplace(samples: &mut [f64], scale: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let cdf = |x: f64| {
        if x < 0.0 {
            0.5 * (x / scale).exp()
        } else {
            1.0 - 0.5 * (-x / scale).exp()
        }
    };
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// The committed acceptance seed list.
pub const ACCEPTANCE_SEEDS: &str = include_str!("../seeds/acceptance.txt");

pub fn acceptance_seeds() -> Vec<u64> {
    crate::rng::parse_seed_list(ACCEPTANCE_SEEDS).expect("seed file parses")
}

/// Random stream for trial `i` of a criterion. `salt` separates criteria that
/// share a seed list.
pub fn trial_rng(seeds: &[u64], salt: u32, i: usize) -> SolverRng {
    let seed = seeds[i % seeds.len()];
    let round = (i / seeds.len()) as u64;
    stream(seed, (u64::from(salt) << 32) | round)
}

/// `A` uniform in `[-1, 1]`, `b = A x* + u` for a random `x*` on the simplex
/// and `u` uniform in `[0, 0.1]`.
pub fn random_feasible_simplex_lp<R: Rng + ?Sized>(d: usize, m: usize, rng: &mut R) -> Result<FeasibilityLp> {
    let x = random_simplex_point(d, rng);
    let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
    let b = rows.iter().map(|r| dot(r, &x) + rng.gen_range(0.0..0.1)).collect();
    FeasibilityLp::new(Matrix::from_rows(rows)?, b, PublicRegion::Simplex)
}

pub fn random_simplex_point<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..d).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Query release on a `d`-bin histogram: each 0/1 query `q` with true answer
/// `a = q x` becomes the pair `q x <= a`, `-q x <= -a`.
pub fn query_release_lp<R: Rng + ?Sized>(d: usize, queries: usize, rng: &mut R) -> Result<FeasibilityLp> {
    let x = random_simplex_point(d, rng);
    let mut a = Matrix::zeros(0, d);
    let mut b = Vec::with_capacity(2 * queries);
    for _ in 0..queries {
        let q: Vec<f64> = (0..d).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect();
        let ans = dot(&q, &x);
        a.push_row(&q)?;
        b.push(ans);
        a.push_row(&q.iter().map(|v| -v).collect::<Vec<_>>())?;
        b.push(-ans);
    }
    FeasibilityLp::new(a, b, PublicRegion::Simplex)
}

/// A fractional set-cover instance restricted to its optimal cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveringInstance {
    /// Rows `-A_i x <= -1` over the slice `{x >= 0 : c^T x = opt}`.
    pub lp: FeasibilityLp,
    pub costs: Vec<f64>,
    pub opt: f64,
}

/// `d` sets over `m` elements, each membership with probability 0.3 and every
/// element in at least one set; costs uniform in `[1, 2]`.
pub fn random_covering_instance<R: Rng + ?Sized>(d: usize, m: usize, rng: &mut R) -> Result<CoveringInstance> {
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let mut row: Vec<f64> = (0..d).map(|_| f64::from(u8::from(rng.gen_bool(0.3)))).collect();
        if row.iter().all(|&v| v == 0.0) {
            row[rng.gen_range(0..d)] = 1.0;
        }
        rows.push(row);
    }
    let costs: Vec<f64> = (0..d).map(|_| rng.gen_range(1.0..=2.0)).collect();
    let a = Matrix::from_rows(rows)?;
    let neg_cost: Vec<f64> = costs.iter().map(|c| -c).collect();
    let cover = LpInstance::new(a.clone(), vec![1.0; m], Some(neg_cost), vec![Sense::Ge; m])?;
    let opt = -exact_optimum(&cover)?.value;
    let sliced = LpInstance::new(a, vec![1.0; m], None, vec![Sense::Ge; m])?
        .with_region(PublicRegion::ObjectiveSlice { c: costs.clone(), opt })?;
    let (lp, _) = canonicalize(&sliced)?;
    Ok(CoveringInstance { lp, costs, opt })
}

/// Simplex-constrained LP with `A` in `[0, 1]`, `b = A x0 + u` and `c` in `[0, 1]`.
pub fn random_objective_instance<R: Rng + ?Sized>(d: usize, m: usize, rng: &mut R) -> Result<LpInstance> {
    let x0 = random_simplex_point(d, rng);
    let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect();
    let b = rows.iter().map(|r| dot(r, &x0) + rng.gen_range(0.0..0.05)).collect();
    let c = (0..d).map(|_| rng.gen::<f64>()).collect();
    LpInstance::new(Matrix::from_rows(rows)?, b, Some(c), vec![Sense::Le; m])?.with_region(PublicRegion::Simplex)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    #[serde(skip)]
    pub runtime: Duration,
}

fn timed(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Result<CriterionResult> {
    let start = Instant::now();
    let (passed, detail) = f()?;
    Ok(CriterionResult {
        name: name.to_string(),
        passed,
        detail,
        runtime: start.elapsed(),
    })
}

pub const MECHANISM_SAMPLES: usize = 100_000;

/// Laplace KS statistic below 0.01 and exponential-mechanism TV distance
/// below 0.02 on ranges of size 2 to 8, each from `MECHANISM_SAMPLES` draws.
pub fn criterion_mechanism_fidelity(seeds: &[u64]) -> Result<CriterionResult> {
    timed("mechanism fidelity", || {
        let mut ks_max: f64 = 0.0;
        for (i, scale) in [1.0, 0.25, 3.0].into_iter().enumerate() {
            let mut rng = trial_rng(seeds, 1, i);
            let mut samples = (0..MECHANISM_SAMPLES)
                .map(|_| laplace_sample(scale, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            ks_max = ks_max.max(ks_statistic_laplace(&mut samples, scale));
        }
        let tvs = (2..=8usize)
            .into_par_iter()
            .map(|size| {
                let mut rng = trial_rng(seeds, 2, size);
                let values: Vec<f64> = (0..size).map(|_| rng.gen_range(0.0..5.0)).collect();
                let q = QualityScore::new(values, 1.0)?;
                let probs = exponential_mechanism_probabilities(&q, 1.0)?;
                let mut counts = vec![0usize; size];
                for _ in 0..MECHANISM_SAMPLES {
                    counts[exponential_mechanism(&q, 1.0, &mut rng)?] += 1;
                }
                let emp: Vec<f64> = counts.iter().map(|&c| c as f64 / MECHANISM_SAMPLES as f64).collect();
                Ok(total_variation(&emp, &probs))
            })
            .collect::<Result<Vec<f64>>>()?;
        let tv_max = tvs.into_iter().fold(0.0, f64::max);
        Ok((
            ks_max < 0.01 && tv_max < 0.02,
            format!("laplace KS max {ks_max:.5} (< 0.01), exp-mech TV max {tv_max:.5} (< 0.02)"),
        ))
    })
}

/// 1000 adjacent measure pairs for each `s` in {2, 5, 10}, `k <= 50`.
pub fn criterion_projection_sensitivity(seeds: &[u64]) -> Result<CriterionResult> {
    timed("projection sensitivity", || {
        let reports = [2usize, 5, 10]
            .into_par_iter()
            .map(|s| projection_sensitivity_stress(1000, 50, s, &mut trial_rng(seeds, 3, s)))
            .collect::<Result<Vec<_>>>()?;
        let violations: usize = reports.iter().map(|r| r.violations).sum();
        let detail = reports
            .iter()
            .map(|r| format!("s={} max gap {:.4} <= {:.4}", r.s, r.max_gap, r.bound))
            .collect::<Vec<_>>()
            .join("; ");
        Ok((violations == 0, format!("{detail}; violations {violations}")))
    })
}

/// 100 random loss sequences each for MW and dense MW, `T = 200`, `k <= 8`,
/// losses uniform in `[-1, 1]`; dense comparators exhaustive.
pub fn criterion_regret_audits(seeds: &[u64]) -> Result<CriterionResult> {
    const T: usize = 200;
    timed("regret audits", || {
        let runs = (0..200usize)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(seeds, 4, i);
                let k = rng.gen_range(2..=8);
                let eta = step_size(k, T);
                let losses: Vec<Vec<f64>> = (0..T).map(|_| (0..k).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
                let mut dists = Vec::with_capacity(T);
                if i < 100 {
                    let mut engine = MwEngine::new(k, eta)?;
                    for l in &losses {
                        dists.push(engine.distribution());
                        engine.update(l)?;
                    }
                    regret_audit_mw(&losses, &dists, eta)
                } else {
                    let s = rng.gen_range(1..=k);
                    let mut engine = DmwEngine::new(k, eta, s)?;
                    for l in &losses {
                        dists.push(engine.projection()?.probs);
                        engine.update(l)?;
                    }
                    regret_audit_dmw(&losses, &dists, eta, s)
                }
            })
            .collect::<Result<Vec<RegretReport>>>()?;
        let mw_fail = runs[..100].iter().filter(|r| !r.holds).count();
        let dmw_fail = runs[100..].iter().filter(|r| !r.holds).count();
        let min_slack = runs.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
        let hyp = runs.iter().all(|r| r.within_hypothesis);
        Ok((
            mw_fail == 0 && dmw_fail == 0 && hyp,
            format!("MW failures {mw_fail}/100, DMW failures {dmw_fail}/100, min slack {min_slack:.4}"),
        ))
    })
}

/// Collected budget audits from solver runs, checked by
/// [`criterion_budget_accounting`].
#[derive(Debug, Clone, Default)]
pub struct AuditLog {
    /// `(solver label, expected k, audit)`.
    pub entries: Vec<(String, usize, BudgetAudit)>,
}

/// Every low-sensitivity solver with `Delta = 0`, and again with
/// `epsilon' = 1e6`, meets `3 rho (eta + ln d / (eta T))` on 100 random
/// feasible instances with `d <= 10`, `m <= 50`.
pub fn criterion_noiseless_equivalence(seeds: &[u64], log: &mut AuditLog) -> Result<CriterionResult> {
    timed("noiseless-limit solver equivalence", || {
        let runs = (0..100usize)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(seeds, 5, i);
                let d = rng.gen_range(2..=10);
                let m = rng.gen_range(1..=50);
                let lp = random_feasible_simplex_lp(d, m, &mut rng)?;
                let mut out = Vec::new();
                for kind in [LowSensKind::Scalar, LowSensKind::Row, LowSensKind::Column] {
                    let zero = LowSensParams::new(1.0, 1e-6, 0.3, 0.1, 0.0);
                    let mut loud = LowSensParams::new(1.0, 1e-6, 0.3, 0.1, 1e-3);
                    loud.epsilon_prime_override = Some(1e6);
                    for p in [zero, loud] {
                        let r = solve_low_sensitivity(kind, &lp, &p, &mut rng, false)?;
                        let ok = r.solution.max_slack() <= r.derived.alpha_pst + 1e-9;
                        let k = expected_k(kind, d, r.derived.t);
                        out.push((kind, ok, r.private.then_some((k, r.audit))));
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut failures = 0;
        for run in runs.into_iter().flatten() {
            if !run.1 {
                failures += 1;
            }
            if let Some((k, audit)) = run.2 {
                log.entries.push((format!("{:?}", run.0), k, audit));
            }
        }
        Ok((failures == 0, format!("failures {failures}/600 (100 instances x 3 solvers x 2 limits)")))
    })
}

fn expected_k(kind: LowSensKind, d: usize, t: usize) -> usize {
    match kind {
        LowSensKind::Scalar => t,
        LowSensKind::Row => 2 * d * t,
        LowSensKind::Column => 2 * t,
    }
}

/// Exact-oracle runs on 100 random covering instances leave fewer than `s`
/// rows violated beyond `alpha`; private set-cover runs at `epsilon = 5`,
/// `d = 8`, `m = 40` meet the same bound in at least 95 of 100 trials at the
/// density the accuracy requirement asks for.
pub fn criterion_constraint_private(seeds: &[u64], log: &mut AuditLog) -> Result<CriterionResult> {
    timed("constraint-private end-to-end", || {
        const S_EXACT: usize = 4;
        let exact = (0..100usize)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(seeds, 6, i);
                let d = rng.gen_range(4..=10);
                let m = rng.gen_range(10..=40);
                let inst = random_covering_instance(d, m, &mut rng)?;
                let mut oracle = ExactVertexOracle::new(&inst.lp)?;
                let rho = oracle.rho();
                let params = ConstraintPrivateParams {
                    epsilon: 1.0,
                    delta: 1e-6,
                    alpha: 0.25 * rho,
                    s: S_EXACT,
                    rho,
                };
                let out = solve_constraint_private(&inst.lp, &mut oracle, &params, &mut rng, false)?;
                Ok((out.violated.len() < S_EXACT, out.derived.t, out.audit))
            })
            .collect::<Result<Vec<_>>>()?;
        let exact_fail = exact.iter().filter(|r| !r.0).count();
        for (_, t, audit) in exact {
            log.entries.push(("constraint (exact oracle)".into(), t, audit));
        }

        let private = (0..100usize)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(seeds, 7, i);
                let inst = random_covering_instance(8, 40, &mut rng)?;
                let rho = SetCoverOracle::new(inst.costs.clone(), inst.opt, 1)?.rho();
                let alpha = rho;
                let density = setcover_density(&inst.costs, inst.opt, 40, 5.0, 1e-6, alpha, 0.1)?;
                let mut runs = Vec::new();
                for s in [density.s_run, 10] {
                    let mut oracle = SetCoverOracle::new(inst.costs.clone(), inst.opt, s)?;
                    let params = ConstraintPrivateParams {
                        epsilon: 5.0,
                        delta: 1e-6,
                        alpha,
                        s,
                        rho,
                    };
                    let out = solve_constraint_private(&inst.lp, &mut oracle, &params, &mut rng, false)?;
                    runs.push((out.violated.len() < s, out.derived.t, out.audit));
                }
                Ok((density, runs))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut met = 0;
        let mut met_s10 = 0;
        let mut vacuous = 0;
        let mut s_formula_min = f64::INFINITY;
        for (density, runs) in private {
            vacuous += usize::from(density.vacuous);
            s_formula_min = s_formula_min.min(density.s_formula);
            met += usize::from(runs[0].0);
            met_s10 += usize::from(runs[1].0);
            for (_, t, audit) in runs {
                log.entries.push(("constraint (set-cover oracle)".into(), t, audit));
            }
        }
        Ok((
            exact_fail == 0 && met >= 95,
            format!(
                "exact oracle failures {exact_fail}/100 (s = {S_EXACT}); set-cover runs meeting the bound {met}/100 \
                 (required density >= {s_formula_min:.0} vs m = 40, vacuous in {vacuous}/100); \
                 informational s = 10: {met_s10}/100"
            ),
        ))
    })
}

/// 200 trials on random `d = 5` simplex instances with `Delta_1 = 1e-3`,
/// `epsilon = 1`, `delta = 1e-6`: exact feasibility every time and the gap
/// to the optimum within the printed `alpha` in at least 170 trials.
pub fn criterion_objective_private(seeds: &[u64], log: &mut AuditLog) -> Result<CriterionResult> {
    timed("objective-private guarantee", || {
        let runs = (0..200usize)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(seeds, 8, i);
                let lp = random_objective_instance(5, 3, &mut rng)?;
                let opt = exact_optimum(&lp)?.value;
                let out = solve_objective_private(&lp, 1e-3, 1.0, 1e-6, &mut rng)?;
                let feasible = lp.is_feasible(&out.solution.x, 1e-9);
                let gap = opt - out.solution.objective_value.unwrap_or(f64::NEG_INFINITY);
                Ok((feasible, gap <= out.alpha, gap, out.audit))
            })
            .collect::<Result<Vec<_>>>()?;
        let feasible = runs.iter().filter(|r| r.0).count();
        let within = runs.iter().filter(|r| r.1).count();
        let worst = runs.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
        for r in runs {
            log.entries.push(("objective".into(), 5, r.3));
        }
        // 1 - beta = 0.9 with roughly three binomial standard deviations of slack
        Ok((
            feasible == 200 && within >= 170,
            format!("exactly feasible {feasible}/200, gap <= alpha {within}/200 (>= 170), worst gap {worst:.4}"),
        ))
    })
}

/// Desk-scale parameters for the Monte-Carlo accuracy runs: query release
/// with `d = 6` bins and 6 queries (`m = 12`), `epsilon = 1`,
/// `delta = 1e-6`, `beta = 0.1`.
pub fn accuracy_models() -> [SensitivityModel; 3] {
    [
        SensitivityModel::LowSensScalar { delta_inf: 5e-5 },
        SensitivityModel::LowSensRow { delta_inf: 5e-6 },
        SensitivityModel::LowSensColumn { delta_1: 2e-5 },
    ]
}

/// Fixed points of the three accuracy bounds satisfy their inequalities to
/// relative 1e-6, and 100 solver runs per model meet the bound in at least 90.
pub fn criterion_accuracy_formulas(seeds: &[u64], log: &mut AuditLog) -> Result<CriterionResult> {
    let (eps, delta, beta) = (1.0, 1e-6, 0.1);
    timed("scalar/row/column accuracy formulas", || {
        let dims = BoundDims { d: 6, m: 12, rho: 1.0 };
        let mut substitution_ok = true;
        let mut details = Vec::new();
        for (salt, model) in accuracy_models().into_iter().enumerate() {
            let alpha = accuracy_bound(&model, dims, eps, delta, beta)?;
            let rhs = accuracy_rhs(&model, dims, eps, delta, beta, alpha)?;
            substitution_ok &= (alpha - rhs).abs() / alpha <= 1e-6;
            let kind = LowSensKind::for_model(&model)?;
            let sensitivity = model.delta().unwrap_or(0.0);
            let runs = (0..100usize)
                .into_par_iter()
                .map(|i| {
                    let mut rng = trial_rng(seeds, 9 + salt as u32, i);
                    let lp = query_release_lp(6, 6, &mut rng)?;
                    // the scalar bound assumes width 1; query rows have max |A| <= 1
                    let p = LowSensParams::new(eps, delta, alpha, beta, sensitivity);
                    let out = solve_low_sensitivity(kind, &lp, &p, &mut rng, false)?;
                    Ok((out.solution.max_slack() <= alpha, out.derived.t, out.audit))
                })
                .collect::<Result<Vec<_>>>()?;
            let met = runs.iter().filter(|r| r.0).count();
            for (_, t, audit) in runs {
                log.entries.push((format!("{kind:?}"), expected_k(kind, 6, t), audit));
            }
            substitution_ok &= met >= 90;
            details.push(format!("{}: alpha {alpha:.4}, met {met}/100", model.name()));
        }
        Ok((substitution_ok, details.join("; ")))
    })
}

/// Exact solve and rounding recovers `D` on all three gadgets (`n = 50`,
/// 100 seeds); `c(0, 0, 0) = 1/4`; neighbor diffs touch only the claimed
/// coefficients.
pub fn criterion_attack_lab(seeds: &[u64]) -> Result<CriterionResult> {
    timed("attack lab", || {
        let mut perfect = 0;
        let mut total = 0;
        for kind in [GadgetKind::Scalar, GadgetKind::Objective, GadgetKind::Constraint] {
            let reports = seeds[..100.min(seeds.len())]
                .par_iter()
                .map(|&seed| run_attack_experiment(kind, AttackSolver::Exact, 50, 1, 0.0, seed))
                .collect::<Result<Vec<_>>>()?;
            perfect += reports.iter().map(|r| r.perfect_reconstructions).sum::<usize>();
            total += reports.len();
        }
        let c0 = reconstruction_bound(0.0, 0.0, 0.0)?.c;
        let diffs_ok = neighbor_diffs_hold(&mut trial_rng(seeds, 12, 0), 50)?;
        Ok((
            perfect == total && c0 == 0.25 && diffs_ok,
            format!("perfect reconstructions {perfect}/{total}, c(0,0,0) = {c0}, neighbor diffs ok: {diffs_ok}"),
        ))
    })
}

/// Every bit flip of the scalar gadget changes exactly its two canonical
/// right-hand sides; every zero/one swap changes exactly two objective
/// entries of the objective gadget and two entries of the private row (and
/// its negated copy) of the constraint gadget.
pub fn neighbor_diffs_hold<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<bool> {
    let db = BitDatabase::random_balanced(n, rng)?;
    let scalar = build_gadget(GadgetKind::Scalar, &db)?;
    for i in 0..n {
        let diff = gadget_diff(&scalar, &build_gadget(GadgetKind::Scalar, &db.flip(i))?)?;
        if diff.b_entries != [2 * i, 2 * i + 1] || !diff.a_entries.is_empty() || !diff.c_entries.is_empty() {
            return Ok(false);
        }
    }
    let objective = build_gadget(GadgetKind::Objective, &db)?;
    let constraint = build_gadget(GadgetKind::Constraint, &db)?;
    let zeros: Vec<usize> = (0..n).filter(|&i| db.bits()[i] == 0).collect();
    let ones: Vec<usize> = (0..n).filter(|&i| db.bits()[i] == 1).collect();
    for &i in &zeros {
        for &j in &ones {
            let nb = db.swap(i, j);
            let (lo, hi) = (i.min(j), i.max(j));
            let o = gadget_diff(&objective, &build_gadget(GadgetKind::Objective, &nb)?)?;
            if o.c_entries != [lo, hi] || !o.a_entries.is_empty() || !o.b_entries.is_empty() {
                return Ok(false);
            }
            let c = gadget_diff(&constraint, &build_gadget(GadgetKind::Constraint, &nb)?)?;
            if c.a_entries != [(0, lo), (0, hi), (1, lo), (1, hi)] || !c.b_entries.is_empty() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Every logged audit plans the expected number of mechanisms, charges no
/// more than planned, and satisfies `k * 8 ln(1/delta) * eps'^2 = eps^2` to
/// machine precision. Row privacy plans `2dT` but charges `(d + 1) T`.
pub fn criterion_budget_accounting(log: &AuditLog) -> Result<CriterionResult> {
    timed("budget accounting", || {
        let mut worst: f64 = 0.0;
        let mut bad_k = 0;
        let mut bad_labels: Vec<&str> = Vec::new();
        for (label, k, audit) in &log.entries {
            worst = worst.max(audit.composition_identity_error());
            if audit.planned_k != *k || audit.charges.len() > *k {
                bad_k += 1;
                if !bad_labels.contains(&label.as_str()) {
                    bad_labels.push(label);
                }
            }
        }
        Ok((
            !log.entries.is_empty() && worst <= 1e-12 && bad_k == 0,
            format!(
                "{} solver runs, max relative identity error {worst:.2e}, plan mismatches or overdrawn ledgers {bad_k}{}",
                log.entries.len(),
                if bad_labels.is_empty() { String::new() } else { format!(" in {bad_labels:?}") }
            ),
        ))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Mechanisms,
    Projection,
    Regret,
    Solvers,
    Attacks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub results: Vec<CriterionResult>,
}

pub fn run_suite(suite: Suite, seeds: &[u64]) -> Result<SuiteReport> {
    if seeds.is_empty() {
        return Err(Error::Empty("seed list"));
    }
    let results = match suite {
        Suite::Mechanisms => vec![criterion_mechanism_fidelity(seeds)?],
        Suite::Projection => vec![criterion_projection_sensitivity(seeds)?],
        Suite::Regret => vec![criterion_regret_audits(seeds)?, trace_replay_check(seeds)?],
        Suite::Solvers => {
            let mut log = AuditLog::default();
            let mut r = vec![
                criterion_noiseless_equivalence(seeds, &mut log)?,
                criterion_constraint_private(seeds, &mut log)?,
                criterion_objective_private(seeds, &mut log)?,
                criterion_accuracy_formulas(seeds, &mut log)?,
            ];
            r.push(criterion_budget_accounting(&log)?);
            r
        }
        Suite::Attacks => vec![criterion_attack_lab(seeds)?],
    };
    Ok(SuiteReport {
        suite,
        passed: results.iter().all(|r| r.passed),
        results,
    })
}

/// Fresh traces from both solver families replay cleanly; a single perturbed
/// loss coordinate is flagged.
pub fn trace_replay_check(seeds: &[u64]) -> Result<CriterionResult> {
    timed("trace replay", || {
        let mut rng = trial_rng(seeds, 13, 0);
        let lp = random_feasible_simplex_lp(5, 8, &mut rng)?;
        let p = LowSensParams::new(1.0, 1e-6, 0.5, 0.1, 1e-3);
        let mw_trace = solve_low_sensitivity(LowSensKind::Scalar, &lp, &p, &mut rng, true)?
            .trace
            .unwrap_or_default();
        let inst = random_covering_instance(5, 10, &mut rng)?;
        let mut oracle = ExactVertexOracle::new(&inst.lp)?;
        let rho = oracle.rho();
        let params = ConstraintPrivateParams {
            epsilon: 1.0,
            delta: 1e-6,
            alpha: rho,
            s: 3,
            rho,
        };
        let dmw_trace = solve_constraint_private(&inst.lp, &mut oracle, &params, &mut rng, true)?
            .trace
            .unwrap_or_default();
        let mut ok = true;
        for trace in [mw_trace, dmw_trace] {
            ok &= regret_replay(&trace)?.passed();
            let mut tampered = trace.clone();
            let mid = tampered.len() / 2;
            tampered[mid].loss[0] += 0.25;
            ok &= !regret_replay(&tampered)?.consistent;
        }
        Ok((ok, format!("fresh traces pass and tampered traces are flagged: {ok}")))
    })
}

/// Row with the largest violation at `x`, lowest index on ties.
pub fn brute_force_dual_argmax(lp: &FeasibilityLp, x: &[f64]) -> usize {
    max_violation(lp, x).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint_private::SetCoverOracle;
    use crate::low_sensitivity::exp_mech_dual_oracle;
    use crate::rng::rng_from_seed;

    fn lp(rows: Vec<Vec<f64>>, b: Vec<f64>) -> FeasibilityLp {
        FeasibilityLp::new(Matrix::from_rows(rows).unwrap(), b, PublicRegion::Simplex).unwrap()
    }

    #[test]
    fn feasibility_counts() {
        let f = lp(vec![vec![1.0, 0.0]; 6], vec![1.0; 6]);
        assert_eq!(check_feasibility(&f, &[0.5, 0.5], 0.0).unwrap().violated_beyond_alpha, 0);
        let mut b = vec![1.0; 6];
        b[2] = 0.7;
        b[5] = 0.7;
        let f = lp(vec![vec![1.0, 0.0]; 6], b);
        let r = check_feasibility(&f, &[1.0, 0.0], 0.2).unwrap();
        assert_eq!(r.violated_beyond_alpha, 2);
        assert!(!r.success);
        assert!((r.max_slack - max_violation(&f, &[1.0, 0.0]).1).abs() < 1e-15);
    }

    #[test]
    fn argopt_ties_and_single() {
        let a = Matrix::identity(2);
        let verts = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(brute_force_vertex_argopt(&[0.5, 0.5], &a, &verts, Direction::Max).unwrap(), 0);
        assert_eq!(brute_force_vertex_argopt(&[0.5, 0.5], &a, &verts[..1], Direction::Min).unwrap(), 0);
        assert!(brute_force_vertex_argopt(&[0.5, 0.5], &a, &[], Direction::Min).is_err());
    }

    #[test]
    fn setcover_oracle_agrees_with_brute_force_at_high_epsilon() {
        let mut rng = rng_from_seed(11);
        let mut agree = 0;
        let trials = 2000;
        for _ in 0..trials {
            let inst = random_covering_instance(6, 12, &mut rng).unwrap();
            let mut oracle = SetCoverOracle::new(inst.costs.clone(), inst.opt, 4).unwrap();
            let y = bregman_project(&Measure::from_weights(&(0..12).map(|_| rng.gen::<f64>()).collect::<Vec<_>>()).unwrap(), 4).unwrap();
            let x = oracle.best_response(&y, &inst.lp, 1e6, &mut rng).unwrap();
            // maximizing sum y_i (b_i - A_i v) is minimizing y^T A v
            let j = brute_force_vertex_argopt(&y.probs, inst.lp.a(), oracle.vertices(), Direction::Min).unwrap();
            if x == oracle.vertices()[j] {
                agree += 1;
            }
        }
        assert!(agree as f64 >= 0.999 * trials as f64, "{agree}");
    }

    #[test]
    fn dual_oracle_agrees_with_brute_force() {
        let mut rng = rng_from_seed(12);
        for _ in 0..200 {
            let f = random_feasible_simplex_lp(5, 10, &mut rng).unwrap();
            let x = random_simplex_point(5, &mut rng);
            let exact = exp_mech_dual_oracle(f.a(), f.b(), &x, 1.0, 0.0, &mut rng).unwrap();
            assert_eq!(exact, brute_force_dual_argmax(&f, &x));
        }
    }

    #[test]
    fn projection_gap_hand_example() {
        let gap = projection_gap(&[1.0, 1.0], &[1.0, 1.0, 1.0], 2).unwrap();
        assert!((gap - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(projection_gap(&[0.3, 0.9, 0.5], &[0.3, 0.9, 0.5, 0.0], 2).unwrap(), 0.0);
        let r = projection_sensitivity_stress(1000, 50, 5, &mut rng_from_seed(1)).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.max_gap <= 0.4 + PROJECTION_TOL);
    }

    #[test]
    fn ks_detects_wrong_scale() {
        let mut rng = rng_from_seed(3);
        let mut s: Vec<f64> = (0..20_000).map(|_| laplace_sample(1.0, &mut rng).unwrap()).collect();
        assert!(ks_statistic_laplace(&mut s.clone(), 1.0) < 0.015);
        assert!(ks_statistic_laplace(&mut s, 1.5) > 0.05);
    }

    #[test]
    fn replay_empty_and_malformed() {
        assert!(regret_replay(&[]).unwrap().passed());
        let rec = TraceRecord {
            t: 2,
            engine: EngineKind::Mw,
            eta: 0.1,
            density_param: None,
            distribution: vec![0.5, 0.5],
            loss: vec![0.0, 0.0],
        };
        assert!(matches!(regret_replay(&[rec]), Err(Error::MalformedTrace(_))));
    }

    #[test]
    fn replay_detects_tampering() {
        let f = random_feasible_simplex_lp(4, 6, &mut rng_from_seed(2)).unwrap();
        let p = LowSensParams::new(1.0, 1e-6, 0.5, 0.1, 0.0);
        let trace = solve_low_sensitivity(LowSensKind::Row, &f, &p, &mut rng_from_seed(2), true)
            .unwrap()
            .trace
            .unwrap();
        let report = regret_replay(&trace).unwrap();
        assert!(report.passed() && report.max_deviation < 1e-12);
        let mut bad = trace.clone();
        bad[3].loss[1] -= 0.1;
        let r = regret_replay(&bad).unwrap();
        assert_eq!(r.first_inconsistent, Some(5));
    }

    #[test]
    fn dense_trace_replay() {
        let inst = random_covering_instance(5, 8, &mut rng_from_seed(4)).unwrap();
        let mut oracle = ExactVertexOracle::new(&inst.lp).unwrap();
        let rho = oracle.rho();
        let params = ConstraintPrivateParams {
            epsilon: 1.0,
            delta: 1e-6,
            alpha: rho,
            s: 2,
            rho,
        };
        let trace = solve_constraint_private(&inst.lp, &mut oracle, &params, &mut rng_from_seed(4), true)
            .unwrap()
            .trace
            .unwrap();
        assert!(regret_replay(&trace).unwrap().passed());
    }

    #[test]
    fn covering_opt_is_tight() {
        let inst = random_covering_instance(6, 15, &mut rng_from_seed(5)).unwrap();
        let x = exact_optimum(&inst.lp.to_instance()).unwrap().x;
        assert!(inst.lp.slack(&x).iter().all(|s| *s <= 1e-9));
        assert!((dot(&inst.costs, &x) - inst.opt).abs() < 1e-9);
    }

    #[test]
    fn trial_streams_differ() {
        let seeds = [1, 2];
        let a: u64 = trial_rng(&seeds, 0, 0).gen();
        let b: u64 = trial_rng(&seeds, 0, 2).gen();
        let c: u64 = trial_rng(&seeds, 1, 0).gen();
        assert!(a != b && a != c);
    }
}
