//! Acceptance suite: criteria 1 to 10, one pass/fail line each.
//!
//! Run with `cargo test -p privlp --test acceptance -- --nocapture` to see
//! the lines. Every Monte-Carlo criterion draws from the committed seed list.

use std::time::{Duration, Instant};

use privlp::attack::{AttackSolver, GadgetKind};
use privlp::lp::{LpInstance, PrivateLp, PublicRegion, Sense, SensitivityModel};
use privlp::mw::trace_to_json_lines;
use privlp::report::{
    attack_report, bound_report, solve_report, to_json, BoundKind, BoundRequest, OracleChoice, SolveCommand,
    SolveOptions,
};
use privlp::rng::rng_from_seed;
use privlp::verification::{self as v, AuditLog, CriterionResult};

struct Line {
    id: u8,
    result: CriterionResult,
    limit: Duration,
}

impl Line {
    fn passed(&self) -> bool {
        self.result.passed && self.result.runtime <= self.limit
    }

    fn print(&self) {
        println!(
            "criterion {:>2} [{}] {}: {} ({:.2}s, limit {}s)",
            self.id,
            if self.passed() { "PASS" } else { "FAIL" },
            self.result.name,
            self.result.detail,
            self.result.runtime.as_secs_f64(),
            self.limit.as_secs()
        );
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn instance(model: SensitivityModel, lp: LpInstance) -> PrivateLp {
    PrivateLp {
        instance: lp,
        sensitivity: model,
    }
}

/// One instance per solve command, from the same generators the harness uses.
fn determinism_cases() -> Vec<(SolveCommand, PrivateLp, SolveOptions)> {
    let mut rng = rng_from_seed(77);
    let q = v::query_release_lp(6, 6, &mut rng).unwrap().to_instance();
    let cover = v::random_covering_instance(6, 12, &mut rng).unwrap();
    let objective = v::random_objective_instance(5, 3, &mut rng).unwrap();

    let mut low = SolveOptions::new(1.0, 1e-6, 2024);
    low.alpha = Some(0.4);
    low.trials = 3;
    low.trace = true;
    let mut constraint = SolveOptions::new(5.0, 1e-6, 2024);
    constraint.alpha = Some(1.0);
    constraint.trace = true;
    let mut exact = constraint.clone();
    exact.oracle = OracleChoice::Exact;
    exact.s = Some(3);
    let objective_opts = SolveOptions::new(1.0, 1e-6, 2024);

    vec![
        (
            SolveCommand::Constraint,
            instance(SensitivityModel::HighSensConstraint, cover.lp.to_instance()),
            constraint,
        ),
        (
            SolveCommand::Constraint,
            instance(SensitivityModel::HighSensConstraint, cover.lp.to_instance()),
            exact,
        ),
        (SolveCommand::Scalar, instance(SensitivityModel::LowSensScalar { delta_inf: 5e-5 }, q.clone()), low.clone()),
        (SolveCommand::Row, instance(SensitivityModel::LowSensRow { delta_inf: 5e-6 }, q.clone()), low.clone()),
        (SolveCommand::Column, instance(SensitivityModel::LowSensColumn { delta_1: 2e-5 }, q), low),
        (
            SolveCommand::Objective,
            instance(SensitivityModel::LowSensObjective { delta_1: 1e-3 }, objective),
            objective_opts,
        ),
    ]
}

fn criterion_determinism() -> CriterionResult {
    let start = Instant::now();
    let mut identical = 0;
    let mut total = 0;
    let mut record = |a: String, b: String| {
        total += 1;
        if a == b {
            identical += 1;
        }
    };
    for (cmd, lp, opts) in determinism_cases() {
        let run = || {
            let r = solve_report(cmd, &lp, &opts).unwrap();
            (to_json(&r.report), r.trace.map(|t| trace_to_json_lines(&t)).unwrap_or_default())
        };
        let (a, ta) = run();
        let (b, tb) = run();
        record(a, b);
        record(ta, tb);
    }
    for gadget in [GadgetKind::Scalar, GadgetKind::Objective, GadgetKind::Constraint] {
        let a = to_json(&attack_report(gadget, AttackSolver::Exact, 20, 4, 0.1, 9).unwrap());
        let b = to_json(&attack_report(gadget, AttackSolver::Exact, 20, 4, 0.1, 9).unwrap());
        record(a, b);
    }
    let op = AttackSolver::ObjectivePrivate { epsilon: 1.0, delta: 1e-6 };
    record(
        to_json(&attack_report(GadgetKind::Objective, op, 20, 4, 0.1, 9).unwrap()),
        to_json(&attack_report(GadgetKind::Objective, op, 20, 4, 0.1, 9).unwrap()),
    );
    let req = BoundRequest {
        kind: BoundKind::Row,
        epsilon: 1.0,
        delta: 1e-6,
        beta: 0.1,
        sensitivity: 5e-6,
        d: 6,
        m: 12,
        rho: 1.0,
    };
    record(to_json(&bound_report(&req).unwrap()), to_json(&bound_report(&req).unwrap()));
    CriterionResult {
        name: "determinism".into(),
        passed: identical == total,
        detail: format!("byte-identical report pairs {identical}/{total} (solve reports, traces, attacks, bounds)"),
        runtime: start.elapsed(),
    }
}

#[test]
fn acceptance_criteria() {
    let seeds = v::acceptance_seeds();
    assert!(seeds.len() >= 256);
    let mut log = AuditLog::default();
    let mut lines = vec![
        Line { id: 1, result: v::criterion_mechanism_fidelity(&seeds).unwrap(), limit: secs(10) },
        Line { id: 2, result: v::criterion_projection_sensitivity(&seeds).unwrap(), limit: secs(5) },
        Line { id: 3, result: v::criterion_regret_audits(&seeds).unwrap(), limit: secs(30) },
        Line { id: 4, result: v::criterion_noiseless_equivalence(&seeds, &mut log).unwrap(), limit: secs(120) },
        Line { id: 5, result: v::criterion_constraint_private(&seeds, &mut log).unwrap(), limit: secs(300) },
        Line { id: 6, result: v::criterion_objective_private(&seeds, &mut log).unwrap(), limit: secs(60) },
        Line { id: 7, result: v::criterion_accuracy_formulas(&seeds, &mut log).unwrap(), limit: secs(300) },
        Line { id: 8, result: v::criterion_attack_lab(&seeds).unwrap(), limit: secs(60) },
    ];
    lines.push(Line { id: 9, result: v::criterion_budget_accounting(&log).unwrap(), limit: secs(5) });
    lines.push(Line { id: 10, result: criterion_determinism(), limit: secs(60) });

    println!();
    for line in &lines {
        line.print();
    }
    let failed: Vec<u8> = lines.iter().filter(|l| !l.passed()).map(|l| l.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn trace_replay_passes() {
    let r = v::trace_replay_check(&v::acceptance_seeds()).unwrap();
    assert!(r.passed, "{}", r.detail);
}

#[test]
fn region_of_sample_instances() {
    for (_, lp, _) in determinism_cases() {
        assert!(matches!(
            lp.instance.region(),
            PublicRegion::Simplex | PublicRegion::ObjectiveSlice { .. }
        ));
        assert!(lp.instance.senses().iter().all(|s| *s == Sense::Le));
    }
}
