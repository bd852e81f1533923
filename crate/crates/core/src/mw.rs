//! Multiplicative weights engines.
//!
//! [`MwEngine`] is the standard Hedge update over a probability vector.
//! [`DmwEngine`] keeps an unnormalized measure and projects it onto the
//! `1/s`-dense distributions before each loss is revealed. Both keep their
//! state as log-weights so long runs do not underflow.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Step sizes must be finite and nonnegative; zero freezes the weights, which
/// is what `sqrt(ln k / T)` gives for a single action.
fn check_eta(eta: f64) -> Result<()> {
    if eta >= 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(invalid("eta", format!("must be finite and >= 0, got {eta}")))
    }
}

fn check_audit_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(invalid("eta", format!("regret bounds need a positive step size, got {eta}")))
    }
}

/// Number of rounds: `ceil(raw)`, raised so that `eta = sqrt(ln k / T)` is at
/// most 1/2, and at least one.
pub fn rounds(raw: f64, actions: usize) -> usize {
    let floor = (4.0 * (actions as f64).ln()).ceil();
    raw.ceil().max(floor).max(1.0) as usize
}

/// `sqrt(ln k / T)`.
pub fn step_size(actions: usize, rounds: usize) -> f64 {
    ((actions as f64).ln() / rounds as f64).sqrt()
}

fn check_loss(loss: &[f64], k: usize) -> Result<()> {
    if loss.len() != k {
        return Err(Error::Dimension(format!("loss has {} entries for {k} actions", loss.len())));
    }
    if loss.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("loss vector"));
    }
    Ok(())
}

/// `ln(e^a + e^b)` without overflow; `-inf` is the identity.
fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Normalizes log-weights into a probability vector.
fn softmax(log_w: &[f64]) -> Vec<f64> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// A nonnegative measure over actions, stored as natural-log weights
/// (`-inf` for a zero weight).
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    log_weights: Vec<f64>,
}

impl Measure {
    /// The uniform measure of density 1.
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Empty("action set"));
        }
        Ok(Measure {
            log_weights: vec![-(k as f64).ln(); k],
        })
    }

    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("action set"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("weights", "must be finite and nonnegative"));
        }
        Ok(Measure {
            log_weights: weights.iter().map(|w| w.ln()).collect(),
        })
    }

    pub fn from_log_weights(log_weights: Vec<f64>) -> Result<Self> {
        if log_weights.is_empty() {
            return Err(Error::Empty("action set"));
        }
        if log_weights.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(Error::NonFinite("log weights"));
        }
        Ok(Measure { log_weights })
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Weights in linear scale. May underflow for very long runs.
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    /// `|A|`, the total weight.
    pub fn density(&self) -> f64 {
        self.log_weights.iter().fold(f64::NEG_INFINITY, |acc, &l| log_add_exp(acc, l)).exp()
    }

    pub fn support(&self) -> usize {
        self.log_weights.iter().filter(|l| l.is_finite()).count()
    }

    /// `A_a <- exp(-eta l_a) A_a`, with no normalization.
    pub fn apply_loss(&mut self, loss: &[f64], eta: f64) -> Result<()> {
        check_eta(eta)?;
        check_loss(loss, self.len())?;
        for (l, x) in self.log_weights.iter_mut().zip(loss) {
            *l -= eta * x;
        }
        Ok(())
    }
}

/// A probability vector whose entries are at most `1/s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseDistribution {
    pub probs: Vec<f64>,
    pub s: usize,
}

/// Bregman projection onto the `1/s`-dense distributions:
/// `(1/s) min{1, c A_a}` with `c` chosen so the entries sum to one.
///
/// Solved exactly: sort the weights, cap the `k` largest for the smallest `k`
/// that leaves the next weight under the cap, and set
/// `c = (s - k) / (sum of the uncapped weights)`.
pub fn bregman_project(measure: &Measure, s: usize) -> Result<DenseDistribution> {
    if s == 0 {
        return Err(invalid("s", "density parameter must be at least 1"));
    }
    let support = measure.support();
    if support < s {
        return Err(Error::SupportTooSmall { support, s });
    }
    let lw = measure.log_weights();
    let n = lw.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| lw[j].total_cmp(&lw[i]));

    // suffix[j] = ln sum of the weights ranked j.. in descending order
    let mut suffix = vec![f64::NEG_INFINITY; n + 1];
    for j in (0..n).rev() {
        suffix[j] = log_add_exp(lw[order[j]], suffix[j + 1]);
    }

    let mut capped = s - 1;
    let mut log_c = ((s - capped) as f64).ln() - suffix[capped];
    for k in 0..s {
        let lc = ((s - k) as f64).ln() - suffix[k];
        if lc + lw[order[k]] <= 0.0 {
            capped = k;
            log_c = lc;
            break;
        }
    }

    let inv_s = 1.0 / s as f64;
    let mut probs = vec![0.0; n];
    for (rank, &a) in order.iter().enumerate() {
        probs[a] = if rank < capped {
            inv_s
        } else {
            inv_s * (log_c + lw[a]).exp().min(1.0)
        };
    }
    Ok(DenseDistribution { probs, s })
}

/// Convenience form of [`bregman_project`] for linear-scale weights.
pub fn bregman_project_weights(weights: &[f64], s: usize) -> Result<DenseDistribution> {
    bregman_project(&Measure::from_weights(weights)?, s)
}

/// One Hedge step on a probability vector: multiply by `exp(-eta l_a)` and
/// renormalize, computed in log space.
pub fn mw_step(dist: &[f64], loss: &[f64], eta: f64) -> Result<Vec<f64>> {
    check_eta(eta)?;
    check_loss(loss, dist.len())?;
    if dist.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(invalid("dist", "must be finite and nonnegative"));
    }
    let log_w: Vec<f64> = dist.iter().zip(loss).map(|(p, l)| p.ln() - eta * l).collect();
    if log_w.iter().all(|l| *l == f64::NEG_INFINITY) {
        return Err(Error::Empty("distribution has no positive weight"));
    }
    Ok(softmax(&log_w))
}

/// One step of dense multiplicative weights: project the current measure,
/// then apply the loss to the unnormalized measure.
pub fn dmw_step(measure: &Measure, loss: &[f64], eta: f64, s: usize) -> Result<(Measure, DenseDistribution)> {
    let projected = bregman_project(measure, s)?;
    let mut next = measure.clone();
    next.apply_loss(loss, eta)?;
    Ok((next, projected))
}

/// Standard multiplicative weights state.
#[derive(Debug, Clone)]
pub struct MwEngine {
    log_weights: Vec<f64>,
    eta: f64,
}

impl MwEngine {
    pub fn new(k: usize, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        if k == 0 {
            return Err(Error::Empty("action set"));
        }
        Ok(MwEngine {
            log_weights: vec![0.0; k],
            eta,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn distribution(&self) -> Vec<f64> {
        softmax(&self.log_weights)
    }

    pub fn update(&mut self, loss: &[f64]) -> Result<()> {
        check_loss(loss, self.log_weights.len())?;
        for (l, x) in self.log_weights.iter_mut().zip(loss) {
            *l -= self.eta * x;
        }
        Ok(())
    }
}

/// Dense multiplicative weights state.
#[derive(Debug, Clone)]
pub struct DmwEngine {
    measure: Measure,
    eta: f64,
    s: usize,
}

impl DmwEngine {
    pub fn new(k: usize, eta: f64, s: usize) -> Result<Self> {
        check_eta(eta)?;
        if s == 0 || s > k {
            return Err(invalid("s", format!("density parameter must lie in [1, {k}], got {s}")));
        }
        Ok(DmwEngine {
            measure: Measure::uniform(k)?,
            eta,
            s,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn projection(&self) -> Result<DenseDistribution> {
        bregman_project(&self.measure, self.s)
    }

    pub fn update(&mut self, loss: &[f64]) -> Result<()> {
        self.measure.apply_loss(loss, self.eta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Mw,
    Dmw,
}

/// One line of a solver trace: the distribution played at step `t` and the
/// loss that was then revealed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub engine: EngineKind,
    pub eta: f64,
    pub density_param: Option<usize>,
    pub distribution: Vec<f64>,
    pub loss: Vec<f64>,
}

pub fn trace_to_json_lines(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("trace record serializes"));
        out.push('\n');
    }
    out
}

pub fn trace_from_json_lines(text: &str) -> Result<Vec<TraceRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::MalformedTrace(format!("line {}: {e}", i + 1))))
        .collect()
}

/// Both sides of a realized regret inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; nonnegative when the inequality holds.
    pub slack: f64,
    pub holds: bool,
    pub steps: usize,
    pub actions: usize,
    pub comparators_checked: u64,
    /// Whether the run met the theorem's hypotheses (`eta <= 1/2`, `|l| <= 1`).
    pub within_hypothesis: bool,
}

fn hypothesis(losses: &[Vec<f64>], eta: f64) -> bool {
    eta <= 0.5 && losses.iter().flatten().all(|l| l.abs() <= 1.0)
}

fn check_sequences(losses: &[Vec<f64>], dists: &[Vec<f64>]) -> Result<usize> {
    if losses.len() != dists.len() {
        return Err(Error::Dimension(format!(
            "{} loss vectors but {} distributions",
            losses.len(),
            dists.len()
        )));
    }
    let k = losses.first().map_or(0, Vec::len);
    if losses.iter().chain(dists).any(|v| v.len() != k) {
        return Err(Error::Dimension("vectors in a regret audit must share one length".into()));
    }
    Ok(k)
}

fn cumulative(losses: &[Vec<f64>], k: usize) -> Vec<f64> {
    let mut total = vec![0.0; k];
    for l in losses {
        for (t, x) in total.iter_mut().zip(l) {
            *t += x;
        }
    }
    total
}

fn played(losses: &[Vec<f64>], dists: &[Vec<f64>]) -> f64 {
    losses.iter().zip(dists).map(|(l, p)| crate::lp::dot(l, p)).sum()
}

/// Checks `sum_t <l^t, p^t> <= min_a sum_t l^t_a + eta T + ln(k) / eta`.
pub fn regret_audit_mw(losses: &[Vec<f64>], dists: &[Vec<f64>], eta: f64) -> Result<RegretReport> {
    check_audit_eta(eta)?;
    let k = check_sequences(losses, dists)?;
    let steps = losses.len();
    if steps == 0 {
        return Ok(vacuous(eta, k));
    }
    let lhs = played(losses, dists);
    let best = cumulative(losses, k).into_iter().fold(f64::INFINITY, f64::min);
    let rhs = best + eta * steps as f64 + (k as f64).ln() / eta;
    Ok(RegretReport {
        lhs,
        rhs,
        slack: rhs - lhs,
        holds: lhs <= rhs,
        steps,
        actions: k,
        comparators_checked: k as u64,
        within_hypothesis: hypothesis(losses, eta),
    })
}

fn vacuous(eta: f64, k: usize) -> RegretReport {
    RegretReport {
        lhs: 0.0,
        rhs: 0.0,
        slack: 0.0,
        holds: true,
        steps: 0,
        actions: k,
        comparators_checked: 0,
        within_hypothesis: eta <= 0.5,
    }
}

fn binomial(n: usize, r: usize) -> u64 {
    let r = r.min(n - r);
    (0..r).fold(1u64, |acc, i| acc.saturating_mul((n - i) as u64) / (i as u64 + 1))
}

/// Above this many subsets the audit evaluates only the best comparator,
/// which is the `s` actions with the smallest cumulative loss.
pub const EXHAUSTIVE_COMPARATOR_LIMIT: u64 = 200_000;

/// Checks `(1/T) sum_t <l^t, B^t> <= (1/T) sum_t <l^t, B*> + eta + ln(k) / (eta T)`
/// for every `B*` uniform on a size-`s` subset. The reported slack is the
/// smallest over all comparators.
pub fn regret_audit_dmw(losses: &[Vec<f64>], projected: &[Vec<f64>], eta: f64, s: usize) -> Result<RegretReport> {
    check_audit_eta(eta)?;
    let k = check_sequences(losses, projected)?;
    if s == 0 || s > k.max(1) {
        return Err(invalid("s", format!("density parameter must lie in [1, {k}], got {s}")));
    }
    let steps = losses.len();
    if steps == 0 {
        return Ok(vacuous(eta, k));
    }
    let t = steps as f64;
    let lhs = played(losses, projected) / t;
    let totals = cumulative(losses, k);
    let extra = eta + (k as f64).ln() / (eta * t);

    let count = binomial(k, s);
    let best_subset_total = if count <= EXHAUSTIVE_COMPARATOR_LIMIT {
        let mut best = f64::INFINITY;
        let mut idx: Vec<usize> = (0..s).collect();
        loop {
            best = best.min(idx.iter().map(|&a| totals[a]).sum::<f64>());
            // advance to the next s-subset in lexicographic order
            let mut i = s;
            while i > 0 && idx[i - 1] == k - s + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..s {
                idx[j] = idx[j - 1] + 1;
            }
        }
        best
    } else {
        let mut sorted = totals.clone();
        sorted.sort_by(f64::total_cmp);
        sorted[..s].iter().sum()
    };
    let rhs = best_subset_total / (s as f64 * t) + extra;
    Ok(RegretReport {
        lhs,
        rhs,
        slack: rhs - lhs,
        holds: lhs <= rhs,
        steps,
        actions: k,
        comparators_checked: count.min(EXHAUSTIVE_COMPARATOR_LIMIT + 1),
        within_hypothesis: hypothesis(losses, eta),
    })
}
