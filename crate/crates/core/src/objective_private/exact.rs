//! Dense two-phase simplex with Bland's rule. Exact up to floating point on
//! desk-scale problems; no sparse data structures.

use crate::error::{Error, Result};
use crate::lp::{canonicalize, dot, LpInstance, Matrix, PublicRegion, Sense, Solution};

const PIVOT_TOL: f64 = 1e-10;

/// Optimal point and value of `max c^T x` subject to rows and `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpOptimum {
    pub x: Vec<f64>,
    pub value: f64,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes `cost` over the columns flagged in `allowed`.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> Result<()> {
        loop {
            let entering = (0..self.cols).find(|&j| {
                allowed[j]
                    && !self.basis.contains(&j)
                    && cost[j] - self.basis.iter().zip(&self.rows).map(|(&b, row)| cost[b] * row[j]).sum::<f64>()
                        > PIVOT_TOL
            });
            let Some(j) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][j];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((l, best)) => {
                            ratio < best - PIVOT_TOL
                                || (ratio <= best + PIVOT_TOL && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let (r, _) = leave.ok_or(Error::Unbounded)?;
            self.pivot(r, j);
        }
    }
}

/// Solves `max c^T x` s.t. `A_i x (sense_i) b_i`, `x >= 0`.
pub fn simplex_max(a: &Matrix, b: &[f64], senses: &[Sense], c: &[f64]) -> Result<LpOptimum> {
    let (m, n) = (a.rows(), a.cols());
    if b.len() != m || senses.len() != m || c.len() != n {
        return Err(Error::Dimension("simplex inputs disagree in size".into()));
    }
    // orient every row so the right-hand side is nonnegative
    let mut rows: Vec<(Vec<f64>, f64, Sense)> = Vec::with_capacity(m);
    for ((row, &bi), &s) in a.iter_rows().zip(b).zip(senses) {
        if bi < 0.0 {
            let flipped = match s {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
            rows.push((row.iter().map(|v| -v).collect(), -bi, flipped));
        } else {
            rows.push((row.to_vec(), bi, s));
        }
    }
    let slacks = rows.iter().filter(|r| r.2 != Sense::Eq).count();
    let artificials = rows.iter().filter(|r| r.2 != Sense::Le).count();
    let cols = n + slacks + artificials;
    let mut tab = Tableau {
        rows: Vec::with_capacity(m),
        basis: Vec::with_capacity(m),
        cols,
    };
    let (mut next_slack, mut next_art) = (n, n + slacks);
    for (row, bi, s) in rows {
        let mut t = vec![0.0; cols + 1];
        t[..n].copy_from_slice(&row);
        t[cols] = bi;
        match s {
            Sense::Le => {
                t[next_slack] = 1.0;
                tab.basis.push(next_slack);
                next_slack += 1;
            }
            Sense::Ge => {
                t[next_slack] = -1.0;
                next_slack += 1;
                t[next_art] = 1.0;
                tab.basis.push(next_art);
                next_art += 1;
            }
            Sense::Eq => {
                t[next_art] = 1.0;
                tab.basis.push(next_art);
                next_art += 1;
            }
        }
        tab.rows.push(t);
    }

    let is_art = |j: usize| j >= n + slacks;
    if artificials > 0 {
        let phase1: Vec<f64> = (0..cols).map(|j| if is_art(j) { -1.0 } else { 0.0 }).collect();
        tab.optimize(&phase1, &vec![true; cols])?;
        let scale = b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        let infeasibility: f64 = (0..tab.rows.len())
            .filter(|&i| is_art(tab.basis[i]))
            .map(|i| tab.rhs(i))
            .sum();
        if infeasibility > 1e-9 * scale {
            return Err(Error::Infeasible);
        }
        // drive remaining artificials out of the basis; drop redundant rows
        let mut i = 0;
        while i < tab.rows.len() {
            if is_art(tab.basis[i]) {
                match (0..n + slacks).find(|&j| tab.rows[i][j].abs() > PIVOT_TOL) {
                    Some(j) => tab.pivot(i, j),
                    None => {
                        tab.rows.remove(i);
                        tab.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(c);
    let allowed: Vec<bool> = (0..cols).map(|j| !is_art(j)).collect();
    tab.optimize(&cost, &allowed)?;

    let mut x = vec![0.0; n];
    for (i, &bvar) in tab.basis.iter().enumerate() {
        if bvar < n {
            x[bvar] = tab.rhs(i).max(0.0);
        }
    }
    let value = dot(c, &x);
    Ok(LpOptimum { x, value })
}

/// Exact optimum of a general instance: rows of any sense, lower bounds, and
/// the public region folded in as constraints. Without an objective the
/// result is some feasible point.
pub fn solve_exact_lp(instance: &LpInstance) -> Result<Solution> {
    let opt = exact_optimum(instance)?;
    let (canon, _) = canonicalize(instance)?;
    let sol = Solution::evaluate(&canon, opt.x);
    Ok(match instance.c() {
        Some(c) => sol.with_objective(c),
        None => sol,
    })
}

/// Like [`solve_exact_lp`] but returns only the point and value.
pub fn exact_optimum(instance: &LpInstance) -> Result<LpOptimum> {
    let d = instance.d();
    let lower = instance.var_lower();
    // substitute x = l + z with z >= 0
    let mut a = Matrix::zeros(0, d);
    let mut b = Vec::new();
    let mut senses = Vec::new();
    for ((row, &bi), &s) in instance.a().iter_rows().zip(instance.b()).zip(instance.senses()) {
        a.push_row(row)?;
        b.push(bi - dot(row, lower));
        senses.push(s);
    }
    let extra = match instance.region() {
        PublicRegion::NonnegativeOrthant => None,
        PublicRegion::Simplex => Some((vec![1.0; d], 1.0)),
        PublicRegion::ObjectiveSlice { c, opt } => Some((c.clone(), *opt)),
    };
    if let Some((row, rhs)) = extra {
        b.push(rhs - dot(&row, lower));
        a.push_row(&row)?;
        senses.push(Sense::Eq);
    }
    let zero = vec![0.0; d];
    let c = instance.c().unwrap_or(&zero);
    let mut opt = simplex_max(&a, &b, &senses, c)?;
    for (x, l) in opt.x.iter_mut().zip(lower) {
        *x += l;
    }
    opt.value = dot(c, &opt.x);
    Ok(opt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: Vec<Vec<f64>>) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn simplex_vertex_optimum() {
        let inst = LpInstance::new(m(vec![vec![0.0, 0.0]]), vec![0.0], Some(vec![1.0, 0.0]), vec![Sense::Le])
            .unwrap()
            .with_region(PublicRegion::Simplex)
            .unwrap();
        let opt = exact_optimum(&inst).unwrap();
        assert_eq!(opt.x, vec![1.0, 0.0]);
        assert_eq!(opt.value, 1.0);
    }

    #[test]
    fn argmax_coordinate() {
        let inst = LpInstance::new(m(vec![vec![0.0; 3]]), vec![1.0], Some(vec![3.0, 1.0, 2.0]), vec![Sense::Le])
            .unwrap()
            .with_region(PublicRegion::Simplex)
            .unwrap();
        let opt = exact_optimum(&inst).unwrap();
        assert_eq!(opt.x, vec![1.0, 0.0, 0.0]);
        assert_eq!(opt.value, 3.0);
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let opt = simplex_max(
            &m(vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]]),
            &[4.0, 12.0, 18.0],
            &[Sense::Le; 3],
            &[3.0, 5.0],
        )
        .unwrap();
        assert!((opt.value - 36.0).abs() < 1e-12);
        assert!((opt.x[0] - 2.0).abs() < 1e-12 && (opt.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let a = m(vec![vec![1.0], vec![1.0]]);
        assert_eq!(
            simplex_max(&a, &[1.0, 2.0], &[Sense::Le, Sense::Ge], &[1.0]).unwrap_err(),
            Error::Infeasible
        );
        assert_eq!(
            simplex_max(&m(vec![vec![1.0]]), &[1.0], &[Sense::Ge], &[1.0]).unwrap_err(),
            Error::Unbounded
        );
    }

    #[test]
    fn redundant_equalities() {
        let a = m(vec![vec![1.0, 1.0], vec![2.0, 2.0]]);
        let opt = simplex_max(&a, &[1.0, 2.0], &[Sense::Eq, Sense::Eq], &[1.0, 2.0]).unwrap();
        assert!((opt.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lower_bounds_respected() {
        let inst = LpInstance::new(m(vec![vec![1.0, 1.0]]), vec![3.0], Some(vec![-1.0, -1.0]), vec![Sense::Le])
            .unwrap()
            .with_var_lower(vec![0.5, 1.0])
            .unwrap();
        let opt = exact_optimum(&inst).unwrap();
        assert_eq!(opt.x, vec![0.5, 1.0]);
    }

    #[test]
    fn infeasible_guess_on_slice() {
        let inst = LpInstance::new(m(vec![vec![1.0]]), vec![1.0], Some(vec![1.0]), vec![Sense::Le]).unwrap();
        let flp = crate::lp::objective_to_feasibility(&inst, 2.0).unwrap();
        assert_eq!(exact_optimum(&flp.to_instance()).unwrap_err(), Error::Infeasible);
        let flp = crate::lp::objective_to_feasibility(&inst, 1.0).unwrap();
        assert_eq!(exact_optimum(&flp.to_instance()).unwrap().x, vec![1.0]);
    }
}
