//! Exact rational linear programming: dense two-phase simplex with Bland's rule.
//!
//! Problems are small (a handful of variables and constraints) and every
//! answer must be exact, so the tableau is kept in `BigRational`.

use num_traits::{One, Signed, Zero};

use crate::rational::{QVec, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: QVec,
    pub relation: Relation,
    pub rhs: Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// `optimize objective · x` subject to the constraints, with each variable either
/// free or nonnegative.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    free: Vec<bool>,
    objective: QVec,
    sense: Sense,
    constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: QVec, value: Rational },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn point(&self) -> Option<&QVec> {
        match self {
            LpOutcome::Optimal { x, .. } => Some(x),
            _ => None,
        }
    }
}

impl LinearProgram {
    /// `num_vars` variables, all nonnegative unless marked with [`Self::set_free`].
    pub fn new(num_vars: usize) -> Self {
        Self {
            free: vec![false; num_vars],
            objective: vec![Rational::zero(); num_vars],
            sense: Sense::Minimize,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.free.len()
    }

    pub fn set_free(&mut self, var: usize) -> &mut Self {
        self.free[var] = true;
        self
    }

    pub fn set_all_free(&mut self) -> &mut Self {
        self.free.iter_mut().for_each(|f| *f = true);
        self
    }

    pub fn set_objective(&mut self, sense: Sense, objective: QVec) -> &mut Self {
        assert_eq!(objective.len(), self.num_vars());
        self.sense = sense;
        self.objective = objective;
        self
    }

    pub fn add(&mut self, coeffs: QVec, relation: Relation, rhs: Rational) -> &mut Self {
        assert_eq!(coeffs.len(), self.num_vars());
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn solve(&self) -> LpOutcome {
        let n = self.num_vars();
        // Column layout: one column per nonnegative variable, two (pos, neg) per free one.
        let mut col_of: Vec<(usize, Option<usize>)> = Vec::with_capacity(n);
        let mut ncols = 0;
        for &free in &self.free {
            if free {
                col_of.push((ncols, Some(ncols + 1)));
                ncols += 2;
            } else {
                col_of.push((ncols, None));
                ncols += 1;
            }
        }
        let num_slack = self
            .constraints
            .iter()
            .filter(|c| c.relation != Relation::Eq)
            .count();
        let structural = ncols + num_slack;
        let m = self.constraints.len();

        let mut rows: Vec<QVec> = Vec::with_capacity(m);
        let mut slack = ncols;
        for c in &self.constraints {
            let mut row = vec![Rational::zero(); structural + 1];
            for (j, a) in c.coeffs.iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                let (p, q) = col_of[j];
                row[p] = a.clone();
                if let Some(q) = q {
                    row[q] = -a.clone();
                }
            }
            match c.relation {
                Relation::Le => {
                    row[slack] = Rational::one();
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -Rational::one();
                    slack += 1;
                }
                Relation::Eq => {}
            }
            row[structural] = c.rhs.clone();
            if row[structural].is_negative() {
                row.iter_mut().for_each(|x| *x = -x.clone());
            }
            rows.push(row);
        }

        let mut cost = vec![Rational::zero(); structural];
        for (j, c) in self.objective.iter().enumerate() {
            let c = match self.sense {
                Sense::Minimize => c.clone(),
                Sense::Maximize => -c.clone(),
            };
            let (p, q) = col_of[j];
            if let Some(q) = q {
                cost[q] = -c.clone();
            }
            cost[p] = c;
        }

        let Some(mut tab) = Tableau::phase_one(rows, structural) else {
            return LpOutcome::Infeasible;
        };
        if !tab.optimize(&cost) {
            return LpOutcome::Unbounded;
        }
        let y = tab.primal(structural);
        let x: QVec = col_of
            .iter()
            .map(|&(p, q)| match q {
                Some(q) => &y[p] - &y[q],
                None => y[p].clone(),
            })
            .collect();
        let value = x
            .iter()
            .zip(&self.objective)
            .fold(Rational::zero(), |acc, (a, b)| acc + a * b);
        LpOutcome::Optimal { x, value }
    }
}

/// Tableau over `A y = b, y >= 0` with `b >= 0`; last column holds the rhs.
struct Tableau {
    rows: Vec<QVec>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    /// Runs Phase I with one artificial per row. Returns a tableau whose basis is
    /// feasible and free of artificials, or `None` if the system is infeasible.
    fn phase_one(rows: Vec<QVec>, ncols: usize) -> Option<Self> {
        let m = rows.len();
        let total = ncols + m;
        let rows: Vec<QVec> = rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = Vec::with_capacity(total + 1);
                r.extend_from_slice(&row[..ncols]);
                for k in 0..m {
                    r.push(if k == i { Rational::one() } else { Rational::zero() });
                }
                r.push(row[ncols].clone());
                r
            })
            .collect();
        let mut tab = Tableau { rows, basis: (ncols..total).collect(), ncols: total };
        let mut cost = vec![Rational::zero(); total];
        cost[ncols..].iter_mut().for_each(|c| *c = Rational::one());
        let bounded = tab.optimize(&cost);
        debug_assert!(bounded);
        let infeasibility = tab
            .basis
            .iter()
            .zip(&tab.rows)
            .filter(|(&b, _)| b >= ncols)
            .fold(Rational::zero(), |acc, (_, r)| acc + &r[total]);
        if infeasibility.is_positive() {
            return None;
        }

        // Drive remaining (zero-level) artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < tab.rows.len() {
            if tab.basis[i] >= ncols {
                match (0..ncols).find(|&j| !tab.rows[i][j].is_zero()) {
                    Some(j) => {
                        tab.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        tab.rows.remove(i);
                        tab.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
        for row in tab.rows.iter_mut() {
            let rhs = row[total].clone();
            row.truncate(ncols);
            row.push(rhs);
        }
        tab.ncols = ncols;
        Some(tab)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let inv = Rational::one() / &self.rows[r][c];
        for x in self.rows[r].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (x, p) in row.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *x -= &f * p;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes `cost · y` from the current feasible basis. Returns `false` if unbounded.
    fn optimize(&mut self, cost: &[Rational]) -> bool {
        let rhs = self.ncols;
        loop {
            // Reduced costs d_j = c_j - sum_i c_{B(i)} a_ij; Bland: lowest index with d_j < 0.
            let entering = (0..self.ncols).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let mut d = cost[j].clone();
                for (row, &b) in self.rows.iter().zip(&self.basis) {
                    if !row[j].is_zero() && !cost[b].is_zero() {
                        d -= &cost[b] * &row[j];
                    }
                }
                d.is_negative()
            });
            let Some(j) = entering else {
                return true;
            };
            let mut best: Option<(usize, Rational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[j].is_positive() {
                    continue;
                }
                let ratio = &row[rhs] / &row[j];
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            let Some((r, _)) = best else {
                return false;
            };
            self.pivot(r, j);
        }
    }

    fn primal(&self, ncols: usize) -> QVec {
        let mut y = vec![Rational::zero(); ncols];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < ncols {
                y[b] = row[self.ncols].clone();
            }
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn v(xs: &[i64]) -> QVec {
        xs.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 2y  s.t. x + y <= 4, x + 3y <= 6, x, y >= 0  -> (4, 0), 12
        let mut lp = LinearProgram::new(2);
        lp.set_objective(Sense::Maximize, v(&[3, 2]))
            .add(v(&[1, 1]), Relation::Le, int(4))
            .add(v(&[1, 3]), Relation::Le, int(6));
        match lp.solve() {
            LpOutcome::Optimal { x, value } => {
                assert_eq!(value, int(12));
                assert_eq!(x, v(&[4, 0]));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x s.t. x - y = -3/2, y >= 1, x free
        let mut lp = LinearProgram::new(2);
        lp.set_free(0)
            .set_objective(Sense::Minimize, v(&[1, 0]))
            .add(v(&[1, -1]), Relation::Eq, ratio(-3, 2))
            .add(v(&[0, 1]), Relation::Ge, int(1));
        match lp.solve() {
            LpOutcome::Optimal { x, value } => {
                assert_eq!(value, ratio(-1, 2));
                assert_eq!(x, vec![ratio(-1, 2), int(1)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.add(v(&[1]), Relation::Ge, int(2)).add(v(&[1]), Relation::Le, int(1));
        assert_eq!(lp.solve(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::new(1);
        lp.set_objective(Sense::Maximize, v(&[1])).add(v(&[1]), Relation::Ge, int(0));
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(2);
        lp.add(v(&[1, 1]), Relation::Eq, int(1))
            .add(v(&[2, 2]), Relation::Eq, int(2))
            .set_objective(Sense::Maximize, v(&[1, 0]));
        match lp.solve() {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, int(1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example, which cycles under the textbook most-negative rule.
        let mut lp = LinearProgram::new(4);
        lp.set_objective(Sense::Minimize, vec![ratio(-3, 4), int(150), ratio(-1, 50), int(6)])
            .add(vec![ratio(1, 4), int(-60), ratio(-1, 25), int(9)], Relation::Le, int(0))
            .add(vec![ratio(1, 2), int(-90), ratio(-1, 50), int(3)], Relation::Le, int(0))
            .add(vec![int(0), int(0), int(1), int(0)], Relation::Le, int(1));
        match lp.solve() {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, ratio(-1, 20)),
            other => panic!("{other:?}"),
        }
    }
}
