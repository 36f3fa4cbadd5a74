//! Relatively open polyhedra `{ x : e_i(x) = 0, p_j(x) > 0 }` and their exact feasibility.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::expr::{Affine, Sign};
use crate::lp::{LinearProgram, LpOutcome, Relation, Sense};
use crate::rational::{QVec, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    n: usize,
    /// Canonical form (leading nonzero coefficient 1) -> required sign.
    constraints: BTreeMap<Affine, Sign>,
}

/// Scales a nonconstant form so its first nonzero gradient entry is 1.
/// Returns the canonical form and whether the scaling flipped the sign.
fn canonical(form: &Affine) -> (Affine, bool) {
    let lead = form.grad.iter().find(|g| !g.is_zero()).expect("nonconstant form").clone();
    let flipped = lead.is_negative();
    let inv = Rational::one() / lead;
    (form.scale(&inv), flipped)
}

fn flip(s: Sign) -> Sign {
    match s {
        Sign::Neg => Sign::Pos,
        Sign::Pos => Sign::Neg,
        Sign::Zero => Sign::Zero,
    }
}

impl Region {
    pub fn whole_space(n: usize) -> Self {
        Self { n, constraints: BTreeMap::new() }
    }

    pub fn dim_ambient(&self) -> usize {
        self.n
    }

    /// Adds `sign(form(x)) = sign`. Returns `false` if the system became
    /// trivially inconsistent (a constant of the wrong sign, or two
    /// contradictory requirements on the same hyperplane).
    pub fn require(&mut self, form: &Affine, sign: Sign) -> bool {
        if form.is_constant() {
            return Sign::of(&form.offset) == sign;
        }
        let (key, flipped) = canonical(form);
        let sign = if flipped { flip(sign) } else { sign };
        match self.constraints.get(&key) {
            Some(&existing) => existing == sign,
            None => {
                self.constraints.insert(key, sign);
                true
            }
        }
    }

    /// Forms that must vanish.
    pub fn equalities(&self) -> Vec<Affine> {
        self.constraints
            .iter()
            .filter(|(_, &s)| s == Sign::Zero)
            .map(|(a, _)| a.clone())
            .collect()
    }

    /// Forms that must be strictly positive (negative requirements are negated).
    pub fn strict(&self) -> Vec<Affine> {
        self.constraints
            .iter()
            .filter_map(|(a, &s)| match s {
                Sign::Pos => Some(a.clone()),
                Sign::Neg => Some(a.neg()),
                Sign::Zero => None,
            })
            .collect()
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        self.constraints.iter().all(|(a, &s)| Sign::of(&a.eval(x)) == s)
    }

    pub fn closure_contains(&self, x: &[Rational]) -> bool {
        self.constraints.iter().all(|(a, &s)| Sign::of(&a.eval(x)).in_closure_of(s))
    }

    /// A point of the region, optionally intersected with `{extra_eq = 0}` and
    /// `{extra_nonneg >= 0}`. Strict inequalities are enforced with a common
    /// margin `t` that the LP maximizes (capped at 1).
    pub fn interior_point_with(&self, extra_eq: &[Affine], extra_nonneg: &[Affine]) -> Option<QVec> {
        let n = self.n;
        let strict = self.strict();
        let mut lp = LinearProgram::new(n + 1);
        for i in 0..n {
            lp.set_free(i);
        }
        let row = |a: &Affine, t: Rational| {
            let mut r = a.grad.clone();
            r.push(t);
            r
        };
        for e in self.equalities().iter().chain(extra_eq) {
            lp.add(row(e, Rational::zero()), Relation::Eq, -e.offset.clone());
        }
        for a in extra_nonneg {
            lp.add(row(a, Rational::zero()), Relation::Ge, -a.offset.clone());
        }
        for p in &strict {
            lp.add(row(p, -Rational::one()), Relation::Ge, -p.offset.clone());
        }
        let mut cap = vec![Rational::zero(); n + 1];
        cap[n] = Rational::one();
        lp.add(cap.clone(), Relation::Le, Rational::one());
        lp.set_objective(Sense::Maximize, cap);
        match lp.solve() {
            LpOutcome::Optimal { mut x, value } => {
                if !strict.is_empty() && !value.is_positive() {
                    return None;
                }
                x.truncate(n);
                Some(x)
            }
            LpOutcome::Infeasible => None,
            LpOutcome::Unbounded => unreachable!("margin is capped"),
        }
    }

    pub fn interior_point(&self) -> Option<QVec> {
        self.interior_point_with(&[], &[])
    }

    pub fn is_empty(&self) -> bool {
        self.interior_point().is_none()
    }

    /// Whether every point of `self` lies in the closure of `other`.
    pub fn subset_of_closure(&self, other: &Region, witness: &[Rational]) -> bool {
        if !other.closure_contains(witness) {
            return false;
        }
        for (a, &s) in &other.constraints {
            // Look for a point of `self` strictly on the wrong side of `a`.
            let bad: &[Sign] = match s {
                Sign::Pos => &[Sign::Neg],
                Sign::Neg => &[Sign::Pos],
                Sign::Zero => &[Sign::Neg, Sign::Pos],
            };
            for &b in bad {
                let mut probe = self.clone();
                if probe.require(a, b) && !probe.is_empty() {
                    return false;
                }
            }
        }
        true
    }

    /// Whether `self` meets the closure of `other`.
    pub fn meets_closure(&self, other: &Region) -> bool {
        let eqs = other.equalities();
        let nonneg = other.strict();
        self.interior_point_with(&eqs, &nonneg).is_some()
    }

    /// The box `[-radius, radius]^n` as nonnegativity constraints.
    pub fn box_constraints(n: usize, radius: &Rational) -> Vec<Affine> {
        let mut out = Vec::with_capacity(2 * n);
        for i in 0..n {
            let x = Affine::variable(n, i);
            out.push(x.add(&Affine::constant(n, radius.clone())));
            out.push(x.neg().add(&Affine::constant(n, radius.clone())));
        }
        out
    }
}
