//! Normal-space values and exact decisions of `g ∈ P + N`.

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use super::polytope::{min_norm_point, Polytope};
use crate::linalg;
use crate::lp::{LinearProgram, LpOutcome, Relation, Sense};
use crate::rational::{self, dot, exact_strings, norm_sq, sqrt_lower, QVec, Rational};

/// Value of the normal operator at a point: the normal space of its stratum,
/// optionally intersected with the closed ball of radius `radius`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalValue {
    pub stratum: usize,
    pub dim: usize,
    pub basis: Vec<QVec>,
    pub radius: Option<Rational>,
}

impl NormalValue {
    pub fn is_trivial(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn is_truncated(&self) -> bool {
        self.radius.is_some()
    }

    pub fn contains(&self, v: &[Rational]) -> bool {
        if !linalg::in_span(&self.basis, v) {
            return false;
        }
        match &self.radius {
            Some(r) => norm_sq(v) <= r * r,
            None => true,
        }
    }

    /// Subspace containment of the untruncated spaces.
    pub fn subspace_of(&self, other: &NormalValue) -> bool {
        self.basis.iter().all(|b| linalg::in_span(&other.basis, b))
    }

    /// Rational vectors `±w_j` with `‖w_j‖ <= r` along an orthogonal basis of the
    /// subspace. Their convex hull lies in the truncated ball. For an untruncated
    /// value the orthogonal basis vectors themselves are returned.
    pub fn generators(&self) -> Vec<QVec> {
        let ortho = linalg::orthogonalize(&self.basis);
        let mut out = Vec::with_capacity(2 * ortho.len());
        for u in ortho {
            let w = match &self.radius {
                Some(r) => {
                    let mu = sqrt_lower(&(r * r / norm_sq(&u)), 30);
                    rational::scale(&mu, &u)
                }
                None => u,
            };
            out.push(w.iter().map(|x| -x).collect());
            out.push(w);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// `g = Σ λ_i v_i + Σ μ_j n_j` with `λ` in the simplex.
    Member {
        #[serde(serialize_with = "ser_vec")]
        lambda: QVec,
        #[serde(serialize_with = "ser_vec")]
        mu: QVec,
    },
    /// `⟨w, v_i⟩ <= level` for every vertex, `⟨w, n_j⟩ = 0`, and `⟨w, g⟩ > level`.
    Separated {
        #[serde(serialize_with = "ser_vec")]
        functional: QVec,
        #[serde(serialize_with = "ser_q")]
        level: Rational,
    },
    /// `g ∈ P + N` but every decomposition has normal part with squared norm
    /// at least `min_norm_sq > r²`.
    NormalTooLarge {
        #[serde(serialize_with = "ser_q")]
        min_norm_sq: Rational,
        #[serde(serialize_with = "ser_q")]
        radius: Rational,
    },
}

fn ser_vec<S: serde::Serializer>(v: &QVec, s: S) -> Result<S::Ok, S::Error> {
    exact_strings(v).serialize(s)
}

fn ser_q<S: serde::Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Membership {
    pub member: bool,
    pub certificate: Certificate,
}

impl Certificate {
    /// Independent exact check of the certificate against the data.
    pub fn verify(&self, g: &[Rational], p: &Polytope, nv: &NormalValue) -> bool {
        match self {
            Certificate::Member { lambda, mu } => {
                if lambda.len() != p.vertices().len() || mu.len() != nv.basis.len() {
                    return false;
                }
                if lambda.iter().any(Signed::is_negative)
                    || lambda.iter().fold(Rational::zero(), |a, b| a + b) != Rational::one()
                {
                    return false;
                }
                let mut normal = rational::zeros(g.len());
                for (m, n) in mu.iter().zip(&nv.basis) {
                    rational::axpy(&mut normal, m, n);
                }
                if let Some(r) = &nv.radius {
                    if norm_sq(&normal) > r * r {
                        return false;
                    }
                }
                let mut sum = normal;
                for (l, v) in lambda.iter().zip(p.vertices()) {
                    rational::axpy(&mut sum, l, v);
                }
                sum == g
            }
            Certificate::Separated { functional, level } => {
                p.vertices().iter().all(|v| dot(functional, v) <= *level)
                    && nv.basis.iter().all(|n| dot(functional, n).is_zero())
                    && dot(functional, g) > *level
            }
            Certificate::NormalTooLarge { min_norm_sq, radius } => {
                nv.radius.as_ref() == Some(radius)
                    && *min_norm_sq > radius * radius
                    && min_normal_norm_sq(g, p, nv).as_ref() == Some(min_norm_sq)
            }
        }
    }
}

/// Decides `g ∈ P + N` exactly, returning a decomposition or a separating functional.
pub fn member_sum(g: &[Rational], p: &Polytope, nv: &NormalValue) -> Membership {
    let n = g.len();
    let m = p.vertices().len();
    let k = nv.basis.len();
    let mut lp = LinearProgram::new(m + k);
    for j in 0..k {
        lp.set_free(m + j);
    }
    let mut simplex = vec![Rational::one(); m];
    simplex.extend(vec![Rational::zero(); k]);
    lp.add(simplex, Relation::Eq, Rational::one());
    for i in 0..n {
        let mut row: QVec = p.vertices().iter().map(|v| v[i].clone()).collect();
        row.extend(nv.basis.iter().map(|b| b[i].clone()));
        lp.add(row, Relation::Eq, g[i].clone());
    }
    lp.set_objective(Sense::Minimize, vec![Rational::zero(); m + k]);
    let decomposition = match lp.solve() {
        LpOutcome::Optimal { x, .. } => x,
        _ => {
            return Membership { member: false, certificate: separate(g, p, nv) };
        }
    };
    match &nv.radius {
        None => Membership {
            member: true,
            certificate: Certificate::Member { lambda: decomposition[..m].to_vec(), mu: decomposition[m..].to_vec() },
        },
        Some(r) => truncated_membership(g, p, nv, r),
    }
}

/// Farkas alternative: maximize `⟨w, g⟩ - β` over `|w_i| <= 1`, `⟨w, v⟩ <= β`, `⟨w, n⟩ = 0`.
fn separate(g: &[Rational], p: &Polytope, nv: &NormalValue) -> Certificate {
    let n = g.len();
    let mut lp = LinearProgram::new(n + 1);
    lp.set_all_free();
    for v in p.vertices() {
        let mut row = v.clone();
        row.push(-Rational::one());
        lp.add(row, Relation::Le, Rational::zero());
    }
    for b in &nv.basis {
        let mut row = b.clone();
        row.push(Rational::zero());
        lp.add(row, Relation::Eq, Rational::zero());
    }
    for i in 0..n {
        let mut e = rational::unit(n + 1, i);
        lp.add(e.clone(), Relation::Le, Rational::one());
        e[i] = -Rational::one();
        lp.add(e, Relation::Le, Rational::one());
    }
    let mut obj = g.to_vec();
    obj.push(-Rational::one());
    lp.set_objective(Sense::Maximize, obj);
    match lp.solve() {
        LpOutcome::Optimal { mut x, value } => {
            assert!(value.is_positive(), "infeasible membership must admit a separator");
            let level = x.pop().unwrap();
            Certificate::Separated { functional: x, level }
        }
        other => unreachable!("separation LP is bounded and feasible: {other:?}"),
    }
}

/// Exact `min ‖g - q‖²` over `q ∈ P` with `g - q ∈ span(N)`, or `None` if no such `q`.
///
/// The feasible `q` form the polytope `P ∩ (g + N)`, whose vertices are the basic
/// feasible weight vectors of `{λ >= 0, Σλ = 1, τ·(Vλ) = τ·g for τ ⊥ N}`.
fn min_normal_norm_sq(g: &[Rational], p: &Polytope, nv: &NormalValue) -> Option<Rational> {
    let candidates = slice_vertices(g, p, nv);
    if candidates.is_empty() {
        return None;
    }
    let diffs: Vec<QVec> = candidates.iter().map(|q| rational::sub(g, q)).collect();
    let (closest, _) = min_norm_point(&diffs);
    Some(norm_sq(&closest))
}

fn slice_vertices(g: &[Rational], p: &Polytope, nv: &NormalValue) -> Vec<QVec> {
    let n = g.len();
    let verts = p.vertices();
    let m = verts.len();
    let tangent = linalg::null_space_basis(&nv.basis, n);
    let mut rows: Vec<QVec> = vec![vec![Rational::one(); m]];
    let mut rhs = vec![Rational::one()];
    for t in &tangent {
        rows.push(verts.iter().map(|v| dot(t, v)).collect());
        rhs.push(dot(t, g));
    }
    let rank = linalg::rank(&rows, m);
    let mut out = Vec::new();
    let mut subset = Vec::new();
    enumerate_subsets(m, rank, 0, &mut subset, &mut |s| {
        let cols: Vec<QVec> = rows.iter().map(|r| s.iter().map(|&j| r[j].clone()).collect()).collect();
        if linalg::rank(&cols, s.len()) != s.len() {
            return;
        }
        let Some(w) = linalg::solve(&cols, &rhs, s.len()) else { return };
        if w.iter().any(Signed::is_negative) {
            return;
        }
        let mut q = rational::zeros(n);
        for (&j, wj) in s.iter().zip(&w) {
            rational::axpy(&mut q, wj, &verts[j]);
        }
        out.push(q);
    });
    out.sort();
    out.dedup();
    out
}

fn enumerate_subsets(m: usize, max: usize, from: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if !cur.is_empty() {
        f(cur);
    }
    if cur.len() == max {
        return;
    }
    for j in from..m {
        cur.push(j);
        enumerate_subsets(m, max, j + 1, cur, f);
        cur.pop();
    }
}

fn truncated_membership(g: &[Rational], p: &Polytope, nv: &NormalValue, r: &Rational) -> Membership {
    let candidates = slice_vertices(g, p, nv);
    let diffs: Vec<QVec> = candidates.iter().map(|q| rational::sub(g, q)).collect();
    let (closest, _) = min_norm_point(&diffs);
    let dist_sq = norm_sq(&closest);
    if dist_sq > r * r {
        return Membership {
            member: false,
            certificate: Certificate::NormalTooLarge { min_norm_sq: dist_sq, radius: r.clone() },
        };
    }
    // g - closest is the point q of P; recover its vertex weights and the normal coordinates.
    let q: QVec = rational::sub(g, &closest);
    let lambda = p.contains(&q).expect("slice point lies in the polytope");
    let mu = linalg::span_coefficients(&nv.basis, &closest).expect("normal part lies in N");
    Membership { member: true, certificate: Certificate::Member { lambda, mu } }
}
