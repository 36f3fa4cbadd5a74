//! Vertex-represented polytopes with exact membership and minimum-norm points.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::linalg;
use crate::lp::{LinearProgram, LpOutcome, Relation, Sense};
use crate::rational::{self, dot, exact_strings, norm_sq, QVec, Rational};

/// `conv(vertices)`, canonicalized: sorted, duplicate-free, every vertex extreme.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Polytope {
    dim: usize,
    vertices: Vec<QVec>,
}

impl Polytope {
    pub fn new(dim: usize, points: impl IntoIterator<Item = QVec>) -> Self {
        let unique: Vec<QVec> = points.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        assert!(!unique.is_empty(), "polytope needs at least one point");
        assert!(unique.iter().all(|p| p.len() == dim));
        let vertices = (0..unique.len())
            .filter(|&i| {
                let others: Vec<QVec> =
                    unique.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, p)| p.clone()).collect();
                others.is_empty() || convex_weights(&others, &unique[i]).is_none()
            })
            .map(|i| unique[i].clone())
            .collect();
        Self { dim, vertices }
    }

    pub fn singleton(point: QVec) -> Self {
        Self { dim: point.len(), vertices: vec![point] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[QVec] {
        &self.vertices
    }

    pub fn is_singleton(&self) -> bool {
        self.vertices.len() == 1
    }

    /// Convex weights on the vertices reproducing `g`, if `g` is in the polytope.
    pub fn contains(&self, g: &[Rational]) -> Option<QVec> {
        convex_weights(&self.vertices, g)
    }

    pub fn contains_polytope(&self, other: &Polytope) -> bool {
        other.vertices.iter().all(|v| self.contains(v).is_some())
    }

    pub fn max_norm_sq(&self) -> Rational {
        self.vertices.iter().map(|v| norm_sq(v)).max().expect("nonempty")
    }

    /// Exact minimum-norm point and its convex weights on the vertices.
    pub fn min_norm_point(&self) -> (QVec, QVec) {
        min_norm_point(&self.vertices)
    }

    /// Euclidean distance from the origin (rounded from the exact squared distance).
    pub fn distance_to_origin(&self) -> f64 {
        let (p, _) = self.min_norm_point();
        rational::to_f64(&norm_sq(&p)).sqrt()
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.vertices.iter().map(|v| exact_strings(v)).collect()
    }
}

impl Serialize for Polytope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_strings().serialize(s)
    }
}

/// Weights `λ >= 0, Σλ = 1` with `Σ λ_i points_i = g`, if they exist.
pub fn convex_weights(points: &[QVec], g: &[Rational]) -> Option<QVec> {
    let m = points.len();
    let n = g.len();
    let mut lp = LinearProgram::new(m);
    lp.add(vec![Rational::one(); m], Relation::Eq, Rational::one());
    for k in 0..n {
        lp.add(points.iter().map(|p| p[k].clone()).collect(), Relation::Eq, g[k].clone());
    }
    lp.set_objective(Sense::Minimize, vec![Rational::zero(); m]);
    match lp.solve() {
        LpOutcome::Optimal { x, .. } => Some(x),
        _ => None,
    }
}

/// Affine combination of `pts` with minimum norm: weights `α` with `Σα = 1`.
fn affine_min_norm(pts: &[&QVec]) -> QVec {
    let k = pts.len();
    let mut rows: Vec<QVec> = Vec::with_capacity(k + 1);
    for i in 0..k {
        let mut r: QVec = (0..k).map(|j| dot(pts[i], pts[j])).collect();
        r.push(Rational::one());
        rows.push(r);
    }
    let mut last = vec![Rational::one(); k];
    last.push(Rational::zero());
    rows.push(last);
    let mut rhs = vec![Rational::zero(); k];
    rhs.push(Rational::one());
    let sol = linalg::solve(&rows, &rhs, k + 1).expect("affine min-norm system is consistent");
    sol[..k].to_vec()
}

fn combine(pts: &[QVec], support: &[usize], w: &[Rational]) -> QVec {
    let mut x = rational::zeros(pts[0].len());
    for (&i, wi) in support.iter().zip(w) {
        rational::axpy(&mut x, wi, &pts[i]);
    }
    x
}

/// Wolfe's minimum-norm-point algorithm in exact arithmetic.
/// Returns the point and convex weights over all of `pts`.
pub fn min_norm_point(pts: &[QVec]) -> (QVec, QVec) {
    assert!(!pts.is_empty());
    let start = (0..pts.len()).min_by_key(|&i| norm_sq(&pts[i])).unwrap();
    let mut support = vec![start];
    let mut lambda = vec![Rational::one()];
    loop {
        let x = combine(pts, &support, &lambda);
        let xx = norm_sq(&x);
        let (j, best) = (0..pts.len())
            .map(|j| (j, dot(&x, &pts[j])))
            .min_by(|a, b| a.1.cmp(&b.1))
            .unwrap();
        if best >= xx || support.contains(&j) {
            let mut full = rational::zeros(pts.len());
            for (&i, w) in support.iter().zip(&lambda) {
                full[i] += w;
            }
            return (x, full);
        }
        support.push(j);
        lambda.push(Rational::zero());
        loop {
            let refs: Vec<&QVec> = support.iter().map(|&i| &pts[i]).collect();
            let alpha = affine_min_norm(&refs);
            if alpha.iter().all(Signed::is_positive) {
                lambda = alpha;
                break;
            }
            // Move from lambda toward alpha until a weight hits zero.
            let theta = lambda
                .iter()
                .zip(&alpha)
                .filter(|(_, a)| !a.is_positive())
                .map(|(l, a)| {
                    let d = l - a;
                    if d.is_positive() {
                        l / d
                    } else {
                        Rational::zero()
                    }
                })
                .min()
                .unwrap();
            let keep = Rational::one() - &theta;
            lambda = lambda.iter().zip(&alpha).map(|(l, a)| &theta * a + &keep * l).collect();
            let mut i = 0;
            while i < support.len() {
                if !lambda[i].is_positive() {
                    support.remove(i);
                    lambda.remove(i);
                } else {
                    i += 1;
                }
            }
        }
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
    fn canonicalization_drops_interior_points() {
        let p = Polytope::new(2, vec![v(&[0, 0]), v(&[2, 0]), v(&[0, 2]), v(&[1, 1]), v(&[2, 0]), v(&[1, 0])]);
        assert_eq!(p.vertices(), &[v(&[0, 0]), v(&[0, 2]), v(&[2, 0])]);
    }

    #[test]
    fn membership_is_exact() {
        let seg = Polytope::new(2, vec![v(&[1, 0]), v(&[0, 1])]);
        let w = seg.contains(&[ratio(1, 3), ratio(2, 3)]).unwrap();
        assert_eq!(w.iter().fold(Rational::zero(), |a, b| a + b), int(1));
        assert!(seg.contains(&v(&[2, 0])).is_none());
        assert!(seg.contains(&[ratio(1, 2), ratio(1, 2) + ratio(1, 1_000_000)]).is_none());
    }

    #[test]
    fn min_norm_on_segment() {
        let seg = Polytope::new(2, vec![v(&[1, 0]), v(&[0, 1])]);
        let (p, _) = seg.min_norm_point();
        assert_eq!(p, vec![ratio(1, 2), ratio(1, 2)]);
        assert!((seg.distance_to_origin() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn min_norm_contains_origin() {
        let p = Polytope::new(1, vec![v(&[-1]), v(&[1])]);
        assert_eq!(p.min_norm_point().0, v(&[0]));
        let sq = Polytope::new(2, vec![v(&[1, 1]), v(&[-1, 1]), v(&[1, -1]), v(&[-1, -1])]);
        assert_eq!(sq.min_norm_point().0, v(&[0, 0]));
    }

    #[test]
    fn min_norm_triangle_face() {
        // Closest point of the triangle conv{(1,0,0),(0,1,0),(0,0,1)} is (1/3,1/3,1/3).
        let t = Polytope::new(3, vec![v(&[1, 0, 0]), v(&[0, 1, 0]), v(&[0, 0, 1]), v(&[2, 2, 2])]);
        let (p, w) = t.min_norm_point();
        assert_eq!(p, vec![ratio(1, 3); 3]);
        assert_eq!(w.iter().fold(Rational::zero(), |a, b| a + b), int(1));
    }
}
