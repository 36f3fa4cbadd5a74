//! Polyhedral stratification induced by an expression's kink arguments.
//!
//! A stratum is the set of points sharing one activation sign-vector. Each is a
//! relatively open convex polyhedron on which the function is affine; together
//! they partition R^n. Everything here is exact.

mod membership;
mod polytope;
mod region;

use std::collections::{BTreeSet, HashMap, VecDeque};

use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::expr::{pattern_string, Affine, Expr, ExprError, Point, Sign};
use crate::linalg;
use crate::rational::{self, exact_strings, QVec, Rational};

pub use membership::{member_sum, Certificate, Membership, NormalValue};
pub use polytope::{convex_weights, min_norm_point, Polytope};
pub use region::Region;

/// Largest ambient dimension accepted by [`stratify`].
pub const MAX_DIM: usize = 4;
/// Cap on candidate sign patterns examined during enumeration.
pub const MAX_CANDIDATES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolyError {
    #[error("dimension {0} exceeds the stratification limit of {MAX_DIM}")]
    DimensionGuard(usize),
    #[error("more than {MAX_CANDIDATES} candidate sign patterns")]
    PatternOverflow,
    #[error("truncation radius must be positive, got {0}")]
    NonPositiveRadius(Rational),
    #[error("no stratum has sign pattern {0}")]
    Uncovered(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone)]
pub struct Stratum {
    pub id: usize,
    pub signs: Vec<Sign>,
    pub dim: usize,
    /// A point of the relative interior; with `tangent` it spans the affine hull.
    pub point: QVec,
    pub tangent: Vec<QVec>,
    pub normal: Vec<QVec>,
    pub region: Region,
    /// The function restricted to this stratum.
    pub restriction: Affine,
    /// Strata contained in the closure of this one (excluding itself).
    pub boundary: Vec<usize>,
    /// Strata whose closure contains this one (excluding itself).
    pub cofaces: Vec<usize>,
}

impl Stratum {
    pub fn pattern(&self) -> String {
        pattern_string(&self.signs)
    }

    pub fn is_full_dimensional(&self) -> bool {
        self.tangent.len() == self.point.len()
    }
}

/// The partition of R^n into strata for one expression.
#[derive(Debug, Clone)]
pub struct Stratification {
    expr: Expr,
    strata: Vec<Stratum>,
    index: HashMap<Vec<Sign>, usize>,
    /// Distinct affine forms each kink argument takes across strata.
    argument_forms: Vec<Vec<Affine>>,
    frontier_violations: Vec<(usize, usize)>,
}

/// Enumerates every nonempty activation pattern and builds the strata.
///
/// Patterns are extended one kink at a time in topological order, so when a
/// kink is reached its argument is affine under the signs already fixed.
/// Infeasible prefixes are pruned with exact LP checks.
pub fn stratify(e: &Expr) -> Result<Stratification, PolyError> {
    let n = e.dim();
    if n > MAX_DIM {
        return Err(PolyError::DimensionGuard(n));
    }
    let kinks = e.kink_nodes().len();
    let mut queue: VecDeque<(Vec<Sign>, Region, QVec)> = VecDeque::new();
    queue.push_back((Vec::new(), Region::whole_space(n), rational::zeros(n)));
    let mut candidates = 0usize;
    let mut done = Vec::new();
    while let Some((prefix, region, witness)) = queue.pop_front() {
        let k = prefix.len();
        if k == kinks {
            done.push((prefix, region, witness));
            continue;
        }
        let forms = e.node_forms(&prefix);
        let arg = e.kink_argument_form(&forms, k).expect("inner kinks fixed");
        let at_witness = Sign::of(&arg.eval(&witness));
        for s in [Sign::Neg, Sign::Zero, Sign::Pos] {
            candidates += 1;
            if candidates > MAX_CANDIDATES {
                return Err(PolyError::PatternOverflow);
            }
            let mut next = region.clone();
            if !next.require(&arg, s) {
                continue;
            }
            let point = if s == at_witness { Some(witness.clone()) } else { next.interior_point() };
            if let Some(point) = point {
                let mut p = prefix.clone();
                p.push(s);
                queue.push_back((p, next, point));
            }
        }
    }

    let mut strata: Vec<Stratum> = done
        .into_iter()
        .map(|(signs, region, point)| {
            let eq_rows: Vec<QVec> = region.equalities().into_iter().map(|a| a.grad).collect();
            let normal = linalg::row_space_basis(&eq_rows, n);
            let tangent = linalg::null_space_basis(&eq_rows, n);
            let restriction = e.affine_restriction(&signs).expect("complete pattern");
            Stratum {
                id: 0,
                dim: tangent.len(),
                signs,
                point,
                tangent,
                normal,
                region,
                restriction,
                boundary: Vec::new(),
                cofaces: Vec::new(),
            }
        })
        .collect();
    strata.sort_by(|a, b| (a.dim, &a.signs).cmp(&(b.dim, &b.signs)));
    for (i, s) in strata.iter_mut().enumerate() {
        s.id = i;
    }

    let mut frontier_violations = Vec::new();
    for hi in 0..strata.len() {
        for lo in 0..strata.len() {
            let (a, b) = (&strata[hi], &strata[lo]);
            if b.dim >= a.dim || !b.signs.iter().zip(&a.signs).all(|(x, y)| x.in_closure_of(*y)) {
                continue;
            }
            if b.region.subset_of_closure(&a.region, &b.point) {
                strata[hi].boundary.push(lo);
                strata[lo].cofaces.push(hi);
            } else if b.region.meets_closure(&a.region) {
                frontier_violations.push((hi, lo));
            }
        }
    }

    let mut argument_forms: Vec<BTreeSet<Affine>> = vec![BTreeSet::new(); kinks];
    for s in &strata {
        let forms = e.node_forms(&s.signs);
        for (k, set) in argument_forms.iter_mut().enumerate() {
            set.insert(e.kink_argument_form(&forms, k).expect("complete pattern"));
        }
    }
    let index = strata.iter().map(|s| (s.signs.clone(), s.id)).collect();
    Ok(Stratification {
        expr: e.clone(),
        strata,
        index,
        argument_forms: argument_forms.into_iter().map(|s| s.into_iter().collect()).collect(),
        frontier_violations,
    })
}

/// Outcome of sampling the normal-limit condition for one pair of strata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WhitneyReport {
    pub upper: usize,
    pub lower: usize,
    pub trials: usize,
    pub failures: usize,
    /// The lower stratum is not in the closure of the upper one.
    pub vacuous: bool,
}

impl WhitneyReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl Stratification {
    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn dim(&self) -> usize {
        self.expr.dim()
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    pub fn len(&self) -> usize {
        self.strata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strata.is_empty()
    }

    pub fn stratum(&self, id: usize) -> &Stratum {
        &self.strata[id]
    }

    pub fn by_pattern(&self, signs: &[Sign]) -> Option<&Stratum> {
        self.index.get(signs).map(|&i| &self.strata[i])
    }

    pub fn argument_forms(&self) -> &[Vec<Affine>] {
        &self.argument_forms
    }

    /// Pairs `(M, M')` where `M'` meets the closure of `M` without being contained in it.
    pub fn frontier_violations(&self) -> &[(usize, usize)] {
        &self.frontier_violations
    }

    /// The stratum containing `x`, found by exact sign evaluation.
    pub fn locate(&self, x: &Point) -> Result<&Stratum, PolyError> {
        let signs = self.expr.sign_vector(x)?;
        self.index
            .get(&signs)
            .map(|&i| &self.strata[i])
            .ok_or_else(|| PolyError::Uncovered(pattern_string(&signs)))
    }

    pub fn locate_coords(&self, x: &[Rational]) -> Result<&Stratum, PolyError> {
        self.locate(&Point::new(x.to_vec()))
    }

    pub fn normal_value(&self, id: usize, radius: Option<Rational>) -> Result<NormalValue, PolyError> {
        if let Some(r) = &radius {
            if *r <= Rational::zero() {
                return Err(PolyError::NonPositiveRadius(r.clone()));
            }
        }
        let s = &self.strata[id];
        Ok(NormalValue { stratum: id, dim: self.dim(), basis: s.normal.clone(), radius })
    }

    /// `N_M(x)` for the stratum `M` containing `x`, intersected with `rB` when `radius` is given.
    pub fn normal_operator(&self, x: &Point, radius: Option<Rational>) -> Result<NormalValue, PolyError> {
        let id = self.locate(x)?.id;
        self.normal_value(id, radius)
    }

    /// Clarke subdifferential: convex hull of the gradients of the full-dimensional
    /// strata whose closure contains `x`.
    pub fn clarke(&self, x: &Point) -> Result<Polytope, PolyError> {
        if x.dim() != self.dim() {
            return Err(ExprError::DimensionMismatch { expected: self.dim(), found: x.dim() }.into());
        }
        let grads: Vec<QVec> = self
            .strata
            .iter()
            .filter(|s| s.is_full_dimensional() && s.region.closure_contains(&x.coords))
            .map(|s| s.restriction.grad.clone())
            .collect();
        Ok(Polytope::new(self.dim(), grads))
    }

    /// Clarke subdifferential at any point of stratum `id`, read from the adjacency.
    pub fn stratum_clarke(&self, id: usize) -> Polytope {
        let s = &self.strata[id];
        let grads = std::iter::once(id)
            .chain(s.cofaces.iter().copied())
            .filter(|&j| self.strata[j].is_full_dimensional())
            .map(|j| self.strata[j].restriction.grad.clone());
        Polytope::new(self.dim(), grads)
    }

    /// Random point of stratum `id`: the stored interior point moved along the
    /// tangent directions, pulled back until it stays inside.
    pub fn sample_in(&self, id: usize, rng: &mut ChaCha8Rng, spread: &Rational) -> QVec {
        let s = &self.strata[id];
        if s.tangent.is_empty() {
            return s.point.clone();
        }
        let mut step = rational::zeros(self.dim());
        for t in &s.tangent {
            let c = rational::ratio(rng.gen_range(-64..=64), 64);
            rational::axpy(&mut step, &c, t);
        }
        let mut scale = spread.clone();
        let half = rational::ratio(1, 2);
        for _ in 0..64 {
            let mut y = s.point.clone();
            rational::axpy(&mut y, &scale, &step);
            if s.region.contains(&y) {
                return y;
            }
            scale *= &half;
        }
        s.point.clone()
    }

    /// Samples sequences `x_r -> x` with `x_r` in `upper`, `x` in `lower`, and
    /// normals `y_r -> y` of `upper`, checking `y ∈ N_lower(x)`. Since polyhedral
    /// normal spaces are constant on a stratum the limit is exact.
    pub fn whitney_probe(&self, upper: usize, lower: usize, trials: usize, rng: &mut ChaCha8Rng) -> WhitneyReport {
        let m = &self.strata[upper];
        let vacuous = upper == lower || !m.boundary.contains(&lower);
        let mut report = WhitneyReport { upper, lower, trials: 0, failures: 0, vacuous };
        if vacuous {
            return report;
        }
        let mp = &self.strata[lower];
        let one = Rational::one();
        for _ in 0..trials {
            report.trials += 1;
            let x = self.sample_in(lower, rng, &one);
            let y_m = self.sample_in(upper, rng, &one);
            let coeffs: QVec = m.normal.iter().map(|_| rational::ratio(rng.gen_range(-8..=8), 4)).collect();
            let drift: QVec = m.normal.iter().map(|_| rational::ratio(rng.gen_range(-8..=8), 4)).collect();
            let mut limit = rational::zeros(self.dim());
            for (c, b) in coeffs.iter().zip(&m.normal) {
                rational::axpy(&mut limit, c, b);
            }
            let mut ok = true;
            for r in 1..=12u32 {
                let t = rational::ratio(1, 1i64 << r);
                let mut xr = x.clone();
                rational::axpy(&mut xr, &t, &rational::sub(&y_m, &x));
                if !m.region.contains(&xr) {
                    ok = false;
                    break;
                }
                // y_r = limit + t * drift, a normal of `upper` at x_r.
                let mut yr = limit.clone();
                for (d, b) in drift.iter().zip(&m.normal) {
                    rational::axpy(&mut yr, &(&t * d), b);
                }
                if !linalg::in_span(&m.normal, &yr) {
                    ok = false;
                    break;
                }
            }
            if !ok || !linalg::in_span(&mp.normal, &limit) || !mp.region.contains(&x) {
                report.failures += 1;
            }
        }
        report
    }

    /// Incident pairs `(upper, lower)` with `lower ⊂ cl(upper)`.
    pub fn incident_pairs(&self) -> Vec<(usize, usize)> {
        self.strata.iter().flat_map(|s| s.boundary.iter().map(move |&b| (s.id, b))).collect()
    }

    pub fn dump(&self) -> StratificationDump {
        StratificationDump {
            dim: self.dim(),
            function: self.expr.to_string(),
            kinks: self
                .expr
                .kink_nodes()
                .iter()
                .map(|k| KinkDump { node: k.node, kind: k.kind.to_string() })
                .collect(),
            strata: self
                .strata
                .iter()
                .map(|s| StratumDump {
                    id: s.id,
                    signs: s.pattern(),
                    dimension: s.dim,
                    point: exact_strings(&s.point),
                    tangent: s.tangent.iter().map(|v| exact_strings(v)).collect(),
                    normal: s.normal.iter().map(|v| exact_strings(v)).collect(),
                    gradient: exact_strings(&s.restriction.grad),
                    offset: s.restriction.offset.to_string(),
                    boundary: s.boundary.clone(),
                    cofaces: s.cofaces.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KinkDump {
    pub node: usize,
    pub kind: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StratumDump {
    pub id: usize,
    pub signs: String,
    pub dimension: usize,
    pub point: Vec<String>,
    pub tangent: Vec<Vec<String>>,
    pub normal: Vec<Vec<String>>,
    pub gradient: Vec<String>,
    pub offset: String,
    pub boundary: Vec<usize>,
    pub cofaces: Vec<usize>,
}

/// Diff-friendly stratification listing ordered by (dimension, sign-vector).
#[derive(Debug, Clone, Serialize)]
pub struct StratificationDump {
    pub dim: usize,
    pub function: String,
    pub kinks: Vec<KinkDump>,
    pub strata: Vec<StratumDump>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_with_dim;
    use crate::rational::int;
    use rand::SeedableRng;

    fn strat(text: &str, n: usize) -> Stratification {
        stratify(&parse_with_dim(text, n).unwrap()).unwrap()
    }

    #[test]
    fn paper_f_has_three_strata() {
        let s = strat("relu(-x0) + x0 - relu(x0)", 1);
        assert_eq!(s.len(), 3);
        let dims: Vec<usize> = s.strata().iter().map(|m| m.dim).collect();
        assert_eq!(dims, vec![0, 1, 1]);
        let origin = s.locate(&Point::from_ints(&[0])).unwrap();
        assert_eq!(origin.dim, 0);
        assert_eq!(origin.point, vec![int(0)]);
        let right = s.locate(&Point::from_ints(&[5])).unwrap();
        assert_eq!(right.dim, 1);
        assert!(right.region.contains(&[int(1)]));
        assert!(s.frontier_violations().is_empty());
    }

    #[test]
    fn affine_has_one_stratum() {
        let s = strat("x0 - 2*x1 + 3", 2);
        assert_eq!(s.len(), 1);
        assert!(s.stratum(0).is_full_dimensional());
        assert!(s.stratum(0).normal.is_empty());
    }

    #[test]
    fn l1_norm_has_nine_strata() {
        let s = strat("abs(x0) + abs(x1)", 2);
        assert_eq!(s.len(), 9);
        let count = |d| s.strata().iter().filter(|m| m.dim == d).count();
        assert_eq!((count(0), count(1), count(2)), (1, 4, 4));
        let axis = s.locate(&Point::from_ints(&[0, -2])).unwrap();
        assert_eq!(axis.dim, 1);
        assert_eq!(axis.pattern(), "0-");
        let nv = s.normal_operator(&Point::from_ints(&[0, -2]), None).unwrap();
        assert_eq!(nv.basis, vec![vec![int(1), int(0)]]);
        assert!(s.frontier_violations().is_empty());
        // origin lies in the closure of all eight other strata
        let origin = s.locate(&Point::from_ints(&[0, 0])).unwrap();
        assert_eq!(origin.cofaces.len(), 8);
    }

    #[test]
    fn normal_operator_values() {
        let s = strat("relu(-x0) + x0 - relu(x0)", 1);
        let at0 = s.normal_operator(&Point::from_ints(&[0]), None).unwrap();
        assert_eq!(at0.basis.len(), 1);
        let at3 = s.normal_operator(&Point::from_ints(&[3]), None).unwrap();
        assert!(at3.is_trivial());
        assert!(matches!(
            s.normal_operator(&Point::from_ints(&[0]), Some(int(0))),
            Err(PolyError::NonPositiveRadius(_))
        ));
    }

    #[test]
    fn clarke_values() {
        let s = strat("relu(-x0) + x0 - relu(x0)", 1);
        assert_eq!(s.clarke(&Point::from_ints(&[0])).unwrap().vertices(), &[vec![int(0)]]);
        let s = strat("abs(x0)", 1);
        assert_eq!(s.clarke(&Point::from_ints(&[0])).unwrap().vertices(), &[vec![int(-1)], vec![int(1)]]);
        let s = strat("max(x0, x1)", 2);
        let c = s.clarke(&Point::from_ints(&[1, 1])).unwrap();
        assert_eq!(c.vertices(), &[vec![int(0), int(1)], vec![int(1), int(0)]]);
        let id = s.locate(&Point::from_ints(&[1, 1])).unwrap().id;
        assert_eq!(s.stratum_clarke(id), c);
    }

    #[test]
    fn nested_and_cross_functions() {
        let s = strat("abs(abs(x0) - 1)", 1);
        // kinks at -1, 0, 1: four intervals and three points
        assert_eq!(s.len(), 7);
        assert!(s.frontier_violations().is_empty());
        let s = strat("max(x0, min(x1, -x0))", 2);
        assert!(s.frontier_violations().is_empty());
        for m in s.strata() {
            assert_eq!(s.locate_coords(&m.point).unwrap().id, m.id);
        }
    }

    #[test]
    fn dimension_guard() {
        let e = parse_with_dim("abs(x4)", 5).unwrap();
        assert_eq!(stratify(&e).unwrap_err(), PolyError::DimensionGuard(5));
    }

    #[test]
    fn whitney_probe_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = strat("relu(-x0) + x0 - relu(x0)", 1);
        let origin = s.locate(&Point::from_ints(&[0])).unwrap().id;
        let right = s.locate(&Point::from_ints(&[1])).unwrap().id;
        let left = s.locate(&Point::from_ints(&[-1])).unwrap().id;
        let r = s.whitney_probe(right, origin, 20, &mut rng);
        assert!(!r.vacuous && r.passed() && r.trials == 20);
        let r = s.whitney_probe(right, left, 20, &mut rng);
        assert!(r.vacuous && r.passed());

        let s = strat("abs(x0) + abs(x1)", 2);
        let origin = s.locate(&Point::from_ints(&[0, 0])).unwrap().id;
        let quadrant = s.locate(&Point::from_ints(&[1, 1])).unwrap().id;
        let r = s.whitney_probe(quadrant, origin, 20, &mut rng);
        assert!(!r.vacuous && r.passed());
    }

    #[test]
    fn dump_orders_by_dimension_then_signs() {
        let s = strat("abs(x0) + abs(x1)", 2);
        let d = s.dump();
        let keys: Vec<(usize, String)> = d.strata.iter().map(|m| (m.dimension, m.signs.clone())).collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|a, b| {
            let rank = |c: char| match c {
                '-' => 0,
                '0' => 1,
                _ => 2,
            };
            (a.0, a.1.chars().map(rank).collect::<Vec<_>>()).cmp(&(b.0, b.1.chars().map(rank).collect::<Vec<_>>()))
        });
        assert_eq!(keys, sorted);
        assert_eq!(d.strata[0].signs, "00");
    }
}
