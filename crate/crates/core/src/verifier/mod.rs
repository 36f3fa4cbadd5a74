//! Certification and refutation of conservativity for candidate fields.
//!
//! The chain-rule check integrates `⟨x'(t), g(x(t))⟩` along seeded curves,
//! splitting at every kink time, and compares with the exact increment of
//! the function. The structure check decides `g ∈ ∂f(x) + N(x)` exactly at
//! sampled points. The regularity check bounds the field on a box and tests
//! graph closedness along sequences converging onto lower strata.

pub mod curve;
pub mod field;
pub mod quadrature;
pub mod roots;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use curve::{make_curve, Curve, CurveError, Piece, Segment};
pub use field::{FieldError, FieldSpec, FieldTable, FieldValue};
pub use quadrature::QuadratureError;

use crate::expr::{Affine, Point};
use crate::polyhedral::{member_sum, Certificate, PolyError, Stratification};
use crate::rational::{self, exact_strings, QVec, Rational};
use crate::report::{float17, float17_opt, float17_vec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    #[serde(serialize_with = "float17")]
    pub abs: f64,
    #[serde(serialize_with = "float17")]
    pub rel: f64,
    #[serde(serialize_with = "float17")]
    pub quadrature: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { abs: 1e-8, rel: 1e-8, quadrature: 1e-10 }
    }
}

impl Tolerances {
    pub fn threshold(&self, scale: f64) -> f64 {
        self.abs.max(self.rel * scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_pass(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(if self.is_pass() { "PASS" } else { "FAIL" })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("curve {trial}: {source}")]
    Quadrature { trial: usize, source: QuadratureError },
    #[error("field is empty on stratum {0}")]
    EmptyValue(usize),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Generator for trial `stream` under master `seed`; independent of scheduling.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionResult {
    pub index: usize,
    #[serde(serialize_with = "float17")]
    pub integral: f64,
    #[serde(serialize_with = "float17")]
    pub residual: f64,
    #[serde(serialize_with = "float17")]
    pub error_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainRuleReport {
    pub trial: usize,
    pub seed: Option<u64>,
    pub segments: usize,
    pub pieces: usize,
    pub dwell_stratum: Option<usize>,
    pub dwell_orthogonal: Option<bool>,
    #[serde(serialize_with = "float17_vec")]
    pub kink_times: Vec<f64>,
    pub start: Vec<String>,
    pub end: Vec<String>,
    /// Exact `f(x(1)) - f(x(0))`.
    pub increment: String,
    #[serde(serialize_with = "float17")]
    pub increment_approx: f64,
    #[serde(serialize_with = "float17")]
    pub integral: f64,
    #[serde(serialize_with = "float17")]
    pub residual: f64,
    #[serde(serialize_with = "float17")]
    pub error_bound: f64,
    #[serde(serialize_with = "float17")]
    pub threshold: f64,
    pub selections: Vec<SelectionResult>,
    pub verdict: Verdict,
}

impl ChainRuleReport {
    pub fn passed(&self) -> bool {
        self.verdict.is_pass()
    }
}

fn float_coeffs(seg: &Segment) -> [Vec<f64>; 4] {
    std::array::from_fn(|d| rational::to_f64_vec(&seg.coeffs[d]))
}

/// Checks `f(x(1)) - f(x(0)) = ∫ ⟨x'(t), g(x(t))⟩ dt` for `selections` seeded
/// selections of the tabulated field, each constant on every kink-free piece.
pub fn verify_chain_rule(
    strat: &Stratification,
    table: &FieldTable,
    curve: &Curve,
    selections: usize,
    seed: u64,
    trial: usize,
    tol: &Tolerances,
) -> Result<ChainRuleReport, VerifyError> {
    let f = strat.expr();
    let (start, end) = (curve.start(), curve.end());
    let increment = f.eval(&Point::new(end.clone())).map_err(PolyError::from)?
        - f.eval(&Point::new(start.clone())).map_err(PolyError::from)?;
    let inc = rational::to_f64(&increment);
    let threshold = tol.threshold(inc.abs());
    let coeffs: Vec<[Vec<f64>; 4]> = curve.segments.iter().map(float_coeffs).collect();
    let mut results = Vec::with_capacity(selections);
    for j in 0..selections.max(1) {
        let mut rng = trial_rng(seed, 1 + j as u64);
        let (mut integral, mut err) = (0.0, 0.0);
        for piece in &curve.pieces {
            let value = table.value(piece.stratum);
            if value.is_empty() {
                return Err(VerifyError::EmptyValue(piece.stratum));
            }
            let g = rational::to_f64_vec(&value.select(&mut rng));
            let c = &coeffs[piece.segment];
            let integrand = |s: f64| {
                (0..g.len()).map(|i| (c[1][i] + s * (2.0 * c[2][i] + s * 3.0 * c[3][i])) * g[i]).sum::<f64>()
            };
            let (v, e) = quadrature::integrate(integrand, piece.s0, piece.s1, tol.quadrature)
                .map_err(|source| VerifyError::Quadrature { trial, source })?;
            integral += v;
            err += e;
        }
        results.push(SelectionResult { index: j, integral, residual: (integral - inc).abs(), error_bound: err });
    }
    let worst = results.iter().map(|r| r.residual).fold(0.0, f64::max);
    let orthogonal = curve.dwell_orthogonal(strat);
    let ok = worst <= threshold && orthogonal != Some(false);
    Ok(ChainRuleReport {
        trial,
        seed: curve.seed,
        segments: curve.segments.len(),
        pieces: curve.pieces.len(),
        dwell_stratum: curve.dwell_stratum,
        dwell_orthogonal: orthogonal,
        kink_times: curve.kink_times.clone(),
        start: exact_strings(&start),
        end: exact_strings(&end),
        increment: increment.to_string(),
        increment_approx: inc,
        integral: results[0].integral,
        residual: worst,
        error_bound: results.iter().map(|r| r.error_bound).fold(0.0, f64::max),
        threshold,
        selections: results,
        verdict: Verdict::from_pass(ok),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SuitePlan {
    pub curves: usize,
    pub selections: usize,
    pub seed: u64,
    /// Add one dwell curve for every lower-dimensional stratum.
    pub dwell: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub field: &'static str,
    pub radius: Option<String>,
    pub seed: u64,
    pub curves: usize,
    pub dwell_curves: usize,
    pub passed: usize,
    pub failed: usize,
    #[serde(serialize_with = "float17")]
    pub worst_residual: f64,
    pub reports: Vec<ChainRuleReport>,
    pub verdict: Verdict,
}

/// Seeded chain-rule trials for one field, run in parallel and merged in trial order.
pub fn run_chain_suite(
    strat: &Stratification,
    spec: &FieldSpec,
    plan: &SuitePlan,
    tol: &Tolerances,
) -> Result<SuiteReport, VerifyError> {
    Ok(run_chain_suites(strat, std::slice::from_ref(spec), plan, tol)?.remove(0))
}

/// Like [`run_chain_suite`] for several fields over the same curves; each curve is analyzed once.
pub fn run_chain_suites(
    strat: &Stratification,
    specs: &[FieldSpec],
    plan: &SuitePlan,
    tol: &Tolerances,
) -> Result<Vec<SuiteReport>, VerifyError> {
    let tables: Vec<FieldTable> = specs.iter().map(|s| FieldTable::build(strat, s)).collect::<Result<_, _>>()?;
    let mut trials: Vec<Option<usize>> = vec![None; plan.curves];
    if plan.dwell {
        trials.extend(strat.strata().iter().filter(|s| !s.is_full_dimensional()).map(|s| Some(s.id)));
    }
    let per_trial: Vec<Vec<ChainRuleReport>> = trials
        .par_iter()
        .enumerate()
        .map(|(trial, &dwell)| {
            let curve_seed = trial_rng(plan.seed, trial as u64).gen::<u64>();
            let curve = make_curve(strat, curve_seed, dwell)?;
            tables
                .iter()
                .map(|t| verify_chain_rule(strat, t, &curve, plan.selections, curve_seed, trial, tol))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let dwell_curves = trials.iter().filter(|t| t.is_some()).count();
    Ok(specs
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let reports: Vec<ChainRuleReport> = per_trial.iter().map(|r| r[k].clone()).collect();
            let passed = reports.iter().filter(|r| r.passed()).count();
            SuiteReport {
                field: spec.kind(),
                radius: spec.radius().map(|r| r.to_string()),
                seed: plan.seed,
                curves: reports.len(),
                dwell_curves,
                passed,
                failed: reports.len() - passed,
                worst_residual: reports.iter().map(|r| r.residual).fold(0.0, f64::max),
                verdict: Verdict::from_pass(passed == reports.len()),
                reports,
            }
        })
        .collect())
}

/// Chain-rule suite for `∂f + N ∩ rB`, including a dwell curve in every lower-dimensional stratum.
pub fn verify_conservative_sum(
    strat: &Stratification,
    radius: Rational,
    curves: usize,
    selections: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<SuiteReport, VerifyError> {
    if radius <= Rational::zero() {
        return Err(PolyError::NonPositiveRadius(radius).into());
    }
    let plan = SuitePlan { curves, selections, seed, dwell: true };
    run_chain_suite(strat, &FieldSpec::truncated(radius), &plan, tol)
}

/// Where to test pointwise properties: every stratum's interior point, the
/// `extra` points, and `random` grid points with spacing 1/4 in `[-2, 2]^n`.
#[derive(Debug, Clone, Default)]
pub struct PointPlan {
    pub extra: Vec<QVec>,
    pub random: usize,
    pub seed: u64,
}

impl PointPlan {
    pub fn points(&self, strat: &Stratification) -> Vec<QVec> {
        let mut out: Vec<QVec> = strat.strata().iter().map(|s| s.point.clone()).collect();
        out.extend(self.extra.iter().cloned());
        let mut rng = trial_rng(self.seed, 0);
        for _ in 0..self.random {
            out.push((0..strat.dim()).map(|_| rational::ratio(rng.gen_range(-8..=8), 4)).collect());
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckedValue {
    pub value: Vec<String>,
    pub member: bool,
    pub certified: bool,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointCheck {
    pub point: Vec<String>,
    pub stratum: usize,
    pub clarke: Vec<Vec<String>>,
    pub normal_dim: usize,
    pub values: Vec<CheckedValue>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub field: &'static str,
    pub points_checked: usize,
    pub values_checked: usize,
    pub violations: usize,
    pub uncertified: usize,
    pub checks: Vec<PointCheck>,
    pub verdict: Verdict,
}

impl StructureReport {
    pub fn violating(&self) -> impl Iterator<Item = (&PointCheck, &CheckedValue)> {
        self.checks.iter().flat_map(|c| c.values.iter().filter(|v| !v.member).map(move |v| (c, v)))
    }
}

/// Decides `g ∈ ∂f(x) + N(x)` for every represented value `g` of the field at
/// every planned point, keeping the exact certificate of each decision.
pub fn verify_structure_inclusion(strat: &Stratification, table: &FieldTable, plan: &PointPlan) -> StructureReport {
    let points = plan.points(strat);
    let checks: Vec<PointCheck> = points
        .par_iter()
        .map(|x| {
            let id = strat.locate_coords(x).expect("strata cover space").id;
            let clarke = strat.clarke(&Point::new(x.clone())).expect("dimension checked");
            let nv = strat.normal_value(id, None).expect("untruncated");
            let values = table
                .value(id)
                .representatives()
                .into_iter()
                .map(|g| {
                    let m = member_sum(&g, &clarke, &nv);
                    let certified = m.certificate.verify(&g, &clarke, &nv);
                    CheckedValue { value: exact_strings(&g), member: m.member, certified, certificate: m.certificate }
                })
                .collect();
            PointCheck { point: exact_strings(x), stratum: id, clarke: clarke.to_strings(), normal_dim: nv.basis.len(), values }
        })
        .collect();
    let values_checked = checks.iter().map(|c| c.values.len()).sum();
    let violations = checks.iter().flat_map(|c| &c.values).filter(|v| !v.member).count();
    let uncertified = checks.iter().flat_map(|c| &c.values).filter(|v| !v.certified).count();
    StructureReport {
        field: table.kind(),
        points_checked: checks.len(),
        values_checked,
        violations,
        uncertified,
        verdict: Verdict::from_pass(violations == 0 && uncertified == 0),
        checks,
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxBounds {
    pub lo: QVec,
    pub hi: QVec,
}

impl BoxBounds {
    pub fn symmetric(n: usize, r: &Rational) -> Self {
        Self { lo: vec![-r.clone(); n], hi: vec![r.clone(); n] }
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l <= v && v <= h)
    }

    fn forms(&self) -> Vec<Affine> {
        let n = self.lo.len();
        let mut out = Vec::with_capacity(2 * n);
        for i in 0..n {
            let x = Affine::variable(n, i);
            out.push(x.sub(&Affine::constant(n, self.lo[i].clone())));
            out.push(Affine::constant(n, self.hi[i].clone()).sub(&x));
        }
        out
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> QVec {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| l + (h - l) * rational::ratio(rng.gen_range(0..=64), 64))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub field: &'static str,
    pub box_lo: Vec<String>,
    pub box_hi: Vec<String>,
    pub strata_in_box: Vec<usize>,
    pub samples: usize,
    pub nonempty: bool,
    pub empty_strata: Vec<usize>,
    pub locally_bounded: bool,
    pub unbounded_strata: Vec<usize>,
    /// Upper bound on `‖g‖` over the box, when one exists.
    #[serde(serialize_with = "float17_opt")]
    pub bound: Option<f64>,
    pub closedness: &'static str,
    pub closedness_checks: usize,
    pub closedness_violations: Vec<(usize, usize)>,
    pub closed: bool,
    pub verdict: Verdict,
}

fn closedness_argument(spec: &FieldSpec) -> &'static str {
    match spec {
        FieldSpec::Policy(_) => "finitely many constant values per stratum, each lower stratum inherits the values of incident strata",
        FieldSpec::Clarke => "polytope-valued, vertex sets only grow toward lower strata",
        FieldSpec::ClarkePlusNormal { .. } => "polytope plus normal space, both monotone under stratum incidence",
        FieldSpec::Custom { .. } => "no structural argument, graph limits tested on incident pairs",
    }
}

/// Nonemptiness, a norm bound over `bounds`, and graph closedness of the field.
pub fn check_field_regularity(
    strat: &Stratification,
    spec: &FieldSpec,
    bounds: &BoxBounds,
    samples: usize,
    seed: u64,
) -> Result<RegularityReport, VerifyError> {
    let table = FieldTable::build(strat, spec)?;
    let forms = bounds.forms();
    let in_box: Vec<usize> = strat
        .strata()
        .iter()
        .filter(|s| s.region.interior_point_with(&[], &forms).is_some())
        .map(|s| s.id)
        .collect();

    let mut rng = trial_rng(seed, 0);
    let mut empty: Vec<usize> = in_box.iter().copied().filter(|&id| table.value(id).is_empty()).collect();
    for _ in 0..samples {
        let x = bounds.sample(&mut rng);
        let id = strat.locate_coords(&x)?.id;
        if table.value(id).is_empty() && !empty.contains(&id) {
            empty.push(id);
        }
    }
    empty.sort_unstable();

    let unbounded: Vec<usize> = in_box.iter().copied().filter(|&id| table.value(id).unbounded()).collect();
    let bound = unbounded.is_empty().then(|| {
        in_box
            .iter()
            .map(|&id| {
                let v = table.value(id);
                let base = rational::to_f64(&table.max_point_norm_sq(id)).sqrt();
                let normal = v.normal.as_ref().filter(|n| !n.is_trivial()).and_then(|n| n.radius.as_ref());
                base + normal.map_or(0.0, rational::to_f64)
            })
            .fold(0.0, f64::max)
    });

    let mut checks = 0;
    let mut violations = Vec::new();
    for &lower in &in_box {
        let low = strat.stratum(lower);
        let x = if bounds.contains(&low.point) {
            low.point.clone()
        } else {
            low.region.interior_point_with(&[], &forms).expect("meets box")
        };
        for &upper in &low.cofaces {
            checks += 1;
            let y = strat.sample_in(upper, &mut rng, &Rational::from_integer(1.into()));
            let mut ok = (1..=8).all(|k| {
                let xk: QVec = x.iter().zip(&y).map(|(a, b)| a + (b - a) / rational::int(k)).collect();
                strat.locate_coords(&xk).map(|s| s.id == upper).unwrap_or(false)
            });
            let target = table.value(lower);
            ok = ok && table.value(upper).representatives().iter().all(|g| target.contains(g));
            if !ok {
                violations.push((upper, lower));
            }
        }
    }
    let (nonempty, bounded, closed) = (empty.is_empty(), unbounded.is_empty(), violations.is_empty());
    Ok(RegularityReport {
        field: spec.kind(),
        box_lo: exact_strings(&bounds.lo),
        box_hi: exact_strings(&bounds.hi),
        strata_in_box: in_box,
        samples,
        nonempty,
        empty_strata: empty,
        locally_bounded: bounded,
        unbounded_strata: unbounded,
        bound,
        closedness: closedness_argument(spec),
        closedness_checks: checks,
        closedness_violations: violations,
        closed,
        verdict: Verdict::from_pass(nonempty && bounded && closed),
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::ad::SelectionPolicy;
    use crate::expr::parse_with_dim;
    use crate::polyhedral::stratify;
    use crate::rational::{int, ratio};

    fn strat(text: &str, n: usize) -> Stratification {
        stratify(&parse_with_dim(text, n).unwrap()).unwrap()
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn policy_field_on_the_anomaly_is_conservative() {
        let s = strat("relu(-x0) + x0 - relu(x0)", 1);
        let spec = FieldSpec::Policy(vec![SelectionPolicy::default()]);
        let plan = SuitePlan { curves: 30, selections: 3, seed: 7, dwell: false };
        let r = run_chain_suite(&s, &spec, &plan, &tol()).unwrap();
        assert!(r.verdict.is_pass(), "{r:?}");
        assert!(r.reports.iter().all(|c| c.increment == "0" && c.integral.abs() < 1e-12));
    }

    #[test]
    fn clarke_field_on_abs_along_a_line() {
        let s = strat("abs(x0)", 1);
        let t = FieldTable::build(&s, &FieldSpec::Clarke).unwrap();
        let c = Curve::line(&s, &[ratio(-1, 2)], &[ratio(1, 2)]).unwrap();
        let r = verify_chain_rule(&s, &t, &c, 4, 0, 0, &tol()).unwrap();
        assert_eq!(r.increment, "0");
        assert!(r.integral.abs() < 1e-14);
        assert!(r.passed());
    }

    #[test]
    fn zero_field_on_abs_is_refuted() {
        let s = strat("abs(x0)", 1);
        let t = FieldTable::build(&s, &FieldSpec::zero(1)).unwrap();
        let c = Curve::line(&s, &[int(0)], &[int(1)]).unwrap();
        let r = verify_chain_rule(&s, &t, &c, 1, 0, 0, &tol()).unwrap();
        assert_eq!(r.increment, "1");
        assert_eq!(r.integral, 0.0);
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn conservative_sum_with_dwell_curves() {
        let s = strat("relu(-x0) + x0 - relu(x0)", 1);
        let r = verify_conservative_sum(&s, int(5), 10, 3, 1, &tol()).unwrap();
        assert_eq!(r.dwell_curves, 1);
        assert!(r.verdict.is_pass());

        let s = strat("abs(x0) + abs(x1)", 2);
        let r = verify_conservative_sum(&s, int(2), 10, 3, 2, &tol()).unwrap();
        assert_eq!(r.dwell_curves, 5);
        assert!(r.reports.iter().filter(|c| c.dwell_stratum.is_some()).all(|c| c.dwell_orthogonal == Some(true)));
        assert!(r.verdict.is_pass(), "worst residual {}", r.worst_residual);

        let s = strat("3*x0 - x1 + 1", 2);
        let r = verify_conservative_sum(&s, int(1), 5, 2, 3, &tol()).unwrap();
        assert_eq!(r.dwell_curves, 0);
        assert!(r.verdict.is_pass());

        assert!(verify_conservative_sum(&s, int(0), 5, 2, 3, &tol()).is_err());
    }

    #[test]
    fn normal_component_on_the_half_axis_integrates_to_zero() {
        // Dwell segment on {x0 = 0, x1 > 0} with the selection (1, 1) + (mu, 0).
        let s = strat("abs(x0) + abs(x1)", 2);
        let axis = s.locate(&Point::from_ints(&[0, 1])).unwrap().id;
        let mut table = BTreeMap::new();
        table.insert(axis, vec![vec![int(8), int(1)]]);
        let spec = FieldSpec::Custom { per_stratum: table, fallback: vec![vec![int(0), int(0)]] };
        let t = FieldTable::build(&s, &spec).unwrap();
        let seg = Segment::linear(int(0), int(1), &[int(0), ratio(1, 2)], &[int(0), int(2)]);
        let c = Curve::from_segments(&s, vec![seg]).unwrap();
        assert_eq!(c.pieces.len(), 1);
        assert_eq!(c.pieces[0].stratum, axis);
        let r = verify_chain_rule(&s, &t, &c, 1, 0, 0, &tol()).unwrap();
        assert!(r.passed() && (r.integral - 1.5).abs() < 1e-14);
    }

    #[test]
    fn determinism_across_thread_counts() {
        let s = strat("max(x0, min(x1, -x0))", 2);
        let plan = SuitePlan { curves: 16, selections: 2, seed: 11, dwell: true };
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run_chain_suite(&s, &FieldSpec::truncated(int(2)), &plan, &tol()).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn structure_inclusion_on_the_anomaly() {
        let s = strat("relu(-x0) + x0 - relu(x0)", 1);
        let family = vec![SelectionPolicy::default(), SelectionPolicy::with_relu(int(1))];
        let t = FieldTable::build(&s, &FieldSpec::Policy(family)).unwrap();
        let plan = PointPlan { extra: vec![vec![int(0)]], random: 10, seed: 1 };
        let r = verify_structure_inclusion(&s, &t, &plan);
        assert!(r.verdict.is_pass());
        let at0 = r.checks.iter().find(|c| c.point == vec!["0".to_string()]).unwrap();
        assert_eq!(at0.clarke, vec![vec!["0".to_string()]]);
        assert_eq!(at0.normal_dim, 1);
        assert!(at0.values.iter().any(|v| v.value == vec!["1".to_string()]));
        assert!(at0.values.iter().any(|v| v.value == vec!["-1".to_string()]));
    }

    #[test]
    fn planted_value_is_separated() {
        let s = strat("max(x0, x1)", 2);
        let diag = s.locate(&Point::from_ints(&[1, 1])).unwrap().id;
        let mut per = BTreeMap::new();
        per.insert(diag, vec![vec![int(2), int(0)]]);
        let spec = FieldSpec::Custom { per_stratum: per, fallback: vec![vec![int(1), int(0)]] };
        let t = FieldTable::build(&s, &spec).unwrap();
        let r = verify_structure_inclusion(&s, &t, &PointPlan { extra: vec![vec![int(1), int(1)]], ..Default::default() });
        assert_eq!(r.verdict, Verdict::Fail);
        let (check, bad) = r.violating().next().unwrap();
        assert_eq!(check.stratum, diag);
        assert!(bad.certified);
        assert!(matches!(bad.certificate, Certificate::Separated { .. }));
    }

    #[test]
    fn regularity_bounds() {
        let s = strat("abs(x0) + abs(x1)", 2);
        let b = BoxBounds::symmetric(2, &int(2));
        let r = check_field_regularity(&s, &FieldSpec::truncated(int(1)), &b, 50, 1).unwrap();
        assert!(r.verdict.is_pass());
        assert!(r.bound.unwrap() <= 2f64.sqrt() + 1.0 + 1e-12);
        assert!(r.closedness_checks > 0);

        let s = strat("2*x0 - x1", 2);
        let r = check_field_regularity(&s, &FieldSpec::Clarke, &b, 10, 1).unwrap();
        assert!((r.bound.unwrap() - 5f64.sqrt()).abs() < 1e-15);

        let s = strat("relu(-x0) + x0 - relu(x0)", 1);
        let b = BoxBounds::symmetric(1, &int(2));
        let r = check_field_regularity(&s, &FieldSpec::ClarkePlusNormal { radius: None }, &b, 10, 1).unwrap();
        assert!(!r.locally_bounded && r.bound.is_none() && r.verdict == Verdict::Fail);
        let r = check_field_regularity(&s, &FieldSpec::truncated(int(1)), &b, 10, 1).unwrap();
        assert!(r.verdict.is_pass() && r.bound == Some(1.0));
    }

    #[test]
    fn custom_field_that_is_not_closed() {
        let s = strat("abs(x0)", 1);
        let origin = s.locate(&Point::from_ints(&[0])).unwrap().id;
        let mut per = BTreeMap::new();
        per.insert(origin, vec![vec![int(0)]]);
        let spec = FieldSpec::Custom { per_stratum: per, fallback: vec![vec![int(1)]] };
        let r = check_field_regularity(&s, &spec, &BoxBounds::symmetric(1, &int(1)), 5, 0).unwrap();
        assert!(!r.closed);
        assert_eq!(r.closedness_violations.len(), 2);
    }
}
