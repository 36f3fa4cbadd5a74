//! Diminishing-step descent driven by a candidate field.

use num_traits::Signed;
use rand::Rng;
use serde::Serialize;

use crate::ad::{grad_forward, AdError};
use crate::expr::{ExprError, Point};
use crate::polyhedral::{PolyError, Stratification};
use crate::rational::{self, exact_strings, QVec, Rational};
use crate::report::{float17, float17_opt, float17_vec};
use crate::verifier::{trial_rng, FieldError, FieldSpec, FieldTable};

/// Iterates whose max-norm exceeds this are reported as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DescentError {
    #[error("step count must be at least 1")]
    NoSteps,
    #[error("initial step must be positive, got {0}")]
    NonPositiveStep(Rational),
    #[error("field is empty on stratum {0}")]
    EmptyValue(usize),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescentConfig {
    pub alpha0: Rational,
    pub steps: usize,
    pub seed: u64,
    /// Stationarity gap is recorded on iterations divisible by this.
    pub gap_every: usize,
}

impl DescentConfig {
    pub fn new(alpha0: Rational, steps: usize, seed: u64) -> Self {
        Self { alpha0, steps, seed, gap_every: 10 }
    }

    /// `α_k = α_0 / (k + 1)`.
    pub fn step_size(&self, k: usize) -> Rational {
        &self.alpha0 / rational::int(k as i64 + 1)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Step {
    pub k: usize,
    pub x: Vec<String>,
    #[serde(serialize_with = "float17_vec")]
    pub x_approx: Vec<f64>,
    pub value: String,
    #[serde(serialize_with = "float17")]
    pub value_approx: f64,
    pub g: Vec<String>,
    #[serde(serialize_with = "float17")]
    pub g_norm: f64,
    #[serde(serialize_with = "float17_opt")]
    pub gap: Option<f64>,
    pub stratum: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DescentRun {
    pub field: &'static str,
    pub start: Vec<String>,
    pub alpha0: String,
    pub cap: usize,
    pub seed: u64,
    pub trajectory: Vec<Step>,
    pub final_point: Vec<String>,
    #[serde(serialize_with = "float17_vec")]
    pub final_point_approx: Vec<f64>,
    pub final_value: String,
    #[serde(serialize_with = "float17")]
    pub final_gap: f64,
    #[serde(serialize_with = "float17")]
    pub min_value: f64,
    pub diverged: bool,
}

impl DescentRun {
    pub fn final_coords(&self) -> Vec<Rational> {
        self.final_point.iter().map(|s| rational::parse_rational(s).expect("own output")).collect()
    }
}

/// Distance from the origin to the Clarke subdifferential at `x`.
pub fn stationarity_gap(strat: &Stratification, x: &Point) -> Result<f64, PolyError> {
    Ok(strat.clarke(x)?.distance_to_origin())
}

/// Exact squared stationarity gap.
pub fn stationarity_gap_sq(strat: &Stratification, x: &Point) -> Result<Rational, PolyError> {
    Ok(rational::norm_sq(&strat.clarke(x)?.min_norm_point().0))
}

/// `x_{k+1} = x_k - α_k g_k` in exact arithmetic, with `g_k` drawn uniformly
/// (seeded) from the finite representation of the field at `x_k`. Policy
/// fields use the raw AD outputs at `x_k`.
pub fn run_descent(strat: &Stratification, spec: &FieldSpec, x0: &Point, cfg: &DescentConfig) -> Result<DescentRun, DescentError> {
    if cfg.steps == 0 {
        return Err(DescentError::NoSteps);
    }
    if !cfg.alpha0.is_positive() {
        return Err(DescentError::NonPositiveStep(cfg.alpha0.clone()));
    }
    let f = strat.expr();
    let table = match spec {
        FieldSpec::Policy(p) if p.is_empty() => return Err(FieldError::NoPolicies.into()),
        FieldSpec::Policy(_) => None,
        _ => Some(FieldTable::build(strat, spec)?),
    };
    let mut rng = trial_rng(cfg.seed, 0);
    let mut x: QVec = x0.coords.clone();
    let mut trajectory = Vec::with_capacity(cfg.steps);
    let mut min_value = f64::INFINITY;
    let mut diverged = false;
    for k in 0..cfg.steps {
        let point = Point::new(x.clone());
        let stratum = strat.locate(&point)?.id;
        let candidates: Vec<QVec> = match (&table, spec) {
            (Some(t), _) => t.value(stratum).representatives(),
            (None, FieldSpec::Policy(policies)) => {
                let mut out: Vec<QVec> =
                    policies.iter().map(|p| grad_forward(f, &point, p).map(|s| s.gradient)).collect::<Result<_, _>>()?;
                out.sort();
                out.dedup();
                out
            }
            (None, _) => unreachable!(),
        };
        if candidates.is_empty() {
            return Err(DescentError::EmptyValue(stratum));
        }
        let g = candidates[rng.gen_range(0..candidates.len())].clone();
        let value = f.eval(&point)?;
        let value_approx = rational::to_f64(&value);
        min_value = min_value.min(value_approx);
        let g_norm = rational::to_f64(&rational::norm_sq(&g)).sqrt();
        let gap = (k % cfg.gap_every == 0).then(|| stationarity_gap(strat, &point)).transpose()?;
        trajectory.push(Step {
            k,
            x: exact_strings(&x),
            x_approx: rational::to_f64_vec(&x),
            value: value.to_string(),
            value_approx,
            g: exact_strings(&g),
            g_norm,
            gap,
            stratum,
        });
        rational::axpy(&mut x, &-cfg.step_size(k), &g);
        if x.iter().any(|c| rational::to_f64(c).abs() > DIVERGENCE_LIMIT) {
            diverged = true;
            break;
        }
    }
    let last = Point::new(x.clone());
    let final_value = f.eval(&last)?;
    min_value = min_value.min(rational::to_f64(&final_value));
    Ok(DescentRun {
        field: spec.kind(),
        start: exact_strings(&x0.coords),
        alpha0: cfg.alpha0.to_string(),
        cap: cfg.steps,
        seed: cfg.seed,
        trajectory,
        final_point: exact_strings(&x),
        final_point_approx: rational::to_f64_vec(&x),
        final_value: final_value.to_string(),
        final_gap: stationarity_gap(strat, &last)?,
        min_value,
        diverged,
    })
}

/// Prefix minima of `f(x_k)`; nonincreasing by construction of a single trajectory.
pub fn running_min(run: &DescentRun) -> Vec<f64> {
    let mut best = f64::INFINITY;
    run.trajectory
        .iter()
        .map(|s| {
            best = best.min(s.value_approx);
            best
        })
        .collect()
}

/// Whether the vector chosen at `step` lies outside the Clarke subdifferential there.
pub fn left_clarke(strat: &Stratification, step: &Step) -> Result<bool, PolyError> {
    let parse = |v: &[String]| -> QVec { v.iter().map(|c| rational::parse_rational(c).expect("own output")).collect() };
    let clarke = strat.clarke(&Point::new(parse(&step.x)))?;
    Ok(clarke.contains(&parse(&step.g)).is_none())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::SelectionPolicy;
    use crate::expr::parse_with_dim;
    use crate::polyhedral::stratify;
    use crate::rational::{int, ratio};
    use num_traits::Zero;

    fn strat(text: &str, n: usize) -> Stratification {
        stratify(&parse_with_dim(text, n).unwrap()).unwrap()
    }

    #[test]
    fn gaps_at_simple_points() {
        let s = strat("abs(x0)", 1);
        assert_eq!(stationarity_gap(&s, &Point::from_ints(&[0])).unwrap(), 0.0);
        assert_eq!(stationarity_gap(&s, &Point::from_ints(&[1])).unwrap(), 1.0);
        let s = strat("max(x0, x1)", 2);
        let g = stationarity_gap(&s, &Point::from_ints(&[1, 1])).unwrap();
        assert!((g - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(stationarity_gap_sq(&s, &Point::from_ints(&[1, 1])).unwrap(), ratio(1, 2));
    }

    /// The symmetric recursion `s_{k+1} = s_k - α_k sign(s_k)` from `s_0 = 1`,
    /// evaluated independently with exact fractions.
    fn scalar_recursion(alpha0: Rational, steps: usize) -> Vec<Rational> {
        let mut s = vec![int(1)];
        for k in 0..steps {
            let cur = s[k].clone();
            let sign = if cur.is_positive() { int(1) } else if cur.is_negative() { int(-1) } else { int(0) };
            s.push(cur - &alpha0 / int(k as i64 + 1) * sign);
        }
        s
    }

    #[test]
    fn l1_descent_tracks_the_scalar_recursion() {
        let s = strat("abs(x0) + abs(x1)", 2);
        let cfg = DescentConfig::new(ratio(1, 2), 200, 0);
        let run = run_descent(&s, &FieldSpec::Clarke, &Point::from_ints(&[1, 1]), &cfg).unwrap();
        let oracle = scalar_recursion(ratio(1, 2), 200);
        for (step, want) in run.trajectory.iter().zip(&oracle) {
            assert_eq!(step.x, vec![want.to_string(), want.to_string()]);
        }
        assert_eq!(run.final_coords(), vec![oracle[200].clone(), oracle[200].clone()]);
        // the recursion never hits zero, so every iterate is a smooth point with gradient (±1, ±1)
        assert!(oracle.iter().all(|v| !v.is_zero()));
        assert!((run.final_gap - 2f64.sqrt()).abs() < 1e-15);
        assert!((rational::to_f64(&oracle[200]) - -1.2560524697699389e-05).abs() < 1e-19);
    }

    #[test]
    fn affine_descent_has_closed_form() {
        let s = strat("2*x0 - 3*x1 + 1", 2);
        let cfg = DescentConfig::new(ratio(1, 4), 12, 3);
        let run = run_descent(&s, &FieldSpec::Clarke, &Point::from_ints(&[1, 2]), &cfg).unwrap();
        let total: Rational = (0..12).map(|k| cfg.step_size(k)).sum();
        assert_eq!(run.final_coords(), vec![int(1) - &total * int(2), int(2) + &total * int(3)]);
    }

    #[test]
    fn anomalous_step_on_the_flat_function() {
        let s = strat("relu(-x0) + x0 - relu(x0)", 1);
        let spec = FieldSpec::Policy(vec![SelectionPolicy::default()]);
        let run = run_descent(&s, &spec, &Point::from_ints(&[0]), &DescentConfig::new(ratio(1, 2), 5, 0)).unwrap();
        assert_eq!(run.trajectory[0].g, vec!["1".to_string()]);
        assert!(left_clarke(&s, &run.trajectory[0]).unwrap());
        assert!(!left_clarke(&s, &run.trajectory[1]).unwrap());
        assert_eq!(run.trajectory[1].x, vec!["-1/2".to_string()]);
        assert!(run.trajectory.iter().all(|st| st.value == "0"));
        assert_eq!(run.final_value, "0");
    }

    #[test]
    fn rejects_bad_configuration() {
        let s = strat("abs(x0)", 1);
        let x = Point::from_ints(&[1]);
        assert_eq!(run_descent(&s, &FieldSpec::Clarke, &x, &DescentConfig::new(int(1), 0, 0)).unwrap_err(), DescentError::NoSteps);
        assert!(matches!(
            run_descent(&s, &FieldSpec::Clarke, &x, &DescentConfig::new(int(0), 3, 0)),
            Err(DescentError::NonPositiveStep(_))
        ));
    }

    #[test]
    fn reports_divergence() {
        let s = strat("x0", 1);
        let spec = FieldSpec::Custom { per_stratum: Default::default(), fallback: vec![vec![int(-1_000_000_000_000_000)]] };
        let run = run_descent(&s, &spec, &Point::from_ints(&[0]), &DescentConfig::new(int(100), 50, 0)).unwrap();
        assert!(run.diverged);
        assert!(run.trajectory.len() < 50);
    }
}
