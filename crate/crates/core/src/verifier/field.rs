//! Candidate set-valued fields and their finite per-stratum representations.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::ad::{grad_forward, AdError, SelectionPolicy};
use crate::expr::Point;
use crate::polyhedral::{NormalValue, PolyError, Polytope, Stratification};
use crate::rational::{self, QVec, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FieldError {
    #[error("policy field needs at least one policy")]
    NoPolicies,
    #[error("custom field assigns {found}-vectors in dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("custom field names stratum {0}, which does not exist")]
    UnknownStratum(usize),
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    /// Outputs of nonsmooth AD under each policy, closed up over neighboring strata.
    Policy(Vec<SelectionPolicy>),
    Clarke,
    /// Clarke subdifferential plus the stratum normal space, optionally cut to a ball.
    ClarkePlusNormal { radius: Option<Rational> },
    /// Fixed finite sets per stratum, `fallback` elsewhere.
    Custom { per_stratum: BTreeMap<usize, Vec<QVec>>, fallback: Vec<QVec> },
}

impl FieldSpec {
    pub fn truncated(r: Rational) -> Self {
        FieldSpec::ClarkePlusNormal { radius: Some(r) }
    }

    pub fn zero(n: usize) -> Self {
        FieldSpec::Custom { per_stratum: BTreeMap::new(), fallback: vec![rational::zeros(n)] }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            FieldSpec::Policy(_) => "policy",
            FieldSpec::Clarke => "clarke",
            FieldSpec::ClarkePlusNormal { radius: Some(_) } => "clarke+truncated-normal",
            FieldSpec::ClarkePlusNormal { radius: None } => "clarke+normal",
            FieldSpec::Custom { .. } => "custom",
        }
    }

    pub fn radius(&self) -> Option<&Rational> {
        match self {
            FieldSpec::ClarkePlusNormal { radius } => radius.as_ref(),
            _ => None,
        }
    }
}

/// Field value on one stratum: `points` (or their hull, when `convex`) plus
/// the normal part when present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldValue {
    pub points: Vec<QVec>,
    pub convex: bool,
    pub normal: Option<NormalValue>,
}

impl FieldValue {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Normal part is an unbounded subspace.
    pub fn unbounded(&self) -> bool {
        self.normal.as_ref().is_some_and(|n| !n.is_trivial() && !n.is_truncated())
    }

    /// Finitely many elements whose hull spans the bounded part of the value:
    /// every point, and every point shifted by a normal generator.
    pub fn representatives(&self) -> Vec<QVec> {
        let mut out = self.points.clone();
        if let Some(nv) = &self.normal {
            for p in &self.points {
                for w in nv.generators() {
                    out.push(rational::add(p, &w));
                }
            }
        }
        out
    }

    /// A member of the value drawn with `rng`: a point, or a random convex
    /// combination for convex kinds, plus either an extreme or a mixed normal part.
    pub fn select(&self, rng: &mut ChaCha8Rng) -> QVec {
        let mut g = if self.convex && self.points.len() > 1 && rng.gen_bool(0.5) {
            random_hull_point(&self.points, rng)
        } else {
            self.points[rng.gen_range(0..self.points.len())].clone()
        };
        if let Some(nv) = self.normal.as_ref().filter(|n| !n.is_trivial()) {
            let w = if nv.is_truncated() {
                let gens = nv.generators();
                if rng.gen_bool(0.5) {
                    gens[rng.gen_range(0..gens.len())].clone()
                } else {
                    random_hull_point(&gens, rng)
                }
            } else {
                let mut w = rational::zeros(nv.dim);
                for b in &nv.basis {
                    rational::axpy(&mut w, &rational::int(rng.gen_range(-10..=10)), b);
                }
                w
            };
            g = rational::add(&g, &w);
        }
        g
    }

    /// Exact membership of `g` in this value.
    pub fn contains(&self, g: &[Rational]) -> bool {
        match (&self.normal, self.convex) {
            (Some(nv), _) => crate::polyhedral::member_sum(g, &Polytope::new(nv.dim, self.points.clone()), nv).member,
            (None, true) => Polytope::new(g.len(), self.points.clone()).contains(g).is_some(),
            (None, false) => self.points.iter().any(|p| p.as_slice() == g),
        }
    }
}

fn random_hull_point(points: &[QVec], rng: &mut ChaCha8Rng) -> QVec {
    let weights: Vec<i64> = points.iter().map(|_| rng.gen_range(1..=8)).collect();
    let total: i64 = weights.iter().sum();
    let mut g = rational::zeros(points[0].len());
    for (w, p) in weights.iter().zip(points) {
        rational::axpy(&mut g, &rational::ratio(*w, total), p);
    }
    g
}

/// A field tabulated by stratum id.
#[derive(Debug, Clone)]
pub struct FieldTable {
    kind: &'static str,
    values: Vec<FieldValue>,
}

impl FieldTable {
    pub fn build(strat: &Stratification, spec: &FieldSpec) -> Result<Self, FieldError> {
        let n = strat.dim();
        let values = match spec {
            FieldSpec::Policy(policies) => {
                if policies.is_empty() {
                    return Err(FieldError::NoPolicies);
                }
                let mut raw: Vec<BTreeSet<QVec>> = Vec::with_capacity(strat.len());
                for s in strat.strata() {
                    let x = Point::new(s.point.clone());
                    let mut set = BTreeSet::new();
                    for p in policies {
                        set.insert(grad_forward(strat.expr(), &x, p)?.gradient);
                    }
                    raw.push(set);
                }
                strat
                    .strata()
                    .iter()
                    .map(|s| {
                        let mut set = raw[s.id].clone();
                        for &c in &s.cofaces {
                            set.extend(raw[c].iter().cloned());
                        }
                        FieldValue { points: set.into_iter().collect(), convex: false, normal: None }
                    })
                    .collect()
            }
            FieldSpec::Clarke => strat
                .strata()
                .iter()
                .map(|s| FieldValue { points: strat.stratum_clarke(s.id).vertices().to_vec(), convex: true, normal: None })
                .collect(),
            FieldSpec::ClarkePlusNormal { radius } => strat
                .strata()
                .iter()
                .map(|s| {
                    let nv = strat.normal_value(s.id, radius.clone())?;
                    Ok(FieldValue {
                        points: strat.stratum_clarke(s.id).vertices().to_vec(),
                        convex: true,
                        normal: (!nv.is_trivial()).then_some(nv),
                    })
                })
                .collect::<Result<_, PolyError>>()?,
            FieldSpec::Custom { per_stratum, fallback } => {
                if let Some(&id) = per_stratum.keys().find(|&&id| id >= strat.len()) {
                    return Err(FieldError::UnknownStratum(id));
                }
                if let Some(v) = per_stratum.values().flatten().chain(fallback).find(|v| v.len() != n) {
                    return Err(FieldError::DimensionMismatch { expected: n, found: v.len() });
                }
                (0..strat.len())
                    .map(|id| FieldValue {
                        points: per_stratum.get(&id).unwrap_or(fallback).clone(),
                        convex: false,
                        normal: None,
                    })
                    .collect()
            }
        };
        Ok(Self { kind: spec.kind(), values })
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }

    pub fn value(&self, stratum: usize) -> &FieldValue {
        &self.values[stratum]
    }

    pub fn values(&self) -> &[FieldValue] {
        &self.values
    }

    /// Largest squared norm among the finite points of `stratum`.
    pub fn max_point_norm_sq(&self, stratum: usize) -> Rational {
        self.values[stratum].points.iter().map(|p| rational::norm_sq(p)).max().unwrap_or_else(Rational::zero)
    }
}
