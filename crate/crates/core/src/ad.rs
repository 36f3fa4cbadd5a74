//! Forward- and reverse-mode differentiation under a selection policy.
//!
//! At an exact tie (a kink argument equal to zero) each primitive contributes
//! the derivative chosen by the policy, applied locally in the chain rule. This
//! is how automatic differentiation tools treat compositions, and it is why the
//! composite output can fall outside the Clarke subdifferential.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::expr::{Expr, ExprError, KinkKind, NodeId, NodeKind, Point, Sign};
use crate::rational::{self, axpy, parse_rational, QVec, Rational};

/// Which derivative a `max`/`min` node passes through at a tie.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TieRule {
    Left,
    Right,
    /// Weight on the left argument's derivative; `1 - w` goes to the right.
    Blend(Rational),
}

impl TieRule {
    pub fn left_weight(&self) -> Rational {
        match self {
            TieRule::Left => Rational::one(),
            TieRule::Right => Rational::zero(),
            TieRule::Blend(w) => w.clone(),
        }
    }

    fn parse(text: &str) -> Result<TieRule, PolicyError> {
        match text.trim() {
            "left" => Ok(TieRule::Left),
            "right" => Ok(TieRule::Right),
            other => parse_rational(other)
                .map(TieRule::Blend)
                .map_err(|_| PolicyError::Invalid(format!("tie rule `{other}`"))),
        }
    }
}

impl fmt::Display for TieRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TieRule::Left => f.write_str("left"),
            TieRule::Right => f.write_str("right"),
            TieRule::Blend(w) => write!(f, "{w}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("{what} = {value} lies outside [{lo}, {hi}]")]
    OutOfRange { what: String, value: String, lo: String, hi: String },
    #[error("override for node {0}, which is not a kink node")]
    NotAKink(NodeId),
    #[error("invalid policy: {0}")]
    Invalid(String),
}

/// Rule choosing one derivative value at every nondifferentiable point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SelectionPolicy {
    /// `relu'(0)`, in `[0, 1]`.
    pub relu_at_zero: Rational,
    /// `abs'(0)`, in `[-1, 1]`.
    pub abs_at_zero: Rational,
    pub max_at_tie: TieRule,
    pub min_at_tie: TieRule,
    /// Per-node choice. For `relu`/`abs` nodes this is the derivative value at
    /// zero; for `max`/`min` nodes it is the weight on the left argument.
    pub overrides: BTreeMap<NodeId, Rational>,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        Self {
            relu_at_zero: Rational::zero(),
            abs_at_zero: Rational::zero(),
            max_at_tie: TieRule::Left,
            min_at_tie: TieRule::Left,
            overrides: BTreeMap::new(),
        }
    }
}

/// The effective choice at one kink node after applying overrides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResolvedChoice {
    pub node: NodeId,
    pub kind: String,
    /// Derivative at zero (`relu`, `abs`) or left weight (`max`, `min`), as `p/q`.
    pub value: String,
}

impl SelectionPolicy {
    pub fn with_relu(relu_at_zero: Rational) -> Self {
        Self { relu_at_zero, ..Self::default() }
    }

    /// A small family spanning the extreme choices of every primitive.
    pub fn standard_family() -> Vec<SelectionPolicy> {
        let half = rational::ratio(1, 2);
        vec![
            SelectionPolicy::default(),
            SelectionPolicy {
                relu_at_zero: Rational::one(),
                abs_at_zero: Rational::one(),
                max_at_tie: TieRule::Right,
                min_at_tie: TieRule::Right,
                overrides: BTreeMap::new(),
            },
            SelectionPolicy {
                relu_at_zero: half.clone(),
                abs_at_zero: -Rational::one(),
                max_at_tie: TieRule::Blend(half.clone()),
                min_at_tie: TieRule::Blend(half),
                overrides: BTreeMap::new(),
            },
        ]
    }

    fn check_range(what: &str, v: &Rational, lo: Rational, hi: Rational) -> Result<(), PolicyError> {
        if *v < lo || *v > hi {
            return Err(PolicyError::OutOfRange { what: what.into(), value: v.to_string(), lo: lo.to_string(), hi: hi.to_string() });
        }
        Ok(())
    }

    /// Every choice must lie in the convex hull of its primitive's one-sided derivatives.
    pub fn validate(&self) -> Result<(), PolicyError> {
        let one = Rational::one;
        Self::check_range("relu_at_zero", &self.relu_at_zero, Rational::zero(), one())?;
        Self::check_range("abs_at_zero", &self.abs_at_zero, -one(), one())?;
        Self::check_range("max_at_tie", &self.max_at_tie.left_weight(), Rational::zero(), one())?;
        Self::check_range("min_at_tie", &self.min_at_tie.left_weight(), Rational::zero(), one())?;
        Ok(())
    }

    /// Validates overrides against `e` and returns the per-node choices.
    pub fn resolve(&self, e: &Expr) -> Result<Vec<ResolvedChoice>, PolicyError> {
        self.validate()?;
        for (&node, v) in &self.overrides {
            let kink = e.kink_index(node).ok_or(PolicyError::NotAKink(node))?;
            let kind = e.kink_nodes()[kink].kind;
            let lo = if kind == KinkKind::Abs { -Rational::one() } else { Rational::zero() };
            Self::check_range(&format!("override[{node}]"), v, lo, Rational::one())?;
        }
        Ok(e.kink_nodes()
            .iter()
            .map(|k| ResolvedChoice { node: k.node, kind: k.kind.to_string(), value: self.choice(k.node, k.kind).to_string() })
            .collect())
    }

    fn choice(&self, node: NodeId, kind: KinkKind) -> Rational {
        if let Some(v) = self.overrides.get(&node) {
            return v.clone();
        }
        match kind {
            KinkKind::Relu => self.relu_at_zero.clone(),
            KinkKind::Abs => self.abs_at_zero.clone(),
            KinkKind::Max => self.max_at_tie.left_weight(),
            KinkKind::Min => self.min_at_tie.left_weight(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let raw: PolicyFile = serde_json::from_str(text).map_err(|e| PolicyError::Invalid(e.to_string()))?;
        let scalar = |v: Option<serde_json::Value>, default: Rational| -> Result<Rational, PolicyError> {
            match v {
                None => Ok(default),
                Some(v) => parse_rational(&json_scalar(&v)?).map_err(|e| PolicyError::Invalid(e.to_string())),
            }
        };
        let tie = |v: Option<serde_json::Value>| -> Result<TieRule, PolicyError> {
            match v {
                None => Ok(TieRule::Left),
                Some(v) => TieRule::parse(&json_scalar(&v)?),
            }
        };
        let mut overrides = BTreeMap::new();
        for (k, v) in raw.overrides.unwrap_or_default() {
            let node: NodeId = k.trim().parse().map_err(|_| PolicyError::Invalid(format!("override key `{k}`")))?;
            let text = json_scalar(&v)?;
            let value = match text.as_str() {
                "left" => Rational::one(),
                "right" => Rational::zero(),
                t => parse_rational(t).map_err(|e| PolicyError::Invalid(e.to_string()))?,
            };
            overrides.insert(node, value);
        }
        let p = SelectionPolicy {
            relu_at_zero: scalar(raw.relu_at_zero, Rational::zero())?,
            abs_at_zero: scalar(raw.abs_at_zero, Rational::zero())?,
            max_at_tie: tie(raw.max_at_tie)?,
            min_at_tie: tie(raw.min_at_tie)?,
            overrides,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let overrides: serde_json::Map<String, serde_json::Value> =
            self.overrides.iter().map(|(k, v)| (k.to_string(), v.to_string().into())).collect();
        serde_json::json!({
            "relu_at_zero": self.relu_at_zero.to_string(),
            "abs_at_zero": self.abs_at_zero.to_string(),
            "max_at_tie": self.max_at_tie.to_string(),
            "min_at_tie": self.min_at_tie.to_string(),
            "overrides": overrides,
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyFile {
    relu_at_zero: Option<serde_json::Value>,
    abs_at_zero: Option<serde_json::Value>,
    max_at_tie: Option<serde_json::Value>,
    min_at_tie: Option<serde_json::Value>,
    overrides: Option<BTreeMap<String, serde_json::Value>>,
}

/// JSON numbers keep their literal text so `0.1` stays exactly 1/10.
fn json_scalar(v: &serde_json::Value) -> Result<String, PolicyError> {
    match v {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        other => Err(PolicyError::Invalid(format!("expected number or string, found {other}"))),
    }
}

/// One AD output `g(x)` together with the data that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradSample {
    pub point: Point,
    pub value: Rational,
    pub gradient: QVec,
    pub pattern: Vec<Sign>,
    pub choices: Vec<ResolvedChoice>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Local partial derivatives of node `node` w.r.t. each child, under `policy`.
fn local_partials(
    e: &Expr,
    policy: &SelectionPolicy,
    id: NodeId,
    vals: &[Rational],
) -> Vec<Rational> {
    let node = &e.nodes()[id];
    let one = Rational::one;
    let zero = Rational::zero;
    let ch = |k: usize| &vals[node.children[k]];
    match &node.kind {
        NodeKind::Const(_) | NodeKind::Var(_) => vec![],
        NodeKind::Add => vec![one(), one()],
        NodeKind::Sub => vec![one(), -one()],
        NodeKind::Neg => vec![-one()],
        NodeKind::Scale(q) => vec![q.clone()],
        NodeKind::Relu => vec![match Sign::of(ch(0)) {
            Sign::Pos => one(),
            Sign::Neg => zero(),
            Sign::Zero => policy.choice(id, KinkKind::Relu),
        }],
        NodeKind::Abs => vec![match Sign::of(ch(0)) {
            Sign::Pos => one(),
            Sign::Neg => -one(),
            Sign::Zero => policy.choice(id, KinkKind::Abs),
        }],
        NodeKind::Max | NodeKind::Min => {
            let kind = node.kind.kink_kind().unwrap();
            let diff = ch(0) - ch(1);
            let left_wins = if kind == KinkKind::Max { diff.is_positive() } else { diff.is_negative() };
            if diff.is_zero() {
                let w = policy.choice(id, kind);
                let rest = one() - &w;
                vec![w, rest]
            } else if left_wins {
                vec![one(), zero()]
            } else {
                vec![zero(), one()]
            }
        }
    }
}

fn sample(e: &Expr, x: &Point, p: &SelectionPolicy, vals: &[Rational], gradient: QVec) -> Result<GradSample, AdError> {
    let choices = p.resolve(e)?;
    let pattern = e.kink_nodes().iter().map(|k| Sign::of(&e.kink_argument(k, vals))).collect();
    Ok(GradSample { point: x.clone(), value: vals[e.root()].clone(), gradient, pattern, choices })
}

/// Vector forward mode: propagates the full n-dimensional tangent through the DAG.
pub fn grad_forward(e: &Expr, x: &Point, p: &SelectionPolicy) -> Result<GradSample, AdError> {
    let vals = e.node_values(x)?;
    let n = e.dim();
    let mut tangents: Vec<QVec> = Vec::with_capacity(e.nodes().len());
    for (id, node) in e.nodes().iter().enumerate() {
        let t = match node.kind {
            NodeKind::Var(i) => rational::unit(n, i),
            _ => {
                let partials = local_partials(e, p, id, &vals);
                let mut t = rational::zeros(n);
                for (w, &c) in partials.iter().zip(&node.children) {
                    axpy(&mut t, w, &tangents[c]);
                }
                t
            }
        };
        tangents.push(t);
    }
    let g = tangents.swap_remove(e.root());
    sample(e, x, p, &vals, g)
}

/// Reverse mode: one forward value sweep, then adjoints accumulated root to leaves.
pub fn grad_reverse(e: &Expr, x: &Point, p: &SelectionPolicy) -> Result<GradSample, AdError> {
    let vals = e.node_values(x)?;
    let nodes = e.nodes();
    let mut adjoint = vec![Rational::zero(); nodes.len()];
    adjoint[e.root()] = Rational::one();
    let mut g = rational::zeros(e.dim());
    for id in (0..=e.root()).rev() {
        if adjoint[id].is_zero() {
            continue;
        }
        let a = adjoint[id].clone();
        if let NodeKind::Var(i) = nodes[id].kind {
            g[i] += &a;
            continue;
        }
        for (w, &c) in local_partials(e, p, id, &vals).iter().zip(&nodes[id].children) {
            adjoint[c] += w * &a;
        }
    }
    sample(e, x, p, &vals, g)
}

/// `{ grad_forward(e, x, p) : p in policies }`.
pub fn field_of_policy_family(
    e: &Expr,
    x: &Point,
    policies: &[SelectionPolicy],
) -> Result<BTreeSet<QVec>, AdError> {
    policies.iter().map(|p| grad_forward(e, x, p).map(|s| s.gradient)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_with_dim;
    use crate::rational::{int, ratio};

    fn paper_f() -> Expr {
        parse_with_dim("relu(-x0) + x0 - relu(x0)", 1).unwrap()
    }

    #[test]
    fn anomaly_at_zero() {
        let f = paper_f();
        let p = SelectionPolicy::default();
        let at0 = Point::from_ints(&[0]);
        assert_eq!(grad_forward(&f, &at0, &p).unwrap().gradient, vec![int(1)]);
        assert_eq!(grad_reverse(&f, &at0, &p).unwrap().gradient, vec![int(1)]);
        assert_eq!(grad_forward(&f, &Point::from_ints(&[2]), &p).unwrap().gradient, vec![int(0)]);
    }

    #[test]
    fn policy_family_at_zero() {
        let f = paper_f();
        let family = [SelectionPolicy::with_relu(int(0)), SelectionPolicy::with_relu(int(1))];
        let got = field_of_policy_family(&f, &Point::from_ints(&[0]), &family).unwrap();
        assert_eq!(got, BTreeSet::from([vec![int(1)], vec![int(-1)]]));
        let got = field_of_policy_family(&f, &Point::from_ints(&[1]), &family).unwrap();
        assert_eq!(got, BTreeSet::from([vec![int(0)]]));
    }

    #[test]
    fn abs_passthrough() {
        let f = parse_with_dim("abs(x0)", 1).unwrap();
        let p = SelectionPolicy { abs_at_zero: ratio(1, 3), ..Default::default() };
        assert_eq!(grad_forward(&f, &Point::from_ints(&[0]), &p).unwrap().gradient, vec![ratio(1, 3)]);
        let family: Vec<_> = [-1, 0, 1]
            .iter()
            .map(|&a| SelectionPolicy { abs_at_zero: int(a), ..Default::default() })
            .collect();
        let got = field_of_policy_family(&f, &Point::from_ints(&[0]), &family).unwrap();
        assert_eq!(got.len(), 3);
    }

    #[test]
    fn max_tie_rules() {
        let f = parse_with_dim("max(x0, x1)", 2).unwrap();
        let at = Point::from_ints(&[1, 1]);
        let left = SelectionPolicy::default();
        assert_eq!(grad_reverse(&f, &at, &left).unwrap().gradient, vec![int(1), int(0)]);
        let blend = SelectionPolicy { max_at_tie: TieRule::Blend(ratio(1, 4)), ..Default::default() };
        assert_eq!(grad_forward(&f, &at, &blend).unwrap().gradient, vec![ratio(1, 4), ratio(3, 4)]);
    }

    #[test]
    fn affine_gradient() {
        let f = parse_with_dim("3*x0 - 1/2*x1 + 7", 2).unwrap();
        let g = grad_reverse(&f, &Point::from_ints(&[4, -9]), &SelectionPolicy::default()).unwrap();
        assert_eq!(g.gradient, vec![int(3), ratio(-1, 2)]);
    }

    #[test]
    fn overrides_apply_per_node() {
        let f = paper_f();
        let outer = f.kink_nodes()[1].node;
        let mut p = SelectionPolicy::default();
        p.overrides.insert(outer, int(1));
        // inner relu'(0) = 0, outer relu'(0) = 1: 0*(-1) + 1 - 1 = 0
        assert_eq!(grad_forward(&f, &Point::from_ints(&[0]), &p).unwrap().gradient, vec![int(0)]);
        let choices = p.resolve(&f).unwrap();
        assert_eq!(choices[1].value, "1");
        assert_eq!(choices[0].value, "0");

        let mut bad = SelectionPolicy::default();
        bad.overrides.insert(0, int(1));
        assert!(matches!(bad.resolve(&f), Err(PolicyError::NotAKink(0))));
    }

    #[test]
    fn invalid_choices_rejected() {
        assert!(SelectionPolicy::with_relu(int(2)).validate().is_err());
        let p = SelectionPolicy { abs_at_zero: int(-2), ..Default::default() };
        assert!(p.validate().is_err());
        let p = SelectionPolicy { min_at_tie: TieRule::Blend(ratio(3, 2)), ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn policy_json_round_trip() {
        let text = r#"{"relu_at_zero": 0.5, "abs_at_zero": "-1/3", "max_at_tie": "right",
                       "min_at_tie": "1/4", "overrides": {"3": "left"}}"#;
        let p = SelectionPolicy::from_json(text).unwrap();
        assert_eq!(p.relu_at_zero, ratio(1, 2));
        assert_eq!(p.abs_at_zero, ratio(-1, 3));
        assert_eq!(p.max_at_tie, TieRule::Right);
        assert_eq!(p.min_at_tie, TieRule::Blend(ratio(1, 4)));
        assert_eq!(p.overrides.get(&3), Some(&int(1)));
        let again = SelectionPolicy::from_json(&p.to_json().to_string()).unwrap();
        assert_eq!(again, p);
        assert!(SelectionPolicy::from_json(r#"{"relu_at_zero": 3}"#).is_err());
        assert!(SelectionPolicy::from_json(r#"{"bogus": 1}"#).is_err());
    }
}
