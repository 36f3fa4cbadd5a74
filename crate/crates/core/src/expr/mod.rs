//! Piecewise-affine scalar functions on R^n.
//!
//! An [`Expr`] is an arena of nodes in topological order: every child id is
//! smaller than its parent's id, so a single forward pass evaluates the DAG.
//! The nonsmooth primitives (`max`, `min`, `abs`, `relu`) are the *kink nodes*;
//! the sign of each kink's argument selects the affine branch that is active.

mod parse;

use std::fmt;

use num_traits::{Signed, Zero};

use crate::rational::{self, QVec, Rational};

pub use parse::{parse, parse_with_dim, ParseError, ParseErrorKind};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Const(Rational),
    Var(usize),
    Add,
    Sub,
    Neg,
    Scale(Rational),
    Max,
    Min,
    Abs,
    Relu,
}

impl NodeKind {
    pub fn arity(&self) -> usize {
        match self {
            NodeKind::Const(_) | NodeKind::Var(_) => 0,
            NodeKind::Neg | NodeKind::Scale(_) | NodeKind::Abs | NodeKind::Relu => 1,
            NodeKind::Add | NodeKind::Sub | NodeKind::Max | NodeKind::Min => 2,
        }
    }

    pub fn kink_kind(&self) -> Option<KinkKind> {
        match self {
            NodeKind::Max => Some(KinkKind::Max),
            NodeKind::Min => Some(KinkKind::Min),
            NodeKind::Abs => Some(KinkKind::Abs),
            NodeKind::Relu => Some(KinkKind::Relu),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    pub children: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KinkKind {
    Max,
    Min,
    Abs,
    Relu,
}

impl fmt::Display for KinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KinkKind::Max => "max",
            KinkKind::Min => "min",
            KinkKind::Abs => "abs",
            KinkKind::Relu => "relu",
        })
    }
}

/// A nonsmooth node. `args` are its children; the scalar whose sign picks the
/// branch is the child itself for `abs`/`relu` and `left - right` for `max`/`min`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KinkNode {
    /// Position in [`Expr::kink_nodes`].
    pub index: usize,
    pub node: NodeId,
    pub kind: KinkKind,
    pub args: Vec<NodeId>,
}

/// Sign of a kink argument. Ordered `Neg < Zero < Pos`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Neg,
    Zero,
    Pos,
}

impl Sign {
    pub fn of(q: &Rational) -> Sign {
        if q.is_positive() {
            Sign::Pos
        } else if q.is_negative() {
            Sign::Neg
        } else {
            Sign::Zero
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Neg => '-',
            Sign::Zero => '0',
            Sign::Pos => '+',
        }
    }

    pub fn from_symbol(c: char) -> Option<Sign> {
        match c {
            '-' => Some(Sign::Neg),
            '0' => Some(Sign::Zero),
            '+' => Some(Sign::Pos),
            _ => None,
        }
    }

    /// `true` if a point with this sign can be a limit of points with sign `other`.
    pub fn in_closure_of(self, other: Sign) -> bool {
        self == other || self == Sign::Zero
    }
}

pub fn pattern_string(pattern: &[Sign]) -> String {
    pattern.iter().map(|s| s.symbol()).collect()
}

pub fn parse_pattern(text: &str) -> Option<Vec<Sign>> {
    text.chars().map(Sign::from_symbol).collect()
}

/// `x ↦ ⟨grad, x⟩ + offset`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Affine {
    pub grad: QVec,
    pub offset: Rational,
}

impl Affine {
    pub fn constant(n: usize, c: Rational) -> Self {
        Self { grad: rational::zeros(n), offset: c }
    }

    pub fn variable(n: usize, i: usize) -> Self {
        Self { grad: rational::unit(n, i), offset: Rational::zero() }
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        rational::dot(&self.grad, x) + &self.offset
    }

    pub fn is_constant(&self) -> bool {
        rational::is_zero_vec(&self.grad)
    }

    pub fn add(&self, o: &Affine) -> Affine {
        Affine { grad: rational::add(&self.grad, &o.grad), offset: &self.offset + &o.offset }
    }

    pub fn sub(&self, o: &Affine) -> Affine {
        Affine { grad: rational::sub(&self.grad, &o.grad), offset: &self.offset - &o.offset }
    }

    pub fn neg(&self) -> Affine {
        Affine { grad: self.grad.iter().map(|g| -g).collect(), offset: -&self.offset }
    }

    pub fn scale(&self, c: &Rational) -> Affine {
        Affine { grad: rational::scale(c, &self.grad), offset: c * &self.offset }
    }
}

impl fmt::Display for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        for (i, g) in self.grad.iter().enumerate() {
            if g.is_zero() {
                continue;
            }
            if wrote {
                write!(f, " + ")?;
            }
            write!(f, "{g}*x{i}")?;
            wrote = true;
        }
        if !wrote || !self.offset.is_zero() {
            if wrote {
                write!(f, " + ")?;
            }
            write!(f, "{}", self.offset)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    #[error("point has dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("pattern has {found} signs, expression has {expected} kink nodes")]
    PatternLength { expected: usize, found: usize },
    #[error("invalid expression graph: {0}")]
    InvalidGraph(String),
}

/// A point of R^n with exact coordinates. `approximate` records that the
/// coordinates were converted from floating point input.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Point {
    pub coords: QVec,
    pub approximate: bool,
}

impl Point {
    pub fn new(coords: QVec) -> Self {
        Self { coords, approximate: false }
    }

    pub fn from_ints(xs: &[i64]) -> Self {
        Self::new(xs.iter().map(|&x| rational::int(x)).collect())
    }

    pub fn from_f64(xs: &[f64]) -> Option<Self> {
        let coords = xs.iter().map(|&x| rational::from_f64(x)).collect::<Option<QVec>>()?;
        Some(Self { coords, approximate: true })
    }

    /// Comma-separated exact coordinates, e.g. `1,-1/2`.
    pub fn parse(text: &str) -> Result<Self, rational::RationalParseError> {
        rational::parse_vector(text).map(Self::new)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl From<QVec> for Point {
    fn from(coords: QVec) -> Self {
        Point::new(coords)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&rational::format_vec(&self.coords))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    dim: usize,
    nodes: Vec<Node>,
    root: NodeId,
    kinks: Vec<KinkNode>,
    kink_of_node: Vec<Option<usize>>,
}

impl Expr {
    /// Validates and indexes an arena. Children must precede parents.
    pub fn from_nodes(dim: usize, nodes: Vec<Node>, root: NodeId) -> Result<Self, ExprError> {
        if root >= nodes.len() {
            return Err(ExprError::InvalidGraph("root out of range".into()));
        }
        let mut kinks = Vec::new();
        let mut kink_of_node = vec![None; nodes.len()];
        for (id, node) in nodes.iter().enumerate() {
            if node.children.len() != node.kind.arity() {
                return Err(ExprError::InvalidGraph(format!("node {id} has wrong arity")));
            }
            if node.children.iter().any(|&c| c >= id) {
                return Err(ExprError::InvalidGraph(format!("node {id} is not topologically ordered")));
            }
            if let NodeKind::Var(i) = node.kind {
                if i >= dim {
                    return Err(ExprError::InvalidGraph(format!("variable x{i} with dimension {dim}")));
                }
            }
            if let Some(kind) = node.kind.kink_kind() {
                kink_of_node[id] = Some(kinks.len());
                kinks.push(KinkNode { index: kinks.len(), node: id, kind, args: node.children.clone() });
            }
        }
        Ok(Self { dim, nodes, root, kinks, kink_of_node })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// All max/min/abs/relu nodes in topological order (inner before outer).
    pub fn kink_nodes(&self) -> &[KinkNode] {
        &self.kinks
    }

    pub fn kink_index(&self, node: NodeId) -> Option<usize> {
        self.kink_of_node.get(node).copied().flatten()
    }

    pub fn is_affine(&self) -> bool {
        self.kinks.is_empty()
    }

    fn check_dim(&self, x: &Point) -> Result<(), ExprError> {
        if x.dim() != self.dim {
            return Err(ExprError::DimensionMismatch { expected: self.dim, found: x.dim() });
        }
        Ok(())
    }

    /// Exact value of every node at `x`.
    pub fn node_values(&self, x: &Point) -> Result<Vec<Rational>, ExprError> {
        self.check_dim(x)?;
        let mut vals: Vec<Rational> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let c = |k: usize| &vals[node.children[k]];
            let v = match &node.kind {
                NodeKind::Const(q) => q.clone(),
                NodeKind::Var(i) => x.coords[*i].clone(),
                NodeKind::Add => c(0) + c(1),
                NodeKind::Sub => c(0) - c(1),
                NodeKind::Neg => -c(0),
                NodeKind::Scale(q) => q * c(0),
                NodeKind::Max => c(0).max(c(1)).clone(),
                NodeKind::Min => c(0).min(c(1)).clone(),
                NodeKind::Abs => c(0).abs(),
                NodeKind::Relu => {
                    if c(0).is_positive() {
                        c(0).clone()
                    } else {
                        Rational::zero()
                    }
                }
            };
            vals.push(v);
        }
        Ok(vals)
    }

    pub fn eval(&self, x: &Point) -> Result<Rational, ExprError> {
        Ok(self.node_values(x)?.swap_remove(self.root))
    }

    /// Value of the kink argument of `kink` given all node values.
    pub fn kink_argument(&self, kink: &KinkNode, vals: &[Rational]) -> Rational {
        match kink.kind {
            KinkKind::Abs | KinkKind::Relu => vals[kink.args[0]].clone(),
            KinkKind::Max | KinkKind::Min => &vals[kink.args[0]] - &vals[kink.args[1]],
        }
    }

    /// Activation pattern at `x`: the exact sign of every kink argument.
    pub fn sign_vector(&self, x: &Point) -> Result<Vec<Sign>, ExprError> {
        let vals = self.node_values(x)?;
        Ok(self.kinks.iter().map(|k| Sign::of(&self.kink_argument(k, &vals))).collect())
    }

    /// Affine forms of the nodes under a (possibly partial) pattern. Nodes that
    /// depend on kinks beyond the pattern's length are left as `None`.
    pub fn node_forms(&self, pattern: &[Sign]) -> Vec<Option<Affine>> {
        let n = self.dim;
        let mut forms: Vec<Option<Affine>> = Vec::with_capacity(self.nodes.len());
        for (id, node) in self.nodes.iter().enumerate() {
            let ch: Vec<Option<&Affine>> = node.children.iter().map(|&c| forms[c].as_ref()).collect();
            if ch.iter().any(Option::is_none) {
                forms.push(None);
                continue;
            }
            let c = |k: usize| ch[k].unwrap();
            let form = match &node.kind {
                NodeKind::Const(q) => Some(Affine::constant(n, q.clone())),
                NodeKind::Var(i) => Some(Affine::variable(n, *i)),
                NodeKind::Add => Some(c(0).add(c(1))),
                NodeKind::Sub => Some(c(0).sub(c(1))),
                NodeKind::Neg => Some(c(0).neg()),
                NodeKind::Scale(q) => Some(c(0).scale(q)),
                _ => {
                    let k = self.kink_of_node[id].expect("kink node indexed");
                    pattern.get(k).map(|&s| branch_form(&node.kind, s, c(0), ch.get(1).copied().flatten()))
                }
            };
            forms.push(form);
        }
        forms
    }

    /// Affine form of the argument of kink `k` under a pattern covering at least
    /// the kinks nested inside it.
    pub fn kink_argument_form(&self, forms: &[Option<Affine>], k: usize) -> Option<Affine> {
        let kink = &self.kinks[k];
        match kink.kind {
            KinkKind::Abs | KinkKind::Relu => forms[kink.args[0]].clone(),
            KinkKind::Max | KinkKind::Min => {
                Some(forms[kink.args[0]].as_ref()?.sub(forms[kink.args[1]].as_ref()?))
            }
        }
    }

    /// The affine function equal to `self` on the region selected by `pattern`.
    pub fn affine_restriction(&self, pattern: &[Sign]) -> Result<Affine, ExprError> {
        if pattern.len() != self.kinks.len() {
            return Err(ExprError::PatternLength { expected: self.kinks.len(), found: pattern.len() });
        }
        Ok(self.node_forms(pattern)[self.root].clone().expect("complete pattern"))
    }

    /// Textual form including the `dim` header; parses back to an equivalent expression.
    pub fn to_source(&self) -> String {
        format!("dim {};\n{}\n", self.dim, self)
    }

    fn write_node(&self, id: NodeId, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let node = &self.nodes[id];
        let ch = &node.children;
        match &node.kind {
            NodeKind::Const(q) if q.is_negative() => write!(f, "({q})"),
            NodeKind::Const(q) => write!(f, "{q}"),
            NodeKind::Var(i) => write!(f, "x{i}"),
            NodeKind::Add | NodeKind::Sub => {
                let op = if node.kind == NodeKind::Add { '+' } else { '-' };
                write!(f, "(")?;
                self.write_node(ch[0], f)?;
                write!(f, " {op} ")?;
                self.write_node(ch[1], f)?;
                write!(f, ")")
            }
            NodeKind::Neg => {
                write!(f, "-(")?;
                self.write_node(ch[0], f)?;
                write!(f, ")")
            }
            NodeKind::Scale(q) => {
                write!(f, "{q}*(")?;
                self.write_node(ch[0], f)?;
                write!(f, ")")
            }
            kind => {
                write!(f, "{}(", kind.kink_kind().unwrap())?;
                self.write_node(ch[0], f)?;
                if let Some(&b) = ch.get(1) {
                    write!(f, ", ")?;
                    self.write_node(b, f)?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Branch of a kink primitive that is active when its argument has sign `s`.
/// On the zero set both branches agree, so the left/identity branch is used.
fn branch_form(kind: &NodeKind, s: Sign, a: &Affine, b: Option<&Affine>) -> Affine {
    match kind {
        NodeKind::Relu => match s {
            Sign::Neg => Affine::constant(a.grad.len(), Rational::zero()),
            _ => a.clone(),
        },
        NodeKind::Abs => match s {
            Sign::Neg => a.neg(),
            _ => a.clone(),
        },
        NodeKind::Max => match s {
            Sign::Neg => b.unwrap().clone(),
            _ => a.clone(),
        },
        NodeKind::Min => match s {
            Sign::Pos => b.unwrap().clone(),
            _ => a.clone(),
        },
        _ => unreachable!("not a kink primitive"),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_node(self.root, f)
    }
}

/// Incremental arena construction for programmatic expressions.
#[derive(Debug, Default)]
pub struct ExprBuilder {
    nodes: Vec<Node>,
}

impl ExprBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, kind: NodeKind, children: Vec<NodeId>) -> NodeId {
        self.nodes.push(Node { kind, children });
        self.nodes.len() - 1
    }

    pub fn constant(&mut self, q: Rational) -> NodeId {
        self.push(NodeKind::Const(q), vec![])
    }

    pub fn var(&mut self, i: usize) -> NodeId {
        self.push(NodeKind::Var(i), vec![])
    }

    pub fn unary(&mut self, kind: NodeKind, a: NodeId) -> NodeId {
        self.push(kind, vec![a])
    }

    pub fn binary(&mut self, kind: NodeKind, a: NodeId, b: NodeId) -> NodeId {
        self.push(kind, vec![a, b])
    }

    pub fn finish(self, dim: usize, root: NodeId) -> Result<Expr, ExprError> {
        Expr::from_nodes(dim, self.nodes, root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn paper_f() -> Expr {
        parse_with_dim("relu(-x0) + x0 - relu(x0)", 1).unwrap()
    }

    fn q(p: i64) -> Point {
        Point::from_ints(&[p])
    }

    #[test]
    fn paper_f_is_identically_zero() {
        let f = paper_f();
        for x in [Point::new(vec![int(0)]), Point::new(vec![ratio(7, 2)]), q(-2)] {
            assert_eq!(f.eval(&x).unwrap(), int(0));
        }
    }

    #[test]
    fn paper_f_has_two_relu_kinks() {
        let f = paper_f();
        let kinks = f.kink_nodes();
        assert_eq!(kinks.len(), 2);
        assert!(kinks.iter().all(|k| k.kind == KinkKind::Relu));
        assert!(kinks[0].node < kinks[1].node);
    }

    #[test]
    fn abs_value() {
        let f = parse_with_dim("abs(x0)", 1).unwrap();
        assert_eq!(f.eval(&q(-7)).unwrap(), int(7));
    }

    #[test]
    fn nested_abs_kink_order() {
        let f = parse_with_dim("abs(abs(x0) - 1)", 1).unwrap();
        let kinks = f.kink_nodes();
        assert_eq!(kinks.len(), 2);
        // The inner abs is an argument (through the subtraction) of the outer one.
        let inner = kinks[0].node;
        let outer_arg = kinks[1].args[0];
        assert!(f.nodes()[outer_arg].children.contains(&inner));
    }

    #[test]
    fn affine_has_no_kinks() {
        let f = parse_with_dim("2*x0 - 3*x1 + 1/2", 2).unwrap();
        assert!(f.kink_nodes().is_empty());
        assert!(f.is_affine());
    }

    #[test]
    fn affine_restrictions() {
        use Sign::*;
        // Region s > 0 of paperf: inner relu(-s) inactive, outer relu(s) active.
        let f = paper_f();
        let a = f.affine_restriction(&[Neg, Pos]).unwrap();
        assert_eq!(a, Affine::constant(1, int(0)));

        let g = parse_with_dim("abs(x0)", 1).unwrap();
        let a = g.affine_restriction(&[Neg]).unwrap();
        assert_eq!(a.grad, vec![int(-1)]);
        assert_eq!(a.offset, int(0));

        let h = parse_with_dim("max(x0, x1)", 2).unwrap();
        let a = h.affine_restriction(&[Pos]).unwrap();
        assert_eq!(a.grad, vec![int(1), int(0)]);
        assert_eq!(a.offset, int(0));

        assert!(matches!(h.affine_restriction(&[]), Err(ExprError::PatternLength { .. })));
    }

    #[test]
    fn max_min_cross_value() {
        let f = parse_with_dim("max(x0, min(x1, -x0))", 2).unwrap();
        assert_eq!(f.kink_nodes().len(), 2);
        assert_eq!(f.eval(&Point::from_ints(&[1, 2])).unwrap(), int(1));
    }

    #[test]
    fn dimension_mismatch() {
        let f = paper_f();
        assert_eq!(
            f.eval(&Point::from_ints(&[1, 2])),
            Err(ExprError::DimensionMismatch { expected: 1, found: 2 })
        );
    }

    #[test]
    fn builder_rejects_bad_graphs() {
        let mut b = ExprBuilder::new();
        let x = b.var(3);
        assert!(b.finish(2, x).is_err());
        let bad = vec![Node { kind: NodeKind::Neg, children: vec![0] }];
        assert!(Expr::from_nodes(1, bad, 0).is_err());
    }
}
