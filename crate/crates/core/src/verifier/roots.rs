//! Exact real-root isolation for univariate rational polynomials.

use num_traits::{One, Signed, Zero};

use crate::rational::Rational;

/// Dense polynomial, coefficients in increasing degree, no trailing zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly(Vec<Rational>);

impl Poly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self(coeffs)
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        self.0.iter().rev().fold(Rational::zero(), |acc, c| acc * t + c)
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * t + crate::rational::to_f64(c))
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(self.0.iter().enumerate().skip(1).map(|(i, c)| c * Rational::from_integer(i.into())).collect())
    }

    fn lead(&self) -> &Rational {
        self.0.last().expect("nonzero polynomial")
    }

    /// Quotient and remainder of `self / d`.
    pub fn div_rem(&self, d: &Poly) -> (Poly, Poly) {
        assert!(!d.is_zero(), "division by the zero polynomial");
        let mut rem = self.0.clone();
        let dd = d.degree();
        if self.is_zero() || self.degree() < dd {
            return (Poly::new(Vec::new()), self.clone());
        }
        let mut quot = vec![Rational::zero(); self.degree() - dd + 1];
        for k in (0..quot.len()).rev() {
            let c = &rem[k + dd] / d.lead();
            for (j, dj) in d.0.iter().enumerate() {
                rem[k + j] -= &c * dj;
            }
            quot[k] = c;
        }
        rem.truncate(dd);
        (Poly::new(quot), Poly::new(rem))
    }

    fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|c| -c).collect())
    }

    fn monic(&self) -> Poly {
        let l = self.lead().clone();
        Poly(self.0.iter().map(|c| c / &l).collect())
    }

    pub fn gcd(&self, other: &Poly) -> Poly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        if a.is_zero() {
            a
        } else {
            a.monic()
        }
    }

    /// Same roots, each simple.
    pub fn square_free(&self) -> Poly {
        let g = self.gcd(&self.derivative());
        if g.degree() == 0 {
            return self.clone();
        }
        self.div_rem(&g).0
    }
}

/// Sturm chain of a square-free polynomial.
struct Sturm(Vec<Poly>);

impl Sturm {
    fn new(p: &Poly) -> Self {
        let mut chain = vec![p.clone(), p.derivative()];
        while !chain.last().unwrap().is_zero() {
            let n = chain.len();
            let (_, r) = chain[n - 2].div_rem(&chain[n - 1]);
            chain.push(r.neg());
        }
        chain.pop();
        Sturm(chain)
    }

    fn variations(&self, t: &Rational) -> usize {
        let mut count = 0;
        let mut last = 0i8;
        for p in &self.0 {
            let v = p.eval(t);
            let s = if v.is_positive() {
                1
            } else if v.is_negative() {
                -1
            } else {
                continue;
            };
            if last != 0 && s != last {
                count += 1;
            }
            last = s;
        }
        count
    }

    /// Distinct roots in `(a, b]`, for `a` not a root.
    fn count(&self, a: &Rational, b: &Rational) -> usize {
        self.variations(a) - self.variations(b)
    }
}

/// An isolating bracket `[lo, hi]` holding exactly one root; `lo == hi` for exact roots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootBracket {
    pub lo: Rational,
    pub hi: Rational,
}

impl RootBracket {
    pub fn approx(&self) -> f64 {
        crate::rational::to_f64(&((&self.lo + &self.hi) / Rational::from_integer(2.into())))
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }
}

/// Real roots of `p` in `[0, 1]`, isolated and refined to width at most `2^-bits`.
/// Returns brackets in increasing order. `p` must be nonzero.
pub fn roots_in_unit_interval(p: &Poly, bits: u32) -> Vec<RootBracket> {
    assert!(!p.is_zero());
    if p.degree() == 0 {
        return Vec::new();
    }
    let q = p.square_free();
    let sturm = Sturm::new(&q);
    let tol = Rational::new(1.into(), num_bigint::BigInt::one() << bits);
    let mut out = Vec::new();
    let zero = Rational::zero();
    let one = Rational::one();
    if q.eval(&zero).is_zero() {
        out.push(RootBracket { lo: zero.clone(), hi: zero.clone() });
    }
    // Open interval (0, 1): nudge the ends off exact roots. The nudge is below the refinement width.
    let lo = if q.eval(&zero).is_zero() { tol.clone() / Rational::from_integer(4.into()) } else { zero };
    let mut hi = one.clone();
    let root_at_one = q.eval(&one).is_zero();
    if root_at_one {
        hi = &one - &tol / Rational::from_integer(4.into());
    }
    isolate(&q, &sturm, lo, hi, &tol, &mut out);
    if root_at_one {
        out.push(RootBracket { lo: one.clone(), hi: one });
    }
    out
}

fn isolate(q: &Poly, sturm: &Sturm, a: Rational, b: Rational, tol: &Rational, out: &mut Vec<RootBracket>) {
    let n = sturm.count(&a, &b);
    if n == 0 {
        return;
    }
    if n == 1 {
        out.push(refine(q, a, b, tol));
        return;
    }
    let two = Rational::from_integer(2.into());
    let mut mid = (&a + &b) / &two;
    let mut shift = (&b - &a) / Rational::from_integer(1024.into());
    while q.eval(&mid).is_zero() {
        // Keep the split point off a root; recorded through the half that contains it.
        mid += &shift;
        shift /= &two;
    }
    isolate(q, sturm, a, mid.clone(), tol, out);
    isolate(q, sturm, mid, b, tol, out);
}

/// Bisection on a sign change; `q` is square-free with one root in `(a, b]`.
fn refine(q: &Poly, mut a: Rational, mut b: Rational, tol: &Rational) -> RootBracket {
    let two = Rational::from_integer(2.into());
    if q.eval(&b).is_zero() {
        return RootBracket { lo: b.clone(), hi: b };
    }
    let sa = q.eval(&a).is_positive();
    if let Some(bracket) = float_bracket(q, &a, &b, sa, tol) {
        return bracket;
    }
    while &b - &a > *tol {
        let mid = (&a + &b) / &two;
        let v = q.eval(&mid);
        if v.is_zero() {
            return RootBracket { lo: mid.clone(), hi: mid };
        }
        if v.is_positive() == sa {
            a = mid;
        } else {
            b = mid;
        }
    }
    RootBracket { lo: a, hi: b }
}

/// Floating-point bisection, accepted only if the exact signs at a dyadic
/// bracket of width `tol` around the estimate still differ.
fn float_bracket(q: &Poly, a: &Rational, b: &Rational, sa: bool, tol: &Rational) -> Option<RootBracket> {
    let (mut lo, mut hi) = (crate::rational::to_f64(a), crate::rational::to_f64(b));
    let flo = q.eval_f64(lo);
    if flo == 0.0 || (flo > 0.0) != sa {
        return None;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (q.eval_f64(mid) > 0.0) == sa {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let half = tol / Rational::from_integer(2.into());
    let centre = crate::rational::from_f64(0.5 * (lo + hi))?;
    let (l, h) = (&centre - &half, &centre + &half);
    if l < *a || h > *b {
        return None;
    }
    let (vl, vh) = (q.eval(&l), q.eval(&h));
    (!vl.is_zero() && !vh.is_zero() && vl.is_positive() == sa && vh.is_positive() != sa)
        .then_some(RootBracket { lo: l, hi: h })
}
