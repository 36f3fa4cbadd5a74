//! Piecewise-cubic rational curves on `[0, 1]` and their kink analysis.

use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::Serialize;

use super::roots::{roots_in_unit_interval, Poly, RootBracket};
use crate::expr::{Affine, Point};
use crate::polyhedral::Stratification;
use crate::rational::{self, dot, QVec, Rational};

/// Refinement width for kink times, `2^-50 < 1e-15`.
pub const ROOT_BITS: u32 = 50;
/// Kink times closer than this are treated as one.
pub const CLUSTER_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CurveError {
    #[error("curve lives in R^{found} but the function takes {expected} inputs")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no stratum with id {0}")]
    UnknownStratum(usize),
    #[error("could not draw a transversal curve after {0} attempts")]
    NotTransversal(usize),
    #[error("curve needs at least one segment")]
    Empty,
}

/// One cubic piece `x(s) = c0 + c1 s + c2 s^2 + c3 s^3`, `s ∈ [0, 1]`,
/// traversed while global time runs over `[t0, t1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub t0: Rational,
    pub t1: Rational,
    pub coeffs: [QVec; 4],
}

impl Segment {
    /// Cubic Hermite piece with endpoint values and derivatives in the local parameter.
    pub fn hermite(t0: Rational, t1: Rational, p0: &[Rational], d0: &[Rational], p1: &[Rational], d1: &[Rational]) -> Self {
        let n = p0.len();
        let (three, two) = (rational::int(3), rational::int(2));
        let mut c2 = rational::zeros(n);
        let mut c3 = rational::zeros(n);
        for i in 0..n {
            c2[i] = -&three * &p0[i] - &two * &d0[i] + &three * &p1[i] - &d1[i];
            c3[i] = &two * &p0[i] + &d0[i] - &two * &p1[i] + &d1[i];
        }
        Self { t0, t1, coeffs: [p0.to_vec(), d0.to_vec(), c2, c3] }
    }

    pub fn linear(t0: Rational, t1: Rational, a: &[Rational], b: &[Rational]) -> Self {
        let n = a.len();
        Self { t0, t1, coeffs: [a.to_vec(), rational::sub(b, a), rational::zeros(n), rational::zeros(n)] }
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].len()
    }

    pub fn at(&self, s: &Rational) -> QVec {
        let mut x = self.coeffs[3].clone();
        for d in (0..3).rev() {
            x = x.iter().zip(&self.coeffs[d]).map(|(xi, ci)| xi * s + ci).collect();
        }
        x
    }

    /// `dx/ds` at `s`, in floating point.
    pub fn velocity(&self, s: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let c1 = rational::to_f64(&self.coeffs[1][i]);
            let c2 = rational::to_f64(&self.coeffs[2][i]);
            let c3 = rational::to_f64(&self.coeffs[3][i]);
            *o = c1 + s * (2.0 * c2 + s * 3.0 * c3);
        }
    }

    /// `form(x(s))` as a polynomial in `s`.
    pub fn compose(&self, form: &Affine) -> Poly {
        let mut cs: QVec = self.coeffs.iter().map(|c| dot(&form.grad, c)).collect();
        cs[0] += &form.offset;
        Poly::new(cs)
    }

    /// Whether `⟨x'(s), v⟩ ≡ 0` as a polynomial identity.
    pub fn orthogonal_to(&self, v: &[Rational]) -> bool {
        self.coeffs[1..].iter().all(|c| dot(c, v).is_zero())
    }

    fn time_at(&self, s: f64) -> f64 {
        let t0 = rational::to_f64(&self.t0);
        t0 + (rational::to_f64(&self.t1) - t0) * s
    }
}

/// A stretch of one segment between consecutive kink times, inside a single stratum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Piece {
    pub segment: usize,
    pub s0: f64,
    pub s1: f64,
    pub t0: f64,
    pub t1: f64,
    pub stratum: usize,
}

/// A continuous piecewise-cubic path together with its decomposition into
/// stratum-constant pieces for a fixed stratification.
#[derive(Debug, Clone)]
pub struct Curve {
    pub segments: Vec<Segment>,
    /// Index of the segment built inside `dwell_stratum`, if any.
    pub dwell_segment: Option<usize>,
    pub dwell_stratum: Option<usize>,
    pub seed: Option<u64>,
    pub kink_times: Vec<f64>,
    pub pieces: Vec<Piece>,
    /// Pairs (segment, stratum) where a segment lies entirely inside a lower-dimensional stratum.
    pub dwells: Vec<(usize, usize)>,
}

impl Curve {
    /// Analyzes the given segments; consecutive segments must share endpoints.
    pub fn from_segments(strat: &Stratification, segments: Vec<Segment>) -> Result<Self, CurveError> {
        let mut c = Curve {
            segments,
            dwell_segment: None,
            dwell_stratum: None,
            seed: None,
            kink_times: Vec::new(),
            pieces: Vec::new(),
            dwells: Vec::new(),
        };
        c.analyze(strat)?;
        Ok(c)
    }

    /// The straight path from `a` to `b`.
    pub fn line(strat: &Stratification, a: &[Rational], b: &[Rational]) -> Result<Self, CurveError> {
        Self::from_segments(strat, vec![Segment::linear(Rational::zero(), Rational::one(), a, b)])
    }

    pub fn dim(&self) -> usize {
        self.segments[0].dim()
    }

    pub fn start(&self) -> QVec {
        self.segments[0].coeffs[0].clone()
    }

    pub fn end(&self) -> QVec {
        self.segments.last().expect("nonempty").at(&Rational::one())
    }

    fn analyze(&mut self, strat: &Stratification) -> Result<(), CurveError> {
        if self.segments.is_empty() {
            return Err(CurveError::Empty);
        }
        let n = strat.dim();
        if let Some(s) = self.segments.iter().find(|s| s.dim() != n) {
            return Err(CurveError::DimensionMismatch { expected: n, found: s.dim() });
        }
        let forms: Vec<&Affine> = strat.argument_forms().iter().flatten().collect();
        self.kink_times.clear();
        self.pieces.clear();
        self.dwells.clear();
        for (j, seg) in self.segments.iter().enumerate() {
            let mut cuts: Vec<RootBracket> = Vec::new();
            for form in &forms {
                let p = seg.compose(form);
                if !p.is_zero() {
                    cuts.extend(roots_in_unit_interval(&p, ROOT_BITS));
                }
            }
            let zero = RootBracket { lo: Rational::zero(), hi: Rational::zero() };
            let one = RootBracket { lo: Rational::one(), hi: Rational::one() };
            self.kink_times.extend(cuts.iter().map(|r| seg.time_at(r.approx())));
            cuts.push(zero);
            cuts.push(one);
            cuts.sort_by(|a, b| a.lo.cmp(&b.lo));
            let mut merged: Vec<RootBracket> = Vec::new();
            for c in cuts {
                match merged.last_mut() {
                    Some(last) if c.lo <= last.hi || c.approx() - last.approx() < CLUSTER_TOL => {
                        if c.hi > last.hi {
                            last.hi = c.hi;
                        }
                    }
                    _ => merged.push(c),
                }
            }
            let two = rational::int(2);
            let mut strata_on_segment = Vec::new();
            for w in merged.windows(2) {
                if w[0].hi >= w[1].lo {
                    continue;
                }
                let mid = (&w[0].hi + &w[1].lo) / &two;
                let x = seg.at(&mid);
                let id = strat.locate(&Point::new(x)).expect("strata cover space").id;
                let s0 = if w[0].lo.is_zero() { 0.0 } else { w[0].approx() };
                let s1 = if w[1].hi.is_one() { 1.0 } else { w[1].approx() };
                strata_on_segment.push(id);
                self.pieces.push(Piece { segment: j, s0, s1, t0: seg.time_at(s0), t1: seg.time_at(s1), stratum: id });
            }
            if strata_on_segment.len() == 1 {
                let id = strata_on_segment[0];
                if !strat.stratum(id).is_full_dimensional() {
                    self.dwells.push((j, id));
                }
            }
        }
        self.kink_times.sort_by(f64::total_cmp);
        self.kink_times.dedup_by(|a, b| (*a - *b).abs() < CLUSTER_TOL);
        Ok(())
    }

    /// Pieces lying in a lower-dimensional stratum off the requested dwell segment.
    fn stray_lower_dim_pieces(&self, strat: &Stratification) -> bool {
        self.pieces
            .iter()
            .any(|p| Some(p.segment) != self.dwell_segment && !strat.stratum(p.stratum).is_full_dimensional())
    }

    /// For the dwell segment, whether its velocity is orthogonal to every normal of the stratum.
    pub fn dwell_orthogonal(&self, strat: &Stratification) -> Option<bool> {
        let (seg, id) = (self.dwell_segment?, self.dwell_stratum?);
        let s = &self.segments[seg];
        Some(strat.stratum(id).normal.iter().all(|nu| s.orthogonal_to(nu)))
    }
}

const MAX_ATTEMPTS: usize = 64;

fn random_vec(rng: &mut ChaCha8Rng, n: usize, range: i64, den: i64) -> QVec {
    (0..n).map(|_| rational::ratio(rng.gen_range(-range..=range), den)).collect()
}

/// Seeded random piecewise-cubic Hermite curve with 3 to 8 segments in `[-2, 2]^n`.
/// When `dwell` is given one whole segment is a straight path between two
/// interior points of that stratum, with matching end tangents.
pub fn make_curve(strat: &Stratification, seed: u64, dwell: Option<usize>) -> Result<Curve, CurveError> {
    let n = strat.dim();
    if let Some(id) = dwell {
        if id >= strat.len() {
            return Err(CurveError::UnknownStratum(id));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let m = rng.gen_range(3..=8usize);
        let h = rational::ratio(1, m as i64);
        let mut points: Vec<QVec> = (0..=m).map(|_| random_vec(&mut rng, n, 16, 8)).collect();
        let mut tangents: Vec<QVec> = (0..=m).map(|_| random_vec(&mut rng, n, 8, 4)).collect();
        let dwell_segment = dwell.map(|id| {
            let j = rng.gen_range(0..m);
            let spread = Rational::one();
            points[j] = strat.sample_in(id, &mut rng, &spread);
            points[j + 1] = strat.sample_in(id, &mut rng, &spread);
            let chord = rational::scale(&(Rational::one() / &h), &rational::sub(&points[j + 1], &points[j]));
            tangents[j] = chord.clone();
            tangents[j + 1] = chord;
            j
        });
        let segments = (0..m)
            .map(|j| {
                let t0 = &h * rational::int(j as i64);
                let t1 = &h * rational::int(j as i64 + 1);
                let d0 = rational::scale(&h, &tangents[j]);
                let d1 = rational::scale(&h, &tangents[j + 1]);
                Segment::hermite(t0, t1, &points[j], &d0, &points[j + 1], &d1)
            })
            .collect();
        let mut curve = Curve::from_segments(strat, segments)?;
        curve.seed = Some(seed);
        curve.dwell_segment = dwell_segment;
        curve.dwell_stratum = dwell;
        if curve.stray_lower_dim_pieces(strat) {
            continue;
        }
        return Ok(curve);
    }
    Err(CurveError::NotTransversal(MAX_ATTEMPTS))
}
