use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

const MAX_INTERVALS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("quadrature on [{a}, {b}] stalled with error estimate {estimate:e} above {target:e}")]
pub struct QuadratureError {
    pub a: f64,
    pub b: f64,
    pub estimate: f64,
    pub target: f64,
}

fn rules() -> &'static (GaussLegendre, GaussLegendre) {
    static RULES: OnceLock<(GaussLegendre, GaussLegendre)> = OnceLock::new();
    RULES.get_or_init(|| {
        let n = |k| GaussLegendre::new(NonZeroUsize::new(k).unwrap());
        (n(5), n(10))
    })
}

/// Globally adaptive Gauss–Legendre: a 5-point and a 10-point rule are
/// compared on each subinterval and the worst one is bisected until the summed
/// estimate is within `target`. Returns the integral and that estimate.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, target: f64) -> Result<(f64, f64), QuadratureError> {
    let (coarse, fine) = rules();
    let mut rule = |lo: f64, hi: f64| {
        let i10 = fine.integrate(lo, hi, &mut f);
        (lo, hi, i10, (i10 - coarse.integrate(lo, hi, &mut f)).abs())
    };
    let mut parts = vec![rule(a, b)];
    loop {
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= target {
            return Ok((parts.iter().map(|p| p.2).sum(), err));
        }
        if parts.len() >= MAX_INTERVALS {
            return Err(QuadratureError { a, b, estimate: err, target });
        }
        let worst = (0..parts.len()).max_by(|&i, &j| parts[i].3.total_cmp(&parts[j].3)).unwrap();
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        parts.push(rule(lo, mid));
        parts.push(rule(mid, hi));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_polynomials() {
        let (v, e) = integrate(|t| 3.0 * t * t - 2.0 * t + 1.0, 0.0, 2.0, 1e-10).unwrap();
        assert!((v - 6.0).abs() < 1e-13);
        assert!(e < 1e-10);
    }

    #[test]
    fn adapts_on_kinked_integrand() {
        // |t - 1/3| integrates to (1/3)^2/2 + (2/3)^2/2 = 5/18
        let (v, _) = integrate(|t| (t - 1.0 / 3.0).abs(), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 5.0 / 18.0).abs() < 1e-10);
    }

    #[test]
    fn reports_failure() {
        let r = integrate(|t| (1.0 / t).sin(), 1e-9, 1.0, 1e-14);
        assert!(r.is_err());
    }
}
