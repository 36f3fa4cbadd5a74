//! Exact Gaussian elimination over the rationals.

use num_traits::{One, Zero};

use crate::rational::{axpy, dot, QVec, Rational};

/// Reduced row echelon form of `rows` (each of length `ncols`).
/// Returns the nonzero reduced rows and their pivot columns.
pub fn rref(rows: &[QVec], ncols: usize) -> (Vec<QVec>, Vec<usize>) {
    let mut m: Vec<QVec> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == m.len() {
            break;
        }
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = Rational::one() / &m[r][c];
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = -row[c].clone();
                axpy(row, &f, &pivot_row);
            }
        }
        pivots.push(c);
        r += 1;
    }
    m.truncate(r);
    (m, pivots)
}

pub fn rank(rows: &[QVec], ncols: usize) -> usize {
    rref(rows, ncols).1.len()
}

/// Canonical basis of the row space (the nonzero RREF rows).
pub fn row_space_basis(rows: &[QVec], ncols: usize) -> Vec<QVec> {
    rref(rows, ncols).0
}

/// Basis of `{ x : row · x = 0 for every row }`.
pub fn null_space_basis(rows: &[QVec], ncols: usize) -> Vec<QVec> {
    let (r, pivots) = rref(rows, ncols);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Rational::zero(); ncols];
            v[f] = Rational::one();
            for (row, &p) in r.iter().zip(&pivots) {
                v[p] = -row[f].clone();
            }
            v
        })
        .collect()
}

/// One solution of `A x = b`, or `None` when the system is inconsistent.
pub fn solve(a: &[QVec], b: &[Rational], ncols: usize) -> Option<QVec> {
    let aug: Vec<QVec> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let (r, pivots) = rref(&aug, ncols + 1);
    if pivots.last() == Some(&ncols) {
        return None;
    }
    let mut x = vec![Rational::zero(); ncols];
    for (row, &p) in r.iter().zip(&pivots) {
        x[p] = row[ncols].clone();
    }
    Some(x)
}

/// Coefficients expressing `v` in terms of `basis`, if `v` lies in its span.
pub fn span_coefficients(basis: &[QVec], v: &[Rational]) -> Option<QVec> {
    let n = v.len();
    if basis.is_empty() {
        return v.iter().all(Zero::is_zero).then(Vec::new);
    }
    // Columns are basis vectors: solve B c = v.
    let rows: Vec<QVec> = (0..n).map(|i| basis.iter().map(|b| b[i].clone()).collect()).collect();
    solve(&rows, v, basis.len())
}

pub fn in_span(basis: &[QVec], v: &[Rational]) -> bool {
    span_coefficients(basis, v).is_some()
}

/// Pairwise orthogonal (not normalized) basis of the same span.
pub fn orthogonalize(basis: &[QVec]) -> Vec<QVec> {
    let mut out: Vec<QVec> = Vec::with_capacity(basis.len());
    for b in basis {
        let mut v = b.clone();
        for u in &out {
            let c = dot(&v, u) / dot(u, u);
            let neg = -c;
            axpy(&mut v, &neg, u);
        }
        if !v.iter().all(Zero::is_zero) {
            out.push(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn v(xs: &[i64]) -> QVec {
        xs.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn null_space_is_orthogonal_to_rows() {
        let rows = vec![v(&[1, 2, 3]), v(&[2, 4, 6]), v(&[0, 1, 1])];
        assert_eq!(rank(&rows, 3), 2);
        let ns = null_space_basis(&rows, 3);
        assert_eq!(ns.len(), 1);
        for r in &rows {
            assert!(dot(r, &ns[0]).is_zero());
        }
    }

    #[test]
    fn solve_detects_inconsistency() {
        let a = vec![v(&[1, 1]), v(&[2, 2])];
        assert!(solve(&a, &v(&[1, 3]), 2).is_none());
        let x = solve(&a, &v(&[1, 2]), 2).unwrap();
        assert_eq!(&x[0] + &x[1], int(1));
    }

    #[test]
    fn span_membership() {
        let basis = vec![v(&[1, 0, 1])];
        assert_eq!(span_coefficients(&basis, &v(&[3, 0, 3])), Some(v(&[3])));
        assert!(!in_span(&basis, &v(&[1, 1, 1])));
        assert!(in_span(&[], &v(&[0, 0])));
        assert!(!in_span(&[], &v(&[0, 1])));
    }

    #[test]
    fn orthogonalize_preserves_span() {
        let b = orthogonalize(&[v(&[1, 1, 0]), v(&[1, 0, 1])]);
        assert_eq!(b.len(), 2);
        assert!(dot(&b[0], &b[1]).is_zero());
        assert!(in_span(&b, &v(&[2, 1, 1])));
    }
}
