//! Built-in test functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::{parse, Expr, ParseError};

/// Hand-written functions, shipped as `.fn` files.
pub const FIXED: &[(&str, &str)] = &[
    ("paperf", include_str!("../corpus/paperf.fn")),
    ("abs1d", include_str!("../corpus/abs1d.fn")),
    ("l1-2d", include_str!("../corpus/l1-2d.fn")),
    ("max2d", include_str!("../corpus/max2d.fn")),
    ("nested", include_str!("../corpus/nested.fn")),
    ("cross2d", include_str!("../corpus/cross2d.fn")),
    ("affine", include_str!("../corpus/affine.fn")),
];

/// Seeds of the generated members `rand-0` .. `rand-3`.
pub const RANDOM_SEEDS: [u64; 4] = [11, 23, 37, 41];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub name: String,
    pub source: String,
}

impl Entry {
    pub fn expr(&self) -> Result<Expr, ParseError> {
        parse(&self.source)
    }
}

/// Every corpus member in a fixed order: the hand-written ones, then the generated ones.
pub fn entries() -> Vec<Entry> {
    let fixed = FIXED.iter().map(|(n, s)| Entry { name: n.to_string(), source: s.to_string() });
    let generated = RANDOM_SEEDS
        .iter()
        .enumerate()
        .map(|(i, &seed)| Entry { name: format!("rand-{i}"), source: random_function(seed) });
    fixed.chain(generated).collect()
}

pub fn get(name: &str) -> Option<Entry> {
    entries().into_iter().find(|e| e.name == name)
}

fn coefficient(rng: &mut ChaCha8Rng) -> i64 {
    [-2, -1, 1, 2][rng.gen_range(0..4)]
}

fn affine_text(rng: &mut ChaCha8Rng, n: usize) -> String {
    let mut coeffs: Vec<i64> = (0..n).map(|_| rng.gen_range(-2..=2)).collect();
    if coeffs.iter().all(|&c| c == 0) {
        coeffs[rng.gen_range(0..n)] = 1;
    }
    let offset: i64 = rng.gen_range(-1..=1);
    let mut out = String::new();
    for (i, &c) in coeffs.iter().enumerate().filter(|(_, &c)| c != 0) {
        signed_term(&mut out, c, &format!("x{i}"));
    }
    if offset != 0 {
        out.push_str(if offset < 0 { " - " } else { " + " });
        out.push_str(&offset.abs().to_string());
    }
    out
}

fn signed_term(out: &mut String, c: i64, term: &str) {
    if out.is_empty() {
        if c < 0 {
            out.push('-');
        }
    } else {
        out.push_str(if c < 0 { " - " } else { " + " });
    }
    if c.abs() != 1 {
        out.push_str(&format!("{}*", c.abs()));
    }
    out.push_str(term);
}

/// A seeded piecewise-affine function in 2 or 3 variables with 2 to 4 kinks and
/// small integer coefficients. Later kinks may take an earlier one as input.
pub fn random_function(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=3usize);
    let kinks = rng.gen_range(2..=4usize);
    let mut terms: Vec<String> = Vec::new();
    let mut term_kinks: Vec<usize> = Vec::new();
    while term_kinks.iter().sum::<usize>() < kinks {
        let used: usize = term_kinks.iter().sum();
        let mut arg = affine_text(&mut rng, n);
        let mut count = 1;
        if !terms.is_empty() && rng.gen_bool(0.3) {
            let j = rng.gen_range(0..terms.len());
            if used + 1 + term_kinks[j] <= kinks {
                arg = format!("{arg} + {}", terms[j]);
                count += term_kinks[j];
            }
        }
        term_kinks.push(count);
        let term = match rng.gen_range(0..4) {
            0 => format!("relu({arg})"),
            1 => format!("abs({arg})"),
            op => {
                let other = affine_text(&mut rng, n);
                let name = if op == 2 { "max" } else { "min" };
                format!("{name}({arg}, {other})")
            }
        };
        terms.push(term);
    }
    let mut body = String::new();
    for t in &terms {
        signed_term(&mut body, coefficient(&mut rng), t);
    }
    let tail = affine_text(&mut rng, n);
    let tail = tail.strip_prefix('-').map_or(format!(" + {tail}"), |rest| format!(" - {rest}"));
    format!("# generated, seed {seed}\ndim {n};\n{body}{tail}\n")
}
