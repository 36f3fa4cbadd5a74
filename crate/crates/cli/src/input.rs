use std::path::Path;

use pathfield::ad::{AdError, PolicyError, SelectionPolicy};
use pathfield::corpus;
use pathfield::descent::DescentError;
use pathfield::expr::{parse, Expr, ExprError, ParseError, Point};
use pathfield::polyhedral::PolyError;
use pathfield::rational::{parse_rational, Rational, RationalParseError};
use pathfield::verifier::{FieldError, FieldSpec, VerifyError};

use crate::{FieldArgs, FieldKind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("`{0}` is neither a readable file nor a corpus function")]
    UnknownFunction(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{name}: {source}")]
    Parse { name: String, source: ParseError },
    #[error("point has {found} coordinates, the function takes {expected}")]
    PointDimension { expected: usize, found: usize },
    #[error("--{0} must be positive")]
    NonPositive(&'static str),
    #[error("--r only applies to --field clarke+normal")]
    StrayRadius,
    #[error(transparent)]
    Number(#[from] RationalParseError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Descent(#[from] DescentError),
    #[error("writing report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("writing report: {0}")]
    Csv(#[from] csv::Error),
}

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

/// Loads `--fn`: a file if one exists at that path, otherwise a corpus member
/// by name with or without the `.fn` extension.
pub fn load_function(arg: &str) -> Result<Expr, CliError> {
    let path = Path::new(arg);
    let (name, source) = if path.is_file() {
        (arg.to_string(), read(path)?)
    } else {
        let name = arg.strip_suffix(".fn").unwrap_or(arg);
        let entry = corpus::get(name).ok_or_else(|| CliError::UnknownFunction(arg.to_string()))?;
        (entry.name, entry.source)
    };
    parse(&source).map_err(|source| CliError::Parse { name, source })
}

pub fn load_point(text: &str, f: &Expr) -> Result<Point, CliError> {
    let p = Point::parse(text)?;
    if p.dim() != f.dim() {
        return Err(CliError::PointDimension { expected: f.dim(), found: p.dim() });
    }
    Ok(p)
}

pub fn load_policies(arg: &str) -> Result<Vec<SelectionPolicy>, CliError> {
    Ok(match arg {
        "default" => vec![SelectionPolicy::default()],
        "family" => SelectionPolicy::standard_family(),
        path => vec![SelectionPolicy::from_json(&read(Path::new(path))?)?],
    })
}

pub fn positive(text: &str, what: &'static str) -> Result<Rational, CliError> {
    let q = parse_rational(text)?;
    if q <= Rational::from_integer(0.into()) {
        return Err(CliError::NonPositive(what));
    }
    Ok(q)
}

pub fn field_spec(args: &FieldArgs, f: &Expr) -> Result<FieldSpec, CliError> {
    if args.r.is_some() && args.field != FieldKind::ClarkeNormal {
        return Err(CliError::StrayRadius);
    }
    Ok(match args.field {
        FieldKind::Policy => FieldSpec::Policy(load_policies(&args.policy)?),
        FieldKind::Clarke => FieldSpec::Clarke,
        FieldKind::ClarkeNormal => {
            let radius = args.r.as_deref().map(|r| positive(r, "r")).transpose()?;
            FieldSpec::ClarkePlusNormal { radius }
        }
        FieldKind::Zero => FieldSpec::zero(f.dim()),
    })
}
