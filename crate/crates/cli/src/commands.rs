use serde::Serialize;

use pathfield::ad::{grad_forward, grad_reverse, ResolvedChoice};
use pathfield::descent::{run_descent, DescentConfig, DescentRun};
use pathfield::expr::{pattern_string, Expr};
use pathfield::polyhedral::{stratify, Certificate, StratificationDump, Stratification, WhitneyReport};
use pathfield::rational::{exact_strings, parse_rational};
use pathfield::report::{float17, float17_opt, float17_vec, fmt17};
use pathfield::verifier::{
    check_field_regularity, run_chain_suite, trial_rng, verify_structure_inclusion, BoxBounds, FieldSpec, FieldTable,
    PointPlan, RegularityReport, StructureReport, SuitePlan, SuiteReport, Tolerances, Verdict,
};

use crate::input::{self, CliError};
use crate::output;
use crate::{Cli, Command, DescendArgs, GradArgs, Mode, PointArgs, StratifyArgs, Suite, VerifyArgs};

/// Runs the parsed command. `Ok(false)` means a check failed.
pub fn run(cli: &Cli) -> Result<bool, CliError> {
    match &cli.command {
        Command::Grad(a) => grad(a),
        Command::Clarke(a) => clarke(cli, a),
        Command::Stratify(a) => stratify_cmd(cli, a),
        Command::Verify(a) => verify(cli, a),
        Command::Descend(a) => descend(cli, a),
    }
}

#[derive(Serialize)]
struct GradOut<'a> {
    function: String,
    mode: &'static str,
    point: Vec<String>,
    value: String,
    gradient: Vec<String>,
    pattern: String,
    policy: serde_json::Value,
    choices: &'a [ResolvedChoice],
}

fn grad(a: &GradArgs) -> Result<bool, CliError> {
    let f = input::load_function(&a.function.function)?;
    let x = input::load_point(&a.at, &f)?;
    let policy = match input::load_policies(&a.policy)?.as_slice() {
        [one] => one.clone(),
        _ => return Err(CliError::Policy(pathfield::ad::PolicyError::Invalid("grad takes a single policy".into()))),
    };
    let (mode, sample) = match a.mode {
        Mode::Forward => ("forward", grad_forward(&f, &x, &policy)?),
        Mode::Reverse => ("reverse", grad_reverse(&f, &x, &policy)?),
    };
    output::print(&GradOut {
        function: f.to_source(),
        mode,
        point: exact_strings(&x.coords),
        value: sample.value.to_string(),
        gradient: exact_strings(&sample.gradient),
        pattern: pattern_string(&sample.pattern),
        policy: policy.to_json(),
        choices: &sample.choices,
    })?;
    Ok(true)
}

#[derive(Serialize)]
struct ClarkeOut {
    function: String,
    point: Vec<String>,
    stratum: usize,
    pattern: String,
    vertices: Vec<Vec<String>>,
    min_norm_element: Vec<String>,
    #[serde(serialize_with = "float17")]
    stationarity_gap: f64,
}

fn clarke(cli: &Cli, a: &PointArgs) -> Result<bool, CliError> {
    let f = input::load_function(&a.function.function)?;
    let x = input::load_point(&a.at, &f)?;
    let strat = stratify(&f)?;
    let s = strat.locate(&x)?;
    let hull = strat.clarke(&x)?;
    let out = ClarkeOut {
        function: f.to_source(),
        point: exact_strings(&x.coords),
        stratum: s.id,
        pattern: s.pattern(),
        vertices: hull.to_strings(),
        min_norm_element: exact_strings(&hull.min_norm_point().0),
        stationarity_gap: hull.distance_to_origin(),
    };
    output::write_json(&cli.global.out, "clarke.json", &out)?;
    output::print(&out)?;
    Ok(true)
}

#[derive(Serialize)]
struct StratifyOut {
    stratification: StratificationDump,
    whitney_trials: usize,
    whitney_failures: usize,
    whitney: Vec<WhitneyReport>,
}

fn whitney_all(strat: &Stratification, trials: usize, seed: u64) -> Vec<WhitneyReport> {
    strat
        .incident_pairs()
        .into_iter()
        .enumerate()
        .map(|(i, (upper, lower))| strat.whitney_probe(upper, lower, trials, &mut trial_rng(seed, i as u64)))
        .collect()
}

fn stratify_cmd(cli: &Cli, a: &StratifyArgs) -> Result<bool, CliError> {
    let f = input::load_function(&a.function.function)?;
    let strat = stratify(&f)?;
    let whitney = whitney_all(&strat, a.whitney_trials, cli.global.seed);
    let failures: usize = whitney.iter().map(|w| w.failures).sum();
    let out = StratifyOut { stratification: strat.dump(), whitney_trials: a.whitney_trials, whitney_failures: failures, whitney };
    output::write_json(&cli.global.out, "stratification.json", &out)?;
    output::print(&out)?;
    Ok(failures == 0)
}

fn tolerances(cli: &Cli, quadrature: f64) -> Result<Tolerances, CliError> {
    let g = &cli.global;
    for (v, name) in [(g.tol_abs, "tol-abs"), (g.tol_rel, "tol-rel"), (quadrature, "tol-quad")] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::NonPositive(name));
        }
    }
    Ok(Tolerances { abs: g.tol_abs, rel: g.tol_rel, quadrature })
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    function: String,
    field: &'static str,
    radius: Option<String>,
    seed: u64,
    tolerances: Tolerances,
    chain: Option<&'a SuiteReport>,
    structure: Option<&'a StructureReport>,
    regularity: Option<&'a RegularityReport>,
    verdict: Verdict,
}

#[derive(Serialize)]
struct ChainSummary {
    curves: usize,
    dwell_curves: usize,
    passed: usize,
    failed: usize,
    #[serde(serialize_with = "float17")]
    worst_residual: f64,
    failing_trials: Vec<usize>,
    verdict: Verdict,
}

#[derive(Serialize)]
struct Violation<'a> {
    point: &'a [String],
    stratum: usize,
    value: &'a [String],
    certificate: &'a Certificate,
}

#[derive(Serialize)]
struct StructureSummary<'a> {
    points_checked: usize,
    values_checked: usize,
    violations: usize,
    uncertified: usize,
    certificates: Vec<Violation<'a>>,
    verdict: Verdict,
}

#[derive(Serialize)]
struct RegularitySummary {
    nonempty: bool,
    locally_bounded: bool,
    unbounded_strata: Vec<usize>,
    #[serde(serialize_with = "float17_opt")]
    bound: Option<f64>,
    closed: bool,
    verdict: Verdict,
}

#[derive(Serialize)]
struct VerifySummary<'a> {
    function: String,
    field: &'static str,
    radius: Option<String>,
    seed: u64,
    chain: Option<ChainSummary>,
    structure: Option<StructureSummary<'a>>,
    regularity: Option<RegularitySummary>,
    verdict: Verdict,
}

/// Cap on failing trials and certificates echoed to stdout; the report file has all of them.
const SUMMARY_LIMIT: usize = 20;

fn chain_csv(suite: &SuiteReport) -> (Vec<String>, Vec<Vec<String>>) {
    let header = ["trial", "curve_seed", "dwell_stratum", "segments", "kinks", "increment", "integral", "residual", "threshold", "verdict"];
    let rows = suite
        .reports
        .iter()
        .map(|r| {
            vec![
                r.trial.to_string(),
                r.seed.map(|s| s.to_string()).unwrap_or_default(),
                r.dwell_stratum.map(|s| s.to_string()).unwrap_or_default(),
                r.segments.to_string(),
                r.kink_times.len().to_string(),
                fmt17(r.increment_approx),
                fmt17(r.integral),
                fmt17(r.residual),
                fmt17(r.threshold),
                r.verdict.to_string(),
            ]
        })
        .collect();
    (header.iter().map(|s| s.to_string()).collect(), rows)
}

fn verify(cli: &Cli, a: &VerifyArgs) -> Result<bool, CliError> {
    let f = input::load_function(&a.function.function)?;
    let spec = input::field_spec(&a.field, &f)?;
    let tol = tolerances(cli, a.tol_quad)?;
    let half_width = input::positive(&a.box_radius, "box")?;
    let strat = stratify(&f)?;
    let seed = cli.global.seed;
    let wants = |s: Suite| a.suite == s || a.suite == Suite::All;

    let chain = wants(Suite::Chain)
        .then(|| {
            let plan = SuitePlan { curves: a.curves, selections: a.selections, seed, dwell: true };
            run_chain_suite(&strat, &spec, &plan, &tol)
        })
        .transpose()?;
    let structure = if wants(Suite::Structure) {
        let table = FieldTable::build(&strat, &spec)?;
        Some(verify_structure_inclusion(&strat, &table, &PointPlan { extra: Vec::new(), random: a.points, seed }))
    } else {
        None
    };
    let regularity = wants(Suite::Regularity)
        .then(|| check_field_regularity(&strat, &spec, &BoxBounds::symmetric(f.dim(), &half_width), a.points, seed))
        .transpose()?;

    let verdicts = [chain.as_ref().map(|c| c.verdict), structure.as_ref().map(|s| s.verdict), regularity.as_ref().map(|r| r.verdict)];
    let verdict = Verdict::from_pass(verdicts.iter().flatten().all(|v| v.is_pass()));
    let radius = spec.radius().map(|r| r.to_string());
    let report = VerifyReport {
        function: f.to_source(),
        field: spec.kind(),
        radius: radius.clone(),
        seed,
        tolerances: tol,
        chain: chain.as_ref(),
        structure: structure.as_ref(),
        regularity: regularity.as_ref(),
        verdict,
    };
    output::write_json(&cli.global.out, "verify-report.json", &report)?;
    if let Some(c) = &chain {
        let (header, rows) = chain_csv(c);
        output::write_csv(&cli.global.out, "verify-summary.csv", &header, &rows)?;
    }

    let summary = VerifySummary {
        function: f.to_source(),
        field: spec.kind(),
        radius,
        seed,
        chain: chain.as_ref().map(|c| ChainSummary {
            curves: c.curves,
            dwell_curves: c.dwell_curves,
            passed: c.passed,
            failed: c.failed,
            worst_residual: c.worst_residual,
            failing_trials: c.reports.iter().filter(|r| !r.passed()).map(|r| r.trial).take(SUMMARY_LIMIT).collect(),
            verdict: c.verdict,
        }),
        structure: structure.as_ref().map(|s| StructureSummary {
            points_checked: s.points_checked,
            values_checked: s.values_checked,
            violations: s.violations,
            uncertified: s.uncertified,
            certificates: s
                .violating()
                .take(SUMMARY_LIMIT)
                .map(|(p, v)| Violation { point: &p.point, stratum: p.stratum, value: &v.value, certificate: &v.certificate })
                .collect(),
            verdict: s.verdict,
        }),
        regularity: regularity.as_ref().map(|r| RegularitySummary {
            nonempty: r.nonempty,
            locally_bounded: r.locally_bounded,
            unbounded_strata: r.unbounded_strata.clone(),
            bound: r.bound,
            closed: r.closed,
            verdict: r.verdict,
        }),
        verdict,
    };
    output::print(&summary)?;
    Ok(verdict.is_pass())
}

#[derive(Serialize)]
struct DescendSummary<'a> {
    function: String,
    field: &'static str,
    start: &'a [String],
    alpha0: &'a str,
    steps: usize,
    seed: u64,
    final_point: &'a [String],
    #[serde(serialize_with = "float17_vec")]
    final_point_approx: Vec<f64>,
    final_value: &'a str,
    #[serde(serialize_with = "float17")]
    final_gap: f64,
    #[serde(serialize_with = "float17")]
    min_value: f64,
    diverged: bool,
}

fn trajectory_csv(run: &DescentRun, n: usize) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["k".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend(["f", "g_norm", "gap"].map(String::from));
    let mut rows: Vec<Vec<String>> = run
        .trajectory
        .iter()
        .map(|s| {
            let mut row = vec![s.k.to_string()];
            row.extend(s.x_approx.iter().map(|&v| fmt17(v)));
            row.push(fmt17(s.value_approx));
            row.push(fmt17(s.g_norm));
            row.push(s.gap.map(fmt17).unwrap_or_default());
            row
        })
        .collect();
    let mut last = vec![run.trajectory.len().to_string()];
    last.extend(run.final_point_approx.iter().map(|&v| fmt17(v)));
    let final_value = parse_rational(&run.final_value).map(|q| pathfield::rational::to_f64(&q)).unwrap_or(f64::NAN);
    last.push(fmt17(final_value));
    last.push(String::new());
    last.push(fmt17(run.final_gap));
    rows.push(last);
    (header, rows)
}

fn descend(cli: &Cli, a: &DescendArgs) -> Result<bool, CliError> {
    let f: Expr = input::load_function(&a.function.function)?;
    let spec: FieldSpec = input::field_spec(&a.field, &f)?;
    let x0 = input::load_point(&a.from, &f)?;
    let alpha0 = input::positive(&a.alpha0, "alpha0")?;
    let strat = stratify(&f)?;
    let run = run_descent(&strat, &spec, &x0, &DescentConfig::new(alpha0, a.steps, cli.global.seed))?;
    output::write_json(&cli.global.out, "descent.json", &run)?;
    let (header, rows) = trajectory_csv(&run, f.dim());
    output::write_csv(&cli.global.out, "trajectory.csv", &header, &rows)?;
    output::print(&DescendSummary {
        function: f.to_source(),
        field: run.field,
        start: &run.start,
        alpha0: &run.alpha0,
        steps: run.trajectory.len(),
        seed: run.seed,
        final_point: &run.final_point,
        final_point_approx: run.final_point_approx.clone(),
        final_value: &run.final_value,
        final_gap: run.final_gap,
        min_value: run.min_value,
        diverged: run.diverged,
    })?;
    Ok(true)
}
