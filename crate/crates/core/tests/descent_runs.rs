use pathfield::ad::SelectionPolicy;
use pathfield::corpus;
use pathfield::descent::{run_descent, running_min, DescentConfig};
use pathfield::expr::Point;
use pathfield::polyhedral::stratify;
use pathfield::rational::{int, ratio};
use pathfield::verifier::FieldSpec;

fn start(n: usize) -> Point {
    Point::new((0..n).map(|i| ratio(3 + i as i64, 2)).collect())
}

#[test]
fn best_value_never_increases_with_more_steps() {
    for name in ["paperf", "abs1d", "l1-2d", "max2d", "affine"] {
        let strat = stratify(&corpus::get(name).unwrap().expr().unwrap()).unwrap();
        let x0 = start(strat.dim());
        let mut previous = f64::INFINITY;
        for steps in [5, 10, 20, 40, 80] {
            let run = run_descent(&strat, &FieldSpec::Clarke, &x0, &DescentConfig::new(ratio(1, 10), steps, 0)).unwrap();
            let best = *running_min(&run).last().unwrap();
            assert!(best <= previous, "{name}: K={steps}");
            previous = best;
        }
    }
}

#[test]
fn anomalous_policy_moves_off_a_flat_function() {
    let strat = stratify(&corpus::get("paperf").unwrap().expr().unwrap()).unwrap();
    let field = FieldSpec::Policy(vec![SelectionPolicy::default()]);
    let run = run_descent(&strat, &field, &Point::from_ints(&[0]), &DescentConfig::new(int(1), 3, 0)).unwrap();
    assert_eq!(run.trajectory[0].g, vec!["1"]);
    assert_eq!(run.trajectory[1].x, vec!["-1"]);
    assert!(run.trajectory.iter().all(|s| s.value == "0"));
    assert_eq!(run.trajectory[0].gap, Some(0.0));
}

#[test]
fn runs_repeat_under_a_seed() {
    let strat = stratify(&corpus::get("nested").unwrap().expr().unwrap()).unwrap();
    let field = FieldSpec::truncated(int(1));
    let cfg = DescentConfig::new(ratio(1, 2), 60, 17);
    let a = run_descent(&strat, &field, &Point::from_ints(&[1]), &cfg).unwrap();
    let b = run_descent(&strat, &field, &Point::from_ints(&[1]), &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
